use super::Image;

/// Foreground threshold used when cropping synthetic samples (backgrounds are near-black).
pub const DEFAULT_CROP_THRESHOLD: f64 = 0.1;

#[inline]
pub(crate) fn luma(r: f64, g: f64, b: f64) -> f64 {
    ((299.0 * r + 587.0 * g + 114.0 * b) / 1000.0).clamp(0.0, 1.0)
}

pub fn to_grayscale(img: &Image) -> Image {
    if img.channels() == 1 {
        return img.clone();
    }
    Image::from_fn(img.height(), img.width(), 1, |r, c, _| img.luminance(r, c))
}

/// Counter-clockwise rotation by `quarter_turns * 90` degrees (taken modulo 4).
///
/// One turn maps output pixel `(r, c)` to input pixel `(c, W - 1 - r)`.
pub fn rotate90(img: &Image, quarter_turns: u32) -> Image {
    let mut out = img.clone();
    for _ in 0..quarter_turns % 4 {
        let (h, w, ch) = (out.height(), out.width(), out.channels());
        let src = &out;
        out = Image::from_fn(w, h, ch, |r, c, k| src.get(c, w - 1 - r, k));
    }
    out
}

/// Inclusive bounds `(top, left, bottom, right)` of pixels whose luminance exceeds `threshold`.
pub fn crop_bounds(img: &Image, threshold: f64) -> Option<(usize, usize, usize, usize)> {
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for r in 0..img.height() {
        for c in 0..img.width() {
            if img.luminance(r, c) > threshold {
                bounds = Some(match bounds {
                    None => (r, c, r, c),
                    Some((t, l, b, rt)) => (t.min(r), l.min(c), b.max(r), rt.max(c)),
                });
            }
        }
    }
    bounds
}

/// Crops to the minimal rectangle holding every pixel brighter than `threshold`.
/// Images without foreground are returned unchanged.
pub fn bounding_box_crop(img: &Image, threshold: f64) -> Image {
    debug_assert!((0.0..1.0).contains(&threshold));
    match crop_bounds(img, threshold) {
        None => img.clone(),
        Some((top, left, bottom, right)) => {
            Image::from_fn(bottom - top + 1, right - left + 1, img.channels(), |r, c, k| img.get(top + r, left + c, k))
        }
    }
}

/// Bilinear resampling with half-pixel centers: output pixel `d` samples
/// source coordinate `(d + 0.5) * in / out - 0.5`, clamped to the valid range.
pub fn resize_bilinear(img: &Image, new_h: usize, new_w: usize) -> Image {
    assert!(new_h >= 1 && new_w >= 1, "resize target must be non-empty");
    if new_h == img.height() && new_w == img.width() {
        return img.clone();
    }
    let rows = sample_axis(img.height(), new_h);
    let cols = sample_axis(img.width(), new_w);
    Image::from_fn(new_h, new_w, img.channels(), |r, c, k| {
        let (r0, r1, fr) = rows[r];
        let (c0, c1, fc) = cols[c];
        let top = img.get(r0, c0, k) * (1.0 - fc) + img.get(r0, c1, k) * fc;
        let bottom = img.get(r1, c0, k) * (1.0 - fc) + img.get(r1, c1, k) * fc;
        top * (1.0 - fr) + bottom * fr
    })
}

fn sample_axis(len_in: usize, len_out: usize) -> Vec<(usize, usize, f64)> {
    let scale = len_in as f64 / len_out as f64;
    (0..len_out)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (len_in - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(len_in - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}
