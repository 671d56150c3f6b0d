use std::fs;
use std::path::Path;

use super::{Image, ImageError};

/// Round-half-up quantization to a byte.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Encodes as binary PGM (`P5`, one channel) or PPM (`P6`, three channels).
pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&v| quantize(v)));
    out
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(img)).map_err(|source| ImageError::Io { path: path.display().to_string(), source })
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ImageError::Io { path: path.display().to_string(), source })?;
    decode_pnm(&bytes)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::MalformedHeader(format!("unparsable {what}")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image, ImageError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(ImageError::MalformedHeader("missing P5/P6 magic".into()));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        other => return Err(ImageError::MalformedHeader(format!("unsupported magic P{}", other as char))),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.token("width")? as usize;
    let height = cur.token("height")? as usize;
    let maxval = cur.token("max value")?;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxValue(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(ImageError::MalformedHeader("missing separator after max value".into())),
    }
    let expected = width * height * channels;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(ImageError::Truncated { expected, found: payload.len() });
    }
    let pixels = payload[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(height, width, channels, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_grayscale_bytes() {
        let mut data = b"P5\n2 2\n255\n".to_vec();
        data.extend([0u8, 255, 127, 0]);
        let img = decode_pnm(&data).unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (2, 2, 1));
        assert_eq!(img.pixels(), &[0.0, 1.0, 127.0 / 255.0, 0.0]);
    }

    #[test]
    fn decodes_saturated_color() {
        let mut data = b"P6\n2 2\n255\n".to_vec();
        data.extend([255u8; 12]);
        let img = decode_pnm(&data).unwrap();
        assert_eq!(img.channels(), 3);
        assert!(img.pixels().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn encodes_zero_and_half() {
        let img = Image::filled(1, 1, 1, 0.0).unwrap();
        assert_eq!(encode_pnm(&img), b"P5\n1 1\n255\n\x00".to_vec());
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(1.0), 255);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut data = b"P5\n# made by hand\n1 1\n255\n".to_vec();
        data.push(10);
        assert_eq!(decode_pnm(&data).unwrap().pixels(), &[10.0 / 255.0]);
    }

    #[test]
    fn error_kinds_are_distinct() {
        assert!(matches!(decode_pnm(b"P3\n1 1\n255\n0"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(decode_pnm(b"P5\n1 x\n255\n0"), Err(ImageError::MalformedHeader(_))));
        assert!(matches!(decode_pnm(b"P5\n1 1\n65535\n00"), Err(ImageError::UnsupportedMaxValue(65535))));
        assert!(matches!(decode_pnm(b"P6\n2 1\n255\n\x01\x02"), Err(ImageError::Truncated { expected: 6, found: 2 })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        let img = Image::from_fn(3, 4, 3, |r, c, ch| ((r * 7 + c * 3 + ch) % 11) as f64 / 10.0);
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        let quantized: Vec<f64> = img.pixels().iter().map(|&v| quantize(v) as f64 / 255.0).collect();
        assert_eq!(back.pixels(), quantized.as_slice());
        assert!(matches!(load_image(dir.path().join("missing.ppm")), Err(ImageError::Io { .. })));
    }
}
