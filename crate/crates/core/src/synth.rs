//! Seeded procedural stand-in for an industrial biscuit-inspection corpus.
//!
//! Every sample is a ring-shaped biscuit on a dark background. The three
//! defect classes are rendered as edits of the OK render for the same seed,
//! so a defect image differs from its OK twin only inside the defect region.
//!
//! # Seeding
//!
//! Sample `i` of a dataset with master seed `m` is rendered from
//! `seed_i = m ^ mix(i)`, where `mix` is the SplitMix64 finalizer
//! (see [`crate::rng`]). Rendering draws the OK appearance from `seed_i` and
//! the defect geometry from a second stream `mix(seed_i ^ DEFECT_SALT)`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::image::{bounding_box_crop, resize_bilinear, rotate90, save_image, Image, ImageError, DEFAULT_CROP_THRESHOLD};
use crate::rng::{derive_seed, mix, rng_from_seed, Rng};

const DEFECT_SALT: u64 = 0xD3FE_C7D3_FEC7_0001;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
    #[error("NOK ratio cannot be normalized: {0:?}")]
    BadRatio([f64; 3]),
    #[error("invalid split counts: {0}")]
    BadCounts(String),
    #[error("cannot write dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("manifest error: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DefectKind {
    Ok,
    NotComplete,
    StrangeObject,
    ColorDefect,
}

impl DefectKind {
    pub const ALL: [DefectKind; 4] = [DefectKind::Ok, DefectKind::NotComplete, DefectKind::StrangeObject, DefectKind::ColorDefect];
    pub const NOK: [DefectKind; 3] = [DefectKind::NotComplete, DefectKind::StrangeObject, DefectKind::ColorDefect];

    pub fn as_str(self) -> &'static str {
        match self {
            DefectKind::Ok => "OK",
            DefectKind::NotComplete => "NOT_COMPLETE",
            DefectKind::StrangeObject => "STRANGE_OBJECT",
            DefectKind::ColorDefect => "COLOR_DEFECT",
        }
    }

    pub fn is_ok(self) -> bool {
        self == DefectKind::Ok
    }
}

impl fmt::Display for DefectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DefectKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DefectKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown label {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub image_size: usize,
    /// Outer ring radius as a fraction of half the image size.
    pub ring_outer_radius: f64,
    /// Inner (hole) radius as a fraction of half the image size.
    pub ring_inner_radius: f64,
    pub texture_amplitude: f64,
    pub background_level: f64,
    pub defect_magnitude: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            image_size: 256,
            ring_outer_radius: 0.85,
            ring_inner_radius: 0.35,
            texture_amplitude: 0.06,
            background_level: 0.04,
            defect_magnitude: 0.3,
            seed: 42,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: &str| Err(SynthError::InvalidParams(m.to_string()));
        if self.image_size < 8 {
            return err("image_size must be at least 8");
        }
        if !(self.ring_outer_radius > 0.0 && self.ring_outer_radius <= 1.0) {
            return err("ring_outer_radius must lie in (0,1]");
        }
        if !(self.ring_inner_radius >= 0.0 && self.ring_inner_radius < self.ring_outer_radius) {
            return err("ring_inner_radius must be non-negative and below ring_outer_radius");
        }
        for (name, v) in [("texture_amplitude", self.texture_amplitude), ("background_level", self.background_level)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::InvalidParams(format!("{name} must lie in [0,1]")));
            }
        }
        if !(self.defect_magnitude > 0.0 && self.defect_magnitude <= 1.0) {
            return err("defect_magnitude must lie in (0,1]");
        }
        Ok(())
    }
}

/// Appearance of one OK biscuit, drawn from the sample seed.
struct Biscuit {
    cx: f64,
    cy: f64,
    outer: f64,
    inner: f64,
    base: [f64; 3],
    bumps: Vec<(f64, f64, f64, f64)>,
}

impl Biscuit {
    fn draw(rng: &mut Rng, p: &SynthParams) -> Self {
        let s = p.image_size as f64;
        let half = s / 2.0;
        let jitter = |rng: &mut Rng, a: f64| (rng.random::<f64>() * 2.0 - 1.0) * a;
        let cx = half + jitter(rng, 0.03 * s);
        let cy = half + jitter(rng, 0.03 * s);
        let scale = 1.0 + jitter(rng, 0.03);
        let outer = p.ring_outer_radius * half * scale;
        let inner = p.ring_inner_radius * half * scale;
        let tint = jitter(rng, 0.03);
        let base = [0.80 + tint, 0.58 + tint, 0.30 + 0.5 * tint];
        let bumps = (0..10)
            .map(|_| {
                let ang = rng.random::<f64>() * TAU;
                let rad = inner + rng.random::<f64>() * (outer - inner);
                let width = (0.04 + 0.08 * rng.random::<f64>()) * s;
                let amp = jitter(rng, p.texture_amplitude);
                (cx + rad * ang.cos(), cy + rad * ang.sin(), width, amp)
            })
            .collect();
        Self { cx, cy, outer, inner, base, bumps }
    }

    fn coverage(&self, r: f64, c: f64) -> f64 {
        let d = (r - self.cy).hypot(c - self.cx);
        (self.outer - d + 0.5).clamp(0.0, 1.0) * (d - self.inner + 0.5).clamp(0.0, 1.0)
    }

    fn texture(&self, r: f64, c: f64) -> f64 {
        self.bumps
            .iter()
            .map(|&(bx, by, w, a)| a * (-((c - bx).powi(2) + (r - by).powi(2)) / (2.0 * w * w)).exp())
            .sum()
    }

    fn angle(&self, r: f64, c: f64) -> f64 {
        (r - self.cy).atan2(c - self.cx).rem_euclid(TAU)
    }

    fn mid_radius(&self) -> f64 {
        0.5 * (self.inner + self.outer)
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn smooth_window(t: f64) -> f64 {
    // 1 at t=0, 0 for |t| >= 1
    if t.abs() >= 1.0 {
        0.0
    } else {
        let c = (0.5 * PI * t).cos();
        c * c
    }
}

/// Renders one sample. Deterministic in `(kind, seed, params)`.
pub fn synth_sample(kind: DefectKind, seed: u64, params: &SynthParams) -> Result<Image, SynthError> {
    params.validate()?;
    let size = params.image_size;
    let mut rng = rng_from_seed(seed);
    let biscuit = Biscuit::draw(&mut rng, params);

    let n = size * size;
    let mut noise = Vec::with_capacity(n * 2);
    for _ in 0..n * 2 {
        let z: f64 = StandardNormal.sample(&mut rng);
        noise.push(z);
    }

    let mut drng = rng_from_seed(mix(seed ^ DEFECT_SALT));
    let m = params.defect_magnitude;
    let defect_angle = drng.random::<f64>() * TAU;
    let channel = drng.random_range(0..3usize);
    let blob_radial = (drng.random::<f64>() * 2.0 - 1.0) * 0.25;

    let bg = params.background_level;
    let s = size as f64;
    let mut pixels = Vec::with_capacity(n * 3);
    for row in 0..size {
        for col in 0..size {
            let (r, c) = (row as f64 + 0.5, col as f64 + 0.5);
            let idx = row * size + col;
            let bg_px = (bg + 0.01 * noise[2 * idx]).clamp(0.0, 1.0);
            let mut cover = biscuit.coverage(r, c);
            let shade = biscuit.texture(r, c) + 0.015 * noise[2 * idx + 1];
            let mut fg = biscuit.base.map(|b| (b + shade).clamp(0.0, 1.0));

            match kind {
                DefectKind::Ok => {}
                DefectKind::NotComplete => {
                    let half_width = (0.20 + 0.6 * m) * 0.5 * PI;
                    if angular_distance(biscuit.angle(r, c), defect_angle) < half_width {
                        cover = 0.0;
                    }
                }
                DefectKind::StrangeObject => {
                    let rad = biscuit.mid_radius() + blob_radial * (biscuit.outer - biscuit.inner);
                    let (ox, oy) = (biscuit.cx + rad * defect_angle.cos(), biscuit.cy + rad * defect_angle.sin());
                    let blob_r = (0.02 + 0.05 * m) * s;
                    let w = (blob_r - (c - ox).hypot(r - oy) + 0.5).clamp(0.0, 1.0);
                    if w > 0.0 {
                        let object = [0.10, 0.16, 0.12];
                        for k in 0..3 {
                            fg[k] = fg[k] * (1.0 - w) + object[k] * w;
                        }
                        cover = cover.max(w);
                    }
                }
                DefectKind::ColorDefect => {
                    let half_width = 0.35 + 0.6 * m;
                    let w = smooth_window(angular_distance(biscuit.angle(r, c), defect_angle) / half_width);
                    if w > 0.0 && cover > 0.0 {
                        let shift = (0.25 + 0.5 * m) * w;
                        let v = fg[channel];
                        fg[channel] = if v > 0.5 { v - shift } else { v + shift }.clamp(0.0, 1.0);
                    }
                }
            }
            for k in 0..3 {
                pixels.push(bg_px * (1.0 - cover) + fg[k] * cover);
            }
        }
    }
    Ok(Image::new(size, size, 3, pixels)?)
}

/// Applies the dataset preprocessing: quarter-turn augmentation, bounding-box
/// crop, and resize back to the working resolution.
pub fn preprocess(img: &Image, quarter_turns: u32, size: usize) -> Image {
    let rotated = rotate90(img, quarter_turns);
    let cropped = bounding_box_crop(&rotated, DEFAULT_CROP_THRESHOLD);
    resize_bilinear(&cropped, size, size)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

/// Sample counts per split. Train and val are OK-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test_ok: usize,
    pub test_nok: usize,
}

impl SplitCounts {
    /// 1000 train / 2000 val / 200 OK + 200 NOK test.
    pub const FULL: SplitCounts = SplitCounts { train: 1000, val: 2000, test_ok: 200, test_nok: 200 };
    /// 200 train / 100 val / 40 OK + 40 NOK test.
    pub const DESK: SplitCounts = SplitCounts { train: 200, val: 100, test_ok: 40, test_nok: 40 };

    pub fn total(&self) -> usize {
        self.train + self.val + self.test_ok + self.test_nok
    }
}

/// NOT_COMPLETE : STRANGE_OBJECT : COLOR_DEFECT.
pub const DEFAULT_NOK_RATIO: [f64; 3] = [0.4, 0.3, 0.3];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub sample_id: String,
    pub path: PathBuf,
    pub label: DefectKind,
    pub split: Split,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.csv";

/// Splits `total` into integer parts proportional to `ratio` by the
/// largest-remainder method; ties go to the lower index.
pub fn largest_remainder(total: usize, ratio: [f64; 3]) -> Result<[usize; 3], SynthError> {
    let sum: f64 = ratio.iter().sum();
    if ratio.iter().any(|r| !r.is_finite() || *r < 0.0) || !(sum > 0.0) {
        return Err(SynthError::BadRatio(ratio));
    }
    let quotas = ratio.map(|r| total as f64 * r / sum);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let mut left = total - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    Ok(counts)
}

/// Builds the manifest (ids, labels, splits, seeds) without rendering anything.
pub fn plan_manifest(counts: SplitCounts, nok_ratio: [f64; 3], master_seed: u64) -> Result<DatasetManifest, SynthError> {
    if counts.train == 0 || counts.test_ok + counts.test_nok == 0 {
        return Err(SynthError::BadCounts(format!("{counts:?}")));
    }
    let nok = largest_remainder(counts.test_nok, nok_ratio)?;
    let mut plan: Vec<(DefectKind, Split)> = Vec::with_capacity(counts.total());
    plan.extend(std::iter::repeat_n((DefectKind::Ok, Split::Train), counts.train));
    plan.extend(std::iter::repeat_n((DefectKind::Ok, Split::Val), counts.val));
    plan.extend(std::iter::repeat_n((DefectKind::Ok, Split::Test), counts.test_ok));
    for (kind, n) in DefectKind::NOK.into_iter().zip(nok) {
        plan.extend(std::iter::repeat_n((kind, Split::Test), n));
    }
    let records = plan
        .into_iter()
        .enumerate()
        .map(|(i, (label, split))| {
            let sample_id = format!("s{i:05}");
            ManifestRecord {
                path: PathBuf::from("images").join(format!("{sample_id}.ppm")),
                sample_id,
                label,
                split,
                seed: derive_seed(master_seed, i as u64),
            }
        })
        .collect();
    Ok(DatasetManifest { records })
}

/// Renders and writes the whole corpus plus `manifest.csv` under `out_dir`.
pub fn synth_dataset(params: &SynthParams, counts: SplitCounts, nok_ratio: [f64; 3], out_dir: &Path) -> Result<DatasetManifest, SynthError> {
    params.validate()?;
    let manifest = plan_manifest(counts, nok_ratio, params.seed)?;
    fs::create_dir_all(out_dir.join("images"))?;
    for (i, rec) in manifest.records.iter().enumerate() {
        let raw = synth_sample(rec.label, rec.seed, params)?;
        let img = preprocess(&raw, (i % 4) as u32, params.image_size);
        save_image(&img, out_dir.join(&rec.path))?;
    }
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

impl DatasetManifest {
    pub fn by_split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn count(&self, split: Split, label: DefectKind) -> usize {
        self.by_split(split).filter(|r| r.label == label).count()
    }

    /// Checks uniqueness of ids and that train/val hold OK samples only.
    pub fn validate(&self) -> Result<(), SynthError> {
        let mut ids = std::collections::HashSet::new();
        for r in &self.records {
            if !ids.insert(r.sample_id.as_str()) {
                return Err(SynthError::Manifest(format!("duplicate sample id {}", r.sample_id)));
            }
            if r.split != Split::Test && !r.label.is_ok() {
                return Err(SynthError::Manifest(format!("{} is {} in split {}", r.sample_id, r.label, r.split)));
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sample_id,path,label,split,seed\n");
        for r in &self.records {
            // paths are written with forward slashes on every platform
            let path = r.path.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            out.push_str(&format!("{},{},{},{},{}\n", r.sample_id, path, r.label, r.split, r.seed));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| SynthError::Manifest(e.to_string()))?;
        let headers = reader.headers().map_err(|e| SynthError::Manifest(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["sample_id", "path", "label", "split", "seed"] {
            return Err(SynthError::Manifest(format!("unexpected header {headers:?}")));
        }
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| SynthError::Manifest(e.to_string()))?;
            let bad = |what: &str| SynthError::Manifest(format!("bad {what} in row {row:?}"));
            records.push(ManifestRecord {
                sample_id: row[0].to_string(),
                path: PathBuf::from(&row[1]),
                label: row[2].parse().map_err(|_| bad("label"))?,
                split: row[3].parse().map_err(|_| bad("split"))?,
                seed: row[4].parse().map_err(|_| bad("seed"))?,
            });
        }
        let manifest = Self { records };
        manifest.validate()?;
        Ok(manifest)
    }
}
