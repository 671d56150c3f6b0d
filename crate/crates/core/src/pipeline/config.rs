//! Experiment configuration and its `key = value` text form.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Unknown or repeated keys are errors. [`CONFIG_KEYS`] lists every key.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::FeatureMode;
use crate::cae::{CaePreset, TrainConfig};
use crate::dimred::TsneConfig;
use crate::metrics::SsimParams;
use crate::ocsvm::{Gamma, OcSvmConfig};
use crate::rng::{stage_seed, Stream};
use crate::synth::{largest_remainder, SplitCounts, SynthParams, DEFAULT_NOK_RATIO, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{key}: {message}")]
    Value { key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Every accepted key with a one-line description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("seed", "master seed; every stochastic stage derives its seed from it"),
    ("dataset_dir", "directory holding manifest.csv and images/"),
    ("manifest", "manifest path (default <dataset_dir>/manifest.csv)"),
    ("output_dir", "directory for models, CSVs, plots and reports"),
    ("image_size", "working resolution in pixels (square)"),
    ("preset", "autoencoder preset: bae1, bae2 or mvtec"),
    ("cae_model", "pre-trained CAEM file; skips training when set"),
    ("feature_mode", "error_metrics, pca_tsne or raw_encoded"),
    ("train_count", "OK training samples"),
    ("val_count", "OK validation samples"),
    ("test_ok_count", "OK test samples"),
    ("test_nok_count", "defective test samples"),
    ("nok_ratio", "NOT_COMPLETE,STRANGE_OBJECT,COLOR_DEFECT proportions"),
    ("ring_outer_radius", "biscuit outer radius, fraction of half the image"),
    ("ring_inner_radius", "biscuit hole radius, fraction of half the image"),
    ("texture_amplitude", "surface texture strength"),
    ("background_level", "background intensity"),
    ("defect_magnitude", "defect severity in [0,1]"),
    ("epochs", "training epochs"),
    ("batch_size", "training and inference batch size"),
    ("learning_rate", "Adam step size"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("adam_epsilon", "Adam denominator guard"),
    ("corruption_fraction", "input elements zeroed per sample during training"),
    ("ssim_window", "SSIM Gaussian window size (odd)"),
    ("ssim_sigma", "SSIM Gaussian window sigma"),
    ("ssim_k1", "SSIM luminance constant factor"),
    ("ssim_k2", "SSIM contrast constant factor"),
    ("pca_dims", "PCA output dimension before t-SNE"),
    ("standardize_features", "z-score SVM inputs with fit-set statistics"),
    ("tsne_perplexity", "t-SNE target perplexity"),
    ("tsne_iterations", "t-SNE gradient steps"),
    ("tsne_early_exaggeration", "t-SNE early exaggeration factor"),
    ("tsne_exaggeration_iterations", "steps with exaggeration and early momentum"),
    ("tsne_learning_rate", "t-SNE step size"),
    ("tsne_momentum_early", "t-SNE momentum during exaggeration"),
    ("tsne_momentum_late", "t-SNE momentum afterwards"),
    ("svm_nu", "one-class SVM nu in (0,1]"),
    ("svm_gamma", "RBF width: a positive number or `scale`"),
    ("svm_kkt_tolerance", "solver stopping tolerance"),
    ("svm_max_passes", "solver pair-update cap"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset_dir: PathBuf,
    pub manifest: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub image_size: usize,
    pub preset: CaePreset,
    pub cae_model: Option<PathBuf>,
    pub feature_mode: FeatureMode,
    pub counts: SplitCounts,
    pub nok_ratio: [f64; 3],
    /// Image size and seed are taken from the top-level fields.
    pub synth: SynthParams,
    /// The seed is taken from the top-level field.
    pub train: TrainConfig,
    pub ssim: SsimParams,
    pub pca_dims: usize,
    pub standardize_features: bool,
    /// The seed is derived from the top-level field.
    pub tsne: TsneConfig,
    /// The seed is derived from the top-level field.
    pub ocsvm: OcSvmConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            dataset_dir: PathBuf::from("data"),
            manifest: None,
            output_dir: PathBuf::from("out"),
            image_size: 64,
            preset: CaePreset::Mvtec,
            cae_model: None,
            feature_mode: FeatureMode::ErrorMetrics,
            counts: SplitCounts::DESK,
            nok_ratio: DEFAULT_NOK_RATIO,
            synth: SynthParams::default(),
            train: TrainConfig::default(),
            ssim: SsimParams::default(),
            pca_dims: 50,
            standardize_features: false,
            tsne: TsneConfig::default(),
            ocsvm: OcSvmConfig::default(),
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.to_string(), message: message.into() }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(key, format!("cannot parse {value:?}")))
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl ExperimentConfig {
    /// 256×256 images with 1000 / 2000 / 200 + 200 samples.
    pub fn full_scale() -> Self {
        Self { image_size: 256, counts: SplitCounts::FULL, ..Self::default() }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::default().apply_text(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(mut self, text: &str) -> Result<Self, ConfigError> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax { line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| syntax(format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(syntax(format!("duplicate key {key:?}")));
            }
            seen.push(key);
            self.set(key, value.trim()).map_err(|e| syntax(e.to_string()))?;
        }
        Ok(self)
    }

    /// Sets one field from its textual key and value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "seed" => self.seed = num(key, value)?,
            "dataset_dir" => self.dataset_dir = PathBuf::from(value),
            "manifest" => self.manifest = opt_path(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "image_size" => self.image_size = num(key, value)?,
            "preset" => self.preset = value.parse().map_err(|e: String| bad(key, e))?,
            "cae_model" => self.cae_model = opt_path(value),
            "feature_mode" => self.feature_mode = value.parse().map_err(|e: String| bad(key, e))?,
            "train_count" => self.counts.train = num(key, value)?,
            "val_count" => self.counts.val = num(key, value)?,
            "test_ok_count" => self.counts.test_ok = num(key, value)?,
            "test_nok_count" => self.counts.test_nok = num(key, value)?,
            "nok_ratio" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(bad(key, "expected three comma-separated numbers"));
                }
                for (slot, p) in self.nok_ratio.iter_mut().zip(parts) {
                    *slot = num(key, p)?;
                }
            }
            "ring_outer_radius" => self.synth.ring_outer_radius = num(key, value)?,
            "ring_inner_radius" => self.synth.ring_inner_radius = num(key, value)?,
            "texture_amplitude" => self.synth.texture_amplitude = num(key, value)?,
            "background_level" => self.synth.background_level = num(key, value)?,
            "defect_magnitude" => self.synth.defect_magnitude = num(key, value)?,
            "epochs" => self.train.epochs = num(key, value)?,
            "batch_size" => self.train.batch_size = num(key, value)?,
            "learning_rate" => self.train.learning_rate = num(key, value)?,
            "beta1" => self.train.beta1 = num(key, value)?,
            "beta2" => self.train.beta2 = num(key, value)?,
            "adam_epsilon" => self.train.epsilon = num(key, value)?,
            "corruption_fraction" => self.train.corruption_fraction = num(key, value)?,
            "ssim_window" => self.ssim.window_size = num(key, value)?,
            "ssim_sigma" => self.ssim.gaussian_sigma = num(key, value)?,
            "ssim_k1" => self.ssim.k1 = num(key, value)?,
            "ssim_k2" => self.ssim.k2 = num(key, value)?,
            "pca_dims" => self.pca_dims = num(key, value)?,
            "standardize_features" => self.standardize_features = num(key, value)?,
            "tsne_perplexity" => self.tsne.perplexity = num(key, value)?,
            "tsne_iterations" => self.tsne.iterations = num(key, value)?,
            "tsne_early_exaggeration" => self.tsne.early_exaggeration = num(key, value)?,
            "tsne_exaggeration_iterations" => self.tsne.exaggeration_iterations = num(key, value)?,
            "tsne_learning_rate" => self.tsne.learning_rate = num(key, value)?,
            "tsne_momentum_early" => self.tsne.momentum_early = num(key, value)?,
            "tsne_momentum_late" => self.tsne.momentum_late = num(key, value)?,
            "svm_nu" => self.ocsvm.nu = num(key, value)?,
            "svm_gamma" => self.ocsvm.gamma = value.parse::<Gamma>().map_err(|e| bad(key, e))?,
            "svm_kkt_tolerance" => self.ocsvm.kkt_tolerance = num(key, value)?,
            "svm_max_passes" => self.ocsvm.max_passes = num(key, value)?,
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Text form that [`ExperimentConfig::parse`] reads back to an equal value.
    pub fn to_config_string(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let values: Vec<String> = vec![
            self.seed.to_string(),
            self.dataset_dir.display().to_string(),
            path(&self.manifest),
            self.output_dir.display().to_string(),
            self.image_size.to_string(),
            self.preset.name().to_ascii_lowercase(),
            path(&self.cae_model),
            self.feature_mode.to_string(),
            self.counts.train.to_string(),
            self.counts.val.to_string(),
            self.counts.test_ok.to_string(),
            self.counts.test_nok.to_string(),
            format!("{:?},{:?},{:?}", self.nok_ratio[0], self.nok_ratio[1], self.nok_ratio[2]),
            format!("{:?}", self.synth.ring_outer_radius),
            format!("{:?}", self.synth.ring_inner_radius),
            format!("{:?}", self.synth.texture_amplitude),
            format!("{:?}", self.synth.background_level),
            format!("{:?}", self.synth.defect_magnitude),
            self.train.epochs.to_string(),
            self.train.batch_size.to_string(),
            format!("{:?}", self.train.learning_rate),
            format!("{:?}", self.train.beta1),
            format!("{:?}", self.train.beta2),
            format!("{:?}", self.train.epsilon),
            format!("{:?}", self.train.corruption_fraction),
            self.ssim.window_size.to_string(),
            format!("{:?}", self.ssim.gaussian_sigma),
            format!("{:?}", self.ssim.k1),
            format!("{:?}", self.ssim.k2),
            self.pca_dims.to_string(),
            self.standardize_features.to_string(),
            format!("{:?}", self.tsne.perplexity),
            self.tsne.iterations.to_string(),
            format!("{:?}", self.tsne.early_exaggeration),
            self.tsne.exaggeration_iterations.to_string(),
            format!("{:?}", self.tsne.learning_rate),
            format!("{:?}", self.tsne.momentum_early),
            format!("{:?}", self.tsne.momentum_late),
            format!("{:?}", self.ocsvm.nu),
            match self.ocsvm.gamma {
                Gamma::Scale => "scale".to_string(),
                Gamma::Value(g) => format!("{g:?}"),
            },
            format!("{:?}", self.ocsvm.kkt_tolerance),
            self.ocsvm.max_passes.to_string(),
        ];
        debug_assert_eq!(values.len(), CONFIG_KEYS.len());
        let mut out = String::new();
        for ((key, help), value) in CONFIG_KEYS.iter().zip(values) {
            let _ = writeln!(out, "# {help}\n{key} = {value}");
        }
        out
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest.clone().unwrap_or_else(|| self.dataset_dir.join(MANIFEST_FILE))
    }

    pub fn synth_params(&self) -> SynthParams {
        SynthParams { image_size: self.image_size, seed: stage_seed(self.seed, Stream::Dataset), ..self.synth.clone() }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    pub fn init_seed(&self) -> u64 {
        stage_seed(self.seed, Stream::CaeInit)
    }

    pub fn tsne_config(&self) -> TsneConfig {
        TsneConfig { seed: stage_seed(self.seed, Stream::Tsne), ..self.tsne.clone() }
    }

    pub fn ocsvm_config(&self) -> OcSvmConfig {
        OcSvmConfig { seed: stage_seed(self.seed, Stream::OcSvm), ..self.ocsvm.clone() }
    }

    /// Checks value ranges that do not depend on files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        self.synth_params().validate().map_err(|e| invalid(e.to_string()))?;
        self.train.validate().map_err(|e| invalid(e.to_string()))?;
        self.ssim.validate().map_err(|e| invalid(e.to_string()))?;
        largest_remainder(self.counts.test_nok, self.nok_ratio).map_err(|e| invalid(e.to_string()))?;
        self.preset.architecture(self.image_size).map_err(|e| invalid(e.to_string()))?;
        if self.counts.train == 0 || self.counts.val < 2 {
            return Err(invalid("need at least 1 training and 2 validation samples".into()));
        }
        if self.counts.test_ok == 0 || self.counts.test_nok == 0 {
            return Err(invalid("test split needs OK and NOK samples".into()));
        }
        if self.pca_dims == 0 {
            return Err(invalid("pca_dims must be at least 1".into()));
        }
        if !(self.ocsvm.nu > 0.0 && self.ocsvm.nu <= 1.0) {
            return Err(invalid(format!("svm_nu must lie in (0,1], got {}", self.ocsvm.nu)));
        }
        if self.tsne.iterations < self.tsne.exaggeration_iterations {
            return Err(invalid("tsne_iterations must be at least tsne_exaggeration_iterations".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_desk_scale() {
        let c = ExperimentConfig::default();
        assert_eq!(c.image_size, 64);
        assert_eq!(c.counts, SplitCounts::DESK);
        assert_eq!(c.pca_dims, 50);
        assert!(!c.standardize_features);
        assert_eq!(c.ocsvm.nu, 0.05);
        c.validate().unwrap();
        ExperimentConfig::full_scale().validate().unwrap();
    }

    #[test]
    fn parses_comments_and_overrides() {
        let c = ExperimentConfig::parse("# header\nseed = 7  # inline\n\nfeature_mode=pca_tsne\nnok_ratio = 2, 1, 1\nsvm_gamma = 0.5\ncae_model = m.caem\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.feature_mode, FeatureMode::PcaTsne);
        assert_eq!(c.nok_ratio, [2.0, 1.0, 1.0]);
        assert_eq!(c.ocsvm.gamma, Gamma::Value(0.5));
        assert_eq!(c.cae_model, Some(PathBuf::from("m.caem")));
        assert_eq!(c.train.epochs, 50);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(ExperimentConfig::parse("seed 7"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("\nbogus = 1"), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(ExperimentConfig::parse("seed = x").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(ExperimentConfig::parse("nok_ratio = 1,2").is_err());
        assert!(ExperimentConfig::parse("preset = vgg").is_err());
    }

    #[test]
    fn text_form_round_trips() {
        let mut c = ExperimentConfig::full_scale();
        c.seed = 123;
        c.cae_model = Some(PathBuf::from("a/b.caem"));
        c.ocsvm.gamma = Gamma::Value(0.1);
        c.tsne.learning_rate = 0.1 + 0.2;
        c.standardize_features = true;
        let text = c.to_config_string();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), CONFIG_KEYS.len());
    }

    #[test]
    fn every_key_is_settable() {
        let defaults = ExperimentConfig::default().to_config_string();
        for line in defaults.lines().filter(|l| !l.starts_with('#')) {
            let (k, v) = line.split_once(" = ").unwrap();
            ExperimentConfig::default().set(k, v).unwrap();
        }
    }

    #[test]
    fn stage_seeds_differ() {
        let c = ExperimentConfig::default();
        let seeds = [c.synth_params().seed, c.init_seed(), c.tsne_config().seed, c.ocsvm_config().seed];
        for i in 0..seeds.len() {
            for j in i + 1..seeds.len() {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
    }

    #[test]
    fn validation_catches_ranges() {
        let mut c = ExperimentConfig::default();
        c.counts.test_nok = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.image_size = 5;
        assert!(c.validate().is_err());
    }
}
