//! Evaluation report in text and `key=value` form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::eval::{ClassStats, Confusion};
use super::run::GridCell;
use super::FeatureMode;
use crate::synth::DefectKind;

#[derive(Debug, Clone, PartialEq)]
pub struct SubclassAuc {
    pub kind: DefectKind,
    pub count: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub feature_mode: FeatureMode,
    pub preset: String,
    pub image_size: usize,
    pub seed: u64,
    pub n_fit: usize,
    pub n_test: usize,
    pub auc_overall: f64,
    pub auc_subclass: Vec<SubclassAuc>,
    pub confusion: Confusion,
    pub feature_names: Vec<String>,
    pub ok_stats: ClassStats,
    pub nok_stats: ClassStats,
    pub tsne_kl: Option<f64>,
    pub tsne_kl_after_exaggeration: Option<f64>,
    pub svm_converged: bool,
    pub svm_residual: f64,
    pub svm_iterations: usize,
    pub svm_support_vectors: usize,
    pub svm_nu: f64,
    pub svm_gamma: f64,
    pub svm_rho: f64,
    pub grid: Vec<GridCell>,
    /// Output file names, relative to the output directory.
    pub files: Vec<(String, String)>,
}

impl EvaluationReport {
    pub fn subclass(&self, kind: DefectKind) -> Option<&SubclassAuc> {
        self.auc_subclass.iter().find(|s| s.kind == kind)
    }

    /// NOK subclass with the highest AUC (first one on ties).
    pub fn best_subclass(&self) -> Option<DefectKind> {
        self.auc_subclass.iter().fold(None::<&SubclassAuc>, |best, s| match best {
            Some(b) if b.auc >= s.auc => Some(b),
            _ => Some(s),
        })
        .map(|s| s.kind)
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("feature_mode", self.feature_mode.to_string());
        kv("preset", self.preset.clone());
        kv("image_size", self.image_size.to_string());
        kv("seed", self.seed.to_string());
        kv("n_fit", self.n_fit.to_string());
        kv("n_test", self.n_test.to_string());
        kv("auc_overall", format!("{:?}", self.auc_overall));
        for sub in &self.auc_subclass {
            kv(&format!("auc.{}", sub.kind), format!("{:?}", sub.auc));
            kv(&format!("count.{}", sub.kind), sub.count.to_string());
        }
        kv("confusion.tp", self.confusion.tp.to_string());
        kv("confusion.fp", self.confusion.fp.to_string());
        kv("confusion.tn", self.confusion.tn.to_string());
        kv("confusion.fn", self.confusion.fn_.to_string());
        for (class, st) in [("OK", &self.ok_stats), ("NOK", &self.nok_stats)] {
            for (j, name) in self.feature_names.iter().enumerate() {
                kv(&format!("mean.{class}.{name}"), format!("{:?}", st.means[j]));
                kv(&format!("var.{class}.{name}"), format!("{:?}", st.variances[j]));
            }
        }
        if let Some(v) = self.tsne_kl {
            kv("tsne.kl", format!("{v:?}"));
        }
        if let Some(v) = self.tsne_kl_after_exaggeration {
            kv("tsne.kl_after_exaggeration", format!("{v:?}"));
        }
        kv("svm.converged", self.svm_converged.to_string());
        kv("svm.residual", format!("{:?}", self.svm_residual));
        kv("svm.iterations", self.svm_iterations.to_string());
        kv("svm.support_vectors", self.svm_support_vectors.to_string());
        kv("svm.nu", format!("{:?}", self.svm_nu));
        kv("svm.gamma", format!("{:?}", self.svm_gamma));
        kv("svm.rho", format!("{:?}", self.svm_rho));
        for c in &self.grid {
            let key = format!("grid.nu={:?}.gamma_factor={:?}", c.nu, c.gamma_factor);
            kv(&format!("{key}.auc"), format!("{:?}", c.auc));
            kv(&format!("{key}.converged"), c.converged.to_string());
        }
        for (k, v) in &self.files {
            kv(&format!("file.{k}"), v.clone());
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "feature space   {}", self.feature_mode);
        let _ = writeln!(s, "autoencoder     {} at {}x{}, seed {}", self.preset, self.image_size, self.image_size, self.seed);
        let _ = writeln!(s, "fit / test rows {} / {}", self.n_fit, self.n_test);
        let _ = writeln!(s);
        let _ = writeln!(s, "AUC (all NOK)        {:.4}", self.auc_overall);
        for sub in &self.auc_subclass {
            let _ = writeln!(s, "AUC {:<16} {:.4}  (n={})", sub.kind.as_str(), sub.auc, sub.count);
        }
        let c = &self.confusion;
        let _ = writeln!(s);
        let _ = writeln!(s, "boundary confusion (NOK positive)");
        let _ = writeln!(s, "  TP {:>4}  FN {:>4}", c.tp, c.fn_);
        let _ = writeln!(s, "  FP {:>4}  TN {:>4}", c.fp, c.tn);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<10} {:>14} {:>14} {:>14} {:>14}", "feature", "mean OK", "var OK", "mean NOK", "var NOK");
        for (j, name) in self.feature_names.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:<10} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
                name, self.ok_stats.means[j], self.ok_stats.variances[j], self.nok_stats.means[j], self.nok_stats.variances[j]
            );
        }
        if let (Some(kl), Some(kl0)) = (self.tsne_kl, self.tsne_kl_after_exaggeration) {
            let _ = writeln!(s);
            let _ = writeln!(s, "t-SNE KL final {kl:.6} (after exaggeration {kl0:.6})");
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "one-class SVM   nu {} gamma {:.6e} rho {:.6e}, {} support vectors, {} updates, {} (residual {:.3e})",
            self.svm_nu,
            self.svm_gamma,
            self.svm_rho,
            self.svm_support_vectors,
            self.svm_iterations,
            if self.svm_converged { "converged" } else { "NOT converged" },
            self.svm_residual
        );
        if !self.grid.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "nu x gamma grid (gamma = factor * scale), test AUC");
            for c in &self.grid {
                let _ = writeln!(s, "  nu {:<5} factor {:<5} AUC {:.4}{}", c.nu, c.gamma_factor, c.auc, if c.converged { "" } else { "  (not converged)" });
            }
        }
        let _ = writeln!(s);
        for (k, v) in &self.files {
            let _ = writeln!(s, "{k:<10} {v}");
        }
        s
    }
}

/// Reads a `key=value` file into a sorted map.
pub fn read_kv(path: &Path) -> std::io::Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().filter_map(|l| l.split_once('=')).map(|(k, v)| (k.to_string(), v.to_string())).collect())
}
