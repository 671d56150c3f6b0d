use rand::seq::{index, SliceRandom};

use super::model::{loss_mse, CaeModel};
use super::tensor::{Real, Tensor4};
use super::CaeError;
use crate::rng::{derive_seed, rng_from_seed, stage_seed, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Fraction of input elements zeroed per sample (denoising mode); 0 disables it.
    pub corruption_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 5, learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, seed: 42, corruption_fraction: 0.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CaeError> {
        if self.batch_size == 0 {
            return Err(CaeError::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(CaeError::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.corruption_fraction) {
            return Err(CaeError::Config("corruption_fraction must lie in [0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: CaeModel<f32>,
    pub history: Vec<EpochStats>,
    /// Epoch (1-based) whose weights were kept.
    pub best_epoch: usize,
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn step<T: Real>(&mut self, params: &mut [T], grads: &[T]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let g = g.to_f64();
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let update = self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            *p = T::from_f64(p.to_f64() - update);
        }
    }
}

/// Zeroes exactly `floor(fraction * C*H*W)` distinct, uniformly chosen
/// elements in every sample.
pub fn corrupt_batch<T: Real>(batch: &Tensor4<T>, fraction: f64, seed: u64) -> Tensor4<T> {
    assert!((0.0..1.0).contains(&fraction), "corruption fraction must lie in [0,1)");
    let per = batch.sample_len();
    let count = (fraction * per as f64).floor() as usize;
    let mut out = batch.clone();
    if count == 0 {
        return out;
    }
    let mut rng = rng_from_seed(seed);
    for chunk in out.data_mut().chunks_mut(per) {
        for i in index::sample(&mut rng, per, count) {
            chunk[i] = T::zero();
        }
    }
    out
}

fn mean_loss(model: &CaeModel<f32>, data: &Tensor4<f32>, batch_size: usize) -> Result<f64, CaeError> {
    let n = data.batch();
    let mut total = 0.0;
    for start in (0..n).step_by(batch_size) {
        let idx: Vec<usize> = (start..(start + batch_size).min(n)).collect();
        let b = data.gather(&idx);
        total += loss_mse(&model.reconstruct(&b)?, &b)? * idx.len() as f64;
    }
    Ok(total / n as f64)
}

/// Trains with Adam on per-element MSE over shuffled mini-batches and keeps
/// the weights with the lowest validation loss. An empty validation set
/// selects on training loss instead.
pub fn train(model: CaeModel<f32>, train_set: &Tensor4<f32>, val_set: Option<&Tensor4<f32>>, config: &TrainConfig) -> Result<TrainOutcome, CaeError> {
    train_with_progress(model, train_set, val_set, config, |_| {})
}

pub fn train_with_progress(
    mut model: CaeModel<f32>,
    train_set: &Tensor4<f32>,
    val_set: Option<&Tensor4<f32>>,
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochStats),
) -> Result<TrainOutcome, CaeError> {
    config.validate()?;
    let n = train_set.batch();
    if n == 0 {
        return Err(CaeError::EmptyTrainingSet);
    }
    let val_set = val_set.filter(|v| v.batch() > 0);
    let mut adam = Adam::new(model.params().len(), config.learning_rate, config.beta1, config.beta2, config.epsilon);
    let shuffle_seed = stage_seed(config.seed, Stream::CaeShuffle);
    let corrupt_seed = stage_seed(config.seed, Stream::Corruption);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<f32>)> = None;
    let mut step = 0u64;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng_from_seed(derive_seed(shuffle_seed, epoch as u64)));
        let mut total = 0.0;
        for idx in order.chunks(config.batch_size) {
            let target = train_set.gather(idx);
            let input = if config.corruption_fraction > 0.0 {
                corrupt_batch(&target, config.corruption_fraction, derive_seed(corrupt_seed, step))
            } else {
                target.clone()
            };
            let (loss, grads) = model.loss_and_grad(&input, &target)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(CaeError::Diverged { epoch });
            }
            adam.step(model.params_mut(), &grads);
            total += loss * idx.len() as f64;
            step += 1;
        }
        let train_loss = total / n as f64;
        let val_loss = match val_set {
            Some(v) => mean_loss(&model, v, config.batch_size)?,
            None => train_loss,
        };
        if !val_loss.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
            return Err(CaeError::Diverged { epoch });
        }
        let stats = EpochStats { epoch, train_loss, val_loss };
        progress(&stats);
        history.push(stats);
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.params().to_vec()));
        }
    }

    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params_mut().copy_from_slice(&params);
            epoch
        }
        None => 0,
    };
    Ok(TrainOutcome { model, history, best_epoch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cae::{init_model, CaePreset};

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut p = vec![0.3f32, -1.2, 4.0];
        let before = p.clone();
        Adam::new(3, 1e-3, 0.9, 0.999, 1e-8).step(&mut p, &[0.0; 3]);
        assert_eq!(p, before);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = vec![1.0f64];
        Adam::new(1, 0.01, 0.9, 0.999, 1e-8).step(&mut p, &[3.0]);
        assert!((p[0] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn corruption_counts() {
        let t = Tensor4::from_vec([3, 1, 2, 2], vec![1.0f32; 12]).unwrap();
        assert_eq!(corrupt_batch(&t, 0.0, 1), t);
        let c = corrupt_batch(&t, 0.5, 1);
        for s in 0..3 {
            assert_eq!(c.sample(s).iter().filter(|&&v| v == 0.0).count(), 2);
        }
        assert_eq!(corrupt_batch(&t, 0.5, 1), c);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { corruption_fraction: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert_eq!(TrainConfig::default().batch_size, 5);
    }

    #[test]
    fn empty_training_set_rejected() {
        let m = init_model(CaePreset::Bae2, 8, 1).unwrap();
        let empty = Tensor4::<f32>::zeros([0, 3, 8, 8]);
        assert!(matches!(train(m, &empty, None, &TrainConfig::default()), Err(CaeError::EmptyTrainingSet)));
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let m = init_model(CaePreset::Bae2, 8, 1).unwrap();
        let data = Tensor4::from_vec([2, 3, 8, 8], (0..384).map(|i| (i % 7) as f32 / 7.0).collect()).unwrap();
        let cfg = TrainConfig { epochs: 3, learning_rate: 1e38, ..TrainConfig::default() };
        match train(m, &data, None, &cfg) {
            Err(CaeError::Diverged { epoch }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn history_is_reproducible_and_keeps_best() {
        let data = Tensor4::from_vec([6, 3, 8, 8], (0..1152).map(|i| ((i * 17) % 23) as f32 / 23.0).collect()).unwrap();
        let val = data.gather(&[0, 1]);
        let cfg = TrainConfig { epochs: 4, seed: 3, ..TrainConfig::default() };
        let a = train(init_model(CaePreset::Bae2, 8, 1).unwrap(), &data, Some(&val), &cfg).unwrap();
        let b = train(init_model(CaePreset::Bae2, 8, 1).unwrap(), &data, Some(&val), &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        assert_eq!(a.history.len(), 4);
        let best = a.history.iter().map(|s| s.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(a.history[a.best_epoch - 1].val_loss, best);
    }
}
