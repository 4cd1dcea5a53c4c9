//! Training procedures: standard, fixed-budget adversarial, customized
//! adversarial (per-sample adaptive ε plus adaptive label smoothing), and
//! the label-smoothing/Gaussian-noise-augmentation baseline.
//!
//! The adaptive procedure keeps one budget ε_i per training sample. On each
//! visit: ε_i grows by η, an inner PGD run at radius ε_i (against the label
//! smoothed at the pre-increment budget) produces the adversarial example,
//! ε_i is capped at ε_max, the model takes an SGD step on the cross-entropy
//! against the label re-smoothed at the capped budget, and finally — if the
//! updated model misclassifies the adversarial example — ε_i gives the
//! increment back. Budgets therefore move by exactly ±η (or 0) per visit
//! and stay inside `[0, ε_max]`.
//!
//! All procedures are deterministic functions of (dataset, config, seed):
//! weight init, batch shuffling, and noise augmentation draw from separate
//! named sub-streams, so degenerate settings (ε = 0, σ = α = 0) reproduce
//! the standard-training checkpoint bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use core::fmt;

// When std is in the test graph, float math binds to inherent methods
// and this trait import goes quiet; no_std builds need it.
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::StandardNormal;

use crate::attack::{pgd_ascend_ce, pgd_untargeted, AttackConfig, AttackError};
use crate::nn::{argmax, one_hot, Model, NnError, Sgd};
use crate::rng::{shuffle, stream};
use crate::signal::Dataset;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    EmptyTrainSplit,
    BadConfig(&'static str),
    SmoothingOutOfRange { alpha: f64 },
    StateSizeMismatch { expected: usize, got: usize },
    Attack(AttackError),
    Nn(NnError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyTrainSplit => write!(f, "dataset has no train split"),
            TrainError::BadConfig(msg) => write!(f, "bad training config: {msg}"),
            TrainError::SmoothingOutOfRange { alpha } => {
                write!(f, "label smoothing weight c·ε = {alpha} outside [0, 1]")
            }
            TrainError::StateSizeMismatch { expected, got } => {
                write!(f, "per-sample state sized {got}, train split has {expected}")
            }
            TrainError::Attack(e) => write!(f, "{e}"),
            TrainError::Nn(e) => write!(f, "{e}"),
        }
    }
}

impl From<AttackError> for TrainError {
    fn from(e: AttackError) -> Self {
        TrainError::Attack(e)
    }
}

impl From<NnError> for TrainError {
    fn from(e: NnError) -> Self {
        TrainError::Nn(e)
    }
}

/// Inner-PGD settings for adversarial training; the step size is a fraction
/// of the per-sample radius, matching the ξ = ε/10 attack default when
/// `step_frac` is 0.1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerPgd {
    pub steps: usize,
    pub step_frac: f64,
}

impl Default for InnerPgd {
    fn default() -> Self {
        Self { steps: 10, step_frac: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub inner_pgd: InnerPgd,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            lr: 0.01,
            momentum: 0.9,
            inner_pgd: InnerPgd::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::BadConfig("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch size must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(TrainError::BadConfig("learning rate must be positive"));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(TrainError::BadConfig("momentum must lie in [0, 1)"));
        }
        if self.inner_pgd.steps == 0 || !(self.inner_pgd.step_frac > 0.0) {
            return Err(TrainError::BadConfig("inner PGD needs positive steps and step size"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub mean_eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub model: Model,
    pub log: Vec<EpochLog>,
}

/// Per-sample adaptive budgets plus the schedule constants.
#[derive(Debug, Clone, PartialEq)]
pub struct CatState {
    /// Current ε_i keyed by the sample's stable index in the train split.
    pub eps: Vec<f64>,
    /// Budget increment per visit.
    pub eta: f64,
    /// Label-smoothing weight: α_i = c·ε_i.
    pub c: f64,
    /// Budget cap, snapped down to a multiple of η so per-visit moves stay
    /// exactly ±η.
    pub eps_max: f64,
}

impl CatState {
    pub fn new(n_samples: usize, eta: f64, c: f64, eps_max: f64) -> Result<Self, TrainError> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(TrainError::BadConfig("eta must be finite and non-negative"));
        }
        if !(eps_max >= 0.0) || !eps_max.is_finite() {
            return Err(TrainError::BadConfig("eps_max must be finite and non-negative"));
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(TrainError::BadConfig("c must be finite and non-negative"));
        }
        if c * eps_max > 1.0 {
            return Err(TrainError::SmoothingOutOfRange { alpha: c * eps_max });
        }
        let eps_max = if eta > 0.0 { ((eps_max / eta) + 1e-9).floor() * eta } else { eps_max };
        Ok(Self { eps: vec![0.0; n_samples], eta, c, eps_max })
    }

    pub fn mean_eps(&self) -> f64 {
        if self.eps.is_empty() {
            0.0
        } else {
            self.eps.iter().sum::<f64>() / self.eps.len() as f64
        }
    }
}

/// Smoothed label `(1 − c·ε)·y + c·ε·u` with `u` the uniform distribution.
pub fn smooth_label(y: &[f64], eps_i: f64, c: f64) -> Result<Vec<f64>, TrainError> {
    let alpha = c * eps_i;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TrainError::SmoothingOutOfRange { alpha });
    }
    let k = y.len() as f64;
    Ok(y.iter().map(|&v| (1.0 - alpha) * v + alpha / k).collect())
}

/// Train-split samples as (flattened f64 frame, class id) pairs, in dataset
/// order; the position in this vector is the sample's stable index.
fn train_samples(d: &Dataset) -> Result<Vec<(Vec<f64>, usize)>, TrainError> {
    let mut out = Vec::new();
    for r in d.train() {
        let y = d.class_id(r.frame.label).ok_or(TrainError::BadConfig(
            "train frame labeled with a class outside the dataset class table",
        ))?;
        out.push((r.frame.samples_f64(), y));
    }
    if out.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }
    Ok(out)
}

fn batch_tensor(samples: &[(Vec<f64>, usize)], idx: &[usize]) -> (Tensor, Vec<usize>) {
    let d = samples[0].0.len();
    let labels: Vec<usize> = idx.iter().map(|&i| samples[i].1).collect();
    let mut data = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        data.extend_from_slice(&samples[i].0);
    }
    let x = Tensor::new(vec![idx.len(), d], data).expect("volume by construction");
    (x, labels)
}

/// Shared mini-batch SGD skeleton. `make_batch` maps the selected samples
/// to the `(inputs, targets)` actually trained on, which is where the
/// adversarial and augmentation variants differ.
fn sgd_loop<F>(
    d: &Dataset,
    cfg: &TrainConfig,
    mut make_batch: F,
) -> Result<TrainOutput, TrainError>
where
    F: FnMut(&Model, &Tensor, &[usize]) -> Result<(Tensor, Tensor), TrainError>,
{
    cfg.validate()?;
    let samples = train_samples(d)?;
    let k = d.num_classes();
    let mut init_rng = stream(cfg.seed, "init", 0);
    let mut model = Model::desk_cnn(d.frame_len, k, &mut init_rng)?;
    let mut shuffle_rng = stream(cfg.seed, "shuffle", 0);
    let mut opt = Sgd::new(cfg.lr, cfg.momentum);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        shuffle(&mut order, &mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, labels) = batch_tensor(&samples, chunk);
            let (x, target) = make_batch(&model, &x, &labels)?;
            let grads = model.grads(&x, &target)?;
            if !grads.loss.is_finite() || !grads.params.all_finite() {
                return Err(TrainError::BadConfig("training diverged to non-finite loss"));
            }
            opt.step(&mut model, &grads.params);
            loss_sum += grads.loss * chunk.len() as f64;
            seen += chunk.len();
        }
        log.push(EpochLog { epoch, loss: loss_sum / seen as f64, mean_eps: 0.0 });
    }
    Ok(TrainOutput { model, log })
}

/// Plain mini-batch SGD on the cross-entropy of clean frames.
pub fn train_standard(d: &Dataset, cfg: &TrainConfig) -> Result<TrainOutput, TrainError> {
    let k = d.num_classes();
    sgd_loop(d, cfg, |_, x, labels| Ok((x.clone(), one_hot(labels, k))))
}

/// Min-max adversarial training at one fixed radius: every batch is
/// replaced by its PGD counterparts against the current model before the
/// SGD step. A zero radius reproduces [`train_standard`] exactly.
pub fn train_adversarial(
    d: &Dataset,
    cfg: &TrainConfig,
    fixed_eps: f64,
) -> Result<TrainOutput, TrainError> {
    if !(fixed_eps >= 0.0) || !fixed_eps.is_finite() {
        return Err(TrainError::BadConfig("fixed_eps must be finite and non-negative"));
    }
    let k = d.num_classes();
    let inner = cfg.inner_pgd;
    sgd_loop(d, cfg, move |model, x, labels| {
        if fixed_eps == 0.0 {
            return Ok((x.clone(), one_hot(labels, k)));
        }
        let attack_cfg = AttackConfig {
            epsilon: fixed_eps,
            step_size: inner.step_frac * fixed_eps,
            max_iters: inner.steps,
            tol: 1e-5,
            random_start: None,
        };
        let d_in = x.len() / x.batch();
        let mut adv = Vec::with_capacity(x.len());
        for (b, &y) in labels.iter().enumerate() {
            let xi = &x.data()[b * d_in..(b + 1) * d_in];
            let r = pgd_untargeted(model, xi, y, &attack_cfg)?;
            adv.extend_from_slice(&r.x_adv);
        }
        let adv = Tensor::new(vec![labels.len(), d_in], adv).expect("volume");
        Ok((adv, one_hot(labels, k)))
    })
}

/// Label smoothing plus Gaussian-noise augmentation: inputs gain zero-mean
/// noise of standard deviation `noise_sigma`, targets are uniformly
/// smoothed with weight `smooth_alpha`. Zero noise and zero smoothing
/// reproduce [`train_standard`] exactly.
pub fn ls_gna_train(
    d: &Dataset,
    cfg: &TrainConfig,
    noise_sigma: f64,
    smooth_alpha: f64,
) -> Result<TrainOutput, TrainError> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(TrainError::BadConfig("noise_sigma must be finite and non-negative"));
    }
    if !(0.0..=1.0).contains(&smooth_alpha) {
        return Err(TrainError::BadConfig("smooth_alpha must lie in [0, 1]"));
    }
    let k = d.num_classes();
    let mut noise_rng = stream(cfg.seed, "noise", 0);
    sgd_loop(d, cfg, move |_, x, labels| {
        let x = if noise_sigma > 0.0 {
            let mut noisy = x.clone();
            for v in noisy.data_mut() {
                let g: f64 = rand::Rng::sample(&mut noise_rng, StandardNormal);
                *v += noise_sigma * g;
            }
            noisy
        } else {
            x.clone()
        };
        let mut target = one_hot(labels, k);
        if smooth_alpha > 0.0 {
            let kf = k as f64;
            for v in target.data_mut() {
                *v = (1.0 - smooth_alpha) * *v + smooth_alpha / kf;
            }
        }
        Ok((x, target))
    })
}

/// Customized adversarial training: per-sample adaptive budgets with
/// adaptive label smoothing, per-sample SGD updates. Returns the trained
/// model, the epoch log (including mean ε_i), and the final budget state.
pub fn cat_train(
    d: &Dataset,
    cfg: &TrainConfig,
    mut cat: CatState,
) -> Result<(TrainOutput, CatState), TrainError> {
    cfg.validate()?;
    let samples = train_samples(d)?;
    if cat.eps.len() != samples.len() {
        return Err(TrainError::StateSizeMismatch {
            expected: samples.len(),
            got: cat.eps.len(),
        });
    }
    let k = d.num_classes();
    let mut init_rng = stream(cfg.seed, "init", 0);
    let mut model = Model::desk_cnn(d.frame_len, k, &mut init_rng)?;
    let mut shuffle_rng = stream(cfg.seed, "shuffle", 0);
    let mut opt = Sgd::new(cfg.lr, cfg.momentum);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        shuffle(&mut order, &mut shuffle_rng);
        let mut loss_sum = 0.0;
        for &i in &order {
            let (xi, y) = (&samples[i].0, samples[i].1);
            let onehot = one_hot(&[y], k);
            // label for the inner maximization: smoothed at the
            // pre-increment budget
            let y_inner = smooth_label(onehot.row(0), cat.eps[i], cat.c)?;
            cat.eps[i] += cat.eta;
            let radius = cat.eps[i];
            let x_adv: Vec<f64> = if radius > 0.0 {
                let attack_cfg = AttackConfig {
                    epsilon: radius,
                    step_size: cfg.inner_pgd.step_frac * radius,
                    max_iters: cfg.inner_pgd.steps,
                    tol: 1e-5,
                    random_start: None,
                };
                pgd_ascend_ce(&model, xi, y, &y_inner, &attack_cfg)?.x_adv
            } else {
                xi.clone()
            };
            cat.eps[i] = cat.eps[i].min(cat.eps_max);
            let y_update = smooth_label(onehot.row(0), cat.eps[i], cat.c)?;
            let x_t = Tensor::new(vec![1, x_adv.len()], x_adv.clone()).expect("volume");
            let t_t = Tensor::new(vec![1, k], y_update).expect("volume");
            let grads = model.grads(&x_t, &t_t)?;
            if !grads.loss.is_finite() || !grads.params.all_finite() {
                return Err(TrainError::BadConfig("training diverged to non-finite loss"));
            }
            opt.step(&mut model, &grads.params);
            loss_sum += grads.loss;
            // the schedule reacts to the post-update model's prediction
            let out = model.forward(&x_t)?;
            if argmax(out.logits.row(0)) != y {
                cat.eps[i] = (cat.eps[i] - cat.eta).max(0.0);
            }
            debug_assert!(cat.eps[i] >= 0.0 && cat.eps[i] <= cat.eps_max + 1e-12);
        }
        log.push(EpochLog {
            epoch,
            loss: loss_sum / samples.len() as f64,
            mean_eps: cat.mean_eps(),
        });
    }
    Ok((TrainOutput { model, log }, cat))
}
