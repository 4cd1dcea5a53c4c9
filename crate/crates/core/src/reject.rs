//! Run-time defenses: RBF-SVM neural rejection and an autoencoder detector.
//!
//! The rejection head is a one-vs-all soft-margin SVM with an RBF kernel
//! trained on the classifier's last-feature-layer output. Machine `k`
//! scores `s_k(ζ) = Σ_i α_i y_i exp(−γ‖ζ−ζ_i‖²) + b_k`; an input is
//! accepted as class `argmax_k s_k` only when that maximum strictly exceeds
//! the calibrated threshold `S₀`, otherwise it is rejected. Each binary
//! machine is solved by sequential minimal optimization to a KKT tolerance
//! of 1e-3.
//!
//! The autoencoder baseline flags an input when its reconstruction error
//! exceeds a threshold calibrated to the same benign flag rate.

use alloc::vec;
use alloc::vec::Vec;

use core::fmt;

// When std is in the test graph, float math binds to inherent methods
// and this trait import goes quiet; no_std builds need it.
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;

use crate::nn::{LayerSpec, Model, NnError, Sgd};
use crate::rng::{shuffle, stream};
use crate::signal::Dataset;
use crate::tensor::Tensor;

/// KKT tolerance the SMO solver drives each machine to.
pub const SMO_KKT_TOL: f64 = 1e-3;
/// Alphas below this are treated as zero when extracting support vectors.
const SV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum RejectError {
    EmptyTrainingSet,
    SingleClass,
    ClassMissing { class: usize },
    DimMismatch { expected: usize, got: usize },
    TooFewSamples { got: usize, need: usize },
    BadRate { got: f64 },
    BadHyperparameter(&'static str),
    Nn(NnError),
}

impl fmt::Display for RejectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectError::EmptyTrainingSet => write!(f, "empty training set"),
            RejectError::SingleClass => write!(f, "training set contains a single class"),
            RejectError::ClassMissing { class } => write!(f, "class {class} has no samples"),
            RejectError::DimMismatch { expected, got } => {
                write!(f, "feature dimension mismatch: expected {expected}, got {got}")
            }
            RejectError::TooFewSamples { got, need } => {
                write!(f, "need at least {need} samples, got {got}")
            }
            RejectError::BadRate { got } => write!(f, "target rate must lie in (0, 1), got {got}"),
            RejectError::BadHyperparameter(msg) => write!(f, "bad hyperparameter: {msg}"),
            RejectError::Nn(e) => write!(f, "{e}"),
        }
    }
}

impl From<NnError> for RejectError {
    fn from(e: NnError) -> Self {
        RejectError::Nn(e)
    }
}

/// One binary one-vs-all machine: support vectors, signed duals `α·y`, bias.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub support_vectors: Vec<Vec<f64>>,
    pub duals: Vec<f64>,
    pub bias: f64,
}

/// The full rejection head: K binary machines sharing one kernel width and
/// a single global rejection threshold `S₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub machines: Vec<BinarySvm>,
    pub gamma: f64,
    pub c: f64,
    /// Global rejection threshold; `NEG_INFINITY` until calibrated.
    pub threshold: f64,
    pub dim: usize,
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let mut d2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

/// Dual solution of one binary machine over a shared Gram matrix.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
}

struct Smo<'a> {
    gram: &'a [f64],
    n: usize,
    y: &'a [f64],
    c: f64,
    tol: f64,
    alphas: Vec<f64>,
    /// Kernel expansion without bias: `f[i] = Σ_j α_j y_j K_ij`.
    f: Vec<f64>,
    b: f64,
}

impl<'a> Smo<'a> {
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    fn err(&self, i: usize) -> f64 {
        self.f[i] + self.b - self.y[i]
    }

    fn non_bound(&self, i: usize) -> bool {
        self.alphas[i] > SV_CUTOFF && self.alphas[i] < self.c - SV_CUTOFF
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.err(i1), self.err(i2));
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if hi - lo < 1e-12 {
            return false;
        }
        let (k11, k12, k22) = (self.k(i1, i1), self.k(i1, i2), self.k(i2, i2));
        let eta = k11 + k22 - 2.0 * k12;
        let a2_new = if eta > 1e-12 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // objective is (numerically) linear in a2: compare endpoints
            let f1 = y1 * (self.f[i1] - y1) - a1 * k11 - s * a2 * k12;
            let f2 = y2 * (self.f[i2] - y2) - s * a1 * k12 - a2 * k22;
            let l1 = a1 + s * (a2 - lo);
            let h1 = a1 + s * (a2 - hi);
            let lobj = l1 * f1 + lo * f2
                + 0.5 * l1 * l1 * k11
                + 0.5 * lo * lo * k22
                + s * lo * l1 * k12;
            let hobj = h1 * f1 + hi * f2
                + 0.5 * h1 * h1 * k11
                + 0.5 * hi * hi * k22
                + s * hi * h1 * k12;
            if lobj < hobj - 1e-12 {
                lo
            } else if lobj > hobj + 1e-12 {
                hi
            } else {
                return false;
            }
        };
        if (a2_new - a2).abs() < 1e-10 * (a2_new + a2 + 1e-10) {
            return false;
        }
        let a1_new = (a1 + s * (a2 - a2_new)).clamp(0.0, self.c);
        let d1 = a1_new - a1;
        let d2 = a2_new - a2;
        for k in 0..self.n {
            self.f[k] += y1 * d1 * self.k(i1, k) + y2 * d2 * self.k(i2, k);
        }
        self.alphas[i1] = a1_new;
        self.alphas[i2] = a2_new;
        let b1 = y1 - self.f[i1];
        let b2 = y2 - self.f[i2];
        self.b = if a1_new > SV_CUTOFF && a1_new < self.c - SV_CUTOFF {
            b1
        } else if a2_new > SV_CUTOFF && a2_new < self.c - SV_CUTOFF {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.y[i2];
        let a2 = self.alphas[i2];
        let e2 = self.err(i2);
        let r2 = e2 * y2;
        let violates = (r2 < -self.tol && a2 < self.c - SV_CUTOFF)
            || (r2 > self.tol && a2 > SV_CUTOFF);
        if !violates {
            return false;
        }
        // second-choice heuristic: largest |E1 − E2| among non-bound points
        let mut best: Option<(usize, f64)> = None;
        for i1 in 0..self.n {
            if self.non_bound(i1) {
                let gap = (self.err(i1) - e2).abs();
                if best.map_or(true, |(_, g)| gap > g) {
                    best = Some((i1, gap));
                }
            }
        }
        if let Some((i1, _)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // then the remaining non-bound points, then everything, from a
        // deterministic offset
        for off in 0..self.n {
            let i1 = (i2 + 1 + off) % self.n;
            if self.non_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        for off in 0..self.n {
            let i1 = (i2 + 1 + off) % self.n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }
}

/// Solve one binary soft-margin SVM over a precomputed Gram matrix with
/// Platt's SMO, to KKT tolerance `tol`.
pub fn smo_solve(gram: &[f64], n: usize, y: &[f64], c: f64, tol: f64) -> SmoSolution {
    debug_assert_eq!(gram.len(), n * n);
    debug_assert_eq!(y.len(), n);
    let mut smo = Smo { gram, n, y, c, tol, alphas: vec![0.0; n], f: vec![0.0; n], b: 0.0 };
    let mut num_changed = 1usize;
    let mut examine_all = true;
    let mut passes = 0usize;
    // Platt's outer loop: alternate full passes with non-bound sweeps until
    // a full pass changes nothing.
    while (num_changed > 0 || examine_all) && passes <= 10_000 {
        num_changed = 0;
        for i in 0..n {
            if (examine_all || smo.non_bound(i)) && smo.examine(i) {
                num_changed += 1;
            }
        }
        if examine_all {
            examine_all = false;
        } else if num_changed == 0 {
            examine_all = true;
        }
        passes += 1;
    }
    SmoSolution { alphas: smo.alphas, bias: smo.b }
}

/// Precompute the RBF Gram matrix shared by all one-vs-all machines.
pub fn rbf_gram(features: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = features.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        gram[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let k = rbf_kernel(&features[i], &features[j], gamma);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }
    gram
}

/// Train the one-vs-all rejection head on benign feature rows.
pub fn svm_train(
    features: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    gamma: f64,
    c: f64,
) -> Result<SvmModel, RejectError> {
    if features.is_empty() {
        return Err(RejectError::EmptyTrainingSet);
    }
    if num_classes < 2 {
        return Err(RejectError::SingleClass);
    }
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(RejectError::BadHyperparameter("gamma must be positive"));
    }
    if c <= 0.0 || !c.is_finite() {
        return Err(RejectError::BadHyperparameter("C must be positive"));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(RejectError::DimMismatch { expected: dim, got: bad.len() });
    }
    let n = features.len();
    if n < num_classes {
        return Err(RejectError::TooFewSamples { got: n, need: num_classes });
    }
    for k in 0..num_classes {
        if !labels.iter().any(|&l| l == k) {
            return Err(RejectError::ClassMissing { class: k });
        }
    }
    let gram = rbf_gram(features, gamma);
    let mut machines = Vec::with_capacity(num_classes);
    for k in 0..num_classes {
        let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
        let sol = smo_solve(&gram, n, &y, c, SMO_KKT_TOL);
        let mut support_vectors = Vec::new();
        let mut duals = Vec::new();
        for i in 0..n {
            if sol.alphas[i] > SV_CUTOFF {
                support_vectors.push(features[i].clone());
                duals.push(sol.alphas[i] * y[i]);
            }
        }
        machines.push(BinarySvm { support_vectors, duals, bias: sol.bias });
    }
    Ok(SvmModel { machines, gamma, c, threshold: f64::NEG_INFINITY, dim })
}

/// Decision score of one machine at `z`.
pub fn machine_score(machine: &BinarySvm, gamma: f64, z: &[f64]) -> f64 {
    let mut score = machine.bias;
    for (sv, d) in machine.support_vectors.iter().zip(&machine.duals) {
        score += d * rbf_kernel(sv, z, gamma);
    }
    score
}

/// All K decision scores at `z`.
pub fn svm_scores(svm: &SvmModel, z: &[f64]) -> Result<Vec<f64>, RejectError> {
    if z.len() != svm.dim {
        return Err(RejectError::DimMismatch { expected: svm.dim, got: z.len() });
    }
    Ok(svm.machines.iter().map(|m| machine_score(m, svm.gamma, z)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Class(usize),
    Reject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectDecision {
    pub outcome: Decision,
    pub scores: Vec<f64>,
}

/// Argmax-over-threshold decision rule: the top class is returned only when
/// its score strictly exceeds `S₀`; exact score ties break toward the
/// lowest class id.
pub fn classify_with_rejection(svm: &SvmModel, z: &[f64]) -> Result<RejectDecision, RejectError> {
    let scores = svm_scores(svm, z)?;
    let mut best = 0usize;
    for (i, v) in scores.iter().enumerate().skip(1) {
        if *v > scores[best] {
            best = i;
        }
    }
    let outcome =
        if scores[best] > svm.threshold { Decision::Class(best) } else { Decision::Reject };
    Ok(RejectDecision { outcome, scores })
}

/// The low-quantile threshold rejecting (`≤`) exactly `k` of the sorted
/// values, placed midway between the bracketing order statistics.
pub fn threshold_below_k(sorted_ascending: &[f64], k: usize) -> f64 {
    let n = sorted_ascending.len();
    debug_assert!(n > 0);
    let k = k.min(n - 1);
    if k == 0 {
        // strictly below the minimum: thresholding with `<=` rejects nothing
        next_down(sorted_ascending[0])
    } else {
        0.5 * (sorted_ascending[k - 1] + sorted_ascending[k])
    }
}

fn next_down(v: f64) -> f64 {
    v.next_down()
}

fn next_up(v: f64) -> f64 {
    v.next_up()
}

/// Calibrate `S₀` as the empirical `target_rate` quantile of per-sample max
/// scores over a benign validation set, so that the benign rejection
/// fraction matches the target within quantile granularity.
pub fn calibrate_threshold(
    svm: &SvmModel,
    benign_features: &[Vec<f64>],
    target_rate: f64,
) -> Result<f64, RejectError> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(RejectError::BadRate { got: target_rate });
    }
    let n = benign_features.len();
    if n < 100 {
        return Err(RejectError::TooFewSamples { got: n, need: 100 });
    }
    let mut max_scores = Vec::with_capacity(n);
    for z in benign_features {
        let scores = svm_scores(svm, z)?;
        max_scores.push(scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    max_scores.sort_unstable_by(|a, b| a.total_cmp(b));
    let k = (target_rate * n as f64).round() as usize;
    Ok(threshold_below_k(&max_scores, k))
}

// ---------------------------------------------------------------------------
// Autoencoder detector
// ---------------------------------------------------------------------------

/// Dense autoencoder over flattened frames plus its calibrated MSE
/// threshold (`INFINITY` until calibrated: flags nothing).
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub model: Model,
    pub mse_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 64, lr: 0.05, momentum: 0.9, seed: 0 }
    }
}

/// The 2N→64→16→64→2N dense reconstruction stack.
pub fn ae_arch(n: usize, rng: &mut ChaCha8Rng) -> Result<Model, NnError> {
    Model::build(
        (1, 2, n),
        &[
            LayerSpec::Flatten,
            LayerSpec::Dense { out_dim: 64 },
            LayerSpec::Relu,
            LayerSpec::Dense { out_dim: 16 },
            LayerSpec::Relu,
            LayerSpec::Dense { out_dim: 64 },
            LayerSpec::Relu,
            LayerSpec::Dense { out_dim: 2 * n },
        ],
        None,
        rng,
    )
}

/// Per-sample reconstruction error: mean over the `2N` entries of
/// `(h(x) − x)²`.
pub fn ae_mse(model: &Model, x: &[f64]) -> Result<f64, RejectError> {
    let t = Tensor::new(vec![1, x.len()], x.to_vec()).map_err(NnError::from)?;
    let out = model.forward(&t)?;
    let d = x.len() as f64;
    let mse = out
        .logits
        .data()
        .iter()
        .zip(x)
        .map(|(r, v)| {
            let e = r - v;
            e * e
        })
        .sum::<f64>()
        / d;
    Ok(mse)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeDetection {
    pub mse: f64,
    pub flagged: bool,
}

/// Flag `x` when its reconstruction error exceeds the calibrated threshold.
pub fn ae_detect(ae: &Autoencoder, x: &[f64]) -> Result<AeDetection, RejectError> {
    let mse = ae_mse(&ae.model, x)?;
    Ok(AeDetection { mse, flagged: mse > ae.mse_threshold })
}

/// Train the reconstruction stack on benign train-split frames by SGD on
/// the mean-squared error. The threshold is left uncalibrated.
pub fn ae_train(dataset: &Dataset, cfg: &AeTrainConfig) -> Result<Autoencoder, RejectError> {
    let frames: Vec<Vec<f64>> =
        dataset.train().map(|r| r.frame.samples_f64()).collect();
    if frames.is_empty() {
        return Err(RejectError::EmptyTrainingSet);
    }
    let d = frames[0].len();
    let mut init_rng = stream(cfg.seed, "ae-init", 0);
    let mut model = ae_arch(dataset.frame_len, &mut init_rng)?;
    let mut shuffle_rng = stream(cfg.seed, "ae-shuffle", 0);
    let mut opt = Sgd::new(cfg.lr, cfg.momentum);
    let mut order: Vec<usize> = (0..frames.len()).collect();
    for _epoch in 0..cfg.epochs {
        shuffle(&mut order, &mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            let mut data = Vec::with_capacity(b * d);
            for &i in chunk {
                data.extend_from_slice(&frames[i]);
            }
            let x = Tensor::new(vec![b, d], data).map_err(NnError::from)?;
            let pass = model.forward(&x)?;
            let mut cot = pass.logits;
            let scale = 2.0 / (d as f64 * b as f64);
            for (c, v) in cot.data_mut().iter_mut().zip(x.data()) {
                *c = (*c - v) * scale;
            }
            let (params, _) = model.logit_backward(&x, &cot)?;
            opt.step(&mut model, &params);
        }
    }
    Ok(Autoencoder { model, mse_threshold: f64::INFINITY })
}

/// Calibrate the MSE flag threshold so the benign flag rate matches
/// `target_rate` (quantile rule mirroring [`calibrate_threshold`]).
pub fn calibrate_ae_threshold(
    model: &Model,
    benign_frames: &[Vec<f64>],
    target_rate: f64,
) -> Result<f64, RejectError> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(RejectError::BadRate { got: target_rate });
    }
    let n = benign_frames.len();
    if n < 100 {
        return Err(RejectError::TooFewSamples { got: n, need: 100 });
    }
    let mut mses = Vec::with_capacity(n);
    for x in benign_frames {
        mses.push(ae_mse(model, x)?);
    }
    mses.sort_unstable_by(|a, b| a.total_cmp(b));
    // flag iff mse > T: flagging the top k means T sits below the k-th
    // largest value
    let k = ((target_rate * n as f64).round() as usize).min(n - 1);
    if k == 0 {
        Ok(next_up(mses[n - 1]))
    } else {
        Ok(0.5 * (mses[n - k - 1] + mses[n - k]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use crate::rng::stream;
    use alloc::vec;
    use rand::Rng;

    fn blobs(
        n_per: usize,
        centers: &[&[f64]],
        spread: f64,
        seed: u64,
    ) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = stream(seed, "blobs", 0);
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for (k, c) in centers.iter().enumerate() {
            for _ in 0..n_per {
                let p: Vec<f64> =
                    c.iter().map(|&v| v + rng.random_range(-spread..spread)).collect();
                feats.push(p);
                labels.push(k);
            }
        }
        (feats, labels)
    }

    #[test]
    fn two_point_machine_is_antisymmetric() {
        let features = vec![vec![-1.0], vec![1.0]];
        let labels = vec![0usize, 1usize];
        let svm = svm_train(&features, &labels, 2, 0.5, 1000.0).unwrap();
        let at = |z: f64| svm_scores(&svm, &[z]).unwrap();
        let origin = at(0.0);
        assert!(origin[0].abs() < 1e-9, "machine 0 at origin: {}", origin[0]);
        assert!(origin[1].abs() < 1e-9);
        assert!(at(-0.5)[0] > 0.0 && at(0.5)[0] < 0.0);
        assert!(at(-0.5)[1] < 0.0 && at(0.5)[1] > 0.0);
    }

    #[test]
    fn training_scores_match_dual_sum_recomputation() {
        let (features, labels) = blobs(20, &[&[0.0, 0.0], &[3.0, 1.0], &[-2.0, 2.5]], 0.8, 3);
        let svm = svm_train(&features, &labels, 3, 0.3, 1.0).unwrap();
        for z in features.iter().take(10) {
            let scores = svm_scores(&svm, z).unwrap();
            for (m, s) in svm.machines.iter().zip(&scores) {
                let mut want = m.bias;
                for (sv, d) in m.support_vectors.iter().zip(&m.duals) {
                    let d2: f64 =
                        sv.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                    want += d * (-0.3 * d2).exp();
                }
                assert!((want - s).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn smo_satisfies_kkt_conditions() {
        let (features, labels) = blobs(25, &[&[0.0, 0.0], &[2.0, 2.0]], 1.0, 11);
        let gram = rbf_gram(&features, 0.5);
        let n = features.len();
        let y: Vec<f64> = labels.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
        let c = 1.0;
        let sol = smo_solve(&gram, n, &y, c, SMO_KKT_TOL);
        assert!((sol.alphas.iter().zip(&y).map(|(a, yy)| a * yy).sum::<f64>()).abs() < 1e-9);
        for i in 0..n {
            let f: f64 = (0..n).map(|j| sol.alphas[j] * y[j] * gram[j * n + i]).sum::<f64>()
                + sol.bias;
            let margin = y[i] * f;
            let a = sol.alphas[i];
            if a <= SV_CUTOFF {
                assert!(margin >= 1.0 - SMO_KKT_TOL, "i={i} margin {margin}");
            } else if a >= c - SV_CUTOFF {
                assert!(margin <= 1.0 + SMO_KKT_TOL, "i={i} margin {margin}");
            } else {
                assert!((margin - 1.0).abs() <= SMO_KKT_TOL, "i={i} margin {margin}");
            }
        }
    }

    #[test]
    fn lone_support_vector_scores_one_at_itself() {
        let machine =
            BinarySvm { support_vectors: vec![vec![0.3, -0.7]], duals: vec![1.0], bias: 0.0 };
        assert!((machine_score(&machine, 0.01, &[0.3, -0.7]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn large_gamma_far_point_scores_bias() {
        let machine =
            BinarySvm { support_vectors: vec![vec![0.0, 0.0]], duals: vec![5.0], bias: -0.25 };
        let s = machine_score(&machine, 1e6, &[3.0, 3.0]);
        assert!((s - (-0.25)).abs() < 1e-300);
    }

    #[test]
    fn rejection_rule_and_tie_break() {
        let machine = |b: f64| BinarySvm { support_vectors: vec![], duals: vec![], bias: b };
        let mut svm = SvmModel {
            machines: vec![machine(0.5), machine(-0.5)],
            gamma: 0.01,
            c: 1.0,
            threshold: 1.0,
            dim: 2,
        };
        // all scores below S₀ → reject
        let d = classify_with_rejection(&svm, &[0.0, 0.0]).unwrap();
        assert_eq!(d.outcome, Decision::Reject);
        // scores (S₀+1, S₀−1, ...) → class 0
        svm.machines[0].bias = 2.0;
        svm.machines[1].bias = 0.0;
        let d = classify_with_rejection(&svm, &[0.0, 0.0]).unwrap();
        assert_eq!(d.outcome, Decision::Class(0));
        // exact tie above the threshold → lowest id
        svm.machines[0].bias = 2.0;
        svm.machines[1].bias = 2.0;
        let d = classify_with_rejection(&svm, &[0.0, 0.0]).unwrap();
        assert_eq!(d.outcome, Decision::Class(0));
    }

    #[test]
    fn decision_invariant_under_common_offset() {
        let (features, labels) = blobs(15, &[&[0.0], &[2.0]], 0.5, 21);
        let mut svm = svm_train(&features, &labels, 2, 0.5, 1.0).unwrap();
        svm.threshold = 0.1;
        let probes: Vec<Vec<f64>> = vec![vec![-0.2], vec![0.9], vec![1.7], vec![5.0]];
        let before: Vec<_> = probes
            .iter()
            .map(|z| classify_with_rejection(&svm, z).unwrap().outcome)
            .collect();
        let mut shifted = svm.clone();
        for m in &mut shifted.machines {
            m.bias += 3.5;
        }
        shifted.threshold += 3.5;
        for (z, want) in probes.iter().zip(&before) {
            assert_eq!(classify_with_rejection(&shifted, z).unwrap().outcome, *want);
        }
    }

    #[test]
    fn threshold_order_statistics_example() {
        let scores: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let t = threshold_below_k(&scores, 1);
        assert!(t > 1.0 && t < 2.0, "S₀ = {t}");
        assert_eq!(scores.iter().filter(|&&s| s <= t).count(), 1);
        // k = 0 rejects nothing
        let t0 = threshold_below_k(&scores, 0);
        assert!(scores.iter().all(|&s| s > t0));
    }

    #[test]
    fn calibration_monotone_in_target_rate() {
        let (features, labels) = blobs(60, &[&[0.0], &[2.0]], 0.7, 31);
        let svm = svm_train(&features, &labels, 2, 0.5, 1.0).unwrap();
        let benign: Vec<Vec<f64>> = features;
        let mut last = f64::NEG_INFINITY;
        for rate in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let t = calibrate_threshold(&svm, &benign, rate).unwrap();
            assert!(t >= last, "rate {rate}: {t} < {last}");
            last = t;
        }
    }

    #[test]
    fn calibration_hits_target_rate_on_calibration_set() {
        let (features, labels) = blobs(100, &[&[0.0], &[2.0]], 0.7, 41);
        let mut svm = svm_train(&features, &labels, 2, 0.5, 1.0).unwrap();
        svm.threshold = calibrate_threshold(&svm, &features, 0.10).unwrap();
        let rejected = features
            .iter()
            .filter(|z| {
                classify_with_rejection(&svm, z).unwrap().outcome == Decision::Reject
            })
            .count();
        let rate = rejected as f64 / features.len() as f64;
        assert!((0.09..=0.11).contains(&rate), "rate {rate}");
    }

    #[test]
    fn score_changes_bounded_by_analytic_lipschitz_constant() {
        let (features, labels) = blobs(20, &[&[0.0, 0.0], &[1.5, 1.5]], 0.6, 51);
        let svm = svm_train(&features, &labels, 2, 0.5, 1.0).unwrap();
        // global bound: sup_r 2γ r e^{−γr²} = sqrt(2γ/e) per unit |dual|
        let mut rng = stream(52, "lip", 0);
        for m in &svm.machines {
            let dual_mass: f64 = m.duals.iter().map(|d| d.abs()).sum();
            let lip = dual_mass * (2.0 * svm.gamma / core::f64::consts::E).sqrt();
            for _ in 0..50 {
                let z: Vec<f64> =
                    (0..2).map(|_| rng.random_range(-2.0..3.0)).collect();
                let delta: Vec<f64> =
                    (0..2).map(|_| rng.random_range(-0.01..0.01)).collect();
                let z2: Vec<f64> = z.iter().zip(&delta).map(|(a, b)| a + b).collect();
                let d_norm: f64 = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
                let jump =
                    (machine_score(m, svm.gamma, &z2) - machine_score(m, svm.gamma, &z)).abs();
                assert!(jump <= lip * d_norm * (1.0 + 1e-9) + 1e-12);
            }
        }
    }

    #[test]
    fn svm_train_validates_inputs() {
        let feats = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            svm_train(&feats, &[0, 0], 2, 0.01, 1.0),
            Err(RejectError::ClassMissing { class: 1 })
        ));
        assert!(matches!(
            svm_train(&feats, &[0, 1], 1, 0.01, 1.0),
            Err(RejectError::SingleClass)
        ));
        assert!(matches!(
            svm_train(&[], &[], 2, 0.01, 1.0),
            Err(RejectError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn identity_autoencoder_has_zero_mse() {
        let mut rng = stream(61, "ae", 0);
        let n = 8;
        let mut model = Model::build(
            (1, 2, n),
            &[LayerSpec::Flatten, LayerSpec::Dense { out_dim: 2 * n }],
            None,
            &mut rng,
        )
        .unwrap();
        if let Layer::Dense(d) = &mut model.layers[1] {
            d.weight.iter_mut().for_each(|w| *w = 0.0);
            for i in 0..2 * n {
                d.weight[i * 2 * n + i] = 1.0;
            }
        }
        let x: Vec<f64> = (0..2 * n).map(|i| (i as f64) * 0.1 - 0.8).collect();
        assert_eq!(ae_mse(&model, &x).unwrap(), 0.0);
        let ae = Autoencoder { model, mse_threshold: 1e-9 };
        assert!(!ae_detect(&ae, &x).unwrap().flagged);
    }

    #[test]
    fn ae_mse_matches_scalar_recomputation() {
        let mut rng = stream(62, "ae", 0);
        let n = 8;
        let model = ae_arch(n, &mut rng).unwrap();
        let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = ae_mse(&model, &x).unwrap();
        let t = Tensor::new(vec![1, 2 * n], x.clone()).unwrap();
        let recon = model.forward(&t).unwrap().logits;
        let want: f64 = recon
            .data()
            .iter()
            .zip(&x)
            .map(|(r, v)| (r - v) * (r - v))
            .sum::<f64>()
            / (2 * n) as f64;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn ae_threshold_calibration_flags_target_fraction() {
        let mut rng = stream(63, "ae", 0);
        let n = 8;
        let model = ae_arch(n, &mut rng).unwrap();
        let frames: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..2 * n).map(|_| rng.random_range(-0.3..0.3)).collect())
            .collect();
        let t = calibrate_ae_threshold(&model, &frames, 0.10).unwrap();
        let flagged = frames
            .iter()
            .filter(|x| ae_mse(&model, x).unwrap() > t)
            .count();
        let rate = flagged as f64 / frames.len() as f64;
        assert!((0.09..=0.11).contains(&rate), "rate {rate}");
    }
}
