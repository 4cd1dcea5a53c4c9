//! l2-constrained PGD attacks.
//!
//! Three white-box attacks share one projection primitive:
//!
//! - [`pgd_untargeted`] ascends the cross-entropy of the bare classifier,
//! - [`attack_htrd`] descends the rejection-aware margin
//!   `Ψ(x) = s_y(x) − max_{j≠y} s_j(x)` of the SVM head, with the input
//!   gradient assembled by the chain rule
//!   `∇Ψ = (∂ζ/∂x)ᵀ · ∂Ψ/∂ζ` (feature VJP times the RBF score gradient),
//! - [`attack_twofold`] alternates between forcing a misclassification of
//!   the classifier and suppressing the autoencoder's reconstruction error,
//!   until both succeed at once.
//!
//! Every iterate is projected back onto the l2 ball of radius ε around the
//! clean input; a zero budget returns the input unchanged. All attacks are
//! deterministic functions of (model, input, config).

use alloc::vec;
use alloc::vec::Vec;

use core::fmt;

// When std is in the test graph, float math binds to inherent methods
// and this trait import goes quiet; no_std builds need it.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::nn::{argmax, one_hot, Model, NnError};
use crate::reject::{svm_scores, Autoencoder, RejectError, SvmModel};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum AttackError {
    NonFiniteGradient { iter: usize },
    BadLabel { label: usize, classes: usize },
    BadConfig(&'static str),
    Nn(NnError),
    Reject(RejectError),
}

impl fmt::Display for AttackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackError::NonFiniteGradient { iter } => {
                write!(f, "non-finite gradient at iteration {iter}")
            }
            AttackError::BadLabel { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            AttackError::BadConfig(msg) => write!(f, "bad attack config: {msg}"),
            AttackError::Nn(e) => write!(f, "{e}"),
            AttackError::Reject(e) => write!(f, "{e}"),
        }
    }
}

impl From<NnError> for AttackError {
    fn from(e: NnError) -> Self {
        AttackError::Nn(e)
    }
}

impl From<RejectError> for AttackError {
    fn from(e: RejectError) -> Self {
        AttackError::Reject(e)
    }
}

/// Budget, step size ξ, iteration cap, and convergence tolerance t.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub step_size: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Seed for a uniform-in-ball random start; `None` starts at the input.
    pub random_start: Option<u64>,
}

impl AttackConfig {
    /// Defaults for a given budget: ξ = ε/10, 50 iterations, t = 1e-5,
    /// no random start.
    pub fn for_epsilon(epsilon: f64) -> Self {
        let step_size = if epsilon > 0.0 { epsilon / 10.0 } else { 1e-3 };
        Self { epsilon, step_size, max_iters: 50, tol: 1e-5, random_start: None }
    }

    fn validate(&self) -> Result<(), AttackError> {
        if !(self.epsilon >= 0.0) {
            return Err(AttackError::BadConfig("epsilon must be non-negative"));
        }
        if !(self.step_size > 0.0) {
            return Err(AttackError::BadConfig("step size must be positive"));
        }
        if self.max_iters < 1 {
            return Err(AttackError::BadConfig("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(AttackError::BadConfig("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub x_adv: Vec<f64>,
    pub iters_used: usize,
    pub success: bool,
    pub objective_trace: Vec<f64>,
}

/// Project `x_prime` onto the l2 ball of radius `epsilon` around `x0`:
/// `x0 + ε·(x′−x0)/max(‖x′−x0‖, ε)`. Points already inside come back
/// unchanged; a zero budget returns the center exactly.
pub fn project_l2(x_prime: &[f64], x0: &[f64], epsilon: f64) -> Vec<f64> {
    debug_assert_eq!(x_prime.len(), x0.len());
    if epsilon == 0.0 {
        return x0.to_vec();
    }
    let mut norm_sq = 0.0;
    for (p, c) in x_prime.iter().zip(x0) {
        let d = p - c;
        norm_sq += d * d;
    }
    let norm = norm_sq.sqrt();
    if norm <= epsilon {
        return x_prime.to_vec();
    }
    let scale = epsilon / norm;
    x_prime.iter().zip(x0).map(|(p, c)| c + (p - c) * scale).collect()
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn as_row(x: &[f64]) -> Tensor {
    Tensor::new(vec![1, x.len()], x.to_vec()).expect("volume by construction")
}

/// Uniform draw from the ε-ball for the optional random start.
fn ball_jitter(x0: &[f64], epsilon: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir: Vec<f64> = (0..x0.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return x0.to_vec();
    }
    let u: f64 = rng.random_range(0.0..1.0);
    let radius = epsilon * u.powf(1.0 / x0.len() as f64);
    x0.iter().zip(&dir).map(|(c, d)| c + d * radius / norm).collect()
}

fn start_point(x0: &[f64], cfg: &AttackConfig) -> Vec<f64> {
    match cfg.random_start {
        Some(seed) if cfg.epsilon > 0.0 => {
            project_l2(&ball_jitter(x0, cfg.epsilon, seed), x0, cfg.epsilon)
        }
        _ => x0.to_vec(),
    }
}

/// PGD ascent of the cross-entropy between the model output and an
/// arbitrary target distribution; `y` is the true label used for the
/// success check. Runs the full iteration budget.
pub fn pgd_ascend_ce(
    model: &Model,
    x0: &[f64],
    y: usize,
    target: &[f64],
    cfg: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    cfg.validate()?;
    let k = model.num_classes();
    if y >= k {
        return Err(AttackError::BadLabel { label: y, classes: k });
    }
    let target = Tensor::new(vec![1, k], target.to_vec()).map_err(NnError::from)?;
    if cfg.epsilon == 0.0 {
        let out = model.forward(&as_row(x0))?;
        let success = argmax(out.logits.row(0)) != y;
        return Ok(AttackResult {
            x_adv: x0.to_vec(),
            iters_used: 0,
            success,
            objective_trace: Vec::new(),
        });
    }
    let mut x = start_point(x0, cfg);
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut vg = model.value_grad_ce(&as_row(&x), &target)?;
    for iter in 0..cfg.max_iters {
        if !vg.input_grad.all_finite() {
            return Err(AttackError::NonFiniteGradient { iter });
        }
        let stepped: Vec<f64> = x
            .iter()
            .zip(vg.input_grad.data())
            .map(|(v, g)| v + cfg.step_size * g)
            .collect();
        x = project_l2(&stepped, x0, cfg.epsilon);
        vg = model.value_grad_ce(&as_row(&x), &target)?;
        trace.push(vg.loss);
    }
    let success = argmax(vg.logits.row(0)) != y;
    let iters_used = trace.len();
    Ok(AttackResult { x_adv: x, iters_used, success, objective_trace: trace })
}

/// Untargeted PGD against the bare classifier: gradient ascent on the
/// cross-entropy against the one-hot true label, projected onto the ε-ball.
pub fn pgd_untargeted(
    model: &Model,
    x0: &[f64],
    y: usize,
    cfg: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    let k = model.num_classes();
    if y >= k {
        return Err(AttackError::BadLabel { label: y, classes: k });
    }
    let target = one_hot(&[y], k);
    pgd_ascend_ce(model, x0, y, target.data(), cfg)
}

/// Feature vector and decision scores of the rejection head at input `x`.
fn htrd_scores(
    model: &Model,
    svm: &SvmModel,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), AttackError> {
    let features = model.features(&as_row(x))?;
    let z = features.row(0).to_vec();
    let scores = svm_scores(svm, &z)?;
    Ok((z, scores))
}

fn best_wrong(scores: &[f64], y: usize) -> usize {
    let mut best = usize::MAX;
    for (j, v) in scores.iter().enumerate() {
        if j != y && (best == usize::MAX || *v > scores[best]) {
            best = j;
        }
    }
    best
}

/// `Ψ = s_y − max_{j≠y} s_j` from a score vector. The rejection
/// pseudo-class is excluded from the max; its score is the threshold `S₀`
/// and enters only the escape rule.
fn psi_from_scores(scores: &[f64], y: usize) -> f64 {
    scores[y] - scores[best_wrong(scores, y)]
}

/// Escape rule: some wrong-class score beats both the true class and the
/// rejection threshold, i.e. `max_{j∉{0,y}} s_j > max(s_y, S₀)`.
fn escaped(scores: &[f64], y: usize, threshold: f64) -> bool {
    scores[best_wrong(scores, y)] > scores[y].max(threshold)
}

/// The white-box objective `Ψ(x) = s_y(x) − max_{j∉{0,y}} s_j(x)` of the
/// SVM rejection defense at input `x`.
pub fn htrd_objective(
    model: &Model,
    svm: &SvmModel,
    x: &[f64],
    y: usize,
) -> Result<f64, AttackError> {
    if y >= svm.machines.len() || svm.machines.len() < 2 {
        return Err(AttackError::BadLabel { label: y, classes: svm.machines.len() });
    }
    let (_, scores) = htrd_scores(model, svm, x)?;
    Ok(psi_from_scores(&scores, y))
}

/// Gradient of machine `k`'s decision score with respect to the feature
/// vector: `Σ_i −2γ α_i y_i exp(−γ‖ζ−ζ_i‖²)·(ζ−ζ_i)`.
pub fn svm_input_gradient(svm: &SvmModel, machine: usize, z: &[f64]) -> Vec<f64> {
    let m = &svm.machines[machine];
    let gamma = svm.gamma;
    let mut grad = vec![0.0; z.len()];
    for (sv, dual) in m.support_vectors.iter().zip(&m.duals) {
        let mut d2 = 0.0;
        for (a, b) in z.iter().zip(sv) {
            let d = a - b;
            d2 += d * d;
        }
        let coeff = -2.0 * gamma * dual * (-gamma * d2).exp();
        for ((g, a), b) in grad.iter_mut().zip(z).zip(sv) {
            *g += coeff * (a - b);
        }
    }
    grad
}

/// White-box PGD against the rejection defense: descend Ψ through the
/// feature-layer chain rule until Ψ converges (|ΔΨ| ≤ t), the iterate
/// escapes the defense, or the iteration budget runs out. Success is the
/// escape condition at the final iterate.
pub fn attack_htrd(
    model: &Model,
    svm: &SvmModel,
    x0: &[f64],
    y: usize,
    cfg: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    cfg.validate()?;
    if y >= svm.machines.len() || svm.machines.len() < 2 {
        return Err(AttackError::BadLabel { label: y, classes: svm.machines.len() });
    }
    let (mut z, mut scores) = htrd_scores(model, svm, x0)?;
    if escaped(&scores, y, svm.threshold) {
        return Ok(AttackResult {
            x_adv: x0.to_vec(),
            iters_used: 0,
            success: true,
            objective_trace: Vec::new(),
        });
    }
    if cfg.epsilon == 0.0 {
        return Ok(AttackResult {
            x_adv: x0.to_vec(),
            iters_used: 0,
            success: false,
            objective_trace: Vec::new(),
        });
    }
    let mut x = start_point(x0, cfg);
    if cfg.random_start.is_some() {
        let fresh = htrd_scores(model, svm, &x)?;
        z = fresh.0;
        scores = fresh.1;
        if escaped(&scores, y, svm.threshold) {
            return Ok(AttackResult {
                x_adv: x,
                iters_used: 0,
                success: true,
                objective_trace: Vec::new(),
            });
        }
    }
    let mut psi_prev = psi_from_scores(&scores, y);
    let mut trace = Vec::new();
    let mut success = false;
    for iter in 0..cfg.max_iters {
        let j = best_wrong(&scores, y);
        let gy = svm_input_gradient(svm, y, &z);
        let gj = svm_input_gradient(svm, j, &z);
        let dpsi_dz: Vec<f64> = gy.iter().zip(&gj).map(|(a, b)| a - b).collect();
        let grad = model.feature_vjp(&as_row(&x), &dpsi_dz)?;
        if !grad.all_finite() {
            return Err(AttackError::NonFiniteGradient { iter });
        }
        let stepped: Vec<f64> =
            x.iter().zip(grad.data()).map(|(v, g)| v - cfg.step_size * g).collect();
        x = project_l2(&stepped, x0, cfg.epsilon);
        let fresh = htrd_scores(model, svm, &x)?;
        z = fresh.0;
        scores = fresh.1;
        let psi = psi_from_scores(&scores, y);
        trace.push(psi);
        if escaped(&scores, y, svm.threshold) {
            success = true;
            break;
        }
        if (psi - psi_prev).abs() <= cfg.tol {
            break;
        }
        psi_prev = psi;
    }
    let iters_used = trace.len();
    Ok(AttackResult { x_adv: x, iters_used, success, objective_trace: trace })
}

/// White-box PGD against the classifier+autoencoder baseline. Each step
/// either ascends the classification loss through the logit margin (while
/// the classifier still predicts the true class) or descends the
/// reconstruction error (while the detector still flags the iterate),
/// stopping on joint success: misclassified and unflagged.
pub fn attack_twofold(
    model: &Model,
    ae: &Autoencoder,
    x0: &[f64],
    y: usize,
    cfg: &AttackConfig,
    ae_threshold: f64,
) -> Result<AttackResult, AttackError> {
    cfg.validate()?;
    let k = model.num_classes();
    if y >= k || k < 2 {
        return Err(AttackError::BadLabel { label: y, classes: k });
    }
    let d = x0.len() as f64;
    let eval = |x: &[f64]| -> Result<(Vec<f64>, f64), AttackError> {
        let logits = model.forward(&as_row(x))?.logits.row(0).to_vec();
        let mse = crate::reject::ae_mse(&ae.model, x)?;
        Ok((logits, mse))
    };
    let joint = |logits: &[f64], mse: f64| argmax(logits) != y && mse < ae_threshold;

    let (mut logits, mut mse) = eval(x0)?;
    if joint(&logits, mse) {
        return Ok(AttackResult {
            x_adv: x0.to_vec(),
            iters_used: 0,
            success: true,
            objective_trace: Vec::new(),
        });
    }
    if cfg.epsilon == 0.0 {
        return Ok(AttackResult {
            x_adv: x0.to_vec(),
            iters_used: 0,
            success: false,
            objective_trace: Vec::new(),
        });
    }
    let mut x = start_point(x0, cfg);
    if cfg.random_start.is_some() {
        let fresh = eval(&x)?;
        logits = fresh.0;
        mse = fresh.1;
        if joint(&logits, mse) {
            return Ok(AttackResult {
                x_adv: x,
                iters_used: 0,
                success: true,
                objective_trace: Vec::new(),
            });
        }
    }
    let mut trace = Vec::new();
    let mut success = false;
    for iter in 0..cfg.max_iters {
        let classify_branch = argmax(&logits) == y;
        let grad: Vec<f64> = if classify_branch {
            // descend the logit margin g_y − max_{j≠y} g_j
            let j = best_wrong(&logits, y);
            let mut cot = vec![0.0; k];
            cot[y] = 1.0;
            cot[j] = -1.0;
            let cot = Tensor::new(vec![1, k], cot).map_err(NnError::from)?;
            model.logit_vjp(&as_row(&x), &cot)?.into_data()
        } else {
            // descend MSE(h(x), x): (2/d)·(J_hᵀ r − r) with r = h(x) − x
            let recon = ae.model.forward(&as_row(&x))?.logits;
            let r: Vec<f64> = recon.data().iter().zip(&x).map(|(h, v)| h - v).collect();
            let cot: Vec<f64> = r.iter().map(|v| 2.0 * v / d).collect();
            let cot_t = Tensor::new(vec![1, cot.len()], cot.clone()).map_err(NnError::from)?;
            let jac_part = ae.model.logit_vjp(&as_row(&x), &cot_t)?;
            jac_part.data().iter().zip(&cot).map(|(a, b)| a - b).collect()
        };
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(AttackError::NonFiniteGradient { iter });
        }
        let stepped: Vec<f64> =
            x.iter().zip(&grad).map(|(v, g)| v - cfg.step_size * g).collect();
        x = project_l2(&stepped, x0, cfg.epsilon);
        let fresh = eval(&x)?;
        logits = fresh.0;
        mse = fresh.1;
        trace.push(if classify_branch {
            logits[y] - logits[best_wrong(&logits, y)]
        } else {
            mse
        });
        if joint(&logits, mse) {
            success = true;
            break;
        }
    }
    let iters_used = trace.len();
    Ok(AttackResult { x_adv: x, iters_used, success, objective_trace: trace })
}

/// Ball-constraint slack used by callers asserting attack feasibility.
pub const BALL_SLACK: f64 = 1e-6;

/// `‖x_adv − x0‖₂ ≤ ε + 1e-6` for a finished attack.
pub fn within_budget(result: &AttackResult, x0: &[f64], epsilon: f64) -> bool {
    l2_distance(&result.x_adv, x0) <= epsilon + BALL_SLACK
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;
    use crate::reject::{machine_score, BinarySvm};
    use crate::rng::stream;

    fn linear_model(d: usize, k: usize, seed: u64) -> Model {
        let mut rng = stream(seed, "linmodel", 0);
        Model::build(
            (1, 1, d),
            &[LayerSpec::Flatten, LayerSpec::Dense { out_dim: k }],
            Some(1),
            &mut rng,
        )
        .unwrap()
    }

    fn small_cnn(seed: u64) -> Model {
        let mut rng = stream(seed, "cnn", 0);
        Model::build(
            (1, 2, 16),
            &[
                LayerSpec::Conv2 { out_ch: 4, kh: 2, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { out_dim: 8 },
                LayerSpec::Relu,
                LayerSpec::Dense { out_dim: 3 },
            ],
            Some(4),
            &mut rng,
        )
        .unwrap()
    }

    fn random_svm(f: usize, k: usize, seed: u64) -> SvmModel {
        let mut rng = stream(seed, "svm", 0);
        let machines = (0..k)
            .map(|_| {
                let n_sv = rng.random_range(2..6usize);
                BinarySvm {
                    support_vectors: (0..n_sv)
                        .map(|_| (0..f).map(|_| rng.random_range(-1.0..1.0)).collect())
                        .collect(),
                    duals: (0..n_sv).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    bias: rng.random_range(-0.2..0.2),
                }
            })
            .collect();
        SvmModel { machines, gamma: 0.01, c: 1.0, threshold: 0.0, dim: f }
    }

    fn random_x(d: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, "x", 0);
        (0..d).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    #[test]
    fn project_center_is_fixed_point() {
        let x0 = [1.0, -2.0, 0.5];
        assert_eq!(project_l2(&x0, &x0, 0.7), x0.to_vec());
        assert_eq!(project_l2(&x0, &x0, 0.0), x0.to_vec());
    }

    #[test]
    fn project_scales_radially() {
        let x0 = [0.0, 0.0];
        let xp = [1.2, 1.6]; // norm 2
        let got = project_l2(&xp, &x0, 1.0);
        assert!((got[0] - 0.6).abs() < 1e-15);
        assert!((got[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn projection_beats_grid_search_in_2d() {
        let mut rng = stream(7, "grid", 0);
        for _ in 0..20 {
            let x0 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let xp = [x0[0] + rng.random_range(1.0..3.0), x0[1] + rng.random_range(1.0..3.0)];
            let eps = 0.5;
            let got = project_l2(&xp, &x0, eps);
            let r = l2_distance(&got, &x0);
            assert!((r - eps).abs() < 1e-9, "radius {r}");
            let dist_got = l2_distance(&got, &xp);
            // grid over the ball: no point may be meaningfully closer
            for gi in 0..60 {
                for gr in 0..10 {
                    let theta = gi as f64 * core::f64::consts::TAU / 60.0;
                    let rad = eps * (gr as f64 + 1.0) / 10.0;
                    let cand = [x0[0] + rad * theta.cos(), x0[1] + rad * theta.sin()];
                    assert!(l2_distance(&cand, &xp) >= dist_got - 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_budget_returns_input_exactly() {
        let model = small_cnn(3);
        let x0 = random_x(32, 4);
        let cfg = AttackConfig::for_epsilon(0.0);
        let r = pgd_untargeted(&model, &x0, 0, &cfg).unwrap();
        assert_eq!(r.x_adv, x0);
        assert_eq!(r.iters_used, 0);
        let out = model.forward(&as_row(&x0)).unwrap();
        assert_eq!(r.success, argmax(out.logits.row(0)) != 0);
    }

    #[test]
    fn single_large_step_on_linear_model_matches_closed_form() {
        for seed in 0..10 {
            let model = linear_model(6, 4, seed);
            let x0 = random_x(6, seed + 100);
            let y = 1usize;
            let eps = 0.3;
            let cfg = AttackConfig {
                epsilon: eps,
                step_size: 1e6,
                max_iters: 1,
                tol: 1e-5,
                random_start: None,
            };
            let r = pgd_untargeted(&model, &x0, y, &cfg).unwrap();
            let target = one_hot(&[y], 4);
            let g = model.grads(&as_row(&x0), &target).unwrap().input;
            let gn = g.data().iter().map(|v| v * v).sum::<f64>().sqrt();
            for i in 0..6 {
                let want = x0[i] + eps * g.data()[i] / gn;
                assert!((r.x_adv[i] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn attack_results_satisfy_ball_constraint() {
        let model = small_cnn(5);
        let x0 = random_x(32, 6);
        for eps in [0.01, 0.1, 1.0] {
            let cfg = AttackConfig::for_epsilon(eps);
            let r = pgd_untargeted(&model, &x0, 1, &cfg).unwrap();
            assert!(within_budget(&r, &x0, eps));
            assert_eq!(r.objective_trace.len(), r.iters_used);
        }
    }

    #[test]
    fn attacks_are_deterministic() {
        let model = small_cnn(8);
        let x0 = random_x(32, 9);
        let cfg = AttackConfig::for_epsilon(0.2);
        let a = pgd_untargeted(&model, &x0, 2, &cfg).unwrap();
        let b = pgd_untargeted(&model, &x0, 2, &cfg).unwrap();
        assert_eq!(a, b);
        let svm = random_svm(8, 3, 10);
        let a = attack_htrd(&model, &svm, &x0, 1, &cfg).unwrap();
        let b = attack_htrd(&model, &svm, &x0, 1, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn htrd_objective_examples() {
        // two empty machines with hand-set biases stand in for s = (s_y, s_j)
        let machine = |b: f64| BinarySvm { support_vectors: alloc::vec![], duals: alloc::vec![], bias: b };
        let model = linear_model(4, 2, 11);
        let mut svm = SvmModel {
            machines: alloc::vec![machine(1.0), machine(-1.0)],
            gamma: 0.01,
            c: 1.0,
            threshold: 0.0,
            dim: model.feature_dim().unwrap(),
        };
        let x = random_x(4, 12);
        assert!((htrd_objective(&model, &svm, &x, 0).unwrap() - 2.0).abs() < 1e-15);
        svm.machines[1].bias = 1.0;
        assert!(htrd_objective(&model, &svm, &x, 0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn htrd_objective_matches_scalar_recomputation() {
        let model = small_cnn(13);
        let svm = random_svm(8, 3, 14);
        let x = random_x(32, 15);
        let psi = htrd_objective(&model, &svm, &x, 1).unwrap();
        // scalar oracle straight from the kernel expansion
        let z = model.features(&as_row(&x)).unwrap().row(0).to_vec();
        let mut scores = alloc::vec![0.0; 3];
        for (k, m) in svm.machines.iter().enumerate() {
            let mut s = m.bias;
            for (sv, dual) in m.support_vectors.iter().zip(&m.duals) {
                let d2: f64 = sv.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
                s += dual * (-svm.gamma * d2).exp();
            }
            scores[k] = s;
        }
        let want = scores[1] - scores[0].max(scores[2]);
        assert!((psi - want).abs() < 1e-10);
    }

    #[test]
    fn svm_gradient_vanishes_at_the_support_vector() {
        let svm = SvmModel {
            machines: alloc::vec![BinarySvm {
                support_vectors: alloc::vec![alloc::vec![0.4, -0.3]],
                duals: alloc::vec![1.0],
                bias: 0.0,
            }],
            gamma: 0.01,
            c: 1.0,
            threshold: 0.0,
            dim: 2,
        };
        let g = svm_input_gradient(&svm, 0, &[0.4, -0.3]);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn svm_gradient_single_support_vector_value() {
        // ζ − ζ_i = (1, 0): first entry −2γ·e^{−γ}
        let svm = SvmModel {
            machines: alloc::vec![BinarySvm {
                support_vectors: alloc::vec![alloc::vec![0.0, 0.0]],
                duals: alloc::vec![1.0],
                bias: 0.0,
            }],
            gamma: 0.01,
            c: 1.0,
            threshold: 0.0,
            dim: 2,
        };
        let g = svm_input_gradient(&svm, 0, &[1.0, 0.0]);
        let want = -2.0 * 0.01 * (-0.01f64).exp();
        assert!((g[0] - want).abs() < 1e-12, "{} vs {want}", g[0]);
        assert!((g[0] + 0.019801).abs() < 1e-6);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn svm_gradient_matches_finite_differences_of_scores() {
        let svm = random_svm(5, 4, 20);
        let z = random_x(5, 21);
        let h = 1e-5;
        for k in 0..4 {
            let g = svm_input_gradient(&svm, k, &z);
            for i in 0..5 {
                let mut zp = z.clone();
                zp[i] += h;
                let mut zm = z.clone();
                zm[i] -= h;
                let fd = (machine_score(&svm.machines[k], svm.gamma, &zp)
                    - machine_score(&svm.machines[k], svm.gamma, &zm))
                    / (2.0 * h);
                assert!((g[i] - fd).abs() < 1e-6, "machine {k} dim {i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn htrd_zero_budget_reports_current_state() {
        let model = small_cnn(22);
        let svm = random_svm(8, 3, 23);
        let x0 = random_x(32, 24);
        let cfg = AttackConfig::for_epsilon(0.0);
        let r = attack_htrd(&model, &svm, &x0, 0, &cfg).unwrap();
        assert_eq!(r.x_adv, x0);
        let (_, scores) = htrd_scores(&model, &svm, &x0).unwrap();
        assert_eq!(r.success, escaped(&scores, 0, svm.threshold));
    }

    #[test]
    fn htrd_trace_is_non_increasing_for_small_enough_steps() {
        let model = small_cnn(25);
        let svm = random_svm(8, 3, 26);
        let x0 = random_x(32, 27);
        let mut cfg = AttackConfig::for_epsilon(0.5);
        // descent property holds once ξ is small enough; halve on violation
        'outer: for _ in 0..8 {
            let r = attack_htrd(&model, &svm, &x0, 0, &cfg).unwrap();
            let mut prev = f64::INFINITY;
            for &v in &r.objective_trace {
                if v > prev + cfg.tol {
                    cfg.step_size *= 0.5;
                    continue 'outer;
                }
                prev = v;
            }
            assert!(within_budget(&r, &x0, cfg.epsilon));
            return;
        }
        panic!("trace still increasing after repeated step halving");
    }

    #[test]
    fn twofold_returns_immediately_when_already_successful() {
        let model = small_cnn(28);
        let x0 = random_x(32, 29);
        let out = model.forward(&as_row(&x0)).unwrap();
        let wrong = argmax(out.logits.row(0));
        // pick a label the model does not predict, so x0 is already
        // misclassified; with an infinite threshold the detector never flags
        let y = (wrong + 1) % 3;
        let mut rng = stream(30, "ae", 0);
        let ae = Autoencoder {
            model: crate::reject::ae_arch(16, &mut rng).unwrap(),
            mse_threshold: f64::INFINITY,
        };
        let cfg = AttackConfig::for_epsilon(0.3);
        let r = attack_twofold(&model, &ae, &x0, y, &cfg, f64::INFINITY).unwrap();
        assert_eq!(r.x_adv, x0);
        assert_eq!(r.iters_used, 0);
        assert!(r.success);
    }

    #[test]
    fn twofold_stays_in_ball_and_success_is_verifiable() {
        let model = small_cnn(31);
        let mut rng = stream(32, "ae", 0);
        let ae = Autoencoder {
            model: crate::reject::ae_arch(16, &mut rng).unwrap(),
            mse_threshold: f64::INFINITY,
        };
        let x0 = random_x(32, 33);
        let out = model.forward(&as_row(&x0)).unwrap();
        let y = argmax(out.logits.row(0));
        let threshold = crate::reject::ae_mse(&ae.model, &x0).unwrap() * 1.5;
        let cfg = AttackConfig::for_epsilon(0.8);
        let r = attack_twofold(&model, &ae, &x0, y, &cfg, threshold).unwrap();
        assert!(within_budget(&r, &x0, cfg.epsilon));
        if r.success {
            // independent recheck with fresh forward passes
            let logits = model.forward(&as_row(&r.x_adv)).unwrap().logits;
            assert_ne!(argmax(logits.row(0)), y);
            assert!(crate::reject::ae_mse(&ae.model, &r.x_adv).unwrap() < threshold);
        }
    }

    #[test]
    fn random_start_stays_in_ball_and_is_deterministic() {
        let model = small_cnn(34);
        let x0 = random_x(32, 35);
        let mut cfg = AttackConfig::for_epsilon(0.2);
        cfg.random_start = Some(77);
        let a = pgd_untargeted(&model, &x0, 0, &cfg).unwrap();
        let b = pgd_untargeted(&model, &x0, 0, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(within_budget(&a, &x0, cfg.epsilon));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let model = small_cnn(36);
        let x0 = random_x(32, 37);
        let mut cfg = AttackConfig::for_epsilon(0.1);
        cfg.step_size = 0.0;
        assert!(matches!(
            pgd_untargeted(&model, &x0, 0, &cfg),
            Err(AttackError::BadConfig(_))
        ));
        let cfg = AttackConfig::for_epsilon(-1.0);
        assert!(matches!(
            pgd_untargeted(&model, &x0, 0, &cfg),
            Err(AttackError::BadConfig(_))
        ));
        assert!(matches!(
            pgd_untargeted(&model, &x0, 99, &AttackConfig::for_epsilon(0.1)),
            Err(AttackError::BadLabel { .. })
        ));
    }
}
