//! Security-evaluation harness: accuracy-vs-PNR curves per defense, PCA
//! projections of the feature layer, and class-separation scores.
//!
//! Accuracy follows the evaluation protocol of classification with
//! rejection: a clean frame counts only when it is correctly classified
//! *and* not rejected, while an attacked frame counts when it is rejected
//! *or* still correctly classified. Counts are exact integers; curves are
//! independent of frame order.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use core::fmt;

// When std is in the test graph, float math binds to inherent methods
// and this trait import goes quiet; no_std builds need it.
#[allow(unused_imports)]
use num_traits::Float;

use crate::attack::{attack_htrd, attack_twofold, pgd_untargeted, AttackConfig, AttackError};
use crate::nn::{argmax, Model, NnError};
use crate::reject::{classify_with_rejection, Autoencoder, Decision, RejectError, SvmModel};
use crate::signal::{epsilon_from_pnr, IQFrame};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    EmptyTestSet,
    SingleClass,
    TooFewSamples { got: usize, need: usize },
    BadDims { dims: usize, feature_dim: usize },
    Attack(AttackError),
    Nn(NnError),
    Reject(RejectError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptyTestSet => write!(f, "empty test set"),
            EvalError::SingleClass => write!(f, "need at least two classes"),
            EvalError::TooFewSamples { got, need } => {
                write!(f, "need more than {need} samples, got {got}")
            }
            EvalError::BadDims { dims, feature_dim } => {
                write!(f, "cannot project {feature_dim}-dim features onto {dims} components")
            }
            EvalError::Attack(e) => write!(f, "{e}"),
            EvalError::Nn(e) => write!(f, "{e}"),
            EvalError::Reject(e) => write!(f, "{e}"),
        }
    }
}

impl From<AttackError> for EvalError {
    fn from(e: AttackError) -> Self {
        EvalError::Attack(e)
    }
}

impl From<NnError> for EvalError {
    fn from(e: NnError) -> Self {
        EvalError::Nn(e)
    }
}

impl From<RejectError> for EvalError {
    fn from(e: RejectError) -> Self {
        EvalError::Reject(e)
    }
}

/// A defense system under evaluation; the variant fixes both the decision
/// rule and the white-box attack used against it.
#[derive(Clone, Copy)]
pub enum Dut<'a> {
    Undefended { model: &'a Model },
    CatDnn { model: &'a Model },
    LsgnaDnn { model: &'a Model },
    Htrd { model: &'a Model, svm: &'a SvmModel },
    LsgnaNr { model: &'a Model, svm: &'a SvmModel },
    Twofold { model: &'a Model, ae: &'a Autoencoder },
}

impl<'a> Dut<'a> {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Dut::Undefended { .. } => "undefended",
            Dut::CatDnn { .. } => "cat_dnn",
            Dut::LsgnaDnn { .. } => "lsgna_dnn",
            Dut::Htrd { .. } => "htrd",
            Dut::LsgnaNr { .. } => "lsgna_nr",
            Dut::Twofold { .. } => "twofold",
        }
    }
}

/// One frame with its class id resolved against the dataset class table.
#[derive(Clone, Copy)]
pub struct EvalItem<'a> {
    pub frame: &'a IQFrame,
    pub class_id: usize,
}

/// Attack hyperparameters shared across a curve; the per-frame budget comes
/// from the PNR/SNR formula and the step size scales with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackProtocol {
    pub max_iters: usize,
    pub step_frac: f64,
    pub tol: f64,
}

impl Default for AttackProtocol {
    fn default() -> Self {
        Self { max_iters: 50, step_frac: 0.1, tol: 1e-5 }
    }
}

impl AttackProtocol {
    pub fn config_for(&self, epsilon: f64) -> AttackConfig {
        AttackConfig {
            epsilon,
            step_size: if epsilon > 0.0 { self.step_frac * epsilon } else { 1e-3 },
            max_iters: self.max_iters,
            tol: self.tol,
            random_start: None,
        }
    }
}

fn as_row(x: &[f64]) -> Tensor {
    Tensor::new(vec![1, x.len()], x.to_vec()).expect("volume by construction")
}

/// `(correct, rejected)` under the variant's decision rule at input `x`.
fn decide(dut: &Dut, x: &[f64], y: usize) -> Result<(bool, bool), EvalError> {
    match dut {
        Dut::Undefended { model } | Dut::CatDnn { model } | Dut::LsgnaDnn { model } => {
            let out = model.forward(&as_row(x))?;
            Ok((argmax(out.logits.row(0)) == y, false))
        }
        Dut::Htrd { model, svm } | Dut::LsgnaNr { model, svm } => {
            let features = model.features(&as_row(x))?;
            let d = classify_with_rejection(svm, features.row(0))?;
            match d.outcome {
                Decision::Reject => Ok((false, true)),
                Decision::Class(c) => Ok((c == y, false)),
            }
        }
        Dut::Twofold { model, ae } => {
            let det = crate::reject::ae_detect(ae, x)?;
            if det.flagged {
                return Ok((false, true));
            }
            let out = model.forward(&as_row(x))?;
            Ok((argmax(out.logits.row(0)) == y, false))
        }
    }
}

/// Evaluate one frame at one grid point. `pnr_db = −∞` is the clean point:
/// the frame counts when correctly classified and not rejected. At finite
/// PNR the variant's white-box attack runs at the frame's budget and the
/// frame counts when rejected or still correctly classified.
pub fn evaluate_frame(
    dut: &Dut,
    item: &EvalItem,
    pnr_db: f64,
    snr_db: f64,
    proto: &AttackProtocol,
) -> Result<bool, EvalError> {
    let x0 = item.frame.samples_f64();
    let y = item.class_id;
    if pnr_db == f64::NEG_INFINITY {
        let (correct, rejected) = decide(dut, &x0, y)?;
        return Ok(correct && !rejected);
    }
    let budget = epsilon_from_pnr(item.frame, pnr_db, snr_db);
    let cfg = proto.config_for(budget.epsilon);
    let x_adv = match dut {
        Dut::Undefended { model } | Dut::CatDnn { model } | Dut::LsgnaDnn { model } => {
            pgd_untargeted(model, &x0, y, &cfg)?.x_adv
        }
        Dut::Htrd { model, svm } | Dut::LsgnaNr { model, svm } => {
            attack_htrd(model, svm, &x0, y, &cfg)?.x_adv
        }
        Dut::Twofold { model, ae } => {
            attack_twofold(model, ae, &x0, y, &cfg, ae.mse_threshold)?.x_adv
        }
    };
    let (correct, rejected) = decide(dut, &x_adv, y)?;
    Ok(correct || rejected)
}

/// One point of a security curve, with exact integer counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnrPoint {
    pub pnr_db: f64,
    pub successes: usize,
    pub n_samples: usize,
}

impl PnrPoint {
    pub fn accuracy(&self) -> f64 {
        self.successes as f64 / self.n_samples as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityCurve {
    pub variant: String,
    pub snr_db: f64,
    pub points: Vec<PnrPoint>,
}

pub fn evaluate_point(
    dut: &Dut,
    items: &[EvalItem],
    pnr_db: f64,
    snr_db: f64,
    proto: &AttackProtocol,
) -> Result<PnrPoint, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let mut successes = 0usize;
    for item in items {
        if evaluate_frame(dut, item, pnr_db, snr_db, proto)? {
            successes += 1;
        }
    }
    Ok(PnrPoint { pnr_db, successes, n_samples: items.len() })
}

pub fn security_curve(
    dut: &Dut,
    items: &[EvalItem],
    pnr_grid_db: &[f64],
    snr_db: f64,
    proto: &AttackProtocol,
) -> Result<SecurityCurve, EvalError> {
    let mut points = Vec::with_capacity(pnr_grid_db.len());
    for &pnr in pnr_grid_db {
        points.push(evaluate_point(dut, items, pnr, snr_db, proto)?);
    }
    Ok(SecurityCurve { variant: String::from(dut.variant_name()), snr_db, points })
}

/// Feature rows for a set of frames, batched through the model.
pub fn feature_rows(model: &Model, frames: &[&IQFrame]) -> Result<Vec<Vec<f64>>, EvalError> {
    let mut rows = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(64) {
        let d = 2 * chunk[0].n();
        let mut data = Vec::with_capacity(chunk.len() * d);
        for f in chunk {
            data.extend(f.samples_f64());
        }
        let x = Tensor::new(vec![chunk.len(), d], data).map_err(NnError::from)?;
        let feats = model.features(&x)?;
        let width = feats.len() / chunk.len();
        for b in 0..chunk.len() {
            rows.push(feats.data()[b * width..(b + 1) * width].to_vec());
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    /// N×dims coordinates in the principal basis.
    pub coords: Vec<Vec<f64>>,
    /// Explained-variance fractions for the kept components, non-increasing.
    pub explained: Vec<f64>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues (descending) and the matching eigenvectors as rows.
fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[p * n + k];
                    let vkq = v[q * n + k];
                    v[p * n + k] = c * vkp - s * vkq;
                    v[q * n + k] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let eigvals: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut eigvecs = vec![0.0; n * n];
    for (row, &i) in order.iter().enumerate() {
        // deterministic sign: largest-magnitude entry positive
        let mut pivot = 0usize;
        for k in 1..n {
            if v[i * n + k].abs() > v[i * n + pivot].abs() {
                pivot = k;
            }
        }
        let sign = if v[i * n + pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            eigvecs[row * n + k] = sign * v[i * n + k];
        }
    }
    (eigvals, eigvecs)
}

/// Project feature rows onto the top `dims` principal axes of their sample
/// covariance (divisor N−1). Rank-deficient directions (eigenvalues at
/// numerical zero) project to exactly zero coordinates.
pub fn pca_project(features: &[Vec<f64>], dims: usize) -> Result<PcaProjection, EvalError> {
    let n = features.len();
    if n <= dims {
        return Err(EvalError::TooFewSamples { got: n, need: dims });
    }
    let f = features[0].len();
    if dims == 0 || dims > f {
        return Err(EvalError::BadDims { dims, feature_dim: f });
    }
    let mut mean = vec![0.0; f];
    for row in features {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; f * f];
    for row in features {
        for i in 0..f {
            let di = row[i] - mean[i];
            for j in i..f {
                cov[i * f + j] += di * (row[j] - mean[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..f {
        for j in i..f {
            let v = cov[i * f + j] / denom;
            cov[i * f + j] = v;
            cov[j * f + i] = v;
        }
    }
    let (eigvals, eigvecs) = jacobi_eigen(cov, f);
    let eigvals: Vec<f64> = eigvals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = eigvals.iter().sum();
    let lead = eigvals[0];
    let explained: Vec<f64> = eigvals
        .iter()
        .take(dims)
        .map(|&v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    let mut coords = Vec::with_capacity(n);
    for row in features {
        let mut out = vec![0.0; dims];
        for (d, slot) in out.iter_mut().enumerate() {
            if eigvals[d] <= lead * 1e-12 {
                *slot = 0.0; // zero-pad rank-deficient trailing components
                continue;
            }
            let axis = &eigvecs[d * f..(d + 1) * f];
            *slot = row
                .iter()
                .zip(axis)
                .zip(&mean)
                .map(|((x, a), m)| (x - m) * a)
                .sum();
        }
        coords.push(out);
    }
    Ok(PcaProjection { coords, explained })
}

/// Mean pairwise inter-class centroid distance over mean intra-class
/// standard deviation; zero when all centroids coincide.
pub fn separation_score(features: &[Vec<f64>], labels: &[usize]) -> Result<f64, EvalError> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(EvalError::EmptyTestSet);
    }
    let f = features[0].len();
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut counts = vec![0usize; k];
    let mut centroids = vec![vec![0.0; f]; k];
    for (row, &y) in features.iter().zip(labels) {
        counts[y] += 1;
        for (c, v) in centroids[y].iter_mut().zip(row) {
            *c += v;
        }
    }
    let present: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(EvalError::SingleClass);
    }
    for &c in &present {
        for v in &mut centroids[c] {
            *v /= counts[c] as f64;
        }
    }
    let mut spread_sum = 0.0;
    let mut sq_dev = vec![0.0; k];
    for (row, &y) in features.iter().zip(labels) {
        let d2: f64 = row
            .iter()
            .zip(&centroids[y])
            .map(|(v, c)| (v - c) * (v - c))
            .sum();
        sq_dev[y] += d2;
    }
    for &c in &present {
        spread_sum += (sq_dev[c] / counts[c] as f64).sqrt();
    }
    let intra = spread_sum / present.len() as f64;
    let mut inter_sum = 0.0;
    let mut pairs = 0usize;
    for (a, &ca) in present.iter().enumerate() {
        for &cb in present.iter().skip(a + 1) {
            let d2: f64 = centroids[ca]
                .iter()
                .zip(&centroids[cb])
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            inter_sum += d2.sqrt();
            pairs += 1;
        }
    }
    let inter = inter_sum / pairs as f64;
    if inter == 0.0 {
        return Ok(0.0);
    }
    if intra == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(inter / intra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;
    use crate::reject::BinarySvm;
    use crate::rng::{shuffle, stream};
    use crate::signal::Modulation;
    use rand::Rng;

    fn small_model(seed: u64) -> Model {
        let mut rng = stream(seed, "eval-model", 0);
        Model::build(
            (1, 2, 16),
            &[
                LayerSpec::Flatten,
                LayerSpec::Dense { out_dim: 8 },
                LayerSpec::Relu,
                LayerSpec::Dense { out_dim: 3 },
            ],
            Some(2),
            &mut rng,
        )
        .unwrap()
    }

    fn frames(n_frames: usize, seed: u64) -> Vec<IQFrame> {
        let mut rng = stream(seed, "eval-frames", 0);
        (0..n_frames)
            .map(|_| IQFrame {
                samples: (0..32).map(|_| rng.random_range(-0.2..0.2f32)).collect(),
                label: Modulation::Bpsk,
                snr_db: 10.0,
            })
            .collect()
    }

    fn reject_all_svm(dim: usize) -> SvmModel {
        let machine = BinarySvm { support_vectors: vec![], duals: vec![], bias: 0.0 };
        SvmModel {
            machines: vec![machine.clone(), machine.clone(), machine],
            gamma: 0.01,
            c: 1.0,
            threshold: f64::INFINITY,
            dim,
        }
    }

    #[test]
    fn oracle_rejector_is_perfect_under_attack_and_useless_clean() {
        let model = small_model(1);
        let svm = reject_all_svm(8);
        let dut = Dut::Htrd { model: &model, svm: &svm };
        let fs = frames(10, 2);
        let items: Vec<EvalItem> =
            fs.iter().map(|f| EvalItem { frame: f, class_id: 0 }).collect();
        let proto = AttackProtocol { max_iters: 5, ..AttackProtocol::default() };
        let attacked = evaluate_point(&dut, &items, -10.0, 10.0, &proto).unwrap();
        assert_eq!(attacked.successes, items.len());
        assert!((attacked.accuracy() - 1.0).abs() < 1e-15);
        let clean = evaluate_point(&dut, &items, f64::NEG_INFINITY, 10.0, &proto).unwrap();
        assert_eq!(clean.successes, 0);
    }

    #[test]
    fn clean_point_equals_plain_accuracy_for_undefended() {
        let model = small_model(3);
        let dut = Dut::Undefended { model: &model };
        let fs = frames(20, 4);
        let items: Vec<EvalItem> =
            fs.iter().map(|f| EvalItem { frame: f, class_id: 1 }).collect();
        let proto = AttackProtocol::default();
        let clean = evaluate_point(&dut, &items, f64::NEG_INFINITY, 10.0, &proto).unwrap();
        let mut want = 0usize;
        for item in &items {
            let x = item.frame.samples_f64();
            let out = model.forward(&as_row(&x)).unwrap();
            if argmax(out.logits.row(0)) == 1 {
                want += 1;
            }
        }
        assert_eq!(clean.successes, want);
    }

    #[test]
    fn evaluation_is_order_independent() {
        let model = small_model(5);
        let dut = Dut::Undefended { model: &model };
        let fs = frames(12, 6);
        let mut items: Vec<EvalItem> =
            fs.iter().map(|f| EvalItem { frame: f, class_id: 0 }).collect();
        let proto = AttackProtocol { max_iters: 5, ..AttackProtocol::default() };
        let a = evaluate_point(&dut, &items, -10.0, 10.0, &proto).unwrap();
        let mut order: Vec<usize> = (0..items.len()).collect();
        shuffle(&mut order, &mut stream(7, "perm", 0));
        let shuffled: Vec<EvalItem> = order.iter().map(|&i| items[i]).collect();
        items.clear();
        let b = evaluate_point(&dut, &shuffled, -10.0, 10.0, &proto).unwrap();
        assert_eq!(a.successes, b.successes);
    }

    #[test]
    fn single_point_curve_matches_evaluate_point() {
        let model = small_model(8);
        let dut = Dut::Undefended { model: &model };
        let fs = frames(6, 9);
        let items: Vec<EvalItem> =
            fs.iter().map(|f| EvalItem { frame: f, class_id: 2 }).collect();
        let proto = AttackProtocol { max_iters: 3, ..AttackProtocol::default() };
        let curve = security_curve(&dut, &items, &[-15.0], 10.0, &proto).unwrap();
        let point = evaluate_point(&dut, &items, -15.0, 10.0, &proto).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert_eq!(curve.points[0], point);
        assert_eq!(curve.variant, "undefended");
    }

    #[test]
    fn pca_line_captures_all_variance() {
        let mut rng = stream(10, "pca", 0);
        let dir: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let features: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let t: f64 = rng.random_range(-2.0..2.0);
                dir.iter().map(|v| v * t + 0.5).collect()
            })
            .collect();
        let p = pca_project(&features, 2).unwrap();
        assert!((p.explained[0] - 1.0).abs() < 1e-9);
        assert!(p.explained[1].abs() < 1e-9);
        // second component zero-padded on rank-1 data
        assert!(p.coords.iter().all(|c| c[1] == 0.0));
    }

    #[test]
    fn pca_projection_has_zero_column_means() {
        let mut rng = stream(11, "pca", 0);
        let features: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let p = pca_project(&features, 3).unwrap();
        for d in 0..3 {
            let mean: f64 = p.coords.iter().map(|c| c[d]).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-10, "component {d} mean {mean}");
        }
        // fractions non-increasing and summing below one
        assert!(p.explained[0] >= p.explained[1] && p.explained[1] >= p.explained[2]);
        assert!(p.explained.iter().sum::<f64>() <= 1.0 + 1e-9);
    }

    #[test]
    fn pca_reconstruction_error_matches_eigenvalue_tail() {
        let mut rng = stream(12, "pca", 0);
        let f = 6;
        let n = 80;
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        // full decomposition via dims = f
        let full = pca_project(&features, f).unwrap();
        let total_var: f64 = {
            let mut mean = vec![0.0; f];
            for row in &features {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v / n as f64;
                }
            }
            features
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(&mean)
                        .map(|(v, m)| (v - m) * (v - m))
                        .sum::<f64>()
                })
                .sum::<f64>()
                / (n - 1) as f64
        };
        let k = 3;
        // residual energy per the eigenvalue identity:
        // Σ‖x − P_k x‖²/(N−1) = Σ_{j>k} λ_j = (1 − Σ_{j≤k} fraction)·trace
        let residual: f64 = features
            .iter()
            .enumerate()
            .map(|(i, _)| {
                full.coords[i][k..].iter().map(|v| v * v).sum::<f64>()
            })
            .sum::<f64>()
            / (n - 1) as f64;
        let tail = (1.0 - full.explained[..k].iter().sum::<f64>()) * total_var;
        assert!((residual - tail).abs() < 1e-8, "{residual} vs {tail}");
    }

    #[test]
    fn separation_examples() {
        // identical points: zero separation
        let features = vec![vec![1.0, 2.0]; 10];
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        assert_eq!(separation_score(&features, &labels).unwrap(), 0.0);

        // two unit-variance 1-D clusters centered 10 apart
        let mut rng = stream(13, "sep", 0);
        let mut feats = Vec::new();
        let mut labs = Vec::new();
        for _ in 0..4000 {
            let g: f64 = rng.sample(rand_distr::StandardNormal);
            feats.push(vec![g]);
            labs.push(0);
            let g: f64 = rng.sample(rand_distr::StandardNormal);
            feats.push(vec![10.0 + g]);
            labs.push(1);
        }
        let score = separation_score(&feats, &labs).unwrap();
        assert!((score - 10.0).abs() < 0.5, "score {score}");
    }

    #[test]
    fn separation_rejects_single_class() {
        let features = vec![vec![0.0]; 4];
        let labels = vec![0usize; 4];
        assert!(matches!(
            separation_score(&features, &labels),
            Err(EvalError::SingleClass)
        ));
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let model = small_model(14);
        let dut = Dut::Undefended { model: &model };
        let proto = AttackProtocol::default();
        assert!(matches!(
            evaluate_point(&dut, &[], -10.0, 10.0, &proto),
            Err(EvalError::EmptyTestSet)
        ));
    }
}
