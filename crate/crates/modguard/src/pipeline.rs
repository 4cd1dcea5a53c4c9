//! End-to-end experiment orchestration.
//!
//! `run_repro` chains dataset generation, the four training procedures,
//! SVM/autoencoder calibration, white-box attack evaluation, and the PCA
//! exports from a single config, writing every artifact (with config-hash
//! metadata) under one output directory. Binary checkpoints are written
//! and re-loaded before use, so the repro path exercises exactly the same
//! files a chain of individual subcommands would.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use modguard_core::eval::{
    evaluate_frame, feature_rows, pca_project, separation_score, AttackProtocol, Dut, EvalItem,
    PnrPoint, SecurityCurve,
};
use modguard_core::nn::Model;
use modguard_core::reject::{
    ae_train, calibrate_ae_threshold, calibrate_threshold, classify_with_rejection, svm_train,
    AeTrainConfig, Autoencoder, Decision, SvmModel,
};
use modguard_core::signal::{
    epsilon_from_pnr, gen_dataset, signal_power, Dataset, GenConfig, IQFrame, Split,
};
use modguard_core::train::{
    cat_train, ls_gna_train, train_adversarial, train_standard, CatState, InnerPgd, TrainConfig,
    TrainOutput,
};

use crate::config::ExperimentConfig;
use crate::csvio::{
    curves_to_rows, write_curves, write_dataset_metadata, write_pca, write_train_log,
    ArtifactMeta, CurveRow, PcaRow,
};
use crate::io;
use crate::parallel::par_map;
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Standard,
    At,
    Cat,
    Lsgna,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "standard" => Method::Standard,
            "at" => Method::At,
            "cat" => Method::Cat,
            "lsgna" => Method::Lsgna,
            other => bail!("unknown training method {other:?} (expected standard|at|cat|lsgna)"),
        })
    }
}

/// All trained components of one experiment.
pub struct Defenses {
    pub standard: Model,
    pub cat: Model,
    pub lsgna: Model,
    pub at: Model,
    pub cat_svm: SvmModel,
    pub lsgna_svm: SvmModel,
    pub ae: Autoencoder,
    pub at_eps: f64,
}

/// Everything the caller (CLI or acceptance suite) needs after a repro run.
pub struct ReproSummary {
    pub dataset: Dataset,
    pub defenses: Defenses,
    pub curve_rows: Vec<CurveRow>,
    pub clean_undefended: f64,
    pub clean_cat_plain: f64,
    pub clean_htrd: f64,
    pub separation_cat: f64,
    pub separation_lsgna: f64,
    pub benign_reject_htrd: f64,
    pub benign_flag_ae: f64,
    pub artifacts: Vec<PathBuf>,
}

pub fn artifact_meta(cfg: &ExperimentConfig) -> ArtifactMeta {
    ArtifactMeta { config_hash: cfg.hash(), seed: cfg.seed }
}

fn write_meta_sidecar(
    path: &Path,
    meta: &ArtifactMeta,
    kind: &str,
    extra: serde_json::Value,
) -> Result<PathBuf> {
    let sidecar = path.with_extension(format!(
        "{}.meta.json",
        path.extension().and_then(|e| e.to_str()).unwrap_or("bin")
    ));
    let mut doc = serde_json::json!({
        "tool": "modguard",
        "kind": kind,
        "config_hash": meta.config_hash,
        "seed": meta.seed,
    });
    if let (Some(obj), Some(extra)) = (doc.as_object_mut(), extra.as_object()) {
        for (k, v) in extra {
            obj.insert(k.clone(), v.clone());
        }
    }
    fs::write(&sidecar, format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
    Ok(sidecar)
}

pub fn gen_config(cfg: &ExperimentConfig) -> Result<GenConfig> {
    Ok(GenConfig {
        classes: cfg.resolve_classes().map_err(|e| anyhow::anyhow!("{e}"))?,
        snr_grid_db: cfg.dataset.snr_grid_db.clone(),
        frames_per_cell: cfg.dataset.frames_per_cell,
        frame_len: cfg.dataset.frame_len,
        split_ratio: cfg.dataset.split_ratio,
        seed: cfg.seed,
    })
}

pub fn train_config(cfg: &ExperimentConfig) -> TrainConfig {
    TrainConfig {
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        lr: cfg.train.lr,
        momentum: cfg.train.momentum,
        inner_pgd: InnerPgd { steps: cfg.train.inner_steps, step_frac: cfg.train.inner_step_frac },
        seed: cfg.seed,
    }
}

/// Median clean-frame l2 norm of the train split, halved: the default ε cap
/// for adaptive training.
pub fn derived_cat_eps_max(d: &Dataset) -> f64 {
    let mut norms: Vec<f64> = d.train().map(|r| signal_power(&r.frame).sqrt()).collect();
    norms.sort_by(|a, b| a.total_cmp(b));
    0.5 * norms[norms.len() / 2]
}

/// 0.05 × the RMS amplitude of clean train-split samples: the default
/// noise-augmentation σ.
pub fn derived_lsgna_sigma(d: &Dataset) -> f64 {
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for r in d.train() {
        sum_sq += signal_power(&r.frame);
        count += r.frame.samples.len();
    }
    0.05 * (sum_sq / count as f64).sqrt()
}

/// Median per-frame budget over the train split at the configured PNR: the
/// fixed radius for plain adversarial training.
pub fn derived_at_eps(d: &Dataset, pnr_db: f64) -> f64 {
    let mut eps: Vec<f64> = d
        .train()
        .map(|r| epsilon_from_pnr(&r.frame, pnr_db, r.frame.snr_db).epsilon)
        .collect();
    eps.sort_by(|a, b| a.total_cmp(b));
    eps[eps.len() / 2]
}

/// Train one model per the method's recipe. Returns the training output and
/// the final adaptive state when the method keeps one.
pub fn run_training(
    d: &Dataset,
    cfg: &ExperimentConfig,
    method: Method,
) -> Result<(TrainOutput, Option<CatState>)> {
    let mut tc = train_config(cfg);
    match method {
        Method::Standard => Ok((train_standard(d, &tc).map_err(wrap)?, None)),
        Method::At => {
            if let Some(epochs) = cfg.at.epochs {
                tc.epochs = epochs;
            }
            let eps = derived_at_eps(d, cfg.at.pnr_db);
            Ok((train_adversarial(d, &tc, eps).map_err(wrap)?, None))
        }
        Method::Lsgna => {
            let sigma = cfg.lsgna.sigma.unwrap_or_else(|| derived_lsgna_sigma(d));
            Ok((ls_gna_train(d, &tc, sigma, cfg.lsgna.alpha).map_err(wrap)?, None))
        }
        Method::Cat => {
            if let Some(epochs) = cfg.cat.epochs {
                tc.epochs = epochs;
            }
            if let Some(lr) = cfg.cat.lr {
                tc.lr = lr;
            }
            let eps_max = cfg.cat.eps_max.unwrap_or_else(|| derived_cat_eps_max(d));
            let state =
                CatState::new(d.train().count(), cfg.cat.eta, cfg.cat.c, eps_max).map_err(wrap)?;
            let (out, state) = cat_train(d, &tc, state).map_err(wrap)?;
            Ok((out, Some(state)))
        }
    }
}

fn wrap<E: std::fmt::Display>(e: E) -> anyhow::Error {
    anyhow::anyhow!("{e}")
}

/// Feature rows of the given split through the model's feature layer.
pub fn split_features(
    model: &Model,
    d: &Dataset,
    split: Split,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut frames: Vec<&IQFrame> = Vec::new();
    let mut labels = Vec::new();
    for r in d.split_records(split) {
        frames.push(&r.frame);
        labels.push(
            d.class_id(r.frame.label)
                .context("frame label missing from class table")?,
        );
    }
    let feats = feature_rows(model, &frames).map_err(wrap)?;
    Ok((feats, labels))
}

/// The SVM's training features: train-split feature rows, stratified to at
/// most `max_train_per_class` per class in dataset order.
pub fn svm_training_set(
    model: &Model,
    d: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let (feats, labels) = split_features(model, d, Split::Train)?;
    let cap = cfg.svm.max_train_per_class.max(1);
    let mut taken = vec![0usize; d.num_classes()];
    let mut out_feats = Vec::new();
    let mut out_labels = Vec::new();
    for (f, &l) in feats.iter().zip(&labels) {
        if taken[l] < cap {
            taken[l] += 1;
            out_feats.push(f.clone());
            out_labels.push(l);
        }
    }
    Ok((out_feats, out_labels))
}

/// Train the one-vs-all rejection head on (subsampled) train-split features
/// and calibrate its threshold on test-split benign features.
pub fn build_svm(model: &Model, d: &Dataset, cfg: &ExperimentConfig) -> Result<SvmModel> {
    let (train_feats, train_labels) = svm_training_set(model, d, cfg)?;
    let mut svm = svm_train(
        &train_feats,
        &train_labels,
        d.num_classes(),
        cfg.svm.gamma,
        cfg.svm.c,
    )
    .map_err(wrap)?;
    let (benign_feats, _) = split_features(model, d, Split::Test)?;
    svm.threshold = calibrate_threshold(&svm, &benign_feats, cfg.svm.reject_rate).map_err(wrap)?;
    Ok(svm)
}

/// Train the reconstruction detector on benign train frames and calibrate
/// its flag threshold on test-split benign frames.
pub fn build_ae(d: &Dataset, cfg: &ExperimentConfig) -> Result<Autoencoder> {
    let ae_cfg = AeTrainConfig {
        epochs: cfg.ae.epochs,
        batch_size: cfg.ae.batch_size,
        lr: cfg.ae.lr,
        momentum: cfg.ae.momentum,
        seed: cfg.seed,
    };
    let mut ae = ae_train(d, &ae_cfg).map_err(wrap)?;
    let benign: Vec<Vec<f64>> = d.test().map(|r| r.frame.samples_f64()).collect();
    ae.mse_threshold =
        calibrate_ae_threshold(&ae.model, &benign, cfg.ae.reject_rate).map_err(wrap)?;
    Ok(ae)
}

/// Test-split frames at the evaluation SNR, with resolved class ids.
pub fn eval_items<'a>(d: &'a Dataset, snr_db: f64) -> Result<Vec<EvalItem<'a>>> {
    let mut items = Vec::new();
    for r in d.test() {
        if r.frame.snr_db == snr_db {
            items.push(EvalItem {
                frame: &r.frame,
                class_id: d
                    .class_id(r.frame.label)
                    .context("frame label missing from class table")?,
            });
        }
    }
    if items.is_empty() {
        bail!("no test frames at SNR {snr_db} dB");
    }
    Ok(items)
}

/// Evaluate one grid point with per-frame parallelism; counts are integers
/// and independent of worker count.
pub fn evaluate_point_parallel(
    dut: &Dut,
    items: &[EvalItem],
    pnr_db: f64,
    snr_db: f64,
    proto: &AttackProtocol,
    threads: usize,
) -> Result<PnrPoint> {
    if items.is_empty() {
        bail!("empty evaluation set");
    }
    let outcomes = par_map(items, threads, |item| {
        evaluate_frame(dut, item, pnr_db, snr_db, proto).map_err(|e| e.to_string())
    });
    let mut successes = 0usize;
    for o in outcomes {
        if o.map_err(anyhow::Error::msg)? {
            successes += 1;
        }
    }
    Ok(PnrPoint { pnr_db, successes, n_samples: items.len() })
}

/// Full curve for one defense: the clean point over the whole filtered test
/// split, then every attacked grid point over the first `n_frames` items.
pub fn build_curve(
    dut: &Dut,
    all_items: &[EvalItem],
    attacked_items: &[EvalItem],
    cfg: &ExperimentConfig,
) -> Result<SecurityCurve> {
    let proto = AttackProtocol {
        max_iters: cfg.attack.iters,
        step_frac: cfg.attack.step_frac,
        tol: cfg.attack.tol,
    };
    let snr = cfg.eval.snr_db;
    let mut points = vec![evaluate_point_parallel(
        dut,
        all_items,
        f64::NEG_INFINITY,
        snr,
        &proto,
        cfg.threads,
    )?];
    for &pnr in &cfg.eval.pnr_grid_db {
        points.push(evaluate_point_parallel(dut, attacked_items, pnr, snr, &proto, cfg.threads)?);
    }
    Ok(SecurityCurve { variant: dut.variant_name().to_string(), snr_db: snr, points })
}

fn benign_rejection_rate(model: &Model, svm: &SvmModel, items: &[EvalItem]) -> Result<f64> {
    let frames: Vec<&IQFrame> = items.iter().map(|i| i.frame).collect();
    let feats = feature_rows(model, &frames).map_err(wrap)?;
    let mut rejected = 0usize;
    for z in &feats {
        if classify_with_rejection(svm, z).map_err(wrap)?.outcome == Decision::Reject {
            rejected += 1;
        }
    }
    Ok(rejected as f64 / items.len() as f64)
}

#[derive(Serialize)]
struct SummaryDoc {
    config_hash: String,
    seed: u64,
    clean_accuracy: BTreeMap<&'static str, f64>,
    separation: BTreeMap<&'static str, f64>,
    benign_rejection: BTreeMap<&'static str, f64>,
    derived: BTreeMap<&'static str, f64>,
    artifacts: Vec<String>,
}

/// The full pipeline. Writes every artifact under `out_dir` and returns the
/// in-memory results for further checks.
pub fn run_repro(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ReproSummary> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let meta = artifact_meta(cfg);
    let mut artifacts: Vec<PathBuf> = Vec::new();

    // dataset
    let dataset_path = out_dir.join("dataset.mgd");
    let generated = gen_dataset(&gen_config(cfg)?).map_err(wrap)?;
    io::save_dataset(&generated, &dataset_path)?;
    artifacts.push(dataset_path.clone());
    artifacts.push(write_meta_sidecar(
        &dataset_path,
        &meta,
        "dataset",
        serde_json::json!({"frames": generated.records.len()}),
    )?);
    let metadata_path = out_dir.join("dataset_metadata.csv");
    write_dataset_metadata(&metadata_path, &generated, &meta)?;
    artifacts.push(metadata_path);
    let dataset = io::load_dataset(&dataset_path)?;

    // training, checkpointing, and reload of the four models
    let mut models: BTreeMap<&'static str, Model> = BTreeMap::new();
    let mut at_eps = 0.0;
    for (name, method) in [
        ("standard", Method::Standard),
        ("cat", Method::Cat),
        ("lsgna", Method::Lsgna),
        ("at", Method::At),
    ] {
        let (out, _state) = run_training(&dataset, cfg, method)?;
        if method == Method::At {
            at_eps = derived_at_eps(&dataset, cfg.at.pnr_db);
        }
        let model_path = out_dir.join(format!("model_{name}.mgm"));
        io::save_model(&out.model, &model_path)?;
        artifacts.push(model_path.clone());
        artifacts.push(write_meta_sidecar(
            &model_path,
            &meta,
            "model",
            serde_json::json!({"method": name}),
        )?);
        let log_path = out_dir.join(format!("train_{name}.jsonl"));
        write_train_log(&log_path, &out.log, &meta)?;
        artifacts.push(log_path);
        models.insert(name, io::load_model(&model_path)?);
    }

    // rejection heads on the CAT and LS-GNA feature layers
    let mut svms: BTreeMap<&'static str, SvmModel> = BTreeMap::new();
    for name in ["cat", "lsgna"] {
        let svm = build_svm(&models[name], &dataset, cfg)?;
        let svm_path = out_dir.join(format!("svm_{name}.mgs"));
        io::save_svm(&svm, &svm_path)?;
        artifacts.push(svm_path.clone());
        artifacts.push(write_meta_sidecar(
            &svm_path,
            &meta,
            "svm",
            serde_json::json!({"base_model": name, "threshold": svm.threshold}),
        )?);
        svms.insert(name, io::load_svm(&svm_path)?);
    }

    // autoencoder detector
    let ae = build_ae(&dataset, cfg)?;
    let ae_path = out_dir.join("ae.mgm");
    io::save_model(&ae.model, &ae_path)?;
    artifacts.push(ae_path.clone());
    artifacts.push(write_meta_sidecar(
        &ae_path,
        &meta,
        "autoencoder",
        serde_json::json!({"mse_threshold": ae.mse_threshold}),
    )?);
    let ae = Autoencoder { model: io::load_model(&ae_path)?, mse_threshold: ae.mse_threshold };

    // evaluation
    let all_items = eval_items(&dataset, cfg.eval.snr_db)?;
    if all_items.len() < cfg.eval.n_frames {
        bail!(
            "test split has {} frames at SNR {} dB, need {}",
            all_items.len(),
            cfg.eval.snr_db,
            cfg.eval.n_frames
        );
    }
    let attacked = &all_items[..cfg.eval.n_frames];
    let duts = [
        Dut::Undefended { model: &models["standard"] },
        Dut::CatDnn { model: &models["cat"] },
        Dut::LsgnaDnn { model: &models["lsgna"] },
        Dut::Htrd { model: &models["cat"], svm: &svms["cat"] },
        Dut::LsgnaNr { model: &models["lsgna"], svm: &svms["lsgna"] },
        Dut::Twofold { model: &models["at"], ae: &ae },
    ];
    let mut curves = Vec::new();
    for dut in &duts {
        curves.push(build_curve(dut, &all_items, attacked, cfg)?);
    }
    let curve_rows = curves_to_rows(&curves);
    let curves_path = out_dir.join("curves.csv");
    write_curves(&curves_path, &curve_rows, &meta)?;
    artifacts.push(curves_path.clone());

    // clean triple: undefended, defense without NR, defense with NR
    let clean_of = |variant: &str| -> f64 {
        curve_rows
            .iter()
            .find(|r| r.variant == variant && r.pnr_db == f64::NEG_INFINITY)
            .map(|r| r.accuracy)
            .unwrap_or(f64::NAN)
    };
    let clean_undefended = clean_of("undefended");
    let clean_cat_plain = clean_of("cat_dnn");
    let clean_htrd = clean_of("htrd");

    // PCA exports and separation scores on the eval-SNR test features
    let mut separation = BTreeMap::new();
    let mut pca_paths = Vec::new();
    for name in ["cat", "lsgna"] {
        let frames: Vec<&IQFrame> = all_items.iter().map(|i| i.frame).collect();
        let labels: Vec<usize> = all_items.iter().map(|i| i.class_id).collect();
        let feats = feature_rows(&models[name], &frames).map_err(wrap)?;
        let proj = pca_project(&feats, 2).map_err(wrap)?;
        let rows: Vec<PcaRow> = proj
            .coords
            .iter()
            .zip(&labels)
            .map(|(c, &l)| PcaRow { label: l, coords: c.clone() })
            .collect();
        let pca_path = out_dir.join(format!("pca_{name}.csv"));
        write_pca(&pca_path, &rows, &meta)?;
        artifacts.push(pca_path.clone());
        pca_paths.push((name, rows));
        let sep = separation_score(&feats, &labels).map_err(wrap)?;
        separation.insert(if name == "cat" { "cat" } else { "lsgna" }, sep);
    }
    let separation_cat = separation["cat"];
    let separation_lsgna = separation["lsgna"];

    // benign rejection/flag rates on the evaluation split
    let benign_reject_htrd = benign_rejection_rate(&models["cat"], &svms["cat"], &all_items)?;
    let benign_flag_ae = {
        let mut flagged = 0usize;
        for item in &all_items {
            let x = item.frame.samples_f64();
            if modguard_core::reject::ae_detect(&ae, &x).map_err(wrap)?.flagged {
                flagged += 1;
            }
        }
        flagged as f64 / all_items.len() as f64
    };

    // plots
    let curves_svg_path = out_dir.join("curves.svg");
    fs::write(&curves_svg_path, svg::curves_svg(&curve_rows))?;
    artifacts.push(curves_svg_path);
    let class_names: Vec<String> =
        dataset.classes.iter().map(|c| c.name().to_string()).collect();
    for (name, rows) in &pca_paths {
        let p = out_dir.join(format!("pca_{name}.svg"));
        fs::write(&p, svg::pca_svg(rows, &class_names))?;
        artifacts.push(p);
    }

    // summary
    let summary = SummaryDoc {
        config_hash: meta.config_hash.clone(),
        seed: cfg.seed,
        clean_accuracy: BTreeMap::from([
            ("undefended", clean_undefended),
            ("cat_without_nr", clean_cat_plain),
            ("htrd_with_nr", clean_htrd),
        ]),
        separation: BTreeMap::from([("cat", separation_cat), ("lsgna", separation_lsgna)]),
        benign_rejection: BTreeMap::from([
            ("htrd", benign_reject_htrd),
            ("ae_flag_rate", benign_flag_ae),
        ]),
        derived: BTreeMap::from([
            ("at_fixed_eps", at_eps),
            ("cat_eps_max", cfg.cat.eps_max.unwrap_or_else(|| derived_cat_eps_max(&dataset))),
            ("lsgna_sigma", cfg.lsgna.sigma.unwrap_or_else(|| derived_lsgna_sigma(&dataset))),
        ]),
        artifacts: artifacts.iter().map(|p| p.display().to_string()).collect(),
    };
    let summary_path = out_dir.join("summary.json");
    fs::write(&summary_path, format!("{}\n", serde_json::to_string_pretty(&summary)?))?;
    artifacts.push(summary_path);

    for p in &artifacts {
        if !p.exists() {
            bail!("declared artifact was not produced: {}", p.display());
        }
    }

    Ok(ReproSummary {
        dataset,
        defenses: Defenses {
            standard: models.remove("standard").unwrap(),
            cat: models.remove("cat").unwrap(),
            lsgna: models.remove("lsgna").unwrap(),
            at: models.remove("at").unwrap(),
            cat_svm: svms.remove("cat").unwrap(),
            lsgna_svm: svms.remove("lsgna").unwrap(),
            ae,
            at_eps,
        },
        curve_rows,
        clean_undefended,
        clean_cat_plain,
        clean_htrd,
        separation_cat,
        separation_lsgna,
        benign_reject_htrd,
        benign_flag_ae,
        artifacts,
    })
}
