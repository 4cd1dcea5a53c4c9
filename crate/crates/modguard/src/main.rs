//! `modguard` — generate synthetic modulation datasets, train defended
//! classifiers, calibrate rejection heads, run white-box attacks, and
//! reproduce the full security-evaluation pipeline from one config file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use modguard::config::ExperimentConfig;
use modguard::csvio;
use modguard::io;
use modguard::pipeline::{self, Method};
use modguard::svg;
use modguard_core::attack::{attack_htrd, attack_twofold, pgd_untargeted, AttackConfig};
use modguard_core::eval::Dut;
use modguard_core::reject::Autoencoder;
use modguard_core::signal::{Dataset, IQFrame, Record, Split};

#[derive(Parser)]
#[command(name = "modguard", version, about = "Adversarial robustness experiments for modulation classification", long_about = None)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                ExperimentConfig::from_toml(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled synthetic IQ dataset (MGD1) plus a metadata CSV.
    GenData {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output dataset path.
        #[arg(long, default_value = "dataset.mgd")]
        out: PathBuf,
    },
    /// Train a classifier and write an MGM1 checkpoint plus a JSONL log.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Training method: standard | at | cat | lsgna.
        #[arg(long)]
        method: String,
        /// Input dataset (MGD1).
        #[arg(long)]
        data: PathBuf,
        /// Output checkpoint path.
        #[arg(long, default_value = "model.mgm")]
        out: PathBuf,
    },
    /// Train and calibrate a run-time detector: the RBF-SVM rejection head
    /// (kind=svm, needs --model) or the autoencoder (kind=ae).
    Calibrate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Detector kind: svm | ae.
        #[arg(long, default_value = "svm")]
        kind: String,
        /// Base classifier checkpoint (required for kind=svm).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Input dataset (MGD1).
        #[arg(long)]
        data: PathBuf,
        /// Target benign rejection rate.
        #[arg(long)]
        reject_rate: Option<f64>,
        /// Output path (.mgs for svm, .mgm for ae).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run white-box attacks and export adversarial frames (MGD1 with the
    /// adversarial provenance flag) plus a JSON summary.
    Attack {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Defense under attack: none | htrd | twofold.
        #[arg(long, default_value = "none")]
        defense: String,
        /// Classifier checkpoint.
        #[arg(long)]
        model: PathBuf,
        /// SVM checkpoint (defense=htrd).
        #[arg(long)]
        svm: Option<PathBuf>,
        /// Autoencoder checkpoint (defense=twofold).
        #[arg(long)]
        ae_model: Option<PathBuf>,
        /// Autoencoder flag threshold; read from the checkpoint sidecar when
        /// omitted.
        #[arg(long)]
        ae_threshold: Option<f64>,
        /// Input dataset (MGD1); test-split frames at --snr-db are attacked.
        #[arg(long)]
        data: PathBuf,
        /// PNR grid in dB.
        #[arg(long, value_delimiter = ',', required = true)]
        pnr_db: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
        /// PGD iteration cap.
        #[arg(long)]
        iters: Option<usize>,
        /// Step size as a fraction of ε.
        #[arg(long)]
        step: Option<f64>,
        /// Convergence tolerance t.
        #[arg(long)]
        tol: Option<f64>,
        /// Cap on attacked frames per PNR point.
        #[arg(long)]
        n_frames: Option<usize>,
        /// Output adversarial dataset path.
        #[arg(long, default_value = "adversarial.mgd")]
        out: PathBuf,
        /// Print a machine-readable summary to stdout.
        #[arg(long)]
        json: bool,
    },
    /// Evaluate one defense variant into a security-curve CSV.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Variant: undefended | cat_dnn | lsgna_dnn | htrd | lsgna_nr | twofold.
        #[arg(long)]
        variant: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        svm: Option<PathBuf>,
        #[arg(long)]
        ae_model: Option<PathBuf>,
        #[arg(long)]
        ae_threshold: Option<f64>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "curves.csv")]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Render CSV artifacts to SVG plots.
    Viz {
        /// Security-curve CSV to plot.
        #[arg(long)]
        curves: Option<PathBuf>,
        /// PCA CSV to plot.
        #[arg(long)]
        pca: Option<PathBuf>,
        /// Class names for the PCA legend, comma-separated.
        #[arg(long, value_delimiter = ',')]
        class_names: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline (datasets, four trainings, calibration,
    /// curves, PCA, plots) from one config.
    Repro {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory; falls back to $MODGUARD_OUT, then ./modguard-out.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker cap for attack evaluation.
        #[arg(long)]
        threads: Option<usize>,
        /// Write the built-in default config to this path and exit.
        #[arg(long)]
        emit_default_config: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn default_out_dir() -> PathBuf {
    std::env::var_os("MODGUARD_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("modguard-out"))
}

fn ensure_written(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.exists() {
            bail!("declared artifact was not produced: {}", p.display());
        }
    }
    Ok(())
}

fn load_ae(model_path: &Path, threshold: Option<f64>) -> Result<Autoencoder> {
    let model = io::load_model(model_path)?;
    let mse_threshold = match threshold {
        Some(t) => t,
        None => {
            let sidecar = model_path.with_extension("mgm.meta.json");
            let text = fs::read_to_string(&sidecar).with_context(|| {
                format!(
                    "no --ae-threshold given and no sidecar at {}",
                    sidecar.display()
                )
            })?;
            let doc: serde_json::Value = serde_json::from_str(&text)?;
            doc.get("mse_threshold")
                .and_then(|v| v.as_f64())
                .context("sidecar missing mse_threshold")?
        }
    };
    Ok(Autoencoder { model, mse_threshold })
}

fn cmd_gen_data(cfg: &ConfigArgs, out: &Path) -> Result<()> {
    let cfg = cfg.load()?;
    let dataset = modguard_core::signal::gen_dataset(&pipeline::gen_config(&cfg)?)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    io::save_dataset(&dataset, out)?;
    let meta = pipeline::artifact_meta(&cfg);
    let metadata_csv = out.with_extension("metadata.csv");
    csvio::write_dataset_metadata(&metadata_csv, &dataset, &meta)?;
    ensure_written(&[out, &metadata_csv])?;
    eprintln!(
        "wrote {} ({} frames, {} classes) and {}",
        out.display(),
        dataset.records.len(),
        dataset.num_classes(),
        metadata_csv.display()
    );
    Ok(())
}

fn cmd_train(cfg_args: &ConfigArgs, method: &str, data: &Path, out: &Path) -> Result<()> {
    let cfg = cfg_args.load()?;
    let dataset = io::load_dataset(data)?;
    let method = Method::parse(method)?;
    let (trained, _) = pipeline::run_training(&dataset, &cfg, method)?;
    io::save_model(&trained.model, out)?;
    let meta = pipeline::artifact_meta(&cfg);
    let log_path = out.with_extension("train.jsonl");
    csvio::write_train_log(&log_path, &trained.log, &meta)?;
    ensure_written(&[out, &log_path])?;
    let last = trained.log.last().context("empty training log")?;
    eprintln!(
        "wrote {} (final loss {:.4}, mean eps {:.4}) and {}",
        out.display(),
        last.loss,
        last.mean_eps,
        log_path.display()
    );
    Ok(())
}

fn cmd_calibrate(
    cfg_args: &ConfigArgs,
    kind: &str,
    model: Option<&Path>,
    data: &Path,
    reject_rate: Option<f64>,
    out: &Path,
) -> Result<()> {
    let mut cfg = cfg_args.load()?;
    if let Some(rate) = reject_rate {
        cfg.svm.reject_rate = rate;
        cfg.ae.reject_rate = rate;
    }
    let dataset = io::load_dataset(data)?;
    let meta = pipeline::artifact_meta(&cfg);
    match kind {
        "svm" => {
            let model_path = model.context("--model is required for --kind svm")?;
            let model = io::load_model(model_path)?;
            let svm = pipeline::build_svm(&model, &dataset, &cfg)?;
            io::save_svm(&svm, out)?;
            ensure_written(&[out])?;
            eprintln!(
                "wrote {} (S0 = {:.6}, gamma = {}, C = {})",
                out.display(),
                svm.threshold,
                svm.gamma,
                svm.c
            );
        }
        "ae" => {
            let ae = pipeline::build_ae(&dataset, &cfg)?;
            io::save_model(&ae.model, out)?;
            let sidecar = out.with_extension("mgm.meta.json");
            let doc = serde_json::json!({
                "tool": "modguard",
                "kind": "autoencoder",
                "config_hash": meta.config_hash,
                "seed": meta.seed,
                "mse_threshold": ae.mse_threshold,
            });
            fs::write(&sidecar, format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
            ensure_written(&[out, &sidecar])?;
            eprintln!("wrote {} (mse threshold {:.6})", out.display(), ae.mse_threshold);
        }
        other => bail!("unknown detector kind {other:?} (expected svm|ae)"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_attack(
    cfg_args: &ConfigArgs,
    defense: &str,
    model_path: &Path,
    svm_path: Option<&Path>,
    ae_model: Option<&Path>,
    ae_threshold: Option<f64>,
    data: &Path,
    pnr_db: &[f64],
    snr_db: f64,
    iters: Option<usize>,
    step: Option<f64>,
    tol: Option<f64>,
    n_frames: Option<usize>,
    out: &Path,
    json: bool,
) -> Result<()> {
    let mut cfg = cfg_args.load()?;
    if let Some(v) = iters {
        cfg.attack.iters = v;
    }
    if let Some(v) = step {
        cfg.attack.step_frac = v;
    }
    if let Some(v) = tol {
        cfg.attack.tol = v;
    }
    let dataset = io::load_dataset(data)?;
    let model = io::load_model(model_path)?;
    let svm = svm_path.map(io::load_svm).transpose()?;
    let ae = match defense {
        "twofold" => Some(load_ae(
            ae_model.context("--ae-model is required for --defense twofold")?,
            ae_threshold,
        )?),
        _ => None,
    };
    if defense == "htrd" && svm.is_none() {
        bail!("--svm is required for --defense htrd");
    }
    let items = pipeline::eval_items(&dataset, snr_db)?;
    let cap = n_frames.unwrap_or(items.len()).min(items.len());
    let items = &items[..cap];
    let mut adversarial_records = Vec::new();
    let mut summary = Vec::new();
    for &pnr in pnr_db {
        let mut successes = 0usize;
        for item in items {
            let x0 = item.frame.samples_f64();
            let eps =
                modguard_core::signal::epsilon_from_pnr(item.frame, pnr, snr_db).epsilon;
            let mut acfg = AttackConfig::for_epsilon(eps);
            acfg.max_iters = cfg.attack.iters;
            acfg.step_size = if eps > 0.0 { cfg.attack.step_frac * eps } else { 1e-3 };
            acfg.tol = cfg.attack.tol;
            let result = match defense {
                "none" => pgd_untargeted(&model, &x0, item.class_id, &acfg),
                "htrd" => attack_htrd(&model, svm.as_ref().unwrap(), &x0, item.class_id, &acfg),
                "twofold" => {
                    let ae = ae.as_ref().unwrap();
                    attack_twofold(&model, ae, &x0, item.class_id, &acfg, ae.mse_threshold)
                }
                other => bail!("unknown defense {other:?} (expected none|htrd|twofold)"),
            }
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            if result.success {
                successes += 1;
            }
            adversarial_records.push(Record {
                frame: IQFrame {
                    samples: result.x_adv.iter().map(|&v| v as f32).collect(),
                    label: item.frame.label,
                    snr_db: item.frame.snr_db,
                },
                split: Split::Test,
                adversarial: true,
            });
        }
        summary.push(serde_json::json!({
            "pnr_db": pnr,
            "n": items.len(),
            "attack_success_rate": successes as f64 / items.len() as f64,
        }));
    }
    let adv = Dataset {
        classes: dataset.classes.clone(),
        frame_len: dataset.frame_len,
        records: adversarial_records,
    };
    io::save_dataset(&adv, out)?;
    ensure_written(&[out])?;
    let doc = serde_json::json!({
        "defense": defense,
        "snr_db": snr_db,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "points": summary,
        "adversarial_dataset": out.display().to_string(),
    });
    if json {
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        eprintln!("{}", serde_json::to_string(&doc)?);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    cfg_args: &ConfigArgs,
    variant: &str,
    model_path: &Path,
    svm_path: Option<&Path>,
    ae_model: Option<&Path>,
    ae_threshold: Option<f64>,
    data: &Path,
    out: &Path,
    json: bool,
) -> Result<()> {
    let cfg = cfg_args.load()?;
    let dataset = io::load_dataset(data)?;
    let model = io::load_model(model_path)?;
    let svm = svm_path.map(io::load_svm).transpose()?;
    let ae = ae_model.map(|p| load_ae(p, ae_threshold)).transpose()?;
    let dut = match variant {
        "undefended" => Dut::Undefended { model: &model },
        "cat_dnn" => Dut::CatDnn { model: &model },
        "lsgna_dnn" => Dut::LsgnaDnn { model: &model },
        "htrd" => Dut::Htrd {
            model: &model,
            svm: svm.as_ref().context("--svm is required for variant htrd")?,
        },
        "lsgna_nr" => Dut::LsgnaNr {
            model: &model,
            svm: svm.as_ref().context("--svm is required for variant lsgna_nr")?,
        },
        "twofold" => Dut::Twofold {
            model: &model,
            ae: ae.as_ref().context("--ae-model is required for variant twofold")?,
        },
        other => bail!("unknown variant {other:?}"),
    };
    let all_items = pipeline::eval_items(&dataset, cfg.eval.snr_db)?;
    if all_items.len() < cfg.eval.n_frames {
        bail!("need {} frames at SNR {}, found {}", cfg.eval.n_frames, cfg.eval.snr_db, all_items.len());
    }
    let attacked = &all_items[..cfg.eval.n_frames];
    let curve = pipeline::build_curve(&dut, &all_items, attacked, &cfg)?;
    let rows = csvio::curves_to_rows(std::slice::from_ref(&curve));
    let meta = pipeline::artifact_meta(&cfg);
    csvio::write_curves(out, &rows, &meta)?;
    ensure_written(&[out])?;
    let doc = serde_json::json!({
        "variant": variant,
        "curve": rows.iter().map(|r| serde_json::json!({
            // JSON has no -inf; the clean point serializes as a string
            "pnr_db": if r.pnr_db.is_finite() {
                serde_json::json!(r.pnr_db)
            } else {
                serde_json::json!("clean")
            },
            "n": r.n, "accuracy": r.accuracy,
        })).collect::<Vec<_>>(),
        "out": out.display().to_string(),
    });
    if json {
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        eprintln!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_viz(
    curves: Option<&Path>,
    pca: Option<&Path>,
    class_names: &[String],
    out: &Path,
) -> Result<()> {
    match (curves, pca) {
        (Some(path), None) => {
            let rows = csvio::read_curves(path)?;
            fs::write(out, svg::curves_svg(&rows))?;
        }
        (None, Some(path)) => {
            let rows = csvio::read_pca(path)?;
            let names: Vec<String> = if class_names.is_empty() {
                modguard_core::signal::Modulation::ALL
                    .iter()
                    .map(|m| m.name().to_string())
                    .collect()
            } else {
                class_names.to_vec()
            };
            fs::write(out, svg::pca_svg(&rows, &names))?;
        }
        _ => bail!("pass exactly one of --curves or --pca"),
    }
    ensure_written(&[out])?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn cmd_repro(
    cfg_args: &ConfigArgs,
    out_dir: Option<&Path>,
    threads: Option<usize>,
    emit_default_config: Option<&Path>,
    json: bool,
) -> Result<()> {
    if let Some(path) = emit_default_config {
        fs::write(path, ExperimentConfig::default().to_toml())?;
        eprintln!("wrote default config to {}", path.display());
        return Ok(());
    }
    let mut cfg = cfg_args.load()?;
    if let Some(t) = threads {
        cfg.threads = t;
    }
    let out_dir = out_dir.map(Path::to_path_buf).unwrap_or_else(default_out_dir);
    let summary = pipeline::run_repro(&cfg, &out_dir)?;
    let doc = serde_json::json!({
        "out_dir": out_dir.display().to_string(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "clean_accuracy": {
            "undefended": summary.clean_undefended,
            "cat_without_nr": summary.clean_cat_plain,
            "htrd_with_nr": summary.clean_htrd,
        },
        "separation": { "cat": summary.separation_cat, "lsgna": summary.separation_lsgna },
        "artifacts": summary.artifacts.len(),
    });
    if json {
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        eprintln!("{}", serde_json::to_string_pretty(&doc)?);
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::GenData { cfg, out } => cmd_gen_data(cfg, out),
        Cmd::Train { cfg, method, data, out } => cmd_train(cfg, method, data, out),
        Cmd::Calibrate { cfg, kind, model, data, reject_rate, out } => {
            cmd_calibrate(cfg, kind, model.as_deref(), data, *reject_rate, out)
        }
        Cmd::Attack {
            cfg,
            defense,
            model,
            svm,
            ae_model,
            ae_threshold,
            data,
            pnr_db,
            snr_db,
            iters,
            step,
            tol,
            n_frames,
            out,
            json,
        } => cmd_attack(
            cfg,
            defense,
            model,
            svm.as_deref(),
            ae_model.as_deref(),
            *ae_threshold,
            data,
            pnr_db,
            *snr_db,
            *iters,
            *step,
            *tol,
            *n_frames,
            out,
            *json,
        ),
        Cmd::Eval { cfg, variant, model, svm, ae_model, ae_threshold, data, out, json } => {
            cmd_eval(
                cfg,
                variant,
                model,
                svm.as_deref(),
                ae_model.as_deref(),
                *ae_threshold,
                data,
                out,
                *json,
            )
        }
        Cmd::Viz { curves, pca, class_names, out } => {
            cmd_viz(curves.as_deref(), pca.as_deref(), class_names, out)
        }
        Cmd::Repro { cfg, out_dir, threads, emit_default_config, json } => cmd_repro(
            cfg,
            out_dir.as_deref(),
            *threads,
            emit_default_config.as_deref(),
            *json,
        ),
    }
}
