//! Text artifacts: security-curve CSVs, PCA exports, dataset metadata, and
//! JSONL training logs.
//!
//! Every file opens with `#`-prefixed comment lines carrying the config
//! hash and seed; readers skip them. Floats are written with Rust's
//! shortest round-trip formatting, so parse(write(x)) == x, including
//! `-inf` for the clean (no-perturbation) curve point.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use modguard_core::eval::SecurityCurve;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("missing header line")]
    MissingHeader,
    #[error("unexpected header: {0}")]
    BadHeader(String),
    #[error("line {line}: expected {expected} fields, got {got}")]
    FieldCount { line: usize, expected: usize, got: usize },
    #[error("line {line}: {msg}")]
    BadField { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Comment header shared by all text artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArtifactMeta {
    pub config_hash: String,
    pub seed: u64,
}

impl ArtifactMeta {
    fn comment_block(&self, kind: &str) -> String {
        format!(
            "# modguard {kind} v1\n# config_hash={}\n# seed={}\n",
            self.config_hash, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub variant: String,
    pub pnr_db: f64,
    pub snr_db: f64,
    pub n: usize,
    pub accuracy: f64,
}

pub fn curves_to_rows(curves: &[SecurityCurve]) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for c in curves {
        for p in &c.points {
            rows.push(CurveRow {
                variant: c.variant.clone(),
                pnr_db: p.pnr_db,
                snr_db: c.snr_db,
                n: p.n_samples,
                accuracy: p.accuracy(),
            });
        }
    }
    rows
}

pub fn write_curves(path: &Path, rows: &[CurveRow], meta: &ArtifactMeta) -> Result<(), CsvError> {
    let mut out = meta.comment_block("security-curve");
    out.push_str("variant,pnr_db,snr_db,n,accuracy\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.variant, r.pnr_db, r.snr_db, r.n, r.accuracy)
            .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(s: &str, line: usize) -> Result<f64, CsvError> {
    s.parse::<f64>().map_err(|e| CsvError::BadField { line, msg: format!("{s:?}: {e}") })
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>, CsvError> {
    let text = fs::read_to_string(path)?;
    let mut lines = data_lines(&text);
    let (_, header) = lines.next().ok_or(CsvError::MissingHeader)?;
    if header != "variant,pnr_db,snr_db,n,accuracy" {
        return Err(CsvError::BadHeader(header.to_string()));
    }
    let mut rows = Vec::new();
    for (line, l) in lines {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != 5 {
            return Err(CsvError::FieldCount { line, expected: 5, got: fields.len() });
        }
        rows.push(CurveRow {
            variant: fields[0].to_string(),
            pnr_db: parse_f64(fields[1], line)?,
            snr_db: parse_f64(fields[2], line)?,
            n: fields[3]
                .parse()
                .map_err(|e| CsvError::BadField { line, msg: format!("n: {e}") })?,
            accuracy: parse_f64(fields[4], line)?,
        });
    }
    Ok(rows)
}

/// One projected feature row for the PCA scatter export.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaRow {
    pub label: usize,
    pub coords: Vec<f64>,
}

pub fn write_pca(path: &Path, rows: &[PcaRow], meta: &ArtifactMeta) -> Result<(), CsvError> {
    let dims = rows.first().map_or(2, |r| r.coords.len());
    let mut out = meta.comment_block("pca-projection");
    out.push_str("label,pc1,pc2");
    if dims > 2 {
        out.push_str(",pc3");
    }
    out.push('\n');
    for r in rows {
        let mut line = r.label.to_string();
        for c in &r.coords {
            write!(line, ",{c}").expect("string write");
        }
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_pca(path: &Path) -> Result<Vec<PcaRow>, CsvError> {
    let text = fs::read_to_string(path)?;
    let mut lines = data_lines(&text);
    let (_, header) = lines.next().ok_or(CsvError::MissingHeader)?;
    let dims = match header {
        "label,pc1,pc2" => 2,
        "label,pc1,pc2,pc3" => 3,
        other => return Err(CsvError::BadHeader(other.to_string())),
    };
    let mut rows = Vec::new();
    for (line, l) in lines {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != dims + 1 {
            return Err(CsvError::FieldCount { line, expected: dims + 1, got: fields.len() });
        }
        let label = fields[0]
            .parse()
            .map_err(|e| CsvError::BadField { line, msg: format!("label: {e}") })?;
        let mut coords = Vec::with_capacity(dims);
        for f in &fields[1..] {
            coords.push(parse_f64(f, line)?);
        }
        rows.push(PcaRow { label, coords });
    }
    Ok(rows)
}

/// Frame-metadata export for dataset inspection.
pub fn write_dataset_metadata(
    path: &Path,
    d: &modguard_core::signal::Dataset,
    meta: &ArtifactMeta,
) -> Result<(), CsvError> {
    let mut out = meta.comment_block("dataset-metadata");
    out.push_str("index,class,snr_db,split,adversarial\n");
    for (i, r) in d.records.iter().enumerate() {
        let split = match r.split {
            modguard_core::signal::Split::Train => "train",
            modguard_core::signal::Split::Test => "test",
        };
        writeln!(out, "{i},{},{},{split},{}", r.frame.label, r.frame.snr_db, r.adversarial)
            .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// JSON-lines training log: one record per epoch.
pub fn write_train_log(
    path: &Path,
    log: &[modguard_core::train::EpochLog],
    meta: &ArtifactMeta,
) -> Result<(), CsvError> {
    let mut out = String::new();
    for e in log {
        let record = serde_json::json!({
            "epoch": e.epoch,
            "loss": e.loss,
            "mean_eps": e.mean_eps,
            "config_hash": meta.config_hash,
            "seed": meta.seed,
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn curves_round_trip_including_neg_infinity() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        let rows = vec![
            CurveRow {
                variant: "htrd".into(),
                pnr_db: f64::NEG_INFINITY,
                snr_db: 10.0,
                n: 1100,
                accuracy: 0.7572727272727273,
            },
            CurveRow {
                variant: "htrd".into(),
                pnr_db: -10.0,
                snr_db: 10.0,
                n: 200,
                accuracy: 0.615,
            },
        ];
        let meta = ArtifactMeta { config_hash: "abc".into(), seed: 7 };
        write_curves(&path, &rows, &meta).unwrap();
        let back = read_curves(&path).unwrap();
        assert_eq!(back, rows);
        // writing the parsed rows again reproduces identical bytes
        let path2 = dir.path().join("curves2.csv");
        write_curves(&path2, &back, &meta).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn pca_round_trips_two_and_three_dims() {
        let dir = tempdir().unwrap();
        let meta = ArtifactMeta::default();
        for dims in [2usize, 3] {
            let path = dir.path().join(format!("pca{dims}.csv"));
            let rows: Vec<PcaRow> = (0..5)
                .map(|i| PcaRow {
                    label: i % 3,
                    coords: (0..dims).map(|d| (i * dims + d) as f64 * 0.25 - 1.0).collect(),
                })
                .collect();
            write_pca(&path, &rows, &meta).unwrap();
            assert_eq!(read_pca(&path).unwrap(), rows);
        }
    }

    #[test]
    fn comment_lines_are_skipped_and_bad_headers_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "# comment\nnot,the,header\n").unwrap();
        assert!(matches!(read_curves(&path), Err(CsvError::BadHeader(_))));
        fs::write(&path, "# only comments\n").unwrap();
        assert!(matches!(read_curves(&path), Err(CsvError::MissingHeader)));
    }
}
