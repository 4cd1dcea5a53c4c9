//! Binary checkpoint formats: `MGD1` datasets, `MGM1` models, `MGS1` SVMs.
//!
//! All multi-byte values are little-endian. Each format opens with a
//! four-byte magic whose last byte is the version digit, so a wrong digit
//! is reported as a version mismatch rather than generic corruption.
//!
//! Dataset SNR tags are stored in centi-dB (`i16`); values on that grid
//! round-trip exactly. Model and SVM parameters are stored as `f32`
//! (support-vector duals as `f64`), so saving is idempotent: re-saving a
//! loaded checkpoint reproduces the bytes.

use std::fs;
use std::path::Path;

use modguard_core::nn::{Conv2, Dense, Layer, Model};
use modguard_core::reject::{BinarySvm, SvmModel};
use modguard_core::signal::{Dataset, IQFrame, Modulation, Record, Split};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("format version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: &'static str, found: String },
    #[error("truncated payload while reading {0}")]
    Truncated(&'static str),
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: u16, classes: u32 },
    #[error("class name is not valid UTF-8")]
    BadClassName,
    #[error("unknown modulation name: {0}")]
    UnknownClass(String),
    #[error("SNR {0} dB does not fit the centi-dB field")]
    UnencodableSnr(f64),
    #[error("unknown layer tag {0}")]
    BadLayerTag(u8),
    #[error("inconsistent record: {0}")]
    Inconsistent(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const SPLIT_TEST_BIT: u8 = 0x01;
const ADVERSARIAL_BIT: u8 = 0x80;

// -------------------------------------------------------------------------
// little cursor over a byte slice with truncation-aware reads
// -------------------------------------------------------------------------

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        if self.pos + n > self.buf.len() {
            return Err(FormatError::Truncated(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, FormatError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn i16(&mut self, what: &'static str) -> Result<i16, FormatError> {
        Ok(i16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &'static str) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn check_magic(cur: &mut Cursor, expected: &'static [u8; 4]) -> Result<(), FormatError> {
    let expected_str = std::str::from_utf8(expected).unwrap();
    let got = match cur.take(4, "magic") {
        Ok(g) => g,
        Err(_) => return Err(FormatError::MalformedHeader("file shorter than magic")),
    };
    if got == expected {
        return Ok(());
    }
    if got[..3] == expected[..3] {
        return Err(FormatError::VersionMismatch {
            expected: expected_str,
            found: String::from_utf8_lossy(got).into_owned(),
        });
    }
    Err(FormatError::MalformedHeader("bad magic"))
}

// -------------------------------------------------------------------------
// MGD1 — datasets
// -------------------------------------------------------------------------

pub fn encode_dataset(d: &Dataset) -> Result<Vec<u8>, FormatError> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MGD1");
    let k = d.classes.len() as u32;
    let n_snr = d.snr_levels().len() as u32;
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&n_snr.to_le_bytes());
    out.extend_from_slice(&(d.records.len() as u32).to_le_bytes());
    out.extend_from_slice(&(d.frame_len as u32).to_le_bytes());
    for c in &d.classes {
        let name = c.name().as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
    }
    for r in &d.records {
        let label = d
            .class_id(r.frame.label)
            .ok_or(FormatError::Inconsistent("frame label missing from class table"))?
            as u16;
        let centi = r.frame.snr_db * 100.0;
        if !centi.is_finite() || centi.round() < f64::from(i16::MIN) || centi.round() > f64::from(i16::MAX)
        {
            return Err(FormatError::UnencodableSnr(r.frame.snr_db));
        }
        if r.frame.samples.len() != 2 * d.frame_len {
            return Err(FormatError::Inconsistent("frame length differs from header"));
        }
        out.extend_from_slice(&label.to_le_bytes());
        out.extend_from_slice(&(centi.round() as i16).to_le_bytes());
        let mut flags = 0u8;
        if r.split == Split::Test {
            flags |= SPLIT_TEST_BIT;
        }
        if r.adversarial {
            flags |= ADVERSARIAL_BIT;
        }
        out.push(flags);
        for v in &r.frame.samples {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset, FormatError> {
    let mut cur = Cursor::new(bytes);
    check_magic(&mut cur, b"MGD1")?;
    let k = cur.u32("class count")?;
    let _n_snr = cur.u32("snr count")?;
    let frames = cur.u32("frame count")?;
    let n = cur.u32("frame length")? as usize;
    let mut classes = Vec::with_capacity(k as usize);
    for _ in 0..k {
        let len = cur.u16("class name length")? as usize;
        let raw = cur.take(len, "class name")?;
        let name = std::str::from_utf8(raw).map_err(|_| FormatError::BadClassName)?;
        classes.push(
            Modulation::from_name(name)
                .map_err(|_| FormatError::UnknownClass(name.to_string()))?,
        );
    }
    let mut records = Vec::with_capacity(frames as usize);
    for _ in 0..frames {
        let label = cur.u16("record label")?;
        if u32::from(label) >= k {
            return Err(FormatError::BadLabel { label, classes: k });
        }
        let centi = cur.i16("record snr")?;
        let flags = cur.u8("record split")?;
        let mut samples = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            samples.push(cur.f32("record samples")?);
        }
        records.push(Record {
            frame: IQFrame {
                samples,
                label: classes[label as usize],
                snr_db: f64::from(centi) / 100.0,
            },
            split: if flags & SPLIT_TEST_BIT != 0 { Split::Test } else { Split::Train },
            adversarial: flags & ADVERSARIAL_BIT != 0,
        });
    }
    if !cur.done() {
        return Err(FormatError::Inconsistent("trailing bytes after last record"));
    }
    Ok(Dataset { classes, frame_len: n, records })
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<(), FormatError> {
    Ok(fs::write(path, encode_dataset(d)?)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, FormatError> {
    decode_dataset(&fs::read(path)?)
}

// -------------------------------------------------------------------------
// MGM1 — model checkpoints
// -------------------------------------------------------------------------

const TAG_CONV2: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_FLATTEN: u8 = 3;
const TAG_DENSE: u8 = 4;

pub fn encode_model(m: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MGM1");
    out.extend_from_slice(&(m.layers.len() as u32).to_le_bytes());
    let feature_plus1 = m.feature_layer.map_or(0, |f| f as u32 + 1);
    out.extend_from_slice(&feature_plus1.to_le_bytes());
    let (c, h, w) = m.input_shape;
    for dim in [c, h, w] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for layer in &m.layers {
        match layer {
            Layer::Conv2(cv) => {
                out.push(TAG_CONV2);
                for dim in [cv.out_ch, cv.in_ch, cv.kh, cv.kw] {
                    out.extend_from_slice(&(dim as u32).to_le_bytes());
                }
            }
            Layer::Relu => out.push(TAG_RELU),
            Layer::Flatten => out.push(TAG_FLATTEN),
            Layer::Dense(d) => {
                out.push(TAG_DENSE);
                for dim in [d.in_dim, d.out_dim] {
                    out.extend_from_slice(&(dim as u32).to_le_bytes());
                }
            }
        }
    }
    for layer in &m.layers {
        let (weight, bias) = match layer {
            Layer::Conv2(cv) => (&cv.weight, &cv.bias),
            Layer::Dense(d) => (&d.weight, &d.bias),
            _ => continue,
        };
        for v in weight.iter().chain(bias) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<Model, FormatError> {
    let mut cur = Cursor::new(bytes);
    check_magic(&mut cur, b"MGM1")?;
    let n_layers = cur.u32("layer count")? as usize;
    let feature_plus1 = cur.u32("feature index")?;
    let c = cur.u32("input channels")? as usize;
    let h = cur.u32("input height")? as usize;
    let w = cur.u32("input width")? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let tag = cur.u8("layer tag")?;
        layers.push(match tag {
            TAG_CONV2 => {
                let out_ch = cur.u32("conv out_ch")? as usize;
                let in_ch = cur.u32("conv in_ch")? as usize;
                let kh = cur.u32("conv kh")? as usize;
                let kw = cur.u32("conv kw")? as usize;
                Layer::Conv2(Conv2 {
                    out_ch,
                    in_ch,
                    kh,
                    kw,
                    weight: vec![0.0; out_ch * in_ch * kh * kw],
                    bias: vec![0.0; out_ch],
                })
            }
            TAG_RELU => Layer::Relu,
            TAG_FLATTEN => Layer::Flatten,
            TAG_DENSE => {
                let in_dim = cur.u32("dense in_dim")? as usize;
                let out_dim = cur.u32("dense out_dim")? as usize;
                Layer::Dense(Dense {
                    in_dim,
                    out_dim,
                    weight: vec![0.0; in_dim * out_dim],
                    bias: vec![0.0; out_dim],
                })
            }
            other => return Err(FormatError::BadLayerTag(other)),
        });
    }
    for layer in &mut layers {
        let (weight, bias) = match layer {
            Layer::Conv2(cv) => (&mut cv.weight, &mut cv.bias),
            Layer::Dense(d) => (&mut d.weight, &mut d.bias),
            _ => continue,
        };
        for v in weight.iter_mut().chain(bias.iter_mut()) {
            *v = f64::from(cur.f32("model parameters")?);
        }
    }
    if !cur.done() {
        return Err(FormatError::Inconsistent("trailing bytes after parameters"));
    }
    let feature_layer = if feature_plus1 == 0 { None } else { Some(feature_plus1 as usize - 1) };
    Ok(Model { layers, input_shape: (c, h, w), feature_layer })
}

pub fn save_model(m: &Model, path: &Path) -> Result<(), FormatError> {
    Ok(fs::write(path, encode_model(m))?)
}

pub fn load_model(path: &Path) -> Result<Model, FormatError> {
    decode_model(&fs::read(path)?)
}

// -------------------------------------------------------------------------
// MGS1 — SVM checkpoints
// -------------------------------------------------------------------------

pub fn encode_svm(svm: &SvmModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MGS1");
    out.extend_from_slice(&(svm.machines.len() as u32).to_le_bytes());
    out.extend_from_slice(&(svm.dim as u32).to_le_bytes());
    out.extend_from_slice(&svm.gamma.to_le_bytes());
    out.extend_from_slice(&svm.c.to_le_bytes());
    out.extend_from_slice(&svm.threshold.to_le_bytes());
    for m in &svm.machines {
        out.extend_from_slice(&(m.support_vectors.len() as u32).to_le_bytes());
        out.extend_from_slice(&m.bias.to_le_bytes());
        for d in &m.duals {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for sv in &m.support_vectors {
            for v in sv {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_svm(bytes: &[u8]) -> Result<SvmModel, FormatError> {
    let mut cur = Cursor::new(bytes);
    check_magic(&mut cur, b"MGS1")?;
    let k = cur.u32("machine count")? as usize;
    let dim = cur.u32("feature dim")? as usize;
    let gamma = cur.f64("gamma")?;
    let c = cur.f64("C")?;
    let threshold = cur.f64("threshold")?;
    let mut machines = Vec::with_capacity(k);
    for _ in 0..k {
        let n_sv = cur.u32("support vector count")? as usize;
        let bias = cur.f64("bias")?;
        let mut duals = Vec::with_capacity(n_sv);
        for _ in 0..n_sv {
            duals.push(cur.f64("duals")?);
        }
        let mut support_vectors = Vec::with_capacity(n_sv);
        for _ in 0..n_sv {
            let mut sv = Vec::with_capacity(dim);
            for _ in 0..dim {
                sv.push(f64::from(cur.f32("support vectors")?));
            }
            support_vectors.push(sv);
        }
        machines.push(BinarySvm { support_vectors, duals, bias });
    }
    if !cur.done() {
        return Err(FormatError::Inconsistent("trailing bytes after machines"));
    }
    Ok(SvmModel { machines, gamma, c, threshold, dim })
}

pub fn save_svm(svm: &SvmModel, path: &Path) -> Result<(), FormatError> {
    Ok(fs::write(path, encode_svm(svm))?)
}

pub fn load_svm(path: &Path) -> Result<SvmModel, FormatError> {
    decode_svm(&fs::read(path)?)
}
