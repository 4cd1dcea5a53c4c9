//! Baseband waveform synthesis for the eleven modulation classes.
//!
//! Linear modulations (PSK/QAM/PAM) map random symbols onto a unit-energy
//! constellation and shape them with a root-raised-cosine pulse at 8
//! samples per symbol. CPFSK/GFSK accumulate phase from (Gaussian-filtered)
//! NRZ bits. The analog classes modulate a random low-frequency tone
//! mixture: frequency modulation for WBFM, envelope modulation for AM-DSB,
//! and the analytic (single-sideband) form of the mixture for AM-SSB.
//!
//! Complex white Gaussian noise is added at the requested SNR (clean power
//! over injected noise power) and the whole frame is normalized to unit l2
//! norm, so attack budgets are comparable across frames.

use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;

// When std is in the test graph, float math binds to inherent methods
// and this trait import goes quiet; no_std builds need it.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{IQFrame, Modulation};

pub const SAMPLES_PER_SYMBOL: usize = 8;
pub const RRC_ROLLOFF: f64 = 0.35;
const RRC_SPAN_SYMBOLS: usize = 6;
const CPFSK_MOD_INDEX: f64 = 0.5;
const GFSK_BT: f64 = 0.35;
const GFSK_SPAN_SYMBOLS: usize = 4;
const FM_DEVIATION: f64 = 0.08; // cycles/sample peak deviation
const AM_DEPTH: f64 = 0.5;
const TONES: usize = 3;

#[derive(Debug, Clone, Copy)]
struct C64 {
    re: f64,
    im: f64,
}

impl C64 {
    const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

    fn from_polar(r: f64, theta: f64) -> Self {
        C64 { re: r * theta.cos(), im: r * theta.sin() }
    }

    fn scale(self, s: f64) -> Self {
        C64 { re: self.re * s, im: self.im * s }
    }

    fn add(self, o: C64) -> Self {
        C64 { re: self.re + o.re, im: self.im + o.im }
    }

    fn mul(self, o: C64) -> Self {
        C64 { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }

    fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Root-raised-cosine taps spanning `span` symbols at `sps` samples per
/// symbol, normalized to unit energy. Tap count is `span · sps + 1`.
pub fn rrc_taps(sps: usize, span: usize, rolloff: f64) -> Vec<f64> {
    let len = span * sps + 1;
    let half = (len - 1) as f64 / 2.0;
    let a = rolloff;
    let mut taps = Vec::with_capacity(len);
    for k in 0..len {
        let t = (k as f64 - half) / sps as f64;
        let tap = if t.abs() < 1e-12 {
            1.0 - a + 4.0 * a / PI
        } else {
            let fourat = 4.0 * a * t;
            let denom = PI * t * (1.0 - fourat * fourat);
            if denom.abs() < 1e-8 {
                // t = ±1/(4a) limit
                (a / 2f64.sqrt())
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * a)).sin()
                        + (1.0 - 2.0 / PI) * (PI / (4.0 * a)).cos())
            } else {
                ((PI * t * (1.0 - a)).sin() + fourat * (PI * t * (1.0 + a)).cos()) / denom
            }
        };
        taps.push(tap);
    }
    let energy: f64 = taps.iter().map(|v| v * v).sum();
    let scale = 1.0 / energy.sqrt();
    for v in &mut taps {
        *v *= scale;
    }
    taps
}

fn constellation(m: Modulation, rng: &mut ChaCha8Rng) -> C64 {
    match m {
        Modulation::Bpsk => {
            let s = if rng.random_range(0..2u8) == 0 { 1.0 } else { -1.0 };
            C64 { re: s, im: 0.0 }
        }
        Modulation::Qpsk => {
            let k = rng.random_range(0..4u8) as f64;
            C64::from_polar(1.0, PI / 4.0 + k * PI / 2.0)
        }
        Modulation::Psk8 => {
            let k = rng.random_range(0..8u8) as f64;
            C64::from_polar(1.0, k * PI / 4.0)
        }
        Modulation::Qam16 => {
            let levels = [-3.0, -1.0, 1.0, 3.0];
            let re = levels[rng.random_range(0..4usize)];
            let im = levels[rng.random_range(0..4usize)];
            C64 { re, im }.scale(1.0 / 10f64.sqrt())
        }
        Modulation::Qam64 => {
            let levels = [-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0];
            let re = levels[rng.random_range(0..8usize)];
            let im = levels[rng.random_range(0..8usize)];
            C64 { re, im }.scale(1.0 / 42f64.sqrt())
        }
        Modulation::Pam4 => {
            let levels = [-3.0, -1.0, 1.0, 3.0];
            let re = levels[rng.random_range(0..4usize)];
            C64 { re, im: 0.0 }.scale(1.0 / 5f64.sqrt())
        }
        _ => unreachable!("constellation only defined for linear modulations"),
    }
}

/// Pulse-shape random constellation symbols; returns `n` samples starting at
/// the first symbol peak (filter group delay discarded).
fn linear_mod(m: Modulation, n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let sps = SAMPLES_PER_SYMBOL;
    let taps = rrc_taps(sps, RRC_SPAN_SYMBOLS, RRC_ROLLOFF);
    let delay = (taps.len() - 1) / 2;
    let n_sym = (n + delay) / sps + RRC_SPAN_SYMBOLS + 1;
    let mut shaped = vec![C64::ZERO; n_sym * sps + taps.len()];
    for s in 0..n_sym {
        let sym = constellation(m, rng);
        let base = s * sps;
        for (k, &tap) in taps.iter().enumerate() {
            shaped[base + k] = shaped[base + k].add(sym.scale(tap));
        }
    }
    shaped[delay..delay + n].to_vec()
}

fn gaussian_taps(sps: usize, span: usize, bt: f64) -> Vec<f64> {
    let len = span * sps + 1;
    let half = (len - 1) as f64 / 2.0;
    let sigma = sps as f64 * (2f64.ln()).sqrt() / (2.0 * PI * bt);
    let mut taps: Vec<f64> = (0..len)
        .map(|k| {
            let t = k as f64 - half;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for v in &mut taps {
        *v /= sum;
    }
    taps
}

/// Continuous-phase FSK from random ±1 bits; `freq_taps` of `None` gives
/// rectangular (CPFSK) pulses, `Some` smooths the frequency pulse (GFSK).
fn cpfsk_mod(n: usize, freq_taps: Option<&[f64]>, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let sps = SAMPLES_PER_SYMBOL;
    let pad = freq_taps.map_or(0, |t| t.len());
    let n_bits = (n + 2 * pad) / sps + 2;
    let mut nrz = Vec::with_capacity(n_bits * sps);
    for _ in 0..n_bits {
        let b = if rng.random_range(0..2u8) == 0 { 1.0 } else { -1.0 };
        for _ in 0..sps {
            nrz.push(b);
        }
    }
    let freq: Vec<f64> = match freq_taps {
        None => nrz,
        Some(taps) => {
            let delay = (taps.len() - 1) / 2;
            let mut out = vec![0.0; nrz.len()];
            for (i, slot) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &tap) in taps.iter().enumerate() {
                    let j = i as isize + k as isize - delay as isize;
                    if j >= 0 && (j as usize) < nrz.len() {
                        acc += tap * nrz[j as usize];
                    }
                }
                *slot = acc;
            }
            out
        }
    };
    let mut phase: f64 = rng.random_range(0.0..2.0 * PI);
    let step = PI * CPFSK_MOD_INDEX / sps as f64;
    let mut out = Vec::with_capacity(n);
    for &f in freq.iter().skip(pad).take(n) {
        phase += step * f;
        out.push(C64::from_polar(1.0, phase));
    }
    out
}

struct ToneMix {
    amp: [f64; TONES],
    freq: [f64; TONES],
    phase: [f64; TONES],
}

impl ToneMix {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let mut amp = [0.0; TONES];
        let mut freq = [0.0; TONES];
        let mut phase = [0.0; TONES];
        for i in 0..TONES {
            amp[i] = rng.random_range(0.5..1.0);
            freq[i] = rng.random_range(0.003..0.03);
            phase[i] = rng.random_range(0.0..2.0 * PI);
        }
        ToneMix { amp, freq, phase }
    }

    fn real_at(&self, k: usize) -> f64 {
        (0..TONES)
            .map(|i| self.amp[i] * (2.0 * PI * self.freq[i] * k as f64 + self.phase[i]).cos())
            .sum()
    }

    fn analytic_at(&self, k: usize) -> C64 {
        (0..TONES).fold(C64::ZERO, |acc, i| {
            acc.add(C64::from_polar(
                self.amp[i],
                2.0 * PI * self.freq[i] * k as f64 + self.phase[i],
            ))
        })
    }

    fn peak(&self) -> f64 {
        self.amp.iter().sum()
    }
}

fn analog_mod(m: Modulation, n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mix = ToneMix::draw(rng);
    let peak = mix.peak();
    let carrier_phase: f64 = rng.random_range(0.0..2.0 * PI);
    let rot = C64::from_polar(1.0, carrier_phase);
    match m {
        Modulation::Wbfm => {
            let mut phase = 0.0;
            (0..n)
                .map(|k| {
                    phase += 2.0 * PI * FM_DEVIATION * mix.real_at(k) / peak;
                    C64::from_polar(1.0, phase).mul(rot)
                })
                .collect()
        }
        Modulation::AmDsb => (0..n)
            .map(|k| rot.scale(1.0 + AM_DEPTH * mix.real_at(k) / peak))
            .collect(),
        Modulation::AmSsb => (0..n).map(|k| mix.analytic_at(k).scale(1.0 / peak).mul(rot)).collect(),
        _ => unreachable!("analog_mod only defined for analog classes"),
    }
}

fn clean_signal(m: Modulation, n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    match m {
        Modulation::Bpsk
        | Modulation::Qpsk
        | Modulation::Psk8
        | Modulation::Qam16
        | Modulation::Qam64
        | Modulation::Pam4 => {
            let carrier_phase: f64 = rng.random_range(0.0..2.0 * PI);
            let rot = C64::from_polar(1.0, carrier_phase);
            linear_mod(m, n, rng).into_iter().map(|s| s.mul(rot)).collect()
        }
        Modulation::Cpfsk => cpfsk_mod(n, None, rng),
        Modulation::Gfsk => {
            let taps = gaussian_taps(SAMPLES_PER_SYMBOL, GFSK_SPAN_SYMBOLS, GFSK_BT);
            cpfsk_mod(n, Some(&taps), rng)
        }
        Modulation::Wbfm | Modulation::AmSsb | Modulation::AmDsb => analog_mod(m, n, rng),
    }
}

/// Clean and noise components of a generated frame, after the unit-norm
/// scaling. Exposed so SNR calibration can be measured directly.
#[derive(Debug, Clone)]
pub struct FrameParts {
    pub clean: Vec<C64Pair>,
    pub noise: Vec<C64Pair>,
}

/// (re, im) pair; a minimal public complex sample for [`FrameParts`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C64Pair {
    pub re: f64,
    pub im: f64,
}

impl FrameParts {
    pub fn clean_power(&self) -> f64 {
        self.clean.iter().map(|c| c.re * c.re + c.im * c.im).sum()
    }

    pub fn noise_power(&self) -> f64 {
        self.noise.iter().map(|c| c.re * c.re + c.im * c.im).sum()
    }
}

fn synth_components(
    m: Modulation,
    snr_db: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<C64>, Vec<C64>) {
    assert!(n >= 16, "frame length must be at least 16");
    let clean = clean_signal(m, n, rng);
    let clean_power: f64 = clean.iter().map(|c| c.norm_sq()).sum();
    let noise = if snr_db.is_finite() {
        let snr_lin = super::db_to_lin(snr_db);
        // per-sample complex variance so the expected total noise power is
        // clean_power / snr_lin
        let sigma = (clean_power / (snr_lin * n as f64)).sqrt();
        let s = sigma / 2f64.sqrt();
        (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64 { re: re * s, im: im * s }
            })
            .collect()
    } else {
        vec![C64::ZERO; n]
    };
    (clean, noise)
}

/// Generate one labeled frame: modulated baseband plus AWGN at `snr_db`
/// (`f64::INFINITY` for the noise-free limit), normalized to unit l2 norm.
/// Deterministic given the generator state.
pub fn synth_frame(m: Modulation, snr_db: f64, n: usize, rng: &mut ChaCha8Rng) -> IQFrame {
    let (clean, noise) = synth_components(m, snr_db, n, rng);
    let total: Vec<C64> = clean.iter().zip(&noise).map(|(c, w)| c.add(*w)).collect();
    let norm: f64 = total.iter().map(|c| c.norm_sq()).sum::<f64>().sqrt();
    let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
    let mut samples = Vec::with_capacity(2 * n);
    for c in &total {
        samples.push((c.re * scale) as f32);
    }
    for c in &total {
        samples.push((c.im * scale) as f32);
    }
    IQFrame { samples, label: m, snr_db }
}

/// Like [`synth_frame`] but also returning the scaled clean/noise
/// components, for generator calibration oracles.
pub fn synth_frame_parts(
    m: Modulation,
    snr_db: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (IQFrame, FrameParts) {
    let (clean, noise) = synth_components(m, snr_db, n, rng);
    let total: Vec<C64> = clean.iter().zip(&noise).map(|(c, w)| c.add(*w)).collect();
    let norm: f64 = total.iter().map(|c| c.norm_sq()).sum::<f64>().sqrt();
    let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
    let mut samples = Vec::with_capacity(2 * n);
    for c in &total {
        samples.push((c.re * scale) as f32);
    }
    for c in &total {
        samples.push((c.im * scale) as f32);
    }
    let parts = FrameParts {
        clean: clean.iter().map(|c| C64Pair { re: c.re * scale, im: c.im * scale }).collect(),
        noise: noise.iter().map(|c| C64Pair { re: c.re * scale, im: c.im * scale }).collect(),
    };
    (IQFrame { samples, label: m, snr_db }, parts)
}
