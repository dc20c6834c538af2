//! Time-domain signals, the periodic linear sweep used for calibration,
//! and linear convolution.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cepstrum::ImpulseResponse;
use crate::error::{Error, Result};
use crate::fft::FftPair;

/// Mono sampled audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl Signal {
    /// Builds a signal, rejecting empty buffers, non-finite samples and
    /// non-positive sample rates.
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        validate_sample_rate(sample_rate)?;
        if samples.is_empty() {
            return Err(Error::invalid("signal must contain at least one sample"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn peak(&self) -> f64 {
        peak(&self.samples)
    }
}

pub(crate) fn validate_sample_rate(sample_rate: f64) -> Result<()> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid(format!(
            "sample_rate must be positive and finite, got {sample_rate}"
        )));
    }
    Ok(())
}

pub(crate) fn peak(samples: &[f64]) -> f64 {
    samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
}

/// Parameters of a periodic linear sine sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpSpec {
    pub f0: f64,
    pub f1: f64,
    pub duration: f64,
    pub periods: usize,
    pub sample_rate: f64,
}

impl ChirpSpec {
    pub fn validate(&self) -> Result<()> {
        validate_sample_rate(self.sample_rate)?;
        let nyquist = self.sample_rate / 2.0;
        for (name, f) in [("f0", self.f0), ("f1", self.f1)] {
            if !(f.is_finite() && (0.0..=nyquist).contains(&f)) {
                return Err(Error::invalid(format!(
                    "{name} = {f} Hz outside [0, {nyquist}] (Nyquist)"
                )));
            }
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if self.periods == 0 {
            return Err(Error::invalid("periods must be >= 1"));
        }
        if self.period_len() == 0 {
            return Err(Error::invalid(format!(
                "duration {} s at {} Hz rounds to zero samples",
                self.duration, self.sample_rate
            )));
        }
        Ok(())
    }

    /// Samples per period, `round(T * fs)`.
    pub fn period_len(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// Whether `T * fs` had to be rounded to get the period length.
    pub fn is_rounded(&self) -> bool {
        let exact = self.duration * self.sample_rate;
        (exact - exact.round()).abs() > 1e-9 * exact.max(1.0)
    }
}

/// Generates `periods` repetitions of a linear sweep from `f0` to `f1`.
///
/// Sample `n` is `sin(2 pi (f0 t + (f1 - f0) / (2T) t^2))` with
/// `t = (n mod N) / fs` and `N = round(T fs)`. The phase is evaluated in
/// closed form for every sample, so the output is exactly `N`-periodic.
/// `T` in the sweep rate is the nominal duration, not `N / fs`.
pub fn generate_chirp(spec: &ChirpSpec) -> Result<Signal> {
    spec.validate()?;
    let n = spec.period_len();
    let rate = (spec.f1 - spec.f0) / (2.0 * spec.duration);
    let period: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / spec.sample_rate;
            (2.0 * PI * (spec.f0 * t + rate * t * t)).sin()
        })
        .collect();
    let mut samples = Vec::with_capacity(n * spec.periods);
    for _ in 0..spec.periods {
        samples.extend_from_slice(&period);
    }
    Signal::new(samples, spec.sample_rate)
}

// Above this many multiply-adds the FFT path is used.
const DIRECT_CONVOLUTION_LIMIT: usize = 1 << 18;

/// Full linear convolution of a signal with an impulse response.
pub fn convolve(x: &Signal, h: &ImpulseResponse) -> Result<Signal> {
    if x.sample_rate() != h.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: x.sample_rate(),
            right: h.sample_rate(),
        });
    }
    Signal::new(convolve_slices(x.samples(), h.taps()), x.sample_rate())
}

/// Full linear convolution of two non-empty sequences, length `a + b - 1`.
pub fn convolve_slices(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().saturating_mul(b.len()) <= DIRECT_CONVOLUTION_LIMIT {
        convolve_direct(a, b)
    } else {
        convolve_fft(a, b)
    }
}

fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn convolve_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let fft = FftPair::new(out_len.next_power_of_two());
    let mut scratch = fft.scratch();
    let mut fa = fft.forward_real(a, &mut scratch);
    let fb = fft.forward_real(b, &mut scratch);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    fft.inverse(&mut fa, &mut scratch);
    fa.iter().take(out_len).map(|c: &Complex64| c.re).collect()
}

/// Divides by the peak only when the peak exceeds 1, so the result never
/// clips. All-zero input comes back unchanged.
pub fn normalize_peak(s: &Signal) -> Signal {
    let p = s.peak();
    if p > 1.0 {
        Signal {
            samples: s.samples.iter().map(|v| v / p).collect(),
            sample_rate: s.sample_rate,
        }
    } else {
        s.clone()
    }
}

/// Always scales to unit peak.
pub fn normalize_peak_strict(s: &Signal) -> Result<Signal> {
    let samples = normalize_slice_strict(s.samples())?;
    Ok(Signal {
        samples,
        sample_rate: s.sample_rate,
    })
}

pub(crate) fn normalize_slice_strict(v: &[f64]) -> Result<Vec<f64>> {
    let p = peak(v);
    if p == 0.0 {
        return Err(Error::ZeroPeak);
    }
    Ok(v.iter().map(|x| x / p).collect())
}
