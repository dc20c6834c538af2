//! Synthetic acoustic channels for testing: a direct path, discrete echoes
//! and band-limited exponentially decaying noise tails.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cepstrum::ImpulseResponse;
use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::signal::{convolve, Signal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Echo {
    pub delay_s: f64,
    pub gain: f64,
}

/// Noise confined to `[low_hz, high_hz]`, scaled to unit RMS before the
/// envelope `gain * 10^(-3 (t - onset) / t60)` is applied from `onset_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub low_hz: f64,
    pub high_hz: f64,
    pub t60_s: f64,
    pub gain: f64,
    #[serde(default = "default_onset")]
    pub onset_s: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_onset() -> f64 {
    0.005
}

fn default_direct() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    #[serde(default = "default_direct")]
    pub direct_gain: f64,
    #[serde(default)]
    pub echoes: Vec<Echo>,
    #[serde(default)]
    pub tails: Vec<Tail>,
    /// Response length; defaults to the latest echo or tail end.
    #[serde(default)]
    pub length_s: Option<f64>,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            direct_gain: 1.0,
            echoes: Vec::new(),
            tails: Vec::new(),
            length_s: None,
        }
    }
}

impl ChannelSpec {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    fn validate(&self, sample_rate: f64) -> Result<()> {
        let nyquist = sample_rate / 2.0;
        for e in &self.echoes {
            if !(e.delay_s >= 0.0 && e.delay_s.is_finite() && e.gain.is_finite()) {
                return Err(Error::invalid(format!("bad echo {e:?}")));
            }
        }
        for t in &self.tails {
            let band_ok = t.low_hz >= 0.0 && t.low_hz <= t.high_hz && t.high_hz <= nyquist;
            if !band_ok
                || t.t60_s.is_nan()
                || t.t60_s <= 0.0
                || t.onset_s.is_nan()
                || t.onset_s < 0.0
                || !t.gain.is_finite()
            {
                return Err(Error::invalid(format!(
                    "bad tail {t:?} (band must lie in [0, {nyquist}] Hz, t60 > 0)"
                )));
            }
        }
        if let Some(l) = self.length_s {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("length_s must be > 0, got {l}")));
            }
        }
        Ok(())
    }

    fn default_length(&self, sample_rate: f64) -> usize {
        let echo_end = self
            .echoes
            .iter()
            .map(|e| (e.delay_s * sample_rate).round() as usize + 1)
            .max()
            .unwrap_or(1);
        let tail_end = self
            .tails
            .iter()
            .map(|t| ((t.onset_s + t.t60_s) * sample_rate).ceil() as usize)
            .max()
            .unwrap_or(1);
        echo_end.max(tail_end).max(1)
    }

    /// The channel's impulse response, not normalised.
    pub fn impulse_response(&self, sample_rate: f64) -> Result<ImpulseResponse> {
        self.validate(sample_rate)?;
        let len = match self.length_s {
            Some(l) => ((l * sample_rate).round() as usize).max(1),
            None => self.default_length(sample_rate),
        };
        let mut taps = vec![0.0; len];
        taps[0] = self.direct_gain;
        for e in &self.echoes {
            let d = (e.delay_s * sample_rate).round() as usize;
            if d < len {
                taps[d] += e.gain;
            }
        }
        for t in &self.tails {
            let noise = band_noise(t, len, sample_rate);
            let onset = (t.onset_s * sample_rate).round() as usize;
            for (n, tap) in taps.iter_mut().enumerate().skip(onset) {
                let age = (n - onset) as f64 / sample_rate;
                *tap += t.gain * noise[n] * 10f64.powf(-3.0 * age / t.t60_s);
            }
        }
        ImpulseResponse::new(taps, sample_rate)
    }
}

fn band_noise(t: &Tail, len: usize, sample_rate: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    let fft = FftPair::new(len);
    let mut scratch = fft.scratch();
    let mut buf: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    fft.forward(&mut buf, &mut scratch);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(len - k) as f64 * sample_rate / len as f64;
        if f < t.low_hz || f > t.high_hz {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    fft.inverse(&mut buf, &mut scratch);
    let out: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|x| x * x).sum::<f64>() / len as f64).sqrt();
    if rms > 0.0 {
        out.into_iter().map(|x| x / rms).collect()
    } else {
        out
    }
}

/// Passes `dry` through the channel; returns the wet signal (full
/// convolution length) and the channel response.
pub fn simulate(dry: &Signal, spec: &ChannelSpec) -> Result<(Signal, ImpulseResponse)> {
    let h = spec.impulse_response(dry.sample_rate())?;
    Ok((convolve(dry, &h)?, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{stft, FrameParams, Window};
    use crate::t60::t60_per_bin;

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn identity_channel() {
        let dry = Signal::new(noise(1, 100), 1000.0).unwrap();
        let (wet, h) = simulate(&dry, &ChannelSpec::default()).unwrap();
        assert_eq!(h.taps(), &[1.0]);
        assert_eq!(wet, dry);
    }

    #[test]
    fn single_echo() {
        let fs = 100.0;
        let dry = Signal::new(noise(2, 80), fs).unwrap();
        let spec = ChannelSpec {
            echoes: vec![Echo {
                delay_s: 0.5,
                gain: 0.5,
            }],
            ..Default::default()
        };
        let (wet, h) = simulate(&dry, &spec).unwrap();
        assert_eq!(h.len(), 51);
        assert_eq!(wet.len(), 130);
        for n in 0..wet.len() {
            let a = dry.samples().get(n).copied().unwrap_or(0.0);
            let b = if n >= 50 {
                dry.samples().get(n - 50).copied().unwrap_or(0.0)
            } else {
                0.0
            };
            assert!((wet.samples()[n] - (a + 0.5 * b)).abs() < 1e-14);
        }
    }

    #[test]
    fn tails_are_deterministic_and_band_limited() {
        let fs = 8000.0;
        let spec = ChannelSpec {
            tails: vec![Tail {
                low_hz: 500.0,
                high_hz: 1000.0,
                t60_s: 0.5,
                gain: 0.3,
                onset_s: 0.005,
                seed: 7,
            }],
            ..Default::default()
        };
        let a = spec.impulse_response(fs).unwrap();
        let b = spec.impulse_response(fs).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4040);
    }

    #[test]
    fn tails_lengthen_per_bin_t60_in_band() {
        let fs = 8000.0;
        let dry = Signal::new(noise(3, 400), fs).unwrap();
        let spec = ChannelSpec {
            tails: vec![Tail {
                low_hz: 500.0,
                high_hz: 1500.0,
                t60_s: 1.0,
                gain: 0.3,
                onset_s: 0.005,
                seed: 1,
            }],
            ..Default::default()
        };
        let (wet, _) = simulate(&dry, &spec).unwrap();
        let p = FrameParams::half_overlap(512, fs, Window::Rectangular).unwrap();
        let mut padded = dry.samples().to_vec();
        padded.resize(wet.len(), 0.0);
        let dry_p = t60_per_bin(&stft(&Signal::new(padded, fs).unwrap(), &p), 1e-3).unwrap();
        let wet_p = t60_per_bin(&stft(&wet, &p), 1e-3).unwrap();
        let in_band: Vec<usize> = (0..256)
            .filter(|&b| (600.0..1400.0).contains(&p.bin_frequency(b)))
            .collect();
        for &b in &in_band {
            assert!(
                wet_p.decay_frames()[b] > dry_p.decay_frames()[b],
                "bin {b}: {} vs {}",
                wet_p.decay_frames()[b],
                dry_p.decay_frames()[b]
            );
        }
    }

    #[test]
    fn rejects_tail_above_nyquist() {
        let spec = ChannelSpec {
            tails: vec![Tail {
                low_hz: 100.0,
                high_hz: 5000.0,
                t60_s: 1.0,
                gain: 0.1,
                onset_s: 0.0,
                seed: 0,
            }],
            ..Default::default()
        };
        assert!(spec.impulse_response(8000.0).is_err());
    }
}
