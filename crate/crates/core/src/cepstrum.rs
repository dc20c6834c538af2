//! Impulse-response identification by frame-wise real-cepstrum
//! subtraction.
//!
//! For every frame the real cepstra of the test signal and the recording
//! are subtracted, the difference is mapped back to a spectrum through
//! `exp(FFT(c))` and inverse transformed. The per-frame responses are
//! averaged in the time domain and scaled to unit peak.
//!
//! Only `ln|X|` enters the cepstrum, so the estimate is the zero-phase
//! response with the identified magnitude: energy that the true system
//! places at lag `d` shows up at both `d` and `n_dft - d`. Delays and
//! non-minimum-phase structure are not recovered.

use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::signal::{normalize_slice_strict, peak, validate_sample_rate, Signal};
use crate::spectral::{FrameParams, Window};

/// Time-domain system estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    taps: Vec<f64>,
    sample_rate: f64,
}

impl ImpulseResponse {
    pub fn new(taps: Vec<f64>, sample_rate: f64) -> Result<Self> {
        validate_sample_rate(sample_rate)?;
        if taps.is_empty() {
            return Err(Error::invalid("impulse response needs at least one tap"));
        }
        if let Some(i) = taps.iter().position(|t| !t.is_finite()) {
            return Err(Error::Numerical(format!("non-finite tap at index {i}")));
        }
        Ok(Self { taps, sample_rate })
    }

    /// Unit impulse of length `len`.
    pub fn delta(len: usize, sample_rate: f64) -> Result<Self> {
        let mut taps = vec![0.0; len.max(1)];
        taps[0] = 1.0;
        Self::new(taps, sample_rate)
    }

    pub fn from_signal(s: Signal) -> Self {
        let sample_rate = s.sample_rate();
        Self {
            taps: s.into_samples(),
            sample_rate,
        }
    }

    pub fn to_signal(&self) -> Signal {
        Signal::new(self.taps.clone(), self.sample_rate).expect("taps validated on construction")
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn peak(&self) -> f64 {
        peak(&self.taps)
    }

    /// Scales to `max |tap| = 1`; fails on an all-zero response.
    pub fn normalized(&self) -> Result<Self> {
        Ok(Self {
            taps: normalize_slice_strict(&self.taps)?,
            sample_rate: self.sample_rate,
        })
    }
}

/// `Re{IFFT(ln max(|X|, epsilon))}` of one spectrum frame.
pub fn real_cepstrum_frame(spectrum: &[Complex64], epsilon: f64) -> Result<Vec<f64>> {
    validate_epsilon(epsilon)?;
    if spectrum.is_empty() {
        return Err(Error::invalid("empty spectrum frame"));
    }
    let fft = FftPair::new(spectrum.len());
    let mut scratch = fft.scratch();
    Ok(cepstrum_with(&fft, &mut scratch, spectrum, epsilon))
}

fn cepstrum_with(
    fft: &FftPair,
    scratch: &mut [Complex64],
    spectrum: &[Complex64],
    epsilon: f64,
) -> Vec<f64> {
    let mut buf: Vec<Complex64> = spectrum
        .iter()
        .map(|c| Complex64::new(c.norm().max(epsilon).ln(), 0.0))
        .collect();
    fft.inverse(&mut buf, scratch);
    buf.into_iter().map(|c| c.re).collect()
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    Ok(())
}

/// Start offsets of the frames used for identification: every complete
/// frame inside the first `len` samples, or a single zero-padded frame when
/// the signal is shorter than one frame.
pub fn identification_frames(len: usize, p: &FrameParams) -> Vec<usize> {
    if len < p.n_dft() {
        return vec![0];
    }
    (0..=(len - p.n_dft()) / p.n_hop())
        .map(|k| k * p.n_hop())
        .collect()
}

/// Estimates the system response between test signal `x` and its
/// recording `y`.
///
/// The analysis spans the test signal: `y` is zero-padded if shorter and
/// anything it holds past the end of `x` is ignored. Frames whose test
/// segment is silent (peak at or below `epsilon`) carry no information about
/// the system and are skipped. The result has `n_dft` taps and unit peak.
pub fn estimate_ir(
    x: &Signal,
    y: &Signal,
    p: &FrameParams,
    epsilon: f64,
) -> Result<ImpulseResponse> {
    validate_epsilon(epsilon)?;
    if x.sample_rate() != y.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: x.sample_rate(),
            right: y.sample_rate(),
        });
    }
    if p.sample_rate() != x.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: p.sample_rate(),
            right: x.sample_rate(),
        });
    }
    if p.window() != Window::Rectangular {
        return Err(Error::invalid(
            "identification expects a rectangular analysis window",
        ));
    }
    if x.peak() <= epsilon {
        return Err(Error::InsufficientExcitation(
            "test signal is silent".into(),
        ));
    }
    if y.peak() <= epsilon {
        return Err(Error::InsufficientExcitation("recording is silent".into()));
    }
    if y.len() > x.len() {
        log::debug!(
            "ignoring {} recorded samples past the end of the test signal",
            y.len() - x.len()
        );
    }

    let n = p.n_dft();
    let xs = x.samples();
    let ys = y.samples();
    let segment = |src: &[f64], start: usize| -> Vec<f64> {
        (start..start + n)
            .map(|i| {
                if i < xs.len() {
                    src.get(i).copied().unwrap_or(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    };

    let fft = FftPair::new(n);
    let starts = identification_frames(xs.len(), p);
    let per_frame: Vec<Option<Vec<f64>>> = starts
        .par_iter()
        .map_init(
            || fft.scratch(),
            |scratch, &start| {
                let xseg = segment(xs, start);
                if peak(&xseg) <= epsilon {
                    return None;
                }
                let yseg = segment(ys, start);
                let xspec = fft.forward_real(&xseg, scratch);
                let yspec = fft.forward_real(&yseg, scratch);
                let cx = cepstrum_with(&fft, scratch, &xspec, epsilon);
                let cy = cepstrum_with(&fft, scratch, &yspec, epsilon);
                let mut spec: Vec<Complex64> = cy
                    .iter()
                    .zip(&cx)
                    .map(|(a, b)| Complex64::new(a - b, 0.0))
                    .collect();
                fft.forward(&mut spec, scratch);
                for v in spec.iter_mut() {
                    *v = v.exp();
                }
                fft.inverse(&mut spec, scratch);
                Some(spec.into_iter().map(|c| c.re).collect())
            },
        )
        .collect();

    let mut sum = vec![0.0; n];
    let mut used = 0usize;
    for h in per_frame.into_iter().flatten() {
        for (s, v) in sum.iter_mut().zip(&h) {
            *s += v;
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientExcitation(
            "no frame of the test signal carries energy".into(),
        ));
    }
    if used < starts.len() {
        log::warn!("skipped {} silent test frames", starts.len() - used);
    }
    let inv = 1.0 / used as f64;
    for s in sum.iter_mut() {
        *s *= inv;
    }
    if sum.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "impulse response estimate is not finite".into(),
        ));
    }
    ImpulseResponse::new(sum, x.sample_rate())?.normalized()
}

/// Provenance record written next to a persisted impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrSidecar {
    pub sample_rate: f64,
    pub n_dft: usize,
    pub n_hop: usize,
    pub epsilon: f64,
    pub created_from: CreatedFrom,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shaping: Option<ShapingRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedFrom {
    pub x_path: String,
    pub y_path: String,
}

/// Extra provenance for impulse responses produced by the shaping stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingRecord {
    pub ir_path: String,
    pub rho_floor: f64,
    pub dk: f64,
}

impl IrSidecar {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("sidecar serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

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

    /// Sidecar path for an impulse-response WAV: `ir.wav` -> `ir.json`.
    pub fn path_for(wav: &Path) -> std::path::PathBuf {
        wav.with_extension("json")
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{E, PI};

    use super::*;
    use crate::signal::{convolve_slices, generate_chirp, ChirpSpec};

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

    fn rect(n: usize, fs: f64) -> FrameParams {
        FrameParams::half_overlap(n, fs, Window::Rectangular).unwrap()
    }

    fn flat(n: usize, mag: f64) -> Vec<Complex64> {
        (0..n)
            .map(|k| Complex64::from_polar(mag, 0.7 * k as f64))
            .collect()
    }

    #[test]
    fn unit_magnitude_has_zero_cepstrum() {
        let c = real_cepstrum_frame(&flat(16, 1.0), 1e-10).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn constant_magnitude_e_gives_delta() {
        let c = real_cepstrum_frame(&flat(16, E), 1e-10).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn cepstrum_matches_direct_inverse_dft() {
        let mags: Vec<f64> = noise(4, 16).iter().map(|v| 0.1 + v.abs()).collect();
        let spec: Vec<Complex64> = mags
            .iter()
            .enumerate()
            .map(|(k, m)| Complex64::from_polar(*m, k as f64))
            .collect();
        let got = real_cepstrum_frame(&spec, 1e-10).unwrap();
        for (nu, g) in got.iter().enumerate() {
            let want: f64 = mags
                .iter()
                .enumerate()
                .map(|(mu, m)| m.ln() * (2.0 * PI * (mu * nu) as f64 / 16.0).cos())
                .sum::<f64>()
                / 16.0;
            assert!((g - want).abs() < 1e-10);
        }
        // Even symmetry about index 0.
        for k in 1..16 {
            assert!((got[k] - got[16 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_magnitude_is_floored() {
        let spec = vec![Complex64::new(0.0, 0.0); 8];
        let c = real_cepstrum_frame(&spec, 1e-10).unwrap();
        assert!((c[0] - (1e-10f64).ln()).abs() < 1e-12);
        assert!(real_cepstrum_frame(&spec, 0.0).is_err());
    }

    fn assert_delta(h: &ImpulseResponse) {
        assert!((h.taps()[0] - 1.0).abs() < 1e-12);
        for (i, t) in h.taps().iter().enumerate().skip(1) {
            assert!(t.abs() < 1e-6, "tap {i} = {t}");
        }
    }

    #[test]
    fn identical_signals_give_delta() {
        let x = Signal::new(noise(1, 4096), 1000.0).unwrap();
        let h = estimate_ir(&x, &x, &rect(256, 1000.0), 1e-10).unwrap();
        assert_eq!(h.len(), 256);
        assert_delta(&h);
    }

    #[test]
    fn scaled_recording_gives_delta() {
        let x = Signal::new(noise(2, 2048), 1000.0).unwrap();
        let y = Signal::new(x.samples().iter().map(|v| 0.5 * v).collect(), 1000.0).unwrap();
        let h = estimate_ir(&x, &y, &rect(128, 1000.0), 1e-10).unwrap();
        assert_delta(&h);
    }

    #[test]
    fn gain_does_not_change_normalized_taps() {
        let x = Signal::new(noise(3, 4096), 1000.0).unwrap();
        let yv = convolve_slices(x.samples(), &[0.2, 1.0, 0.3, -0.1]);
        let y = Signal::new(yv.clone(), 1000.0).unwrap();
        let y3 = Signal::new(yv.iter().map(|v| 3.0 * v).collect(), 1000.0).unwrap();
        let p = rect(256, 1000.0);
        let a = estimate_ir(&x, &y, &p, 1e-10).unwrap();
        let b = estimate_ir(&x, &y3, &p, 1e-10).unwrap();
        for (u, v) in a.taps().iter().zip(b.taps()) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn one_frame_is_its_own_average() {
        let x = Signal::new(noise(5, 64), 1000.0).unwrap();
        let yv = convolve_slices(x.samples(), &[1.0, 0.5]);
        let y = Signal::new(yv[..64].to_vec(), 1000.0).unwrap();
        let p = rect(64, 1000.0);
        assert_eq!(identification_frames(64, &p), vec![0]);
        let h = estimate_ir(&x, &y, &p, 1e-10).unwrap();

        // Direct computation of the single frame: IFFT(|Y| / |X|).
        let fft = FftPair::new(64);
        let mut sc = fft.scratch();
        let xs = fft.forward_real(x.samples(), &mut sc);
        let ys = fft.forward_real(y.samples(), &mut sc);
        let mut r: Vec<Complex64> = ys
            .iter()
            .zip(&xs)
            .map(|(a, b)| Complex64::new(a.norm() / b.norm(), 0.0))
            .collect();
        fft.inverse(&mut r, &mut sc);
        let pk = r.iter().fold(0.0_f64, |m, c| m.max(c.re.abs()));
        for (got, want) in h.taps().iter().zip(&r) {
            assert!((got - want.re / pk).abs() < 1e-9);
        }
    }

    #[test]
    fn white_noise_identifies_smooth_channel() {
        // Zero-phase channel |H(w)| = 0.6 + 0.4 cos(w), applied causally with
        // one sample of delay; the magnitude estimate ignores the delay.
        // The noise repeats every frame so full frames see circular convolution.
        let fs = 1000.0;
        let n = 256;
        let period = noise(8, n);
        let x = Signal::new(period.iter().copied().cycle().take(64 * n).collect(), fs).unwrap();
        let y = Signal::new(convolve_slices(x.samples(), &[0.2, 0.6, 0.2]), fs).unwrap();
        let h = estimate_ir(&x, &y, &rect(n, fs), 1e-10).unwrap();

        let fft = FftPair::new(n);
        let mut sc = fft.scratch();
        let est = fft.forward_real(h.taps(), &mut sc);
        let ratios: Vec<f64> = est
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let w = 2.0 * PI * k as f64 / n as f64;
                c.norm() / (0.6 + 0.4 * w.cos())
            })
            .collect();
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let scale = sorted[n / 2];
        for (k, r) in ratios.iter().enumerate() {
            assert!((r / scale - 1.0).abs() < 0.05, "bin {k}: {}", r / scale);
        }
    }

    #[test]
    fn periodic_sweep_identifies_channel_exactly() {
        let fs = 1000.0;
        let n = 512;
        let x = generate_chirp(&ChirpSpec {
            f0: 5.0,
            f1: 500.0,
            duration: n as f64 / fs,
            periods: 4,
            sample_rate: fs,
        })
        .unwrap();
        let y = Signal::new(convolve_slices(x.samples(), &[0.225, 0.55, 0.225]), fs).unwrap();
        let h = estimate_ir(&x, &y, &rect(n, fs), 1e-10).unwrap();
        assert!(h.taps().iter().all(|t| t.is_finite()));
        assert!((h.peak() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn silence_is_insufficient_excitation() {
        let x = Signal::new(noise(1, 512), 1000.0).unwrap();
        let z = Signal::zeros(512, 1000.0).unwrap();
        let p = rect(128, 1000.0);
        assert!(matches!(
            estimate_ir(&x, &z, &p, 1e-10),
            Err(Error::InsufficientExcitation(_))
        ));
        assert!(matches!(
            estimate_ir(&z, &x, &p, 1e-10),
            Err(Error::InsufficientExcitation(_))
        ));
    }

    #[test]
    fn rate_mismatch_is_rejected() {
        let x = Signal::new(noise(1, 512), 1000.0).unwrap();
        let y = Signal::new(noise(1, 512), 2000.0).unwrap();
        assert!(matches!(
            estimate_ir(&x, &y, &rect(128, 1000.0), 1e-10),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = IrSidecar {
            sample_rate: 8000.0,
            n_dft: 4096,
            n_hop: 2048,
            epsilon: 1e-10,
            created_from: CreatedFrom {
                x_path: "x.wav".into(),
                y_path: "y.wav".into(),
            },
            shaping: None,
        };
        let p = dir.path().join("ir.json");
        s.write(&p).unwrap();
        assert_eq!(IrSidecar::read(&p).unwrap(), s);
        assert!(!std::fs::read_to_string(&p).unwrap().contains("shaping"));
    }
}
