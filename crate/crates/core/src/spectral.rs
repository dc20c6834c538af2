//! Framing, windowing and short-time transforms.
//!
//! Frames advance forward in time: frame `k` covers samples
//! `[k * n_hop, k * n_hop + n_dft)` of the (optionally lead-padded) source,
//! zero-padded on the right so the last frame is full. All spectra are
//! full-length (`n_dft` complex bins, not the one-sided half).

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::signal::{validate_sample_rate, Signal};

/// Positions whose accumulated window product falls below this are left
/// unnormalised by the overlap-add.
pub const COLA_ENVELOPE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    /// Window coefficients of length `n`. Hann is the periodic form
    /// `0.5 - 0.5 cos(2 pi k / n)`, which overlap-adds to a constant at a
    /// hop of `n / 2`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Frame length, hop, sample rate and analysis window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    n_dft: usize,
    n_hop: usize,
    sample_rate: f64,
    window: Window,
}

impl FrameParams {
    pub fn new(n_dft: usize, n_hop: usize, sample_rate: f64, window: Window) -> Result<Self> {
        validate_sample_rate(sample_rate)?;
        if n_dft == 0 {
            return Err(Error::invalid("n_dft must be >= 1"));
        }
        if n_hop == 0 || n_hop > n_dft {
            return Err(Error::invalid(format!(
                "n_hop must satisfy 1 <= n_hop <= n_dft ({n_dft}), got {n_hop}"
            )));
        }
        Ok(Self {
            n_dft,
            n_hop,
            sample_rate,
            window,
        })
    }

    /// Half-overlapping frames of length `n_dft`.
    pub fn half_overlap(n_dft: usize, sample_rate: f64, window: Window) -> Result<Self> {
        Self::new(n_dft, (n_dft / 2).max(1), sample_rate, window)
    }

    pub fn n_dft(&self) -> usize {
        self.n_dft
    }

    pub fn n_hop(&self) -> usize {
        self.n_hop
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn with_window(self, window: Window) -> Self {
        Self { window, ..self }
    }

    /// `1 - n_hop / n_dft`.
    pub fn overlap(&self) -> f64 {
        1.0 - self.n_hop as f64 / self.n_dft as f64
    }

    /// Hop duration in seconds.
    pub fn hop_seconds(&self) -> f64 {
        self.n_hop as f64 / self.sample_rate
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / self.n_dft as f64
    }

    /// Frame count for a source of `len` samples behind `lead` zeros.
    pub fn frame_count(&self, len: usize, lead: usize) -> usize {
        (len + lead).div_ceil(self.n_hop).max(1)
    }

    /// Same frame geometry and sample rate, ignoring the window.
    pub fn same_grid(&self, other: &FrameParams) -> bool {
        self.n_dft == other.n_dft
            && self.n_hop == other.n_hop
            && self.sample_rate == other.sample_rate
    }
}

/// Real-valued matrix indexed by (bin, frame), stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    n_bins: usize,
    n_frames: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(n_bins: usize, n_frames: usize) -> Self {
        Self {
            n_bins,
            n_frames,
            data: vec![0.0; n_bins * n_frames],
        }
    }

    /// Builds from frame-major data (`data[frame * n_bins + bin]`).
    pub fn from_frames(n_bins: usize, n_frames: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_bins * n_frames {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n_bins} x {n_frames} matrix",
                data.len()
            )));
        }
        Ok(Self {
            n_bins,
            n_frames,
            data,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.data[frame * self.n_bins + bin]
    }

    pub fn set(&mut self, bin: usize, frame: usize, v: f64) {
        self.data[frame * self.n_bins + bin] = v;
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.n_bins..(frame + 1) * self.n_bins]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn bin_series(&self, bin: usize) -> Vec<f64> {
        (0..self.n_frames).map(|f| self.get(bin, f)).collect()
    }
}

/// Complex short-time spectrum, `n_dft` bins by `n_frames` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    params: FrameParams,
    n_frames: usize,
    data: Vec<Complex64>,
    signal_len: usize,
    lead: usize,
}

impl Spectrogram {
    /// Assembles a spectrogram from frame-major bins. `signal_len` is the
    /// length the inverse transform trims to.
    pub fn from_frames(
        params: FrameParams,
        frames: Vec<Vec<Complex64>>,
        signal_len: usize,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptySpectrogram);
        }
        let n_frames = frames.len();
        let mut data = Vec::with_capacity(n_frames * params.n_dft);
        for (i, f) in frames.into_iter().enumerate() {
            if f.len() != params.n_dft {
                return Err(Error::DimensionMismatch(format!(
                    "frame {i} has {} bins, expected {}",
                    f.len(),
                    params.n_dft
                )));
            }
            data.extend(f);
        }
        if data.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Numerical("non-finite spectrogram entry".into()));
        }
        Ok(Self {
            params,
            n_frames,
            data,
            signal_len: signal_len.max(1),
            lead: 0,
        })
    }

    pub fn params(&self) -> &FrameParams {
        &self.params
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.params.n_dft
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    /// Zeros prepended to the source before framing.
    pub fn lead(&self) -> usize {
        self.lead
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[frame * self.params.n_dft + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        let n = self.params.n_dft;
        &self.data[frame * n..(frame + 1) * n]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.params.n_dft)
    }

    /// Applies `f(bin, frame, value)` to every entry.
    pub fn map_bins(&self, f: impl Fn(usize, usize, Complex64) -> Complex64 + Sync) -> Self {
        let n = self.params.n_dft;
        let mut out = self.clone();
        out.data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(frame, bins)| {
                for (bin, v) in bins.iter_mut().enumerate() {
                    *v = f(bin, frame, *v);
                }
            });
        out
    }
}

/// Short-time transform with the analysis window from `p`.
pub fn stft(s: &Signal, p: &FrameParams) -> Spectrogram {
    stft_with_lead(s, p, 0)
}

/// Short-time transform of `s` behind `lead` zeros. With `lead = n_hop`
/// the first frame is centred on sample 0, so a Hann window does not
/// suppress the start of the signal.
pub fn stft_with_lead(s: &Signal, p: &FrameParams, lead: usize) -> Spectrogram {
    let n = p.n_dft;
    let n_frames = p.frame_count(s.len(), lead);
    let window = p.window.coefficients(n);
    let fft = FftPair::new(n);
    let src = s.samples();
    let mut data = vec![Complex64::new(0.0, 0.0); n_frames * n];
    data.par_chunks_mut(n).enumerate().for_each_init(
        || fft.scratch(),
        |scratch, (frame, buf)| {
            let start = frame * p.n_hop;
            for (k, b) in buf.iter_mut().enumerate() {
                let idx = start + k;
                let x = if idx >= lead && idx - lead < src.len() {
                    src[idx - lead]
                } else {
                    0.0
                };
                *b = Complex64::new(x * window[k], 0.0);
            }
            fft.forward(buf, scratch);
        },
    );
    Spectrogram {
        params: *p,
        n_frames,
        data,
        signal_len: s.len(),
        lead,
    }
}

/// Inverse short-time transform with a periodic Hann synthesis window and
/// overlap-add. Each sample is divided by the accumulated product of
/// analysis and synthesis windows wherever that envelope reaches
/// [`COLA_ENVELOPE_FLOOR`], so `istft(stft(s))` reconstructs `s`.
pub fn istft(g: &Spectrogram) -> Result<Signal> {
    if g.n_frames == 0 || g.data.is_empty() {
        return Err(Error::EmptySpectrogram);
    }
    let p = g.params;
    let n = p.n_dft;
    if 2 * p.n_hop != n {
        log::warn!(
            "n_hop = {} is not n_dft / 2 = {}; Hann overlap-add is not exactly constant",
            p.n_hop,
            n / 2
        );
    }
    let synthesis = Window::Hann.coefficients(n);
    let analysis = p.window.coefficients(n);
    let fft = FftPair::new(n);

    let mut frames = g.data.clone();
    frames
        .par_chunks_mut(n)
        .for_each_init(|| fft.scratch(), |scratch, buf| fft.inverse(buf, scratch));

    let total = (g.n_frames - 1) * p.n_hop + n;
    let mut out = vec![0.0; total];
    let mut envelope = vec![0.0; total];
    for (frame, buf) in frames.chunks_exact(n).enumerate() {
        let start = frame * p.n_hop;
        for k in 0..n {
            out[start + k] += buf[k].re * synthesis[k];
            envelope[start + k] += analysis[k] * synthesis[k];
        }
    }
    for (o, e) in out.iter_mut().zip(&envelope) {
        if *e >= COLA_ENVELOPE_FLOOR {
            *o /= e;
        }
    }
    let begin = g.lead.min(total);
    let end = (g.lead + g.signal_len).min(total);
    let mut samples = out[begin..end].to_vec();
    samples.resize(g.signal_len, 0.0);
    Signal::new(samples, p.sample_rate)
}

/// Elementwise `max(|X|, epsilon)`.
pub fn regularized_magnitude(g: &Spectrogram, epsilon: f64) -> Result<RealMatrix> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let data = g.data.iter().map(|c| c.norm().max(epsilon)).collect();
    RealMatrix::from_frames(g.n_bins(), g.n_frames, data)
}
