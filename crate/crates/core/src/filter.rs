//! Inverse filtering of a recording by spectral division with the shaped
//! impulse response.
//!
//! The response is transformed once at its full length and the same
//! spectrum is applied to every frame of the recording, i.e. the filter is
//! time-invariant. Frames use a Hann window with half overlap.

use rustfft::num_complex::Complex64;

use crate::cepstrum::ImpulseResponse;
use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::signal::{normalize_peak, Signal};
use crate::spectral::{istft, stft_with_lead, FrameParams, Window};

pub const DEFAULT_FILTER_EPSILON: f64 = 1e-6;

/// Spectrum of a shaped impulse response, ready for division.
#[derive(Debug, Clone)]
pub struct FilterBank {
    response: Vec<Complex64>,
    epsilon: f64,
    params: FrameParams,
}

impl FilterBank {
    pub fn response(&self) -> &[Complex64] {
        &self.response
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn params(&self) -> &FrameParams {
        &self.params
    }

    /// `H * max(1, epsilon / |H|)`: the response with its magnitude floored
    /// at `epsilon` and its phase kept. A zero bin becomes `epsilon`.
    pub fn denominator(&self, bin: usize) -> Complex64 {
        let h = self.response[bin];
        let mag = h.norm();
        if mag == 0.0 {
            Complex64::new(self.epsilon, 0.0)
        } else if mag < self.epsilon {
            h * (self.epsilon / mag)
        } else {
            h
        }
    }

    /// True when every bin sits at or below the floor.
    pub fn is_degenerate(&self) -> bool {
        self.response.iter().all(|h| h.norm() <= self.epsilon)
    }
}

/// Frame length equals the response length, rounded up to even so that the
/// hop is exactly half a frame; the response is zero-padded to match.
pub fn build_filterbank(h: &ImpulseResponse, epsilon: f64) -> Result<FilterBank> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let n = if h.len().is_multiple_of(2) {
        h.len()
    } else {
        h.len() + 1
    };
    let n = n.max(2);
    let params = FrameParams::half_overlap(n, h.sample_rate(), Window::Hann)?;
    let fft = FftPair::new(n);
    let mut scratch = fft.scratch();
    let response = fft.forward_real(h.taps(), &mut scratch);
    Ok(FilterBank {
        response,
        epsilon,
        params,
    })
}

/// Divides the short-time spectrum of `z` by the filter bank, resynthesises
/// by Hann overlap-add, trims to the input length and scales down only if
/// the result would clip.
pub fn filter_signal(z: &Signal, fb: &FilterBank) -> Result<Signal> {
    if z.sample_rate() != fb.params.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: z.sample_rate(),
            right: fb.params.sample_rate(),
        });
    }
    if fb.is_degenerate() {
        log::warn!("filter uninformative: every bin is at or below epsilon");
    }
    let denom: Vec<Complex64> = (0..fb.response.len()).map(|b| fb.denominator(b)).collect();
    let spec = stft_with_lead(z, &fb.params, fb.params.n_hop());
    let divided = spec.map_bins(|bin, _, v| v / denom[bin]);
    let out = istft(&divided).map_err(|e| match e {
        Error::Numerical(m) => Error::Numerical(format!("filtered signal: {m}")),
        other => other,
    })?;
    Ok(normalize_peak(&out))
}
