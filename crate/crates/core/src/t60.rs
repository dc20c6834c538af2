//! Blind per-bin reverberation time from the normalised tail energy of a
//! short-time power spectrum.
//!
//! For bin `m` the tail energy `E[m, k]` is the power in frames `k..` over
//! the power in all frames. The decay index is the first frame where it
//! drops below the threshold, and the reverberation time is
//! `overlap * index / fs`. The conventional `index * n_hop / fs` is kept
//! alongside it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::spectral::{stft, FrameParams, RealMatrix, Spectrogram};

pub const DEFAULT_THRESHOLD: f64 = 1e-3;

/// Normalised cumulative tail energy, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMatrix(RealMatrix);

impl EnergyMatrix {
    pub fn matrix(&self) -> &RealMatrix {
        &self.0
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.0.get(bin, frame)
    }

    /// First frame whose tail energy is below `threshold`, or `None` when
    /// the bin never decays that far.
    pub fn first_below(&self, bin: usize, threshold: f64) -> Option<usize> {
        (0..self.0.n_frames()).find(|&f| self.0.get(bin, f) < threshold)
    }
}

/// Per-bin reverberation times.
#[derive(Debug, Clone, PartialEq)]
pub struct T60Profile {
    params: FrameParams,
    threshold: f64,
    decay_frames: Vec<usize>,
    censored: Vec<bool>,
}

impl T60Profile {
    pub fn params(&self) -> &FrameParams {
        &self.params
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.decay_frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decay_frames.is_empty()
    }

    /// First frame index below the threshold, per bin.
    pub fn decay_frames(&self) -> &[usize] {
        &self.decay_frames
    }

    /// Bins whose tail energy never fell below the threshold; their decay
    /// index is the frame count.
    pub fn censored(&self) -> &[bool] {
        &self.censored
    }

    /// `overlap * index / fs`, seconds.
    pub fn t60_seconds(&self) -> Vec<f64> {
        self.decay_frames
            .iter()
            .map(|&k| overlap_seconds(k, &self.params))
            .collect()
    }

    /// `index * n_hop / fs`, seconds.
    pub fn t60_hop_seconds(&self) -> Vec<f64> {
        self.decay_frames
            .iter()
            .map(|&k| k as f64 * self.params.hop_seconds())
            .collect()
    }

    /// Writes `bin_index,frequency_hz,t60_paper_s,t60_hop_s,censored`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let overlap_s = self.t60_seconds();
        let hop = self.t60_hop_seconds();
        for bin in 0..self.len() {
            w.serialize(T60Row {
                bin_index: bin,
                frequency_hz: self.params.bin_frequency(bin),
                t60_paper_s: overlap_s[bin],
                t60_hop_s: hop[bin],
                censored: self.censored[bin],
            })
            .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads a profile written by [`T60Profile::write_csv`]. The frame
    /// geometry is not stored in the file and must be supplied.
    pub fn read_csv(path: impl AsRef<Path>, params: FrameParams, threshold: f64) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut decay_frames = Vec::new();
        let mut censored = Vec::new();
        for (i, row) in r.deserialize::<T60Row>().enumerate() {
            let row = row.map_err(|e| csv_err(path, e))?;
            if row.bin_index != i {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("row {i} has bin_index {}", row.bin_index),
                });
            }
            let k = row.t60_hop_s / params.hop_seconds();
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("row {i}: invalid t60_hop_s {}", row.t60_hop_s),
                });
            }
            decay_frames.push(k.round() as usize);
            censored.push(row.censored);
        }
        if decay_frames.len() != params.n_dft() {
            return Err(Error::DimensionMismatch(format!(
                "{}: {} bins, expected n_dft = {}",
                path.display(),
                decay_frames.len(),
                params.n_dft()
            )));
        }
        Ok(Self {
            params,
            threshold,
            decay_frames,
            censored,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct T60Row {
    bin_index: usize,
    frequency_hz: f64,
    t60_paper_s: f64,
    t60_hop_s: f64,
    censored: bool,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            _ => unreachable!(),
        }
    } else {
        Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

fn overlap_seconds(frames: usize, p: &FrameParams) -> f64 {
    p.overlap() * frames as f64 / p.sample_rate()
}

fn validate_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    Ok(())
}

/// `|X|^2` per entry.
pub fn psd(g: &Spectrogram) -> RealMatrix {
    let data = g.frames().flatten().map(|c| c.norm_sqr()).collect();
    RealMatrix::from_frames(g.n_bins(), g.n_frames(), data).expect("shape preserved")
}

/// Tail sums along frames, normalised by each bin's total. Bins with no
/// energy at all are treated as fully decayed (`E = 0`).
pub fn cumulative_tail_energy(psd: &RealMatrix) -> Result<EnergyMatrix> {
    if psd.values().iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::invalid("power spectrum must be non-negative"));
    }
    let (bins, frames) = (psd.n_bins(), psd.n_frames());
    let mut out = RealMatrix::zeros(bins, frames);
    for bin in 0..bins {
        let mut tail = vec![0.0; frames];
        let mut acc = 0.0;
        for f in (0..frames).rev() {
            acc += psd.get(bin, f);
            tail[f] = acc;
        }
        let total = acc;
        if total > 0.0 {
            for (f, t) in tail.iter().enumerate() {
                out.set(bin, f, t / total);
            }
        }
    }
    Ok(EnergyMatrix(out))
}

/// Reverberation times from a power spectrum laid out on `params`.
pub fn t60_from_psd(psd: &RealMatrix, params: &FrameParams, threshold: f64) -> Result<T60Profile> {
    validate_threshold(threshold)?;
    let energy = cumulative_tail_energy(psd)?;
    let mut decay_frames = Vec::with_capacity(psd.n_bins());
    let mut censored = Vec::with_capacity(psd.n_bins());
    for bin in 0..psd.n_bins() {
        match energy.first_below(bin, threshold) {
            // A bin without energy reads as fully decayed but carries no
            // measurement, so it is flagged as well.
            Some(k) => {
                decay_frames.push(k);
                censored.push(psd.bin_series(bin).iter().all(|v| *v == 0.0));
            }
            None => {
                decay_frames.push(psd.n_frames());
                censored.push(true);
            }
        }
    }
    Ok(T60Profile {
        params: *params,
        threshold,
        decay_frames,
        censored,
    })
}

pub fn t60_per_bin(g: &Spectrogram, threshold: f64) -> Result<T60Profile> {
    t60_from_psd(&psd(g), g.params(), threshold)
}

/// Reverberation time of a signal as a whole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadbandT60 {
    pub decay_frames: usize,
    pub censored: bool,
    /// `overlap * decay_frames / fs`.
    pub seconds: f64,
}

/// The per-bin procedure applied to the power summed across all bins.
pub fn t60_broadband(s: &Signal, p: &FrameParams, threshold: f64) -> Result<BroadbandT60> {
    validate_threshold(threshold)?;
    if s.sample_rate() != p.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: s.sample_rate(),
            right: p.sample_rate(),
        });
    }
    let spec = psd(&stft(s, p));
    let frames = spec.n_frames();
    let totals: Vec<f64> = (0..frames).map(|f| spec.frame(f).iter().sum()).collect();
    let summed = RealMatrix::from_frames(1, frames, totals)?;
    let energy = cumulative_tail_energy(&summed)?;
    let (decay_frames, censored) = match energy.first_below(0, threshold) {
        Some(k) => (k, summed.values().iter().all(|v| *v == 0.0)),
        None => (frames, true),
    };
    Ok(BroadbandT60 {
        decay_frames,
        censored,
        seconds: overlap_seconds(decay_frames, p),
    })
}
