//! Objective measures: log power attenuation between a recording and its
//! filtered version, the D50 definition ratio of an impulse response, and
//! basic level statistics.

use serde::{Deserialize, Serialize};

use crate::cepstrum::ImpulseResponse;
use crate::error::{Error, Result};
use crate::signal::Signal;

pub const D50_WINDOW_SECONDS: f64 = 0.05;
pub const D50_ONSET_FRACTION: f64 = 0.01;
pub const DEFAULT_RMS_WINDOW: f64 = 0.05;

fn variance(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64
}

fn db_power(p: f64) -> f64 {
    10.0 * p.log10()
}

fn db_amplitude(a: f64) -> f64 {
    20.0 * a.log10()
}

/// `10 log10(var(filtered) / var(reference))`; negative means the filter
/// removed power. Inputs of different length are compared over the common
/// prefix.
pub fn lpa(reference: &Signal, filtered: &Signal) -> Result<f64> {
    let n = reference.len().min(filtered.len());
    if reference.len() != filtered.len() {
        log::warn!(
            "LPA: lengths differ ({} vs {}), comparing the first {n} samples",
            reference.len(),
            filtered.len()
        );
    }
    let vr = variance(&reference.samples()[..n]);
    if vr == 0.0 {
        return Err(Error::SilentReference);
    }
    let vf = variance(&filtered.samples()[..n]);
    Ok(db_power(vf / vr))
}

/// Percentage of the response energy within 50 ms of its onset, the first
/// tap reaching 1% of the peak magnitude.
pub fn d50(h: &ImpulseResponse) -> Result<f64> {
    let peak = h.peak();
    if peak == 0.0 {
        return Err(Error::ZeroPeak);
    }
    let taps = h.taps();
    let onset = taps
        .iter()
        .position(|t| t.abs() >= D50_ONSET_FRACTION * peak)
        .expect("peak tap qualifies");
    let window = (D50_WINDOW_SECONDS * h.sample_rate()).round() as usize;
    let end = (onset + window).min(taps.len());
    let energy = |s: &[f64]| s.iter().map(|t| t * t).sum::<f64>();
    Ok(100.0 * energy(&taps[onset..end]) / energy(taps))
}

/// Level statistics of one signal. dB values may be `-inf` for silence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalStats {
    pub min_sample: f64,
    pub max_sample: f64,
    #[serde(with = "db_value")]
    pub peak_amplitude_db: f64,
    #[serde(with = "db_value")]
    pub dc_offset_db: f64,
    #[serde(with = "db_value")]
    pub min_rms_db: f64,
    #[serde(with = "db_value")]
    pub max_rms_db: f64,
    #[serde(with = "db_value")]
    pub avg_rms_db: f64,
}

/// Sample extremes, peak and DC level, and RMS level over non-overlapping
/// windows of `rms_window` seconds (the last window may be shorter).
/// Silent windows are left out of the minimum.
pub fn signal_stats(s: &Signal, rms_window: f64) -> Result<SignalStats> {
    if !(rms_window > 0.0 && rms_window.is_finite()) {
        return Err(Error::invalid(format!(
            "rms window must be > 0, got {rms_window}"
        )));
    }
    let v = s.samples();
    let min_sample = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max_sample = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let window = ((rms_window * s.sample_rate()).round() as usize).max(1);
    let powers: Vec<f64> = v
        .chunks(window)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>() / c.len() as f64)
        .collect();
    let min_rms = powers
        .iter()
        .copied()
        .filter(|p| *p > 0.0)
        .fold(f64::INFINITY, f64::min);
    let max_rms = powers.iter().copied().fold(0.0, f64::max);
    let avg = powers.iter().sum::<f64>() / powers.len() as f64;
    Ok(SignalStats {
        min_sample,
        max_sample,
        peak_amplitude_db: db_amplitude(min_sample.abs().max(max_sample.abs())),
        dc_offset_db: db_amplitude(mean.abs()),
        min_rms_db: if min_rms.is_finite() {
            db_power(min_rms)
        } else {
            f64::NEG_INFINITY
        },
        max_rms_db: db_power(max_rms),
        avg_rms_db: db_power(avg),
    })
}

/// Comparison of a recording before and after filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(with = "db_value")]
    pub lpa_db: f64,
    pub d50_percent_before: Option<f64>,
    pub d50_percent_after: Option<f64>,
    pub t60_broadband_before_s: f64,
    pub t60_broadband_after_s: f64,
    pub stats_before: SignalStats,
    pub stats_after: SignalStats,
}

/// Serialises non-finite floats as the strings `"-inf"`, `"inf"` and
/// `"nan"`; finite values stay JSON numbers.
pub mod db_value {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_str("nan")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or one of \"-inf\", \"inf\", \"nan\"")
            }
            fn visit_f64<E>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "inf" => Ok(f64::INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(E::custom(format!("unexpected string {other:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}
