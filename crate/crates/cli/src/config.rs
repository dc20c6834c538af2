//! Pipeline configuration, resolved from defaults, an optional JSON file and
//! command-line flags (in increasing precedence).

use std::path::Path;

use dereverb::{ChirpSpec, FrameParams, Window};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_SAMPLE_RATE: f64 = 48_000.0;
pub const DEFAULT_PERIODS: usize = 4;
pub const DEFAULT_F0: f64 = 20.0;

/// Fully resolved settings shared by every command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sample_rate: f64,
    pub chirp: ChirpSpec,
    pub n_dft: usize,
    pub n_hop: usize,
    pub epsilon_analysis: f64,
    pub epsilon_filter: f64,
    pub t60_threshold: f64,
    pub rho_floor: f64,
    pub dk: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        ConfigLayer::default()
            .resolve(None)
            .expect("defaults are valid")
    }
}

impl PipelineConfig {
    /// Framing for identification, T60 and broadband measurements.
    pub fn analysis_params(&self) -> Result<FrameParams, CliError> {
        Ok(FrameParams::new(
            self.n_dft,
            self.n_hop,
            self.sample_rate,
            Window::Rectangular,
        )?)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("epsilon_analysis", self.epsilon_analysis),
            ("epsilon_filter", self.epsilon_filter),
            ("rho_floor", self.rho_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Validation(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.t60_threshold > 0.0 && self.t60_threshold < 1.0) {
            return Err(CliError::Validation(format!(
                "t60_threshold must lie in (0, 1), got {}",
                self.t60_threshold
            )));
        }
        if !(self.dk >= 0.0 && self.dk.is_finite()) {
            return Err(CliError::Validation(format!(
                "dk must be >= 0, got {}",
                self.dk
            )));
        }
        if self.chirp.sample_rate != self.sample_rate {
            return Err(CliError::Validation(format!(
                "chirp sample_rate {} differs from sample_rate {}",
                self.chirp.sample_rate, self.sample_rate
            )));
        }
        self.chirp.validate()?;
        self.analysis_params()?;
        Ok(())
    }
}

/// Chirp fields of a [`ConfigLayer`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpLayer {
    pub f0: Option<f64>,
    pub f1: Option<f64>,
    pub duration: Option<f64>,
    pub periods: Option<usize>,
    pub sample_rate: Option<f64>,
}

/// Partial configuration: what one source (file or flags) sets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub sample_rate: Option<f64>,
    #[serde(default)]
    pub chirp: ChirpLayer,
    pub n_dft: Option<usize>,
    pub n_hop: Option<usize>,
    pub epsilon_analysis: Option<f64>,
    pub epsilon_filter: Option<f64>,
    pub t60_threshold: Option<f64>,
    pub rho_floor: Option<f64>,
    pub dk: Option<f64>,
}

impl ConfigLayer {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            sample_rate: self.sample_rate.or(lower.sample_rate),
            chirp: ChirpLayer {
                f0: self.chirp.f0.or(lower.chirp.f0),
                f1: self.chirp.f1.or(lower.chirp.f1),
                duration: self.chirp.duration.or(lower.chirp.duration),
                periods: self.chirp.periods.or(lower.chirp.periods),
                sample_rate: self.chirp.sample_rate.or(lower.chirp.sample_rate),
            },
            n_dft: self.n_dft.or(lower.n_dft),
            n_hop: self.n_hop.or(lower.n_hop),
            epsilon_analysis: self.epsilon_analysis.or(lower.epsilon_analysis),
            epsilon_filter: self.epsilon_filter.or(lower.epsilon_filter),
            t60_threshold: self.t60_threshold.or(lower.t60_threshold),
            rho_floor: self.rho_floor.or(lower.rho_floor),
            dk: self.dk.or(lower.dk),
        }
    }

    /// Fills unset fields with defaults. An unset sample rate is taken from
    /// `input_rate` (the rate of the WAV inputs) or 48 kHz; an explicitly set
    /// rate that disagrees with `input_rate` is an error.
    pub fn resolve(&self, input_rate: Option<f64>) -> Result<PipelineConfig, CliError> {
        let fs = match (self.sample_rate, input_rate) {
            (Some(set), Some(wav)) if set != wav => {
                return Err(CliError::Validation(format!(
                    "configured sample rate {set} Hz does not match input {wav} Hz"
                )))
            }
            (Some(set), _) => set,
            (None, Some(wav)) => wav,
            (None, None) => DEFAULT_SAMPLE_RATE,
        };
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(CliError::Validation(format!(
                "sample rate must be > 0, got {fs}"
            )));
        }
        let n_dft = self.n_dft.unwrap_or((5.0 * fs).round() as usize);
        let n_hop = self.n_hop.unwrap_or(n_dft / 2);
        let chirp = ChirpSpec {
            f0: self.chirp.f0.unwrap_or(DEFAULT_F0),
            f1: self.chirp.f1.unwrap_or(fs / 2.0),
            duration: self.chirp.duration.unwrap_or(n_dft as f64 / fs),
            periods: self.chirp.periods.unwrap_or(DEFAULT_PERIODS),
            sample_rate: self.chirp.sample_rate.unwrap_or(fs),
        };
        let cfg = PipelineConfig {
            sample_rate: fs,
            chirp,
            n_dft,
            n_hop,
            epsilon_analysis: self.epsilon_analysis.unwrap_or(1e-10),
            epsilon_filter: self
                .epsilon_filter
                .unwrap_or(dereverb::filter::DEFAULT_FILTER_EPSILON),
            t60_threshold: self
                .t60_threshold
                .unwrap_or(dereverb::t60::DEFAULT_THRESHOLD),
            rho_floor: self
                .rho_floor
                .unwrap_or(dereverb::shaping::DEFAULT_RHO_FLOOR),
            dk: self.dk.unwrap_or(0.0),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<PipelineConfig> for ConfigLayer {
    fn from(c: PipelineConfig) -> Self {
        ConfigLayer {
            sample_rate: Some(c.sample_rate),
            chirp: ChirpLayer {
                f0: Some(c.chirp.f0),
                f1: Some(c.chirp.f1),
                duration: Some(c.chirp.duration),
                periods: Some(c.chirp.periods),
                sample_rate: Some(c.chirp.sample_rate),
            },
            n_dft: Some(c.n_dft),
            n_hop: Some(c.n_hop),
            epsilon_analysis: Some(c.epsilon_analysis),
            epsilon_filter: Some(c.epsilon_filter),
            t60_threshold: Some(c.t60_threshold),
            rho_floor: Some(c.rho_floor),
            dk: Some(c.dk),
        }
    }
}
