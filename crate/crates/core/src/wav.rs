//! WAV file I/O. Integer PCM maps to `[-1, 1)` by division by
//! `2^(bits - 1)`; multi-channel input keeps channel 0.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// On-disk sample encoding for written files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavFormat {
    Pcm16,
    Pcm24,
    #[default]
    Float32,
}

fn wav_err(path: &Path, source: hound::Error) -> Error {
    match source {
        hound::Error::IoError(e) => Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
        other => Error::Wav {
            path: path.to_path_buf(),
            source: other,
        },
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    if channels > 1 {
        log::warn!(
            "{}: {} channels, using channel 0 only",
            path.display(),
            channels
        );
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| wav_err(path, e))?
        }
        (fmt, bits) => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!("unsupported sample format {fmt:?} with {bits} bits"),
            })
        }
    };
    let mono: Vec<f64> = interleaved.into_iter().step_by(channels).collect();
    if mono.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no samples".into(),
        });
    }
    Signal::new(mono, spec.sample_rate as f64).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_wav(path: impl AsRef<Path>, signal: &Signal, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    let rate = signal.sample_rate();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(Error::invalid(format!(
            "WAV needs an integral sample rate, got {rate}"
        )));
    }
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Pcm24 => (24, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: bits,
        sample_format,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    match format {
        WavFormat::Float32 => {
            for &s in signal.samples() {
                writer
                    .write_sample(s as f32)
                    .map_err(|e| wav_err(path, e))?;
            }
        }
        WavFormat::Pcm16 | WavFormat::Pcm24 => {
            let full = (1i64 << (bits - 1)) as f64;
            for &s in signal.samples() {
                let q = (s * full).round().clamp(-full, full - 1.0) as i32;
                writer.write_sample(q).map_err(|e| wav_err(path, e))?;
            }
        }
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}
