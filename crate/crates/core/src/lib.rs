//! Single-channel dereverberation.
//!
//! A periodic linear sweep is played through the recording chain and the
//! chain's impulse response is identified by subtracting real cepstra frame
//! by frame. The response is then faded per frequency bin, using the ratio
//! of blind reverberation-time estimates of the recording and the sweep,
//! and finally used as an inverse spectral filter on arbitrary recordings.
//!
//! The stages live in their own modules:
//!
//! - [`signal`]: signals, the sweep generator, convolution
//! - [`spectral`]: framing, STFT and overlap-add resynthesis
//! - [`cepstrum`]: impulse-response identification
//! - [`t60`]: per-bin reverberation time
//! - [`shaping`]: decay matrix and impulse-response fading
//! - [`filter`]: inverse spectral filtering
//! - [`metrics`]: LPA, D50 and level statistics
//! - [`simulate`]: synthetic channels for testing
//! - [`wav`]: WAV I/O

pub mod cepstrum;
pub mod error;
mod fft;
pub mod filter;
pub mod metrics;
pub mod shaping;
pub mod signal;
pub mod simulate;
pub mod spectral;
pub mod t60;
pub mod wav;

pub use cepstrum::{estimate_ir, real_cepstrum_frame, ImpulseResponse, IrSidecar};
pub use error::{Error, Result};
pub use filter::{build_filterbank, filter_signal, FilterBank};
pub use metrics::{d50, lpa, signal_stats, MetricsReport, SignalStats};
pub use shaping::{
    apply_global_decay, build_decay_matrix, shape_ir, t60_ratio, DecayMatrix, T60Ratio,
};
pub use signal::{
    convolve, generate_chirp, normalize_peak, normalize_peak_strict, ChirpSpec, Signal,
};
pub use spectral::{istft, regularized_magnitude, stft, FrameParams, Spectrogram, Window};
pub use t60::{t60_broadband, t60_per_bin, T60Profile};
