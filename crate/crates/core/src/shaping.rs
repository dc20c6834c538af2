//! Per-bin exponential fading of an impulse response.
//!
//! The ratio of recorded to test-signal reverberation time sets a decay
//! rate per bin, `D[m, k] = exp(-(k n_hop / fs) / rho[m])`. The response's
//! short-time spectrum is multiplied by `D` and resynthesised with a Hann
//! window and overlap-add.

use std::io::Write;
use std::path::Path;

use crate::cepstrum::ImpulseResponse;
use crate::error::{Error, Result};
use crate::spectral::{istft, stft_with_lead, FrameParams, RealMatrix, Window};
use crate::t60::T60Profile;

pub const DEFAULT_RHO_FLOOR: f64 = 1e-6;

/// Ratio of recorded to test-signal reverberation time per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct T60Ratio {
    rho: Vec<f64>,
    floor: f64,
}

impl T60Ratio {
    /// Wraps explicit ratios; every entry is raised to at least `floor`.
    pub fn new(rho: Vec<f64>, floor: f64) -> Result<Self> {
        validate_floor(floor)?;
        if rho.iter().any(|r| r.is_nan()) {
            return Err(Error::invalid("ratio contains NaN"));
        }
        Ok(Self {
            rho: rho.into_iter().map(|r| r.max(floor)).collect(),
            floor,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

fn validate_floor(floor: f64) -> Result<()> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::invalid(format!(
            "rho floor must be > 0, got {floor}"
        )));
    }
    Ok(())
}

/// `max(T60_y, floor) / max(T60_x, floor)`, floored again at `floor`.
pub fn t60_ratio(recorded: &T60Profile, test: &T60Profile, floor: f64) -> Result<T60Ratio> {
    validate_floor(floor)?;
    if !recorded.params().same_grid(test.params()) || recorded.len() != test.len() {
        return Err(Error::DimensionMismatch(
            "T60 profiles were computed on different frame grids".into(),
        ));
    }
    let rho = recorded
        .t60_seconds()
        .iter()
        .zip(test.t60_seconds())
        .map(|(y, x)| y.max(floor) / x.max(floor))
        .collect();
    T60Ratio::new(rho, floor)
}

/// Per-bin, per-frame attenuation factors in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayMatrix {
    values: RealMatrix,
    params: FrameParams,
}

impl DecayMatrix {
    /// Wraps explicit factors; entries must lie in `[0, 1]`.
    pub fn from_matrix(values: RealMatrix, params: FrameParams) -> Result<Self> {
        if values.n_bins() != params.n_dft() {
            return Err(Error::DimensionMismatch(format!(
                "{} bins for n_dft = {}",
                values.n_bins(),
                params.n_dft()
            )));
        }
        if values.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("decay factors must lie in [0, 1]"));
        }
        Ok(Self { values, params })
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.values
    }

    pub fn params(&self) -> &FrameParams {
        &self.params
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.values.get(bin, frame)
    }

    pub fn n_frames(&self) -> usize {
        self.values.n_frames()
    }

    /// One row per bin: `bin_index,frequency_hz,frame_0,...`, preceded by a
    /// `#` line carrying the frame geometry.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        let p = &self.params;
        writeln!(
            w,
            "# sample_rate={} n_dft={} n_hop={} n_frames={}",
            p.sample_rate(),
            p.n_dft(),
            p.n_hop(),
            self.n_frames()
        )
        .map_err(io)?;
        let mut header = String::from("bin_index,frequency_hz");
        for f in 0..self.n_frames() {
            header.push_str(&format!(",frame_{f}"));
        }
        writeln!(w, "{header}").map_err(io)?;
        for bin in 0..p.n_dft() {
            let mut line = format!("{bin},{}", p.bin_frequency(bin));
            for f in 0..self.n_frames() {
                line.push_str(&format!(",{}", self.get(bin, f)));
            }
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// `D[m, k] = exp(-(k n_hop / fs) / rho[m])` for `k < n_frames`, never
/// below the smallest positive normal `f64`.
pub fn build_decay_matrix(rho: &T60Ratio, p: &FrameParams, n_frames: usize) -> Result<DecayMatrix> {
    if n_frames == 0 {
        return Err(Error::invalid("decay matrix needs at least one frame"));
    }
    if rho.len() != p.n_dft() {
        return Err(Error::DimensionMismatch(format!(
            "{} ratios for n_dft = {}",
            rho.len(),
            p.n_dft()
        )));
    }
    let mut values = RealMatrix::zeros(p.n_dft(), n_frames);
    for f in 0..n_frames {
        let tau = f as f64 * p.hop_seconds();
        for (bin, r) in rho.values().iter().enumerate() {
            // Clamped so that entries stay strictly positive when exp underflows.
            values.set(bin, f, (-tau / r).exp().max(f64::MIN_POSITIVE));
        }
    }
    Ok(DecayMatrix { values, params: *p })
}

/// Frames in the short-time spectrum `shape_ir` takes of an `len`-tap
/// response. The response is framed behind `n_hop` zeros so frame 0 is
/// centred on tap 0.
pub fn shaping_frame_count(len: usize, p: &FrameParams) -> usize {
    p.frame_count(len, p.n_hop())
}

/// Multiplies the Hann short-time spectrum of `h` by `d` and resynthesises
/// by overlap-add. The output keeps the length of `h` and is not
/// renormalised.
pub fn shape_ir(h: &ImpulseResponse, d: &DecayMatrix, p: &FrameParams) -> Result<ImpulseResponse> {
    if h.sample_rate() != p.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: h.sample_rate(),
            right: p.sample_rate(),
        });
    }
    if !d.params().same_grid(p) {
        return Err(Error::DimensionMismatch(
            "decay matrix was built on a different frame grid".into(),
        ));
    }
    let p = p.with_window(Window::Hann);
    let spec = stft_with_lead(&h.to_signal(), &p, p.n_hop());
    if spec.n_frames() != d.n_frames() || spec.n_bins() != d.matrix().n_bins() {
        return Err(Error::DimensionMismatch(format!(
            "impulse response spectrum is {} x {}, decay matrix is {} x {}",
            spec.n_bins(),
            spec.n_frames(),
            d.matrix().n_bins(),
            d.n_frames()
        )));
    }
    let faded = spec.map_bins(|bin, frame, v| v * d.get(bin, frame));
    Ok(ImpulseResponse::from_signal(istft(&faded)?))
}

/// `h[n] * exp(-dk n)`.
pub fn apply_global_decay(h: &ImpulseResponse, dk: f64) -> Result<ImpulseResponse> {
    if !(dk >= 0.0 && dk.is_finite()) {
        return Err(Error::invalid(format!("dk must be >= 0, got {dk}")));
    }
    let taps = h
        .taps()
        .iter()
        .enumerate()
        .map(|(n, t)| t * (-dk * n as f64).exp())
        .collect();
    ImpulseResponse::new(taps, h.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::RealMatrix;
    use crate::t60::t60_from_psd;
    use proptest::prelude::*;

    fn hann(n: usize, fs: f64) -> FrameParams {
        FrameParams::half_overlap(n, fs, Window::Hann).unwrap()
    }

    fn profile(frames: &[usize], fs: f64) -> T60Profile {
        // Each bin gets energy in its first `k` frames only, so its decay
        // index is exactly `k`.
        let n = frames.len();
        let total = 1 + frames.iter().max().copied().unwrap_or(0);
        let mut m = RealMatrix::zeros(n, total);
        for (b, &k) in frames.iter().enumerate() {
            for f in 0..k {
                m.set(b, f, 1.0);
            }
        }
        let p = FrameParams::half_overlap(n, fs, Window::Rectangular).unwrap();
        t60_from_psd(&m, &p, 1e-3).unwrap()
    }

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
    fn ratio_examples() {
        let a = profile(&[1, 2, 3, 4], 100.0);
        let r = t60_ratio(&a, &a, 1e-6).unwrap();
        assert!(r.values().iter().all(|v| (v - 1.0).abs() < 1e-15));

        let x = profile(&[0, 2], 100.0);
        let y = profile(&[3, 4], 100.0);
        let r = t60_ratio(&y, &x, 1e-6).unwrap();
        let ty = y.t60_seconds();
        assert!((r.values()[0] - ty[0] / 1e-6).abs() < 1e-9);
        assert!((r.values()[1] - 2.0).abs() < 1e-15);

        let other = profile(&[1, 2, 3], 100.0);
        assert!(t60_ratio(&a, &other, 1e-6).is_err());
    }

    #[test]
    fn decay_matrix_examples() {
        let p = FrameParams::new(3, 1, 1.0, Window::Hann).unwrap();
        let rho = T60Ratio::new(vec![1.0, 1e9, 0.5], 1e-6).unwrap();
        let d = build_decay_matrix(&rho, &p, 4).unwrap();
        for b in 0..3 {
            assert_eq!(d.get(b, 0), 1.0);
        }
        assert!((d.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((d.get(0, 1) - 0.3679).abs() < 1e-4);
        for f in 0..4 {
            assert!(d.get(1, f) > 1.0 - 1e-8);
        }
        assert!(build_decay_matrix(&rho, &p, 0).is_err());
    }

    #[test]
    fn unit_decay_is_round_trip() {
        let fs = 1000.0;
        let p = hann(64, fs);
        let h = ImpulseResponse::new(noise(1, 300), fs).unwrap();
        let frames = shaping_frame_count(h.len(), &p);
        let rho = T60Ratio::new(vec![f64::INFINITY; 64], 1e-6).unwrap();
        let d = build_decay_matrix(&rho, &p, frames).unwrap();
        assert!(d.matrix().values().iter().all(|v| *v == 1.0));
        let out = shape_ir(&h, &d, &p).unwrap();
        assert_eq!(out.len(), h.len());
        for (a, b) in out.taps().iter().zip(h.taps()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn delta_with_fast_decay_stays_in_first_frame() {
        let fs = 1000.0;
        let p = hann(32, fs);
        let h = ImpulseResponse::delta(256, fs).unwrap();
        let frames = shaping_frame_count(h.len(), &p);
        let rho = T60Ratio::new(vec![1e-4; 32], 1e-6).unwrap();
        let d = build_decay_matrix(&rho, &p, frames).unwrap();
        let out = shape_ir(&h, &d, &p).unwrap();
        let total: f64 = out.taps().iter().map(|t| t * t).sum();
        let beyond: f64 = out.taps()[32..].iter().map(|t| t * t).sum();
        assert!(beyond < 1e-6 * total);
    }

    #[test]
    fn echo_is_attenuated_by_decay_bound() {
        let fs = 1000.0;
        let p = hann(256, fs);
        let echo = 500;
        let mut taps = vec![0.0; 1024];
        taps[0] = 1.0;
        taps[echo] = 0.5;
        let h = ImpulseResponse::new(taps, fs).unwrap();
        // D reaches 1e-3 at tau = 0.25 s.
        let rho_val = 0.25 / 1000.0f64.ln();
        let rho = T60Ratio::new(vec![rho_val; 256], 1e-6).unwrap();
        let frames = shaping_frame_count(h.len(), &p);
        let d = build_decay_matrix(&rho, &p, frames).unwrap();
        let out = shape_ir(&h, &d, &p).unwrap();

        // Frames are centred at k * n_hop; those overlapping the echo are
        // k = 3 and 4, so the attenuation is bounded by D at k = 3.
        let bound = d.get(0, 3);
        let before = 0.5f64;
        let after = out.taps()[echo].abs();
        let atten_db = 20.0 * (after / before).log10();
        assert!(atten_db <= 20.0 * bound.log10() + 1e-6);
        assert!(atten_db <= -40.0, "{atten_db} dB");
        assert!((out.taps()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn global_decay_examples() {
        let h = ImpulseResponse::new(vec![1.0, 1.0, -0.5], 10.0).unwrap();
        assert_eq!(apply_global_decay(&h, 0.0).unwrap(), h);
        let out = apply_global_decay(&h, 2f64.ln()).unwrap();
        assert!((out.taps()[1] - 0.5).abs() < 1e-15);
        assert!((out.taps()[2] + 0.125).abs() < 1e-15);
        assert!(apply_global_decay(&h, -1.0).is_err());
    }

    #[test]
    fn decay_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = FrameParams::new(2, 1, 4.0, Window::Hann).unwrap();
        let rho = T60Ratio::new(vec![1.0, 2.0], 1e-6).unwrap();
        let d = build_decay_matrix(&rho, &p, 3).unwrap();
        let path = dir.path().join("d.csv");
        d.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# sample_rate=4 n_dft=2 n_hop=1 n_frames=3");
        assert_eq!(lines[1], "bin_index,frequency_hz,frame_0,frame_1,frame_2");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("0,0,1,"));
    }

    proptest! {
        #[test]
        fn decay_matrix_bounds(rho in prop::collection::vec(1e-6..1e3f64, 8), frames in 1usize..12) {
            let p = hann(8, 100.0);
            let d = build_decay_matrix(&T60Ratio::new(rho, 1e-6).unwrap(), &p, frames).unwrap();
            for b in 0..8 {
                let s = d.matrix().bin_series(b);
                prop_assert_eq!(s[0], 1.0);
                prop_assert!(s.iter().all(|v| *v <= 1.0 && *v >= 0.0));
                prop_assert!(s.windows(2).all(|w| w[1] <= w[0]));
            }
        }

        #[test]
        fn shaping_never_adds_energy(rho in prop::collection::vec(1e-3..10.0f64, 16), seed in 0u64..500) {
            let fs = 100.0;
            let p = hann(16, fs);
            let h = ImpulseResponse::new(noise(seed, 64), fs).unwrap();
            let frames = shaping_frame_count(h.len(), &p);
            let d = build_decay_matrix(&T60Ratio::new(rho, 1e-6).unwrap(), &p, frames).unwrap();
            let ones = DecayMatrix::from_matrix(
                RealMatrix::from_frames(16, frames, vec![1.0; 16 * frames]).unwrap(), p).unwrap();
            let shaped = shape_ir(&h, &d, &p).unwrap();
            let ident = shape_ir(&h, &ones, &p).unwrap();
            let e = |x: &ImpulseResponse| x.taps().iter().map(|t| t * t).sum::<f64>();
            prop_assert!(e(&shaped) <= e(&ident) + 1e-12);
        }

        #[test]
        fn global_decay_monotone(taps in prop::collection::vec(-1.0..1.0f64, 1..32),
                                 a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let h = ImpulseResponse::new(taps, 10.0).unwrap();
            let l = apply_global_decay(&h, lo).unwrap();
            let u = apply_global_decay(&h, hi).unwrap();
            for ((x, y), z) in u.taps().iter().zip(l.taps()).zip(h.taps()) {
                prop_assert!(x.abs() <= y.abs() && y.abs() <= z.abs());
            }
        }
    }

    #[test]
    fn caller_window_is_ignored() {
        let fs = 100.0;
        let rect = FrameParams::half_overlap(16, fs, Window::Rectangular).unwrap();
        let h = ImpulseResponse::new(noise(2, 40), fs).unwrap();
        let frames = shaping_frame_count(40, &rect);
        let rho = T60Ratio::new(vec![0.5; 16], 1e-6).unwrap();
        let d = build_decay_matrix(&rho, &rect, frames).unwrap();
        let a = shape_ir(&h, &d, &rect).unwrap();
        let b = shape_ir(&h, &d, &hann(16, fs)).unwrap();
        assert_eq!(a, b);
    }
}
