//! One function per subcommand. Every command reads its inputs from files
//! and writes its outputs to files; [`pipeline`] only chains the others.

use std::path::{Path, PathBuf};

use dereverb::cepstrum::{CreatedFrom, ShapingRecord};
use dereverb::metrics::DEFAULT_RMS_WINDOW;
use dereverb::shaping::shaping_frame_count;
use dereverb::simulate::{self, ChannelSpec};
use dereverb::wav::{read_wav, write_wav, WavFormat};
use dereverb::{
    apply_global_decay, build_decay_matrix, build_filterbank, d50, estimate_ir, filter_signal,
    generate_chirp, lpa, shape_ir, signal_stats, stft, t60_broadband, t60_per_bin, t60_ratio,
    ImpulseResponse, IrSidecar, MetricsReport, Signal, T60Profile,
};

use crate::config::{ConfigLayer, PipelineConfig};
use crate::error::CliError;

pub type CmdResult = Result<String, CliError>;

/// File names used inside a pipeline output directory.
pub mod artifacts {
    pub const CONFIG: &str = "config.json";
    pub const IR: &str = "ir.wav";
    pub const T60_X: &str = "t60_x.csv";
    pub const T60_Y: &str = "t60_y.csv";
    pub const IR_SHAPED: &str = "ir_shaped.wav";
    pub const DECAY: &str = "decay.csv";
    pub const FILTERED: &str = "filtered.wav";
    pub const METRICS: &str = "metrics.json";
}

fn read_signal(path: &Path) -> Result<Signal, CliError> {
    Ok(read_wav(path)?)
}

fn read_ir(path: &Path) -> Result<ImpulseResponse, CliError> {
    Ok(ImpulseResponse::from_signal(read_signal(path)?))
}

fn write_signal(path: &Path, s: &Signal, what: &str) -> Result<(), CliError> {
    if s.samples().iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical(format!(
            "{what} contains NaN or infinite samples"
        )));
    }
    Ok(write_wav(path, s, WavFormat::Float32)?)
}

fn same_rate(a: &Signal, a_path: &Path, b: &Signal, b_path: &Path) -> Result<(), CliError> {
    if a.sample_rate() != b.sample_rate() {
        return Err(CliError::Validation(format!(
            "sample rate mismatch: {} is {} Hz, {} is {} Hz",
            a_path.display(),
            a.sample_rate(),
            b_path.display(),
            b.sample_rate()
        )));
    }
    Ok(())
}

fn warn_if_short(s: &Signal, path: &Path, cfg: &PipelineConfig) {
    if s.len() < 2 * cfg.n_dft {
        log::warn!(
            "{}: {} samples is shorter than 2 frames of {}",
            path.display(),
            s.len(),
            cfg.n_dft
        );
    }
}

/// `path` relative to `base` when it lies inside it, so that sidecars in a
/// self-contained output directory do not depend on where it was created.
fn recorded_path(path: &Path, base: &Path) -> String {
    path.strip_prefix(base)
        .unwrap_or(path)
        .to_string_lossy()
        .into_owned()
}

fn parent(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new(""))
}

pub fn chirp(layer: &ConfigLayer, out: &Path) -> CmdResult {
    let cfg = layer.resolve(None)?;
    let spec = cfg.chirp;
    let n = spec.period_len();
    if spec.is_rounded() {
        log::warn!(
            "period {} s x {} Hz is not an integer number of samples; using N = {n}",
            spec.duration,
            spec.sample_rate
        );
    }
    let x = generate_chirp(&spec)?;
    write_signal(out, &x, "chirp")?;
    Ok(format!(
        "{}: {} s, N = {n} samples per period, {} periods",
        out.display(),
        x.duration(),
        spec.periods
    ))
}

pub fn identify(x_path: &Path, y_path: &Path, layer: &ConfigLayer, out: &Path) -> CmdResult {
    let x = read_signal(x_path)?;
    let y = read_signal(y_path)?;
    same_rate(&x, x_path, &y, y_path)?;
    let cfg = layer.resolve(Some(x.sample_rate()))?;
    warn_if_short(&x, x_path, &cfg);
    let p = cfg.analysis_params()?;
    let h = estimate_ir(&x, &y, &p, cfg.epsilon_analysis)?;
    write_signal(out, &h.to_signal(), "impulse response")?;
    let base = parent(out);
    IrSidecar {
        sample_rate: cfg.sample_rate,
        n_dft: cfg.n_dft,
        n_hop: cfg.n_hop,
        epsilon: cfg.epsilon_analysis,
        created_from: CreatedFrom {
            x_path: recorded_path(x_path, base),
            y_path: recorded_path(y_path, base),
        },
        shaping: None,
    }
    .write(IrSidecar::path_for(out))?;
    Ok(format!("{}: {} taps", out.display(), h.len()))
}

pub fn t60(input: &Path, layer: &ConfigLayer, out: &Path) -> CmdResult {
    let s = read_signal(input)?;
    let cfg = layer.resolve(Some(s.sample_rate()))?;
    warn_if_short(&s, input, &cfg);
    let profile = t60_per_bin(&stft(&s, &cfg.analysis_params()?), cfg.t60_threshold)?;
    profile.write_csv(out)?;
    let censored = profile.censored().iter().filter(|c| **c).count();
    Ok(format!(
        "{}: {} bins, {censored} censored",
        out.display(),
        profile.len()
    ))
}

pub fn shape(
    ir_path: &Path,
    t60_x: &Path,
    t60_y: &Path,
    layer: &ConfigLayer,
    out: &Path,
    decay_out: &Path,
) -> CmdResult {
    let h = read_ir(ir_path)?;
    let cfg = layer.resolve(Some(h.sample_rate()))?;
    let p = cfg.analysis_params()?;
    let px = T60Profile::read_csv(t60_x, p, cfg.t60_threshold)?;
    let py = T60Profile::read_csv(t60_y, p, cfg.t60_threshold)?;
    let rho = t60_ratio(&py, &px, cfg.rho_floor)?;
    let d = build_decay_matrix(&rho, &p, shaping_frame_count(h.len(), &p))?;
    let shaped = apply_global_decay(&shape_ir(&h, &d, &p)?, cfg.dk)?;
    write_signal(out, &shaped.to_signal(), "shaped impulse response")?;
    d.write_csv(decay_out)?;

    let source = IrSidecar::read(IrSidecar::path_for(ir_path)).ok();
    let base = parent(out);
    IrSidecar {
        sample_rate: cfg.sample_rate,
        n_dft: cfg.n_dft,
        n_hop: cfg.n_hop,
        epsilon: source.as_ref().map_or(cfg.epsilon_analysis, |s| s.epsilon),
        created_from: source.map_or(
            CreatedFrom {
                x_path: String::new(),
                y_path: String::new(),
            },
            |s| s.created_from,
        ),
        shaping: Some(ShapingRecord {
            ir_path: recorded_path(ir_path, base),
            rho_floor: cfg.rho_floor,
            dk: cfg.dk,
        }),
    }
    .write(IrSidecar::path_for(out))?;
    Ok(format!(
        "{}: {} taps; {}: {} x {} decay matrix",
        out.display(),
        shaped.len(),
        decay_out.display(),
        d.matrix().n_bins(),
        d.n_frames()
    ))
}

pub fn filter(z_path: &Path, ir_path: &Path, layer: &ConfigLayer, out: &Path) -> CmdResult {
    let z = read_signal(z_path)?;
    let h = read_ir(ir_path)?;
    same_rate(&z, z_path, &h.to_signal(), ir_path)?;
    let cfg = layer.resolve(Some(z.sample_rate()))?;
    let fb = build_filterbank(&h, cfg.epsilon_filter)?;
    let filtered = filter_signal(&z, &fb)?;
    write_signal(out, &filtered, "filtered signal")?;
    Ok(format!(
        "{}: {} samples, frame {}",
        out.display(),
        filtered.len(),
        fb.params().n_dft()
    ))
}

pub fn metrics(
    before_path: &Path,
    after_path: &Path,
    ir_before: Option<&Path>,
    ir_after: Option<&Path>,
    layer: &ConfigLayer,
    out: &Path,
) -> CmdResult {
    let before = read_signal(before_path)?;
    let after = read_signal(after_path)?;
    same_rate(&before, before_path, &after, after_path)?;
    let cfg = layer.resolve(Some(before.sample_rate()))?;
    let p = cfg.analysis_params()?;
    let d50_of = |path: Option<&Path>| -> Result<Option<f64>, CliError> {
        path.map(|p| Ok(d50(&read_ir(p)?)?)).transpose()
    };
    let report = MetricsReport {
        lpa_db: lpa(&before, &after)?,
        d50_percent_before: d50_of(ir_before)?,
        d50_percent_after: d50_of(ir_after)?,
        t60_broadband_before_s: t60_broadband(&before, &p, cfg.t60_threshold)?.seconds,
        t60_broadband_after_s: t60_broadband(&after, &p, cfg.t60_threshold)?.seconds,
        stats_before: signal_stats(&before, DEFAULT_RMS_WINDOW)?,
        stats_after: signal_stats(&after, DEFAULT_RMS_WINDOW)?,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    std::fs::write(out, text).map_err(|e| CliError::io(out, e))?;
    Ok(format!("{}: LPA {:.2} dB", out.display(), report.lpa_db))
}

pub fn simulate(dry_path: &Path, channel: &Path, out_wet: &Path, out_ir: &Path) -> CmdResult {
    let dry = read_signal(dry_path)?;
    let spec = ChannelSpec::read(channel)?;
    let (wet, h) = simulate::simulate(&dry, &spec)?;
    write_signal(out_wet, &wet, "wet signal")?;
    write_signal(out_ir, &h.to_signal(), "channel impulse response")?;
    Ok(format!(
        "{}: {} samples; {}: {} taps",
        out_wet.display(),
        wet.len(),
        out_ir.display(),
        h.len()
    ))
}

/// identify -> t60 (x and y) -> shape -> filter -> metrics, every stage
/// reading the files written by the previous one.
pub fn pipeline(x: &Path, y: &Path, z: &Path, layer: &ConfigLayer, outdir: &Path) -> CmdResult {
    std::fs::create_dir_all(outdir).map_err(|e| CliError::io(outdir, e))?;
    let rate = read_signal(x)?.sample_rate();
    let cfg = layer.resolve(Some(rate))?;
    let at = |name: &str| -> PathBuf { outdir.join(name) };
    cfg.write(&at(artifacts::CONFIG))?;
    let layer = ConfigLayer::from(cfg);

    let log = [
        identify(x, y, &layer, &at(artifacts::IR))?,
        t60(x, &layer, &at(artifacts::T60_X))?,
        t60(y, &layer, &at(artifacts::T60_Y))?,
        shape(
            &at(artifacts::IR),
            &at(artifacts::T60_X),
            &at(artifacts::T60_Y),
            &layer,
            &at(artifacts::IR_SHAPED),
            &at(artifacts::DECAY),
        )?,
        filter(
            z,
            &at(artifacts::IR_SHAPED),
            &layer,
            &at(artifacts::FILTERED),
        )?,
        metrics(
            z,
            &at(artifacts::FILTERED),
            Some(&at(artifacts::IR)),
            Some(&at(artifacts::IR_SHAPED)),
            &layer,
            &at(artifacts::METRICS),
        )?,
    ];
    Ok(log.join("\n"))
}
