use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dereverb_cli::commands;
use dereverb_cli::config::{ChirpLayer, ConfigLayer};
use dereverb_cli::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "dereverb",
    version,
    about = "Single-channel dereverberation toolkit"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON configuration file; flags take precedence over its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Sample rate in Hz (defaults to the input rate, or 48000)
    #[arg(long, global = true)]
    fs: Option<f64>,
    /// Frame length in samples (default 5 * fs)
    #[arg(long, global = true)]
    n_dft: Option<usize>,
    /// Hop in samples (default n_dft / 2)
    #[arg(long, global = true)]
    n_hop: Option<usize>,
    /// Magnitude floor for cepstral identification
    #[arg(long, global = true)]
    eps_analysis: Option<f64>,
    /// Magnitude floor for the inverse filter denominator
    #[arg(long, global = true)]
    eps_filter: Option<f64>,
    /// Tail-energy threshold for T60 estimation
    #[arg(long, global = true)]
    t60_threshold: Option<f64>,
    /// Floor for T60 values and ratios
    #[arg(long, global = true)]
    rho_floor: Option<f64>,
    /// Global per-sample decay applied to the shaped response
    #[arg(long, global = true)]
    dk: Option<f64>,
    /// Output file (output directory for `pipeline`)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Sweep start frequency in Hz
    #[arg(long, global = true)]
    f0: Option<f64>,
    /// Sweep end frequency in Hz (default fs / 2)
    #[arg(long, global = true)]
    f1: Option<f64>,
    /// Sweep period in seconds (default n_dft / fs)
    #[arg(long, global = true)]
    duration: Option<f64>,
    /// Number of sweep periods
    #[arg(long, global = true)]
    periods: Option<usize>,
}

impl Global {
    fn layer(&self) -> Result<ConfigLayer, CliError> {
        let flags = ConfigLayer {
            sample_rate: self.fs,
            chirp: ChirpLayer {
                f0: self.f0,
                f1: self.f1,
                duration: self.duration,
                periods: self.periods,
                sample_rate: None,
            },
            n_dft: self.n_dft,
            n_hop: self.n_hop,
            epsilon_analysis: self.eps_analysis,
            epsilon_filter: self.eps_filter,
            t60_threshold: self.t60_threshold,
            rho_floor: self.rho_floor,
            dk: self.dk,
        };
        let file = match &self.config {
            Some(p) => ConfigLayer::read(p)?,
            None => ConfigLayer::default(),
        };
        let mut merged = flags.over(file);
        // A sample rate given on the command line also governs the sweep.
        if self.fs.is_some() {
            merged.chirp.sample_rate = self.fs;
        }
        Ok(merged)
    }

    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the periodic calibration sweep
    Chirp,
    /// Estimate the impulse response from the sweep and its recording
    Identify { x: PathBuf, y: PathBuf },
    /// Per-bin T60 of a recording, as CSV
    T60 { input: PathBuf },
    /// Fade an impulse response per bin using two T60 profiles
    Shape {
        ir: PathBuf,
        t60_x: PathBuf,
        t60_y: PathBuf,
        /// Decay matrix CSV (default: next to the output, `<stem>_decay.csv`)
        #[arg(long, value_name = "PATH")]
        decay_out: Option<PathBuf>,
    },
    /// Inverse-filter a recording with an impulse response
    Filter { z: PathBuf, ir: PathBuf },
    /// Compare a recording before and after filtering
    Metrics {
        before: PathBuf,
        after: PathBuf,
        #[arg(long, value_name = "PATH")]
        ir_before: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        ir_after: Option<PathBuf>,
    },
    /// Pass a dry signal through a synthetic channel described in JSON
    Simulate {
        dry: PathBuf,
        channel: PathBuf,
        /// Channel impulse response (default: next to the output, `<stem>_ir.wav`)
        #[arg(long, value_name = "PATH")]
        ir_out: Option<PathBuf>,
    },
    /// Run identify, t60, shape, filter and metrics into one directory
    Pipeline { x: PathBuf, y: PathBuf, z: PathBuf },
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn run(cli: Cli) -> Result<String, CliError> {
    let layer = cli.global.layer()?;
    let g = &cli.global;
    match cli.command {
        Command::Chirp => commands::chirp(&layer, &g.out_or("chirp.wav")),
        Command::Identify { x, y } => commands::identify(&x, &y, &layer, &g.out_or("ir.wav")),
        Command::T60 { input } => commands::t60(&input, &layer, &g.out_or("t60.csv")),
        Command::Shape {
            ir,
            t60_x,
            t60_y,
            decay_out,
        } => {
            let out = g.out_or("ir_shaped.wav");
            let decay = decay_out.unwrap_or_else(|| sibling(&out, "_decay.csv"));
            commands::shape(&ir, &t60_x, &t60_y, &layer, &out, &decay)
        }
        Command::Filter { z, ir } => commands::filter(&z, &ir, &layer, &g.out_or("filtered.wav")),
        Command::Metrics {
            before,
            after,
            ir_before,
            ir_after,
        } => commands::metrics(
            &before,
            &after,
            ir_before.as_deref(),
            ir_after.as_deref(),
            &layer,
            &g.out_or("metrics.json"),
        ),
        Command::Simulate {
            dry,
            channel,
            ir_out,
        } => {
            let out = g.out_or("wet.wav");
            let ir = ir_out.unwrap_or_else(|| sibling(&out, "_ir.wav"));
            commands::simulate(&dry, &channel, &out, &ir)
        }
        Command::Pipeline { x, y, z } => commands::pipeline(&x, &y, &z, &layer, &g.out_or("out")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
