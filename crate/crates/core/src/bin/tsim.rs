use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsim::cli::{self, Overrides, RunConfig, SweepOptions, CONFIG_ENV};
use tsim::forward::Snr;
use tsim::{Result, TsimError};

#[derive(Parser)]
#[command(name = "tsim", version, about = "Tunable 3D-SIM simulation, restoration and assessment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON); defaults to $TSIM_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the phantom and one raw acquisition.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// SNR in dB or `inf`.
        #[arg(long)]
        snr: Option<Snr>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Restore an acquisition directory with the generalized Wiener filter.
    Restore {
        /// Directory written by `simulate`.
        acquisition: PathBuf,
        /// Regularization; defaults to the value for the acquisition's SNR.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a restoration with the true volume.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        restored: PathBuf,
        /// Unclamped restoration used for the spectral-support measurement.
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Run every modulation / SNR / alpha combination of the config.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        snr: Option<Snr>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Leave `runtime_s` empty so repeated sweeps are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
}

fn load(common: &Common, overrides: Overrides) -> Result<RunConfig> {
    let path = common
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
        .ok_or_else(|| TsimError::config("config", format!("pass --config or set {CONFIG_ENV}")))?;
    let mut cfg = RunConfig::load(&path)?;
    cfg.apply(&Overrides {
        out: common.out.clone(),
        ..overrides
    });
    cfg.validate()?;
    Ok(cfg)
}

/// Prints a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn say(line: String) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, snr, seed } => {
            let cfg = load(&common, Overrides { snr, seed, ..Default::default() })?;
            let dir = cli::cmd_simulate(&cfg)?;
            say(dir.display().to_string());
        }
        Command::Restore { acquisition, alpha, out } => {
            let r = cli::cmd_restore(&acquisition, alpha, out.as_deref())?;
            say(format!("{} (alpha {}, {:.1} s)", r.restored.display(), r.log.alpha, r.log.elapsed_s));
        }
        Command::Evaluate {
            common,
            truth,
            restored,
            raw,
        } => {
            let cfg = load(&common, Overrides::default())?;
            let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
            let r = cli::cmd_evaluate_files(&truth, &restored, raw.as_deref(), &cfg, &out)?;
            for s in &r.skipped {
                eprintln!("skipped {s}: arc leaves the volume");
            }
            say(serde_json::to_string_pretty(&r.report)?);
        }
        Command::Sweep {
            common,
            workers,
            snr,
            alpha,
            seed,
            no_timing,
        } => {
            let cfg = load(&common, Overrides { snr, alpha, seed, ..Default::default() })?;
            let opts = SweepOptions {
                workers,
                record_runtime: !no_timing,
            };
            let (path, rows) = cli::cmd_sweep(&cfg, opts)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            say(format!("{} ({} rows, {failed} failed)", path.display(), rows.len()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
