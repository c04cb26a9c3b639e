use std::path::PathBuf;
use std::process::ExitCode;

use biphoton::scenario::{run_scenario, validate_config, Command, OutputFormat};
use biphoton::Error;
use clap::{Parser, Subcommand, ValueEnum};

/// Thread-count override for the internal worker pool.
const THREADS_ENV: &str = "BIPHOTON_THREADS";

#[derive(Parser)]
#[command(
    name = "biphoton",
    version,
    about = "Two-photon spectral amplitude, filtering and HOM visibility"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; overrides `[output] format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Normalized amplitude on the zoom window.
    Tpsa(Common),
    /// Marginal spectra, raw and convolved with the spectrometer.
    Marginals(Common),
    /// Conditional spectra at degeneracy.
    Conditionals(Common),
    /// Widths, Fedorov ratio and Schmidt number.
    Report(Common),
    /// Transmission spectrum of the configured filter.
    Fig4(Common),
    /// Coincidences versus half-wave plate angle.
    HwpCurve(Common),
    /// Visibility versus filter bandwidth.
    Sweep(Common),
    /// Check a config and report every violation.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Structured,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Structured => OutputFormat::Structured,
            Format::Both => OutputFormat::Both,
        }
    }
}

fn report(err: &Error) -> ExitCode {
    match err {
        Error::Invalid(list) => {
            eprintln!("error: {} config violation(s)", list.len());
            for v in list {
                eprintln!("  {}: {}", v.field, v.message);
            }
        }
        other => eprintln!("error: {other}"),
    }
    ExitCode::from(err.class().exit_code() as u8)
}

fn init_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("{THREADS_ENV}: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return report(&e);
    }
    let (command, common) = match cli.command {
        Cmd::Validate { config } => {
            return match validate_config(&config) {
                Ok(_) => {
                    println!("{}: ok", config.display());
                    ExitCode::SUCCESS
                }
                Err(e) => report(&e),
            };
        }
        Cmd::Tpsa(c) => (Command::Tpsa, c),
        Cmd::Marginals(c) => (Command::Marginals, c),
        Cmd::Conditionals(c) => (Command::Conditionals, c),
        Cmd::Report(c) => (Command::Report, c),
        Cmd::Fig4(c) => (Command::Fig4, c),
        Cmd::HwpCurve(c) => (Command::HwpCurve, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    let mut cfg = match validate_config(&common.config) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    if let Some(f) = common.format {
        cfg.format = f.into();
    }
    match run_scenario(&cfg, command, common.out.as_deref()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}
