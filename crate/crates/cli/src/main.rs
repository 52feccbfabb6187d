//! `stqos`: evaluate statistical QoS bounds and Monte Carlo estimates for a
//! scenario file, at a single point or along its sweep axis.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use stqos::scenario::{Format, Scenario};
use stqos::simkit::simulate_aoi_queue;
use stqos::sweep::{evaluate, run_sweep, write_rows, Outputs, Row};
use stqos::Error;

#[derive(Parser)]
#[command(
    name = "stqos",
    version,
    about = "Peak-AoI, delay, decoding-error and error-exponent analysis for HARQ-IR satellite downlinks"
)]
struct Cli {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Master seed, overriding the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format, overriding the scenario.
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    /// Output file, overriding the scenario; stdout when neither is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// First-round decoding error probability (closed form and high-SNR form).
    ErrorProb,
    /// Peak-AoI violation bound and M/G/1 mean peak AoI.
    AoiBound,
    /// Delay violation bound.
    DelayBound,
    /// Error-rate exponent θ_error (exact and Jensen forms).
    Exponent,
    /// Monte Carlo estimates of ε, peak-AoI and delay violation.
    Simulate {
        /// Also write the per-packet trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate every point of the scenario's sweep axis.
    Sweep,
}

/// Process exit status per error category; 2 is left to argument parsing.
fn exit_code(code: &str) -> u8 {
    match code {
        "config" => 3,
        "domain" => 4,
        "unsupported" => 5,
        "truncation" => 6,
        "quadrature" => 7,
        "stability" => 8,
        "empty" => 9,
        "io" => 10,
        _ => 11,
    }
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(err.code()))
}

fn load(cli: &Cli) -> Result<Scenario, Error> {
    let mut s = match &cli.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn write_out(rows: &[Row], format: Format, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => stqos::sweep::emit(rows, format, path),
        None => {
            let mut buf = Vec::new();
            write_rows(rows, format, &mut buf)?;
            std::io::stdout().write_all(&buf).map_err(|e| Error::Io {
                path: "stdout".into(),
                detail: e.to_string(),
            })
        }
    }
}

fn run(cli: &Cli) -> Result<Option<String>, Error> {
    let s = load(cli)?;
    let format = match cli.format {
        Some(OutFormat::Csv) => Format::Csv,
        Some(OutFormat::Json) => Format::Json,
        None => s.output.format,
    };
    let out = cli.out.clone().or_else(|| s.output.path.clone().map(PathBuf::from));
    let single = |want: Outputs| vec![evaluate(&s, None, None, want)];
    let rows = match &cli.command {
        Command::ErrorProb => single(Outputs {
            error: true,
            ..Outputs::NONE
        }),
        Command::AoiBound => single(Outputs {
            aoi: true,
            ..Outputs::NONE
        }),
        Command::DelayBound => single(Outputs {
            delay: true,
            ..Outputs::NONE
        }),
        Command::Exponent => single(Outputs {
            exponent: true,
            ..Outputs::NONE
        }),
        Command::Simulate { trace } => {
            if let Some(path) = trace {
                let hcfg = s.harq_config();
                let t = simulate_aoi_queue(s.traffic.lambda_s, &s.sampler()?, &hcfg, &s.sim_config())?;
                let file = std::fs::File::create(path).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    detail: e.to_string(),
                })?;
                t.write_csv(file)?;
            }
            single(Outputs {
                simulate: true,
                ..Outputs::NONE
            })
        }
        Command::Sweep => run_sweep(&s)?,
    };
    write_out(&rows, format, out.as_ref())?;
    // a single-point command fails when any of its cells failed; a sweep keeps per-point failures in-row
    if matches!(cli.command, Command::Sweep) {
        return Ok(None);
    }
    Ok(rows.into_iter().map(|r| r.errors).find(|e| !e.is_empty()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(errors)) => {
            eprintln!("error: {errors}");
            let code = errors.split(';').next().and_then(|c| c.split(':').nth(1)).unwrap_or("");
            ExitCode::from(exit_code(code))
        }
        Err(e) => fail(&e),
    }
}
