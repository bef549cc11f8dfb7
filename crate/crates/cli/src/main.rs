//! `sattf`: simulate satellite frequency-transfer links and reduce the
//! resulting clock comparisons.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 ambiguous stitch.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sattf::Error;

use commands::Period;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "sattf", version, about = "Two-way carrier-phase and IPPP frequency transfer toolkit")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulate clocks, the four TWCP phases, truth and GNSS solutions.
    Simulate {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Write the synthetic optical-clock session (sr, yb, link) instead.
        #[arg(long)]
        ratio_session: bool,
        /// Number of session days when writing the ratio session.
        #[arg(long, default_value_t = 3)]
        ratio_days: usize,
    },
    /// Combine four phases into a clock difference.
    Twcp {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Join daily IPPP batches on the narrowlane integer grid.
    Stitch {
        /// Batch CSVs in time order; `<stem>.resets.csv` sidecars are picked up.
        #[arg(required = true)]
        batches: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Stability curves, double differences and gradient rows.
    #[command(alias = "analyze")]
    Stats {
        /// Clock-difference CSVs; each pair is double-differenced in the given order.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        /// Gradient period as START_MJD:END_MJD (repeatable).
        #[arg(long = "period")]
        periods: Vec<Period>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Frequency ratio, daily statistics and uncertainty budget.
    Ratio {
        /// Directory holding sr.csv, yb.csv and link.csv.
        #[arg(long)]
        session: Option<PathBuf>,
        #[arg(long)]
        sr: Option<PathBuf>,
        #[arg(long)]
        yb: Option<PathBuf>,
        #[arg(long)]
        link: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Convert an IONEX file to CSV.
    IonexDump {
        #[arg(long)]
        input: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also re-serialize the maps as IONEX.
        #[arg(long)]
        ionex_out: Option<PathBuf>,
    },
    /// Print the effective configuration with every key documented.
    Config,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => 1,
        Error::AmbiguousStitch { .. } => 3,
        _ => 2,
    }
}

fn session_file(dir: &Option<PathBuf>, explicit: &Option<PathBuf>, name: &str) -> Result<PathBuf, Error> {
    match (explicit, dir) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(d)) => Ok(d.join(format!("{name}.csv"))),
        (None, None) => Err(Error::InvalidConfig(format!("ratio needs --session or --{name}"))),
    }
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut overrides = cli.set.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.cmd {
        Cmd::Simulate {
            out,
            ratio_session,
            ratio_days,
        } => {
            let files = if ratio_session {
                commands::simulate_ratio_session(&cfg, &out, ratio_days)?
            } else {
                commands::simulate(&cfg, &out)?
            };
            report(&files);
        }
        Cmd::Twcp { input, out } => report(&commands::twcp(&cfg, &input, &out)?),
        Cmd::Stitch { batches, out } => report(&commands::stitch_cmd(&cfg, &batches, &out)?),
        Cmd::Stats { inputs, periods, out } => {
            let (files, table) = commands::analyze(&cfg, &inputs, &periods, &out)?;
            report(&files);
            print!("{table}");
        }
        Cmd::Ratio {
            session,
            sr,
            yb,
            link,
            out,
        } => {
            let sr = session_file(&session, &sr, "sr")?;
            let yb = session_file(&session, &yb, "yb")?;
            let link = session_file(&session, &link, "link")?;
            let (files, text) = commands::ratio(&cfg, &sr, &yb, &link, &out)?;
            report(&files);
            print!("{text}");
        }
        Cmd::IonexDump { input, out, ionex_out } => {
            commands::ionex_dump(&input, out.as_deref(), ionex_out.as_deref())?
        }
        Cmd::Config => print!("{}", cfg.render()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sattf: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
