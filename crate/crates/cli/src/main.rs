use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nhmc_cli::config::ResultsFormat;
use nhmc_cli::error::EXIT_CODES;
use nhmc_cli::format::sig9;
use nhmc_cli::runner::{self, Overrides};
use nhmc_cli::{matrix_file, CliError};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (config schema 1)");

/// Delayed-window averages of nonhomogeneous Markov chains.
#[derive(Debug, Parser)]
#[command(name = "nhmc", version = VERSION, after_help = EXIT_CODES)]
struct Cli {
    /// Use this single seed instead of the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write outputs here instead of `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Results format for `run`; printed format for `counterexample` and `stationary`.
    #[arg(long, global = true, value_enum)]
    format: Option<ResultsFormat>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate every (n, seed) window and write results, conditions and manifest.
    Run { config: PathBuf },
    /// Evaluate the hypothesis checks only.
    Check { config: PathBuf },
    /// Windowed vs prefix deviation of the built-in two-state counterexample.
    Counterexample {
        #[arg(long, default_value_t = 20)]
        n_max: u64,
    },
    /// Stationary distribution and entropy rate of a matrix file.
    Stationary {
        matrix: PathBuf,
        /// Powers averaged in the Cesàro cross-check.
        #[arg(long, default_value_t = 10_000)]
        cesaro_m: u64,
        /// Also print the entropy rate in bits.
        #[arg(long)]
        bits: bool,
    },
}

fn json_out(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        out_dir: cli.out_dir,
        format: cli.format,
    };
    let json = cli.format == Some(ResultsFormat::Json);
    match cli.command {
        Command::Run { config } => {
            let config = runner::apply_overrides(&runner::load_config(&config)?, &overrides)?;
            let summary = runner::run(&config, cli.jobs)?;
            let mut text = format!("{} records\n", summary.records.len());
            for f in &summary.files {
                text += &format!("wrote {}\n", f.display());
            }
            Ok(text)
        }
        Command::Check { config } => {
            let config = runner::apply_overrides(&runner::load_config(&config)?, &overrides)?;
            let summary = runner::check(&config)?;
            let mut text = String::new();
            for r in &summary.reports {
                let last = r.values.last().copied().unwrap_or(f64::NAN);
                text += &format!("{:?}: {:?} (last value {})\n", r.condition, r.verdict, sig9(last));
            }
            for f in &summary.files {
                text += &format!("wrote {}\n", f.display());
            }
            Ok(text)
        }
        Command::Counterexample { n_max } => {
            let rows = runner::counterexample_table(n_max)?;
            if json {
                return Ok(json_out(&rows));
            }
            let mut text = String::from("n,a_n,phi_n,windowed_D,prefix_end,prefix_D\n");
            for r in rows {
                text += &format!(
                    "{},{},{},{},{},{}\n",
                    r.n,
                    r.a_n,
                    r.phi_n,
                    sig9(r.windowed),
                    r.prefix_end,
                    sig9(r.prefix)
                );
            }
            Ok(text)
        }
        Command::Stationary { matrix, cesaro_m, bits } => {
            let text = std::fs::read_to_string(&matrix).map_err(|e| CliError::Io {
                path: matrix.clone(),
                source: e,
            })?;
            let p =
                matrix_file::parse_matrix(&text).map_err(|e| CliError::Usage(format!("{}: {e}", matrix.display())))?;
            let report = runner::stationary_report(&p, cesaro_m)?;
            if json {
                return Ok(json_out(&report));
            }
            let join = |v: &[f64]| v.iter().map(|&x| sig9(x)).collect::<Vec<_>>().join(" ");
            let mut out = format!("pi: {}\n", join(&report.pi));
            out += &format!("balance residual: {}\n", sig9(report.balance_residual));
            out += &format!("entropy rate: {} nats\n", sig9(report.entropy_rate_nats));
            if bits {
                out += &format!("entropy rate: {} bits\n", sig9(report.entropy_rate_bits));
            }
            out += &format!("cesaro average of {} powers:\n", report.cesaro_m);
            for row in &report.cesaro_rows {
                out += &format!("  {}\n", join(row));
            }
            out += &format!("max |cesaro - pi|: {}\n", sig9(report.cesaro_max_gap));
            Ok(out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
