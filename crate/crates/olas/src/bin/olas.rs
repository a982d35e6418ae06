use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use olas::config::{AlgorithmId, RunConfig};
use olas::error::{HarnessError, Result};
use olas::olas_core::shiftsim::ShiftKind;
use olas::output::write_outputs;
use olas::verify::{run_suite, write_reports_csv, SUITES};
use olas::run_seeds;

#[derive(Parser)]
#[command(name = "olas", version, about = "Online label shift experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// fix, fth, ftfwh, uogd, atlas or atlas_ada.
        #[arg(long)]
        algo: Option<String>,
        /// lin, squ, sin or ber.
        #[arg(long)]
        shift: Option<String>,
    },
    /// Run one of the verification suites.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for `verify_<suite>.csv`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the benchmark config for an algorithm and shift.
    Template {
        #[arg(long, default_value = "atlas")]
        algo: String,
        #[arg(long, default_value = "squ")]
        shift: String,
    },
}

fn parse_algo(s: &str) -> Result<AlgorithmId> {
    AlgorithmId::from_str(s).map_err(|_| HarnessError::Config(format!("unknown algorithm `{s}`")))
}

fn parse_shift(s: &str) -> Result<ShiftKind> {
    ShiftKind::from_str(s).map_err(|_| HarnessError::Config(format!("unknown shift `{s}`")))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            algo,
            shift,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(a) = algo {
                cfg.algorithm.name = parse_algo(&a)?;
            }
            if let Some(s) = shift {
                cfg.shift.kind = parse_shift(&s)?.name().into();
            }
            cfg.validate()?;
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("olas-out"));
            let results = run_seeds(&cfg)?;
            for r in &results {
                let s = &r.summary;
                println!(
                    "seed {} {} on {}: average error {:.4}, V_T {:.2}, {:.1}s",
                    s.seed, s.algorithm, s.shift, s.final_avg_error, s.variation, s.wall_time_secs
                );
                if s.meta_regret_within_bound() == Some(false) {
                    eprintln!("warning: seed {} exceeds the meta-regret bound", s.seed);
                }
            }
            for p in write_outputs(&results, &cfg, &dir)? {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
        Command::Verify { suite, seed, out } => {
            let reports = run_suite(&suite, seed)?;
            std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
            let path = out.join(format!("verify_{suite}.csv"));
            write_reports_csv(&path, &reports)?;
            let mut ok = true;
            for r in &reports {
                println!("{}", r.summary());
                ok &= r.passed != Some(false);
            }
            println!("wrote {}", path.display());
            Ok(ok)
        }
        Command::Template { algo, shift } => {
            let cfg = RunConfig::benchmark(parse_algo(&algo)?, parse_shift(&shift)?);
            print!("{}", cfg.to_toml_string()?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Verify { suite, .. } = &cli.command {
        if !SUITES.contains(&suite.as_str()) {
            eprintln!("error: unknown suite `{suite}`; expected one of {}", SUITES.join(", "));
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
