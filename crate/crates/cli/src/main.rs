use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sencollab_cli::{run_scenario, write_outputs, Algorithm, CliError, CliResult, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(name = "sencollab", version, about = "Sensor collaboration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario and write CSV results plus a manifest.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to one algorithm: ccp, pccp, ccp_time_invariant, pccp_time_invariant.
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Check a configuration file without solving.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn solve(
    config: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    algo: Option<String>,
    scenario: Option<String>,
    trials: Option<usize>,
) -> CliResult<usize> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.instance.seed = s;
    }
    if let Some(a) = algo {
        cfg.algorithms = vec![Algorithm::parse(&a)?];
    }
    if let Some(s) = scenario {
        cfg.scenario = Scenario::parse(&s)?;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    let dir = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `output`".into()))?;
    let result = run_scenario(&cfg);
    for path in write_outputs(&dir, &cfg, &result)? {
        println!("{}", path.display());
    }
    for f in &result.fits {
        println!("{}: wall time ~ L^{:.2} ({} points)", f.algorithm, f.exponent, f.points);
    }
    Ok(result.failures())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { config } => ExperimentConfig::load(&config).map(|_| {
            println!("ok");
            0
        }),
        Command::Solve {
            config,
            seed,
            out,
            algo,
            scenario,
            trials,
        } => solve(config, seed, out, algo, scenario, trials),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} solver run(s) did not finish cleanly; see the status column");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
