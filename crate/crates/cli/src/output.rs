//! CSV, manifest and gnuplot emission.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sensor_collab::ccp::CcpConfig;
use sensor_collab::pccp::PccpConfig;

use crate::config::{ExperimentConfig, Scenario};
use crate::error::CliResult;
use crate::scenario::ScenarioOutput;

/// Version tag of the CSV headers; bumped whenever a column changes.
pub const CSV_SCHEMA: &str = "sencollab-results-v1";

pub const RESULTS_FILE: &str = "results.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const FIT_FILE: &str = "timing_fit.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const GNUPLOT_FILE: &str = "plot.gp";

#[derive(Debug, Serialize)]
struct SolverSettings {
    ccp: CcpConfig,
    pccp: PccpConfig,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    artifact: String,
    csv_schema: &'static str,
    config: &'a ExperimentConfig,
    solvers: SolverSettings,
    randomness: &'static str,
    rows: usize,
    failures: usize,
    files: Vec<String>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn gnuplot_script(config: &ExperimentConfig) -> String {
    let xlabel = match config.scenario {
        Scenario::CorrelationSweep => "rho_corr",
        Scenario::EnergySweep => "E_total",
        Scenario::RadiusSweep | Scenario::TimingSweep => "d",
        Scenario::ConvergenceTrace | Scenario::SingleSolve => "start",
    };
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    if config.scenario == Scenario::ConvergenceTrace {
        s.push_str("set xlabel 'iteration'\nset ylabel 'objective'\nplot ");
        let curves: Vec<String> = config
            .algorithms
            .iter()
            .map(|a| format!("'{TRACE_FILE}' using (stringcolumn(2) eq '{a}' ? $3 : 1/0):4 with linespoints title '{a}'"))
            .collect();
        s.push_str(&curves.join(", \\\n     "));
    } else {
        let (x, y, ylabel) = if config.scenario == Scenario::TimingSweep {
            (7, 9, "wall ms")
        } else {
            (1, 5, "MSE")
        };
        s.push_str(&format!("set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
        if config.scenario == Scenario::TimingSweep {
            s.push_str("set logscale xy\n");
        }
        s.push_str("plot ");
        let curves: Vec<String> = config
            .algorithms
            .iter()
            .map(|a| format!("'{RESULTS_FILE}' using (stringcolumn(2) eq '{a}' ? ${x} : 1/0):{y} with linespoints title '{a}'"))
            .collect();
        s.push_str(&curves.join(", \\\n     "));
    }
    s.push('\n');
    s
}

/// Write all result files into `dir` and return their paths.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, out: &ScenarioOutput) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let path = dir.join(RESULTS_FILE);
    write_csv(&path, &out.rows)?;
    files.push(path);
    if !out.traces.is_empty() {
        let path = dir.join(TRACE_FILE);
        write_csv(&path, &out.traces)?;
        files.push(path);
    }
    if !out.fits.is_empty() {
        let path = dir.join(FIT_FILE);
        write_csv(&path, &out.fits)?;
        files.push(path);
    }
    if config.gnuplot {
        let path = dir.join(GNUPLOT_FILE);
        fs::write(&path, gnuplot_script(config))?;
        files.push(path);
    }
    let mut names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    names.push(MANIFEST_FILE.to_owned());
    let manifest = Manifest {
        artifact: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        csv_schema: CSV_SCHEMA,
        config,
        solvers: SolverSettings {
            ccp: CcpConfig::default(),
            pccp: PccpConfig::default(),
        },
        randomness: "topology and gains fixed by the instance seed for every grid point; \
                     Monte Carlo trials redraw only the parameters and noises, from the same seed at every grid point",
        rows: out.rows.len(),
        failures: out.failures(),
        files: names,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    files.push(path);
    Ok(files)
}
