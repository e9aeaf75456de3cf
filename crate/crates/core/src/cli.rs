//! Command-line front end: `solve`, `gen` and `verify`.
//!
//! Exit codes: 0 on success (a converged solve, a written instance, or an
//! all-pass verification), 2 when a solve runs out of iterations, 1 on any
//! error. Output files are written only after the run has finished, so a
//! failing command leaves no partial outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{validate_config, Relaxation, Sigma, SolverConfig};
use crate::error::{Error, Result};
use crate::oracles::{run_suite, Suite, SuiteReport};
use crate::perturbation::PerturbationPolicy;
use crate::problems::{
    gen_disc_intersection, gen_l1_constrained, gen_linear_feasibility, load_problem, save_problem,
};
use crate::solver::{run, Problem, RunSetup, StoppingRule};
use crate::trace::{RunResult, Status};
use crate::weights::{Regime, WeightSchedule};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITERATIONS: i32 = 2;

pub const TRACE_HEADER: &str = "k,max_residual,perturbation_norm,lambda,dist_to_witness,dist_from_start";

fn default_tau() -> f64 {
    0.05
}

fn default_lambda() -> Relaxation {
    Relaxation::Constant(1.0)
}

fn default_policy() -> PerturbationPolicy {
    PerturbationPolicy::Zero
}

fn default_max_iterations() -> usize {
    100_000
}

fn default_tolerance() -> f64 {
    1e-8
}

/// The solve configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "default_tau")]
    pub tau1: f64,
    #[serde(default = "default_tau")]
    pub tau2: f64,
    #[serde(default = "default_lambda")]
    pub lambda: Relaxation,
    /// Replaces the problem's own `sigma` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_override: Option<Sigma>,
    pub schedule: Regime,
    #[serde(default = "default_policy")]
    pub policy: PerturbationPolicy,
    /// Checked in order; empty means `residual_below` at `residual_tolerance`.
    #[serde(default)]
    pub stopping: Vec<StoppingRule>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub residual_tolerance: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ConfigFile {
    pub fn solver_config(&self, problem: &Problem) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            tau1: self.tau1,
            tau2: self.tau2,
            lambda: self.lambda.clone(),
            sigma: self.sigma_override.unwrap_or(problem.sigma()),
            max_iterations: self.max_iterations,
            residual_tolerance: self.residual_tolerance,
            seed: self.seed,
            keep_iterates: false,
        };
        validate_config(&cfg)?;
        Ok(cfg)
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigFile> {
    parse_config(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub status: Status,
    pub iterations_used: usize,
    pub final_max_residual: f64,
    pub final_point: Vec<f64>,
    pub config_echo: ConfigFile,
}

fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// The trace as CSV: one row per iterate, 17 significant digits, `\n` endings.
pub fn trace_csv(result: &RunResult) -> String {
    let mut out = String::with_capacity(64 * (result.trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &result.trace {
        let witness = r.distance_to_witness.map(csv_float).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            csv_float(r.max_residual),
            csv_float(r.perturbation_norm),
            csv_float(r.lambda),
            witness,
            csv_float(r.distance_from_start)
        )
        .expect("writing to a String");
    }
    out
}

pub struct SolveOutput {
    pub result: RunResult,
    pub trace_csv: String,
    pub summary_json: String,
}

/// Loads, validates and runs a solve without touching the output paths.
pub fn solve(problem_path: &Path, config_path: &Path, seed: Option<u64>) -> Result<SolveOutput> {
    let problem = load_problem(problem_path)?;
    let mut file = load_config(config_path)?;
    if let Some(seed) = seed {
        file.seed = seed;
    }
    file.policy.validate()?;
    let config = file.solver_config(&problem)?;
    let schedule = WeightSchedule::new(file.schedule.clone(), problem.m())?;
    let setup = RunSetup {
        config: &config,
        schedule: &schedule,
        policy: &file.policy,
    };
    let result = run(&problem, &setup, &file.stopping)?;
    let summary = Summary {
        status: result.status,
        iterations_used: result.iterations_used,
        final_max_residual: result.final_max_residual(),
        final_point: result.final_point.as_slice().to_vec(),
        config_echo: file,
    };
    let mut summary_json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::InvalidConfig(format!("cannot encode summary: {e}")))?;
    summary_json.push('\n');
    Ok(SolveOutput {
        trace_csv: trace_csv(&result),
        result,
        summary_json,
    })
}

pub fn cmd_solve(
    problem_path: &Path,
    config_path: &Path,
    trace_path: &Path,
    summary_path: &Path,
    seed: Option<u64>,
) -> Result<i32> {
    let out = solve(problem_path, config_path, seed)?;
    fs::write(trace_path, &out.trace_csv)?;
    fs::write(summary_path, &out.summary_json)?;
    println!(
        "{}: {} iterations, final max residual {:e}",
        serde_json::to_value(out.result.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        out.result.iterations_used,
        out.result.final_max_residual()
    );
    Ok(if out.result.status.is_converged() {
        EXIT_OK
    } else {
        EXIT_MAX_ITERATIONS
    })
}

#[derive(Debug, Clone, Subcommand)]
pub enum GenKind {
    /// Random halfspaces around a drawn interior point.
    Linear {
        #[arg(long, default_value_t = 20)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 5.0)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Overlapping discs in the plane.
    Discs {
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 0.5)]
        overlap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Underdetermined linear equations inside an l1 ball, with an l1 cost.
    L1 {
        #[arg(long, default_value_t = 5)]
        s: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn cmd_gen(kind: &GenKind) -> Result<i32> {
    let (problem, out) = match kind {
        GenKind::Linear { m, n, radius, seed, out } => {
            (gen_linear_feasibility(*seed, *m, *n, *radius)?, out)
        }
        GenKind::Discs { m, overlap, seed, out } => (gen_disc_intersection(*seed, *m, *overlap)?, out),
        GenKind::L1 { s, n, eps, seed, out } => (gen_l1_constrained(*seed, *s, *n, *eps)?, out),
    };
    save_problem(&problem, out)?;
    Ok(EXIT_OK)
}

/// Trial counts used when `--trials` is not given.
pub fn default_trials(suite: Suite) -> usize {
    match suite {
        Suite::Fejer | Suite::Cutter | Suite::Budget => 1000,
        Suite::Convergence => 10,
        Suite::Qhat => 1,
    }
}

pub fn format_report(report: &SuiteReport) -> String {
    let mut out = format!(
        "{}: {} passed, {} failed of {} trials; worst violation {:e}\n",
        serde_json::to_value(report.suite)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        report.passed,
        report.failed,
        report.trials,
        report.worst_violation
    );
    let coverage: Vec<String> = report.coverage.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(out, "coverage: {}", coverage.join(" ")).expect("writing to a String");
    if let Some(first) = &report.first_failure {
        writeln!(out, "first failure: {first}").expect("writing to a String");
    }
    out
}

pub fn cmd_verify(suite: Suite, trials: Option<usize>, seed: u64, json: bool) -> Result<i32> {
    let trials = trials.unwrap_or_else(|| default_trials(suite));
    let report = run_suite(suite, trials, seed);
    if json {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::InvalidConfig(format!("cannot encode report: {e}")))?;
        println!("{text}");
    } else {
        print!("{}", format_report(&report));
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_ERROR })
}

#[derive(Debug, Parser)]
#[command(name = "gbip", version, about = "Block-iterative projections for common fixed points of cutters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the solver on a problem file.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        summary: PathBuf,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a generated problem instance.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Run a randomized property suite: fejer, cutter, budget, convergence or qhat.
    Verify {
        suite: Suite,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve {
            problem,
            config,
            trace,
            summary,
            seed,
        } => cmd_solve(&problem, &config, &trace, &summary, seed),
        Command::Gen { kind } => cmd_gen(&kind),
        Command::Verify {
            suite,
            trials,
            seed,
            json,
        } => cmd_verify(suite, trials, seed, json),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_minimal_and_full_forms() {
        let c = parse_config(r#"{"schedule":{"regime":"sequential_cyclic"}}"#).unwrap();
        assert_eq!(c.lambda, Relaxation::Constant(1.0));
        assert!(c.stopping.is_empty());
        let c = parse_config(
            r#"{"tau1":0.1,"tau2":0.1,"lambda":{"list":[0.5,1.5]},"sigma_override":"infinity",
                "schedule":{"regime":"block_classical","partition":[[1,2],[3]],"intra":"uniform"},
                "policy":{"policy":"random","rho":0.5},
                "stopping":[{"rule":"residual_below","tol":1e-6},{"rule":"max_iterations"}],
                "max_iterations":50,"seed":9}"#,
        )
        .unwrap();
        assert_eq!(c.sigma_override, Some(Sigma::Infinite));
        assert_eq!(c.lambda.at(1), 1.5);
        assert_eq!(c.stopping.len(), 2);
    }

    #[test]
    fn config_errors_carry_a_path() {
        let err = parse_config(r#"{"schedule":{"regime":"sequential_cyclic"},"tau1":"x"}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { ref path, .. } if path == "tau1"), "{err:?}");
        assert!(parse_config(r#"{"schedule":{"regime":"cyclic"}}"#).is_err());
        assert!(parse_config(r#"{"schedule":{"regime":"sequential_cyclic"},"bogus":1}"#).is_err());
    }

    #[test]
    fn csv_floats_have_17_significant_digits() {
        assert_eq!(csv_float(0.1), "1.0000000000000001e-1");
        assert_eq!(csv_float(0.0), "0.0000000000000000e0");
        assert_eq!(csv_float(1.0).parse::<f64>().unwrap(), 1.0);
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        assert_eq!(main_with_args(["gbip", "verify", "nope"]), EXIT_ERROR);
    }
}
