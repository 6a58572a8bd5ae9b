//! `adhdp` command-line interface.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{ExperimentConfig, PlantKind};
use super::experiment::{compare_with_lqr, run_experiment, sweep, RunRecord};
use super::output::{emit_csv, fmt_g9};
use super::plot::emit_plot;
use crate::{Error, Result};

/// Cart-pole reset perturbation used by `sweep` unless configured, in the
/// units of `initial_state` (degrees for the angle).
pub const SWEEP_PERTURBATION: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "adhdp", version, about = "ADHDP actor-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write CSV/SVG artifacts to the output directory.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Train on the linear plant and compare the frozen controller with LQR.
    CompareLqr {
        #[command(flatten)]
        common: Common,
        /// Evaluation horizon in plant steps.
        #[arg(long, default_value_t = 50)]
        horizon: usize,
    },
    /// Plot columns of a trial CSV as an SVG line chart.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        /// Comma-separated column names.
        #[arg(long, value_delimiter = ',', required = true)]
        columns: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the same configuration over many seeds and report success statistics.
    ///
    /// Cart-pole resets are perturbed by 0.05 per state component unless
    /// `init_perturbation` is configured.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Inclusive range `a..b`, or a comma-separated list.
        #[arg(long)]
        seeds: String,
    },
}

/// Configuration file plus per-key overrides.
#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generic override, `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    plant: Option<String>,
    #[arg(long)]
    initial_state: Option<String>,
    #[arg(long)]
    init_perturbation: Option<f64>,
    #[arg(long)]
    max_steps_linear: Option<usize>,
    #[arg(long)]
    linear_state_limit: Option<f64>,
    #[arg(long)]
    theta_dot_scale: Option<f64>,
    #[arg(long)]
    x_dot_scale: Option<f64>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lc: Option<f64>,
    #[arg(long)]
    la: Option<f64>,
    #[arg(long)]
    hidden_c: Option<usize>,
    #[arg(long)]
    hidden_a: Option<usize>,
    #[arg(long)]
    internal_iterations: Option<usize>,
    #[arg(long)]
    action_iterations: Option<usize>,
    #[arg(long)]
    stop_tolerance: Option<f64>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long)]
    uc: Option<f64>,
    #[arg(long)]
    gate_policy: Option<String>,
    #[arg(long)]
    gate_margin: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long)]
    gamma3: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials_per_run: Option<usize>,
    #[arg(long)]
    success_steps: Option<usize>,
    #[arg(long)]
    linear_success_band: Option<f64>,
    #[arg(long)]
    linear_success_hold: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("kind", self.plant.as_deref().map(quoted));
        push(
            "initial_state",
            self.initial_state.as_ref().map(|s| format!("[{s}]")),
        );
        push(
            "init_perturbation",
            self.init_perturbation.map(|v| v.to_string()),
        );
        push(
            "max_steps_linear",
            self.max_steps_linear.map(|v| v.to_string()),
        );
        push(
            "linear_state_limit",
            self.linear_state_limit.map(|v| v.to_string()),
        );
        push(
            "theta_dot_scale",
            self.theta_dot_scale.map(|v| v.to_string()),
        );
        push("x_dot_scale", self.x_dot_scale.map(|v| v.to_string()));
        push("mode", self.mode.as_deref().map(quoted));
        push("alpha", self.alpha.map(|v| v.to_string()));
        push("lc", self.lc.map(|v| v.to_string()));
        push("la", self.la.map(|v| v.to_string()));
        push("hidden_c", self.hidden_c.map(|v| v.to_string()));
        push("hidden_a", self.hidden_a.map(|v| v.to_string()));
        push(
            "internal_iterations",
            self.internal_iterations.map(|v| v.to_string()),
        );
        push(
            "action_iterations",
            self.action_iterations.map(|v| v.to_string()),
        );
        push(
            "stop_tolerance",
            self.stop_tolerance.map(|v| format!("{v:e}")),
        );
        push("init_scale", self.init_scale.map(|v| v.to_string()));
        push("uc", self.uc.map(|v| v.to_string()));
        push("policy", self.gate_policy.as_deref().map(quoted));
        push("margin", self.gate_margin.map(|v| v.to_string()));
        push("gamma1", self.gamma1.map(|v| v.to_string()));
        push("gamma2", self.gamma2.map(|v| v.to_string()));
        push("gamma3", self.gamma3.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("trials_per_run", self.trials_per_run.map(|v| v.to_string()));
        push("success_steps", self.success_steps.map(|v| v.to_string()));
        push(
            "linear_success_band",
            self.linear_success_band.map(|v| v.to_string()),
        );
        push(
            "linear_success_hold",
            self.linear_success_hold.map(|v| v.to_string()),
        );
        push(
            "output_dir",
            self.output_dir
                .as_ref()
                .map(|p| quoted(&p.to_string_lossy())),
        );
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    fn load(&self) -> Result<ExperimentConfig> {
        self.load_with(&[])
    }

    fn load_with(&self, fallbacks: &[(String, String)]) -> Result<ExperimentConfig> {
        let overrides = self.overrides()?;
        match &self.config {
            Some(path) => ExperimentConfig::layered_file(path, fallbacks, &overrides),
            None => ExperimentConfig::layered("", fallbacks, &overrides),
        }
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seed list `{spec}`"));
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

fn plot_columns(plant: PlantKind) -> Vec<&'static str> {
    match plant {
        PlantKind::Linear => vec!["x", "u", "j_hat"],
        PlantKind::CartPole => vec!["theta", "x"],
    }
}

/// Writes CSVs plus an SVG of the final trial.
fn emit_run(record: &RunRecord, dir: &Path) -> Result<()> {
    emit_csv(record, dir)?;
    if let Some(last) = record.last_trial() {
        let csv = dir.join(format!("trial_{}.csv", last.trial_index));
        let svg = dir.join(format!("trial_{}.svg", last.trial_index));
        emit_plot(&csv, &plot_columns(record.plant), &svg)?;
    }
    Ok(())
}

fn describe(record: &RunRecord) -> String {
    let last = record.last_trial();
    format!(
        "seed={} success={} trials={} first_success_trial={} last_steps={} last_cause={}",
        record.seed,
        record.success,
        record.trials.len(),
        record
            .first_success_trial
            .map_or("-".to_string(), |k| k.to_string()),
        last.map_or(0, |t| t.steps_survived),
        last.map_or("none", |t| t.failure_cause.as_str()),
    )
}

fn execute(cli: Cli, out: &mut String) -> Result<()> {
    match cli.command {
        Command::Run { common } => {
            let cfg = common.load()?;
            let record = run_experiment(&cfg)?;
            emit_run(&record, &cfg.output_dir)?;
            let _ = writeln!(out, "{}", describe(&record));
            let _ = writeln!(out, "output: {}", cfg.output_dir.display());
        }
        Command::CompareLqr { common, horizon } => {
            let cfg = common.load()?;
            let (run, cmp) = compare_with_lqr(&cfg, horizon)?;
            let _ = writeln!(out, "{}", describe(&run));
            let _ = writeln!(out, "lqr_p={} lqr_k={}", fmt_g9(cmp.p), fmt_g9(cmp.k));
            let _ = writeln!(
                out,
                "adhdp_cost={} lqr_cost={} ratio={}",
                fmt_g9(cmp.adhdp.total_cost),
                fmt_g9(cmp.lqr.total_cost),
                fmt_g9(cmp.ratio)
            );
        }
        Command::Plot {
            csv,
            columns,
            out: svg,
        } => {
            let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
            emit_plot(&csv, &cols, &svg)?;
        }
        Command::Sweep { common, seeds } => {
            let mut cfg = common.load()?;
            if cfg.plant == PlantKind::CartPole {
                cfg = common
                    .load_with(&[("init_perturbation".into(), SWEEP_PERTURBATION.to_string())])?;
            }
            let seeds = parse_seeds(&seeds)?;
            let runs = sweep(&cfg, &seeds)?;
            let _ = writeln!(
                out,
                "seed,success,trials,first_success_trial,last_steps,last_cause"
            );
            for r in &runs {
                let last = r.last_trial();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.seed,
                    r.success,
                    r.trials.len(),
                    r.first_success_trial
                        .map_or("-".to_string(), |k| k.to_string()),
                    last.map_or(0, |t| t.steps_survived),
                    last.map_or("none", |t| t.failure_cause.as_str())
                );
            }
            let ok = runs.iter().filter(|r| r.success).count();
            let _ = writeln!(
                out,
                "success rate: {ok}/{} ({:.1}%)",
                runs.len(),
                100.0 * ok as f64 / runs.len().max(1) as f64
            );
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 on success, 1 on runtime failure, 2 on usage errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut out = String::new();
    let result = execute(cli, &mut out);
    // A closed pipe on stdout is not an error worth reporting.
    let _ = std::io::stdout().write_all(out.as_bytes());
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
