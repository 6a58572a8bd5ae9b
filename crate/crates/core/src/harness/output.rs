//! CSV and weight-file emission.
//!
//! Floats are written like C's `%.9g`: nine significant digits, trailing
//! zeros trimmed, exponent form outside `[1e-4, 1e9)`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::PlantKind;
use super::experiment::{RunRecord, TrialRecord};
use crate::learner::Learner;
use crate::{Error, Result};

pub fn fmt_g9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn state_columns(plant: PlantKind) -> &'static [&'static str] {
    match plant {
        PlantKind::Linear => &["x"],
        PlantKind::CartPole => &["x", "x_dot", "theta", "theta_dot"],
    }
}

const TRAILING_COLUMNS: [&str; 8] = [
    "u", "applied", "r", "j_hat", "e_c", "e_a", "lc_bound", "la_bound",
];

pub fn trial_header(plant: PlantKind) -> String {
    let mut cols = vec!["t"];
    cols.extend_from_slice(state_columns(plant));
    cols.extend_from_slice(&TRAILING_COLUMNS);
    cols.join(",")
}

pub fn trial_csv(plant: PlantKind, trial: &TrialRecord) -> String {
    let mut out = trial_header(plant);
    out.push('\n');
    for row in &trial.rows {
        let _ = write!(out, "{}", row.t);
        for v in row.state.iter().chain([
            &row.u,
            &row.applied,
            &row.r,
            &row.j_hat,
            &row.e_c,
            &row.e_a,
            &row.lc_bound,
            &row.la_bound,
        ]) {
            out.push(',');
            out.push_str(&fmt_g9(*v));
        }
        out.push('\n');
    }
    out
}

pub const SUMMARY_HEADER: &str = "trial,steps_survived,failure_cause,succeeded";

pub fn summary_csv(record: &RunRecord) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for t in &record.trials {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            t.trial_index,
            t.steps_survived,
            t.failure_cause.as_str(),
            t.succeeded
        );
    }
    out
}

/// Both networks as JSON.
pub fn weights_json(learner: &Learner) -> String {
    serde_json::to_string_pretty(learner).expect("learner serializes")
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `run_summary.csv`, one `trial_<k>.csv` per trial and the weight
/// snapshots `weights_start.json` / `weights_end.json`. Returns the paths.
pub fn emit_csv(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = vec![write(dir.join("run_summary.csv"), &summary_csv(record))?];
    for t in &record.trials {
        paths.push(write(
            dir.join(format!("trial_{}.csv", t.trial_index)),
            &trial_csv(record.plant, t),
        )?);
    }
    paths.push(write(
        dir.join("weights_start.json"),
        &weights_json(&record.initial_learner),
    )?);
    paths.push(write(
        dir.join("weights_end.json"),
        &weights_json(&record.final_learner),
    )?);
    Ok(paths)
}
