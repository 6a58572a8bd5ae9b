//! Experiment configuration.
//!
//! Files are TOML with one section per subsystem:
//!
//! ```toml
//! [plant]
//! kind = "cartpole"
//! initial_state = [2.0, 0.0, 0.0, 0.0]   # theta (deg), x, x_dot, theta_dot (deg/s)
//!
//! [learner]
//! mode = "full"
//! lc = 0.1
//!
//! [gate]
//! policy = "observe"
//!
//! [run]
//! seed = 7
//! ```
//!
//! Every key can also be overridden from the command line; overrides win.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use crate::gate::{validate_gammas, GammaParams, GatePolicy};
use crate::learner::{LearnerConfig, Mode};
use crate::plants::{CartPoleParams, CartPoleState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    #[default]
    Linear,
    CartPole,
}

impl PlantKind {
    /// `(m, n)`: state and control dimensions.
    pub fn dims(self) -> (usize, usize) {
        match self {
            PlantKind::Linear => (1, 1),
            PlantKind::CartPole => (4, 1),
        }
    }
}

/// Section each key belongs to.
const SECTIONS: &[(&str, &[&str])] = &[
    (
        "plant",
        &[
            "kind",
            "initial_state",
            "init_perturbation",
            "max_steps_linear",
            "linear_state_limit",
            "theta_dot_scale",
            "x_dot_scale",
        ],
    ),
    (
        "learner",
        &[
            "mode",
            "alpha",
            "lc",
            "la",
            "hidden_c",
            "hidden_a",
            "internal_iterations",
            "action_iterations",
            "stop_tolerance",
            "init_scale",
            "uc",
        ],
    ),
    ("gate", &["policy", "margin", "gamma1", "gamma2", "gamma3"]),
    (
        "run",
        &[
            "seed",
            "trials_per_run",
            "success_steps",
            "linear_success_band",
            "linear_success_hold",
            "output_dir",
        ],
    ),
];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<PlantKind>,
    initial_state: Option<Vec<f64>>,
    init_perturbation: Option<f64>,
    max_steps_linear: Option<usize>,
    linear_state_limit: Option<f64>,
    theta_dot_scale: Option<f64>,
    x_dot_scale: Option<f64>,
    mode: Option<Mode>,
    alpha: Option<f64>,
    lc: Option<f64>,
    la: Option<f64>,
    hidden_c: Option<usize>,
    hidden_a: Option<usize>,
    internal_iterations: Option<usize>,
    action_iterations: Option<usize>,
    stop_tolerance: Option<f64>,
    init_scale: Option<f64>,
    uc: Option<f64>,
    policy: Option<GatePolicy>,
    margin: Option<f64>,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    gamma3: Option<f64>,
    seed: Option<u64>,
    trials_per_run: Option<usize>,
    success_steps: Option<usize>,
    linear_success_band: Option<f64>,
    linear_success_hold: Option<usize>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub plant: PlantKind,
    pub mode: Mode,
    pub alpha: f64,
    pub lc: f64,
    pub la: f64,
    pub hidden_c: usize,
    pub hidden_a: usize,
    pub internal_iterations: usize,
    pub action_iterations: usize,
    pub stop_tolerance: f64,
    pub init_scale: f64,
    pub uc: f64,
    pub gammas: GammaParams,
    pub gate_policy: GatePolicy,
    pub gate_margin: f64,
    pub seed: u64,
    pub trials_per_run: usize,
    pub success_steps: usize,
    pub max_steps_linear: usize,
    /// Linear: `[x0]`. Cart-pole: `[theta_deg, x, x_dot, theta_dot_deg_per_s]`.
    pub initial_state: Vec<f64>,
    /// Half-width of the uniform per-component reset perturbation, in the
    /// units of `initial_state`.
    pub init_perturbation: f64,
    /// Linear trials end in divergence once `|x|` exceeds this.
    pub linear_state_limit: f64,
    /// Linear success: `|x|` below the band for `hold` consecutive steps.
    pub linear_success_band: f64,
    pub linear_success_hold: usize,
    pub cartpole: CartPoleParams,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Reference settings for a plant and mode.
    pub fn defaults(plant: PlantKind, mode: Mode) -> Self {
        let raw = RawConfig {
            kind: Some(plant),
            mode: Some(mode),
            ..RawConfig::default()
        };
        Self::resolve(raw).expect("defaults are valid")
    }

    fn resolve(raw: RawConfig) -> Result<Self> {
        let plant = raw.kind.unwrap_or_default();
        let (default_iters, default_state, default_trials) = match plant {
            PlantKind::Linear => (50, vec![1.0], 1),
            PlantKind::CartPole => (100, vec![0.85, 0.0, 0.0, 0.0], 100),
        };
        let internal_iterations = raw.internal_iterations.unwrap_or(default_iters);
        let defaults = GammaParams::default();
        let mut cartpole = CartPoleParams::default();
        if let Some(s) = raw.theta_dot_scale {
            cartpole.theta_dot_scale = s;
        }
        if let Some(s) = raw.x_dot_scale {
            cartpole.x_dot_scale = s;
        }
        let cfg = Self {
            plant,
            mode: raw.mode.unwrap_or_default(),
            alpha: raw.alpha.unwrap_or(0.9),
            lc: raw.lc.unwrap_or(0.1),
            la: raw.la.unwrap_or(0.1),
            hidden_c: raw.hidden_c.unwrap_or(6),
            hidden_a: raw.hidden_a.unwrap_or(6),
            internal_iterations,
            action_iterations: raw.action_iterations.unwrap_or(internal_iterations),
            stop_tolerance: raw.stop_tolerance.unwrap_or(1e-6),
            init_scale: raw.init_scale.unwrap_or(0.5),
            uc: raw.uc.unwrap_or(0.0),
            gammas: GammaParams {
                gamma1: raw.gamma1.unwrap_or(defaults.gamma1),
                gamma2: raw.gamma2.unwrap_or(defaults.gamma2),
                gamma3: raw.gamma3.unwrap_or(defaults.gamma3),
            },
            gate_policy: raw.policy.unwrap_or_default(),
            gate_margin: raw.margin.unwrap_or(0.9),
            seed: raw.seed.unwrap_or(0),
            trials_per_run: raw.trials_per_run.unwrap_or(default_trials),
            success_steps: raw.success_steps.unwrap_or(600),
            max_steps_linear: raw.max_steps_linear.unwrap_or(200),
            initial_state: raw.initial_state.unwrap_or(default_state),
            init_perturbation: raw.init_perturbation.unwrap_or(0.0),
            linear_state_limit: raw.linear_state_limit.unwrap_or(1e3),
            linear_success_band: raw.linear_success_band.unwrap_or(0.01),
            linear_success_hold: raw.linear_success_hold.unwrap_or(10),
            cartpole,
            output_dir: raw.output_dir.unwrap_or_else(default_output_dir),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.learner_config().validate()?;
        let (m, _) = self.plant.dims();
        if self.initial_state.len() != m {
            return Err(Error::Config(format!(
                "{:?} plant needs {m} initial state components, got {}",
                self.plant,
                self.initial_state.len()
            )));
        }
        if self.initial_state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("initial_state must be finite".into()));
        }
        if self.hidden_c == 0 || self.hidden_a == 0 {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if self.trials_per_run == 0 || self.success_steps == 0 || self.max_steps_linear == 0 {
            return Err(Error::Config(
                "trials_per_run, success_steps and max_steps_linear must be positive".into(),
            ));
        }
        if !(self.init_perturbation >= 0.0) || !(self.init_scale > 0.0) {
            return Err(Error::Config(
                "init_perturbation must be non-negative and init_scale positive".into(),
            ));
        }
        if self.linear_success_hold == 0
            || !(self.linear_success_band > 0.0)
            || !(self.linear_state_limit > 0.0)
        {
            return Err(Error::Config(
                "linear success criterion must be positive".into(),
            ));
        }
        if !(self.cartpole.theta_dot_scale > 0.0 && self.cartpole.x_dot_scale > 0.0) {
            return Err(Error::Config("velocity scales must be positive".into()));
        }
        if self.gate_policy != GatePolicy::Off {
            if !(self.gate_margin > 0.0 && self.gate_margin <= 1.0) {
                return Err(Error::Config(format!(
                    "gate margin must be in (0, 1], got {}",
                    self.gate_margin
                )));
            }
            let violations = validate_gammas(self.alpha, &self.gammas);
            if let Some(v) = violations.first() {
                return Err(Error::Config(format!(
                    "gamma constraint `{}` violated by {}",
                    v.constraint, v.margin
                )));
            }
        }
        Ok(())
    }

    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            alpha: self.alpha,
            lc: self.lc,
            la: self.la,
            mode: self.mode,
            critic_iterations: self.internal_iterations,
            action_iterations: self.action_iterations,
            uc: self.uc,
            stop_tolerance: self.stop_tolerance,
        }
    }

    /// Initial cart-pole state in SI units.
    pub fn cartpole_state(components: &[f64]) -> CartPoleState {
        CartPoleState {
            theta: components[0].to_radians(),
            x: components[1],
            x_dot: components[2],
            theta_dot: components[3].to_radians(),
        }
    }

    /// Parses configuration text, then applies `key = value` overrides.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        Self::layered(text, &[], overrides)
    }

    /// Like [`from_toml_str`](Self::from_toml_str), with `fallbacks` used for
    /// keys that neither the text nor the overrides set.
    pub fn layered(
        text: &str,
        fallbacks: &[(String, String)],
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut flat = flatten(table)?;
        for (key, value) in overrides {
            if section_of(key).is_none() {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
            flat.insert(key.clone(), parse_override(value));
        }
        for (key, value) in fallbacks {
            if section_of(key).is_none() {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
            flat.entry(key.clone())
                .or_insert_with(|| parse_override(value));
        }
        let raw: RawConfig = Value::Table(flat)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::resolve(raw)
    }

    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        Self::layered_file(path, &[], overrides)
    }

    pub fn layered_file(
        path: &Path,
        fallbacks: &[(String, String)],
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::layered(&text, fallbacks, overrides).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

fn default_output_dir() -> PathBuf {
    std::env::var_os("ADHDP_OUTPUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS
        .iter()
        .find(|(_, keys)| keys.contains(&key))
        .map(|(s, _)| *s)
}

fn flatten(table: Table) -> Result<Table> {
    let mut flat = Table::new();
    for (section, value) in table {
        let Value::Table(inner) = value else {
            return Err(Error::Config(format!(
                "top-level key `{section}` must be a section"
            )));
        };
        if !SECTIONS.iter().any(|(s, _)| *s == section) {
            return Err(Error::Config(format!("unknown section [{section}]")));
        }
        for (key, v) in inner {
            match section_of(&key) {
                Some(s) if s == section => {
                    flat.insert(key, v);
                }
                Some(s) => {
                    return Err(Error::Config(format!(
                        "key `{key}` belongs in [{s}], found in [{section}]"
                    )))
                }
                None => return Err(Error::Config(format!("unknown key `{key}` in [{section}]"))),
            }
        }
    }
    Ok(flat)
}

/// Reads an override as a TOML value, falling back to a bare string.
fn parse_override(value: &str) -> Value {
    let doc = format!("v = {value}");
    match doc.parse::<Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| Value::String(value.to_string())),
        Err(_) => Value::String(value.to_string()),
    }
}
