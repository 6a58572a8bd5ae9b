//! Trials, runs, frozen-policy evaluation and the LQR comparison.

use rayon::prelude::*;

use super::config::{ExperimentConfig, PlantKind};
use crate::gate::{GatePolicy, StabilityGate};
use crate::learner::{Evaluation, Learner};
use crate::lqr::{lqr_gain, rollout_with, solve_dare, Rollout, ScalarLqrProblem};
use crate::plants::{
    binary_reward, cartpole_failure, cartpole_step, force_from_action, linear_step,
    normalize_state, quadratic_reward, CartPoleFailure, CartPoleParams, CartPoleState,
};
use crate::rng::SeededRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureCause {
    None,
    Angle,
    Position,
    /// Linear plant state left the configured bound.
    StateBound,
    Divergence,
    HorizonReached,
}

impl FailureCause {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureCause::None => "none",
            FailureCause::Angle => "angle",
            FailureCause::Position => "position",
            FailureCause::StateBound => "state_bound",
            FailureCause::Divergence => "divergence",
            FailureCause::HorizonReached => "horizon",
        }
    }
}

impl From<CartPoleFailure> for FailureCause {
    fn from(f: CartPoleFailure) -> Self {
        match f {
            CartPoleFailure::Angle => FailureCause::Angle,
            CartPoleFailure::Position => FailureCause::Position,
        }
    }
}

/// One surviving plant step. `state` is the state reached by the step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub t: usize,
    pub state: Vec<f64>,
    pub u: f64,
    /// Control delivered to the plant (bang-bang force for the cart-pole).
    pub applied: f64,
    pub r: f64,
    pub j_hat: f64,
    pub e_c: f64,
    pub e_a: f64,
    pub lc_bound: f64,
    pub la_bound: f64,
    pub effective_lc: f64,
    pub effective_la: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub initial_state: Vec<f64>,
    pub steps_survived: usize,
    pub failure_cause: FailureCause,
    pub succeeded: bool,
    pub rows: Vec<StepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub plant: PlantKind,
    pub trials: Vec<TrialRecord>,
    pub success: bool,
    pub first_success_trial: Option<usize>,
    pub running_min_lc_bound: f64,
    pub running_min_la_bound: f64,
    pub initial_learner: Learner,
    pub final_learner: Learner,
}

impl RunRecord {
    pub fn last_trial(&self) -> Option<&TrialRecord> {
        self.trials.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlantState {
    Linear(f64),
    CartPole(CartPoleState),
}

impl PlantState {
    fn initial(config: &ExperimentConfig, components: &[f64]) -> Self {
        match config.plant {
            PlantKind::Linear => PlantState::Linear(components[0]),
            PlantKind::CartPole => {
                PlantState::CartPole(ExperimentConfig::cartpole_state(components))
            }
        }
    }

    fn network_input(&self, p: &CartPoleParams) -> Vec<f64> {
        match self {
            PlantState::Linear(x) => vec![*x],
            PlantState::CartPole(s) => normalize_state(s, p).to_vec(),
        }
    }

    fn components(&self) -> Vec<f64> {
        match self {
            PlantState::Linear(x) => vec![*x],
            PlantState::CartPole(s) => s.components().to_vec(),
        }
    }

    fn failure(&self, config: &ExperimentConfig) -> Option<FailureCause> {
        match self {
            PlantState::Linear(x) => {
                if !x.is_finite() {
                    Some(FailureCause::Divergence)
                } else {
                    (x.abs() > config.linear_state_limit).then_some(FailureCause::StateBound)
                }
            }
            PlantState::CartPole(s) => {
                if !s.is_finite() {
                    return Some(FailureCause::Divergence);
                }
                cartpole_failure(s, &config.cartpole).map(FailureCause::from)
            }
        }
    }

    /// Advances the plant; returns the next state, the applied control and
    /// the reward of the transition.
    fn advance(&self, u: f64, config: &ExperimentConfig) -> (PlantState, f64, f64) {
        match self {
            PlantState::Linear(x) => {
                let next = linear_step(*x, u);
                (PlantState::Linear(next), u, quadratic_reward(*x, u))
            }
            PlantState::CartPole(s) => {
                let force = force_from_action(u, config.cartpole.force_mag);
                let next = cartpole_step(s, force, &config.cartpole);
                let failed =
                    cartpole_failure(&next, &config.cartpole).is_some() || !next.is_finite();
                (PlantState::CartPole(next), force, binary_reward(failed))
            }
        }
    }
}

fn horizon(config: &ExperimentConfig) -> usize {
    match config.plant {
        PlantKind::Linear => config.max_steps_linear,
        PlantKind::CartPole => config.success_steps,
    }
}

/// Runs one trial from `initial` (config units). Learner weights persist.
///
/// Each step observes the state, applies the action, steps the plant,
/// computes the reward and trains at the new state. Divergence of the
/// learner ends the trial and is recorded rather than returned.
pub fn run_trial(
    learner: &mut Learner,
    config: &ExperimentConfig,
    mut gate: Option<&mut StabilityGate>,
    trial_index: usize,
    initial: &[f64],
) -> TrialRecord {
    let lcfg = config.learner_config();
    let mut state = PlantState::initial(config, initial);
    let mut record = TrialRecord {
        trial_index,
        initial_state: initial.to_vec(),
        steps_survived: 0,
        failure_cause: FailureCause::HorizonReached,
        succeeded: false,
        rows: Vec::new(),
    };
    if let Some(cause) = state.failure(config) {
        record.failure_cause = cause;
        return record;
    }
    let mut eval: Evaluation = match learner.begin_trial(&state.network_input(&config.cartpole)) {
        Ok(e) => e,
        Err(_) => {
            record.failure_cause = FailureCause::Divergence;
            return record;
        }
    };
    let mut inside_band = 0usize;
    for t in 1..=horizon(config) {
        let u = eval.u()[0];
        let (next, applied, reward) = state.advance(u, config);
        let failure = next.failure(config);
        let input = next.network_input(&config.cartpole);
        let diag = if input.iter().all(|v| v.is_finite()) {
            learner.train_at_step(&input, reward, &lcfg, gate.as_deref_mut())
        } else {
            Err(Error::Divergence {
                iteration: 0,
                what: "non-finite plant state".into(),
            })
        };
        let diag = match diag {
            Ok(d) => d,
            Err(_) => {
                record.failure_cause = FailureCause::Divergence;
                break;
            }
        };
        if let Some(cause) = failure {
            record.failure_cause = cause;
            break;
        }
        let (lc_bound, la_bound) = diag
            .gate
            .map(|g| (g.lc_bound, g.la_bound))
            .unwrap_or((f64::NAN, f64::NAN));
        record.rows.push(StepRow {
            t,
            state: next.components(),
            u,
            applied,
            r: reward,
            j_hat: diag.j_hat,
            e_c: diag.critic_error,
            e_a: diag.action_error,
            lc_bound,
            la_bound,
            effective_lc: diag.lc,
            effective_la: diag.la,
        });
        if let PlantState::Linear(x) = next {
            if x.abs() < config.linear_success_band {
                inside_band += 1;
                if inside_band >= config.linear_success_hold {
                    record.succeeded = true;
                }
            } else {
                inside_band = 0;
            }
        }
        state = next;
        eval = match learner.evaluate(&input) {
            Ok(e) => e,
            Err(_) => {
                record.failure_cause = FailureCause::Divergence;
                break;
            }
        };
    }
    record.steps_survived = record.rows.len();
    if config.plant == PlantKind::CartPole {
        record.succeeded = record.steps_survived >= config.success_steps;
    } else if record.failure_cause != FailureCause::HorizonReached {
        record.succeeded = false;
    }
    record
}

/// Initial learner for a configuration; the action network is drawn first.
pub fn initial_learner(config: &ExperimentConfig, rng: &mut SeededRng) -> Result<Learner> {
    let (m, n) = config.plant.dims();
    Learner::random(
        m,
        n,
        config.hidden_c,
        config.hidden_a,
        config.init_scale,
        rng,
    )
}

/// Executes up to `trials_per_run` trials with persistent weights, stopping
/// at the first successful trial or at a learner divergence.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let mut learner = initial_learner(config, &mut rng)?;
    let initial_learner = learner.clone();
    let mut gate = match config.gate_policy {
        GatePolicy::Off => None,
        policy => Some(StabilityGate::new(
            config.alpha,
            config.gammas,
            policy,
            config.gate_margin,
        )?),
    };
    let mut trials = Vec::new();
    let mut first_success_trial = None;
    for k in 0..config.trials_per_run {
        let initial: Vec<f64> = if config.init_perturbation > 0.0 {
            config
                .initial_state
                .iter()
                .map(|v| v + rng.symmetric(config.init_perturbation))
                .collect()
        } else {
            config.initial_state.clone()
        };
        let trial = run_trial(&mut learner, config, gate.as_mut(), k, &initial);
        let done = trial.succeeded || trial.failure_cause == FailureCause::Divergence;
        if trial.succeeded {
            first_success_trial = Some(k);
        }
        trials.push(trial);
        if done {
            break;
        }
    }
    let success = trials.last().is_some_and(|t| t.succeeded);
    Ok(RunRecord {
        seed: config.seed,
        plant: config.plant,
        trials,
        success,
        first_success_trial,
        running_min_lc_bound: gate.as_ref().map_or(f64::NAN, |g| g.running_min_lc()),
        running_min_la_bound: gate.as_ref().map_or(f64::NAN, |g| g.running_min_la()),
        initial_learner,
        final_learner: learner,
    })
}

/// Runs the same configuration for every seed, in parallel, in seed order.
pub fn sweep(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<RunRecord>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = config.clone();
            cfg.seed = seed;
            run_experiment(&cfg)
        })
        .collect()
}

/// Control law of a trained action network on the linear plant.
pub fn linear_policy(learner: &Learner) -> impl Fn(f64) -> f64 + '_ {
    move |x| learner.action.forward_unchecked(&[x]).output[0]
}

/// Frozen-weight closed-loop rollout of the linear plant.
pub fn evaluate_linear_policy(learner: &Learner, x0: f64, steps: usize) -> Rollout {
    rollout_with(
        x0,
        steps,
        &ScalarLqrProblem::default(),
        linear_policy(learner),
    )
}

/// Frozen-weight cart-pole simulation; returns the visited states (initial
/// included) and the failure, if any.
pub fn evaluate_cartpole_policy(
    learner: &Learner,
    initial: CartPoleState,
    steps: usize,
    p: &CartPoleParams,
) -> (Vec<CartPoleState>, Option<CartPoleFailure>) {
    let mut states = vec![initial];
    let mut s = initial;
    for _ in 0..steps {
        let u = learner
            .action
            .forward_unchecked(&normalize_state(&s, p))
            .output[0];
        s = cartpole_step(&s, force_from_action(u, p.force_mag), p);
        states.push(s);
        if let Some(f) = cartpole_failure(&s, p) {
            return (states, Some(f));
        }
    }
    (states, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrComparison {
    pub adhdp: Rollout,
    pub lqr: Rollout,
    /// `adhdp.total_cost / lqr.total_cost`.
    pub ratio: f64,
    pub p: f64,
    pub k: f64,
}

/// Costs of a trained controller and the LQR controller from the same start.
pub fn compare_policies<F: FnMut(f64) -> f64>(
    policy: F,
    x0: f64,
    horizon: usize,
) -> Result<LqrComparison> {
    let problem = ScalarLqrProblem::default();
    let p = solve_dare(&problem, 1e-14, 100_000)?;
    let k = lqr_gain(p, &problem);
    let adhdp = rollout_with(x0, horizon, &problem, policy);
    let lqr = rollout_with(x0, horizon, &problem, |x| -k * x);
    let ratio = if lqr.total_cost == 0.0 && adhdp.total_cost == 0.0 {
        1.0
    } else {
        adhdp.total_cost / lqr.total_cost
    };
    Ok(LqrComparison {
        adhdp,
        lqr,
        ratio,
        p,
        k,
    })
}

/// Trains on the linear plant, freezes the weights, and compares the
/// resulting controller with LQR over `horizon` steps.
pub fn compare_with_lqr(
    config: &ExperimentConfig,
    horizon: usize,
) -> Result<(RunRecord, LqrComparison)> {
    if config.plant != PlantKind::Linear {
        return Err(Error::Config(
            "LQR comparison needs the linear plant".into(),
        ));
    }
    let run = run_experiment(config)?;
    let cmp = compare_policies(
        linear_policy(&run.final_learner),
        config.initial_state[0],
        horizon,
    )?;
    Ok((run, cmp))
}
