//! Scalar discrete-time LQR baseline for the linear plant.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLqrProblem {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
}

impl Default for ScalarLqrProblem {
    /// `x' = 1.25x + u`, stage cost `0.04x² + 0.01u²`.
    fn default() -> Self {
        Self {
            a: 1.25,
            b: 1.0,
            q: 0.04,
            r: 0.01,
        }
    }
}

impl ScalarLqrProblem {
    /// One Riccati map `q + a²P - (abP)² / (r + b²P)`.
    pub fn riccati_map(&self, p: f64) -> f64 {
        let ab = self.a * self.b * p;
        self.q + self.a * self.a * p - ab * ab / (self.r + self.b * self.b * p)
    }

    pub fn residual(&self, p: f64) -> f64 {
        p - self.riccati_map(p)
    }
}

/// Fixed-point iteration of the Riccati map from `P = q`.
pub fn solve_dare(problem: &ScalarLqrProblem, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !(problem.r > 0.0) || problem.q < 0.0 {
        return Err(Error::InvalidInput("LQR needs r > 0 and q >= 0".into()));
    }
    let mut p = problem.q;
    for _ in 0..max_iter {
        let next = problem.riccati_map(p);
        if !next.is_finite() {
            return Err(Error::Numerical(format!("Riccati iterate became {next}")));
        }
        if (next - p).abs() < tol {
            return Ok(next);
        }
        p = next;
    }
    Err(Error::Numerical(format!(
        "Riccati iteration did not converge in {max_iter} steps"
    )))
}

/// `K = abP / (r + b²P)`; the control law is `u = -K·x`.
pub fn lqr_gain(p: f64, problem: &ScalarLqrProblem) -> f64 {
    problem.a * problem.b * p / (problem.r + problem.b * problem.b * p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// States `x_0 .. x_steps`.
    pub states: Vec<f64>,
    /// Controls `u_0 .. u_{steps-1}`.
    pub controls: Vec<f64>,
    /// Undiscounted `Σ (q·x_k² + r·u_k²)` over the applied controls.
    pub total_cost: f64,
}

/// Closed-loop rollout of any scalar feedback law.
pub fn rollout_with<F: FnMut(f64) -> f64>(
    x0: f64,
    steps: usize,
    problem: &ScalarLqrProblem,
    mut policy: F,
) -> Rollout {
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps);
    let mut cost = 0.0;
    let mut x = x0;
    states.push(x);
    for _ in 0..steps {
        let u = policy(x);
        cost += problem.q * x * x + problem.r * u * u;
        x = problem.a * x + problem.b * u;
        controls.push(u);
        states.push(x);
    }
    Rollout {
        states,
        controls,
        total_cost: cost,
    }
}

/// Applies `u = -K·x` for `steps` steps.
pub fn lqr_rollout(x0: f64, steps: usize, problem: &ScalarLqrProblem, k: f64) -> Result<Rollout> {
    if steps == 0 {
        return Err(Error::InvalidInput(
            "rollout needs at least one step".into(),
        ));
    }
    Ok(rollout_with(x0, steps, problem, |x| -k * x))
}
