//! Plant simulators: the scalar unstable linear system and the
//! frictionless cart-pole.

use serde::{Deserialize, Serialize};

/// `x(k+1) = 1.25·x(k) + u(k)`.
pub fn linear_step(x: f64, u: f64) -> f64 {
    1.25 * x + u
}

/// Stage cost `0.04·x² + 0.01·u²`.
pub fn quadratic_reward(x: f64, u: f64) -> f64 {
    0.04 * x * x + 0.01 * u * u
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartPoleState {
    /// Cart position, m.
    pub x: f64,
    /// Cart velocity, m/s.
    pub x_dot: f64,
    /// Pole angle from vertical, rad.
    pub theta: f64,
    /// Pole angular velocity, rad/s.
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn components(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    pub g: f64,
    pub m_cart: f64,
    pub m_pole: f64,
    /// Half the pole length.
    pub l: f64,
    pub force_mag: f64,
    pub dt: f64,
    /// Failure angle, rad.
    pub theta_limit: f64,
    pub x_limit: f64,
    /// Velocity scales used by [`normalize_state`].
    pub theta_dot_scale: f64,
    pub x_dot_scale: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            g: 9.8,
            m_cart: 1.0,
            m_pole: 0.1,
            l: 0.5,
            force_mag: 10.0,
            dt: 0.02,
            theta_limit: 12f64.to_radians(),
            x_limit: 2.4,
            theta_dot_scale: 2.0,
            x_dot_scale: 2.4,
        }
    }
}

/// Returns `(theta_ddot, x_ddot)`; the angular acceleration is computed
/// first and substituted into the cart equation.
pub fn cartpole_accels(s: &CartPoleState, force: f64, p: &CartPoleParams) -> (f64, f64) {
    let total = p.m_cart + p.m_pole;
    let (sin, cos) = s.theta.sin_cos();
    let w2 = s.theta_dot * s.theta_dot;
    let num = p.g * sin + cos * ((-force - p.m_pole * p.l * w2 * sin) / total);
    let den = p.l * (4.0 / 3.0 - p.m_pole * cos * cos / total);
    let theta_ddot = num / den;
    let x_ddot = (force + p.m_pole * p.l * (w2 * sin - theta_ddot * cos)) / total;
    (theta_ddot, x_ddot)
}

/// Explicit Euler step with accelerations taken at the pre-step state.
pub fn cartpole_step(s: &CartPoleState, force: f64, p: &CartPoleParams) -> CartPoleState {
    let (theta_ddot, x_ddot) = cartpole_accels(s, force, p);
    CartPoleState {
        x: s.x + p.dt * s.x_dot,
        x_dot: s.x_dot + p.dt * x_ddot,
        theta: s.theta + p.dt * s.theta_dot,
        theta_dot: s.theta_dot + p.dt * theta_ddot,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartPoleFailure {
    Angle,
    Position,
}

/// Which bound the state violates, angle checked first. Bounds are strict.
pub fn cartpole_failure(s: &CartPoleState, p: &CartPoleParams) -> Option<CartPoleFailure> {
    if s.theta.abs() > p.theta_limit {
        Some(CartPoleFailure::Angle)
    } else if s.x.abs() > p.x_limit {
        Some(CartPoleFailure::Position)
    } else {
        None
    }
}

pub fn cartpole_failed(s: &CartPoleState, p: &CartPoleParams) -> bool {
    cartpole_failure(s, p).is_some()
}

/// `-1` on failure, `0` otherwise.
pub fn binary_reward(failed: bool) -> f64 {
    if failed {
        -1.0
    } else {
        0.0
    }
}

/// Bang-bang force from the sign of the action output; zero maps to `+force_mag`.
pub fn force_from_action(u: f64, force_mag: f64) -> f64 {
    if u >= 0.0 {
        force_mag
    } else {
        -force_mag
    }
}

/// Network input `(θ/θ_lim, θ̇/θ̇_scale, x/x_lim, ẋ/ẋ_scale)`.
pub fn normalize_state(s: &CartPoleState, p: &CartPoleParams) -> [f64; 4] {
    [
        s.theta / p.theta_limit,
        s.theta_dot / p.theta_dot_scale,
        s.x / p.x_limit,
        s.x_dot / p.x_dot_scale,
    ]
}
