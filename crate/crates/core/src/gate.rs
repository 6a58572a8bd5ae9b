//! Online learning-rate stability gate.
//!
//! Evaluates the admissible critic and action learning rates from the
//! current activations and inputs, checks the weighting constants
//! `gamma1 > 4 / alpha^2`, `gamma2 > alpha`, `gamma3 > gamma1`, and either
//! records or enforces the bounds. Vector norms are Euclidean, matrix norms
//! Frobenius.

use serde::{Deserialize, Serialize};

use crate::net::{transfer_slope, ForwardTrace, TwoLayerNet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl Default for GammaParams {
    /// Values that clear every constraint at `alpha = 0.9`.
    fn default() -> Self {
        Self {
            gamma1: 5.0,
            gamma2: 2.0,
            gamma3: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaViolation {
    pub constraint: &'static str,
    /// How far the left side falls short of the right side (non-negative).
    pub margin: f64,
}

/// Lists every constraint on the weighting constants that does not hold strictly.
pub fn validate_gammas(alpha: f64, gammas: &GammaParams) -> Vec<GammaViolation> {
    let mut out = Vec::new();
    if !(alpha > 0.0 && alpha <= 1.0) {
        out.push(GammaViolation {
            constraint: "0 < alpha <= 1",
            margin: if alpha <= 0.0 { -alpha } else { alpha - 1.0 },
        });
    }
    let g1_min = 4.0 / (alpha * alpha);
    if !(gammas.gamma1 > g1_min) {
        out.push(GammaViolation {
            constraint: "gamma1 > 4/alpha^2",
            margin: g1_min - gammas.gamma1,
        });
    }
    if !(gammas.gamma2 > alpha) {
        out.push(GammaViolation {
            constraint: "gamma2 > alpha",
            margin: alpha - gammas.gamma2,
        });
    }
    if !(gammas.gamma3 > gammas.gamma1) {
        out.push(GammaViolation {
            constraint: "gamma3 > gamma1",
            margin: gammas.gamma1 - gammas.gamma3,
        });
    }
    out
}

/// `C[i][j] = ½(1 - phi_c[i]²) · w1_c[i][m + j]`, row-major `N_hc × n`.
pub fn compute_c(critic: &TwoLayerNet, phi_c: &[f64], m: usize, n: usize) -> Result<Vec<f64>> {
    if phi_c.len() != critic.hidden_dim() || critic.in_dim() != m + n {
        return Err(Error::Dimension(format!(
            "critic is {}x{}, got phi_c len {} with m={m} n={n}",
            critic.in_dim(),
            critic.hidden_dim(),
            phi_c.len()
        )));
    }
    let mut c = Vec::with_capacity(phi_c.len() * n);
    for (i, &p) in phi_c.iter().enumerate() {
        let s = transfer_slope(p);
        for j in 0..n {
            c.push(s * critic.w1_at(i, m + j));
        }
    }
    Ok(c)
}

/// `a[i] = ½(1 - phi_c[i]²) · w2_c[i]`.
pub fn compute_a(critic: &TwoLayerNet, phi_c: &[f64]) -> Result<Vec<f64>> {
    if phi_c.len() != critic.hidden_dim() || critic.out_dim() != 1 {
        return Err(Error::Dimension(
            "compute_a needs a single-output critic and matching phi_c".into(),
        ));
    }
    Ok(phi_c
        .iter()
        .enumerate()
        .map(|(i, &p)| transfer_slope(p) * critic.w2_at(0, i))
        .collect())
}

/// `D[i][j] = ½(1 - phi_a[i]²) · w2_a[j][i]`, row-major `N_ha × n`.
pub fn compute_d(action: &TwoLayerNet, phi_a: &[f64]) -> Result<Vec<f64>> {
    if phi_a.len() != action.hidden_dim() {
        return Err(Error::Dimension(format!(
            "action has {} hidden units, got phi_a len {}",
            action.hidden_dim(),
            phi_a.len()
        )));
    }
    let n = action.out_dim();
    let mut d = Vec::with_capacity(phi_a.len() * n);
    for (i, &p) in phi_a.iter().enumerate() {
        let s = transfer_slope(p);
        for j in 0..n {
            d.push(s * action.w2_at(j, i));
        }
    }
    Ok(d)
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Upper bound on the critic learning rate:
/// `(γ2 - α) / (α² γ2 (‖φ_c‖² + ‖a‖²‖y‖² / γ2))`.
///
/// Returns `+inf` when the denominator vanishes.
pub fn critic_rate_bound(
    phi_c: &[f64],
    a: &[f64],
    y: &[f64],
    alpha: f64,
    gamma2: f64,
) -> Result<f64> {
    critic_rate_bound_from_norms(sq_norm(phi_c), sq_norm(a) * sq_norm(y), alpha, gamma2)
}

pub fn critic_rate_bound_from_norms(
    phi_c_sq: f64,
    ay_sq: f64,
    alpha: f64,
    gamma2: f64,
) -> Result<f64> {
    if !(gamma2 > alpha) {
        return Err(Error::Constraint(format!(
            "gamma2 > alpha required, got gamma2={gamma2} alpha={alpha}"
        )));
    }
    let den = alpha * alpha * gamma2 * (phi_c_sq + ay_sq / gamma2);
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((gamma2 - alpha) / den)
}

/// Upper bound on the action learning rate:
/// `(γ3 - γ1) / (γ3 ‖w_c2·C‖² ‖φ_a‖² + γ1 ‖w_c2·C·Dᵀ‖² ‖x‖²)`.
///
/// `c` is `N_hc × n` and `d` is `N_ha × n`, both row-major. Returns `+inf`
/// when the denominator vanishes.
pub fn action_rate_bound(
    w_c2: &[f64],
    c: &[f64],
    d: &[f64],
    phi_a: &[f64],
    x: &[f64],
    gamma1: f64,
    gamma3: f64,
) -> Result<f64> {
    let (wc, wcd) = critic_action_products(w_c2, c, d, phi_a.len())?;
    action_rate_bound_from_norms(
        sq_norm(&wc) * sq_norm(phi_a),
        sq_norm(&wcd) * sq_norm(x),
        gamma1,
        gamma3,
    )
}

pub fn action_rate_bound_from_norms(
    wc_phi_sq: f64,
    wcd_x_sq: f64,
    gamma1: f64,
    gamma3: f64,
) -> Result<f64> {
    if !(gamma3 > gamma1) {
        return Err(Error::Constraint(format!(
            "gamma3 > gamma1 required, got gamma3={gamma3} gamma1={gamma1}"
        )));
    }
    let den = gamma3 * wc_phi_sq + gamma1 * wcd_x_sq;
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((gamma3 - gamma1) / den)
}

/// Returns `w_c2·C` (length n) and `w_c2·C·Dᵀ` (length N_ha).
fn critic_action_products(
    w_c2: &[f64],
    c: &[f64],
    d: &[f64],
    n_ha: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_hc = w_c2.len();
    if n_hc == 0 || !c.len().is_multiple_of(n_hc) {
        return Err(Error::Dimension(
            "C must have one row per critic hidden unit".into(),
        ));
    }
    let n = c.len() / n_hc;
    if d.len() != n_ha * n {
        return Err(Error::Dimension(format!(
            "D must be {n_ha}x{n}, got {} entries",
            d.len()
        )));
    }
    let mut wc = vec![0.0; n];
    for (i, w) in w_c2.iter().enumerate() {
        for j in 0..n {
            wc[j] += w * c[i * n + j];
        }
    }
    let wcd = (0..n_ha)
        .map(|i| (0..n).map(|j| wc[j] * d[i * n + j]).sum())
        .collect();
    Ok((wc, wcd))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GatePolicy {
    Off,
    #[default]
    Observe,
    Clamp,
}

/// Squared norms that enter the two bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GateNorms {
    pub phi_c: f64,
    pub phi_a: f64,
    pub a: f64,
    pub y: f64,
    pub x: f64,
    pub wc: f64,
    pub wcd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateRecord {
    pub lc_bound: f64,
    pub la_bound: f64,
    pub lc_ok: bool,
    pub la_ok: bool,
    /// Rates actually used for this step.
    pub effective_lc: f64,
    pub effective_la: f64,
    pub norms: GateNorms,
    pub running_min_lc: f64,
    pub running_min_la: f64,
}

/// Per-run gate state; keeps the running minima of both bounds.
#[derive(Debug, Clone)]
pub struct StabilityGate {
    gammas: GammaParams,
    policy: GatePolicy,
    margin: f64,
    running_min_lc: f64,
    running_min_la: f64,
}

impl StabilityGate {
    pub fn new(alpha: f64, gammas: GammaParams, policy: GatePolicy, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "gate margin must be in (0, 1], got {margin}"
            )));
        }
        let violations = validate_gammas(alpha, &gammas);
        if !violations.is_empty() {
            let names: Vec<_> = violations.iter().map(|v| v.constraint).collect();
            return Err(Error::Constraint(names.join(", ")));
        }
        Ok(Self {
            gammas,
            policy,
            margin,
            running_min_lc: f64::INFINITY,
            running_min_la: f64::INFINITY,
        })
    }

    pub fn policy(&self) -> GatePolicy {
        self.policy
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn running_min_lc(&self) -> f64 {
        self.running_min_lc
    }

    pub fn running_min_la(&self) -> f64 {
        self.running_min_la
    }

    /// Evaluates both bounds at the current traces and returns the rates to
    /// use for this plant step. `y` is the critic input `(x, u)`.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        critic: &TwoLayerNet,
        trace_c: &ForwardTrace,
        action: &TwoLayerNet,
        trace_a: &ForwardTrace,
        x: &[f64],
        y: &[f64],
        alpha: f64,
        lc: f64,
        la: f64,
    ) -> Result<GateRecord> {
        let m = x.len();
        let n = action.out_dim();
        let c = compute_c(critic, &trace_c.phi, m, n)?;
        let a = compute_a(critic, &trace_c.phi)?;
        let d = compute_d(action, &trace_a.phi)?;
        let (wc, wcd) = critic_action_products(critic.w2(), &c, &d, action.hidden_dim())?;
        let norms = GateNorms {
            phi_c: sq_norm(&trace_c.phi),
            phi_a: sq_norm(&trace_a.phi),
            a: sq_norm(&a),
            y: sq_norm(y),
            x: sq_norm(x),
            wc: sq_norm(&wc),
            wcd: sq_norm(&wcd),
        };
        let lc_bound = critic_rate_bound_from_norms(
            norms.phi_c,
            norms.a * norms.y,
            alpha,
            self.gammas.gamma2,
        )?;
        let la_bound = action_rate_bound_from_norms(
            norms.wc * norms.phi_a,
            norms.wcd * norms.x,
            self.gammas.gamma1,
            self.gammas.gamma3,
        )?;
        self.running_min_lc = self.running_min_lc.min(lc_bound);
        self.running_min_la = self.running_min_la.min(la_bound);
        let (effective_lc, effective_la) = match self.policy {
            GatePolicy::Clamp => (
                lc.min(self.margin * lc_bound),
                la.min(self.margin * la_bound),
            ),
            GatePolicy::Observe | GatePolicy::Off => (lc, la),
        };
        Ok(GateRecord {
            lc_bound,
            la_bound,
            lc_ok: lc < lc_bound,
            la_ok: la < la_bound,
            effective_lc,
            effective_la,
            norms,
            running_min_lc: self.running_min_lc,
            running_min_la: self.running_min_la,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn critic_with(phi_len: usize, w1: Vec<f64>, w2: Vec<f64>, in_dim: usize) -> TwoLayerNet {
        TwoLayerNet::from_weights(in_dim, phi_len, 1, w1, w2).unwrap()
    }

    #[test]
    fn c_matrix_cases() {
        let critic = critic_with(2, vec![0.3, 2.0, -0.1, 2.0], vec![1.0, 1.0], 2);
        assert_eq!(
            compute_c(&critic, &[1.0, -1.0], 1, 1).unwrap(),
            vec![0.0, 0.0]
        );
        let ones = critic_with(2, vec![0.3, 1.0, -0.1, 1.0], vec![1.0, 1.0], 2);
        assert_eq!(compute_c(&ones, &[0.0, 0.0], 1, 1).unwrap(), vec![0.5, 0.5]);
        assert_eq!(
            compute_c(&critic, &[0.0, 0.5], 1, 1).unwrap(),
            vec![1.0, 0.75]
        );
    }

    #[test]
    fn a_vector_cases() {
        let zero = critic_with(2, vec![0.0; 4], vec![0.0, 0.0], 2);
        assert_eq!(compute_a(&zero, &[0.2, 0.4]).unwrap(), vec![0.0, 0.0]);
        let one = critic_with(2, vec![0.0; 4], vec![1.0, 1.0], 2);
        assert_eq!(compute_a(&one, &[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let two = critic_with(1, vec![0.0; 2], vec![2.0], 2);
        assert_eq!(compute_a(&two, &[0.5]).unwrap(), vec![0.75]);
    }

    #[test]
    fn d_matrix_uses_transposed_index() {
        // action: 1 input, 2 hidden, 2 outputs; w2 rows are outputs.
        let action =
            TwoLayerNet::from_weights(1, 2, 2, vec![0.0; 2], vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        let d = compute_d(&action, &[0.5, 0.0]).unwrap();
        // D[0][0] = 0.375 * w2[0][0], D[0][1] = 0.375 * w2[1][0]
        assert_eq!(d, vec![0.375, 1.125, -1.0, 2.0]);
        let neg = TwoLayerNet::from_weights(1, 1, 1, vec![0.0], vec![-2.0]).unwrap();
        assert_eq!(compute_d(&neg, &[0.5]).unwrap(), vec![-0.75]);
        assert_eq!(compute_d(&neg, &[1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn critic_bound_worked_example() {
        // ‖φ_c‖² = 3, ‖a‖² = 1, ‖y‖² = 4
        let b = critic_rate_bound(&[1.0, 1.0, 1.0], &[1.0], &[2.0], 0.9, 2.0).unwrap();
        let expected = 1.1 / (0.81 * 2.0 * 5.0);
        assert!((b - expected).abs() < 1e-15);
        assert!((b - 0.135_802_469_135_802_47).abs() < 1e-12);
        assert_eq!(
            critic_rate_bound(&[0.0], &[0.0], &[1.0], 0.9, 2.0).unwrap(),
            f64::INFINITY
        );
        assert!(matches!(
            critic_rate_bound(&[1.0], &[1.0], &[1.0], 0.9, 0.9),
            Err(Error::Constraint(_))
        ));
        let near = critic_rate_bound(&[1.0], &[1.0], &[1.0], 0.9, 0.9 + 1e-9).unwrap();
        assert!(near > 0.0 && near < 1e-8);
    }

    #[test]
    fn action_bound_worked_example() {
        let b = action_rate_bound_from_norms(2.0, 1.0, 5.0, 6.0).unwrap();
        assert!((b - 1.0 / 17.0).abs() < 1e-15);
        assert_eq!(
            action_rate_bound_from_norms(0.0, 0.0, 5.0, 6.0).unwrap(),
            f64::INFINITY
        );
        assert!(action_rate_bound_from_norms(1.0, 1.0, 5.0, 5.0).is_err());
    }

    #[test]
    fn gamma_validation() {
        let v = validate_gammas(
            0.9,
            &GammaParams {
                gamma1: 4.0,
                gamma2: 2.0,
                gamma3: 6.0,
            },
        );
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, "gamma1 > 4/alpha^2");
        assert!((v[0].margin - (4.0 / 0.81 - 4.0)).abs() < 1e-12);
        assert!(validate_gammas(0.9, &GammaParams::default()).is_empty());
        let v = validate_gammas(
            0.9,
            &GammaParams {
                gamma1: 5.0,
                gamma2: 2.0,
                gamma3: 5.0,
            },
        );
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, "gamma3 > gamma1");
    }

    #[test]
    fn clamp_uses_margin_times_bound() {
        // Reproduce the 0.1358 critic bound with a hand-built trace.
        let critic = TwoLayerNet::from_weights(2, 3, 1, vec![0.0; 6], vec![0.0; 3]).unwrap();
        let action = TwoLayerNet::from_weights(1, 1, 1, vec![0.0], vec![0.0]).unwrap();
        let trace_c = ForwardTrace {
            sigma: vec![0.0; 3],
            phi: vec![0.999_999_999_9, 0.0, 0.0],
            output: vec![0.0],
        };
        let trace_a = ForwardTrace {
            sigma: vec![0.0],
            phi: vec![0.0],
            output: vec![0.0],
        };
        let mut gate =
            StabilityGate::new(0.9, GammaParams::default(), GatePolicy::Clamp, 0.9).unwrap();
        let rec = gate
            .step(
                &critic,
                &trace_c,
                &action,
                &trace_a,
                &[0.0],
                &[0.0, 0.0],
                0.9,
                10.0,
                0.1,
            )
            .unwrap();
        let bound = 1.1 / (0.81 * 2.0 * trace_c.phi[0].powi(2));
        assert!((rec.lc_bound - bound).abs() < 1e-12);
        assert!((rec.effective_lc - 0.9 * bound).abs() < 1e-12);
        assert!(!rec.lc_ok);
        assert_eq!(rec.la_bound, f64::INFINITY);
        assert_eq!(rec.effective_la, 0.1);
    }

    #[test]
    fn clamp_arithmetic_on_reference_bound() {
        let bound = critic_rate_bound_from_norms(3.0, 4.0, 0.9, 2.0).unwrap();
        let effective = 10f64.min(0.9 * bound);
        assert!((effective - 0.122_222_222_222_222_2).abs() < 1e-12);
    }

    #[test]
    fn gate_rejects_bad_margin_and_gammas() {
        assert!(StabilityGate::new(0.9, GammaParams::default(), GatePolicy::Observe, 0.0).is_err());
        let bad = GammaParams {
            gamma1: 4.0,
            ..GammaParams::default()
        };
        assert!(StabilityGate::new(0.9, bad, GatePolicy::Observe, 0.9).is_err());
    }
}
