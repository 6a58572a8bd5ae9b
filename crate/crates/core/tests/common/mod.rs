// The oracles index explicitly to mirror the formulas term by term.
#![allow(dead_code, clippy::needless_range_loop)]

use adhdp::learner::{
    action_error, critic_error, update_action_hidden, update_action_output, update_critic_hidden,
    update_critic_output,
};
use adhdp::net::TwoLayerNet;
use adhdp::rng::SeededRng;

/// A random critic/action pair plus a state, reward and previous estimate.
pub struct Problem {
    pub critic: TwoLayerNet,
    pub action: TwoLayerNet,
    pub x: Vec<f64>,
    pub reward: f64,
    pub j_prev: f64,
    pub alpha: f64,
    pub uc: f64,
}

impl Problem {
    pub fn random(seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let m = 1 + (rng.unit() * 4.0) as usize;
        let n = 1 + (rng.unit() * 2.0) as usize;
        let hc = 1 + (rng.unit() * 6.0) as usize;
        let ha = 1 + (rng.unit() * 6.0) as usize;
        let action = TwoLayerNet::random(m, ha, n, 1.0, &mut rng).unwrap();
        let critic = TwoLayerNet::random(m + n, hc, 1, 1.0, &mut rng).unwrap();
        let x = (0..m).map(|_| rng.symmetric(1.5)).collect();
        Self {
            critic,
            action,
            x,
            reward: rng.symmetric(1.0),
            j_prev: rng.symmetric(1.0),
            alpha: 0.5 + 0.5 * rng.unit(),
            uc: rng.symmetric(0.5),
        }
    }

    pub fn y(&self, action: &TwoLayerNet) -> Vec<f64> {
        let mut y = self.x.clone();
        y.extend(action.forward(&self.x).unwrap().output);
        y
    }

    /// `½ e_c²` with the critic input held fixed at the current action.
    pub fn critic_objective(&self, critic: &TwoLayerNet, y: &[f64]) -> f64 {
        let j = critic.forward(y).unwrap().output[0];
        let e = critic_error(j, self.reward, self.j_prev, self.alpha);
        0.5 * e * e
    }

    /// `½ e_a²`, differentiated through the action network.
    pub fn action_objective(&self, action: &TwoLayerNet) -> f64 {
        let y = self.y(action);
        let j = self.critic.forward(&y).unwrap().output[0];
        let e = action_error(j, self.uc);
        0.5 * e * e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Hidden,
    Output,
}

/// Finite-difference stencil used by the gradient oracle.
#[derive(Clone, Copy, Debug)]
pub enum Stencil {
    Central(f64),
    /// Central differences at `h` and `h/2` combined to cancel the `h²` term.
    Richardson(f64),
}

fn finite_difference(
    weights: &[f64],
    stencil: Stencil,
    mut f: impl FnMut(usize, f64) -> f64,
) -> Vec<f64> {
    let mut cd = |i: usize, w: f64, h: f64| (f(i, w + h) - f(i, w - h)) / (2.0 * h);
    (0..weights.len())
        .map(|i| {
            let w = weights[i];
            match stencil {
                Stencil::Central(h) => cd(i, w, h),
                Stencil::Richardson(h) => (4.0 * cd(i, w, h / 2.0) - cd(i, w, h)) / 3.0,
            }
        })
        .collect()
}

fn set(net: &TwoLayerNet, layer: Layer, i: usize, v: f64) -> TwoLayerNet {
    let mut out = net.clone();
    match layer {
        Layer::Hidden => out.w1_mut()[i] = v,
        Layer::Output => out.w2_mut()[i] = v,
    }
    out
}

fn weights(net: &TwoLayerNet, layer: Layer) -> Vec<f64> {
    match layer {
        Layer::Hidden => net.w1().to_vec(),
        Layer::Output => net.w2().to_vec(),
    }
}

fn delta(before: &TwoLayerNet, after: &TwoLayerNet, layer: Layer) -> Vec<f64> {
    weights(after, layer)
        .iter()
        .zip(weights(before, layer))
        .map(|(a, b)| a - b)
        .collect()
}

/// Norm-wise relative error `‖a - b‖ / ‖b‖`.
pub fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = reference.iter().map(|b| b * b).sum::<f64>().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

pub const FD_STEP: f64 = 1e-6;

/// Relative errors of the critic output, critic hidden, action output and
/// action hidden updates against `-l·∇E` by central differences.
pub fn gradient_errors(p: &Problem, lc: f64, la: f64) -> [f64; 4] {
    gradient_errors_with(p, lc, la, Stencil::Central(FD_STEP))
}

pub fn gradient_errors_with(p: &Problem, lc: f64, la: f64, stencil: Stencil) -> [f64; 4] {
    let y = p.y(&p.action);
    let trace_c = p.critic.forward(&y).unwrap();
    let e_c = critic_error(trace_c.output[0], p.reward, p.j_prev, p.alpha);
    let trace_a = p.action.forward(&p.x).unwrap();
    let e_a = action_error(trace_c.output[0], p.uc);

    let mut out = [0.0; 4];
    for (slot, layer) in [(0, Layer::Output), (1, Layer::Hidden)] {
        let mut c = p.critic.clone();
        match layer {
            Layer::Output => update_critic_output(&mut c, &trace_c, e_c, p.alpha, lc),
            Layer::Hidden => update_critic_hidden(&mut c, &trace_c, &y, e_c, p.alpha, lc),
        }
        let analytic = delta(&p.critic, &c, layer);
        let fd: Vec<f64> = finite_difference(&weights(&p.critic, layer), stencil, |i, v| {
            p.critic_objective(&set(&p.critic, layer, i, v), &y)
        })
        .into_iter()
        .map(|g| -lc * g)
        .collect();
        out[slot] = relative_error(&analytic, &fd);
    }
    for (slot, layer) in [(2, Layer::Output), (3, Layer::Hidden)] {
        let mut a = p.action.clone();
        match layer {
            Layer::Output => update_action_output(&mut a, &trace_a, &p.critic, &trace_c, e_a, la),
            Layer::Hidden => {
                update_action_hidden(&mut a, &trace_a, &p.critic, &trace_c, &p.x, e_a, la)
            }
        }
        let analytic = delta(&p.action, &a, layer);
        let fd: Vec<f64> = finite_difference(&weights(&p.action, layer), stencil, |i, v| {
            p.action_objective(&set(&p.action, layer, i, v))
        })
        .into_iter()
        .map(|g| -la * g)
        .collect();
        out[slot] = relative_error(&analytic, &fd);
    }
    out
}

fn slope(phi: f64) -> f64 {
    0.5 * (1.0 - phi * phi)
}

/// Critic bound written out term by term from the network weights.
pub fn critic_bound_oracle(
    critic: &TwoLayerNet,
    phi_c: &[f64],
    y: &[f64],
    alpha: f64,
    gamma2: f64,
) -> f64 {
    let hc = critic.hidden_dim();
    let mut phi_sq = 0.0;
    let mut a_sq = 0.0;
    for i in 0..hc {
        phi_sq += phi_c[i] * phi_c[i];
        let a_i = slope(phi_c[i]) * critic.w2_at(0, i);
        a_sq += a_i * a_i;
    }
    let y_sq: f64 = y.iter().map(|v| v * v).sum();
    (gamma2 - alpha) / (alpha * alpha * gamma2 * (phi_sq + a_sq * y_sq / gamma2))
}

/// Action bound written out term by term from the network weights.
pub fn action_bound_oracle(
    critic: &TwoLayerNet,
    phi_c: &[f64],
    action: &TwoLayerNet,
    phi_a: &[f64],
    x: &[f64],
    gamma1: f64,
    gamma3: f64,
) -> f64 {
    let m = x.len();
    let n = action.out_dim();
    let hc = critic.hidden_dim();
    let ha = action.hidden_dim();
    let mut wc = vec![0.0; n];
    for j in 0..n {
        for i in 0..hc {
            wc[j] += critic.w2_at(0, i) * slope(phi_c[i]) * critic.w1_at(i, m + j);
        }
    }
    let mut wcd = vec![0.0; ha];
    for i in 0..ha {
        for j in 0..n {
            wcd[i] += wc[j] * slope(phi_a[i]) * action.w2_at(j, i);
        }
    }
    let sq = |v: &[f64]| v.iter().map(|e| e * e).sum::<f64>();
    (gamma3 - gamma1) / (gamma3 * sq(&wc) * sq(phi_a) + gamma1 * sq(&wcd) * sq(x))
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
