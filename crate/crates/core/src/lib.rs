//! Action-dependent heuristic dynamic programming (ADHDP) with gradient
//! descent through every layer of the critic and action networks.
//!
//! The crate contains the two-layer tanh networks ([`net`]), the online
//! actor-critic learner ([`learner`]), the learning-rate stability gate
//! ([`gate`]), the linear and cart-pole plants ([`plants`]), a scalar LQR
//! baseline ([`lqr`]) and the experiment harness behind the `adhdp` binary
//! ([`harness`]).

// `!(a > b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gate;
pub mod harness;
pub mod learner;
pub mod lqr;
pub mod net;
pub mod plants;
pub mod rng;

pub use error::{Error, Result};
pub use gate::{GammaParams, GatePolicy, GateRecord, StabilityGate};
pub use learner::{Learner, LearnerConfig, Mode, StepDiagnostics};
pub use net::{ForwardTrace, TwoLayerNet};
pub use plants::{CartPoleParams, CartPoleState};
