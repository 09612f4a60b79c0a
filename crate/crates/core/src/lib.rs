//! Analytical models and the EECAP optimizer for IEEE 802.15.6 IR-UWB
//! body-area networks.
//!
//! The crate is organized bottom-up:
//!
//! * [`phy`]: energy-detection bit error probability and the success
//!   probabilities of every PPDU segment (SHR, PHR, PSDU codewords).
//! * [`channel`]: deterministic distance to link-budget mapping, including
//!   the pulses-per-burst staircase.
//! * [`access`]: success / collision / idle probabilities of a slotted
//!   random-access channel and their per-node affine decomposition.
//! * [`cost`]: per-state durations and energies.
//! * [`metrics`]: energy efficiency, throughput, its derivative, and the
//!   closed-form minimum access probability and throughput-optimal payload.
//! * [`network`]: a star network assembled from the models above.
//! * [`solver`]: the two-stage EECAP algorithm (feasibility check, dual
//!   decomposition, log-throughput fallback).
//! * [`sim`]: a slot-level Monte Carlo simulator used as an empirical oracle.
//! * [`scenario`]: the TOML scenario file shared by the CLI and tests.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod access;
pub mod channel;
pub mod cost;
pub mod error;
pub mod metrics;
pub mod network;
pub mod phy;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use access::{linear_coeffs, state_probs, AccessVector, LinearCoeffs, StateProbs};
pub use channel::{link_budget, ChannelParams, NcpbTable};
pub use cost::{cost_model, ppdu_duration, CostModel, EnergyParams, TimingParams};
pub use error::{Error, Result};
pub use metrics::{
    energy_efficiency, nt_opt_for_throughput, tau_min_for_rate, throughput, throughput_derivative_tau, AggregateTerms,
    Node, NtChoice, TauMin,
};
pub use network::{Evaluation, Network, NodeSpec};
pub use phy::{bit_error_prob, LinkBudget, PhyConfig, SegmentProbs};
pub use scenario::Scenario;
pub use sim::{simulate, SimConfig, SimReport};
pub use solver::{eecap, Objective, Solution, SolverConfig, Variant};
