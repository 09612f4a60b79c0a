//! Channel-state probabilities of the slotted random-access channel.
//!
//! Every node transmits in a slot independently with its access probability.
//! A slot is a success when exactly one node transmits, a collision when two
//! or more do, and idle otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this survival factor the leave-one-out products are re-multiplied
/// instead of obtained by division.
const DIVISION_FLOOR: f64 = 1e-9;

/// Per-node access probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessVector(Vec<f64>);

impl AccessVector {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.is_empty() {
            return Err(Error::NoNodes);
        }
        for (node, &value) in tau.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability { node, value });
            }
        }
        Ok(Self(tau))
    }

    pub fn uniform(len: usize, tau: f64) -> Result<Self> {
        Self::new(vec![tau; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Copy with node `k` set to `value`.
    pub fn with(&self, k: usize, value: f64) -> Result<Self> {
        let mut tau = self.0.clone();
        tau[k] = value;
        Self::new(tau)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateProbs {
    pub p_success: f64,
    pub p_collision: f64,
    pub p_idle: f64,
    /// `P_k^S`: node k is the only transmitter.
    pub per_node_success: Vec<f64>,
    /// `p_k`: at least one other node transmits.
    pub collision_seen: Vec<f64>,
}

/// Affine dependence of the three state probabilities on one node's access
/// probability: `P = x * tau_k + y` for each state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCoeffs {
    pub x_s: f64,
    pub x_c: f64,
    pub x_i: f64,
    pub y_s: f64,
    pub y_c: f64,
    pub y_i: f64,
}

/// `prod_{j != k} (1 - tau_j)` for every k.
fn leave_one_out(tau: &[f64]) -> Vec<f64> {
    let stable = tau.iter().all(|&t| 1.0 - t >= DIVISION_FLOOR);
    if stable {
        let all: f64 = tau.iter().map(|&t| 1.0 - t).product();
        tau.iter().map(|&t| all / (1.0 - t)).collect()
    } else {
        (0..tau.len())
            .map(|k| {
                tau.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, &t)| 1.0 - t)
                    .product()
            })
            .collect()
    }
}

pub fn state_probs(tau: &AccessVector) -> StateProbs {
    let tau = tau.as_slice();
    let others_silent = leave_one_out(tau);
    let p_idle: f64 = tau.iter().map(|&t| 1.0 - t).product();
    let per_node_success: Vec<f64> = tau.iter().zip(&others_silent).map(|(&t, &q)| t * q).collect();
    let p_success: f64 = per_node_success.iter().sum();
    let p_collision = (1.0 - p_success - p_idle).max(0.0);
    StateProbs {
        p_success,
        p_collision,
        p_idle,
        per_node_success,
        collision_seen: others_silent.iter().map(|&q| 1.0 - q).collect(),
    }
}

/// Coefficients of the affine forms in `tau_k`.
///
/// `x_c` is formed as `sum_{j != k} tau_j prod_{i != j, k} (1 - tau_i)`, which
/// equals `sum_{j != k} tau_j (1 - p_j) / (1 - tau_k)` without dividing.
pub fn linear_coeffs(tau: &AccessVector, k: usize) -> Result<LinearCoeffs> {
    let t = tau.as_slice();
    if k >= t.len() {
        return Err(Error::NodeIndex { index: k, len: t.len() });
    }
    if t[k] >= 1.0 {
        return Err(Error::LinearizationUndefined(k));
    }
    let p_k = 1.0
        - t.iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &v)| 1.0 - v)
            .product::<f64>();
    let mut x_c = 0.0;
    for (j, &tj) in t.iter().enumerate() {
        if j == k {
            continue;
        }
        let rest: f64 = t
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j && i != k)
            .map(|(_, &v)| 1.0 - v)
            .product();
        x_c += tj * rest;
    }
    Ok(LinearCoeffs {
        x_s: 1.0 - p_k - x_c,
        x_c,
        x_i: p_k - 1.0,
        y_s: x_c,
        y_c: p_k - x_c,
        y_i: 1.0 - p_k,
    })
}
