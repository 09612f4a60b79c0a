//! Per-state time durations and energy consumptions of one node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light, used for the default propagation delays.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Timing constants plus the per-node symbol periods and propagation delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingParams {
    /// Synchronization header duration, seconds.
    pub t_shr: f64,
    /// PHY header duration, seconds.
    pub t_phr: f64,
    /// Short interframe spacing, seconds.
    pub t_psifs: f64,
    /// Idle slot duration, seconds.
    pub t_idle_slot: f64,
    /// Encoded payload of the acknowledgment frame, bits.
    pub n_t_ack: u32,
    /// Per-node symbol period, seconds. Derived from the link's burst length.
    #[serde(skip)]
    pub t_sym: Vec<f64>,
    /// Per-node propagation delay, seconds.
    #[serde(skip)]
    pub sigma: Vec<f64>,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            t_shr: 40.32e-6,
            t_phr: 80.052e-6,
            t_psifs: 75e-6,
            t_idle_slot: 292e-6,
            n_t_ack: 126,
            t_sym: Vec::new(),
            sigma: Vec::new(),
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("timing.t_shr", self.t_shr),
            ("timing.t_phr", self.t_phr),
            ("timing.t_psifs", self.t_psifs),
            ("timing.t_idle_slot", self.t_idle_slot),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be finite and strictly positive (got {v})"),
                ));
            }
        }
        if self.t_sym.len() != self.sigma.len() {
            return Err(Error::LengthMismatch {
                expected: self.t_sym.len(),
                got: self.sigma.len(),
            });
        }
        for (i, &v) in self.t_sym.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("timing.t_sym[{i}]"), "must be strictly positive"));
            }
        }
        for (i, &v) in self.sigma.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("nodes[{i}].sigma"), "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn ack_duration(&self, t_sym: f64) -> f64 {
        ppdu_duration(self.n_t_ack, t_sym, self)
    }

    pub fn len(&self) -> usize {
        self.t_sym.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_sym.is_empty()
    }
}

/// Energy model constants; the `_tx` variants cover transmission only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    /// Transmit plus receive energy per payload bit, joules.
    pub eps_b: f64,
    /// Transmit plus receive overhead energy, joules.
    pub eps_oh: f64,
    /// Transmit plus receive startup energy, joules.
    pub eps_st: f64,
    pub eps_b_tx: f64,
    pub eps_oh_tx: f64,
    pub eps_st_tx: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            eps_b: 1.0e-9,
            eps_oh: 1.2e-7,
            eps_st: 5.0e-8,
            eps_b_tx: 4.5e-10,
            eps_oh_tx: 5.4e-8,
            eps_st_tx: 2.25e-8,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("eps_b", self.eps_b, "eps_b_tx", self.eps_b_tx),
            ("eps_oh", self.eps_oh, "eps_oh_tx", self.eps_oh_tx),
            ("eps_st", self.eps_st, "eps_st_tx", self.eps_st_tx),
        ];
        for (full_key, full, tx_key, tx) in pairs {
            for (key, v) in [(full_key, full), (tx_key, tx)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::config(
                        format!("energy.{key}"),
                        format!("must be finite and non-negative (got {v})"),
                    ));
                }
            }
            if tx > full {
                return Err(Error::config(
                    format!("energy.{tx_key}"),
                    format!("transmit-only energy must not exceed energy.{full_key}"),
                ));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            eps_b: self.eps_b * c,
            eps_oh: self.eps_oh * c,
            eps_st: self.eps_st * c,
            eps_b_tx: self.eps_b_tx * c,
            eps_oh_tx: self.eps_oh_tx * c,
            eps_st_tx: self.eps_st_tx * c,
        }
    }
}

/// Durations and energies of one node in each channel state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub t_success: f64,
    pub t_collision: f64,
    pub t_idle: f64,
    pub e_success: f64,
    pub e_collision: f64,
    pub e_idle: f64,
}

pub fn ppdu_duration(n_t: u32, t_sym: f64, tp: &TimingParams) -> f64 {
    tp.t_shr + tp.t_phr + n_t as f64 * t_sym
}

pub fn cost_model(node: usize, n_t: u32, tp: &TimingParams, ep: &EnergyParams) -> Result<CostModel> {
    let (Some(&t_sym), Some(&sigma)) = (tp.t_sym.get(node), tp.sigma.get(node)) else {
        return Err(Error::NodeIndex {
            index: node,
            len: tp.len(),
        });
    };
    let ppdu = ppdu_duration(n_t, t_sym, tp);
    let bits = n_t as f64;
    Ok(CostModel {
        t_success: ppdu + tp.ack_duration(t_sym) + 2.0 * tp.t_psifs + 2.0 * sigma,
        t_collision: ppdu + tp.t_psifs + sigma,
        t_idle: tp.t_idle_slot,
        e_success: ep.eps_b * bits + ep.eps_oh + ep.eps_st,
        e_collision: ep.eps_b_tx * bits + ep.eps_oh_tx + ep.eps_st_tx,
        e_idle: 0.0,
    })
}
