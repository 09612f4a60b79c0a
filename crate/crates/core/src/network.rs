//! A one-hop star network: every node's link, timing and energy model
//! assembled from the scenario parameters.

use serde::{Deserialize, Serialize};

use crate::access::{state_probs, AccessVector, StateProbs};
use crate::channel::{link_budget, ChannelParams, NcpbTable};
use crate::cost::{cost_model, CostModel, EnergyParams, TimingParams, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::metrics::{energy_efficiency, throughput, Node};
use crate::phy::{LinkBudget, PhyConfig, SegmentProbs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    /// Distance to the hub, meters.
    pub distance: f64,
    /// Minimum throughput, bits per second.
    pub r_min: f64,
    /// Propagation delay override, seconds. Defaults to `distance / c`.
    pub sigma: Option<f64>,
}

impl NodeSpec {
    pub fn new(distance: f64, r_min: f64) -> Self {
        Self {
            distance,
            r_min,
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub phy: PhyConfig,
    pub timing: TimingParams,
    pub energy: EnergyParams,
    pub specs: Vec<NodeSpec>,
    pub links: Vec<LinkBudget>,
    pub segments: Vec<SegmentProbs>,
    grid: Vec<u32>,
}

/// Metrics of every node at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub state: StateProbs,
    pub throughput: Vec<f64>,
    /// `None` when the network is silent and efficiency is undefined.
    pub efficiency: Vec<Option<f64>>,
}

impl Network {
    pub fn build(
        phy: PhyConfig,
        channel: &ChannelParams,
        table: &NcpbTable,
        timing: TimingParams,
        energy: EnergyParams,
        specs: Vec<NodeSpec>,
    ) -> Result<Self> {
        phy.validate()?;
        channel.validate()?;
        table.validate()?;
        let links = specs
            .iter()
            .map(|s| link_budget(s.distance, channel, table, &phy))
            .collect::<Result<Vec<_>>>()?;
        let segments = links.iter().map(|l| SegmentProbs::from_link(l, &phy)).collect();
        Self::from_links(phy, timing, energy, specs, links, segments)
    }

    /// Builds a network from explicit per-node link budgets and segment
    /// probabilities, bypassing the channel model.
    pub fn from_links(
        phy: PhyConfig,
        mut timing: TimingParams,
        energy: EnergyParams,
        specs: Vec<NodeSpec>,
        links: Vec<LinkBudget>,
        segments: Vec<SegmentProbs>,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::NoNodes);
        }
        for (len, expected) in [(links.len(), specs.len()), (segments.len(), specs.len())] {
            if len != expected {
                return Err(Error::LengthMismatch { expected, got: len });
            }
        }
        for (i, s) in specs.iter().enumerate() {
            if !(s.r_min.is_finite() && s.r_min >= 0.0) {
                return Err(Error::config(
                    format!("nodes[{i}].r_min"),
                    "must be finite and non-negative",
                ));
            }
            if !(s.distance.is_finite() && s.distance > 0.0) {
                return Err(Error::config(
                    format!("nodes[{i}].d"),
                    "must be finite and strictly positive",
                ));
            }
        }
        phy.validate()?;
        energy.validate()?;
        timing.t_sym = links.iter().map(|l| phy.symbol_period(l.n_cpb)).collect();
        timing.sigma = specs
            .iter()
            .map(|s| s.sigma.unwrap_or(s.distance / SPEED_OF_LIGHT))
            .collect();
        timing.validate()?;
        let grid = phy.payload_grid();
        Ok(Self {
            phy,
            timing,
            energy,
            specs,
            links,
            segments,
            grid,
        })
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Admissible payload lengths, ascending.
    pub fn payload_grid(&self) -> &[u32] {
        &self.grid
    }

    pub fn cost(&self, k: usize, n_t: u32) -> Result<CostModel> {
        cost_model(k, n_t, &self.timing, &self.energy)
    }

    pub fn node(&self, k: usize, tau: f64, n_t: u32) -> Node {
        Node {
            index: k,
            distance: self.specs[k].distance,
            tau,
            n_t,
            r_min: self.specs[k].r_min,
        }
    }

    pub fn r_min(&self) -> Vec<f64> {
        self.specs.iter().map(|s| s.r_min).collect()
    }

    fn check_operating_point(&self, tau: &AccessVector, n_t: &[u32]) -> Result<()> {
        if tau.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: tau.len(),
            });
        }
        if n_t.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: n_t.len(),
            });
        }
        n_t.iter().try_for_each(|&n| self.phy.check_payload(n))
    }

    pub fn evaluate(&self, tau: &AccessVector, n_t: &[u32]) -> Result<Evaluation> {
        self.check_operating_point(tau, n_t)?;
        let state = state_probs(tau);
        let mut rates = Vec::with_capacity(self.len());
        let mut effs = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let node = self.node(k, tau.get(k), n_t[k]);
            let cost = self.cost(k, n_t[k])?;
            rates.push(throughput(&node, &state, &cost, &self.segments[k], &self.phy)?);
            effs.push(
                match energy_efficiency(&node, &state, &cost, &self.segments[k], &self.phy) {
                    Ok(e) => Some(e),
                    Err(Error::ZeroActivity(_)) => None,
                    Err(e) => return Err(e),
                },
            );
        }
        Ok(Evaluation {
            state,
            throughput: rates,
            efficiency: effs,
        })
    }
}
