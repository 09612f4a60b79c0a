//! Distance to link-budget mapping.
//!
//! Path loss follows a deterministic log-distance law without shadowing. The
//! pulses-per-burst count grows with distance according to a staircase
//! table; bursts with more pulses carry proportionally more energy, trading
//! symbol rate for robustness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{LinkBudget, PhyConfig, NCPB_VALUES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Path loss at the reference distance, in dB.
    pub pl0_db: f64,
    /// Reference distance in meters.
    pub d0: f64,
    /// Path-loss exponent.
    pub exponent: f64,
    /// Received burst SNR `h * eb / N0` at `d0` for a single-pulse burst.
    pub tx_eb_over_n0_at_d0: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            pl0_db: 35.0,
            d0: 1.0,
            exponent: 3.0,
            tx_eb_over_n0_at_d0: 4000.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(Error::config("channel.d0", "must be finite and strictly positive"));
        }
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return Err(Error::config("channel.exponent", "must be finite and non-negative"));
        }
        if !self.pl0_db.is_finite() {
            return Err(Error::config("channel.pl0_db", "must be finite"));
        }
        if !(self.tx_eb_over_n0_at_d0.is_finite() && self.tx_eb_over_n0_at_d0 >= 0.0) {
            return Err(Error::config(
                "channel.tx_eb_over_n0_at_d0",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }

    /// Channel power coefficient at distance `d`.
    pub fn gain(&self, d: f64) -> f64 {
        let loss_db = self.pl0_db + 10.0 * self.exponent * (d / self.d0).log10();
        10f64.powf(-loss_db / 10.0)
    }
}

/// Staircase mapping from link distance to pulses per burst.
///
/// Entry `(bound, n_cpb)` applies to distances up to and including `bound`
/// meters; distances beyond the last bound are unsupported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NcpbTable {
    pub entries: Vec<(f64, u32)>,
}

impl Default for NcpbTable {
    fn default() -> Self {
        Self {
            entries: vec![(3.0, 1), (5.0, 2), (6.5, 4), (7.8, 8), (9.0, 16), (10.5, 32)],
        }
    }
}

impl NcpbTable {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::config("channel.ncpb_table", "must contain at least one entry"));
        }
        let mut prev = 0.0;
        for (i, &(bound, n_cpb)) in self.entries.iter().enumerate() {
            if !(bound.is_finite() && bound > prev) {
                return Err(Error::config(
                    format!("channel.ncpb_table[{i}]"),
                    "distance bounds must be positive and strictly increasing",
                ));
            }
            if !NCPB_VALUES.contains(&n_cpb) {
                return Err(Error::config(
                    format!("channel.ncpb_table[{i}]"),
                    format!("n_cpb must be one of {NCPB_VALUES:?} (got {n_cpb})"),
                ));
            }
            prev = bound;
        }
        Ok(())
    }

    pub fn max_distance(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.0)
    }

    pub fn lookup(&self, d: f64) -> Result<u32> {
        self.entries
            .iter()
            .find(|&&(bound, _)| d <= bound)
            .map(|&(_, n_cpb)| n_cpb)
            .ok_or(Error::LinkOutOfRange {
                distance: d,
                max: self.max_distance(),
            })
    }
}

/// Link budget of a node `d` meters from the hub.
pub fn link_budget(d: f64, ch: &ChannelParams, tbl: &NcpbTable, phy: &PhyConfig) -> Result<LinkBudget> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidDistance(d));
    }
    let n_cpb = tbl.lookup(d)?;
    let h = ch.gain(d);
    // Scale the transmit side so that h * eb / N0 hits the reference at d0.
    let eb_over_n0 = ch.tx_eb_over_n0_at_d0 * 10f64.powf(ch.pl0_db / 10.0) * n_cpb as f64;
    Ok(LinkBudget {
        h,
        eb_over_n0,
        n_cpb,
        t_int: n_cpb as f64 * phy.t_p,
    })
}
