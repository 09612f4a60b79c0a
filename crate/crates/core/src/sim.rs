//! Slot-level Monte Carlo simulation of the star network.
//!
//! Every slot each node transmits independently with its access
//! probability. A lone transmitter delivers its PPDU with the link's PPDU
//! success probability. Elapsed time advances by the longest duration among
//! the transmitters (the idle slot when nobody transmits) and energy is
//! charged to each transmitter.
//!
//! For comparison with the mean-value metrics every node also accumulates an
//! attributed time and energy: the duration and energy of the slot's state
//! evaluated with that node's own costs. Throughput and efficiency estimates
//! are ratios of per-slot sums, with delta-method standard errors.
//!
//! Slots are split into fixed-size shards, each driven by its own ChaCha
//! stream derived from the seed, and merged in shard order, so a report
//! depends only on the inputs and the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::access::AccessVector;
use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::network::{Evaluation, Network};

const SHARD_SLOTS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_slots: u64,
    pub seed: u64,
    /// Collect per-node counts, bits, energy and ratio estimates.
    pub record_per_node: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_slots: 1_000_000,
            seed: 0,
            record_per_node: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_slots == 0 {
            return Err(Error::config("num_slots", "must be positive"));
        }
        Ok(())
    }
}

/// Running sums for a ratio estimator `sum y / sum x`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct RatioSums {
    x: f64,
    y: f64,
    xx: f64,
    yy: f64,
    xy: f64,
}

impl RatioSums {
    fn push(&mut self, x: f64, y: f64) {
        self.x += x;
        self.y += y;
        self.xx += x * x;
        self.yy += y * y;
        self.xy += x * y;
    }

    fn merge(&mut self, o: &Self) {
        self.x += o.x;
        self.y += o.y;
        self.xx += o.xx;
        self.yy += o.yy;
        self.xy += o.xy;
    }

    /// Ratio and its delta-method standard error, `None` when `sum x = 0`.
    fn estimate(&self, n: u64) -> Option<(f64, f64)> {
        if self.x <= 0.0 {
            return None;
        }
        let n = n as f64;
        let (mx, my) = (self.x / n, self.y / n);
        let r = my / mx;
        let vx = self.xx / n - mx * mx;
        let vy = self.yy / n - my * my;
        let cxy = self.xy / n - mx * my;
        let var = (vy - 2.0 * r * cxy + r * r * vx).max(0.0) / (n * mx * mx);
        Some((r, var.sqrt()))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct NodeTally {
    successes: u64,
    delivered_bits: u64,
    energy: f64,
    rate: RatioSums,
    efficiency: RatioSums,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Tally {
    idle: u64,
    success: u64,
    collision: u64,
    elapsed: f64,
    nodes: Vec<NodeTally>,
}

impl Tally {
    fn merge(&mut self, o: &Self) {
        self.idle += o.idle;
        self.success += o.success;
        self.collision += o.collision;
        self.elapsed += o.elapsed;
        for (a, b) in self.nodes.iter_mut().zip(&o.nodes) {
            a.successes += b.successes;
            a.delivered_bits += b.delivered_bits;
            a.energy += b.energy;
            a.rate.merge(&b.rate);
            a.efficiency.merge(&b.efficiency);
        }
    }
}

/// Per-node simulation results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    /// Slots in which the node was the only transmitter.
    pub successes: u64,
    /// Payload bits of successfully received PPDUs.
    pub delivered_bits: u64,
    /// Energy spent transmitting, joules.
    pub energy: f64,
    /// Delivered bits over attributed time, bits per second.
    pub throughput: f64,
    pub throughput_se: f64,
    /// Delivered bits over attributed energy; `None` when that energy is zero.
    pub efficiency: Option<f64>,
    pub efficiency_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub num_slots: u64,
    pub success_slots: u64,
    pub collision_slots: u64,
    pub idle_slots: u64,
    pub p_success: f64,
    pub p_collision: f64,
    pub p_idle: f64,
    pub se_success: f64,
    pub se_collision: f64,
    pub se_idle: f64,
    /// Total elapsed time, seconds.
    pub elapsed: f64,
    /// Empty unless per-node recording was requested.
    pub nodes: Vec<NodeReport>,
}

fn fmt_num(x: f64) -> String {
    format!("{x:.9e}")
}

impl SimReport {
    pub fn csv_header() -> &'static str {
        "seed,num_slots,p_success,p_collision,p_idle,se_success,se_collision,se_idle,elapsed,successes,delivered_bits,energy"
    }

    /// One CSV row; per-node columns are `;`-separated lists.
    pub fn csv_row(&self) -> String {
        let join = |f: &dyn Fn(&NodeReport) -> String| self.nodes.iter().map(f).collect::<Vec<_>>().join(";");
        [
            self.seed.to_string(),
            self.num_slots.to_string(),
            fmt_num(self.p_success),
            fmt_num(self.p_collision),
            fmt_num(self.p_idle),
            fmt_num(self.se_success),
            fmt_num(self.se_collision),
            fmt_num(self.se_idle),
            fmt_num(self.elapsed),
            join(&|n| n.successes.to_string()),
            join(&|n| n.delivered_bits.to_string()),
            join(&|n| fmt_num(n.energy)),
        ]
        .join(",")
    }
}

struct Inputs<'a> {
    tau: &'a [f64],
    n_t: &'a [u32],
    delivery: Vec<f64>,
    costs: Vec<CostModel>,
    record: bool,
}

fn run_shard(inp: &Inputs<'_>, seed: u64, shard: u64, slots: u64) -> Tally {
    let n = inp.tau.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    let mut t = Tally {
        nodes: if inp.record {
            vec![NodeTally::default(); n]
        } else {
            Vec::new()
        },
        ..Tally::default()
    };
    let mut transmitting = vec![false; n];
    for _ in 0..slots {
        let mut count = 0usize;
        let mut last = 0usize;
        for k in 0..n {
            let on = rng.random::<f64>() < inp.tau[k];
            transmitting[k] = on;
            if on {
                count += 1;
                last = k;
            }
        }
        let mut delivered = false;
        match count {
            0 => {
                t.idle += 1;
                t.elapsed += inp.costs[0].t_idle;
            }
            1 => {
                t.success += 1;
                t.elapsed += inp.costs[last].t_success;
                delivered = rng.random::<f64>() < inp.delivery[last];
            }
            _ => {
                t.collision += 1;
                t.elapsed += (0..n)
                    .filter(|&k| transmitting[k])
                    .map(|k| inp.costs[k].t_collision)
                    .fold(0.0, f64::max);
            }
        }
        if !inp.record {
            continue;
        }
        for (k, node) in t.nodes.iter_mut().enumerate() {
            let c = &inp.costs[k];
            let (time, energy) = match count {
                0 => (c.t_idle, c.e_idle),
                1 => (c.t_success, c.e_success),
                _ => (c.t_collision, c.e_collision),
            };
            let mut bits = 0.0;
            if transmitting[k] {
                if count == 1 {
                    node.successes += 1;
                    node.energy += c.e_success;
                    if delivered {
                        node.delivered_bits += inp.n_t[k] as u64;
                        bits = inp.n_t[k] as f64;
                    }
                } else {
                    node.energy += c.e_collision;
                }
            }
            node.rate.push(time, bits);
            node.efficiency.push(energy, bits);
        }
    }
    t
}

/// Simulates `cfg.num_slots` slots at the operating point `(tau, n_t)`.
pub fn simulate(net: &Network, tau: &AccessVector, n_t: &[u32], cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    if tau.len() != net.len() {
        return Err(Error::LengthMismatch {
            expected: net.len(),
            got: tau.len(),
        });
    }
    if n_t.len() != net.len() {
        return Err(Error::LengthMismatch {
            expected: net.len(),
            got: n_t.len(),
        });
    }
    let delivery = (0..net.len())
        .map(|k| net.segments[k].delivery(n_t[k], &net.phy))
        .collect::<Result<Vec<_>>>()?;
    let costs = (0..net.len())
        .map(|k| net.cost(k, n_t[k]))
        .collect::<Result<Vec<_>>>()?;
    let inp = Inputs {
        tau: tau.as_slice(),
        n_t,
        delivery,
        costs,
        record: cfg.record_per_node,
    };

    let shards = cfg.num_slots.div_ceil(SHARD_SLOTS);
    let tallies: Vec<Tally> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let slots = SHARD_SLOTS.min(cfg.num_slots - s * SHARD_SLOTS);
            run_shard(&inp, cfg.seed, s, slots)
        })
        .collect();
    let mut total = Tally {
        nodes: if cfg.record_per_node {
            vec![NodeTally::default(); net.len()]
        } else {
            Vec::new()
        },
        ..Tally::default()
    };
    for t in &tallies {
        total.merge(t);
    }

    let slots = cfg.num_slots;
    let freq = |c: u64| c as f64 / slots as f64;
    let se = |p: f64| (p * (1.0 - p) / slots as f64).sqrt();
    let (ps, pc, pi) = (freq(total.success), freq(total.collision), freq(total.idle));
    let nodes = total
        .nodes
        .iter()
        .map(|nt| {
            let (throughput, throughput_se) = nt.rate.estimate(slots).unwrap_or((0.0, 0.0));
            let eff = nt.efficiency.estimate(slots);
            NodeReport {
                successes: nt.successes,
                delivered_bits: nt.delivered_bits,
                energy: nt.energy,
                throughput,
                throughput_se,
                efficiency: eff.map(|e| e.0),
                efficiency_se: eff.map(|e| e.1),
            }
        })
        .collect();
    Ok(SimReport {
        seed: cfg.seed,
        num_slots: slots,
        success_slots: total.success,
        collision_slots: total.collision,
        idle_slots: total.idle,
        p_success: ps,
        p_collision: pc,
        p_idle: pi,
        se_success: se(ps),
        se_collision: se(pc),
        se_idle: se(pi),
        elapsed: total.elapsed,
        nodes,
    })
}

/// One analytic-versus-empirical comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: &'static str,
    pub node: Option<usize>,
    pub analytic: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub z: f64,
}

fn z_score(analytic: f64, empirical: f64, se: f64) -> f64 {
    let diff = empirical - analytic;
    if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 * analytic.abs().max(1.0) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Compares a report against the analytic metrics at the same operating
/// point. Probability standard errors use the analytic probabilities.
pub fn compare(report: &SimReport, analytic: &Evaluation) -> Vec<Comparison> {
    let n = report.num_slots as f64;
    let mut rows = Vec::new();
    for (quantity, a, e) in [
        ("p_success", analytic.state.p_success, report.p_success),
        ("p_collision", analytic.state.p_collision, report.p_collision),
        ("p_idle", analytic.state.p_idle, report.p_idle),
    ] {
        let se = (a * (1.0 - a) / n).max(0.0).sqrt();
        rows.push(Comparison {
            quantity,
            node: None,
            analytic: a,
            empirical: e,
            std_error: se,
            z: z_score(a, e, se),
        });
    }
    for (k, nr) in report.nodes.iter().enumerate() {
        let a = analytic.throughput[k];
        rows.push(Comparison {
            quantity: "throughput",
            node: Some(k),
            analytic: a,
            empirical: nr.throughput,
            std_error: nr.throughput_se,
            z: z_score(a, nr.throughput, nr.throughput_se),
        });
        if let (Some(a), Some(e), Some(se)) = (analytic.efficiency[k], nr.efficiency, nr.efficiency_se) {
            rows.push(Comparison {
                quantity: "efficiency",
                node: Some(k),
                analytic: a,
                empirical: e,
                std_error: se,
                z: z_score(a, e, se),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelParams, NcpbTable};
    use crate::cost::{EnergyParams, TimingParams};
    use crate::network::NodeSpec;
    use crate::phy::PhyConfig;

    fn net(distances: &[f64]) -> Network {
        Network::build(
            PhyConfig::default(),
            &ChannelParams::default(),
            &NcpbTable::default(),
            TimingParams::default(),
            EnergyParams::default(),
            distances.iter().map(|&d| NodeSpec::new(d, 0.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn silent_network() {
        let net = net(&[1.0, 2.0]);
        let cfg = SimConfig {
            num_slots: 1000,
            seed: 1,
            record_per_node: true,
        };
        let r = simulate(&net, &AccessVector::uniform(2, 0.0).unwrap(), &[126, 126], &cfg).unwrap();
        assert_eq!(r.p_idle, 1.0);
        assert_eq!(r.idle_slots, 1000);
        assert!(r.nodes.iter().all(|n| n.energy == 0.0 && n.delivered_bits == 0));
        assert!((r.elapsed - 1000.0 * 292e-6).abs() < 1e-12);
    }

    #[test]
    fn fair_coins_match_analytic() {
        let net = net(&[1.0, 1.0]);
        let tau = AccessVector::uniform(2, 0.5).unwrap();
        let cfg = SimConfig {
            num_slots: 1_000_000,
            seed: 7,
            record_per_node: false,
        };
        let r = simulate(&net, &tau, &[2646, 2646], &cfg).unwrap();
        assert_eq!(r.success_slots + r.collision_slots + r.idle_slots, 1_000_000);
        for (p, want) in [(r.p_success, 0.5), (r.p_collision, 0.25), (r.p_idle, 0.25)] {
            let bound = 3.0 * (want * (1.0 - want) / 1e6f64).sqrt();
            assert!((p - want).abs() <= bound, "{p} vs {want}");
        }
        assert!(r.nodes.is_empty());
    }

    #[test]
    fn deterministic_for_seed() {
        let net = net(&[1.0, 3.0, 5.0]);
        let tau = AccessVector::new(vec![0.1, 0.2, 0.05]).unwrap();
        let cfg = SimConfig {
            num_slots: 200_000,
            seed: 42,
            record_per_node: true,
        };
        let a = simulate(&net, &tau, &[2646, 1260, 630], &cfg).unwrap();
        let b = simulate(&net, &tau, &[2646, 1260, 630], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.csv_row(), b.csv_row());
        let c = simulate(&net, &tau, &[2646, 1260, 630], &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_node_time_accounting() {
        let net = net(&[1.0]);
        let cfg = SimConfig {
            num_slots: 100_000,
            seed: 3,
            record_per_node: true,
        };
        let r = simulate(&net, &AccessVector::new(vec![0.3]).unwrap(), &[1260], &cfg).unwrap();
        assert_eq!(r.collision_slots, 0);
        let c = net.cost(0, 1260).unwrap();
        let want = r.success_slots as f64 * c.t_success + r.idle_slots as f64 * c.t_idle;
        assert!((r.elapsed - want).abs() <= 1e-12 * want);
        assert!((r.nodes[0].energy - r.success_slots as f64 * c.e_success).abs() <= 1e-12 * r.nodes[0].energy);
    }

    #[test]
    fn three_node_throughput_within_three_se() {
        let net = net(&[1.0, 4.0, 8.0]);
        let tau = AccessVector::new(vec![0.12, 0.07, 0.2]).unwrap();
        let n_t = [2646, 1890, 1008];
        let cfg = SimConfig {
            num_slots: 1_000_000,
            seed: 11,
            record_per_node: true,
        };
        let r = simulate(&net, &tau, &n_t, &cfg).unwrap();
        let ev = net.evaluate(&tau, &n_t).unwrap();
        for row in compare(&r, &ev) {
            assert!(row.z.abs() <= 3.0, "{row:?}");
        }
    }

    #[test]
    fn rejects_zero_slots() {
        let net = net(&[1.0]);
        let cfg = SimConfig {
            num_slots: 0,
            ..SimConfig::default()
        };
        assert!(simulate(&net, &AccessVector::new(vec![0.1]).unwrap(), &[126], &cfg).is_err());
    }
}
