//! Per-node energy efficiency and throughput, plus the closed forms used by
//! the feasibility stage of the optimizer.
//!
//! Both metrics share the numerator `N_T * P_k^S * P_PPDU(N_T)`, the expected
//! number of payload bits node k delivers per slot. Efficiency divides it by
//! the expected energy per slot and throughput by the expected slot duration,
//! each evaluated with node k's own per-state costs.
//!
//! Holding the other nodes fixed, every state probability is affine in
//! `tau_k` (see [`crate::access::linear_coeffs`]), so the throughput is a
//! linear-fractional function `A tau / (XT tau + YT)`. This gives the
//! derivative and the minimum access probability meeting a rate requirement
//! in closed form.

use serde::{Deserialize, Serialize};

use crate::access::{linear_coeffs, state_probs, AccessVector, StateProbs};
use crate::cost::{CostModel, TimingParams};
use crate::error::{Error, Result};
use crate::phy::{PhyConfig, SegmentProbs};

/// One node at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub index: usize,
    /// Distance to the hub, meters.
    pub distance: f64,
    pub tau: f64,
    /// Encoded payload length, bits.
    pub n_t: u32,
    /// Minimum throughput requirement, bits per second.
    pub r_min: f64,
}

/// Time aggregates of one node's throughput denominator.
///
/// `XT tau_k + YT` is the expected slot duration as a function of `tau_k`;
/// `TO + N_T TN` is the same duration split into its payload-independent part
/// and the per-bit slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateTerms {
    pub xt: f64,
    pub yt: f64,
    pub to: f64,
    pub tn: f64,
}

/// Outcome of the minimum access probability computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TauMin {
    Feasible(f64),
    /// No access probability in (0, 1) meets the requirement.
    Infeasible,
}

impl TauMin {
    pub fn value(self) -> Option<f64> {
        match self {
            TauMin::Feasible(t) => Some(t),
            TauMin::Infeasible => None,
        }
    }
}

/// Throughput-optimal payload length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NtChoice {
    pub n_t: u32,
    /// Set when no payload length gives non-zero throughput.
    pub zero_throughput: bool,
}

fn check_index(node: &Node, net: &StateProbs) -> Result<()> {
    if node.index >= net.per_node_success.len() {
        return Err(Error::NodeIndex {
            index: node.index,
            len: net.per_node_success.len(),
        });
    }
    Ok(())
}

/// Expected payload bits delivered by the node per slot.
pub fn delivered_bits(node: &Node, net: &StateProbs, seg: &SegmentProbs, phy: &PhyConfig) -> Result<f64> {
    check_index(node, net)?;
    Ok(node.n_t as f64 * net.per_node_success[node.index] * seg.delivery(node.n_t, phy)?)
}

/// Delivered payload bits per joule.
pub fn energy_efficiency(
    node: &Node,
    net: &StateProbs,
    cost: &CostModel,
    seg: &SegmentProbs,
    phy: &PhyConfig,
) -> Result<f64> {
    let bits = delivered_bits(node, net, seg, phy)?;
    let energy = net.p_success * cost.e_success + net.p_collision * cost.e_collision + net.p_idle * cost.e_idle;
    if !(energy > 0.0) {
        return Err(Error::ZeroActivity(node.index));
    }
    Ok(bits / energy)
}

/// Delivered payload bits per second.
pub fn throughput(node: &Node, net: &StateProbs, cost: &CostModel, seg: &SegmentProbs, phy: &PhyConfig) -> Result<f64> {
    let bits = delivered_bits(node, net, seg, phy)?;
    let time = net.p_success * cost.t_success + net.p_collision * cost.t_collision + net.p_idle * cost.t_idle;
    if !(time > 0.0) {
        return Err(Error::DegenerateDenominator(node.index));
    }
    Ok(bits / time)
}

/// `TO` and `TN` need the payload-independent parts of the success and
/// collision durations; they are recovered from the cost model by removing
/// the PSDU airtime.
fn payload_split(node: &Node, net: &StateProbs, cost: &CostModel, tp: &TimingParams) -> Result<(f64, f64)> {
    let t_sym = *tp.t_sym.get(node.index).ok_or(Error::NodeIndex {
        index: node.index,
        len: tp.len(),
    })?;
    let airtime = node.n_t as f64 * t_sym;
    let to = net.p_success * (cost.t_success - airtime)
        + net.p_collision * (cost.t_collision - airtime)
        + net.p_idle * cost.t_idle;
    let tn = (net.p_success + net.p_collision) * t_sym;
    Ok((to, tn))
}

pub fn aggregate_terms(node: &Node, tau: &AccessVector, cost: &CostModel, tp: &TimingParams) -> Result<AggregateTerms> {
    let lc = linear_coeffs(tau, node.index)?;
    let xt = lc.x_s * cost.t_success + lc.x_c * cost.t_collision + lc.x_i * cost.t_idle;
    let yt = lc.y_s * cost.t_success + lc.y_c * cost.t_collision + lc.y_i * cost.t_idle;
    let (to, tn) = payload_split(node, &state_probs(tau), cost, tp)?;
    Ok(AggregateTerms { xt, yt, to, tn })
}

/// Slope `A` of the throughput numerator in `tau_k`, together with XT and YT.
/// The coefficients do not depend on `tau_k` itself.
fn linear_fraction(
    node: &Node,
    tau: &AccessVector,
    cost: &CostModel,
    seg: &SegmentProbs,
    phy: &PhyConfig,
) -> Result<(f64, f64, f64)> {
    if node.index >= tau.len() {
        return Err(Error::NodeIndex {
            index: node.index,
            len: tau.len(),
        });
    }
    let others = tau.with(node.index, 0.0)?;
    let lc = linear_coeffs(&others, node.index)?;
    let xt = lc.x_s * cost.t_success + lc.x_c * cost.t_collision + lc.x_i * cost.t_idle;
    let yt = lc.y_s * cost.t_success + lc.y_c * cost.t_collision + lc.y_i * cost.t_idle;
    let p_k = 1.0 - lc.y_i;
    let slope = node.n_t as f64 * (1.0 - p_k) * seg.delivery(node.n_t, phy)?;
    Ok((slope, xt, yt))
}

/// Closed-form `dR_k / dtau_k`; never negative.
pub fn throughput_derivative_tau(
    node: &Node,
    tau: &AccessVector,
    cost: &CostModel,
    seg: &SegmentProbs,
    phy: &PhyConfig,
) -> Result<f64> {
    let (slope, xt, yt) = linear_fraction(node, tau, cost, seg, phy)?;
    let denom = xt * tau.get(node.index) + yt;
    if !(denom > 0.0) {
        return Err(Error::DegenerateDenominator(node.index));
    }
    Ok(slope * yt / (denom * denom))
}

/// Smallest `tau_k` giving node k throughput `r_min`, the other entries of
/// `tau` held fixed. The node's own entry in `tau` is ignored.
pub fn tau_min_for_rate(
    node: &Node,
    tau: &AccessVector,
    cost: &CostModel,
    seg: &SegmentProbs,
    phy: &PhyConfig,
) -> Result<TauMin> {
    if node.r_min <= 0.0 {
        return Ok(TauMin::Feasible(0.0));
    }
    let (slope, xt, yt) = linear_fraction(node, tau, cost, seg, phy)?;
    let denom = slope - node.r_min * xt;
    if !(denom > 0.0) {
        return Ok(TauMin::Infeasible);
    }
    let t = node.r_min * yt / denom;
    if t > 0.0 && t < 1.0 {
        Ok(TauMin::Feasible(t))
    } else {
        Ok(TauMin::Infeasible)
    }
}

/// Stationary point of `N c^N / (TO + N TN)` with `c = p_cw^(1/n)`.
///
/// Setting the log-derivative to zero gives `a TN N^2 + a TO N - TO = 0` with
/// `a = -ln(p_cw) / n`; the positive root is written in the form that does
/// not cancel. The function is log-concave in N, so this is the global
/// maximizer over N > 0.
pub fn nt_stationary_point(p_cw: f64, to: f64, tn: f64, n: u32) -> f64 {
    let a = -p_cw.ln() / n as f64;
    if a <= 0.0 {
        return f64::INFINITY;
    }
    2.0 * to / (a * to + (a * a * to * to + 4.0 * a * tn * to).sqrt())
}

/// Payload length on the codeword grid that maximizes node k's throughput at
/// the current channel-state probabilities.
pub fn nt_opt_for_throughput(
    node: &Node,
    net: &StateProbs,
    cost: &CostModel,
    tp: &TimingParams,
    p_cw: f64,
    phy: &PhyConfig,
) -> Result<NtChoice> {
    check_index(node, net)?;
    if p_cw <= 0.0 {
        return Ok(NtChoice {
            n_t: phy.n_t_min,
            zero_throughput: true,
        });
    }
    if p_cw >= 1.0 {
        return Ok(NtChoice {
            n_t: phy.n_t_max,
            zero_throughput: false,
        });
    }
    let (to, tn) = payload_split(node, net, cost, tp)?;
    let n = phy.n as f64;
    let star = nt_stationary_point(p_cw, to, tn, phy.n).clamp(phy.n_t_min as f64, phy.n_t_max as f64);
    let below = ((star / n).floor() * n) as u32;
    let lo = below.clamp(phy.n_t_min, phy.n_t_max);
    let hi = (below + phy.n).clamp(phy.n_t_min, phy.n_t_max);
    let a = -p_cw.ln() / n;
    let score = |n_t: u32| {
        let x = n_t as f64;
        x.ln() - a * x - (to + x * tn).ln()
    };
    let n_t = if score(hi) > score(lo) { hi } else { lo };
    Ok(NtChoice {
        n_t,
        zero_throughput: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{cost_model, EnergyParams};
    use proptest::prelude::*;

    const T_SYM: f64 = 32.0 / 499.2e6;

    fn timing(n: usize) -> TimingParams {
        TimingParams {
            t_sym: vec![T_SYM; n],
            sigma: vec![3.3e-9; n],
            ..TimingParams::default()
        }
    }

    fn node(index: usize, tau: &[f64], n_t: u32, r_min: f64) -> Node {
        Node {
            index,
            distance: 1.0,
            tau: tau[index],
            n_t,
            r_min,
        }
    }

    struct Case {
        tau: AccessVector,
        tp: TimingParams,
        ep: EnergyParams,
        seg: SegmentProbs,
        phy: PhyConfig,
        n_t: u32,
    }

    impl Case {
        fn new(tau: Vec<f64>, n_t: u32, seg: SegmentProbs) -> Self {
            let n = tau.len();
            Self {
                tau: AccessVector::new(tau).unwrap(),
                tp: timing(n),
                ep: EnergyParams::default(),
                seg,
                phy: PhyConfig::default(),
                n_t,
            }
        }
        fn cost(&self, k: usize) -> CostModel {
            cost_model(k, self.n_t, &self.tp, &self.ep).unwrap()
        }
        fn node(&self, k: usize) -> Node {
            node(k, self.tau.as_slice(), self.n_t, 0.0)
        }
        fn rate_at(&self, k: usize, t: f64) -> f64 {
            let tau = self.tau.with(k, t).unwrap();
            let nd = Node { tau: t, ..self.node(k) };
            throughput(&nd, &state_probs(&tau), &self.cost(k), &self.seg, &self.phy).unwrap()
        }
    }

    #[test]
    fn idle_node_has_zero_metrics() {
        let c = Case::new(vec![0.0, 0.3], 2646, SegmentProbs::ideal());
        let sp = state_probs(&c.tau);
        assert_eq!(
            energy_efficiency(&c.node(0), &sp, &c.cost(0), &c.seg, &c.phy).unwrap(),
            0.0
        );
        assert_eq!(throughput(&c.node(0), &sp, &c.cost(0), &c.seg, &c.phy).unwrap(), 0.0);
    }

    #[test]
    fn zero_activity_is_an_error() {
        let c = Case::new(vec![0.0, 0.0], 2646, SegmentProbs::ideal());
        let sp = state_probs(&c.tau);
        assert_eq!(
            energy_efficiency(&c.node(0), &sp, &c.cost(0), &c.seg, &c.phy),
            Err(Error::ZeroActivity(0))
        );
    }

    #[test]
    fn lone_saturated_node() {
        let c = Case::new(vec![1.0], 1260, SegmentProbs::ideal());
        let sp = state_probs(&c.tau);
        let cm = c.cost(0);
        let eta = energy_efficiency(&c.node(0), &sp, &cm, &c.seg, &c.phy).unwrap();
        let r = throughput(&c.node(0), &sp, &cm, &c.seg, &c.phy).unwrap();
        assert!((eta - 1260.0 / cm.e_success).abs() < 1e-9 * eta);
        assert!((r - 1260.0 / cm.t_success).abs() < 1e-9 * r);
    }

    #[test]
    fn two_fair_coins_by_enumeration() {
        let mut c = Case::new(vec![0.5, 0.5], 2646, SegmentProbs::ideal());
        c.ep = EnergyParams {
            eps_b: 0.0,
            eps_oh: 1.0,
            eps_st: 0.0,
            eps_b_tx: 0.0,
            eps_oh_tx: 1.0,
            eps_st_tx: 0.0,
        };
        let sp = state_probs(&c.tau);
        let cm = c.cost(0);
        // Outcomes: node 0 alone (1/4), node 1 alone (1/4), both (1/4), none (1/4).
        let eta = energy_efficiency(&c.node(0), &sp, &cm, &c.seg, &c.phy).unwrap();
        assert!((eta - 2646.0 * 0.25 / 0.75).abs() < 1e-9);
        let r = throughput(&c.node(0), &sp, &cm, &c.seg, &c.phy).unwrap();
        let want = 0.25 * 2646.0 / (0.5 * cm.t_success + 0.25 * cm.t_collision + 0.25 * cm.t_idle);
        assert!((r - want).abs() < 1e-9 * want);
    }

    #[test]
    fn derivative_vanishes_when_others_saturate() {
        let c = Case::new(vec![0.3, 1.0], 2646, SegmentProbs::ideal());
        let d = throughput_derivative_tau(&c.node(0), &c.tau, &c.cost(0), &c.seg, &c.phy).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn zero_rate_needs_no_access() {
        let c = Case::new(vec![0.2, 0.4], 2646, SegmentProbs::ideal());
        let got = tau_min_for_rate(&c.node(0), &c.tau, &c.cost(0), &c.seg, &c.phy).unwrap();
        assert_eq!(got, TauMin::Feasible(0.0));
    }

    #[test]
    fn unreachable_rate_is_infeasible() {
        let c = Case::new(vec![0.2, 0.5], 2646, SegmentProbs::ideal());
        let nd = Node {
            r_min: 2.0e7,
            ..c.node(0)
        };
        let got = tau_min_for_rate(&nd, &c.tau, &c.cost(0), &c.seg, &c.phy).unwrap();
        assert_eq!(got, TauMin::Infeasible);
    }

    #[test]
    fn perfect_codewords_use_longest_frame() {
        let c = Case::new(vec![0.1, 0.1], 1260, SegmentProbs::ideal());
        let sp = state_probs(&c.tau);
        let got = nt_opt_for_throughput(&c.node(0), &sp, &c.cost(0), &c.tp, 1.0, &c.phy).unwrap();
        assert_eq!(
            got,
            NtChoice {
                n_t: 2646,
                zero_throughput: false
            }
        );
        let got = nt_opt_for_throughput(&c.node(0), &sp, &c.cost(0), &c.tp, 0.0, &c.phy).unwrap();
        assert_eq!(
            got,
            NtChoice {
                n_t: 126,
                zero_throughput: true
            }
        );
        let got = nt_opt_for_throughput(&c.node(0), &sp, &c.cost(0), &c.tp, 1e-6, &c.phy).unwrap();
        assert_eq!(got.n_t, 126);
    }

    fn arb_case() -> impl Strategy<Value = (Vec<f64>, u32, f64)> {
        (
            proptest::collection::vec(0.001f64..0.9, 1..=6),
            2u32..=42,
            prop_oneof![Just(0.0), 1e-4f64..0.05],
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn derivative_matches_finite_difference((tau, cw, p_b) in arb_case(), pick in 0usize..6) {
            let phy = PhyConfig::default();
            let c = Case::new(tau, cw * 63, SegmentProbs::from_bit_error(p_b, &phy));
            let k = pick % c.tau.len();
            let t = c.tau.get(k).clamp(1e-5, 1.0 - 1e-5);
            let c = Case { tau: c.tau.with(k, t).unwrap(), ..c };
            let closed = throughput_derivative_tau(&c.node(k), &c.tau, &c.cost(k), &c.seg, &c.phy).unwrap();
            let h = 1e-6;
            let fd = (c.rate_at(k, t + h) - c.rate_at(k, t - h)) / (2.0 * h);
            prop_assert!(closed >= 0.0);
            prop_assert!((closed - fd).abs() <= 1e-4 * closed.abs().max(1e-3), "closed {closed} fd {fd}");
            let terms = aggregate_terms(&c.node(k), &c.tau, &c.cost(k), &c.tp).unwrap();
            prop_assert!(terms.yt >= 0.0);
        }

        #[test]
        fn throughput_non_decreasing_in_own_access((tau, cw, p_b) in arb_case(), pick in 0usize..6, dt in 1e-4f64..0.05) {
            let phy = PhyConfig::default();
            let c = Case::new(tau, cw * 63, SegmentProbs::from_bit_error(p_b, &phy));
            let k = pick % c.tau.len();
            let t = c.tau.get(k);
            prop_assert!(c.rate_at(k, (t + dt).min(1.0)) >= c.rate_at(k, t) * (1.0 - 1e-12));
        }

        #[test]
        fn minimum_access_reproduces_rate((tau, cw, p_b) in arb_case(), pick in 0usize..6, frac in 0.01f64..0.95) {
            let phy = PhyConfig::default();
            let c = Case::new(tau, cw * 63, SegmentProbs::from_bit_error(p_b, &phy));
            let k = pick % c.tau.len();
            // Pick a requirement below what tau_k = 0.99 achieves.
            let r_min = frac * c.rate_at(k, 0.99);
            prop_assume!(r_min > 0.0);
            let nd = Node { r_min, ..c.node(k) };
            let t = tau_min_for_rate(&nd, &c.tau, &c.cost(k), &c.seg, &c.phy).unwrap();
            let t = t.value().expect("feasible");
            let r = c.rate_at(k, t);
            prop_assert!((r - r_min).abs() <= 1e-9 * r_min, "r {r} r_min {r_min}");
        }

        #[test]
        fn payload_choice_beats_exhaustive_scan((tau, _cw, p_b) in arb_case(), pick in 0usize..6) {
            let phy = PhyConfig::default();
            let seg = SegmentProbs::from_bit_error(p_b, &phy);
            let c = Case::new(tau, 126, seg);
            let k = pick % c.tau.len();
            let sp = state_probs(&c.tau);
            let got = nt_opt_for_throughput(&c.node(k), &sp, &c.cost(k), &c.tp, seg.cw, &phy).unwrap();
            let rate = |n_t: u32| {
                let cm = cost_model(k, n_t, &c.tp, &c.ep).unwrap();
                let nd = Node { n_t, ..c.node(k) };
                throughput(&nd, &sp, &cm, &seg, &phy).unwrap()
            };
            let best = phy.payload_grid().into_iter().map(rate).fold(f64::MIN, f64::max);
            prop_assert!(rate(got.n_t) >= best * (1.0 - 1e-12));
        }

        #[test]
        fn energy_scaling(tau in proptest::collection::vec(0.01f64..0.9, 1..=5), scale in 0.01f64..100.0) {
            let c = Case::new(tau, 1260, SegmentProbs::ideal());
            let sp = state_probs(&c.tau);
            for k in 0..c.tau.len() {
                let base = c.cost(k);
                let scaled = cost_model(k, c.n_t, &c.tp, &c.ep.scaled(scale)).unwrap();
                let e0 = energy_efficiency(&c.node(k), &sp, &base, &c.seg, &c.phy).unwrap();
                let e1 = energy_efficiency(&c.node(k), &sp, &scaled, &c.seg, &c.phy).unwrap();
                prop_assert!((e1 - e0 / scale).abs() <= 1e-12 * e0 / scale);
                let r0 = throughput(&c.node(k), &sp, &base, &c.seg, &c.phy).unwrap();
                let r1 = throughput(&c.node(k), &sp, &scaled, &c.seg, &c.phy).unwrap();
                prop_assert_eq!(r0, r1);
            }
        }
    }
}
