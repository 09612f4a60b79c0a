//! EECAP: energy-efficiency optimization of channel access probabilities.
//!
//! The solver runs in two stages.
//!
//! 1. **Feasibility.** Gauss-Seidel sweeps compute, for every node, the
//!    minimum access probability meeting its rate requirement and the
//!    throughput-optimal payload length, until the pair stops changing. The
//!    rate constraints are jointly satisfiable when every node obtains a
//!    value in (0, 1), the access probabilities sum to at most one, and the
//!    resulting throughputs meet the requirements.
//! 2. **Optimization.** If feasible, the sum of efficiencies (or of their
//!    logarithms) is maximized under the rate and access constraints by dual
//!    decomposition: each node in turn maximizes the Lagrangian over its own
//!    access probability (1-D search) and then over its payload length (grid
//!    scan), after which its rate multiplier is updated; the access
//!    multiplier is updated after every sweep. Otherwise the sum of
//!    log-throughputs is maximized under the access constraint alone.
//!
//! Multipliers are updated by clamped accumulation of normalized constraint
//! residuals, `lambda_k <- max(lambda_k + rho (1 - R_k / R_k^min), 0)` and
//! `mu <- max(mu + rho (sum tau - 1), 0)`, and the Lagrangian carries the
//! matching quadratic term (method of multipliers). `rho` doubles whenever a
//! sweep fails to cut the worst violation by a factor of four.
//!
//! The returned point is the best iterate that satisfies the constraints
//! (rates within [`RATE_TOL`]), never blindly the last one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::access::{state_probs, AccessVector};
use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::metrics::{energy_efficiency, nt_opt_for_throughput, tau_min_for_rate, throughput, TauMin};
use crate::network::Network;

/// Relative slack allowed on a rate constraint when judging feasibility.
pub const RATE_TOL: f64 = 1e-4;

/// Slack allowed on the access constraint `sum tau <= 1`.
pub const ACCESS_TOL: f64 = 1e-9;

const PRESCAN_POINTS: usize = 64;
const MAX_PENALTY: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    /// Sum of energy efficiencies.
    #[serde(rename = "ee")]
    Ee,
    /// Sum of log energy efficiencies.
    #[serde(rename = "logee")]
    LogEe,
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ee" => Ok(Objective::Ee),
            "logee" => Ok(Objective::LogEe),
            other => Err(format!("unknown objective `{other}` (expected ee or logee)")),
        }
    }
}

/// Which problem produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Ee,
    LogEe,
    LogThr,
}

impl From<Objective> for Variant {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Ee => Variant::Ee,
            Objective::LogEe => Variant::LogEe,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Ee => "EE",
            Variant::LogEe => "LogEE",
            Variant::LogThr => "LogTHR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub objective: Objective,
    pub max_outer_iters: usize,
    pub max_feasibility_iters: usize,
    /// Max-norm change of `(tau, N_T / N_T^max)` below which iteration stops.
    pub convergence_tol: f64,
    /// Resolution of the 1-D access probability search.
    pub inner_search_tol: f64,
    /// Initial multiplier step `rho`.
    pub multiplier_scale: f64,
    /// Starting access probability of every node.
    pub initial_tau: f64,
    /// Holds every payload at this length instead of optimizing it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_nt: Option<u32>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Ee,
            max_outer_iters: 200,
            max_feasibility_iters: 50,
            convergence_tol: 1e-6,
            inner_search_tol: 1e-5,
            multiplier_scale: 1.0,
            initial_tau: 0.01,
            fixed_nt: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(Error::config("solver.max_outer_iters", "must be positive"));
        }
        if self.max_feasibility_iters == 0 {
            return Err(Error::config("solver.max_feasibility_iters", "must be positive"));
        }
        for (key, v) in [
            ("solver.convergence_tol", self.convergence_tol),
            ("solver.inner_search_tol", self.inner_search_tol),
            ("solver.multiplier_scale", self.multiplier_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be finite and strictly positive (got {v})"),
                ));
            }
        }
        if self.inner_search_tol >= 0.5 {
            return Err(Error::config("solver.inner_search_tol", "must be below 0.5"));
        }
        if !(self.initial_tau > 0.0 && self.initial_tau < 1.0) {
            return Err(Error::config("solver.initial_tau", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Objective value of the iterate.
    pub objective: f64,
    /// Worst relative rate shortfall or access excess, zero when feasible.
    pub max_violation: f64,
    pub sum_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub tau_opt: AccessVector,
    pub nt_opt: Vec<u32>,
    /// Rate multipliers in normalized units (per unit relative shortfall).
    pub lambda: Vec<f64>,
    pub mu: f64,
    pub variant_used: Variant,
    /// Objective of the returned point.
    pub objective: f64,
    /// One entry per outer iteration.
    pub trace: Vec<TracePoint>,
    /// Whether the rate constraints were found jointly satisfiable.
    pub feasible: bool,
    /// Whether the iterates met the stopping criterion before the cap.
    pub converged: bool,
    pub iterations: usize,
}

/// Result of the feasibility stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOutcome {
    pub tau_min: AccessVector,
    pub nt_thr: Vec<u32>,
    pub feasible: bool,
    pub iterations: usize,
}

fn max_change(tau: &[f64], prev_tau: &[f64], nt: &[u32], prev_nt: &[u32], nt_max: u32) -> f64 {
    let dt = tau.iter().zip(prev_tau).map(|(a, b)| (a - b).abs());
    let dn = nt
        .iter()
        .zip(prev_nt)
        .map(|(&a, &b)| (a as f64 - b as f64).abs() / nt_max as f64);
    dt.chain(dn).fold(0.0, f64::max)
}

fn check_fixed_nt(net: &Network, cfg: &SolverConfig) -> Result<()> {
    if let Some(n_t) = cfg.fixed_nt {
        net.phy.check_payload(n_t).map_err(|_| {
            Error::config(
                "solver.fixed_nt",
                format!(
                    "must be a multiple of {} within [{}, {}]",
                    net.phy.n, net.phy.n_t_min, net.phy.n_t_max
                ),
            )
        })?;
    }
    Ok(())
}

/// When the rate is out of reach at the current payload length, looks for the
/// length needing the smallest access probability. A lossy link can only meet
/// its rate with short frames.
fn rescue_payload(net: &Network, cfg: &SolverConfig, k: usize, tau: &AccessVector) -> Result<Option<(f64, u32)>> {
    if cfg.fixed_nt.is_some() {
        return Ok(None);
    }
    let mut best: Option<(f64, u32)> = None;
    for &n_t in net.payload_grid() {
        let node = net.node(k, tau.get(k), n_t);
        let cost = net.cost(k, n_t)?;
        if let TauMin::Feasible(t) = tau_min_for_rate(&node, tau, &cost, &net.segments[k], &net.phy)? {
            if best.is_none_or(|b| t < b.0) {
                best = Some((t, n_t));
            }
        }
    }
    Ok(best)
}

/// Stage one: minimum access probabilities and throughput-optimal payloads.
pub fn feasibility_stage(net: &Network, cfg: &SolverConfig) -> Result<FeasibilityOutcome> {
    cfg.validate()?;
    check_fixed_nt(net, cfg)?;
    let n = net.len();
    let mut tau = vec![0.0; n];
    let mut nt = vec![cfg.fixed_nt.unwrap_or(net.phy.n_t_max); n];
    let mut signalled_infeasible = false;
    let mut iterations = 0;

    'sweeps: for _ in 0..cfg.max_feasibility_iters {
        iterations += 1;
        let (prev_tau, prev_nt) = (tau.clone(), nt.clone());
        for k in 0..n {
            let av = AccessVector::new(tau.clone())?;
            let node = net.node(k, tau[k], nt[k]);
            let cost = net.cost(k, nt[k])?;
            match tau_min_for_rate(&node, &av, &cost, &net.segments[k], &net.phy)? {
                TauMin::Feasible(t) => tau[k] = t,
                TauMin::Infeasible => match rescue_payload(net, cfg, k, &av)? {
                    Some((t, n_t)) => {
                        tau[k] = t;
                        nt[k] = n_t;
                    }
                    None => {
                        signalled_infeasible = true;
                        break 'sweeps;
                    }
                },
            }
            if cfg.fixed_nt.is_none() {
                let sp = state_probs(&AccessVector::new(tau.clone())?);
                let node = net.node(k, tau[k], nt[k]);
                let choice = nt_opt_for_throughput(&node, &sp, &cost, &net.timing, net.segments[k].cw, &net.phy)?;
                if choice.zero_throughput && node.r_min > 0.0 {
                    signalled_infeasible = true;
                    break 'sweeps;
                }
                nt[k] = choice.n_t;
            }
        }
        if max_change(&tau, &prev_tau, &nt, &prev_nt, net.phy.n_t_max) < cfg.convergence_tol {
            break;
        }
    }

    let tau_min = AccessVector::new(tau)?;
    let feasible = !signalled_infeasible && {
        let ev = net.evaluate(&tau_min, &nt)?;
        tau_min.sum() <= 1.0 + ACCESS_TOL
            && ev
                .throughput
                .iter()
                .zip(&net.specs)
                .all(|(&r, s)| r >= s.r_min * (1.0 - RATE_TOL))
    };
    Ok(FeasibilityOutcome {
        tau_min,
        nt_thr: nt,
        feasible,
        iterations,
    })
}

/// Metrics of one iterate.
struct Measured {
    rates: Vec<f64>,
    effs: Vec<f64>,
    sum_tau: f64,
}

/// Dual-decomposition engine shared by the three problem variants.
struct Engine<'a> {
    net: &'a Network,
    cfg: &'a SolverConfig,
    variant: Variant,
    /// `1 / R_k^min` for constrained nodes, zero otherwise.
    rate_weight: Vec<f64>,
    /// Objective normalization.
    scale: f64,
    lambda: Vec<f64>,
    mu: f64,
    rho: f64,
    /// Cost model per node and payload grid index.
    costs: Vec<Vec<CostModel>>,
    lo: f64,
    hi: f64,
}

/// Augmented-Lagrangian term of one constraint `g >= 0`.
fn penalty(g: f64, lambda: f64, rho: f64) -> f64 {
    if lambda - rho * g > 0.0 {
        lambda * g - 0.5 * rho * g * g
    } else {
        0.5 * lambda * lambda / rho
    }
}

impl<'a> Engine<'a> {
    fn new(net: &'a Network, cfg: &'a SolverConfig, variant: Variant) -> Result<Self> {
        let rate_weight = net
            .specs
            .iter()
            .map(|s| {
                if variant != Variant::LogThr && s.r_min > 0.0 {
                    1.0 / s.r_min
                } else {
                    0.0
                }
            })
            .collect();
        let costs = (0..net.len())
            .map(|k| {
                net.payload_grid()
                    .iter()
                    .map(|&n_t| net.cost(k, n_t))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let lo = if variant == Variant::Ee {
            0.0
        } else {
            cfg.inner_search_tol
        };
        Ok(Self {
            net,
            cfg,
            variant,
            rate_weight,
            scale: 1.0,
            lambda: vec![0.0; net.len()],
            mu: 0.0,
            rho: cfg.multiplier_scale,
            costs,
            lo,
            hi: 1.0 - cfg.inner_search_tol,
        })
    }

    fn grid_index(&self, n_t: u32) -> usize {
        ((n_t - self.net.phy.n_t_min) / self.net.phy.n) as usize
    }

    fn measure(&self, tau: &[f64], nt: &[u32]) -> Result<Measured> {
        let av = AccessVector::new(tau.to_vec())?;
        let sp = state_probs(&av);
        let mut rates = Vec::with_capacity(tau.len());
        let mut effs = Vec::with_capacity(tau.len());
        for k in 0..tau.len() {
            let node = self.net.node(k, tau[k], nt[k]);
            let cost = &self.costs[k][self.grid_index(nt[k])];
            let seg = &self.net.segments[k];
            rates.push(throughput(&node, &sp, cost, seg, &self.net.phy)?);
            effs.push(match energy_efficiency(&node, &sp, cost, seg, &self.net.phy) {
                Ok(e) => e,
                Err(Error::ZeroActivity(_)) => 0.0,
                Err(e) => return Err(e),
            });
        }
        Ok(Measured {
            rates,
            effs,
            sum_tau: av.sum(),
        })
    }

    fn objective(&self, m: &Measured) -> f64 {
        match self.variant {
            Variant::Ee => m.effs.iter().sum(),
            Variant::LogEe => m.effs.iter().map(|e| e.ln()).sum(),
            Variant::LogThr => m.rates.iter().map(|r| r.ln()).sum(),
        }
    }

    fn rate_residual(&self, k: usize, m: &Measured) -> f64 {
        m.rates[k] * self.rate_weight[k] - 1.0
    }

    fn violation(&self, m: &Measured) -> f64 {
        let rates = (0..m.rates.len())
            .filter(|&k| self.rate_weight[k] > 0.0)
            .map(|k| (-self.rate_residual(k, m)).max(0.0));
        rates.fold((m.sum_tau - 1.0).max(0.0), f64::max)
    }

    fn is_feasible(&self, m: &Measured) -> bool {
        m.sum_tau <= 1.0 + ACCESS_TOL
            && (0..m.rates.len())
                .filter(|&k| self.rate_weight[k] > 0.0)
                .all(|k| self.rate_residual(k, m) >= -RATE_TOL)
    }

    fn lagrangian(&self, tau: &[f64], nt: &[u32]) -> f64 {
        let Ok(m) = self.measure(tau, nt) else {
            return f64::NEG_INFINITY;
        };
        let mut value = self.objective(&m) / self.scale;
        for k in 0..m.rates.len() {
            if self.rate_weight[k] > 0.0 {
                value += penalty(self.rate_residual(k, &m), self.lambda[k], self.rho);
            }
        }
        value += penalty(1.0 - m.sum_tau, self.mu, self.rho);
        if value.is_nan() {
            f64::NEG_INFINITY
        } else {
            value
        }
    }

    /// Maximizes the Lagrangian over `tau[k]`: a coarse scan seeds a bracket
    /// that golden-section search refines to the configured resolution.
    fn best_tau(&self, k: usize, tau: &mut [f64], nt: &[u32]) {
        let current = tau[k];
        let mut eval = |x: f64| {
            tau[k] = x;
            self.lagrangian(tau, nt)
        };
        let current_value = eval(current);
        let step = (self.hi - self.lo) / (PRESCAN_POINTS - 1) as f64;
        let mut best_i = 0;
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..PRESCAN_POINTS {
            let v = eval(self.lo + step * i as f64);
            if v > best_v {
                best_v = v;
                best_i = i;
            }
        }
        let mut a = self.lo + step * best_i.saturating_sub(1) as f64;
        let mut b = (self.lo + step * (best_i + 1) as f64).min(self.hi);
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = eval(c);
        let mut fd = eval(d);
        while b - a > self.cfg.inner_search_tol {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d);
            }
        }
        let mut choice = (current, current_value);
        for x in [self.lo + step * best_i as f64, 0.5 * (a + b)] {
            let v = eval(x);
            if v > choice.1 {
                choice = (x, v);
            }
        }
        tau[k] = choice.0;
    }

    fn best_nt(&self, k: usize, tau: &[f64], nt: &mut [u32]) {
        if self.cfg.fixed_nt.is_some() {
            return;
        }
        let mut choice = (nt[k], self.lagrangian(tau, nt));
        for &n_t in self.net.payload_grid() {
            nt[k] = n_t;
            let v = self.lagrangian(tau, nt);
            if v > choice.1 {
                choice = (n_t, v);
            }
        }
        nt[k] = choice.0;
    }

    fn run(mut self, seed: Option<(Vec<f64>, Vec<u32>)>) -> Result<Solution> {
        let n = self.net.len();
        let mut tau = vec![self.cfg.initial_tau; n];
        let mut nt = match (&seed, self.cfg.fixed_nt) {
            (_, Some(n_t)) => vec![n_t; n],
            (Some((_, seed_nt)), None) => seed_nt.clone(),
            (None, None) => vec![self.net.phy.n_t_max; n],
        };

        let start = self.measure(&tau, &nt)?;
        if self.variant == Variant::Ee {
            let f0 = self.objective(&start);
            if f0.is_finite() && f0 > 0.0 {
                self.scale = f0;
            }
        }

        let mut best: Option<(f64, Vec<f64>, Vec<u32>)> = None;
        let mut consider = |obj: f64, tau: &[f64], nt: &[u32], feasible: bool| {
            if feasible
                && best
                    .as_ref()
                    .is_none_or(|b| obj > b.0 || (b.0 == f64::NEG_INFINITY && obj.is_finite()))
            {
                best = Some((obj, tau.to_vec(), nt.to_vec()));
            }
        };
        if let Some((t, n_t)) = seed {
            let m = self.measure(&t, &n_t)?;
            let obj = self.objective(&m);
            consider(obj, &t, &n_t, self.is_feasible(&m));
        }
        let obj0 = self.objective(&start);
        consider(obj0, &tau, &nt, self.is_feasible(&start));

        let mut trace = Vec::with_capacity(self.cfg.max_outer_iters);
        let mut converged = false;
        let mut prev_violation = f64::INFINITY;
        let mut iterations = 0;
        for _ in 0..self.cfg.max_outer_iters {
            iterations += 1;
            let (prev_tau, prev_nt) = (tau.clone(), nt.clone());
            for k in 0..n {
                self.best_tau(k, &mut tau, &nt);
                self.best_nt(k, &tau, &mut nt);
                if self.rate_weight[k] > 0.0 {
                    let m = self.measure(&tau, &nt)?;
                    let g = self.rate_residual(k, &m);
                    self.lambda[k] = (self.lambda[k] - self.rho * g).max(0.0);
                }
            }
            let m = self.measure(&tau, &nt)?;
            self.mu = (self.mu - self.rho * (1.0 - m.sum_tau)).max(0.0);

            let obj = self.objective(&m);
            let violation = self.violation(&m);
            trace.push(TracePoint {
                objective: obj,
                max_violation: violation,
                sum_tau: m.sum_tau,
            });
            consider(obj, &tau, &nt, self.is_feasible(&m));

            let change = max_change(&tau, &prev_tau, &nt, &prev_nt, self.net.phy.n_t_max);
            if change < self.cfg.convergence_tol && violation <= RATE_TOL * 1e-2 {
                converged = true;
                break;
            }
            if violation > 1e-9 && violation > 0.25 * prev_violation {
                self.rho = (self.rho * 2.0).min(MAX_PENALTY);
            }
            prev_violation = violation;
        }

        let feasible_found = best.is_some();
        let (objective, tau_best, nt_best) = match best {
            Some(b) => b,
            None => {
                let m = self.measure(&tau, &nt)?;
                (self.objective(&m), tau, nt)
            }
        };
        Ok(Solution {
            tau_opt: AccessVector::new(tau_best)?,
            nt_opt: nt_best,
            lambda: self.lambda,
            mu: self.mu,
            variant_used: self.variant,
            objective,
            trace,
            feasible: self.variant != Variant::LogThr && feasible_found,
            converged,
            iterations,
        })
    }
}

fn solve_dual_from(net: &Network, cfg: &SolverConfig, stage: &FeasibilityOutcome) -> Result<Solution> {
    let engine = Engine::new(net, cfg, cfg.objective.into())?;
    let seed = stage
        .feasible
        .then(|| (stage.tau_min.as_slice().to_vec(), stage.nt_thr.clone()));
    engine.run(seed)
}

/// Maximizes the (log-)efficiency objective of `cfg` under the rate and
/// access constraints. Intended for inputs whose feasibility stage succeeds.
pub fn solve_dual(net: &Network, cfg: &SolverConfig) -> Result<Solution> {
    let stage = feasibility_stage(net, cfg)?;
    solve_dual_from(net, cfg, &stage)
}

/// Maximizes the sum of log-throughputs under the access constraint only.
pub fn solve_logthr(net: &Network, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    check_fixed_nt(net, cfg)?;
    Engine::new(net, cfg, Variant::LogThr)?.run(None)
}

/// Full two-stage algorithm.
pub fn eecap(net: &Network, cfg: &SolverConfig) -> Result<Solution> {
    let stage = feasibility_stage(net, cfg)?;
    if stage.feasible {
        solve_dual_from(net, cfg, &stage)
    } else {
        solve_logthr(net, cfg)
    }
}
