use std::path::Path;

use eecap_core::sim::compare;
use eecap_core::{
    eecap, simulate, AccessVector, Error, Evaluation, Network, Result, Scenario, SimConfig, SimReport, Solution,
};
use rayon::prelude::*;

use crate::csv::{list, num, opt, Table};
use crate::{Axis, Failure};

/// Largest tolerated simulation z-score.
pub const Z_LIMIT: f64 = 4.0;

const SOLVE_HEADER: [&str; 15] = [
    "row",
    "index",
    "d",
    "r_min",
    "tau",
    "n_t",
    "n_cpb",
    "throughput",
    "efficiency",
    "variant",
    "feasible",
    "converged",
    "iterations",
    "sum_tau",
    "sum_eta",
];

fn sum_eta(ev: &Evaluation) -> f64 {
    ev.efficiency.iter().flatten().sum()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Operating point to report: the scenario's `[evaluate]` point, or the
/// solver's optimum.
fn operating_point(s: &Scenario, net: &Network) -> Result<(AccessVector, Vec<u32>, Option<Solution>)> {
    match s.evaluate_point()? {
        Some((tau, n_t)) => Ok((tau, n_t, None)),
        None => {
            let sol = eecap(net, &s.solver)?;
            if !sol.converged {
                eprintln!("warning: solver stopped at the iteration cap; reporting the best iterate");
            }
            Ok((sol.tau_opt.clone(), sol.nt_opt.clone(), Some(sol)))
        }
    }
}

pub fn solve(s: &Scenario, trace: Option<&Path>) -> std::result::Result<String, Failure> {
    let net = s.network()?;
    let (tau, n_t, sol) = operating_point(s, &net)?;
    let ev = net.evaluate(&tau, &n_t)?;

    let mut t = Table::new(&SOLVE_HEADER);
    for k in 0..net.len() {
        let mut row = vec![
            "node".to_string(),
            k.to_string(),
            num(net.specs[k].distance),
            num(net.specs[k].r_min),
            num(tau.get(k)),
            n_t[k].to_string(),
            net.links[k].n_cpb.to_string(),
            num(ev.throughput[k]),
            opt(ev.efficiency[k]),
        ];
        row.extend(std::iter::repeat_n(String::new(), 6));
        t.row(row);
    }
    let (variant, feasible, converged, iterations) = match &sol {
        Some(sol) => (
            sol.variant_used.to_string(),
            sol.feasible.to_string(),
            sol.converged.to_string(),
            sol.iterations.to_string(),
        ),
        None => ("evaluate".to_string(), String::new(), String::new(), "0".to_string()),
    };
    let mut summary = vec!["summary".to_string()];
    summary.extend(std::iter::repeat_n(String::new(), 8));
    summary.extend([
        variant,
        feasible,
        converged,
        iterations,
        num(tau.sum()),
        num(sum_eta(&ev)),
    ]);
    t.row(summary);

    if let Some(path) = trace {
        let mut tr = Table::new(&["iteration", "objective", "max_violation", "sum_tau"]);
        for (i, p) in sol.iter().flat_map(|s| &s.trace).enumerate() {
            tr.row(vec![
                (i + 1).to_string(),
                num(p.objective),
                num(p.max_violation),
                num(p.sum_tau),
            ]);
        }
        write_file(path, &tr.finish())?;
    }
    Ok(t.finish())
}

pub struct SweepSpec {
    pub axis: Axis,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub total_rate: Option<f64>,
}

impl SweepSpec {
    fn values(&self) -> Result<Vec<f64>> {
        if self.steps == 0 {
            return Err(Error::config("sweep.steps", "must be positive"));
        }
        if !(self.from.is_finite() && self.to.is_finite()) {
            return Err(Error::config("sweep.from", "range bounds must be finite"));
        }
        if self.total_rate.is_some() && self.axis != Axis::Nodes {
            return Err(Error::config("sweep.total_rate", "only applies to the nodes axis"));
        }
        if let Some(r) = self.total_rate {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::config("sweep.total_rate", "must be finite and non-negative"));
            }
        }
        if self.steps == 1 {
            return Ok(vec![self.from]);
        }
        let span = self.to - self.from;
        Ok((0..self.steps)
            .map(|i| self.from + span * i as f64 / (self.steps - 1) as f64)
            .collect())
    }

    fn scenario_at(&self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        s.evaluate = None;
        match self.axis {
            Axis::Nodes => {
                let n = value.round();
                if n.is_nan() || n < 1.0 {
                    return Err(Error::config("sweep.from", "node counts must be at least 1"));
                }
                let n = n as usize;
                let mut node = base.nodes[0];
                if let Some(total) = self.total_rate {
                    node.r_min = total / n as f64;
                }
                s.nodes = vec![node; n];
            }
            Axis::Rate => s.nodes.iter_mut().for_each(|nd| nd.r_min = value),
            Axis::Distance => s.nodes.iter_mut().for_each(|nd| nd.distance = value),
        }
        s.validate()?;
        Ok(s)
    }
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::Nodes => "nodes",
        Axis::Rate => "rate",
        Axis::Distance => "distance",
    }
}

pub fn sweep(base: &Scenario, spec: &SweepSpec) -> Result<String> {
    let values = spec.values()?;
    let scenarios = values
        .iter()
        .map(|&v| spec.scenario_at(base, v))
        .collect::<Result<Vec<_>>>()?;
    let results = scenarios
        .par_iter()
        .map(|s| {
            let net = s.network()?;
            let sol = eecap(&net, &s.solver)?;
            let ev = net.evaluate(&sol.tau_opt, &sol.nt_opt)?;
            Ok((net, sol, ev))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut t = Table::new(&[
        "point",
        "axis",
        "value",
        "nodes",
        "variant",
        "feasible",
        "converged",
        "iterations",
        "sum_tau",
        "sum_eta",
        "tau_1",
        "n_t_1",
        "n_cpb_1",
        "taus",
        "n_ts",
        "n_cpbs",
        "throughputs",
    ]);
    for (i, (value, (net, sol, ev))) in values.iter().zip(&results).enumerate() {
        if !sol.converged {
            eprintln!("warning: sweep point {i} stopped at the iteration cap");
        }
        t.row(vec![
            i.to_string(),
            axis_name(spec.axis).to_string(),
            num(*value),
            net.len().to_string(),
            sol.variant_used.to_string(),
            sol.feasible.to_string(),
            sol.converged.to_string(),
            sol.iterations.to_string(),
            num(sol.tau_opt.sum()),
            num(sum_eta(ev)),
            num(sol.tau_opt.get(0)),
            sol.nt_opt[0].to_string(),
            net.links[0].n_cpb.to_string(),
            list(sol.tau_opt.as_slice(), |x| num(*x)),
            list(&sol.nt_opt, |x| x.to_string()),
            list(&net.links, |l| l.n_cpb.to_string()),
            list(&ev.throughput, |x| num(*x)),
        ]);
    }
    Ok(t.finish())
}

pub fn validate(s: &Scenario, slots: u64, seed: u64, report: Option<&Path>) -> std::result::Result<String, Failure> {
    let cfg = SimConfig {
        num_slots: slots,
        seed,
        record_per_node: true,
    };
    cfg.validate()?;
    let net = s.network()?;
    let (tau, n_t, _) = operating_point(s, &net)?;
    let ev = net.evaluate(&tau, &n_t)?;
    let sim = simulate(&net, &tau, &n_t, &cfg)?;
    if let Some(path) = report {
        write_file(path, &format!("{}\n{}\n", SimReport::csv_header(), sim.csv_row()))?;
    }

    let mut t = Table::new(&[
        "seed",
        "slots",
        "quantity",
        "node",
        "analytic",
        "empirical",
        "std_error",
        "z",
    ]);
    let mut ok = true;
    for c in compare(&sim, &ev) {
        ok &= c.z.abs() <= Z_LIMIT;
        t.row(vec![
            seed.to_string(),
            slots.to_string(),
            c.quantity.to_string(),
            c.node.map(|k| k.to_string()).unwrap_or_default(),
            num(c.analytic),
            num(c.empirical),
            num(c.std_error),
            num(c.z),
        ]);
    }
    let out = t.finish();
    if ok {
        Ok(out)
    } else {
        Err(Failure::Mismatch(out))
    }
}
