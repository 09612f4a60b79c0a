//! TOML scenario files.
//!
//! ```toml
//! [phy]
//! n_t_max = 2646
//!
//! [channel]
//! exponent = 3.0
//! ncpb_table = [[3.0, 1], [5.0, 2], [10.5, 32]]
//!
//! [solver]
//! objective = "logee"
//!
//! [[nodes]]
//! d = 1.0
//! r_min = 1.0e6
//!
//! [[nodes]]
//! d = 2.0
//! r_min = 0.5e6
//! ```
//!
//! Every section is optional except the node list; omitted keys take their
//! defaults. An `[evaluate]` section with `tau` and `n_t` lists requests a
//! metrics-only evaluation at that operating point instead of a solve.
//! Validation errors name the offending key and, where it appears in the
//! file, its line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::access::AccessVector;
use crate::channel::{ChannelParams, NcpbTable};
use crate::cost::{EnergyParams, TimingParams};
use crate::error::{Error, Result};
use crate::network::{Network, NodeSpec};
use crate::phy::PhyConfig;
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ChannelSection {
    pl0_db: f64,
    d0: f64,
    exponent: f64,
    tx_eb_over_n0_at_d0: f64,
    ncpb_table: NcpbTable,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let c = ChannelParams::default();
        Self {
            pl0_db: c.pl0_db,
            d0: c.d0,
            exponent: c.exponent,
            tx_eb_over_n0_at_d0: c.tx_eb_over_n0_at_d0,
            ncpb_table: NcpbTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    d: f64,
    r_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
}

/// A user-supplied operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatePoint {
    pub tau: Vec<f64>,
    pub n_t: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    phy: PhyConfig,
    #[serde(default)]
    channel: ChannelSection,
    #[serde(default)]
    timing: TimingParams,
    #[serde(default)]
    energy: EnergyParams,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    nodes: Vec<NodeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    evaluate: Option<EvaluatePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub phy: PhyConfig,
    pub channel: ChannelParams,
    pub ncpb_table: NcpbTable,
    pub timing: TimingParams,
    pub energy: EnergyParams,
    pub solver: SolverConfig,
    pub nodes: Vec<NodeSpec>,
    pub evaluate: Option<EvaluatePoint>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::from_raw(RawScenario::default())
    }
}

/// 1-based line of `offset` in `src`.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Best-effort line of a dotted key such as `phy.k` or `nodes[1].r_min`.
fn locate(src: &str, key: &str) -> Option<usize> {
    let (section, field) = key.split_once('.').unwrap_or(("", key));
    let (section, index) = match section.split_once('[') {
        Some((name, rest)) => (name, rest.trim_end_matches(']').parse::<usize>().ok()),
        None => (section, None),
    };
    let field = field.split('[').next().unwrap_or(field);
    let lines: Vec<&str> = src.lines().collect();

    let mut start = 0;
    if !section.is_empty() {
        let header = if index.is_some() {
            format!("[[{section}]]")
        } else {
            format!("[{section}]")
        };
        let nth = index.unwrap_or(0);
        start = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.trim() == header)
            .nth(nth)
            .map(|(i, _)| i + 1)?;
    }
    for (i, l) in lines.iter().enumerate().skip(start) {
        let t = l.trim();
        if t.starts_with('[') {
            break;
        }
        if let Some(rest) = t.strip_prefix(field) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    (!section.is_empty()).then_some(start)
}

fn at_line(src: &str, err: Error) -> Error {
    let key = match &err {
        Error::InvalidConfig { key, .. } => key.clone(),
        Error::NoNodes => "nodes".to_string(),
        _ => return err,
    };
    match locate(src, &key) {
        Some(line) if line > 0 => Error::AtLine {
            line,
            inner: Box::new(err),
        },
        _ => err,
    }
}

impl Scenario {
    fn from_raw(raw: RawScenario) -> Self {
        let c = raw.channel;
        Self {
            phy: raw.phy,
            channel: ChannelParams {
                pl0_db: c.pl0_db,
                d0: c.d0,
                exponent: c.exponent,
                tx_eb_over_n0_at_d0: c.tx_eb_over_n0_at_d0,
            },
            ncpb_table: c.ncpb_table,
            timing: raw.timing,
            energy: raw.energy,
            solver: raw.solver,
            nodes: raw
                .nodes
                .into_iter()
                .map(|n| NodeSpec {
                    distance: n.d,
                    r_min: n.r_min,
                    sigma: n.sigma,
                })
                .collect(),
            evaluate: raw.evaluate,
        }
    }

    /// Parses and validates a scenario.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(src).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => Error::AtLine {
                    line: line_of(src, span.start),
                    inner: Box::new(Error::Parse(msg)),
                },
                None => Error::Parse(msg),
            }
        })?;
        let scenario = Self::from_raw(raw);
        scenario.validate().map_err(|e| at_line(src, e))?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&src)
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawScenario {
            phy: self.phy.clone(),
            channel: ChannelSection {
                pl0_db: self.channel.pl0_db,
                d0: self.channel.d0,
                exponent: self.channel.exponent,
                tx_eb_over_n0_at_d0: self.channel.tx_eb_over_n0_at_d0,
                ncpb_table: self.ncpb_table.clone(),
            },
            timing: self.timing.clone(),
            energy: self.energy.clone(),
            solver: self.solver.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeEntry {
                    d: n.distance,
                    r_min: n.r_min,
                    sigma: n.sigma,
                })
                .collect(),
            evaluate: self.evaluate.clone(),
        };
        toml::to_string(&raw).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.phy.validate()?;
        self.channel.validate()?;
        self.ncpb_table.validate()?;
        TimingParams {
            t_sym: Vec::new(),
            sigma: Vec::new(),
            ..self.timing.clone()
        }
        .validate()?;
        self.energy.validate()?;
        self.solver.validate()?;
        if let Some(n_t) = self.solver.fixed_nt {
            if self.phy.check_payload(n_t).is_err() {
                return Err(Error::config(
                    "solver.fixed_nt",
                    format!(
                        "must be a multiple of {} within [{}, {}]",
                        self.phy.n, self.phy.n_t_min, self.phy.n_t_max
                    ),
                ));
            }
        }
        if self.nodes.is_empty() {
            return Err(Error::NoNodes);
        }
        let max_d = self.ncpb_table.max_distance();
        for (i, n) in self.nodes.iter().enumerate() {
            if !(n.distance.is_finite() && n.distance > 0.0) {
                return Err(Error::config(
                    format!("nodes[{i}].d"),
                    "must be finite and strictly positive",
                ));
            }
            if n.distance > max_d {
                return Err(Error::config(
                    format!("nodes[{i}].d"),
                    format!("link out of supported range: must not exceed {max_d} m"),
                ));
            }
            if !(n.r_min.is_finite() && n.r_min >= 0.0) {
                return Err(Error::config(
                    format!("nodes[{i}].r_min"),
                    "must be finite and non-negative",
                ));
            }
            if let Some(s) = n.sigma {
                if !(s.is_finite() && s >= 0.0) {
                    return Err(Error::config(
                        format!("nodes[{i}].sigma"),
                        "must be finite and non-negative",
                    ));
                }
            }
        }
        if let Some(ev) = &self.evaluate {
            let n = self.nodes.len();
            if ev.tau.len() != n {
                return Err(Error::config(
                    "evaluate.tau",
                    format!("must list one value per node ({n})"),
                ));
            }
            if ev.n_t.len() != n {
                return Err(Error::config(
                    "evaluate.n_t",
                    format!("must list one value per node ({n})"),
                ));
            }
            if ev.tau.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(Error::config("evaluate.tau", "values must lie in [0, 1]"));
            }
            if ev.tau.iter().sum::<f64>() > 1.0 + crate::solver::ACCESS_TOL {
                return Err(Error::config("evaluate.tau", "values must sum to at most 1"));
            }
            if ev.n_t.iter().any(|&x| self.phy.check_payload(x).is_err()) {
                return Err(Error::config(
                    "evaluate.n_t",
                    format!(
                        "values must be multiples of {} within [{}, {}]",
                        self.phy.n, self.phy.n_t_min, self.phy.n_t_max
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn network(&self) -> Result<Network> {
        Network::build(
            self.phy.clone(),
            &self.channel,
            &self.ncpb_table,
            self.timing.clone(),
            self.energy.clone(),
            self.nodes.clone(),
        )
    }

    /// The `[evaluate]` operating point, if present.
    pub fn evaluate_point(&self) -> Result<Option<(AccessVector, Vec<u32>)>> {
        self.evaluate
            .as_ref()
            .map(|ev| Ok((AccessVector::new(ev.tau.clone())?, ev.n_t.clone())))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Objective;

    const TWO_NODES: &str = r#"
[solver]
objective = "logee"
fixed_nt = 2646

[[nodes]]
d = 1.0
r_min = 1.0e6

[[nodes]]
d = 1.0
r_min = 0.5e6
"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_toml_str(TWO_NODES).unwrap();
        assert_eq!(s.nodes.len(), 2);
        assert_eq!(s.nodes[1].r_min, 0.5e6);
        assert_eq!(s.solver.objective, Objective::LogEe);
        assert_eq!(s.solver.fixed_nt, Some(2646));
        assert_eq!(s.phy, PhyConfig::default());
        assert_eq!(s.ncpb_table, NcpbTable::default());
        assert!(s.network().is_ok());
    }

    #[test]
    fn round_trips() {
        let s = Scenario::from_toml_str(TWO_NODES).unwrap();
        let again = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn empty_node_list() {
        let err = Scenario::from_toml_str("[solver]\nmax_outer_iters = 10\n").unwrap_err();
        assert!(err.to_string().contains("at least one node required"), "{err}");
    }

    #[test]
    fn invalid_value_names_key_and_line() {
        let src = TWO_NODES.replace("r_min = 0.5e6", "r_min = -1.0");
        let err = Scenario::from_toml_str(&src).unwrap_err();
        match err {
            Error::AtLine { line, inner } => {
                assert_eq!(line, 12);
                assert!(inner.to_string().contains("nodes[1].r_min"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let src = "[phy]\nn = 63\nbogus = 1\n";
        let err = Scenario::from_toml_str(src).unwrap_err();
        match err {
            Error::AtLine { line, inner } => {
                assert_eq!(line, 3);
                assert!(inner.to_string().contains("bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_table_entry() {
        let src = format!("[channel]\nncpb_table = [[3.0, 3]]\n{TWO_NODES}");
        let err = Scenario::from_toml_str(&src).unwrap_err();
        assert!(err.to_string().contains("channel.ncpb_table[0]"), "{err}");
        assert!(err.to_string().starts_with("line 2"), "{err}");
    }

    #[test]
    fn out_of_range_node() {
        let src = TWO_NODES.replacen("d = 1.0", "d = 11.0", 1);
        let err = Scenario::from_toml_str(&src).unwrap_err();
        assert!(err.to_string().contains("nodes[0].d"), "{err}");
    }

    #[test]
    fn evaluate_section() {
        let src = format!("{TWO_NODES}\n[evaluate]\ntau = [0.1, 0.2]\nn_t = [2646, 1260]\n");
        let s = Scenario::from_toml_str(&src).unwrap();
        let (tau, n_t) = s.evaluate_point().unwrap().unwrap();
        assert_eq!(tau.as_slice(), &[0.1, 0.2]);
        assert_eq!(n_t, vec![2646, 1260]);
        let bad = src.replace("n_t = [2646, 1260]", "n_t = [2646, 1000]");
        assert!(Scenario::from_toml_str(&bad)
            .unwrap_err()
            .to_string()
            .contains("evaluate.n_t"));
    }

    #[test]
    fn off_grid_fixed_payload() {
        let src = TWO_NODES.replace("fixed_nt = 2646", "fixed_nt = 2600");
        let err = Scenario::from_toml_str(&src).unwrap_err();
        assert!(err.to_string().contains("solver.fixed_nt"), "{err}");
        assert!(err.to_string().starts_with("line 4"), "{err}");
    }
}
