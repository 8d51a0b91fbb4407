//! JSON network and report files.
//!
//! Agents and edges are 1-based in files. A network file looks like
//!
//! ```json
//! {
//!   "version": 1,
//!   "agents": [{ "id": 1, "dynamics": { "tf": { "num": [1.0], "den": [1.0, 25.0] } } }, ...],
//!   "edges": [[1, 2], [2, 3]],
//!   "uncertainty": { "type": "sector", "alpha": -2.0, "beta": 0.15,
//!                    "overrides": [{ "agent": 2, "alpha": -1.0, "beta": 0.1 }] },
//!   "options": { "eps_min": 1e-6, "margin": 1e-9, "grid": { "lo": 1e-3, "hi": 1e5, "points": 200 } }
//! }
//! ```
//!
//! `tf` agents (and single-input `ss` agents) are copied onto all `m_i` link
//! inputs with one shared state.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NetworkGraph};
use crate::kyp::{log_grid, Assumption1Summary, CertificateReport, KypOptions, MethodReport, overall_verdict};
use crate::lti::{validate_agents, LtiError, StateSpace};
use crate::multiplier::{sector_multiplier, MultiplierError, NetworkMultiplier};

pub const FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema error at line {line}, column {column}: {msg}")]
    SchemaError { line: usize, column: usize, msg: String },
    #[error("{path}: {msg}")]
    ValidationError { path: String, msg: String },
    #[error("bad topology parameters: {0}")]
    BadTopologyParams(String),
}

fn invalid(path: impl Into<String>, msg: impl Into<String>) -> FileError {
    FileError::ValidationError { path: path.into(), msg: msg.into() }
}

fn schema(e: serde_json::Error) -> FileError {
    FileError::SchemaError { line: e.line(), column: e.column(), msg: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub version: u32,
    pub agents: Vec<AgentEntry>,
    pub edges: Vec<[usize; 2]>,
    pub uncertainty: Uncertainty,
    #[serde(default, skip_serializing_if = "FileOptions::is_empty")]
    pub options: FileOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub id: usize,
    pub dynamics: Dynamics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    Tf { num: Vec<f64>, den: Vec<f64> },
    Ss {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
        #[serde(rename = "C")]
        c: Vec<Vec<f64>>,
        #[serde(rename = "D")]
        d: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Uncertainty {
    Sector {
        alpha: f64,
        beta: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        overrides: Vec<SectorOverride>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorOverride {
    pub agent: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl FileOptions {
    fn is_empty(&self) -> bool {
        self == &FileOptions::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// A validated network ready for certification (0-based internally).
#[derive(Debug, Clone)]
pub struct Network {
    pub graph: NetworkGraph,
    pub agents: Vec<StateSpace>,
    pub multiplier: NetworkMultiplier,
    /// `(α, β)` per agent after overrides.
    pub sectors: Vec<(f64, f64)>,
    pub options: KypOptions,
}

fn matrix(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>, FileError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(invalid(path, "rows have different lengths"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn lti_kind(e: &LtiError) -> &'static str {
    match e {
        LtiError::DimensionMismatch(_) => "DimensionMismatch",
        LtiError::ImproperTF { .. } => "ImproperTF",
        LtiError::UnstableTF(_) => "UnstableTF",
        LtiError::ZeroDenominator => "ZeroDenominator",
        LtiError::SingularResolvent(_) => "SingularResolvent",
        LtiError::UnstableAgent { .. } => "UnstableAgent",
    }
}

fn lti_invalid(path: &str, e: LtiError) -> FileError {
    invalid(path, format!("{} ({e})", lti_kind(&e)))
}

fn realize(dyn_: &Dynamics, m: usize, path: &str) -> Result<StateSpace, FileError> {
    let ss = match dyn_ {
        Dynamics::Tf { num, den } => {
            StateSpace::from_transfer_function(num, den).map_err(|e| lti_invalid(path, e))?
        }
        Dynamics::Ss { a, b, c, d } => {
            let a = matrix(a, &format!("{path}.A"))?;
            let mut b = matrix(b, &format!("{path}.B"))?;
            let c = matrix(c, &format!("{path}.C"))?;
            let d = matrix(d, &format!("{path}.D"))?;
            // an empty A/B/C with a D row means a static gain
            if a.nrows() == 0 && b.nrows() == 0 {
                b = DMatrix::zeros(0, d.ncols());
            }
            let c = if a.nrows() == 0 && c.ncols() == 0 { DMatrix::zeros(d.nrows(), 0) } else { c };
            let ss = StateSpace::new(a, b, c, d).map_err(|e| lti_invalid(path, e))?;
            if ss.nx() > 0 && !ss.is_hurwitz(crate::lti::HURWITZ_TOL) {
                return Err(lti_invalid(
                    path,
                    LtiError::UnstableTF(ss.spectral_abscissa()),
                ));
            }
            ss
        }
    };
    if ss.ny() != 1 {
        return Err(invalid(path, format!("agents must have one output, got {}", ss.ny())));
    }
    if ss.nu() == m {
        Ok(ss)
    } else if ss.nu() == 1 {
        ss.with_shared_inputs(m).map_err(|e| lti_invalid(path, e))
    } else {
        Err(invalid(path, format!("{} inputs, agent has {m} links", ss.nu())))
    }
}

impl NetworkFile {
    pub fn from_json(text: &str) -> Result<Self, FileError> {
        serde_json::from_str(text).map_err(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network file serializes")
    }

    /// Runs every check and builds the internal model.
    pub fn validate(&self) -> Result<Network, FileError> {
        if self.version != FILE_VERSION {
            return Err(invalid("version", format!("unsupported version {}, expected {FILE_VERSION}", self.version)));
        }
        let n = self.agents.len();
        for (k, a) in self.agents.iter().enumerate() {
            if a.id != k + 1 {
                return Err(invalid(format!("agents[{k}].id"), format!("ids must be 1..{n} in order, got {}", a.id)));
            }
        }
        if n < 2 {
            return Err(invalid("agents", "at least two agents are required"));
        }
        let mut pairs = Vec::with_capacity(self.edges.len());
        for (k, &[i, j]) in self.edges.iter().enumerate() {
            let path = format!("edges[{k}]");
            for v in [i, j] {
                if v == 0 || v > n {
                    return Err(invalid(&path, format!("agent {v} does not exist (ids are 1..{n})")));
                }
            }
            if i == j {
                return Err(invalid(&path, graph_msg(GraphError::SelfLoop(i))));
            }
            let e = ((i - 1).min(j - 1), (i - 1).max(j - 1));
            if pairs.contains(&e) {
                return Err(invalid(&path, graph_msg(GraphError::DuplicateEdge(e.0 + 1, e.1 + 1))));
            }
            pairs.push(e);
        }
        let graph = NetworkGraph::new(n, &pairs).map_err(|e| invalid("edges", graph_msg(e)))?;

        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(k, a)| realize(&a.dynamics, graph.degree(k), &format!("agents[{k}].dynamics")))
            .collect::<Result<Vec<_>, _>>()?;
        validate_agents(&graph, &agents).map_err(|e| lti_invalid("agents", e))?;

        let Uncertainty::Sector { alpha, beta, overrides } = &self.uncertainty;
        let mut sectors = vec![(*alpha, *beta); n];
        for (k, o) in overrides.iter().enumerate() {
            if o.agent == 0 || o.agent > n {
                return Err(invalid(format!("uncertainty.overrides[{k}].agent"), format!("agent {} does not exist", o.agent)));
            }
            sectors[o.agent - 1] = (o.alpha, o.beta);
        }
        let mut blocks = Vec::with_capacity(n);
        for (i, &(a, b)) in sectors.iter().enumerate() {
            let path = match overrides.iter().rposition(|o| o.agent == i + 1) {
                Some(k) => format!("uncertainty.overrides[{k}]"),
                None => "uncertainty".to_string(),
            };
            blocks.push(sector_multiplier(graph.degree(i), a, b).map_err(|e| invalid(path, mult_msg(e)))?);
        }
        let multiplier = NetworkMultiplier::new(&graph, blocks).map_err(|e| invalid("uncertainty", mult_msg(e)))?;

        let mut options = KypOptions::default();
        if let Some(e) = self.options.eps_min {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid("options.eps_min", "must be positive"));
            }
            options.eps_min = e;
        }
        if let Some(m) = self.options.margin {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(invalid("options.margin", "must be non-negative"));
            }
            options.margin = Some(m);
        }
        if let Some(gs) = &self.options.grid {
            if !(gs.lo > 0.0 && gs.hi > gs.lo && gs.hi.is_finite() && gs.points >= 1) {
                return Err(invalid("options.grid", "need 0 < lo < hi and points ≥ 1"));
            }
            options.grid = log_grid(gs.lo, gs.hi, gs.points);
        }
        Ok(Network { graph, agents, multiplier, sectors, options })
    }
}

fn graph_msg(e: GraphError) -> String {
    let kind = match &e {
        GraphError::TooFewAgents(_) => "TooFewAgents",
        GraphError::SelfLoop(_) => "SelfLoop",
        GraphError::DuplicateEdge(..) => "DuplicateEdge",
        GraphError::IsolatedAgent(_) => "IsolatedAgent",
        GraphError::BadIndex { .. } => "BadIndex",
        GraphError::NotNeighbor { .. } => "NotNeighbor",
    };
    format!("{kind} ({e})")
}

fn mult_msg(e: MultiplierError) -> String {
    let kind = match &e {
        MultiplierError::EmptySector { .. } => "EmptySector",
        MultiplierError::HomotopyViolation { .. } => "HomotopyViolation",
        MultiplierError::DimensionMismatch(_) => "DimensionMismatch",
        MultiplierError::NotSymmetric => "NotSymmetric",
        MultiplierError::Lti(_) => "Lti",
    };
    format!("{kind} ({e})")
}

pub fn parse_network_str(text: &str) -> Result<Network, FileError> {
    NetworkFile::from_json(text)?.validate()
}

pub fn parse_network_file(path: impl AsRef<Path>) -> Result<Network, FileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_network_str(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[derive(clap::ValueEnum)]
pub enum Topology {
    Path,
    Ring,
    Star,
}

/// A network file with identical agents `num/den` and one sector.
pub fn gen_example(topology: Topology, n: usize, num: &[f64], den: &[f64], alpha: f64, beta: f64) -> Result<NetworkFile, FileError> {
    let g = match topology {
        Topology::Path => NetworkGraph::path(n),
        Topology::Ring => NetworkGraph::ring(n),
        Topology::Star => NetworkGraph::star(n),
    }
    .map_err(|e| FileError::BadTopologyParams(format!("{topology:?} with n = {n}: {e}")))?;
    let file = NetworkFile {
        version: FILE_VERSION,
        agents: (1..=n)
            .map(|id| AgentEntry {
                id,
                dynamics: Dynamics::Tf { num: num.to_vec(), den: den.to_vec() },
            })
            .collect(),
        edges: g.edges().iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
        uncertainty: Uncertainty::Sector { alpha, beta, overrides: Vec::new() },
        options: FileOptions::default(),
    };
    Ok(file)
}

/// The path-graph experiment: ten agents `1/(s+25)`, sector `[−2, 0.15]`.
pub fn path10_example() -> NetworkFile {
    gen_example(Topology::Path, 10, &[1.0], &[1.0, 25.0], -2.0, 0.15).expect("valid example")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
    pub backend: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            backend: "clarabel".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub version: u32,
    pub tool: ToolInfo,
    #[serde(default)]
    pub input: Option<String>,
    pub assumption1: Assumption1Summary,
    pub vacuous: bool,
    pub methods: Vec<MethodReport>,
    pub wall_clock_s: f64,
}

impl ReportFile {
    pub fn new(report: CertificateReport, input: Option<String>, wall_clock_s: f64) -> Self {
        Self {
            version: FILE_VERSION,
            tool: ToolInfo::default(),
            input,
            assumption1: report.assumption1,
            vacuous: report.vacuous,
            methods: report.methods,
            wall_clock_s,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, FileError> {
        serde_json::from_str(text).map_err(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Whether every method's overall verdict follows from its conditions.
    pub fn overall_consistent(&self) -> bool {
        self.methods
            .iter()
            .all(|m| overall_verdict(&m.conditions, self.vacuous) == m.overall)
    }

    /// Copy with timing fields zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.wall_clock_s = 0.0;
        for m in &mut r.methods {
            for c in &mut m.conditions {
                c.seconds = 0.0;
            }
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path10_example_parses() {
        let net = parse_network_str(&path10_example().to_json()).unwrap();
        assert_eq!(net.graph.agent_count(), 10);
        assert_eq!(net.graph.edge_count(), 9);
        assert_eq!(net.graph.degrees(), vec![1, 2, 2, 2, 2, 2, 2, 2, 2, 1]);
        assert_eq!(net.agents[0].a, DMatrix::from_element(1, 1, -25.0));
        assert_eq!(net.agents[4].nu(), 2);
        assert_eq!(net.options, KypOptions::default());
    }

    #[test]
    fn unstable_agent_is_rejected_with_path() {
        let mut f = path10_example();
        f.agents[0].dynamics = Dynamics::Tf { num: vec![1.0], den: vec![1.0, -1.0] };
        let e = f.validate().unwrap_err();
        assert!(e.to_string().starts_with("agents[0].dynamics: UnstableTF"), "{e}");
    }

    #[test]
    fn missing_edges_is_schema_error() {
        let text = r#"{"version":1,"agents":[{"id":1,"dynamics":{"tf":{"num":[1],"den":[1,1]}}}],
                      "uncertainty":{"type":"sector","alpha":-1,"beta":1}}"#;
        assert!(matches!(parse_network_str(text), Err(FileError::SchemaError { .. })));
    }

    #[test]
    fn edge_errors_carry_index() {
        let mut f = path10_example();
        f.edges.push([3, 3]);
        assert!(f.validate().unwrap_err().to_string().starts_with("edges[9]: SelfLoop"));
        let mut f = path10_example();
        f.edges.push([2, 1]);
        assert!(f.validate().unwrap_err().to_string().starts_with("edges[9]: DuplicateEdge"));
        let mut f = path10_example();
        f.edges[0] = [1, 11];
        assert!(f.validate().unwrap_err().to_string().starts_with("edges[0]"));
    }

    #[test]
    fn gen_topologies() {
        let r = gen_example(Topology::Ring, 3, &[1.0], &[1.0, 25.0], -1.0, 1.0).unwrap();
        let net = r.validate().unwrap();
        assert_eq!(net.graph.edge_count(), 3);
        assert!(net.graph.degrees().iter().all(|&d| d == 2));
        let s = gen_example(Topology::Star, 4, &[1.0], &[1.0, 25.0], -1.0, 1.0).unwrap();
        assert_eq!(s.validate().unwrap().graph.degree(0), 3);
        assert!(matches!(
            gen_example(Topology::Path, 1, &[1.0], &[1.0, 1.0], -1.0, 1.0),
            Err(FileError::BadTopologyParams(_))
        ));
    }

    #[test]
    fn ss_agent_and_overrides() {
        let mut f = gen_example(Topology::Path, 3, &[1.0], &[1.0, 25.0], -2.0, 0.15).unwrap();
        f.agents[1].dynamics = Dynamics::Ss {
            a: vec![vec![-3.0]],
            b: vec![vec![1.0, 1.0]],
            c: vec![vec![2.0]],
            d: vec![vec![0.0, 0.0]],
        };
        f.uncertainty = Uncertainty::Sector {
            alpha: -2.0,
            beta: 0.15,
            overrides: vec![SectorOverride { agent: 2, alpha: -1.0, beta: 1.0 }],
        };
        let net = f.validate().unwrap();
        assert_eq!(net.sectors[1], (-1.0, 1.0));
        assert_eq!(net.agents[1].c[(0, 0)], 2.0);

        let text = f.to_json();
        assert_eq!(NetworkFile::from_json(&text).unwrap(), f);
    }

    #[test]
    fn bad_sector_reports_field() {
        let f = gen_example(Topology::Path, 3, &[1.0], &[1.0, 25.0], 0.1, 0.2).unwrap();
        assert!(f.validate().unwrap_err().to_string().starts_with("uncertainty: HomotopyViolation"));
    }
}
