//! Static IQC multipliers for the link uncertainty and the Ξ blocks they
//! induce on each agent.

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::graph::NetworkGraph;
use crate::lti::{block_diag_mat, CMatrix, Frequency, LtiError, StateSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultiplierError {
    #[error("empty sector: alpha = {alpha} must be below beta = {beta}")]
    EmptySector { alpha: f64, beta: f64 },
    #[error("sector [{alpha}, {beta}] does not contain 0")]
    HomotopyViolation { alpha: f64, beta: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("phi3 is not symmetric")]
    NotSymmetric,
    #[error(transparent)]
    Lti(#[from] LtiError),
}

/// Per-agent block `Φ_i = [[φ1, φ2], [φ2ᵀ, φ3]]`; `φ2` is a `1×m_i` row.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentMultiplier {
    pub phi1: f64,
    pub phi2: DMatrix<f64>,
    pub phi3: DMatrix<f64>,
}

impl AgentMultiplier {
    pub fn new(phi1: f64, phi2: DMatrix<f64>, phi3: DMatrix<f64>) -> Result<Self, MultiplierError> {
        let m = phi3.nrows();
        if phi3.ncols() != m || phi2.shape() != (1, m) {
            return Err(MultiplierError::DimensionMismatch(format!(
                "phi2 is {}x{}, phi3 is {}x{}",
                phi2.nrows(),
                phi2.ncols(),
                phi3.nrows(),
                phi3.ncols()
            )));
        }
        if (&phi3 - phi3.transpose()).amax() > 1e-12 * (1.0 + phi3.amax()) {
            return Err(MultiplierError::NotSymmetric);
        }
        Ok(Self { phi1, phi2, phi3 })
    }

    pub fn degree(&self) -> usize {
        self.phi3.nrows()
    }

    /// The full `(1+m_i)×(1+m_i)` symmetric block.
    pub fn assembled(&self) -> DMatrix<f64> {
        let m = self.degree();
        let mut out = DMatrix::zeros(m + 1, m + 1);
        out[(0, 0)] = self.phi1;
        out.view_mut((0, 1), (1, m)).copy_from(&self.phi2);
        out.view_mut((1, 0), (m, 1)).copy_from(&self.phi2.transpose());
        out.view_mut((1, 1), (m, m)).copy_from(&self.phi3);
        out
    }
}

/// Sector `[α, β]` multiplier for an agent with `m_i` links.
pub fn sector_multiplier(m: usize, alpha: f64, beta: f64) -> Result<AgentMultiplier, MultiplierError> {
    if !(alpha < beta) {
        return Err(MultiplierError::EmptySector { alpha, beta });
    }
    if alpha > 0.0 || beta < 0.0 {
        return Err(MultiplierError::HomotopyViolation { alpha, beta });
    }
    Ok(AgentMultiplier {
        phi1: -2.0 * m as f64 * alpha * beta,
        phi2: DMatrix::from_element(1, m, alpha + beta),
        phi3: DMatrix::from_diagonal_element(m, m, -2.0),
    })
}

/// `φ1 y² + 2 φ2 u y + uᵀ φ3 u` with `u_k = δ_k y`.
pub fn iqc_residual(mult: &AgentMultiplier, y: f64, deltas: &[f64]) -> f64 {
    let u = DMatrix::from_iterator(deltas.len(), 1, deltas.iter().map(|d| d * y));
    let cross = (&mult.phi2 * &u)[(0, 0)];
    let quad = (u.transpose() * &mult.phi3 * &u)[(0, 0)];
    mult.phi1 * y * y + 2.0 * cross * y + quad
}

/// One multiplier block per agent, in agent order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMultiplier {
    agents: Vec<AgentMultiplier>,
}

impl NetworkMultiplier {
    pub fn new(g: &NetworkGraph, agents: Vec<AgentMultiplier>) -> Result<Self, MultiplierError> {
        if agents.len() != g.agent_count() {
            return Err(MultiplierError::DimensionMismatch(format!(
                "{} multiplier blocks for {} agents",
                agents.len(),
                g.agent_count()
            )));
        }
        for (i, a) in agents.iter().enumerate() {
            if a.degree() != g.degree(i) {
                return Err(MultiplierError::DimensionMismatch(format!(
                    "agent {i}: multiplier for {} links, agent has {}",
                    a.degree(),
                    g.degree(i)
                )));
            }
        }
        Ok(Self { agents })
    }

    /// Same sector on every link.
    pub fn sector(g: &NetworkGraph, alpha: f64, beta: f64) -> Result<Self, MultiplierError> {
        Self::sector_with_overrides(g, alpha, beta, &[])
    }

    /// Global sector with per-agent `(agent, alpha, beta)` overrides.
    pub fn sector_with_overrides(
        g: &NetworkGraph,
        alpha: f64,
        beta: f64,
        overrides: &[(usize, f64, f64)],
    ) -> Result<Self, MultiplierError> {
        let blocks = (0..g.agent_count())
            .map(|i| {
                let (a, b) = overrides
                    .iter()
                    .rev()
                    .find(|o| o.0 == i)
                    .map_or((alpha, beta), |o| (o.1, o.2));
                sector_multiplier(g.degree(i), a, b)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(g, blocks)
    }

    pub fn agent(&self, i: usize) -> &AgentMultiplier {
        &self.agents[i]
    }

    pub fn agents(&self) -> &[AgentMultiplier] {
        &self.agents
    }

    /// `⊕ φ1_i` (n×n).
    pub fn phi1(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.agents.len(),
            self.agents.iter().map(|a| a.phi1),
        ))
    }

    /// `⊕ φ2_i` (n×2m).
    pub fn phi2(&self) -> DMatrix<f64> {
        block_diag_mat(self.agents.iter().map(|a| &a.phi2))
    }

    /// `⊕ φ3_i` (2m×2m).
    pub fn phi3(&self) -> DMatrix<f64> {
        block_diag_mat(self.agents.iter().map(|a| &a.phi3))
    }

    /// `Φ` restricted to a sorted agent subset, ordered `[N rows; J rows]`.
    pub fn phi_subset(&self, subset: &[usize]) -> DMatrix<f64> {
        let nv = subset.len();
        let q: usize = subset.iter().map(|&j| self.agents[j].degree()).sum();
        let mut out = DMatrix::zeros(nv + q, nv + q);
        let mut off = nv;
        for (r, &j) in subset.iter().enumerate() {
            let a = &self.agents[j];
            let m = a.degree();
            out[(r, r)] = a.phi1;
            out.view_mut((r, off), (1, m)).copy_from(&a.phi2);
            out.view_mut((off, r), (m, 1)).copy_from(&a.phi2.transpose());
            out.view_mut((off, off), (m, m)).copy_from(&a.phi3);
            off += m;
        }
        out
    }

    /// The full `Φ` on `[N; M]` (size n + 2m).
    pub fn assembled(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.agents.len()).collect();
        self.phi_subset(&all)
    }
}

/// `(Ξ1, Ξ2, Ξ3)` at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct XiBlocks {
    pub xi1: CMatrix,
    pub xi2: CMatrix,
    pub xi3: CMatrix,
}

fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex::new(x, 0.0))
}

pub fn xi_eval(agent: &StateSpace, mult: &AgentMultiplier, w: impl Into<Frequency>) -> Result<XiBlocks, MultiplierError> {
    let m = mult.degree();
    if agent.ny() != 1 || agent.nu() != m {
        return Err(MultiplierError::DimensionMismatch(format!(
            "agent is {}x{}, multiplier expects 1x{m}",
            agent.ny(),
            agent.nu()
        )));
    }
    let h = agent.eval(w)?;
    let ones = CMatrix::from_element(m, 1, Complex::new(1.0, 0.0));
    let e = CMatrix::identity(m, m) - &ones * &h;
    let hs = h.adjoint();
    let es = e.adjoint();
    let p1 = Complex::new(mult.phi1, 0.0);
    let p2 = complexify(&mult.phi2);
    let p3 = complexify(&mult.phi3);
    let xi1 = &hs * &h * p1 + &es * &p3 * &e + &hs * &p2 * &e + &es * p2.transpose() * &h;
    let xi2 = -(&hs * &p2) - &es * &p3;
    Ok(XiBlocks { xi1, xi2, xi3: p3 })
}

/// Network-level blocks: block-diagonal over agents (each 2m×2m).
pub fn network_xi_eval(
    agents: &[StateSpace],
    mult: &NetworkMultiplier,
    w: impl Into<Frequency>,
) -> Result<XiBlocks, MultiplierError> {
    let w = w.into();
    let parts = agents
        .iter()
        .zip(mult.agents())
        .map(|(h, m)| xi_eval(h, m, w))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(XiBlocks {
        xi1: block_diag_c(parts.iter().map(|p| &p.xi1)),
        xi2: block_diag_c(parts.iter().map(|p| &p.xi2)),
        xi3: block_diag_c(parts.iter().map(|p| &p.xi3)),
    })
}

pub(crate) fn block_diag_c<'a>(parts: impl Iterator<Item = &'a CMatrix> + Clone) -> CMatrix {
    let rows: usize = parts.clone().map(|p| p.nrows()).sum();
    let cols: usize = parts.clone().map(|p| p.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for p in parts {
        out.view_mut((r, c), p.shape()).copy_from(p);
        r += p.nrows();
        c += p.ncols();
    }
    out
}

/// `Θ_V = [H_V; I − T_V H_V]` for a sorted agent subset; shares one copy of
/// each agent's state between the two output groups.
pub fn theta_realization(g: &NetworkGraph, agents: &[StateSpace], subset: &[usize]) -> Result<StateSpace, MultiplierError> {
    if subset.windows(2).any(|w| w[0] >= w[1]) || subset.iter().any(|&j| j >= agents.len()) {
        return Err(MultiplierError::DimensionMismatch("subset must be sorted and in range".into()));
    }
    let parts: Vec<StateSpace> = subset.iter().map(|&j| agents[j].clone()).collect();
    for (&j, h) in subset.iter().zip(&parts) {
        if h.ny() != 1 || h.nu() != g.degree(j) {
            return Err(MultiplierError::DimensionMismatch(format!(
                "agent {j} is {}x{}, expected 1x{}",
                h.ny(),
                h.nu(),
                g.degree(j)
            )));
        }
    }
    let hv = StateSpace::block_diag(&parts);
    let nv = subset.len();
    let q = hv.nu();
    // T_V: fan-out restricted to the subset
    let mut t = DMatrix::zeros(q, nv);
    let mut off = 0;
    for (r, &j) in subset.iter().enumerate() {
        for c in off..off + g.degree(j) {
            t[(c, r)] = 1.0;
        }
        off += g.degree(j);
    }
    let mut c = DMatrix::zeros(nv + q, hv.nx());
    c.view_mut((0, 0), (nv, hv.nx())).copy_from(&hv.c);
    c.view_mut((nv, 0), (q, hv.nx())).copy_from(&(-(&t * &hv.c)));
    let mut d = DMatrix::zeros(nv + q, q);
    d.view_mut((0, 0), (nv, q)).copy_from(&hv.d);
    d.view_mut((nv, 0), (q, q))
        .copy_from(&(DMatrix::identity(q, q) - &t * &hv.d));
    Ok(StateSpace::new(hv.a, hv.b, c, d)?)
}
