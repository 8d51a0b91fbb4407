//! Stability conditions as frequency-domain inequalities.
//!
//! Each condition is packaged as `ψ(jω)* M ψ(jω) + ε W ⪯ 0` with a stable
//! realization `ψ` restricted to the coordinates the condition actually
//! touches. `direct_condition_eval` rebuilds the same quadratic forms
//! straight from the X/Y/Z selections on all `2m` coordinates and is used to
//! check the assembly.

use std::fmt;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    agent_selector, link_laplacian, link_selector, neighborhood_laplacian, routing_permutation,
    subsystem_laplacian, GraphError, NetworkGraph,
};
use crate::lti::{block_diag_mat, validate_agents, CMatrix, Frequency, LtiError, StateSpace};
use crate::multiplier::{network_xi_eval, theta_realization, MultiplierError, NetworkMultiplier};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Multiplier(#[from] MultiplierError),
    #[error("diagonal split failed for agent {agent}: {reason}")]
    SplitFailed { agent: usize, reason: String },
}

/// Which condition an FDI encodes. Indices are 0-based; `Display` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ConditionLabel {
    Monolithic,
    Neighborhood(usize),
    Linkwise(usize),
}

impl fmt::Display for ConditionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionLabel::Monolithic => write!(f, "monolithic"),
            ConditionLabel::Neighborhood(i) => write!(f, "t6k2:i={}", i + 1),
            ConditionLabel::Linkwise(k) => write!(f, "PCSk2:k={}", k + 1),
        }
    }
}

impl From<ConditionLabel> for String {
    fn from(l: ConditionLabel) -> String {
        l.to_string()
    }
}

impl TryFrom<String> for ConditionLabel {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl std::str::FromStr for ConditionLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let idx = |rest: &str| -> Result<usize, String> {
            match rest.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(format!("bad condition index in {s:?}")),
            }
        };
        if s == "monolithic" {
            Ok(ConditionLabel::Monolithic)
        } else if let Some(r) = s.strip_prefix("t6k2:i=") {
            Ok(ConditionLabel::Neighborhood(idx(r)?))
        } else if let Some(r) = s.strip_prefix("PCSk2:k=") {
            Ok(ConditionLabel::Linkwise(idx(r)?))
        } else {
            Err(format!("unknown condition label {s:?}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strictness {
    StrictNegDef,
    NonStrictWithEps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFDI {
    pub psi: StateSpace,
    pub mid: DMatrix<f64>,
    pub eps_weight: DMatrix<f64>,
    pub strictness: Strictness,
    pub label: ConditionLabel,
    /// Global coordinates of the inputs of `psi`.
    pub coords: Vec<usize>,
}

impl QuadraticFDI {
    /// `ψ(jω)* M ψ(jω)`.
    pub fn form(&self, w: impl Into<Frequency>) -> Result<CMatrix, LtiError> {
        let p = self.psi.eval(w)?;
        let mid = self.mid.map(|x| Complex::new(x, 0.0));
        Ok(p.adjoint() * mid * p)
    }

    /// `ψ(jω)* M ψ(jω) + ε W`.
    pub fn form_with_eps(&self, w: impl Into<Frequency>, eps: f64) -> Result<CMatrix, LtiError> {
        Ok(self.form(w)? + self.eps_weight.map(|x| Complex::new(eps * x, 0.0)))
    }

    pub fn input_dim(&self) -> usize {
        self.psi.nu()
    }
}

fn check_inputs(g: &NetworkGraph, agents: &[StateSpace], mult: &NetworkMultiplier) -> Result<(), CertificateError> {
    validate_agents(g, agents)?;
    if mult.agents().len() != g.agent_count()
        || mult.agents().iter().enumerate().any(|(i, a)| a.degree() != g.degree(i))
    {
        return Err(MultiplierError::DimensionMismatch("multiplier does not match the graph".into()).into());
    }
    Ok(())
}

/// `ψ = [H; P − T∘H]`, `M = Φ`, `W = I`.
pub fn monolithic_fdi(g: &NetworkGraph, agents: &[StateSpace], mult: &NetworkMultiplier) -> Result<QuadraticFDI, CertificateError> {
    check_inputs(g, agents, mult)?;
    let all: Vec<usize> = (0..g.agent_count()).collect();
    // Θ = [H; I − TH]; M = P − TH differs only in the feedthrough
    let theta = theta_realization(g, agents, &all)?;
    let n = g.agent_count();
    let q = g.coord_count();
    let mut d = theta.d.clone();
    let p = routing_permutation(g).to_dense();
    let shift = p - DMatrix::identity(q, q);
    let mut lower = d.view_mut((n, 0), (q, q));
    lower += shift;
    let psi = StateSpace::new(theta.a, theta.b, theta.c, d)?;
    Ok(QuadraticFDI {
        psi,
        mid: mult.assembled(),
        eps_weight: DMatrix::identity(q, q),
        strictness: Strictness::StrictNegDef,
        label: ConditionLabel::Monolithic,
        coords: (0..q).collect(),
    })
}

/// `Π = Ξ1 + Ξ2 L + L Ξ2* + L Ξ3 L` on all coordinates.
pub fn monolithic_xi_eval(
    g: &NetworkGraph,
    agents: &[StateSpace],
    mult: &NetworkMultiplier,
    w: impl Into<Frequency>,
) -> Result<CMatrix, CertificateError> {
    check_inputs(g, agents, mult)?;
    let xi = network_xi_eval(agents, mult, w)?;
    let l = cplx(&subsystem_laplacian(g).to_dense());
    Ok(&xi.xi1 + &xi.xi2 * &l + &l * xi.xi2.adjoint() + &l * &xi.xi3 * &l)
}

fn cplx(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex::new(x, 0.0))
}

/// Rows/cols of a square matrix restricted to `idx`.
fn restrict(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

fn restrict_c(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// `[0; I_q]`: embeds the J-part of `Θ_V` outputs.
fn j_embed(nv: usize, q: usize) -> DMatrix<f64> {
    let mut s0 = DMatrix::zeros(nv + q, q);
    s0.view_mut((nv, 0), (q, q)).fill_with_identity();
    s0
}

/// Neighbourhood condition of agent `i` on the blocks of `{i} ∪ N_i`.
///
/// With `ψ = [Θ_V z; z]`:
/// `C_iΞ1 = (Θ_V z)* SΦ_VS (Θ_V z)`, `½(Ξ2K_i + K_iΞ2*)` is the cross term
/// `−½Φ_V[0;I]K_i`, and `K_iZ_iK_i = K_iΦ3K_i − ½Σ L_kΦ3L_k` sits on `z`.
pub fn neighborhood_fdi(
    g: &NetworkGraph,
    agents: &[StateSpace],
    mult: &NetworkMultiplier,
    i: usize,
) -> Result<QuadraticFDI, CertificateError> {
    check_inputs(g, agents, mult)?;
    if i >= g.agent_count() {
        return Err(GraphError::BadIndex { index: i, limit: g.agent_count() }.into());
    }
    let v = g.active_agents(i);
    let t = g.active_coords(i);
    let (nv, q) = (v.len(), t.len());
    let theta = theta_realization(g, agents, &v)?;
    let phi_v = mult.phi_subset(&v);

    let pos = v.iter().position(|&a| a == i).expect("i ∈ V_i");
    let mut s = DMatrix::zeros(nv + q, nv + q);
    s[(pos, pos)] = 1.0;
    for (a, &c) in t.iter().enumerate() {
        if g.owner(c) == i {
            s[(nv + a, nv + a)] = 1.0;
        }
    }
    let k_i = neighborhood_laplacian(g, i)?;
    let k_t = k_i.restrict(&t);
    let phi3 = restrict(&mult.phi3(), &t);
    let mut z_block = &k_t * &phi3 * &k_t;
    for k in g.incident_edges(i) {
        let l_k = link_laplacian(g, k)?.restrict(&t);
        z_block -= 0.5 * &l_k * &phi3 * &l_k;
    }
    let cross = -0.5 * &phi_v * j_embed(nv, q) * &k_t;

    let p = nv + q;
    let mut mid = DMatrix::zeros(p + q, p + q);
    mid.view_mut((0, 0), (p, p)).copy_from(&(&s * &phi_v * &s));
    mid.view_mut((0, p), (p, q)).copy_from(&cross);
    mid.view_mut((p, 0), (q, p)).copy_from(&cross.transpose());
    mid.view_mut((p, p), (q, q)).copy_from(&z_block);

    let psi = StateSpace::vstack_shared_input(&[theta, StateSpace::identity(q)])?;
    let eps_weight = agent_selector(g, i)?.restrict(&t);
    Ok(QuadraticFDI {
        psi,
        mid,
        eps_weight,
        strictness: Strictness::NonStrictWithEps,
        label: ConditionLabel::Neighborhood(i),
        coords: t,
    })
}

/// Splits `Ξ3_i = D_i + S_i` with `D_i` diagonal and `S_i ⪯ 0`. A supplied
/// `d` is validated instead of computed.
pub fn diagonal_split(phi3: &DMatrix<f64>, d: Option<&DMatrix<f64>>) -> Result<(DMatrix<f64>, DMatrix<f64>), String> {
    let m = phi3.nrows();
    let d = match d {
        Some(d) => {
            if d.shape() != (m, m) {
                return Err(format!("D is {}x{}, expected {m}x{m}", d.nrows(), d.ncols()));
            }
            if (0..m).any(|r| (0..m).any(|c| r != c && d[(r, c)] != 0.0)) {
                return Err("D is not diagonal".into());
            }
            d.clone()
        }
        None => {
            let off_diag = (0..m).any(|r| (0..m).any(|c| r != c && phi3[(r, c)] != 0.0));
            if !off_diag {
                return Ok((phi3.clone(), DMatrix::zeros(m, m)));
            }
            let lmax = phi3.clone().symmetric_eigenvalues().max();
            DMatrix::from_diagonal_element(m, m, lmax)
        }
    };
    let s = phi3 - &d;
    let smax = if m == 0 { 0.0 } else { s.clone().symmetric_eigenvalues().max() };
    if smax > 1e-10 {
        return Err(format!("S = Φ3 − D is not negative semidefinite (λ_max = {smax:.3e})"));
    }
    Ok((d, s))
}

/// `⊕ D_i` from the default split of every agent's `Φ3`.
pub fn network_split(mult: &NetworkMultiplier) -> Result<DMatrix<f64>, CertificateError> {
    network_split_with(mult, None)
}

pub fn network_split_with(mult: &NetworkMultiplier, user: Option<&[DMatrix<f64>]>) -> Result<DMatrix<f64>, CertificateError> {
    let blocks = mult
        .agents()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            diagonal_split(&a.phi3, user.map(|u| &u[i]))
                .map(|(d, _)| d)
                .map_err(|reason| CertificateError::SplitFailed { agent: i, reason })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(block_diag_mat(blocks.iter()))
}

/// Link-wise condition of edge `k` on the blocks of its two endpoints.
///
/// `ψ = [Θ_V(A_k z); Θ_V z; z]`. An endpoint whose block is only partly
/// covered by `A_k` gets a second copy of its state driven through the mask;
/// fully covered endpoints share one state between the first two groups.
pub fn linkwise_fdi(
    g: &NetworkGraph,
    agents: &[StateSpace],
    mult: &NetworkMultiplier,
    k: usize,
) -> Result<QuadraticFDI, CertificateError> {
    let d = network_split(mult)?;
    linkwise_fdi_with_split(g, agents, mult, k, &d)
}

pub fn linkwise_fdi_with_split(
    g: &NetworkGraph,
    agents: &[StateSpace],
    mult: &NetworkMultiplier,
    k: usize,
    d_full: &DMatrix<f64>,
) -> Result<QuadraticFDI, CertificateError> {
    check_inputs(g, agents, mult)?;
    let [i, j] = g.edge(k).map(|(a, b)| [a, b])?;
    let v = vec![i, j];
    let t = g.coords_of_agents(&v);
    let (nv, q) = (v.len(), t.len());
    let a_k = link_selector(g, k)?.restrict(&t);
    let mask: Vec<f64> = (0..q).map(|c| a_k[(c, c)]).collect();

    // state layout: main copies of each agent, then masked copies where needed
    let mut main_off = Vec::new();
    let mut nx = 0;
    for &a in &v {
        main_off.push(nx);
        nx += agents[a].nx();
    }
    let mut block_start = Vec::new();
    let mut off = 0;
    for &a in &v {
        block_start.push(off);
        off += g.degree(a);
    }
    let mut masked_off = Vec::new();
    for (r, &a) in v.iter().enumerate() {
        let m = g.degree(a);
        let full = mask[block_start[r]..block_start[r] + m].iter().all(|&x| x == 1.0);
        if full {
            masked_off.push(main_off[r]);
        } else {
            masked_off.push(nx);
            nx += agents[a].nx();
        }
    }

    let p_theta = nv + q;
    let rows = 2 * p_theta + q;
    let mut am = DMatrix::zeros(nx, nx);
    let mut bm = DMatrix::zeros(nx, q);
    let mut cm = DMatrix::zeros(rows, nx);
    let mut dm = DMatrix::zeros(rows, q);

    for (r, &a) in v.iter().enumerate() {
        let h = &agents[a];
        let (m, n_a, b0) = (g.degree(a), h.nx(), block_start[r]);
        let diag_mask = DMatrix::from_fn(m, m, |x, y| if x == y { mask[b0 + x] } else { 0.0 });
        let copies = if masked_off[r] == main_off[r] {
            vec![(main_off[r], DMatrix::identity(m, m))]
        } else {
            vec![(main_off[r], DMatrix::identity(m, m)), (masked_off[r], diag_mask.clone())]
        };
        for (so, sel) in &copies {
            am.view_mut((*so, *so), (n_a, n_a)).copy_from(&h.a);
            bm.view_mut((*so, b0), (n_a, m)).copy_from(&(&h.b * sel));
        }
        // (row offset of the Θ group, state offset, input mask)
        let groups = [(0, masked_off[r], diag_mask), (p_theta, main_off[r], DMatrix::identity(m, m))];
        for (g0, so, sel) in groups {
            cm.view_mut((g0 + r, so), (1, n_a)).copy_from(&h.c);
            dm.view_mut((g0 + r, b0), (1, m)).copy_from(&(&h.d * &sel));
            let jr = g0 + nv + b0;
            for x in 0..m {
                cm.view_mut((jr + x, so), (1, n_a)).copy_from(&(-&h.c));
                for y in 0..m {
                    let id = if x == y { 1.0 } else { 0.0 };
                    dm[(jr + x, b0 + y)] = (id - h.d[(0, y)]) * sel[(y, y)];
                }
            }
        }
    }
    dm.view_mut((2 * p_theta, 0), (q, q)).fill_with_identity();
    let psi = StateSpace::new(am, bm, cm, dm)?;

    let phi_v = mult.phi_subset(&v);
    let l_k = link_laplacian(g, k)?.restrict(&t);
    let d_t = restrict(d_full, &t);
    let cross = -(&phi_v * j_embed(nv, q) * &l_k);
    let mut mid = DMatrix::zeros(rows, rows);
    mid.view_mut((0, p_theta), (p_theta, p_theta)).copy_from(&(0.5 * &phi_v));
    mid.view_mut((p_theta, 0), (p_theta, p_theta)).copy_from(&(0.5 * &phi_v));
    mid.view_mut((p_theta, 2 * p_theta), (p_theta, q)).copy_from(&cross);
    mid.view_mut((2 * p_theta, p_theta), (q, p_theta)).copy_from(&cross.transpose());
    mid.view_mut((2 * p_theta, 2 * p_theta), (q, q)).copy_from(&(&l_k * d_t * &l_k));

    Ok(QuadraticFDI {
        psi,
        mid,
        eps_weight: a_k,
        strictness: Strictness::NonStrictWithEps,
        label: ConditionLabel::Linkwise(k),
        coords: t,
    })
}

/// Literal composition of the X/Y/Z selections on all `2m` coordinates,
/// then restricted to the condition's coordinates. The ε-term is left out.
pub fn direct_condition_eval(
    g: &NetworkGraph,
    agents: &[StateSpace],
    mult: &NetworkMultiplier,
    label: ConditionLabel,
    w: impl Into<Frequency>,
) -> Result<CMatrix, CertificateError> {
    check_inputs(g, agents, mult)?;
    let xi = network_xi_eval(agents, mult, w)?;
    let (xi1, xi2, xi3) = (&xi.xi1, &xi.xi2, &xi.xi3);
    match label {
        ConditionLabel::Monolithic => {
            let l = cplx(&subsystem_laplacian(g).to_dense());
            Ok(xi1 + xi2 * &l + &l * xi2.adjoint() + &l * xi3 * &l)
        }
        ConditionLabel::Neighborhood(i) => {
            let c_i = cplx(&agent_selector(g, i)?.to_dense());
            let k_i = cplx(&neighborhood_laplacian(g, i)?.to_dense());
            let kset = g.incident_edges(i);
            let a: Vec<CMatrix> = kset
                .iter()
                .map(|&k| link_selector(g, k).map(|s| cplx(&s.to_dense())))
                .collect::<Result<_, _>>()?;
            let half = Complex::new(0.5, 0.0);
            let x = &c_i * xi1;
            let mut y = CMatrix::zeros(xi1.nrows(), xi1.ncols());
            let mut z = CMatrix::zeros(xi1.nrows(), xi1.ncols());
            for (p, ak) in a.iter().enumerate() {
                y += xi2 * ak * half;
                z += ak * xi3 * ak * half;
                for (r, al) in a.iter().enumerate() {
                    if r != p {
                        z += ak * xi3 * al;
                    }
                }
            }
            let full = x + &y * &k_i + &k_i * y.adjoint() + &k_i * z * &k_i;
            Ok(restrict_c(&full, &g.active_coords(i)))
        }
        ConditionLabel::Linkwise(k) => {
            let d = cplx(&network_split(mult)?);
            let a_k = cplx(&link_selector(g, k)?.to_dense());
            let l_k = cplx(&link_laplacian(g, k)?.to_dense());
            let half = Complex::new(0.5, 0.0);
            let x = (&a_k * xi1 + xi1 * &a_k) * half;
            let y = xi2 * &a_k;
            let z = &a_k * d * &a_k;
            let full = x + &y * &l_k + &l_k * y.adjoint() + &l_k * z * &l_k;
            let [i, j] = g.edge_endpoints(k);
            Ok(restrict_c(&full, &g.coords_of_agents(&[i, j])))
        }
    }
}
