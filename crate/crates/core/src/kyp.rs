//! KYP-lemma LMIs for the frequency-domain conditions, an SDP adapter, and
//! solver-independent checks of what comes back.
//!
//! Every LMI `F(x) ⪯ 0` is solved as `min t  s.t.  F(x) ⪯ tI, t ≥ −1` so the
//! SDP itself is always feasible. The answer is read off the optimum:
//!
//! * **feasible** when `λ_max(F(x*))`, recomputed here from the raw data, is
//!   below the feasibility tolerance;
//! * **infeasible** only when the dual matrix `Z` is a valid certificate, i.e.
//!   `Z ⪰ 0`, `tr Z = 1`, orthogonal to the free directions, and
//!   `⟨Z, F(x)⟩ > tol` for every admissible `x`;
//! * **inconclusive** otherwise.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::{
    linkwise_fdi, monolithic_fdi, neighborhood_fdi, CertificateError, ConditionLabel, QuadraticFDI,
};
use crate::graph::NetworkGraph;
use crate::lti::{check_assumption1, CMatrix, Frequency, StateSpace, HURWITZ_TOL};
use crate::multiplier::NetworkMultiplier;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KypError {
    #[error("state matrix of ψ is not Hurwitz")]
    NonHurwitz,
    #[error("SDP solver unavailable: {0}")]
    SolverUnavailable(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KypOptions {
    /// Lower bound on the ε decision variable.
    pub eps_min: f64,
    /// Fixed margin η; `None` uses `1e−9·(1 + ‖M‖₂)`.
    pub margin: Option<f64>,
    /// Bound on `λ_max` for a solution to count as feasible.
    pub feas_tol: f64,
    /// Finite frequencies for the grid oracle (0 and ∞ are always added).
    pub grid: Vec<f64>,
    pub max_iter: u32,
}

impl Default for KypOptions {
    fn default() -> Self {
        Self {
            eps_min: 1e-6,
            margin: None,
            feas_tol: 1e-7,
            grid: default_grid(),
            max_iter: 200,
        }
    }
}

/// 200 log-spaced points on `[1e−3, 1e5]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-3, 1e5, 200)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

// ---------------------------------------------------------------------------
// generic affine LMI

/// `F(x) = F0 + Σ xᵢ Fᵢ ⪯ 0` with optional lower bounds on some `xᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLmi {
    pub f0: DMatrix<f64>,
    pub fi: Vec<DMatrix<f64>>,
    pub lower: Vec<(usize, f64)>,
}

impl AffineLmi {
    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut f = self.f0.clone();
        for (xi, fi) in x.iter().zip(&self.fi) {
            f += fi * *xi;
        }
        f
    }
}

/// Raw answer of a backend to `min t s.t. F(x) ⪯ tI, x_j ≥ l_j, t ≥ −1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpOutput {
    pub x: Vec<f64>,
    pub t: f64,
    /// Dual matrix of the LMI block.
    pub z: DMatrix<f64>,
    /// Whether the backend reports (possibly reduced-accuracy) optimality.
    pub converged: bool,
    pub status: String,
    pub iterations: u32,
}

pub trait SdpBackend {
    fn name(&self) -> &'static str;
    fn min_t(&self, lmi: &AffineLmi) -> Result<SdpOutput, KypError>;
}

/// Clarabel interior-point backend.
#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { max_iter: 200 }
    }
}

/// Upper triangle, column by column, off-diagonals scaled by √2.
fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let s2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            out.push(if i == j { m[(i, i)] } else { s2 * 0.5 * (m[(i, j)] + m[(j, i)]) });
        }
    }
    out
}

fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let s2 = std::f64::consts::SQRT_2;
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                m[(i, j)] = v[k] / s2;
                m[(j, i)] = v[k] / s2;
            }
            k += 1;
        }
    }
    m
}

impl SdpBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn min_t(&self, lmi: &AffineLmi) -> Result<SdpOutput, KypError> {
        let n = lmi.dim();
        let nv = lmi.fi.len();
        let t_col = nv;
        let nb = lmi.lower.len() + 1;
        let tri = n * (n + 1) / 2;

        let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::with_capacity(nb + tri);
        for (r, &(j, l)) in lmi.lower.iter().enumerate() {
            ri.push(r);
            ci.push(j);
            vals.push(-1.0);
            b.push(-l);
        }
        ri.push(nb - 1);
        ci.push(t_col);
        vals.push(-1.0);
        b.push(1.0);

        for (col, fi) in lmi.fi.iter().enumerate() {
            for (r, v) in svec(fi).into_iter().enumerate() {
                if v != 0.0 {
                    ri.push(nb + r);
                    ci.push(col);
                    vals.push(v);
                }
            }
        }
        for (r, v) in svec(&DMatrix::identity(n, n)).into_iter().enumerate() {
            if v != 0.0 {
                ri.push(nb + r);
                ci.push(t_col);
                vals.push(-v);
            }
        }
        b.extend(svec(&(-&lmi.f0)));

        let a = CscMatrix::new_from_triplets(nb + tri, nv + 1, ri, ci, vals);
        let p = CscMatrix::zeros((nv + 1, nv + 1));
        let mut q = vec![0.0; nv + 1];
        q[t_col] = 1.0;
        let cones = [SupportedConeT::NonnegativeConeT(nb), SupportedConeT::PSDTriangleConeT(n)];
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .max_threads(1)
            .chordal_decomposition_enable(false)
            .build()
            .map_err(|e| KypError::SolverUnavailable(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| KypError::SolverUnavailable(e.to_string()))?;
        solver.solve();
        let sol = &solver.solution;
        let converged = matches!(sol.status, SolverStatus::Solved | SolverStatus::AlmostSolved);
        let z = smat(&sol.z[nb..], n);
        Ok(SdpOutput {
            x: sol.x[..nv].to_vec(),
            t: sol.x[t_col],
            z,
            converged,
            status: format!("{:?}", sol.status),
            iterations: sol.iterations,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LmiStatus {
    Feasible,
    Infeasible,
    Inconclusive,
}

/// Outcome of the min-t program plus the checks described in the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineResult {
    pub status: LmiStatus,
    pub x: Vec<f64>,
    pub t: f64,
    /// `λ_max(F(x))` recomputed from the data.
    pub residual: f64,
    /// Lower bound on `λ_max(F(x))` over all admissible `x`, when the dual
    /// certificate checks out.
    pub certified_lower_bound: Option<f64>,
    pub solver_status: String,
    pub iterations: u32,
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Validates the dual matrix as an infeasibility certificate; returns the
/// lower bound it proves on `λ_max(F(x))`.
pub fn check_infeasibility_certificate(lmi: &AffineLmi, z: &DMatrix<f64>) -> Option<f64> {
    let n = lmi.dim();
    if n == 0 {
        return None;
    }
    // project onto the PSD cone, normalize the trace
    let eig = ((z + z.transpose()) * 0.5).symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.min() < -1e-6 * scale {
        return None;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let zp = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let tr = zp.trace();
    if !(tr > 0.0) {
        return None;
    }
    let zp = zp / tr;

    let mut bound = inner(&zp, &lmi.f0);
    for (i, fi) in lmi.fi.iter().enumerate() {
        let c = inner(&zp, fi);
        let tol = 1e-7 * (1.0 + fi.norm());
        match lmi.lower.iter().find(|(j, _)| *j == i) {
            Some(&(_, l)) => {
                if c < -tol {
                    return None;
                }
                bound += l * c.max(0.0);
            }
            None => {
                if c.abs() > tol {
                    return None;
                }
            }
        }
    }
    Some(bound)
}

pub fn solve_affine(lmi: &AffineLmi, backend: &dyn SdpBackend, feas_tol: f64) -> Result<AffineResult, KypError> {
    let out = backend.min_t(lmi)?;
    let finite = out.x.iter().all(|v| v.is_finite()) && out.t.is_finite();
    let bounds_ok = lmi
        .lower
        .iter()
        .all(|&(j, l)| out.x.get(j).is_some_and(|&v| v >= l - feas_tol));
    let residual = if finite { lambda_max(&lmi.eval(&out.x)) } else { f64::INFINITY };

    let mut cert = None;
    let status = if finite && bounds_ok && residual <= feas_tol {
        LmiStatus::Feasible
    } else if out.converged && out.t > feas_tol {
        cert = check_infeasibility_certificate(lmi, &out.z);
        match cert {
            Some(b) if b > feas_tol => LmiStatus::Infeasible,
            _ => LmiStatus::Inconclusive,
        }
    } else {
        LmiStatus::Inconclusive
    };
    Ok(AffineResult {
        status,
        x: out.x,
        t: out.t,
        residual,
        certified_lower_bound: cert,
        solver_status: out.status,
        iterations: out.iterations,
    })
}

// ---------------------------------------------------------------------------
// KYP

/// `KYP(P) + [C D]ᵀ M [C D] + ε E + η I ⪯ 0` in the variables `(P, ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub label: ConditionLabel,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// `[C D]ᵀ M [C D]`
    pub outer: DMatrix<f64>,
    /// `E = diag(0, W)`
    pub eps_block: DMatrix<f64>,
    pub eta: f64,
    pub eps_min: f64,
    pub lmi: AffineLmi,
}

impl LmiProblem {
    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    /// Direct reassembly at `(P, ε)`, independent of the variable basis.
    pub fn assemble(&self, p: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
        let (nx, nu) = (self.nx(), self.nu());
        let mut f = self.outer.clone() + &self.eps_block * eps;
        let ap = self.a.transpose() * p + p * &self.a;
        let pb = p * &self.b;
        f.view_mut((0, 0), (nx, nx)).add_assign(&ap);
        f.view_mut((0, nx), (nx, nu)).add_assign(&pb);
        f.view_mut((nx, 0), (nu, nx)).add_assign(&pb.transpose());
        for d in 0..nx + nu {
            f[(d, d)] += self.eta;
        }
        f
    }

    /// Maps the flat decision vector back to `(P, ε)`.
    pub fn unpack(&self, x: &[f64]) -> (DMatrix<f64>, f64) {
        let nx = self.nx();
        let mut p = DMatrix::zeros(nx, nx);
        let mut k = 0;
        for j in 0..nx {
            for i in 0..=j {
                p[(i, j)] = x[k];
                p[(j, i)] = x[k];
                k += 1;
            }
        }
        (p, x[k])
    }
}

trait AddAssignView {
    fn add_assign(&mut self, rhs: &DMatrix<f64>);
}

impl AddAssignView for nalgebra::DMatrixViewMut<'_, f64> {
    fn add_assign(&mut self, rhs: &DMatrix<f64>) {
        *self += rhs;
    }
}

pub fn default_margin(mid: &DMatrix<f64>) -> f64 {
    let norm = if mid.nrows() == 0 { 0.0 } else { mid.clone().singular_values().max() };
    1e-9 * (1.0 + norm)
}

pub fn kyp_lmi(fdi: &QuadraticFDI, eta: f64, eps_min: f64) -> Result<LmiProblem, KypError> {
    let psi = &fdi.psi;
    if psi.nx() > 0 && !psi.is_hurwitz(HURWITZ_TOL) {
        return Err(KypError::NonHurwitz);
    }
    let (nx, nu) = (psi.nx(), psi.nu());
    let mut cd = DMatrix::zeros(psi.ny(), nx + nu);
    cd.view_mut((0, 0), (psi.ny(), nx)).copy_from(&psi.c);
    cd.view_mut((0, nx), (psi.ny(), nu)).copy_from(&psi.d);
    let outer = cd.transpose() * &fdi.mid * &cd;
    let outer = (&outer + outer.transpose()) * 0.5;
    let mut eps_block = DMatrix::zeros(nx + nu, nx + nu);
    eps_block.view_mut((nx, nx), (nu, nu)).copy_from(&fdi.eps_weight);

    let mut f0 = outer.clone();
    for d in 0..nx + nu {
        f0[(d, d)] += eta;
    }
    let mut fi = Vec::new();
    for j in 0..nx {
        for i in 0..=j {
            let mut e = DMatrix::zeros(nx, nx);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            let mut f = DMatrix::zeros(nx + nu, nx + nu);
            let ap = psi.a.transpose() * &e + &e * &psi.a;
            let pb = &e * &psi.b;
            f.view_mut((0, 0), (nx, nx)).copy_from(&ap);
            f.view_mut((0, nx), (nx, nu)).copy_from(&pb);
            f.view_mut((nx, 0), (nu, nx)).copy_from(&pb.transpose());
            fi.push(f);
        }
    }
    let eps_idx = fi.len();
    fi.push(eps_block.clone());

    Ok(LmiProblem {
        label: fdi.label,
        a: psi.a.clone(),
        b: psi.b.clone(),
        outer,
        eps_block,
        eta,
        eps_min,
        lmi: AffineLmi {
            f0,
            fi,
            lower: vec![(eps_idx, eps_min)],
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: LmiStatus,
    pub p: DMatrix<f64>,
    pub eps: f64,
    /// Optimal `t` of the min-t program.
    pub t: f64,
    /// `λ_max` of the reassembled LMI at `(P, ε)`.
    pub residual: f64,
    pub certified_lower_bound: Option<f64>,
    pub solver_status: String,
    pub iterations: u32,
    pub seconds: f64,
}

pub fn solve(problem: &LmiProblem, backend: &dyn SdpBackend, feas_tol: f64) -> Result<SolveResult, KypError> {
    let start = Instant::now();
    let res = solve_affine(&problem.lmi, backend, feas_tol)?;
    let (p, eps) = problem.unpack(&res.x);
    let mut out = SolveResult {
        status: res.status,
        p,
        eps,
        t: res.t,
        residual: res.residual,
        certified_lower_bound: res.certified_lower_bound,
        solver_status: res.solver_status,
        iterations: res.iterations,
        seconds: 0.0,
    };
    if out.status == LmiStatus::Feasible && !verify_solution(problem, &out, feas_tol) {
        out.status = LmiStatus::Inconclusive;
    }
    out.seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Reassembles the LMI at the returned point and checks it directly.
pub fn verify_solution(problem: &LmiProblem, result: &SolveResult, tol: f64) -> bool {
    if result.eps < problem.eps_min - tol || !result.eps.is_finite() {
        return false;
    }
    if result.p.iter().any(|v| !v.is_finite()) {
        return false;
    }
    lambda_max(&problem.assemble(&result.p, result.eps)) <= tol
}

// ---------------------------------------------------------------------------
// frequency grid oracle

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCheck {
    pub max_eig: f64,
    pub argmax: Frequency,
}

pub fn hermitian_lambda_max(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    let h = (m + m.adjoint()) * Complex::new(0.5, 0.0);
    h.symmetric_eigenvalues().max()
}

/// `max λ_max(ψ* M ψ + ε W)` over `grid ∪ {0, ∞}`.
pub fn frequency_grid_check(fdi: &QuadraticFDI, grid: &[f64], eps: f64) -> GridCheck {
    let mut best = GridCheck {
        max_eig: f64::NEG_INFINITY,
        argmax: Frequency::Finite(0.0),
    };
    let points = std::iter::once(Frequency::Finite(0.0))
        .chain(grid.iter().map(|&w| Frequency::Finite(w)))
        .chain(std::iter::once(Frequency::Infinity));
    for w in points {
        let v = match fdi.form_with_eps(w, eps) {
            Ok(m) => hermitian_lambda_max(&m),
            Err(_) => f64::INFINITY,
        };
        if v > best.max_eig {
            best = GridCheck { max_eig: v, argmax: w };
        }
    }
    best
}

// ---------------------------------------------------------------------------
// network certification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Monolithic,
    Neighborhood,
    Linkwise,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Monolithic, Method::Neighborhood, Method::Linkwise];

    pub fn labels(self, g: &NetworkGraph) -> Vec<ConditionLabel> {
        match self {
            Method::Monolithic => vec![ConditionLabel::Monolithic],
            Method::Neighborhood => (0..g.agent_count()).map(ConditionLabel::Neighborhood).collect(),
            Method::Linkwise => (0..g.edge_count()).map(ConditionLabel::Linkwise).collect(),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Monolithic => "monolithic",
            Method::Neighborhood => "neighborhood",
            Method::Linkwise => "linkwise",
        })
    }
}

/// Non-finite floats as the strings `"NaN"`, `"inf"`, `"-inf"`; JSON has no
/// literal for them and `null` would not round-trip.
mod lossless_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Tag(t) => match t.as_str() {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(de::Error::custom(format!("expected a number, got {t:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Certified,
    NotCertified,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub label: ConditionLabel,
    pub status: Verdict,
    #[serde(with = "lossless_f64")]
    pub eps_achieved: f64,
    /// Optimal `t` of the min-t program.
    #[serde(with = "lossless_f64")]
    pub t_opt: f64,
    #[serde(with = "lossless_f64")]
    pub lmi_residual: f64,
    #[serde(with = "lossless_f64")]
    pub grid_max_eig: f64,
    pub grid_argmax: String,
    pub certified_lower_bound: Option<f64>,
    pub solver_status: String,
    pub note: Option<String>,
    #[serde(with = "lossless_f64")]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub overall: Verdict,
    pub conditions: Vec<ConditionVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption1Summary {
    pub well_posed: bool,
    pub nominal_stable: bool,
    #[serde(with = "lossless_f64")]
    pub max_real_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub assumption1: Assumption1Summary,
    /// Set when the nominal loop fails, making any certificate meaningless.
    pub vacuous: bool,
    pub methods: Vec<MethodReport>,
}

impl CertificateReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }
}

/// Certified iff every condition is; any refuted condition makes the method
/// NotCertified; otherwise Inconclusive. A vacuous report is NotCertified.
pub fn overall_verdict(conditions: &[ConditionVerdict], vacuous: bool) -> Verdict {
    if vacuous || conditions.iter().any(|c| c.status == Verdict::NotCertified) {
        Verdict::NotCertified
    } else if !conditions.is_empty() && conditions.iter().all(|c| c.status == Verdict::Certified) {
        Verdict::Certified
    } else {
        Verdict::Inconclusive
    }
}

pub fn build_fdi(
    g: &NetworkGraph,
    agents: &[StateSpace],
    mult: &NetworkMultiplier,
    label: ConditionLabel,
) -> Result<QuadraticFDI, CertificateError> {
    match label {
        ConditionLabel::Monolithic => monolithic_fdi(g, agents, mult),
        ConditionLabel::Neighborhood(i) => neighborhood_fdi(g, agents, mult, i),
        ConditionLabel::Linkwise(k) => linkwise_fdi(g, agents, mult, k),
    }
}

/// Builds, solves and grid-checks one condition.
pub fn certify_condition(fdi: &QuadraticFDI, opts: &KypOptions) -> ConditionVerdict {
    let start = Instant::now();
    let eta = opts.margin.unwrap_or_else(|| default_margin(&fdi.mid));
    let backend = ClarabelBackend { max_iter: opts.max_iter };
    let mut v = ConditionVerdict {
        label: fdi.label,
        status: Verdict::Inconclusive,
        eps_achieved: f64::NAN,
        t_opt: f64::NAN,
        lmi_residual: f64::NAN,
        grid_max_eig: f64::NAN,
        grid_argmax: String::new(),
        certified_lower_bound: None,
        solver_status: String::new(),
        note: None,
        seconds: 0.0,
    };
    let solved = kyp_lmi(fdi, eta, opts.eps_min).and_then(|p| solve(&p, &backend, opts.feas_tol).map(|r| (p, r)));
    match solved {
        Err(e) => v.note = Some(e.to_string()),
        Ok((_, r)) => {
            let eps = if r.status == LmiStatus::Feasible { r.eps } else { opts.eps_min };
            let grid = frequency_grid_check(fdi, &opts.grid, eps);
            v.eps_achieved = r.eps;
            v.t_opt = r.t;
            v.lmi_residual = r.residual;
            v.grid_max_eig = grid.max_eig;
            v.grid_argmax = grid.argmax.to_string();
            v.certified_lower_bound = r.certified_lower_bound;
            v.solver_status = r.solver_status;
            v.status = match r.status {
                LmiStatus::Feasible if grid.max_eig <= opts.feas_tol => Verdict::Certified,
                LmiStatus::Feasible => {
                    v.note = Some("LMI feasible but the frequency grid refutes it".into());
                    Verdict::Inconclusive
                }
                LmiStatus::Infeasible => Verdict::NotCertified,
                LmiStatus::Inconclusive => Verdict::Inconclusive,
            };
        }
    }
    v.seconds = start.elapsed().as_secs_f64();
    v
}

/// Runs the requested methods; all conditions are solved in parallel.
pub fn certify_network(
    g: &NetworkGraph,
    agents: &[StateSpace],
    mult: &NetworkMultiplier,
    methods: &[Method],
    opts: &KypOptions,
) -> Result<CertificateReport, CertificateError> {
    let a1 = check_assumption1(g, agents)?;
    let vacuous = !(a1.well_posed && a1.nominal_stable);
    // fail early on malformed inputs rather than per condition
    monolithic_fdi(g, agents, mult)?;

    let jobs: Vec<(usize, ConditionLabel)> = methods
        .iter()
        .enumerate()
        .flat_map(|(mi, m)| m.labels(g).into_iter().map(move |l| (mi, l)))
        .collect();
    let verdicts: Vec<(usize, ConditionVerdict)> = jobs
        .par_iter()
        .map(|&(mi, label)| {
            let v = match build_fdi(g, agents, mult, label) {
                Ok(fdi) => certify_condition(&fdi, opts),
                Err(e) => ConditionVerdict {
                    label,
                    status: Verdict::Inconclusive,
                    eps_achieved: f64::NAN,
                    t_opt: f64::NAN,
                    lmi_residual: f64::NAN,
                    grid_max_eig: f64::NAN,
                    grid_argmax: String::new(),
                    certified_lower_bound: None,
                    solver_status: String::new(),
                    note: Some(e.to_string()),
                    seconds: 0.0,
                },
            };
            (mi, v)
        })
        .collect();

    let methods = methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let conditions: Vec<ConditionVerdict> =
                verdicts.iter().filter(|(i, _)| *i == mi).map(|(_, v)| v.clone()).collect();
            MethodReport {
                method,
                overall: overall_verdict(&conditions, vacuous),
                conditions,
            }
        })
        .collect();
    Ok(CertificateReport {
        assumption1: Assumption1Summary {
            well_posed: a1.well_posed,
            nominal_stable: a1.nominal_stable,
            max_real_eig: a1
                .closed_loop_eigs
                .iter()
                .map(|l| l.re)
                .fold(f64::NEG_INFINITY, f64::max),
        },
        vacuous,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::Strictness;
    use nalgebra::dmatrix;

    fn toy(f0: f64, f1: f64, lower: f64) -> AffineLmi {
        AffineLmi {
            f0: dmatrix![f0],
            fi: vec![dmatrix![f1]],
            lower: vec![(0, lower)],
        }
    }

    #[test]
    fn svec_round_trip_and_inner_product() {
        let a = dmatrix![1.0, 2.0, 3.0; 2.0, 4.0, 5.0; 3.0, 5.0, 6.0];
        let b = dmatrix![0.5, -1.0, 0.0; -1.0, 2.0, 1.5; 0.0, 1.5, -3.0];
        assert_eq!(smat(&svec(&a), 3), a);
        let ip: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert!((ip - inner(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn layout_matches_solver() {
        // F(x) = diag(x, −x, 0) with a coupling at (0,2): the [[x, ½],[½, 0]]
        // block keeps λ_max ≥ 0, so the optimum is interior and tight
        let f1 = DMatrix::from_diagonal(&nalgebra::dvector![1.0, -1.0, 0.0]);
        let mut f0 = DMatrix::zeros(3, 3);
        f0[(0, 2)] = 0.5;
        f0[(2, 0)] = 0.5;
        let lmi = AffineLmi { f0, fi: vec![f1], lower: vec![] };
        let out = ClarabelBackend::default().min_t(&lmi).unwrap();
        assert!(out.converged);
        let lm = lambda_max(&lmi.eval(&out.x));
        assert!((lm - out.t).abs() < 1e-6, "t = {}, λ = {lm}", out.t);
        // brute-force minimum over x
        let best = (0..20001)
            .map(|k| lambda_max(&lmi.eval(&[-2.0 + 4.0 * k as f64 / 20000.0])))
            .fold(f64::INFINITY, f64::min);
        assert!((best - out.t).abs() < 1e-3);
    }

    #[test]
    fn toy_feasible() {
        // x ≥ 1, x ⪯ 2  ⇔  x − 2 ⪯ 0
        let r = solve_affine(&toy(-2.0, 1.0, 1.0), &ClarabelBackend::default(), 1e-7).unwrap();
        assert_eq!(r.status, LmiStatus::Feasible);
        assert!(r.x[0] >= 1.0 - 1e-7 && r.x[0] <= 2.0 + 1e-7);
    }

    #[test]
    fn toy_infeasible_with_certificate() {
        // x + 1 ⪯ 0 with x ≥ 0
        let r = solve_affine(&toy(1.0, 1.0, 0.0), &ClarabelBackend::default(), 1e-7).unwrap();
        assert_eq!(r.status, LmiStatus::Infeasible);
        assert!((r.certified_lower_bound.unwrap() - 1.0).abs() < 1e-5);
    }

    fn scalar_fdi(mid: f64, w: f64) -> QuadraticFDI {
        QuadraticFDI {
            psi: StateSpace::from_transfer_function(&[1.0], &[1.0, 25.0]).unwrap(),
            mid: dmatrix![mid],
            eps_weight: dmatrix![w],
            strictness: Strictness::NonStrictWithEps,
            label: ConditionLabel::Monolithic,
            coords: vec![0],
        }
    }

    #[test]
    fn static_psi_reduces_to_dtmd() {
        let fdi = QuadraticFDI {
            psi: StateSpace::static_gain(dmatrix![1.0, 0.0; 0.0, 2.0]),
            mid: dmatrix![-1.0, 0.0; 0.0, -1.0],
            eps_weight: DMatrix::identity(2, 2),
            strictness: Strictness::StrictNegDef,
            label: ConditionLabel::Monolithic,
            coords: vec![0, 1],
        };
        let p = kyp_lmi(&fdi, 1e-9, 1e-6).unwrap();
        assert_eq!(p.nx(), 0);
        let f = p.assemble(&DMatrix::zeros(0, 0), 0.5);
        assert!((f - dmatrix![-0.5 + 1e-9, 0.0; 0.0, -3.5 + 1e-9]).amax() < 1e-15);
    }

    #[test]
    fn scalar_kyp_cases() {
        let backend = ClarabelBackend::default();
        // −|h|² < 0 except at ∞, where W = 0 leaves only η: feasible within tol
        let p = kyp_lmi(&scalar_fdi(-1.0, 0.0), 1e-9, 1e-6).unwrap();
        let r = solve(&p, &backend, 1e-7).unwrap();
        assert_eq!(r.status, LmiStatus::Feasible);
        assert!(verify_solution(&p, &r, 1e-7));

        let mut bad = r.clone();
        bad.p += DMatrix::identity(1, 1) * 10.0;
        assert!(!verify_solution(&p, &bad, 1e-7));
        let mut low = r.clone();
        low.eps = 0.0;
        assert!(!verify_solution(&p, &low, 1e-7));

        // positive mid with a feedthrough: never ⪯ 0
        let mut fdi = scalar_fdi(1.0, 1.0);
        fdi.psi.d[(0, 0)] = 1.0;
        let p = kyp_lmi(&fdi, 1e-9, 1e-6).unwrap();
        assert_eq!(solve(&p, &backend, 1e-7).unwrap().status, LmiStatus::Infeasible);
    }

    #[test]
    fn grid_oracle_identity() {
        let fdi = QuadraticFDI {
            psi: StateSpace::identity(2),
            mid: DMatrix::identity(2, 2),
            eps_weight: DMatrix::identity(2, 2),
            strictness: Strictness::StrictNegDef,
            label: ConditionLabel::Monolithic,
            coords: vec![0, 1],
        };
        let g = frequency_grid_check(&fdi, &[1.0, 10.0], 0.25);
        assert!((g.max_eig - 1.25).abs() < 1e-14);
    }

    #[test]
    fn grid_default_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 200);
        assert!((g[0] - 1e-3).abs() < 1e-15 && (g[199] - 1e5).abs() < 1e-7);
    }

    #[test]
    fn overall_rules() {
        let mk = |s| ConditionVerdict {
            label: ConditionLabel::Monolithic,
            status: s,
            eps_achieved: 0.0,
            t_opt: 0.0,
            lmi_residual: 0.0,
            grid_max_eig: 0.0,
            grid_argmax: String::new(),
            certified_lower_bound: None,
            solver_status: String::new(),
            note: None,
            seconds: 0.0,
        };
        use Verdict::*;
        assert_eq!(overall_verdict(&[mk(Certified), mk(Certified)], false), Certified);
        assert_eq!(overall_verdict(&[mk(Certified), mk(Inconclusive)], false), Inconclusive);
        assert_eq!(overall_verdict(&[mk(Inconclusive), mk(NotCertified)], false), NotCertified);
        assert_eq!(overall_verdict(&[mk(Certified)], true), NotCertified);
    }
}
