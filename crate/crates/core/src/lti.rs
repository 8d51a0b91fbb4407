//! Continuous-time state-space systems, frequency evaluation and the small
//! amount of realization algebra needed to build the certificate operators.

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::graph::{fan_out, routing_permutation, NetworkGraph};

pub type CMatrix = DMatrix<Complex<f64>>;

/// Frequency responses are plain complex matrices; `Frequency::Infinity`
/// evaluates to the feedthrough `D`.
pub type FrequencyMatrix = CMatrix;

/// Default tolerance on eigenvalue real parts for Hurwitz checks.
pub const HURWITZ_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LtiError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("improper transfer function: numerator degree {num} exceeds denominator degree {den}")]
    ImproperTF { num: usize, den: usize },
    #[error("unstable transfer function: pole with real part {0:.3e}")]
    UnstableTF(f64),
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("resolvent (jωI − A) is singular at ω = {0}")]
    SingularResolvent(f64),
    #[error("agent {agent}: state matrix is not Hurwitz (max real part {max_re:.3e})")]
    UnstableAgent { agent: usize, max_re: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frequency {
    Finite(f64),
    Infinity,
}

impl From<f64> for Frequency {
    fn from(w: f64) -> Self {
        if w.is_infinite() {
            Frequency::Infinity
        } else {
            Frequency::Finite(w)
        }
    }
}

impl std::fmt::Display for Frequency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Frequency::Finite(w) => write!(f, "{w:.4e}"),
            Frequency::Infinity => write!(f, "inf"),
        }
    }
}

/// Real realization `ẋ = Ax + Bu, y = Cx + Du`. `n_x = 0` is a static gain.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self, LtiError> {
        let nx = a.nrows();
        if a.ncols() != nx {
            return Err(LtiError::DimensionMismatch(format!("A is {}x{}", nx, a.ncols())));
        }
        if b.nrows() != nx || c.ncols() != nx {
            return Err(LtiError::DimensionMismatch(format!(
                "A is {nx}x{nx} but B is {}x{} and C is {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(LtiError::DimensionMismatch(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (ny, nu) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, nu),
            c: DMatrix::zeros(ny, 0),
            d,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::static_gain(DMatrix::identity(n, n))
    }

    /// Controllable canonical realization of `num(s)/den(s)`; coefficients are
    /// in descending powers of `s`.
    pub fn from_transfer_function(num: &[f64], den: &[f64]) -> Result<Self, LtiError> {
        let den = strip_leading_zeros(den);
        let num = strip_leading_zeros(num);
        if den.is_empty() {
            return Err(LtiError::ZeroDenominator);
        }
        let n = den.len() - 1;
        if num.len() > den.len() {
            return Err(LtiError::ImproperTF {
                num: num.len() - 1,
                den: n,
            });
        }
        let lead = den[0];
        let a_coef: Vec<f64> = den.iter().map(|x| x / lead).collect();
        let mut b_coef = vec![0.0; n + 1 - num.len()];
        b_coef.extend(num.iter().map(|x| x / lead));

        let d0 = b_coef[0];
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            a[(0, j)] = -a_coef[j + 1];
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = DMatrix::zeros(n, 1);
        if n > 0 {
            b[(0, 0)] = 1.0;
        }
        let mut c = DMatrix::zeros(1, n);
        for j in 0..n {
            c[(0, j)] = b_coef[j + 1] - d0 * a_coef[j + 1];
        }
        let ss = Self::new(a, b, c, DMatrix::from_element(1, 1, d0))?;
        let max_re = ss.spectral_abscissa();
        if n > 0 && max_re >= -HURWITZ_TOL {
            return Err(LtiError::UnstableTF(max_re));
        }
        Ok(ss)
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    /// `C (jωI − A)⁻¹ B + D`.
    pub fn eval(&self, w: impl Into<Frequency>) -> Result<FrequencyMatrix, LtiError> {
        let d = self.d.map(|x| Complex::new(x, 0.0));
        let w = match w.into() {
            Frequency::Infinity => return Ok(d),
            Frequency::Finite(w) => w,
        };
        if self.nx() == 0 {
            return Ok(d);
        }
        let n = self.nx();
        let mut res = self.a.map(|x| Complex::new(-x, 0.0));
        for i in 0..n {
            res[(i, i)] += Complex::new(0.0, w);
        }
        let b = self.b.map(|x| Complex::new(x, 0.0));
        let lu = res.lu();
        let x = lu.solve(&b).ok_or(LtiError::SingularResolvent(w))?;
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(LtiError::SingularResolvent(w));
        }
        let c = self.c.map(|x| Complex::new(x, 0.0));
        Ok(c * x + d)
    }

    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        eigenvalues(&self.a)
    }

    /// Largest real part of the eigenvalues of `A` (−∞ for static systems).
    pub fn spectral_abscissa(&self) -> f64 {
        spectral_abscissa(&self.a)
    }

    pub fn is_hurwitz(&self, tol: f64) -> bool {
        is_hurwitz(&self.a, tol)
    }

    pub fn block_diag(parts: &[StateSpace]) -> StateSpace {
        let a = block_diag_mat(parts.iter().map(|p| &p.a));
        let b = block_diag_mat(parts.iter().map(|p| &p.b));
        let c = block_diag_mat(parts.iter().map(|p| &p.c));
        let d = block_diag_mat(parts.iter().map(|p| &p.d));
        StateSpace { a, b, c, d }
    }

    /// `outer ∘ inner`: feeds the output of `inner` into `outer`.
    pub fn series(outer: &StateSpace, inner: &StateSpace) -> Result<StateSpace, LtiError> {
        if outer.nu() != inner.ny() {
            return Err(LtiError::DimensionMismatch(format!(
                "series: outer takes {} inputs, inner produces {}",
                outer.nu(),
                inner.ny()
            )));
        }
        let (n1, n2) = (inner.nx(), outer.nx());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&inner.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&outer.b * &inner.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&outer.a);
        let mut b = DMatrix::zeros(n1 + n2, inner.nu());
        b.view_mut((0, 0), (n1, inner.nu())).copy_from(&inner.b);
        b.view_mut((n1, 0), (n2, inner.nu())).copy_from(&(&outer.b * &inner.d));
        let mut c = DMatrix::zeros(outer.ny(), n1 + n2);
        c.view_mut((0, 0), (outer.ny(), n1)).copy_from(&(&outer.d * &inner.c));
        c.view_mut((0, n1), (outer.ny(), n2)).copy_from(&outer.c);
        let d = &outer.d * &inner.d;
        Ok(StateSpace { a, b, c, d })
    }

    /// Systems driven by the same input, outputs stacked.
    pub fn vstack_shared_input(parts: &[StateSpace]) -> Result<StateSpace, LtiError> {
        let nu = parts.first().map_or(0, StateSpace::nu);
        if parts.iter().any(|p| p.nu() != nu) {
            return Err(LtiError::DimensionMismatch("vstack: input counts differ".into()));
        }
        let a = block_diag_mat(parts.iter().map(|p| &p.a));
        let b = vstack_mat(parts.iter().map(|p| &p.b), nu);
        let c = block_diag_mat(parts.iter().map(|p| &p.c));
        let d = vstack_mat(parts.iter().map(|p| &p.d), nu);
        Ok(StateSpace { a, b, c, d })
    }

    /// Parallel sum `g1 + g2`.
    pub fn add(g1: &StateSpace, g2: &StateSpace) -> Result<StateSpace, LtiError> {
        if g1.nu() != g2.nu() || g1.ny() != g2.ny() {
            return Err(LtiError::DimensionMismatch(format!(
                "add: {}x{} vs {}x{}",
                g1.ny(),
                g1.nu(),
                g2.ny(),
                g2.nu()
            )));
        }
        let stacked = Self::vstack_shared_input(&[g1.clone(), g2.clone()])?;
        let ny = g1.ny();
        let mut sum = DMatrix::zeros(ny, 2 * ny);
        sum.view_mut((0, 0), (ny, ny)).fill_with_identity();
        sum.view_mut((0, ny), (ny, ny)).fill_with_identity();
        Self::series(&Self::static_gain(sum), &stacked)
    }

    /// `h ⋅ 1ᵀ`: a SISO system copied onto `m` summed inputs, sharing its state.
    pub fn with_shared_inputs(&self, m: usize) -> Result<StateSpace, LtiError> {
        if self.nu() != 1 {
            return Err(LtiError::DimensionMismatch(format!(
                "with_shared_inputs needs a single-input system, got {} inputs",
                self.nu()
            )));
        }
        Self::series(self, &Self::static_gain(DMatrix::from_element(1, m, 1.0)))
    }
}

fn strip_leading_zeros(p: &[f64]) -> Vec<f64> {
    p.iter().copied().skip_while(|x| *x == 0.0).collect()
}

pub fn block_diag_mat<'a>(parts: impl Iterator<Item = &'a DMatrix<f64>> + Clone) -> DMatrix<f64> {
    let rows: usize = parts.clone().map(|p| p.nrows()).sum();
    let cols: usize = parts.clone().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for p in parts {
        out.view_mut((r, c), p.shape()).copy_from(p);
        r += p.nrows();
        c += p.ncols();
    }
    out
}

fn vstack_mat<'a>(parts: impl Iterator<Item = &'a DMatrix<f64>> + Clone, cols: usize) -> DMatrix<f64> {
    let rows: usize = parts.clone().map(|p| p.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        out.view_mut((r, 0), p.shape()).copy_from(p);
        r += p.nrows();
    }
    out
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    // LAPACK dgeev; nalgebra's own Schur iteration has no cap and can spin
    // forever on some closed-loop matrices
    if let Some(e) = nalgebra_lapack::Eigen::new(a.clone(), false, false) {
        return e.eigenvalues_re.iter().zip(e.eigenvalues_im.iter()).map(|(&re, &im)| Complex::new(re, im)).collect();
    }
    match nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000) {
        Some(s) => s.complex_eigenvalues().iter().copied().collect(),
        None => vec![Complex::new(f64::NAN, f64::NAN); a.nrows()],
    }
}

pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// True iff every eigenvalue of `a` has real part below `−tol`.
pub fn is_hurwitz(a: &DMatrix<f64>, tol: f64) -> bool {
    spectral_abscissa(a) < -tol
}

/// Checks that `agents` fits the graph: one single-output agent per vertex,
/// `m_i` inputs each, Hurwitz state matrices.
pub fn validate_agents(g: &NetworkGraph, agents: &[StateSpace]) -> Result<(), LtiError> {
    if agents.len() != g.agent_count() {
        return Err(LtiError::DimensionMismatch(format!(
            "{} agents for a graph with {} vertices",
            agents.len(),
            g.agent_count()
        )));
    }
    for (i, h) in agents.iter().enumerate() {
        if h.ny() != 1 || h.nu() != g.degree(i) {
            return Err(LtiError::DimensionMismatch(format!(
                "agent {i} is {}x{}, expected 1x{}",
                h.ny(),
                h.nu(),
                g.degree(i)
            )));
        }
        if h.nx() > 0 && !h.is_hurwitz(HURWITZ_TOL) {
            return Err(LtiError::UnstableAgent {
                agent: i,
                max_re: h.spectral_abscissa(),
            });
        }
    }
    Ok(())
}

/// `H = ⊕ H_i`: n outputs, 2m inputs.
pub fn stacked_agents(agents: &[StateSpace]) -> StateSpace {
    StateSpace::block_diag(agents)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption1Report {
    pub well_posed: bool,
    pub nominal_stable: bool,
    pub closed_loop_eigs: Vec<Complex<f64>>,
}

/// Nominal (ideal-link) loop `w = (T∘H)(P w + d)`.
pub fn check_assumption1(g: &NetworkGraph, agents: &[StateSpace]) -> Result<Assumption1Report, LtiError> {
    validate_agents(g, agents)?;
    let h = stacked_agents(agents);
    let t = fan_out(g).to_dense();
    let p = routing_permutation(g).to_dense();
    let c_th = &t * &h.c;
    let d_th = &t * &h.d;
    let n2 = g.coord_count();
    let loop_mat = DMatrix::identity(n2, n2) - &d_th * &p;
    let Some(inv) = loop_mat.clone().try_inverse().filter(|_| loop_mat.determinant().abs() > 1e-12) else {
        return Ok(Assumption1Report {
            well_posed: false,
            nominal_stable: false,
            closed_loop_eigs: Vec::new(),
        });
    };
    let a_cl = &h.a + &h.b * &p * inv * c_th;
    let eigs = eigenvalues(&a_cl);
    let stable = eigs.iter().all(|l| l.re < -HURWITZ_TOL);
    Ok(Assumption1Report {
        well_posed: true,
        nominal_stable: stable,
        closed_loop_eigs: eigs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn first_order() -> StateSpace {
        StateSpace::from_transfer_function(&[1.0], &[1.0, 25.0]).unwrap()
    }

    #[test]
    fn tf_realization_matches_canonical_form() {
        let h = first_order();
        assert_eq!(h.a, dmatrix![-25.0]);
        assert_eq!(h.b, dmatrix![1.0]);
        assert_eq!(h.c, dmatrix![1.0]);
        assert_eq!(h.d, dmatrix![0.0]);

        let k = StateSpace::from_transfer_function(&[1.0], &[1.0]).unwrap();
        assert_eq!(k.nx(), 0);
        assert_eq!(k.d, dmatrix![1.0]);
    }

    #[test]
    fn tf_errors() {
        assert!(matches!(
            StateSpace::from_transfer_function(&[1.0], &[1.0, -1.0]),
            Err(LtiError::UnstableTF(_))
        ));
        assert!(matches!(
            StateSpace::from_transfer_function(&[1.0, 0.0, 0.0], &[1.0, 1.0]),
            Err(LtiError::ImproperTF { num: 2, den: 1 })
        ));
        assert_eq!(
            StateSpace::from_transfer_function(&[1.0], &[0.0]),
            Err(LtiError::ZeroDenominator)
        );
    }

    #[test]
    fn tf_with_feedthrough() {
        // (2s + 3) / (s + 1) = 2 + 1/(s+1)
        let g = StateSpace::from_transfer_function(&[2.0, 3.0], &[1.0, 1.0]).unwrap();
        assert_eq!(g.d, dmatrix![2.0]);
        let v = g.eval(0.0).unwrap()[(0, 0)];
        assert!((v.re - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eval_examples() {
        let h = first_order();
        let v0 = h.eval(0.0).unwrap()[(0, 0)];
        assert!((v0.re - 0.04).abs() < 1e-15 && v0.im.abs() < 1e-15);
        assert_eq!(h.eval(Frequency::Infinity).unwrap()[(0, 0)], Complex::new(0.0, 0.0));
        let k = StateSpace::static_gain(dmatrix![3.0]);
        assert_eq!(k.eval(17.0).unwrap()[(0, 0)], Complex::new(3.0, 0.0));
    }

    #[test]
    fn singular_resolvent_is_reported() {
        let osc = StateSpace::new(
            dmatrix![0.0, 1.0; -1.0, 0.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, 0.0],
            dmatrix![0.0],
        )
        .unwrap();
        assert!(matches!(osc.eval(1.0), Err(LtiError::SingularResolvent(_))));
    }

    #[test]
    fn hurwitz_examples() {
        assert!(is_hurwitz(&dmatrix![-25.0], HURWITZ_TOL));
        assert!(!is_hurwitz(&dmatrix![0.0, 1.0; -1.0, 0.0], HURWITZ_TOL));
        assert!(is_hurwitz(&dmatrix![-25.0, 1.0; 1.0, -25.0], HURWITZ_TOL));
    }

    #[test]
    fn algebra_shapes() {
        let h = first_order();
        let two = StateSpace::block_diag(&[h.clone(), h.clone()]);
        assert_eq!((two.nx(), two.nu(), two.ny()), (2, 2, 2));
        assert_eq!(two.a, dmatrix![-25.0, 0.0; 0.0, -25.0]);

        let p = StateSpace::static_gain(dmatrix![0.0, 1.0; 1.0, 0.0]);
        let ph = StateSpace::series(&p, &two).unwrap();
        assert_eq!(ph.nx(), 2);
        let w = 3.0;
        let direct = p.eval(w).unwrap() * two.eval(w).unwrap();
        assert!((ph.eval(w).unwrap() - direct).norm() < 1e-14);

        assert!(StateSpace::series(&two, &h).is_err());
        assert!(StateSpace::add(&two, &h).is_err());
    }

    #[test]
    fn shared_inputs_keep_one_state() {
        let h2 = first_order().with_shared_inputs(2).unwrap();
        assert_eq!((h2.nx(), h2.nu(), h2.ny()), (1, 2, 1));
        let v = h2.eval(0.0).unwrap();
        assert!((v[(0, 0)].re - 0.04).abs() < 1e-15 && (v[(0, 1)].re - 0.04).abs() < 1e-15);
    }

    #[test]
    fn assumption1_two_agents() {
        let g = NetworkGraph::new(2, &[(0, 1)]).unwrap();
        let rep = check_assumption1(&g, &[first_order(), first_order()]).unwrap();
        assert!(rep.well_posed && rep.nominal_stable);
        let mut re: Vec<f64> = rep.closed_loop_eigs.iter().map(|l| l.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 26.0).abs() < 1e-9 && (re[1] + 24.0).abs() < 1e-9);

        let hot = StateSpace::from_transfer_function(&[50.0], &[1.0, 25.0]).unwrap();
        let rep = check_assumption1(&g, &[hot.clone(), hot]).unwrap();
        assert!(rep.well_posed && !rep.nominal_stable);
        let max = rep.closed_loop_eigs.iter().map(|l| l.re).fold(f64::MIN, f64::max);
        assert!((max - 25.0).abs() < 1e-9);
    }

    #[test]
    fn assumption1_ill_posed_loop() {
        // unit feedthrough on both ends: I − D P is singular
        let g = NetworkGraph::new(2, &[(0, 1)]).unwrap();
        let one = StateSpace::static_gain(dmatrix![1.0]);
        let rep = check_assumption1(&g, &[one.clone(), one]).unwrap();
        assert!(!rep.well_posed);
    }

    #[test]
    fn agent_validation() {
        let g = NetworkGraph::path(3).unwrap();
        let h = first_order();
        assert!(validate_agents(&g, &[h.clone(), h.clone(), h.clone()]).is_err());
        let ok = [h.clone(), h.with_shared_inputs(2).unwrap(), h.clone()];
        assert!(validate_agents(&g, &ok).is_ok());
    }
}
