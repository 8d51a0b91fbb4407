//! Time-domain demonstrator: the network with static sector-bounded link
//! gains `R = I + diag(δ)`, integrated with fixed-step RK4.
//!
//! This is a falsification aid only — a bounded run proves nothing about
//! robust stability.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{fan_out, routing_permutation, NetworkGraph};
use crate::lti::{stacked_agents, validate_agents, LtiError, StateSpace, HURWITZ_TOL};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("empty sector: alpha = {alpha} exceeds beta = {beta}")]
    EmptySector { alpha: f64, beta: f64 },
    #[error("interconnection is ill-posed: I − P R D is singular")]
    IllPosed,
    #[error("bad simulation parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One static gain per link direction (i.e. per coordinate), drawn in the
/// owning agent's sector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSample {
    pub deltas: Vec<f64>,
    pub seed: u64,
}

/// Uniform draws on a slightly widened interval, clamped back into
/// `[α, β]`, so the sector ends carry a little probability mass.
pub fn sample_links(g: &NetworkGraph, alpha: f64, beta: f64, seed: u64) -> Result<LinkSample, SimError> {
    let sectors = vec![(alpha, beta); g.agent_count()];
    sample_links_per_agent(g, &sectors, seed)
}

pub fn sample_links_per_agent(g: &NetworkGraph, sectors: &[(f64, f64)], seed: u64) -> Result<LinkSample, SimError> {
    if sectors.len() != g.agent_count() {
        return Err(SimError::BadParams(format!(
            "{} sectors for {} agents",
            sectors.len(),
            g.agent_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deltas = Vec::with_capacity(g.coord_count());
    for (i, &(alpha, beta)) in sectors.iter().enumerate() {
        if !(alpha <= beta) {
            return Err(SimError::EmptySector { alpha, beta });
        }
        let pad = 0.05 * (beta - alpha);
        for _ in 0..g.degree(i) {
            let u: f64 = rng.random_range(0.0..=1.0);
            let v = (alpha - pad) + u * (beta - alpha + 2.0 * pad);
            deltas.push(v.clamp(alpha, beta));
        }
    }
    Ok(LinkSample { deltas, seed })
}

/// Interconnection `v = P w + d`, `w = R T H(v)`; input `d` (2m), output
/// `y = H(v)` (n).
pub fn closed_loop_ss(g: &NetworkGraph, agents: &[StateSpace], links: &LinkSample) -> Result<StateSpace, SimError> {
    validate_agents(g, agents)?;
    let q = g.coord_count();
    if links.deltas.len() != q {
        return Err(SimError::BadParams(format!("{} link gains for {q} coordinates", links.deltas.len())));
    }
    let h = stacked_agents(agents);
    let t = fan_out(g).to_dense();
    let p = routing_permutation(g).to_dense();
    let r = DMatrix::from_diagonal(&DVector::from_iterator(q, links.deltas.iter().map(|d| 1.0 + d)));
    let prc = &p * &r * &t * &h.c;
    let prd = &p * &r * &t * &h.d;
    let loop_mat = DMatrix::identity(q, q) - prd;
    let lu = loop_mat.clone().lu();
    if loop_mat.determinant().abs() < 1e-12 {
        return Err(SimError::IllPosed);
    }
    let inv = lu.try_inverse().ok_or(SimError::IllPosed)?;
    // v = inv (PRC x + d)
    let a = &h.a + &h.b * &inv * &prc;
    let b = &h.b * &inv;
    let c = &h.c + &h.d * &inv * &prc;
    let d = &h.d * &inv;
    Ok(StateSpace::new(a, b, c, d)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Disturbance {
    Zero,
    /// Rectangular pulse of the given area on one channel, starting at t = 0.
    Pulse { channel: usize, area: f64, width: f64 },
    Step { channel: usize, amplitude: f64 },
    Sine { channel: usize, amplitude: f64, omega: f64 },
}

impl Disturbance {
    fn eval(&self, t: f64, out: &mut DVector<f64>) {
        out.fill(0.0);
        match *self {
            Disturbance::Zero => {}
            Disturbance::Pulse { channel, area, width } => {
                if t < width {
                    out[channel] = area / width;
                }
            }
            Disturbance::Step { channel, amplitude } => out[channel] = amplitude,
            Disturbance::Sine { channel, amplitude, omega } => out[channel] = amplitude * (omega * t).sin(),
        }
    }

    fn channel(&self) -> Option<usize> {
        match *self {
            Disturbance::Zero => None,
            Disturbance::Pulse { channel, .. } | Disturbance::Step { channel, .. } | Disturbance::Sine { channel, .. } => {
                Some(channel)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub t: Vec<f64>,
    /// `y[k]` is the output at `t[k]`.
    pub y: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    /// `‖y‖₂ / ‖d‖₂` by the rectangle rule on the time grid; `None` for a
    /// zero disturbance.
    pub energy_ratio: Option<f64>,
    pub bounded: bool,
}

/// Outputs above this magnitude count as blow-up.
pub const OVERFLOW: f64 = 1e8;

/// Step heuristic: a thousandth of the fastest time constant.
pub fn default_dt(ss: &StateSpace) -> f64 {
    let fastest = ss.eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max);
    if fastest > 0.0 {
        1e-3 / fastest
    } else {
        1e-3
    }
}

pub fn simulate(ss: &StateSpace, dist: &Disturbance, horizon: f64, dt: f64) -> Result<SimResult, SimError> {
    if !(dt > 0.0 && horizon > 0.0 && dt.is_finite() && horizon.is_finite()) {
        return Err(SimError::BadParams(format!("dt = {dt}, horizon = {horizon}")));
    }
    if let Some(c) = dist.channel() {
        if c >= ss.nu() {
            return Err(SimError::BadParams(format!("disturbance channel {c} ≥ {}", ss.nu())));
        }
    }
    let steps = (horizon / dt).round() as usize;
    let nu = ss.nu();
    let mut x = DVector::zeros(ss.nx());
    let mut d0 = DVector::zeros(nu);
    let mut dh = DVector::zeros(nu);
    let mut d1 = DVector::zeros(nu);
    let f = |x: &DVector<f64>, d: &DVector<f64>| &ss.a * x + &ss.b * d;

    let mut res = SimResult {
        t: Vec::with_capacity(steps + 1),
        y: Vec::with_capacity(steps + 1),
        d: Vec::with_capacity(steps + 1),
        energy_ratio: None,
        bounded: true,
    };
    let (mut ey, mut ed) = (0.0, 0.0);
    for k in 0..=steps {
        let t = k as f64 * dt;
        dist.eval(t, &mut d0);
        let y = &ss.c * &x + &ss.d * &d0;
        if y.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW) || x.iter().any(|v| !v.is_finite()) {
            res.bounded = false;
            break;
        }
        ey += y.norm_squared() * dt;
        ed += d0.norm_squared() * dt;
        res.t.push(t);
        res.y.push(y.iter().copied().collect());
        res.d.push(d0.iter().copied().collect());
        if k == steps {
            break;
        }
        dist.eval(t + 0.5 * dt, &mut dh);
        dist.eval(t + dt, &mut d1);
        let k1 = f(&x, &d0);
        let k2 = f(&(&x + &k1 * (0.5 * dt)), &dh);
        let k3 = f(&(&x + &k2 * (0.5 * dt)), &dh);
        let k4 = f(&(&x + &k3 * dt), &d1);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    if ed > 0.0 {
        res.energy_ratio = Some((ey / ed).sqrt());
    }
    Ok(res)
}

/// Largest singular value of the frequency response over `grid ∪ {0, ∞}`.
pub fn peak_gain(ss: &StateSpace, grid: &[f64]) -> Result<f64, LtiError> {
    let mut best: f64 = 0.0;
    let pts = std::iter::once(0.0).chain(grid.iter().copied()).chain(std::iter::once(f64::INFINITY));
    for w in pts {
        let m = ss.eval(w)?;
        if m.nrows() > 0 && m.ncols() > 0 {
            best = best.max(m.singular_values().max());
        }
    }
    Ok(best)
}

/// Writes `t, y_1 .. y_n` rows.
pub fn write_csv<W: Write>(res: &SimResult, w: W) -> Result<(), SimError> {
    let mut wr = csv::Writer::from_writer(w);
    let n = res.y.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("y_{i}")));
    wr.write_record(&header)?;
    for (t, y) in res.t.iter().zip(&res.y) {
        let mut rec = vec![t.to_string()];
        rec.extend(y.iter().map(|v| v.to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Whether the sampled closed loop for each seed is Hurwitz, computed in
/// parallel.
pub fn monte_carlo_hurwitz(
    g: &NetworkGraph,
    agents: &[StateSpace],
    sectors: &[(f64, f64)],
    seeds: std::ops::Range<u64>,
) -> Result<Vec<(u64, bool)>, SimError> {
    seeds
        .into_par_iter()
        .map(|s| {
            let links = sample_links_per_agent(g, sectors, s)?;
            let cl = closed_loop_ss(g, agents, &links)?;
            Ok((s, cl.is_hurwitz(HURWITZ_TOL)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn two(gain: f64) -> (NetworkGraph, Vec<StateSpace>) {
        let g = NetworkGraph::new(2, &[(0, 1)]).unwrap();
        let h = StateSpace::from_transfer_function(&[gain], &[1.0, 25.0]).unwrap();
        (g, vec![h.clone(), h])
    }

    #[test]
    fn sampling_is_deterministic_and_in_sector() {
        let g = NetworkGraph::path(10).unwrap();
        let a = sample_links(&g, -2.0, 0.15, 7).unwrap();
        assert_eq!(a, sample_links(&g, -2.0, 0.15, 7).unwrap());
        assert_eq!(a.deltas.len(), 18);
        assert!(a.deltas.iter().all(|d| (-2.0..=0.15).contains(d)));
        let c = sample_links(&g, 0.1, 0.1, 3).unwrap();
        assert!(c.deltas.iter().all(|&d| d == 0.1));
        assert!(matches!(sample_links(&g, 1.0, 0.0, 0), Err(SimError::EmptySector { .. })));
    }

    #[test]
    fn closed_loop_examples() {
        let (g, agents) = two(1.0);
        let ideal = LinkSample { deltas: vec![0.0, 0.0], seed: 0 };
        let cl = closed_loop_ss(&g, &agents, &ideal).unwrap();
        assert!((&cl.a - dmatrix![-25.0, 1.0; 1.0, -25.0]).amax() < 1e-14);

        let links = LinkSample { deltas: vec![0.15, 0.15], seed: 0 };
        let cl = closed_loop_ss(&g, &agents, &links).unwrap();
        assert!((&cl.a - dmatrix![-25.0, 1.15; 1.15, -25.0]).amax() < 1e-14);
        let mut re: Vec<f64> = cl.eigenvalues().iter().map(|l| l.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 26.15).abs() < 1e-12 && (re[1] + 23.85).abs() < 1e-12);
    }

    #[test]
    fn ill_posed_static_loop() {
        let g = NetworkGraph::new(2, &[(0, 1)]).unwrap();
        let k = StateSpace::static_gain(dmatrix![0.5]);
        // (1+δ)·0.5 = 1 on both directions makes I − P R D singular
        let links = LinkSample { deltas: vec![1.0, 1.0], seed: 0 };
        assert!(matches!(closed_loop_ss(&g, &[k.clone(), k], &links), Err(SimError::IllPosed)));
    }

    #[test]
    fn zero_disturbance_gives_zero_output() {
        let (g, agents) = two(1.0);
        let cl = closed_loop_ss(&g, &agents, &LinkSample { deltas: vec![0.1, -0.3], seed: 0 }).unwrap();
        let r = simulate(&cl, &Disturbance::Zero, 0.1, 1e-3).unwrap();
        assert!(r.bounded && r.y.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(r.energy_ratio, None);
        assert_eq!(r.t.len(), 101);
    }

    #[test]
    fn unstable_loop_blows_up() {
        let (g, agents) = two(50.0);
        let cl = closed_loop_ss(&g, &agents, &LinkSample { deltas: vec![0.0, 0.0], seed: 0 }).unwrap();
        let pulse = Disturbance::Pulse { channel: 0, area: 1.0, width: 1e-2 };
        let r = simulate(&cl, &pulse, 2.0, 1e-3).unwrap();
        assert!(!r.bounded);
        assert!(r.t.len() < 2001);
    }

    #[test]
    fn rk4_matches_exact_first_order_response() {
        // ẋ = −x + d, step d = 1: y = 1 − e^{−t}
        let ss = StateSpace::from_transfer_function(&[1.0], &[1.0, 1.0]).unwrap();
        let r = simulate(&ss, &Disturbance::Step { channel: 0, amplitude: 1.0 }, 1.0, 1e-2).unwrap();
        let last = *r.y.last().unwrap().first().unwrap();
        assert!((last - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let (g, agents) = two(1.0);
        let cl = closed_loop_ss(&g, &agents, &LinkSample { deltas: vec![0.0, 0.0], seed: 0 }).unwrap();
        let r = simulate(&cl, &Disturbance::Step { channel: 1, amplitude: 1.0 }, 0.002, 1e-3).unwrap();
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,y_1,y_2");
        assert_eq!(text.lines().count(), 4);
    }
}
