//! Seeded random networks shared by the integration suites.

#![allow(dead_code, clippy::needless_range_loop)]

use netiqc::multiplier::NetworkMultiplier;
use netiqc::{NetworkGraph, StateSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random simple graph on `2..=max_n` agents without isolated agents.
pub fn random_graph(r: &mut impl Rng, max_n: usize) -> NetworkGraph {
    let n = r.random_range(2..=max_n);
    let p: f64 = r.random_range(0.2..0.8);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    for i in 0..n {
        if !edges.iter().any(|&(a, b)| a == i || b == i) {
            let mut j = r.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            edges.push((i.min(j), i.max(j)));
        }
    }
    NetworkGraph::new(n, &edges).expect("generator builds simple graphs")
}

/// Stable SISO agent with one or two states, possibly with feedthrough.
pub fn random_agent(r: &mut impl Rng) -> StateSpace {
    let k: f64 = r.random_range(-3.0..3.0);
    let d: f64 = if r.random_bool(0.3) { r.random_range(-0.3..0.3) } else { 0.0 };
    let (num, den) = if r.random_bool(0.5) {
        let a: f64 = r.random_range(0.5..30.0);
        // k/(s+a) + d
        (vec![d, k + d * a], vec![1.0, a])
    } else {
        let (a1, a0) = if r.random_bool(0.5) {
            let p1: f64 = r.random_range(0.5..30.0);
            let p2: f64 = r.random_range(0.5..30.0);
            (p1 + p2, p1 * p2)
        } else {
            let sigma: f64 = r.random_range(0.5..10.0);
            let w: f64 = r.random_range(0.1..20.0);
            (2.0 * sigma, sigma * sigma + w * w)
        };
        let b1: f64 = r.random_range(-2.0..2.0);
        (vec![d, b1 + d * a1, k + d * a0], vec![1.0, a1, a0])
    };
    StateSpace::from_transfer_function(&num, &den).expect("stable proper agent")
}

/// A sector containing 0; with `centred`, one symmetric about −1 (α + β = −2).
pub fn random_sector(r: &mut impl Rng, centred: bool) -> (f64, f64) {
    if centred {
        let c: f64 = r.random_range(1.0..1.5);
        (-1.0 - c, -1.0 + c)
    } else {
        (r.random_range(-3.0..0.0), r.random_range(0.0..1.0))
    }
}

pub struct RandomNetwork {
    pub graph: NetworkGraph,
    pub agents: Vec<StateSpace>,
    pub sectors: Vec<(f64, f64)>,
    pub multiplier: NetworkMultiplier,
}

/// `centred_fraction` of the agents get a sector centred at −1.
pub fn random_network(r: &mut impl Rng, max_n: usize, centred_fraction: f64) -> RandomNetwork {
    let graph = random_graph(r, max_n);
    let n = graph.agent_count();
    let agents = (0..n)
        .map(|i| random_agent(r).with_shared_inputs(graph.degree(i)).unwrap())
        .collect();
    let centred = r.random_bool(centred_fraction);
    let base = random_sector(r, centred);
    let sectors: Vec<(f64, f64)> = (0..n)
        .map(|_| if r.random_bool(0.3) { random_sector(r, centred) } else { base })
        .collect();
    let overrides: Vec<(usize, f64, f64)> = sectors.iter().enumerate().map(|(i, &(a, b))| (i, a, b)).collect();
    let multiplier = NetworkMultiplier::sector_with_overrides(&graph, base.0, base.1, &overrides).unwrap();
    RandomNetwork { graph, agents, sectors, multiplier }
}

/// The path-10 example network.
pub fn path10() -> RandomNetwork {
    let graph = NetworkGraph::path(10).unwrap();
    let h = StateSpace::from_transfer_function(&[1.0], &[1.0, 25.0]).unwrap();
    let agents = (0..10).map(|i| h.with_shared_inputs(graph.degree(i)).unwrap()).collect();
    let multiplier = NetworkMultiplier::sector(&graph, -2.0, 0.15).unwrap();
    RandomNetwork { graph, agents, sectors: vec![(-2.0, 0.15); 10], multiplier }
}

pub fn rel_err(a: &netiqc::lti::CMatrix, b: &netiqc::lti::CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Proptest strategy: a simple graph on `2..=max_n` agents; isolated agents
/// are attached to a chosen partner.
pub fn graph_strategy(max_n: usize) -> impl proptest::strategy::Strategy<Value = NetworkGraph> {
    use proptest::prelude::*;
    (2..=max_n)
        .prop_flat_map(|n| (Just(n), proptest::collection::vec(any::<bool>(), n * (n - 1) / 2), proptest::collection::vec(0..n - 1, n)))
        .prop_map(|(n, bits, partners)| {
            let mut edges = Vec::new();
            let mut b = bits.iter();
            for i in 0..n {
                for j in i + 1..n {
                    if *b.next().unwrap() {
                        edges.push((i, j));
                    }
                }
            }
            for i in 0..n {
                if !edges.iter().any(|&(a, c)| a == i || c == i) {
                    let j = if partners[i] >= i { partners[i] + 1 } else { partners[i] };
                    edges.push((i.min(j), i.max(j)));
                }
            }
            NetworkGraph::new(n, &edges).unwrap()
        })
}

/// Every violated structural identity, by name; empty when all hold exactly.
pub fn structure_violations(g: &NetworkGraph) -> Vec<String> {
    use netiqc::graph::StructuralMatrices;
    use netiqc::sparse::{sum_or_zero, SparseInt};

    let s = StructuralMatrices::new(g);
    let q = g.coord_count();
    let id = SparseInt::identity(q);
    let zero = SparseInt::zeros(q, q);
    let mut bad = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            bad.push(what);
        }
    };

    check(q == 2 * g.edge_count(), "Σ m_i = 2m".into());
    check(s.laplacian == &s.incidence * &s.incidence.transpose(), "L = BBᵀ".into());
    check(s.laplacian == sum_or_zero(&s.link_laplacians, q, q), "L = Σ L_k".into());
    check(s.permutation == &id - &s.laplacian, "P = I − L".into());
    check(s.permutation.is_permutation() && s.permutation.is_symmetric(), "P symmetric permutation".into());
    check(&s.permutation * &s.permutation == id, "P² = I".into());
    check(sum_or_zero(&s.link_selectors, q, q) == id, "Σ A_k = I".into());
    check(sum_or_zero(&s.agent_selectors, q, q) == id, "Σ C_i = I".into());

    for (k, (lk, ak)) in s.link_laplacians.iter().zip(&s.link_selectors).enumerate() {
        let col = s.incidence.column(k);
        check(*lk == SparseInt::outer(&col, &col), format!("L_{k} = b_k b_kᵀ"));
        check(ak.is_diagonal(), format!("A_{k} diagonal"));
        check(&(ak * lk) == lk && &(lk * ak) == lk, format!("A_k L_k = L_k = L_k A_k, k={k}"));
        for (l, ll) in s.link_laplacians.iter().enumerate() {
            if l != k {
                check(ak * ll == zero && ll * ak == zero, format!("A_k L_l = 0 = L_l A_k, k={k} l={l}"));
            }
        }
    }
    for i in 0..g.agent_count() {
        let ks = &s.index_sets.incident[i];
        let k_i = sum_or_zero(ks.iter().map(|&k| &s.link_laplacians[k]), q, q);
        check(s.neighborhood_laplacians[i] == k_i, format!("K_i = Σ L_k, i={i}"));
        for &k in ks {
            let ak = &s.link_selectors[k];
            check(&k_i * ak == s.link_laplacians[k] && ak * &k_i == s.link_laplacians[k], format!("K_i A_k = L_k = A_k K_i, i={i} k={k}"));
        }
        let sum_a = sum_or_zero(ks.iter().map(|&k| &s.link_selectors[k]), q, q);
        check(&sum_a * &k_i == k_i && &k_i * &sum_a == k_i, format!("(Σ A_k) K_i = K_i = K_i (Σ A_k), i={i}"));
        let ci = &s.agent_selectors[i];
        check(ci.is_diagonal() && ci.nnz() == g.degree(i), format!("C_i diagonal with m_i ones, i={i}"));
    }
    bad
}

fn random_square(r: &mut impl Rng, n: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0))
}

/// Entrywise errors of Σ_i Σ_{k∈K_i} ½F_k = Σ_k F_k and
/// Σ_i Σ_{k∈K_i} Σ_{ℓ∈K_i∖k} E_k F_ℓ = Σ_k Σ_{ℓ∈L_k} E_k F_ℓ.
pub fn edge_sum_errors(g: &NetworkGraph, r: &mut impl Rng) -> (f64, f64) {
    use nalgebra::DMatrix;
    let m = g.edge_count();
    let e: Vec<DMatrix<f64>> = (0..m).map(|_| random_square(r, 3)).collect();
    let f: Vec<DMatrix<f64>> = (0..m).map(|_| random_square(r, 3)).collect();
    let sets = netiqc::graph::edge_index_sets(g);

    let mut lhs = DMatrix::zeros(3, 3);
    for ks in &sets.incident {
        for &k in ks {
            lhs += &f[k] * 0.5;
        }
    }
    let rhs = f.iter().fold(DMatrix::zeros(3, 3), |acc, x| acc + x);
    let first = (lhs - rhs).amax();

    let mut lhs = DMatrix::zeros(3, 3);
    for ks in &sets.incident {
        for &k in ks {
            for &l in ks.iter().filter(|&&l| l != k) {
                lhs += &e[k] * &f[l];
            }
        }
    }
    let mut rhs = DMatrix::zeros(3, 3);
    for k in 0..m {
        for &l in &sets.coupled[k] {
            rhs += &e[k] * &f[l];
        }
    }
    (first, (lhs - rhs).amax())
}

/// Entrywise error of L Γ L = Σ_k L_k Γ L_k + Σ_k Σ_{ℓ∈L_k} L_k Γ L_ℓ for a
/// random block-diagonal Γ.
pub fn laplacian_sandwich_error(g: &NetworkGraph, r: &mut impl Rng) -> f64 {
    use nalgebra::DMatrix;
    let s = netiqc::graph::StructuralMatrices::new(g);
    let q = g.coord_count();
    let mut gamma = DMatrix::zeros(q, q);
    for i in 0..g.agent_count() {
        for a in g.block(i) {
            for b in g.block(i) {
                gamma[(a, b)] = r.random_range(-1.0..1.0);
            }
        }
    }
    let l = s.laplacian.to_dense();
    let lk: Vec<DMatrix<f64>> = s.link_laplacians.iter().map(|x| x.to_dense()).collect();
    let lhs = &l * &gamma * &l;
    let mut rhs = DMatrix::zeros(q, q);
    for k in 0..g.edge_count() {
        rhs += &lk[k] * &gamma * &lk[k];
        for &m in &s.index_sets.coupled[k] {
            rhs += &lk[k] * &gamma * &lk[m];
        }
    }
    (lhs - rhs).amax()
}
