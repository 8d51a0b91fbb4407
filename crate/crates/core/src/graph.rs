//! Network graph, sub-system graph and the structural matrices built on them.
//!
//! Agents are indexed `0..n`, edges `0..m` in the order they were supplied.
//! Every agent `i` owns a contiguous block of `m_i` "sub-system" coordinates,
//! one per incident link, ordered by ascending neighbour index. The total
//! coordinate count is `2m`.
//!
//! The sub-system graph pairs coordinate `(i, j)` with coordinate `(j, i)` for
//! every edge `{i, j}`; its adjacency matrix is the routing permutation `P` and
//! its Laplacian is `L = B Bᵀ = Σ_k L_k`, so `P = I − L`.

use std::ops::Range;

use thiserror::Error;

use crate::sparse::{sum_or_zero, SparseInt};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("a network needs at least two agents, got {0}")]
    TooFewAgents(usize),
    #[error("self-loop at agent {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("agent {0} has no neighbours")]
    IsolatedAgent(usize),
    #[error("index {index} out of range (limit {limit})")]
    BadIndex { index: usize, limit: usize },
    #[error("agent {neighbor} is not a neighbour of agent {agent}")]
    NotNeighbor { agent: usize, neighbor: usize },
}

/// Simple undirected graph of agents with the fixed enumerations used
/// throughout: edges in input order, neighbours ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    n: usize,
    /// Endpoints of each edge, stored as `(min, max)`.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    offsets: Vec<usize>,
}

impl NetworkGraph {
    /// Builds and validates a network. Pairs are 0-based and unordered.
    pub fn new(n: usize, edge_list: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edge_list {
            for x in [a, b] {
                if x >= n {
                    return Err(GraphError::BadIndex { index: x, limit: n });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if edges.contains(&e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
            edges.push(e);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for (i, nb) in neighbors.iter_mut().enumerate() {
            if nb.is_empty() {
                return Err(GraphError::IsolatedAgent(i));
            }
            nb.sort_unstable();
        }
        let mut offsets = Vec::with_capacity(n);
        let mut acc = 0;
        for nb in &neighbors {
            offsets.push(acc);
            acc += nb.len();
        }
        Ok(Self {
            n,
            edges,
            neighbors,
            offsets,
        })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges)
    }

    /// Cycle on `n >= 3` agents.
    pub fn ring(n: usize) -> Result<Self, GraphError> {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((n - 1, 0));
        Self::new(n, &edges)
    }

    /// Star centred at agent 0.
    pub fn star(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::new(n, &edges)
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `2m`, the number of sub-system coordinates.
    pub fn coord_count(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> Result<(usize, usize), GraphError> {
        self.edges.get(k).copied().ok_or(GraphError::BadIndex {
            index: k,
            limit: self.edges.len(),
        })
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Coordinates owned by agent `i`.
    pub fn block(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i] + self.degree(i)
    }

    /// Agent owning a coordinate.
    pub fn owner(&self, coord: usize) -> usize {
        // offsets are non-decreasing and every block is non-empty
        match self.offsets.binary_search(&coord) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    fn check_agent(&self, i: usize) -> Result<(), GraphError> {
        if i < self.n {
            Ok(())
        } else {
            Err(GraphError::BadIndex { index: i, limit: self.n })
        }
    }

    /// Global coordinate of the link slot of agent `i` that faces neighbour `j`.
    pub fn coordinate_of(&self, i: usize, j: usize) -> Result<usize, GraphError> {
        self.check_agent(i)?;
        let pos = self.neighbors[i]
            .binary_search(&j)
            .map_err(|_| GraphError::NotNeighbor { agent: i, neighbor: j })?;
        Ok(self.offsets[i] + pos)
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let e = (i.min(j), i.max(j));
        self.edges.iter().position(|&x| x == e)
    }

    /// The two sub-system coordinates joined by edge `k`, as
    /// `(coordinate_of(i, j), coordinate_of(j, i))` with `i < j`.
    pub fn edge_coords(&self, k: usize) -> (usize, usize) {
        let (i, j) = self.edges[k];
        // both lookups succeed by construction
        (
            self.coordinate_of(i, j).expect("edge endpoint"),
            self.coordinate_of(j, i).expect("edge endpoint"),
        )
    }

    /// `𝒦_i`: indexes of the edges incident to agent `i`, ascending.
    pub fn incident_edges(&self, i: usize) -> Vec<usize> {
        let mut ks: Vec<usize> = (0..self.edges.len())
            .filter(|&k| self.edges[k].0 == i || self.edges[k].1 == i)
            .collect();
        ks.sort_unstable();
        ks
    }

    /// `ℒ_k`: edges sharing an endpoint with edge `k`, excluding `k`.
    pub fn coupled_edges(&self, k: usize) -> Vec<usize> {
        let (i, j) = self.edges[k];
        let mut out: Vec<usize> = self
            .incident_edges(i)
            .into_iter()
            .chain(self.incident_edges(j))
            .filter(|&l| l != k)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `𝒱_k`: the two endpoint agents of edge `k`.
    pub fn edge_endpoints(&self, k: usize) -> [usize; 2] {
        let (i, j) = self.edges[k];
        [i, j]
    }

    /// `V_i = {i} ∪ N_i`, ascending.
    pub fn active_agents(&self, i: usize) -> Vec<usize> {
        let mut v = self.neighbors[i].clone();
        v.push(i);
        v.sort_unstable();
        v
    }

    /// Union of the coordinate blocks of the given agents, ascending.
    pub fn coords_of_agents(&self, agents: &[usize]) -> Vec<usize> {
        let mut sorted = agents.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        sorted.into_iter().flat_map(|a| self.block(a)).collect()
    }

    /// `T_i`: the coordinates of every agent in `V_i`.
    pub fn active_coords(&self, i: usize) -> Vec<usize> {
        self.coords_of_agents(&self.active_agents(i))
    }
}

/// All index sets of the graph in one pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeIndexSets {
    pub incident: Vec<Vec<usize>>,
    pub coupled: Vec<Vec<usize>>,
    pub endpoints: Vec<[usize; 2]>,
}

pub fn edge_index_sets(g: &NetworkGraph) -> EdgeIndexSets {
    EdgeIndexSets {
        incident: (0..g.agent_count()).map(|i| g.incident_edges(i)).collect(),
        coupled: (0..g.edge_count()).map(|k| g.coupled_edges(k)).collect(),
        endpoints: (0..g.edge_count()).map(|k| g.edge_endpoints(k)).collect(),
    }
}

/// Incidence matrix `B` (2m × m). Column `k` has `+1` at the coordinate of the
/// smaller-indexed endpoint and `−1` at the other one.
pub fn incidence_matrix(g: &NetworkGraph) -> SparseInt {
    let mut b = SparseInt::zeros(g.coord_count(), g.edge_count());
    for k in 0..g.edge_count() {
        let (r, s) = g.edge_coords(k);
        b.set(r, k, 1);
        b.set(s, k, -1);
    }
    b
}

pub fn link_laplacian(g: &NetworkGraph, k: usize) -> Result<SparseInt, GraphError> {
    g.edge(k)?;
    let (r, s) = g.edge_coords(k);
    let mut l = SparseInt::zeros(g.coord_count(), g.coord_count());
    l.set(r, r, 1);
    l.set(s, s, 1);
    l.set(r, s, -1);
    l.set(s, r, -1);
    Ok(l)
}

pub fn subsystem_laplacian(g: &NetworkGraph) -> SparseInt {
    let b = incidence_matrix(g);
    &b * &b.transpose()
}

/// Adjacency matrix of the sub-system graph: swaps the two coordinates of
/// every edge.
pub fn routing_permutation(g: &NetworkGraph) -> SparseInt {
    let mut p = SparseInt::zeros(g.coord_count(), g.coord_count());
    for k in 0..g.edge_count() {
        let (r, s) = g.edge_coords(k);
        p.set(r, s, 1);
        p.set(s, r, 1);
    }
    p
}

/// `A_k = diag(B_(·,k))²`.
pub fn link_selector(g: &NetworkGraph, k: usize) -> Result<SparseInt, GraphError> {
    g.edge(k)?;
    let (r, s) = g.edge_coords(k);
    let mut a = SparseInt::zeros(g.coord_count(), g.coord_count());
    a.set(r, r, 1);
    a.set(s, s, 1);
    Ok(a)
}

/// `C_i = diag(T_(·,i))`: ones on agent `i`'s block.
pub fn agent_selector(g: &NetworkGraph, i: usize) -> Result<SparseInt, GraphError> {
    g.check_agent(i)?;
    let mut c = SparseInt::zeros(g.coord_count(), g.coord_count());
    for r in g.block(i) {
        c.set(r, r, 1);
    }
    Ok(c)
}

/// `K_i = Σ_{k ∈ 𝒦_i} L_k`.
pub fn neighborhood_laplacian(g: &NetworkGraph, i: usize) -> Result<SparseInt, GraphError> {
    g.check_agent(i)?;
    let parts: Vec<SparseInt> = g
        .incident_edges(i)
        .into_iter()
        .map(|k| link_laplacian(g, k))
        .collect::<Result<_, _>>()?;
    Ok(sum_or_zero(&parts, g.coord_count(), g.coord_count()))
}

/// `T = ⊕ 1_{m_i×1}` (2m × n).
pub fn fan_out(g: &NetworkGraph) -> SparseInt {
    let mut t = SparseInt::zeros(g.coord_count(), g.agent_count());
    for i in 0..g.agent_count() {
        for r in g.block(i) {
            t.set(r, i, 1);
        }
    }
    t
}

/// Every structural operator of a graph, computed once.
#[derive(Debug, Clone)]
pub struct StructuralMatrices {
    pub incidence: SparseInt,
    pub laplacian: SparseInt,
    pub link_laplacians: Vec<SparseInt>,
    pub permutation: SparseInt,
    pub link_selectors: Vec<SparseInt>,
    pub agent_selectors: Vec<SparseInt>,
    pub neighborhood_laplacians: Vec<SparseInt>,
    pub fan_out: SparseInt,
    pub index_sets: EdgeIndexSets,
}

impl StructuralMatrices {
    pub fn new(g: &NetworkGraph) -> Self {
        let ks = 0..g.edge_count();
        let is = 0..g.agent_count();
        // indexes are in range, so the fallible builders cannot fail here
        Self {
            incidence: incidence_matrix(g),
            laplacian: subsystem_laplacian(g),
            link_laplacians: ks.clone().map(|k| link_laplacian(g, k).unwrap()).collect(),
            permutation: routing_permutation(g),
            link_selectors: ks.map(|k| link_selector(g, k).unwrap()).collect(),
            agent_selectors: is.clone().map(|i| agent_selector(g, i).unwrap()).collect(),
            neighborhood_laplacians: is.map(|i| neighborhood_laplacian(g, i).unwrap()).collect(),
            fan_out: fan_out(g),
            index_sets: edge_index_sets(g),
        }
    }
}
