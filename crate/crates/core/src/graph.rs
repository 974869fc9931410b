//! Communication graphs between agents.
//!
//! Graphs are undirected, unweighted, simple and connected. Agent ids are
//! dense `0..n_agents`; edges are stored canonicalized as `(min, max)` in
//! lexicographic order, and neighbor lists are ascending.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::SwarmState;
use crate::linalg::{symmetric_eigenvalues, SquareMatrix};
use crate::{Error, Result};

/// Maximum number of Erdős–Rényi draws before giving up on connectivity.
pub const MAX_RANDOM_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    Path { n_agents: usize },
    Ring { n_agents: usize },
    Complete { n_agents: usize },
    Star { n_agents: usize },
    EdgeList { n_agents: usize, edges: Vec<[usize; 2]> },
    Random { n_agents: usize, p: f64, seed: u64 },
}

impl TopologySpec {
    pub fn n_agents(&self) -> usize {
        match *self {
            TopologySpec::Path { n_agents }
            | TopologySpec::Ring { n_agents }
            | TopologySpec::Complete { n_agents }
            | TopologySpec::Star { n_agents }
            | TopologySpec::EdgeList { n_agents, .. }
            | TopologySpec::Random { n_agents, .. } => n_agents,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    n_agents: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl GraphTopology {
    /// Builds a graph from an arbitrary edge list, canonicalizing and
    /// rejecting self-loops, out-of-range ids and disconnected results.
    pub fn from_edges(n_agents: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::InvalidSpec("n_agents must be at least 1".into()));
        }
        let mut canon = BTreeSet::new();
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidSpec(format!("self-loop at agent {a}")));
            }
            if a >= n_agents || b >= n_agents {
                return Err(Error::InvalidSpec(format!(
                    "edge ({a}, {b}) out of range for {n_agents} agents"
                )));
            }
            canon.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<(usize, usize)> = canon.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n_agents];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let g = Self {
            n_agents,
            edges,
            neighbors,
        };
        if let Some(isolated) = g.first_unreachable() {
            return Err(Error::DisconnectedGraph { isolated });
        }
        Ok(g)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn degree(&self, agent: usize) -> usize {
        self.neighbors[agent].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_agents).map(|n| self.degree(n)).max().unwrap_or(0)
    }

    fn first_unreachable(&self) -> Option<usize> {
        let mut seen = vec![false; self.n_agents];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &u in &self.neighbors[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    /// Block form of `(L ⊗ I_d) x`: block `n` is `Σ_{l ∈ nbrs(n)} (x_n − x_l)`.
    pub fn consensus_term(&self, state: &SwarmState) -> Result<Vec<f64>> {
        if state.n_agents() != self.n_agents {
            return Err(Error::DimensionMismatch {
                expected: self.n_agents,
                got: state.n_agents(),
            });
        }
        let d = state.dim();
        let mut out = vec![0.0; self.n_agents * d];
        for (n, block) in out.chunks_mut(d).enumerate() {
            accumulate_disagreement(
                state.block(n),
                self.neighbors[n].iter().map(|&l| state.block(l)),
                block,
            );
        }
        Ok(out)
    }
}

/// Writes `Σ_l (own − x_l)` into `out`, summing neighbors in iteration order.
/// Callers iterate neighbors in ascending id so every execution path produces
/// identical bits.
pub fn accumulate_disagreement<'a>(
    own: &[f64],
    neighbors: impl Iterator<Item = &'a [f64]>,
    out: &mut [f64],
) {
    out.fill(0.0);
    for nb in neighbors {
        for ((o, &x), &y) in out.iter_mut().zip(own).zip(nb) {
            *o += x - y;
        }
    }
}

pub fn build_graph(spec: &TopologySpec) -> Result<GraphTopology> {
    let n = spec.n_agents();
    if n == 0 {
        return Err(Error::InvalidSpec("n_agents must be at least 1".into()));
    }
    match spec {
        TopologySpec::Path { .. } => {
            let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            GraphTopology::from_edges(n, &edges)
        }
        TopologySpec::Ring { .. } => {
            let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            if n > 2 {
                edges.push((n - 1, 0));
            }
            GraphTopology::from_edges(n, &edges)
        }
        TopologySpec::Complete { .. } => {
            let edges: Vec<_> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            GraphTopology::from_edges(n, &edges)
        }
        TopologySpec::Star { .. } => {
            let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
            GraphTopology::from_edges(n, &edges)
        }
        TopologySpec::EdgeList { edges, .. } => {
            let edges: Vec<_> = edges.iter().map(|e| (e[0], e[1])).collect();
            GraphTopology::from_edges(n, &edges)
        }
        &TopologySpec::Random { p, seed, .. } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidSpec(format!("edge probability p = {p} outside (0, 1]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..MAX_RANDOM_RETRIES {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if rng.random::<f64>() < p {
                            edges.push((i, j));
                        }
                    }
                }
                match GraphTopology::from_edges(n, &edges) {
                    Ok(g) => return Ok(g),
                    Err(Error::DisconnectedGraph { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::ConnectivityRetriesExhausted {
                n_agents: n,
                p,
                retries: MAX_RANDOM_RETRIES,
            })
        }
    }
}

/// Laplacian `L = D − A` with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianView {
    pub matrix: SquareMatrix,
    /// Eigenvalues in ascending order.
    pub spectrum: Vec<f64>,
    /// Smallest strictly positive eigenvalue; `None` for a single agent.
    pub lambda_min_pos: Option<f64>,
    pub zero_multiplicity: usize,
}

/// Eigenvalues below this (relative to the spectral radius) count as zero.
const ZERO_EIGEN_TOL: f64 = 1e-9;

pub fn laplacian(g: &GraphTopology) -> LaplacianView {
    let n = g.n_agents();
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        m.set(i, i, g.degree(i) as f64);
        for &j in g.neighbors(i) {
            m.set(i, j, -1.0);
        }
    }
    let spectrum = symmetric_eigenvalues(&m);
    let scale = spectrum.last().copied().unwrap_or(0.0).abs().max(1.0);
    let zero_multiplicity = spectrum
        .iter()
        .filter(|v| v.abs() <= ZERO_EIGEN_TOL * scale)
        .count();
    let lambda_min_pos = spectrum
        .iter()
        .copied()
        .find(|v| *v > ZERO_EIGEN_TOL * scale);
    LaplacianView {
        matrix: m,
        spectrum,
        lambda_min_pos,
        zero_multiplicity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(n: usize, d: usize, x: Vec<f64>) -> SwarmState {
        SwarmState::new(1, n, d, x).unwrap()
    }

    #[test]
    fn path_three_edges() {
        let g = build_graph(&TopologySpec::Path { n_agents: 3 }).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn complete_two_is_single_edge() {
        let g = build_graph(&TopologySpec::Complete { n_agents: 2 }).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn edge_list_with_isolated_node_is_rejected() {
        let err = build_graph(&TopologySpec::EdgeList {
            n_agents: 3,
            edges: vec![[0, 1]],
        })
        .unwrap_err();
        assert!(matches!(err, Error::DisconnectedGraph { isolated: 2 }));
    }

    #[test]
    fn edge_lists_are_canonicalized() {
        let g = GraphTopology::from_edges(3, &[(2, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(
            build_graph(&TopologySpec::Path { n_agents: 0 }),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            build_graph(&TopologySpec::Random { n_agents: 4, p: 0.0, seed: 1 }),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            build_graph(&TopologySpec::Random { n_agents: 4, p: 1.5, seed: 1 }),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            GraphTopology::from_edges(2, &[(1, 1)]),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn random_graph_low_p_gives_up() {
        let err = build_graph(&TopologySpec::Random { n_agents: 30, p: 1e-4, seed: 7 }).unwrap_err();
        assert!(matches!(err, Error::ConnectivityRetriesExhausted { .. }));
    }

    #[test]
    fn random_graph_is_reproducible() {
        let spec = TopologySpec::Random { n_agents: 8, p: 0.4, seed: 11 };
        assert_eq!(build_graph(&spec).unwrap(), build_graph(&spec).unwrap());
    }

    #[test]
    fn path_three_laplacian() {
        let g = build_graph(&TopologySpec::Path { n_agents: 3 }).unwrap();
        let l = laplacian(&g);
        assert_eq!(
            l.matrix.rows(),
            vec![
                vec![1.0, -1.0, 0.0],
                vec![-1.0, 2.0, -1.0],
                vec![0.0, -1.0, 1.0]
            ]
        );
        // lambda (lambda - 1) (lambda - 3)
        let lam = l.lambda_min_pos.unwrap();
        assert!((lam - 1.0).abs() <= 1e-10);
        assert!((l.spectrum[2] - 3.0).abs() <= 1e-10);
        assert_eq!(l.zero_multiplicity, 1);
    }

    #[test]
    fn ring_four_fiedler_value() {
        let g = build_graph(&TopologySpec::Ring { n_agents: 4 }).unwrap();
        let l = laplacian(&g);
        let expect = [0.0, 2.0, 2.0, 4.0];
        for (a, b) in l.spectrum.iter().zip(expect) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
        assert!((l.lambda_min_pos.unwrap() - 2.0).abs() <= 2e-10);
    }

    #[test]
    fn single_agent_has_no_positive_eigenvalue() {
        let g = build_graph(&TopologySpec::Complete { n_agents: 1 }).unwrap();
        let l = laplacian(&g);
        assert_eq!(l.lambda_min_pos, None);
        assert_eq!(l.zero_multiplicity, 1);
    }

    #[test]
    fn consensus_term_examples() {
        let g = build_graph(&TopologySpec::Complete { n_agents: 2 }).unwrap();
        assert_eq!(g.consensus_term(&state(2, 1, vec![0.0, 2.0])).unwrap(), vec![-2.0, 2.0]);

        let g = build_graph(&TopologySpec::Path { n_agents: 3 }).unwrap();
        assert_eq!(
            g.consensus_term(&state(3, 1, vec![0.0, 1.0, 2.0])).unwrap(),
            vec![-1.0, 0.0, 1.0]
        );

        let g = build_graph(&TopologySpec::Complete { n_agents: 5 }).unwrap();
        let x: Vec<f64> = (0..5).flat_map(|_| [0.1, -3.7]).collect();
        assert!(g.consensus_term(&state(5, 2, x)).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn consensus_term_dimension_mismatch() {
        let g = build_graph(&TopologySpec::Path { n_agents: 3 }).unwrap();
        assert!(matches!(
            g.consensus_term(&state(2, 1, vec![0.0, 1.0])),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }
}
