//! Graphs, random-walk stationary laws and the spaces particles move on.

use std::collections::{BTreeSet, VecDeque};

use num_rational::Ratio;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// A simple undirected graph stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a simple graph. Self-loops, duplicate edges and out-of-range
    /// endpoints are rejected; connectivity is checked separately.
    pub fn from_edges(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if vertices == 0 {
            return config("graph must have at least one vertex");
        }
        let mut adjacency = vec![BTreeSet::new(); vertices];
        for &(a, b) in edges {
            if a >= vertices || b >= vertices {
                return config(format!("edge ({a}, {b}) references a vertex outside 0..{vertices}"));
            }
            if a == b {
                return config(format!("self-loop at vertex {a}"));
            }
            if !adjacency[a].insert(b) || !adjacency[b].insert(a) {
                return config(format!("duplicate edge ({a}, {b})"));
            }
        }
        Ok(Graph { adjacency: adjacency.into_iter().map(|s| s.into_iter().collect()).collect() })
    }

    /// The `m × m` torus. For `m ∈ {1, 2}` coinciding neighbours collapse to
    /// a single edge and self-moves disappear.
    pub fn torus(m: usize) -> Result<Self> {
        if m == 0 {
            return config("torus side m must be at least 1");
        }
        let mut adjacency = vec![BTreeSet::new(); m * m];
        for v in 0..m * m {
            for dir in 0..4 {
                let u = torus_step(m, v, dir);
                if u != v {
                    adjacency[v].insert(u);
                }
            }
        }
        Ok(Graph { adjacency: adjacency.into_iter().map(|s| s.into_iter().collect()).collect() })
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, ns) in self.adjacency.iter().enumerate() {
            out.extend(ns.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == n
    }
}

/// `π(x) = deg(x) / (2|E|)`, exact. A single isolated vertex gets mass 1.
pub fn stationary_distribution(g: &Graph) -> Result<Vec<Ratio<u64>>> {
    if !g.is_connected() {
        return config("graph is not connected; the random walk has no unique invariant law");
    }
    let n = g.vertex_count();
    if n == 1 {
        return Ok(vec![Ratio::from_integer(1)]);
    }
    let twice_edges = 2 * g.edge_count() as u64;
    Ok((0..n).map(|v| Ratio::new(g.degree(v) as u64, twice_edges)).collect())
}

/// Probability that two independent stationary walkers share a site.
pub fn collision_mass(g: &Graph) -> Result<Ratio<u64>> {
    let pi = stationary_distribution(g)?;
    Ok(pi.iter().fold(Ratio::zero(), |acc, p| acc + p * p))
}

pub(crate) fn torus_step(m: usize, v: usize, dir: usize) -> usize {
    let (x, y) = (v % m, v / m);
    let (x, y) = match dir {
        0 => ((x + 1) % m, y),
        1 => ((x + m - 1) % m, y),
        2 => (x, (y + 1) % m),
        3 => (x, (y + m - 1) % m),
        _ => unreachable!("torus has four directions"),
    };
    x + m * y
}

/// Where particles live and how a single move is drawn.
///
/// The torus keeps the four-direction kernel (each direction with probability
/// 1/4, directions may coincide when `m ≤ 2`); a general graph uses the
/// uniform-neighbour kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Space {
    Torus { m: usize, graph: Graph },
    Graph(Graph),
}

impl Space {
    pub fn torus(m: usize) -> Result<Self> {
        Ok(Space::Torus { m, graph: Graph::torus(m)? })
    }

    pub fn graph(g: Graph) -> Result<Self> {
        if !g.is_connected() {
            return config("graph is not connected");
        }
        Ok(Space::Graph(g))
    }

    pub fn underlying(&self) -> &Graph {
        match self {
            Space::Torus { graph, .. } | Space::Graph(graph) => graph,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.underlying().vertex_count()
    }

    pub fn stationary(&self) -> Result<Vec<Ratio<u64>>> {
        match self {
            // the directional kernel is doubly stochastic for every m
            Space::Torus { m, .. } => Ok(vec![Ratio::new(1, (m * m) as u64); m * m]),
            Space::Graph(g) => stationary_distribution(g),
        }
    }

    pub fn collision_mass(&self) -> Result<f64> {
        let pi = self.stationary()?;
        let c = pi.iter().fold(Ratio::<u64>::zero(), |acc, p| acc + p * p);
        Ok(*c.numer() as f64 / *c.denom() as f64)
    }

    /// Number of equally likely move choices from `v`.
    pub fn move_choices(&self, v: usize) -> usize {
        match self {
            Space::Torus { .. } => 4,
            Space::Graph(g) => g.degree(v),
        }
    }

    /// Destination of move choice `k < move_choices(v)`.
    pub fn move_target(&self, v: usize, k: usize) -> usize {
        match self {
            Space::Torus { m, .. } => torus_step(*m, v, k),
            Space::Graph(g) => g.neighbors(v)[k],
        }
    }

    pub fn random_move<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> usize {
        let k = self.move_choices(v);
        if k == 0 {
            return v;
        }
        self.move_target(v, rng.random_range(0..k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_f64(r: &Ratio<u64>) -> f64 {
        *r.numer() as f64 / *r.denom() as f64
    }

    /// Exact `π K = π` with `K` the uniform-neighbour kernel.
    fn is_invariant(g: &Graph, pi: &[Ratio<u64>]) -> bool {
        let n = g.vertex_count();
        let mut next = vec![Ratio::<u64>::zero(); n];
        for v in 0..n {
            let d = g.degree(v) as u64;
            for &u in g.neighbors(v) {
                next[u] += pi[v] / Ratio::from_integer(d);
            }
        }
        next == pi
    }

    #[test]
    fn torus_sizes() {
        let g3 = Graph::torus(3).unwrap();
        assert_eq!(g3.vertex_count(), 9);
        assert!((0..9).all(|v| g3.degree(v) == 4));
        let g1 = Graph::torus(1).unwrap();
        assert_eq!(g1.vertex_count(), 1);
        assert_eq!(g1.degree(0), 0);
        // m = 2: +1 and -1 coincide, so each vertex has one horizontal and one vertical neighbour
        let g2 = Graph::torus(2).unwrap();
        assert_eq!(g2.vertex_count(), 4);
        assert_eq!(g2.neighbors(0), &[1, 2]);
        assert_eq!(g2.neighbors(3), &[1, 2]);
        assert!(Graph::torus(0).is_err());
    }

    #[test]
    fn degenerate_torus_keeps_directional_moves() {
        let s = Space::torus(1).unwrap();
        assert_eq!(s.move_choices(0), 4);
        assert!((0..4).all(|k| s.move_target(0, k) == 0));
        let s2 = Space::torus(2).unwrap();
        assert_eq!(s2.move_target(0, 0), s2.move_target(0, 1));
    }

    #[test]
    fn stationary_examples() {
        let torus = Graph::torus(3).unwrap();
        let pi = stationary_distribution(&torus).unwrap();
        assert!(pi.iter().all(|p| *p == Ratio::new(1, 9)));

        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let pi = stationary_distribution(&path).unwrap();
        assert_eq!(pi, vec![Ratio::new(1, 4), Ratio::new(1, 2), Ratio::new(1, 4)]);

        let k4 = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert!(stationary_distribution(&k4).unwrap().iter().all(|p| *p == Ratio::new(1, 4)));
    }

    #[test]
    fn path_stationary_matches_power_iteration() {
        // lazy kernel to avoid the bipartite oscillation
        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let mut p = vec![1.0, 0.0, 0.0];
        for _ in 0..200 {
            let mut next = vec![0.0; 3];
            for v in 0..3 {
                next[v] += 0.5 * p[v];
                let d = path.degree(v) as f64;
                for &u in path.neighbors(v) {
                    next[u] += 0.5 * p[v] / d;
                }
            }
            p = next;
        }
        let pi = stationary_distribution(&path).unwrap();
        for (a, b) in p.iter().zip(&pi) {
            assert!((a - to_f64(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_is_invariant() {
        let graphs = [
            Graph::torus(3).unwrap(),
            Graph::torus(4).unwrap(),
            Graph::torus(2).unwrap(),
            Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap(),
            Graph::from_edges(5, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]).unwrap(),
        ];
        for g in &graphs {
            let pi = stationary_distribution(g).unwrap();
            assert!(is_invariant(g, &pi));
            assert_eq!(pi.iter().fold(Ratio::<u64>::zero(), |a, p| a + p), Ratio::from_integer(1));
        }
    }

    #[test]
    fn collision_mass_examples() {
        assert_eq!(collision_mass(&Graph::torus(4).unwrap()).unwrap(), Ratio::new(1, 16));
        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(collision_mass(&path).unwrap(), Ratio::new(3, 8));
        assert_eq!(collision_mass(&Graph::torus(1).unwrap()).unwrap(), Ratio::from_integer(1));
        for m in 1..6 {
            let s = Space::torus(m).unwrap();
            assert!((s.collision_mass().unwrap() - 1.0 / (m * m) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn disconnected_and_malformed_graphs() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(stationary_distribution(&g).is_err());
        assert!(Space::graph(g).is_err());
        assert!(Graph::from_edges(2, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(2, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(2, &[(0, 2)]).is_err());
    }
}
