//! Interaction graphs: open chains, two-leg ladders and seeded random graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Chain,
    Ladder,
    RandomGraph,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub size: usize,
    pub seed: Option<u64>,
    /// Vertex pairs; repeated pairs are parallel edges.
    pub edges: Vec<(usize, usize)>,
}

impl LatticeSpec {
    pub fn chain(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidLattice(format!("chain needs at least 2 sites, got {size}")));
        }
        let edges = (0..size - 1).map(|i| (i, i + 1)).collect();
        Ok(Self { kind: LatticeKind::Chain, size, seed: None, edges })
    }

    /// Two open legs joined by rungs. Leg A holds sites `0..ceil(n/2)`, leg B the rest;
    /// site `i` of leg B sits across from site `i` of leg A.
    pub fn ladder(size: usize) -> Result<Self> {
        if size < 4 {
            return Err(Error::InvalidLattice(format!("ladder needs at least 4 sites, got {size}")));
        }
        let a = size.div_ceil(2);
        let b = size - a;
        let mut edges = Vec::new();
        for i in 0..a - 1 {
            edges.push((i, i + 1));
        }
        for i in 0..b - 1 {
            edges.push((a + i, a + i + 1));
        }
        for i in 0..b {
            edges.push((i, a + i));
        }
        Ok(Self { kind: LatticeKind::Ladder, size, seed: None, edges })
    }

    /// Each vertex draws two partners uniformly from the other vertices.
    pub fn random_graph(size: usize, seed: u64) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidLattice(format!("random graph needs at least 2 vertices, got {size}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::with_capacity(2 * size);
        for v in 0..size {
            for _ in 0..2 {
                let mut u = rng.random_range(0..size - 1);
                if u >= v {
                    u += 1;
                }
                edges.push((v, u));
            }
        }
        Ok(Self { kind: LatticeKind::RandomGraph, size, seed: Some(seed), edges })
    }

    pub fn build(kind: LatticeKind, size: usize, seed: Option<u64>) -> Result<Self> {
        match kind {
            LatticeKind::Chain => Self::chain(size),
            LatticeKind::Ladder => Self::ladder(size),
            LatticeKind::RandomGraph => Self::random_graph(size, seed.unwrap_or(0)),
        }
    }

    /// Degree of each vertex counting parallel edges.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.size];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.is_empty() {
            return Err(Error::InvalidLattice("empty edge list".into()));
        }
        for &(a, b) in &self.edges {
            if a == b || a >= self.size || b >= self.size {
                return Err(Error::InvalidLattice(format!("bad edge ({a}, {b}) on {} sites", self.size)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chain_and_ladder_edge_counts() {
        assert_eq!(LatticeSpec::chain(10).unwrap().edges.len(), 9);
        assert_eq!(LatticeSpec::ladder(10).unwrap().edges.len(), 13);
        assert_eq!(LatticeSpec::ladder(4).unwrap().edges.len(), 4);
        assert_eq!(LatticeSpec::ladder(5).unwrap().edges.len(), 5);
        assert!(LatticeSpec::chain(1).is_err());
    }

    #[test]
    fn two_vertex_random_graph() {
        let g = LatticeSpec::random_graph(2, 7).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (0, 1), (1, 0), (1, 0)]);
        assert!(LatticeSpec::random_graph(1, 0).is_err());
    }

    #[test]
    fn mean_degree_over_seeds() {
        let mut total = 0usize;
        let mut per_vertex_var = 0.0;
        let seeds = 500;
        for s in 0..seeds {
            let g = LatticeSpec::random_graph(10, s).unwrap();
            assert_eq!(g.edges.len(), 20);
            let deg = g.degrees();
            total += deg.iter().sum::<usize>();
            per_vertex_var += deg.iter().map(|&d| (d as f64 - 4.0).powi(2)).sum::<f64>();
        }
        let mean = total as f64 / (10 * seeds) as f64;
        assert!((mean - 4.0).abs() < 0.1);
        assert!(per_vertex_var > 0.0);
    }

    proptest! {
        #[test]
        fn random_graph_is_deterministic_and_loop_free(n in 2usize..16, seed in any::<u64>()) {
            let a = LatticeSpec::random_graph(n, seed).unwrap();
            let b = LatticeSpec::random_graph(n, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.edges.len(), 2 * n);
            prop_assert!(a.validate().is_ok());
        }
    }
}
