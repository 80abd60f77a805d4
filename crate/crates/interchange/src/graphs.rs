//! The four parametric graph families whose edge weights define the
//! transposition-selection distribution of the lazy interchange process.
//!
//! Vertices are labelled `1..=n` for the first clique and `n+1..=n+m` for the
//! second, with the dumbbell bridge joining `n` and `n+1`. Weights follow the
//! convention that the total edge mass equals the edge count of the original
//! dumbbell, `C(n,2) + C(m,2) + 1`, so a weight-`w` edge is attempted with
//! probability `w / mass` per step and applied with probability `w / (2 mass)`.
//!
//! Graphs are immutable and parametric: edges are never materialized, which
//! keeps construction O(1) and lets `n` reach millions. [`WeightedGraph::sample_edge`]
//! draws from the exact weighted distribution using integer ranges only.

use crate::rational::{choose2, ratio, Ratio};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Dumbbell,
    Symmetrized,
    HalfSymmetrized,
    Complete,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("clique sizes must satisfy 1 <= m <= n, got n={n}, m={m}")]
    BadCliqueSizes { n: u64, m: u64 },
    #[error("complete graph needs n >= 2, got n={n}")]
    CompleteTooSmall { n: u64 },
}

/// Serializable parametric description; the families need nothing more.
#[derive(Copy, Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub n: u64,
    pub m: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct WeightedGraph {
    kind: GraphKind,
    n: u64,
    m: u64,
}

impl WeightedGraph {
    pub fn dumbbell(n: u64, m: u64) -> Result<Self, GraphError> {
        Self::two_clique(GraphKind::Dumbbell, n, m)
    }

    pub fn symmetrized(n: u64, m: u64) -> Result<Self, GraphError> {
        Self::two_clique(GraphKind::Symmetrized, n, m)
    }

    pub fn half_symmetrized(n: u64, m: u64) -> Result<Self, GraphError> {
        Self::two_clique(GraphKind::HalfSymmetrized, n, m)
    }

    pub fn complete(n: u64) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::CompleteTooSmall { n });
        }
        Ok(WeightedGraph { kind: GraphKind::Complete, n, m: 0 })
    }

    fn two_clique(kind: GraphKind, n: u64, m: u64) -> Result<Self, GraphError> {
        if m < 1 || m > n {
            return Err(GraphError::BadCliqueSizes { n, m });
        }
        Ok(WeightedGraph { kind, n, m })
    }

    pub fn from_spec(spec: GraphSpec) -> Result<Self, GraphError> {
        match spec.kind {
            GraphKind::Complete => Self::complete(spec.n),
            GraphKind::Dumbbell => Self::dumbbell(spec.n, spec.m),
            GraphKind::Symmetrized => Self::symmetrized(spec.n, spec.m),
            GraphKind::HalfSymmetrized => Self::half_symmetrized(spec.n, spec.m),
        }
    }

    pub fn spec(&self) -> GraphSpec {
        GraphSpec { kind: self.kind, n: self.n, m: self.m }
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Total vertex count `N = n + m`.
    pub fn num_vertices(&self) -> u64 {
        self.n + self.m
    }

    /// Normalizing mass `|E|`: `C(n,2) + C(m,2) + 1` for the two-clique kinds
    /// (an integer regardless of how the bridge mass is split), `C(n,2)` for
    /// the complete graph.
    pub fn edge_mass_total(&self) -> u128 {
        match self.kind {
            GraphKind::Complete => choose2(self.n),
            _ => choose2(self.n) + choose2(self.m) + 1,
        }
    }

    pub fn edge_count(&self) -> u128 {
        let cliques = choose2(self.n) + choose2(self.m);
        match self.kind {
            GraphKind::Complete => choose2(self.n),
            GraphKind::Dumbbell => cliques + 1,
            GraphKind::Symmetrized => cliques + self.n as u128 * self.m as u128,
            GraphKind::HalfSymmetrized => cliques + self.n as u128,
        }
    }

    /// Clique membership: 1 for `1..=n`, 2 for `n+1..=n+m`.
    pub fn clique_of(&self, v: u64) -> u8 {
        debug_assert!(v >= 1 && v <= self.num_vertices());
        if v <= self.n {
            1
        } else {
            2
        }
    }

    /// Weight of the edge `{u, v}` if present.
    pub fn edge_weight(&self, u: u64, v: u64) -> Option<Ratio> {
        if u == v || u < 1 || v < 1 || u > self.num_vertices() || v > self.num_vertices() {
            return None;
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        let same_clique = self.clique_of(a) == self.clique_of(b);
        if same_clique {
            return Some(ratio(1, 1));
        }
        match self.kind {
            GraphKind::Complete => unreachable!("complete graph has one clique"),
            GraphKind::Dumbbell => {
                (a == self.n && b == self.n + 1).then(|| ratio(1, 1))
            }
            GraphKind::Symmetrized => {
                Some(ratio(1, self.n as u128 * self.m as u128))
            }
            GraphKind::HalfSymmetrized => (b == self.n + 1).then(|| ratio(1, self.n as u128)),
        }
    }

    /// Weighted degree of `v` in units of edge mass.
    pub fn weighted_degree(&self, v: u64) -> Ratio {
        assert!(v >= 1 && v <= self.num_vertices(), "vertex {v} out of range");
        let n = self.n as u128;
        let m = self.m as u128;
        match self.kind {
            GraphKind::Complete => ratio(n - 1, 1),
            GraphKind::Dumbbell => {
                if v == self.n || v == self.n + 1 {
                    let clique = if v == self.n { n } else { m };
                    ratio(clique - 1 + 1, 1)
                } else if v <= self.n {
                    ratio(n - 1, 1)
                } else {
                    ratio(m - 1, 1)
                }
            }
            GraphKind::Symmetrized => {
                if v <= self.n {
                    // n-1 clique edges plus m thin bridges of weight 1/(nm)
                    ratio((n - 1) * n + 1, n)
                } else {
                    ratio((m - 1) * m + 1, m)
                }
            }
            GraphKind::HalfSymmetrized => {
                if v <= self.n {
                    ratio((n - 1) * n + 1, n)
                } else if v == self.n + 1 {
                    // m-1 clique edges plus n bridges of weight 1/n
                    ratio(m, 1)
                } else {
                    ratio(m - 1, 1)
                }
            }
        }
    }

    /// Total weight of edges leaving the vertex set `w` (`|∂_E W|` weighted).
    pub fn boundary_weight(&self, w: &[u64]) -> Ratio {
        let mut total = ratio(0, 1);
        for &u in w {
            total += self.weighted_degree(u);
        }
        let mut internal = ratio(0, 1);
        for (i, &u) in w.iter().enumerate() {
            for &v in &w[i + 1..] {
                if let Some(wt) = self.edge_weight(u, v) {
                    internal += wt;
                }
            }
        }
        total - internal * ratio(2, 1)
    }

    /// Draws an edge with probability `weight / edge_mass_total`, using exact
    /// integer arithmetic: a uniform draw from `0..mass` picks the block
    /// (clique 1, clique 2, bridge), then a uniform pair within the block.
    #[inline]
    pub fn sample_edge<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        let mass = self.edge_mass_total() as u64;
        let x = rng.gen_range(0..mass);
        self.edge_from_mass_index(rng, x)
    }

    /// Fused lazy-step draw: with probability ½ reports a lazy step (`None`),
    /// otherwise an edge from the exact weighted law, using a single uniform
    /// draw from `0..2*mass` for the block/coin decision.
    #[inline]
    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(u64, u64)> {
        let mass = self.edge_mass_total() as u64;
        let x = rng.gen_range(0..2 * mass);
        if x >= mass {
            return None;
        }
        Some(self.edge_from_mass_index(rng, x))
    }

    #[inline]
    fn edge_from_mass_index<R: Rng + ?Sized>(&self, rng: &mut R, x: u64) -> (u64, u64) {
        let c1 = choose2(self.n) as u64;
        if x < c1 {
            return uniform_pair(rng, 1, self.n);
        }
        if x < c1 + choose2(self.m) as u64 {
            return uniform_pair(rng, self.n + 1, self.m);
        }
        match self.kind {
            GraphKind::Complete => unreachable!("mass exhausted by the clique"),
            GraphKind::Dumbbell => (self.n, self.n + 1),
            GraphKind::Symmetrized => (
                rng.gen_range(1..=self.n),
                rng.gen_range(self.n + 1..=self.n + self.m),
            ),
            GraphKind::HalfSymmetrized => (rng.gen_range(1..=self.n), self.n + 1),
        }
    }

    /// Does `{u, v}` cross between the cliques?
    pub fn is_bridge(&self, u: u64, v: u64) -> bool {
        self.clique_of(u) != self.clique_of(v)
    }

    /// Materialize the edge list; intended for small graphs and tests.
    pub fn enumerate_edges(&self) -> Vec<(u64, u64, Ratio)> {
        assert!(self.edge_count() <= 10_000_000, "edge list too large to materialize");
        let mut edges = Vec::new();
        for u in 1..=self.n {
            for v in u + 1..=self.n {
                edges.push((u, v, ratio(1, 1)));
            }
        }
        for u in self.n + 1..=self.n + self.m {
            for v in u + 1..=self.n + self.m {
                edges.push((u, v, ratio(1, 1)));
            }
        }
        match self.kind {
            GraphKind::Complete => {}
            GraphKind::Dumbbell => edges.push((self.n, self.n + 1, ratio(1, 1))),
            GraphKind::Symmetrized => {
                let w = ratio(1, self.n as u128 * self.m as u128);
                for u in 1..=self.n {
                    for v in self.n + 1..=self.n + self.m {
                        edges.push((u, v, w));
                    }
                }
            }
            GraphKind::HalfSymmetrized => {
                let w = ratio(1, self.n as u128);
                for u in 1..=self.n {
                    edges.push((u, self.n + 1, w));
                }
            }
        }
        edges
    }
}

/// Uniform unordered pair of distinct vertices from `base..base+count`.
#[inline]
fn uniform_pair<R: Rng + ?Sized>(rng: &mut R, base: u64, count: u64) -> (u64, u64) {
    debug_assert!(count >= 2);
    let i = rng.gen_range(0..count);
    let mut j = rng.gen_range(0..count - 1);
    if j >= i {
        j += 1;
    }
    (base + i.min(j), base + i.max(j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio_to_f64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn dumbbell_shapes() {
        let g = WeightedGraph::dumbbell(3, 2).unwrap();
        assert_eq!(g.edge_count(), 5);
        assert_eq!(g.edge_mass_total(), 5);

        let g = WeightedGraph::dumbbell(2, 1).unwrap();
        let edges: Vec<_> = g.enumerate_edges().iter().map(|&(u, v, _)| (u, v)).collect();
        assert_eq!(edges, vec![(1, 2), (2, 3)]);
        assert_eq!(g.edge_mass_total(), 2);

        let g = WeightedGraph::dumbbell(4, 4).unwrap();
        assert_eq!(g.edge_count(), 13);
        assert_eq!(g.edge_mass_total(), 13);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(WeightedGraph::dumbbell(2, 3).is_err());
        assert!(WeightedGraph::dumbbell(3, 0).is_err());
        assert!(WeightedGraph::symmetrized(1, 2).is_err());
        assert!(WeightedGraph::half_symmetrized(0, 0).is_err());
        assert!(WeightedGraph::complete(1).is_err());
        assert!(WeightedGraph::complete(0).is_err());
    }

    #[test]
    fn symmetrized_shapes() {
        let g = WeightedGraph::symmetrized(3, 2).unwrap();
        assert_eq!(g.edge_count(), 3 + 1 + 6);
        assert_eq!(g.edge_mass_total(), 5);
        // each thin bridge applied per step with probability w/(2 mass) = 1/60
        let w = g.edge_weight(1, 4).unwrap();
        assert_eq!(w, ratio(1, 6));
        assert_eq!(w / ratio(2 * 5, 1), ratio(1, 60));

        let g = WeightedGraph::symmetrized(2, 2).unwrap();
        let bridges: Vec<_> = g
            .enumerate_edges()
            .into_iter()
            .filter(|&(u, v, _)| g.is_bridge(u, v))
            .collect();
        assert_eq!(bridges.len(), 4);
        let total: Ratio = bridges.iter().map(|(_, _, w)| *w).sum();
        assert_eq!(total, ratio(1, 1));
    }

    #[test]
    fn half_symmetrized_shapes() {
        let g = WeightedGraph::half_symmetrized(3, 2).unwrap();
        let bridges: Vec<_> = g
            .enumerate_edges()
            .into_iter()
            .filter(|&(u, v, _)| g.is_bridge(u, v))
            .collect();
        assert_eq!(
            bridges.iter().map(|&(u, v, _)| (u, v)).collect::<Vec<_>>(),
            vec![(1, 4), (2, 4), (3, 4)]
        );
        for (_, _, w) in &bridges {
            assert_eq!(*w, ratio(1, 3));
        }
        let total: Ratio = bridges.iter().map(|(_, _, w)| *w).sum();
        assert_eq!(total, ratio(1, 1));

        // star-plus-clique shape for m = 1
        let g = WeightedGraph::half_symmetrized(5, 1).unwrap();
        assert_eq!(g.edge_mass_total(), 10 + 0 + 1);
    }

    #[test]
    fn complete_shapes() {
        assert_eq!(WeightedGraph::complete(4).unwrap().edge_count(), 6);
        assert_eq!(WeightedGraph::complete(2).unwrap().edge_count(), 1);
        assert_eq!(WeightedGraph::complete(5).unwrap().edge_mass_total(), 10);
    }

    #[test]
    fn weight_conservation() {
        for g in [
            WeightedGraph::dumbbell(6, 3).unwrap(),
            WeightedGraph::symmetrized(6, 3).unwrap(),
            WeightedGraph::half_symmetrized(6, 3).unwrap(),
            WeightedGraph::complete(7).unwrap(),
        ] {
            let total: Ratio = g.enumerate_edges().iter().map(|(_, _, w)| *w).sum();
            assert_eq!(total, ratio(g.edge_mass_total(), 1), "{:?}", g.kind());
            // handshake: sum of weighted degrees = 2 * mass
            let degrees: Ratio = (1..=g.num_vertices()).map(|v| g.weighted_degree(v)).sum();
            assert_eq!(degrees, ratio(2 * g.edge_mass_total(), 1), "{:?}", g.kind());
        }
    }

    #[test]
    fn symmetrized_agrees_with_dumbbell_on_cliques() {
        let d = WeightedGraph::dumbbell(5, 3).unwrap();
        let s = WeightedGraph::symmetrized(5, 3).unwrap();
        for (u, v, w) in d.enumerate_edges() {
            if !d.is_bridge(u, v) {
                assert_eq!(s.edge_weight(u, v), Some(w));
            }
        }
    }

    #[test]
    fn complete_two_vertices_always_same_edge() {
        let g = WeightedGraph::complete(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(g.sample_edge(&mut rng), (1, 2));
        }
    }

    fn empirical_frequencies(g: &WeightedGraph, samples: u64, seed: u64) -> HashMap<(u64, u64), u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = HashMap::new();
        for _ in 0..samples {
            let e = g.sample_edge(&mut rng);
            *counts.entry(e).or_insert(0) += 1;
        }
        counts
    }

    #[test]
    fn dumbbell_bridge_frequency_binomial_ci() {
        let g = WeightedGraph::dumbbell(3, 2).unwrap();
        let samples = 1_000_000u64;
        let counts = empirical_frequencies(&g, samples, 42);
        let bridge = counts[&(3, 4)] as f64;
        let p = 0.2;
        let sigma = (p * (1.0 - p) * samples as f64).sqrt();
        assert!((bridge - p * samples as f64).abs() < 4.0 * sigma, "bridge count {bridge}");
    }

    #[test]
    fn symmetrized_thin_bridge_total_frequency() {
        let g = WeightedGraph::symmetrized(3, 2).unwrap();
        let samples = 1_000_000u64;
        let counts = empirical_frequencies(&g, samples, 43);
        let bridge_total: u64 = counts
            .iter()
            .filter(|((u, v), _)| g.is_bridge(*u, *v))
            .map(|(_, c)| *c)
            .sum();
        let p = 0.2;
        let sigma = (p * (1.0 - p) * samples as f64).sqrt();
        assert!((bridge_total as f64 - p * samples as f64).abs() < 4.0 * sigma);
    }

    #[test]
    fn chi_square_goodness_of_fit() {
        // all 10 edges of the symmetrized (3,2) graph at significance 1e-3
        let g = WeightedGraph::symmetrized(3, 2).unwrap();
        let samples = 200_000u64;
        let counts = empirical_frequencies(&g, samples, 44);
        let mut chi2 = 0.0;
        for (u, v, w) in g.enumerate_edges() {
            let expected = ratio_to_f64(&(w / ratio(g.edge_mass_total(), 1))) * samples as f64;
            let observed = *counts.get(&(u, v)).unwrap_or(&0) as f64;
            chi2 += (observed - expected).powi(2) / expected;
        }
        // chi-square 0.999 quantile, 9 degrees of freedom
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }

    #[test]
    fn spec_roundtrip() {
        let g = WeightedGraph::half_symmetrized(10, 4).unwrap();
        let json = serde_json::to_string(&g.spec()).unwrap();
        let spec: GraphSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(WeightedGraph::from_spec(spec).unwrap(), g);
    }

    #[test]
    fn degrees_match_enumerated_edges() {
        for g in [
            WeightedGraph::dumbbell(5, 2).unwrap(),
            WeightedGraph::symmetrized(5, 2).unwrap(),
            WeightedGraph::half_symmetrized(5, 2).unwrap(),
        ] {
            for v in 1..=g.num_vertices() {
                let from_edges: Ratio = g
                    .enumerate_edges()
                    .iter()
                    .filter(|&&(a, b, _)| a == v || b == v)
                    .map(|(_, _, w)| *w)
                    .sum();
                assert_eq!(from_edges, g.weighted_degree(v), "kind {:?} v {v}", g.kind());
            }
        }
    }

    #[test]
    fn boundary_weight_small_clique() {
        // small clique of dumbbell(50, 3): only the bridge leaves it
        let g = WeightedGraph::dumbbell(50, 3).unwrap();
        let w: Vec<u64> = vec![51, 52, 53];
        assert_eq!(g.boundary_weight(&w), ratio(1, 1));
        // bridge vertex n+1 of a dumbbell has weighted degree m
        assert_eq!(g.weighted_degree(51), ratio(3, 1));
    }
}
