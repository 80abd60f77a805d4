//! Property tests for the structural invariants: weight conservation and
//! sampler validity across the graph families, trajectory observable bounds,
//! stationary-law consistency, and the power inequality used by the moment
//! bounds.

use interchange::analytics::{l_stationary, power_inequality, HypGeom};
use interchange::dd::Dd;
use interchange::dynamics;
use interchange::lumped::bernoulli_laplace_chain;
use interchange::rational::{choose2, ratio, Ratio};
use interchange::{GraphKind, WeightedGraph};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn any_two_clique_graph() -> impl Strategy<Value = WeightedGraph> {
    (2u64..40, 1u64..40, 0usize..3).prop_map(|(n, extra_cap, kind)| {
        let m = 1 + extra_cap.min(n - 1);
        match kind {
            0 => WeightedGraph::dumbbell(n, m).unwrap(),
            1 => WeightedGraph::symmetrized(n, m).unwrap(),
            _ => WeightedGraph::half_symmetrized(n, m).unwrap(),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_conserve_and_degrees_handshake(g in any_two_clique_graph()) {
        let total: Ratio = g.enumerate_edges().iter().map(|(_, _, w)| *w).sum();
        prop_assert_eq!(total, ratio(g.edge_mass_total(), 1));
        let degrees: Ratio = (1..=g.num_vertices()).map(|v| g.weighted_degree(v)).sum();
        prop_assert_eq!(degrees, ratio(2 * g.edge_mass_total(), 1));
    }

    #[test]
    fn sampled_edges_exist_with_positive_weight(g in any_two_clique_graph(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let (u, v) = g.sample_edge(&mut rng);
            prop_assert!(u < v);
            let w = g.edge_weight(u, v);
            prop_assert!(w.is_some());
            prop_assert!(w.unwrap() > ratio(0, 1));
        }
    }

    #[test]
    fn trajectory_observables_stay_in_range(
        n in 3u64..20,
        m_off in 0u64..10,
        t in 1u64..3000,
        seed in 0u64..500,
    ) {
        let m = 1 + m_off.min(n - 1);
        let g = WeightedGraph::symmetrized(n, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = dynamics::run_trajectory(&g, t, 64, &mut rng);
        let mut last_purple = u64::MAX;
        for r in &rows {
            prop_assert!(r.l <= m);
            prop_assert!(r.fixed_points <= n);
            prop_assert!(r.purple_count <= last_purple);
            last_purple = r.purple_count;
        }
    }

    #[test]
    fn involution_restores_configuration(
        n in 2u64..15,
        m_off in 0u64..8,
        swaps in proptest::collection::vec((1u64..20, 1u64..20), 1..12),
    ) {
        let m = 1 + m_off.min(n - 1);
        let g = WeightedGraph::dumbbell(n, m).unwrap();
        let nv = g.num_vertices();
        let mut c = dynamics::Configuration::identity(nv);
        let mut obs = dynamics::InterchangeObservables::new(&g);
        let edges: Vec<(u64, u64)> = swaps
            .into_iter()
            .map(|(a, b)| {
                let u = 1 + a % nv;
                let mut v = 1 + b % nv;
                if v == u {
                    v = 1 + (v % nv);
                    if v == u { v = if u == nv { 1 } else { u + 1 }; }
                }
                (u, v)
            })
            .collect();
        for &(u, v) in &edges {
            dynamics::apply_swap(&mut c, &g, u, v, &mut obs);
        }
        for &(u, v) in edges.iter().rev() {
            dynamics::apply_swap(&mut c, &g, u, v, &mut obs);
        }
        prop_assert!(c.is_valid_bijection());
        for p in 1..=nv {
            prop_assert_eq!(c.position_of(p), p);
        }
    }

    #[test]
    fn hypgeom_sums_to_one_and_matches_chain(n in 2u64..60, m_off in 0u64..20) {
        let m = 1 + m_off.min(n - 1);
        let h = HypGeom::new(n + m, n, n).unwrap();
        let total: f64 = h.pmf.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let chain =
            bernoulli_laplace_chain(n, m, ratio(choose2(n) + choose2(m) + 1, 1)).unwrap();
        let pi = chain.pi();
        for (i, &p) in pi.iter().enumerate() {
            let k = n - m + i as u64;
            prop_assert!((p - h.prob(k)).abs() < 1e-12);
        }
        // and the L-law is the mirrored parametrization
        let l = l_stationary(n, m);
        let total_l: f64 = l.pmf.iter().sum();
        prop_assert!((total_l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_inequality_holds_on_domain(a in 0.0f64..1.0, frac in 0.0f64..1.0, t in 1.0f64..200.0) {
        let b = (1.0 - a) * frac;
        prop_assert!(power_inequality(a, b, t).unwrap());
    }

    #[test]
    fn dd_add_sub_roundtrip(x in -1e12f64..1e12, y in -1e-12f64..1e-12) {
        // adding a tiny value and subtracting it back is exact in dd
        let a = Dd::from_f64(x);
        let b = Dd::from_f64(y);
        let c = (a + b) - b;
        prop_assert!((c - a).abs().to_f64() <= 1e-18 * x.abs().max(1.0));
    }

    #[test]
    fn dd_mul_div_inverse(num in 1u64..1_000_000, den in 1u64..1_000_000) {
        let r = Dd::from_ratio_u128(num as u128, den as u128);
        let back = r * Dd::from_u64(den);
        prop_assert!((back - Dd::from_u64(num)).abs().to_f64() < 1e-18 * num as f64);
    }
}

#[test]
fn complete_graph_weight_conservation() {
    for n in 2u64..30 {
        let g = WeightedGraph::complete(n).unwrap();
        assert_eq!(g.kind(), GraphKind::Complete);
        let total: Ratio = g.enumerate_edges().iter().map(|(_, _, w)| *w).sum();
        assert_eq!(total, ratio(g.edge_mass_total(), 1));
    }
}
