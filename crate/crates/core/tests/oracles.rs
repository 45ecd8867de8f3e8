mod common;

use std::collections::BTreeMap;

use optcast_core::oracle::{
    brute_force_min_cut, lp_solve, max_broadcast_rate_cut, max_broadcast_rate_cut_generation,
    max_broadcast_rate_flow_lp, max_broadcast_rate_neighbor, min_cut, LinearProgram, LpStatus, Sense,
};
use optcast_core::{feasible, gen_random_dag, physical_link_model, EdgeId, NodeId, RateAllocation};
use proptest::prelude::*;

use common::{random_dag, random_edge_caps, random_node_caps, random_rates, rng};

fn min_receiver_cut(g: &optcast_core::OverlayGraph, r: &RateAllocation) -> f64 {
    g.receivers().map(|v| min_cut(g, r, v).unwrap().value).fold(f64::INFINITY, f64::min)
}

#[test]
fn optimal_rates_support_the_rate() {
    let mut rng = rng(21);
    for _ in 0..40 {
        let g = random_dag(&mut rng, 8);
        for m in [random_edge_caps(&mut rng, &g), random_node_caps(&mut rng, &g)] {
            for b in [max_broadcast_rate_cut(&g, &m).unwrap(), max_broadcast_rate_neighbor(&g, &m).unwrap()] {
                assert!(feasible(&b.rates, &m, 1e-7).unwrap().feasible);
                assert!(min_receiver_cut(&g, &b.rates) >= b.rate - 1e-6);
            }
        }
    }
}

#[test]
fn cut_routes_agree() {
    let mut rng = rng(22);
    for _ in 0..30 {
        let g = random_dag(&mut rng, 7);
        let m = random_node_caps(&mut rng, &g);
        let a = max_broadcast_rate_flow_lp(&g, &m).unwrap().rate;
        let b = max_broadcast_rate_cut_generation(&g, &m).unwrap().rate;
        assert!((a - b).abs() <= 1e-7 * a.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn shared_physical_link() {
    // Two overlay paths s->a->t and s->b->t whose first hops share link 0.
    let g = optcast_core::build_overlay(
        4,
        &[(NodeId(0), NodeId(1)), (NodeId(0), NodeId(2)), (NodeId(1), NodeId(3)), (NodeId(2), NodeId(3))],
        NodeId(0),
    )
    .unwrap();
    let routes =
        BTreeMap::from([(EdgeId(0), vec![0]), (EdgeId(1), vec![0]), (EdgeId(2), vec![1]), (EdgeId(3), vec![2])]);
    let caps = BTreeMap::from([(0, 3.0), (1, 5.0), (2, 5.0)]);
    let m = physical_link_model(&g, &routes, &caps).unwrap();
    // Receivers 1 and 2 each need B, sharing 3 units: B = 1.5.
    let cut = max_broadcast_rate_cut(&g, &m).unwrap().rate;
    let neighbor = max_broadcast_rate_neighbor(&g, &m).unwrap().rate;
    assert!((cut - 1.5).abs() < 1e-9 && (neighbor - 1.5).abs() < 1e-9);
}

#[test]
fn lp_solutions_satisfy_their_rows() {
    let mut rng = rng(23);
    use rand::Rng;
    for _ in 0..100 {
        let n = rng.gen_range(1..6);
        let mut lp = LinearProgram::new(n);
        for j in 0..n {
            lp.set_objective(j, rng.gen_range(-1.0..3.0));
        }
        for _ in 0..rng.gen_range(1..6) {
            let coeffs = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            lp.add_constraint(coeffs, Sense::Le, rng.gen_range(0.5..5.0));
        }
        // Keep the program bounded.
        lp.add_constraint(vec![1.0; n], Sense::Le, 10.0);
        if rng.gen_bool(0.5) {
            let coeffs = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            lp.add_constraint(coeffs, Sense::Ge, 0.1);
        }
        let s = lp_solve(&lp).unwrap();
        if s.status == LpStatus::Optimal {
            assert!(lp.max_violation(&s.x) <= 1e-7);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_cut_matches_enumeration(n in 2usize..=10, p in 0.1f64..0.9, seed in any::<u64>(), rate_seed in any::<u64>()) {
        let g = gen_random_dag(n, p, seed).unwrap();
        let mut rng = rng(rate_seed);
        let r = random_rates(&mut rng, &g);
        for v in g.receivers() {
            let fast = min_cut(&g, &r, v).unwrap();
            let slow = brute_force_min_cut(&g, &r, v).unwrap();
            prop_assert!((fast.value - slow.value).abs() <= 1e-9);
            let mut side = vec![false; n];
            for u in &fast.source_side {
                side[u.0] = true;
            }
            prop_assert_eq!(fast.value, optcast_core::oracle::cut_value(&g, &r, &side));
            prop_assert_eq!(fast.source_side.len() + fast.sink_side.len(), n);
        }
    }

    #[test]
    fn neighbor_and_cut_formulations_agree(n in 2usize..=7, p in 0.2f64..0.9, seed in any::<u64>(), cap_seed in any::<u64>()) {
        let g = gen_random_dag(n, p, seed).unwrap();
        let mut rng = rng(cap_seed);
        let m = random_edge_caps(&mut rng, &g);
        let cut = max_broadcast_rate_cut(&g, &m).unwrap().rate;
        let neighbor = max_broadcast_rate_neighbor(&g, &m).unwrap().rate;
        prop_assert!((cut - neighbor).abs() <= 1e-6 * cut);
    }
}
