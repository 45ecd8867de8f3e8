#![allow(dead_code)]

use std::collections::BTreeMap;

use optcast_core::oracle::{lp_solve, LinearProgram, LpStatus, Sense};
use optcast_core::{
    edge_capacitated, gen_random_dag, node_capacitated, CapacityModel, EdgeId, NodeId, OverlayGraph, RateAllocation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dag(rng: &mut ChaCha8Rng, max_nodes: usize) -> OverlayGraph {
    let n = rng.gen_range(2..=max_nodes);
    let p = rng.gen_range(0.2..0.8);
    gen_random_dag(n, p, rng.gen()).unwrap()
}

pub fn random_edge_caps(rng: &mut ChaCha8Rng, g: &OverlayGraph) -> CapacityModel {
    let caps: BTreeMap<EdgeId, f64> = g.edge_ids().map(|e| (e, rng.gen_range(0.1..=10.0))).collect();
    edge_capacitated(g, &caps).unwrap()
}

pub fn random_node_caps(rng: &mut ChaCha8Rng, g: &OverlayGraph) -> CapacityModel {
    let caps: BTreeMap<NodeId, f64> =
        g.nodes().filter(|&v| g.out_degree(v) > 0).map(|v| (v, rng.gen_range(0.1..=10.0))).collect();
    node_capacitated(g, &caps).unwrap()
}

pub fn random_rates(rng: &mut ChaCha8Rng, g: &OverlayGraph) -> RateAllocation {
    RateAllocation::new((0..g.edge_count()).map(|_| rng.gen_range(0.0..10.0)).collect()).unwrap()
}

/// Edges routed over 1-2 random shared links, with random pressures.
pub struct SspInstance {
    pub model: CapacityModel,
    pub pressure: Vec<f64>,
}

pub fn random_ssp(rng: &mut ChaCha8Rng) -> SspInstance {
    let edges = rng.gen_range(2..=6);
    let links = rng.gen_range(1..=4);
    let mut rows = vec![Vec::new(); links];
    for e in 0..edges {
        let first = rng.gen_range(0..links);
        rows[first].push(EdgeId(e));
        if links > 1 && rng.gen_bool(0.4) {
            let second = (first + rng.gen_range(1..links)) % links;
            rows[second].push(EdgeId(e));
        }
    }
    rows.retain(|r| !r.is_empty());
    let bounds = rows.iter().map(|_| rng.gen_range(0.5..5.0)).collect();
    let model = CapacityModel::general(edges, rows, bounds).unwrap();
    let pressure = (0..edges).map(|_| rng.gen_range(-1.0..5.0)).collect();
    SspInstance { model, pressure }
}

/// `max sum_e P_e r_e` subject to `A r <= C`, `r >= 0`.
pub fn ssp_optimum(inst: &SspInstance) -> f64 {
    let m = &inst.model;
    let mut lp = LinearProgram::new(m.edge_count());
    for (j, &p) in inst.pressure.iter().enumerate() {
        lp.set_objective(j, p);
    }
    for k in 0..m.row_count() {
        let terms: Vec<(usize, f64)> = m.row(k).iter().map(|e| (e.0, 1.0)).collect();
        lp.add_sparse(&terms, Sense::Le, m.bound(k));
    }
    let s = lp_solve(&lp).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    s.objective
}
