use std::collections::BTreeSet;

use super::cut::min_cut;
use super::lp::{lp_solve, LinearProgram, LpStatus, Sense};
use crate::capacity::{CapacityModel, RateAllocation};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, OverlayGraph};

/// Above this many per-receiver flow variables the cut oracle switches from
/// the joint flow LP to cut generation.
pub const FLOW_LP_MAX_VARIABLES: usize = 600;

#[derive(Clone, Debug, PartialEq)]
pub struct BroadcastOptimum {
    /// Maximum broadcast rate `B`.
    pub rate: f64,
    /// A capacity-feasible allocation achieving it.
    pub rates: RateAllocation,
}

fn check(g: &OverlayGraph, m: &CapacityModel) -> Result<()> {
    if m.edge_count() != g.edge_count() {
        return Err(Error::DimensionMismatch { expected: g.edge_count(), actual: m.edge_count() });
    }
    if g.node_count() < 2 {
        return Err(Error::MalformedProgram("graph has no receivers".into()));
    }
    Ok(())
}

fn add_capacity_rows(lp: &mut LinearProgram, m: &CapacityModel, rate_var: impl Fn(EdgeId) -> usize) {
    for k in 0..m.row_count() {
        let terms: Vec<(usize, f64)> = m.row(k).iter().map(|&e| (rate_var(e), 1.0)).collect();
        lp.add_sparse(&terms, Sense::Le, m.bound(k));
    }
}

fn optimal(lp: &LinearProgram) -> Result<Vec<f64>> {
    let solution = lp_solve(lp)?;
    match solution.status {
        LpStatus::Optimal => Ok(solution.x),
        status => Err(Error::NumericalFailure(format!("broadcast program reported {status:?}"))),
    }
}

fn rates_from(x: &[f64], edges: usize) -> Result<RateAllocation> {
    RateAllocation::new(x[..edges].iter().map(|&r| r.max(0.0)).collect())
}

/// `B = max_r min_v mincut(s, v; r)` subject to `A r <= C`.
///
/// Small instances solve one joint LP with a flow `f^v` per receiver bounded
/// by `r`; larger ones generate violated cut constraints from `min_cut`
/// until none remain. Both are exact.
pub fn max_broadcast_rate_cut(g: &OverlayGraph, m: &CapacityModel) -> Result<BroadcastOptimum> {
    check(g, m)?;
    if (g.node_count() - 1) * g.edge_count() <= FLOW_LP_MAX_VARIABLES {
        max_broadcast_rate_flow_lp(g, m)
    } else {
        max_broadcast_rate_cut_generation(g, m)
    }
}

pub fn max_broadcast_rate_flow_lp(g: &OverlayGraph, m: &CapacityModel) -> Result<BroadcastOptimum> {
    check(g, m)?;
    let edges = g.edge_count();
    let receivers: Vec<_> = g.receivers().collect();
    // Variables: r (edges), t, then f^v for each receiver.
    let t = edges;
    let flow = |k: usize, e: EdgeId| edges + 1 + k * edges + e.0;
    let mut lp = LinearProgram::new(edges + 1 + receivers.len() * edges);
    lp.set_objective(t, 1.0);
    add_capacity_rows(&mut lp, m, |e| e.0);
    for (k, &v) in receivers.iter().enumerate() {
        for e in g.edge_ids() {
            lp.add_sparse(&[(flow(k, e), 1.0), (e.0, -1.0)], Sense::Le, 0.0);
        }
        for u in g.receivers() {
            let mut terms: Vec<(usize, f64)> = g.in_edges(u).iter().map(|&e| (flow(k, e), 1.0)).collect();
            terms.extend(g.out_edges(u).iter().map(|&e| (flow(k, e), -1.0)));
            if u == v {
                terms.push((t, -1.0));
                lp.add_sparse(&terms, Sense::Ge, 0.0);
            } else {
                lp.add_sparse(&terms, Sense::Eq, 0.0);
            }
        }
    }
    let x = optimal(&lp)?;
    Ok(BroadcastOptimum { rate: x[t], rates: rates_from(&x, edges)? })
}

pub fn max_broadcast_rate_cut_generation(g: &OverlayGraph, m: &CapacityModel) -> Result<BroadcastOptimum> {
    check(g, m)?;
    let edges = g.edge_count();
    let t = edges;
    let mut lp = LinearProgram::new(edges + 1);
    lp.set_objective(t, 1.0);
    add_capacity_rows(&mut lp, m, |e| e.0);
    let mut cuts: BTreeSet<Vec<EdgeId>> = BTreeSet::new();
    let mut add_cut = |lp: &mut LinearProgram, crossing: Vec<EdgeId>| {
        if cuts.insert(crossing.clone()) {
            let mut terms: Vec<(usize, f64)> = crossing.iter().map(|e| (e.0, 1.0)).collect();
            terms.push((t, -1.0));
            lp.add_sparse(&terms, Sense::Ge, 0.0);
            true
        } else {
            false
        }
    };
    for v in g.receivers() {
        add_cut(&mut lp, g.in_edges(v).to_vec());
    }
    let limit = 20 * g.node_count() + 100;
    for _ in 0..limit {
        let x = optimal(&lp)?;
        let rates = rates_from(&x, edges)?;
        let target = x[t];
        let mut added = false;
        for v in g.receivers() {
            let cut = min_cut(g, &rates, v)?;
            if cut.value < target - 1e-9 * target.max(1.0) {
                let mut in_source_side = vec![false; g.node_count()];
                for u in &cut.source_side {
                    in_source_side[u.0] = true;
                }
                let crossing: Vec<EdgeId> = g
                    .edge_ids()
                    .filter(|&e| in_source_side[g.edge(e).from.0] && !in_source_side[g.edge(e).to.0])
                    .collect();
                added |= add_cut(&mut lp, crossing);
            }
        }
        if !added {
            return Ok(BroadcastOptimum { rate: target, rates });
        }
    }
    Err(Error::NumericalFailure(format!("cut generation did not settle within {limit} rounds")))
}

/// `max z` subject to `inflow(v) >= inflow(w) + z [w = s]` for every
/// receiver `v` and `w in in(v)`, and `A r <= C`.
pub fn max_broadcast_rate_neighbor(g: &OverlayGraph, m: &CapacityModel) -> Result<BroadcastOptimum> {
    check(g, m)?;
    let edges = g.edge_count();
    let z = edges;
    let mut lp = LinearProgram::new(edges + 1);
    lp.set_objective(z, 1.0);
    add_capacity_rows(&mut lp, m, |e| e.0);
    for v in g.receivers() {
        for w in g.in_neighbors(v) {
            let mut terms: Vec<(usize, f64)> = g.in_edges(v).iter().map(|e| (e.0, 1.0)).collect();
            terms.extend(g.in_edges(w).iter().map(|e| (e.0, -1.0)));
            if w == g.source() {
                terms.push((z, -1.0));
            }
            lp.add_sparse(&terms, Sense::Ge, 0.0);
        }
    }
    let x = optimal(&lp)?;
    Ok(BroadcastOptimum { rate: x[z], rates: rates_from(&x, edges)? })
}
