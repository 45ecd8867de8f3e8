//! Capacity scheduling: choosing link rates that maximize `sum_e r_e P_e`
//! subject to `A r <= C` for the current pressures.

use super::{project_positive, InnerScheme, PressureField, StepParams};
use crate::capacity::{CapacityKind, CapacityModel, RateAllocation, RowLabel};
use crate::error::{Error, Result};
use crate::graph::OverlayGraph;

/// Upload capacity per node (`0.0` for nodes without outgoing edges), read
/// off a node-capacitated model.
pub fn node_caps(g: &OverlayGraph, m: &CapacityModel) -> Result<Vec<f64>> {
    if m.kind() != CapacityKind::NodeCap {
        return Err(Error::WrongModelKind { expected: "node-capacitated" });
    }
    let mut caps = vec![0.0; g.node_count()];
    for k in 0..m.row_count() {
        if let RowLabel::Node(v) = m.label(k) {
            caps[v.0] = m.bound(k);
        }
    }
    Ok(caps)
}

/// Each node sends at full capacity to the single out-neighbor with the
/// largest positive pressure (lowest id on ties) and nothing elsewhere.
/// `caps` is indexed by node id.
pub fn schedule_node_capacitated(p: &PressureField, g: &OverlayGraph, caps: &[f64]) -> RateAllocation {
    let mut rates = RateAllocation::zeros(g.edge_count());
    for v in g.nodes() {
        // out_edges are sorted by destination, so the first strict maximum wins ties.
        let mut best = None;
        let mut best_pressure = 0.0;
        for &e in g.out_edges(v) {
            if p.on_edge(e) > best_pressure {
                best = Some(e);
                best_pressure = p.on_edge(e);
            }
        }
        if let Some(e) = best {
            rates[e] = caps[v.0];
        }
    }
    rates
}

/// Exact schedule for an edge-capacitated model: `r_e = C_e` when `P_e > 0`.
pub fn schedule_closed_form_edges(p: &PressureField, m: &CapacityModel) -> Result<RateAllocation> {
    if m.kind() != CapacityKind::EdgeCap {
        return Err(Error::WrongModelKind { expected: "edge-capacitated" });
    }
    let mut rates = RateAllocation::zeros(m.edge_count());
    for k in 0..m.row_count() {
        let e = m.row(k)[0];
        if p.on_edge(e) > 0.0 {
            rates[e] = m.bound(k);
        }
    }
    Ok(rates)
}

/// Link prices `lambda_l`, one per capacity row.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkDuals(Vec<f64>);

impl LinkDuals {
    pub fn zeros(m: &CapacityModel) -> Self {
        LinkDuals(vec![0.0; m.row_count()])
    }

    pub fn from_rows(values: Vec<f64>) -> Self {
        LinkDuals(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn euler(
    p: &PressureField,
    rates: &RateAllocation,
    duals: &LinkDuals,
    // Gradients are evaluated at (grad_rates, grad_duals); projection and the
    // base point are (rates, duals).
    grad_rates: &RateAllocation,
    grad_duals: &LinkDuals,
    m: &CapacityModel,
    params: &StepParams,
) -> (RateAllocation, LinkDuals) {
    let mut next_rates = rates.clone();
    for (e, r) in rates.iter() {
        let price: f64 = m.rows_of_edge(e).iter().map(|&k| grad_duals.0[k]).sum();
        let step = params.dt * params.beta * project_positive(p.on_edge(e) - price, r);
        next_rates[e] = (r + step).max(0.0);
    }
    let mut next_duals = duals.clone();
    for k in 0..m.row_count() {
        let load: f64 = m.row(k).iter().map(|&e| grad_rates[e]).sum();
        let lambda = duals.0[k];
        let step = params.dt * params.sigma * project_positive(load - m.bound(k), lambda);
        next_duals.0[k] = (lambda + step).max(0.0);
    }
    (next_rates, next_duals)
}

/// One step of the link primal-dual dynamics
/// `r' = beta [P - A^T lambda]^+_r`, `lambda' = sigma [A r - C]^+_lambda`.
pub fn schedule_general_step(
    p: &PressureField,
    rates: &RateAllocation,
    duals: &LinkDuals,
    m: &CapacityModel,
    params: &StepParams,
) -> Result<(RateAllocation, LinkDuals)> {
    if rates.len() != m.edge_count() || p.as_slice().len() != m.edge_count() {
        return Err(Error::DimensionMismatch { expected: m.edge_count(), actual: rates.len() });
    }
    if duals.len() != m.row_count() {
        return Err(Error::DimensionMismatch { expected: m.row_count(), actual: duals.len() });
    }
    Ok(match params.inner_scheme {
        InnerScheme::Euler => euler(p, rates, duals, rates, duals, m, params),
        InnerScheme::Extragradient => {
            let (pred_rates, pred_duals) = euler(p, rates, duals, rates, duals, m, params);
            euler(p, rates, duals, &pred_rates, &pred_duals, m, params)
        }
    })
}
