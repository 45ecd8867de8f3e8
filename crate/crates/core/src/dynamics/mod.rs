//! The neighbor-only primal-dual broadcast algorithm as a discrete-time
//! dynamical system.
//!
//! Each slot computes back-pressures from the per-neighbor queues, schedules
//! link rates against the capacity model, and then moves the source rate and
//! the queues one step along their gradients. Every per-node quantity reads
//! only the queues and rates of that node's direct neighbors; the helpers in
//! this module are written per node to keep that visible.

mod fluid;
mod schedule;
mod utility;

pub use fluid::{run_fluid, Convergence, FluidConfig, InvariantTally, Trajectory, TrajectoryRow};
pub use schedule::{
    node_caps, schedule_closed_form_edges, schedule_general_step, schedule_node_capacitated, LinkDuals,
};
pub use utility::{LogUtility, Utility};

use crate::capacity::{CapacityModel, RateAllocation};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, NodeId, OverlayGraph};

/// `[b]^+_a`: `b` when `a > 0`, otherwise `max(0, b)`.
///
/// Used as the right-hand side of a projected ODE: a variable sitting at
/// zero may only move up.
pub fn project_positive(b: f64, a: f64) -> f64 {
    if a > 0.0 {
        b
    } else {
        b.max(0.0)
    }
}

/// Per-neighbor queues `theta[v,u]`, one for each overlay edge `(u, v)`,
/// held by the receiving endpoint `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct QueueState(Vec<f64>);

impl QueueState {
    pub fn zeros(g: &OverlayGraph) -> Self {
        QueueState(vec![0.0; g.edge_count()])
    }

    pub fn from_edges(values: Vec<f64>) -> Self {
        QueueState(values)
    }

    /// `theta[v,u]` for the edge `(u, v)`.
    pub fn on_edge(&self, e: EdgeId) -> f64 {
        self.0[e.0]
    }

    /// `theta[v,u]`; `None` when `u` is not an in-neighbor of `v`.
    pub fn get(&self, g: &OverlayGraph, v: NodeId, u: NodeId) -> Option<f64> {
        g.find_edge(u, v).map(|e| self.0[e.0])
    }

    pub fn set_on_edge(&mut self, e: EdgeId, value: f64) {
        self.0[e.0] = value;
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

    /// `sum_{w in in(u)} theta[u,w]`: how far `u` lags its suppliers.
    pub fn deficit(&self, g: &OverlayGraph, u: NodeId) -> f64 {
        g.in_edges(u).iter().map(|e| self.0[e.0]).sum()
    }

    /// `sum_{w in out(u)} theta[w,u]`: how far `u`'s downstream lags `u`.
    pub fn surplus(&self, g: &OverlayGraph, u: NodeId) -> f64 {
        g.out_edges(u).iter().map(|e| self.0[e.0]).sum()
    }

    /// Sum of the queues the source's children keep for it; prices the source rate.
    pub fn source_price(&self, g: &OverlayGraph) -> f64 {
        self.surplus(g, g.source())
    }
}

/// Back-pressure `P[v,u]` on every edge `(v, u)`. Depends only on the
/// receiving endpoint `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureField(Vec<f64>);

impl PressureField {
    pub fn from_edges(values: Vec<f64>) -> Self {
        PressureField(values)
    }

    pub fn on_edge(&self, e: EdgeId) -> f64 {
        self.0[e.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn back_pressure(theta: &QueueState, g: &OverlayGraph) -> Result<PressureField> {
    if theta.len() != g.edge_count() {
        return Err(Error::KeyMismatch);
    }
    let mut field = vec![0.0; g.edge_count()];
    for u in g.nodes() {
        let pressure = theta.deficit(g, u) - theta.surplus(g, u);
        for &e in g.in_edges(u) {
            field[e.0] = pressure;
        }
    }
    Ok(PressureField(field))
}

/// How the source rate follows `U'(z) - price`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceUpdate {
    /// Forward Euler. Unstable near small `z` when `U'` is steep.
    Explicit,
    /// Backward Euler in the utility term: `z' = z + dt*alpha*(U'(z') - price)`.
    Implicit,
}

/// Discretization of the inner rate/link-price dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerScheme {
    /// Forward Euler. Orbits the saddle point of a linear subproblem instead
    /// of settling on it.
    Euler,
    /// Predictor-corrector (extragradient) step with the same fixed points.
    Extragradient,
}

/// Which scheduler serves an edge-capacitated model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeScheduling {
    /// Identity-matrix instance of the link primal-dual dynamics.
    General,
    /// Exact per-edge solution: full capacity iff pressure is positive.
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepParams {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub sigma: f64,
    pub dt: f64,
    pub z_floor: f64,
    /// Upper clamp on `z`; `None` means ten times the largest capacity bound.
    pub z_cap: Option<f64>,
    /// Inner rate/price steps per slot for link-constrained models.
    pub inner_iters: usize,
    pub inner_scheme: InnerScheme,
    pub source_update: SourceUpdate,
    pub edge_scheduling: EdgeScheduling,
}

impl Default for StepParams {
    fn default() -> Self {
        StepParams {
            alpha: 0.05,
            gamma: 0.005,
            beta: 0.2,
            sigma: 0.2,
            dt: 1.0,
            z_floor: 1e-3,
            z_cap: None,
            inner_iters: 1,
            inner_scheme: InnerScheme::Extragradient,
            source_update: SourceUpdate::Implicit,
            edge_scheduling: EdgeScheduling::General,
        }
    }
}

impl StepParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("sigma", self.sigma),
            ("dt", self.dt),
            ("z_floor", self.z_floor),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {value}")));
            }
        }
        if let Some(cap) = self.z_cap {
            if !(cap > self.z_floor && cap.is_finite()) {
                return Err(Error::InvalidParams(format!("z_cap {cap} must exceed z_floor {}", self.z_floor)));
            }
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidParams("inner_iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Copy with `z_cap` fixed against `m`'s bounds.
    pub fn resolved(&self, m: &CapacityModel) -> StepParams {
        StepParams { z_cap: Some(self.z_cap.unwrap_or(10.0 * m.max_bound())), ..self.clone() }
    }

    fn z_cap_or_inf(&self) -> f64 {
        self.z_cap.unwrap_or(f64::INFINITY)
    }
}

/// Source rate and queues: the state touched by the outer update.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmState {
    pub z: f64,
    pub theta: QueueState,
}

impl AlgorithmState {
    pub fn initial(g: &OverlayGraph, params: &StepParams) -> Self {
        AlgorithmState { z: params.z_floor, theta: QueueState::zeros(g) }
    }
}

/// Rate by which node `v`'s queue for in-neighbor `u` should grow: what `u`
/// receives (plus `z` if `u` is the source) minus what `v` receives.
fn queue_drift(g: &OverlayGraph, rates: &RateAllocation, z: f64, v: NodeId, u: NodeId) -> f64 {
    let upstream = rates.inflow(g, u) + if u == g.source() { z } else { 0.0 };
    upstream - rates.inflow(g, v)
}

/// One step of the outer primal-dual update for `z` and every queue.
pub fn primal_dual_step(
    state: &AlgorithmState,
    rates: &RateAllocation,
    g: &OverlayGraph,
    params: &StepParams,
    utility: &dyn Utility,
) -> Result<AlgorithmState> {
    if state.theta.len() != g.edge_count() || rates.len() != g.edge_count() {
        return Err(Error::KeyMismatch);
    }
    let price = state.theta.source_price(g);
    let gain = params.dt * params.alpha;
    let z = match params.source_update {
        SourceUpdate::Explicit => state.z + gain * project_positive(utility.derivative(state.z) - price, state.z),
        SourceUpdate::Implicit => utility.implicit_step(state.z, gain, price),
    };
    let z = z.clamp(params.z_floor, params.z_cap_or_inf());

    let mut theta = state.theta.clone();
    for e in g.edge_ids() {
        let edge = g.edge(e);
        let current = state.theta.on_edge(e);
        let drift = queue_drift(g, rates, state.z, edge.to, edge.from);
        let next = current + params.dt * params.gamma * project_positive(drift, current);
        theta.set_on_edge(e, next.max(0.0));
    }
    Ok(AlgorithmState { z, theta })
}

/// `min` over receivers `v` and `w in in(v)` of
/// `inflow(v) - inflow(w) - z*[w = s]`; nonnegative iff every neighbor
/// constraint holds. `+inf` for graphs with no edges.
pub fn min_neighbor_margin(g: &OverlayGraph, rates: &RateAllocation, z: f64) -> f64 {
    let mut margin = f64::INFINITY;
    for v in g.receivers() {
        let inflow = rates.inflow(g, v);
        for w in g.in_neighbors(v) {
            let upstream = rates.inflow(g, w) + if w == g.source() { z } else { 0.0 };
            margin = margin.min(inflow - upstream);
        }
    }
    margin
}
