use std::collections::VecDeque;

use super::schedule::node_caps;
use super::{
    back_pressure, min_neighbor_margin, primal_dual_step, schedule_closed_form_edges, schedule_general_step,
    schedule_node_capacitated, AlgorithmState, EdgeScheduling, LinkDuals, PressureField, StepParams, Utility,
};
use crate::capacity::{feasible, CapacityKind, CapacityModel, RateAllocation};
use crate::error::{Error, Result};
use crate::graph::OverlayGraph;

/// Stop rule: `|z - reference| / reference < eps_rel` held for `window`
/// slots after the first in-band slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Convergence {
    pub reference: f64,
    pub eps_rel: f64,
    pub window: usize,
}

impl Convergence {
    pub fn new(reference: f64) -> Self {
        Convergence { reference, eps_rel: 0.02, window: 200 }
    }

    pub fn in_band(&self, z: f64) -> bool {
        ((z - self.reference) / self.reference).abs() < self.eps_rel
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluidConfig {
    pub max_slots: usize,
    pub convergence: Option<Convergence>,
    /// Record every `record_stride`-th slot; slot 0 and the last slot are always kept.
    pub record_stride: usize,
    /// Number of trailing slots averaged into `Trajectory::mean_rates`.
    pub averaging_window: usize,
}

impl FluidConfig {
    pub fn new(max_slots: usize, convergence: Option<Convergence>) -> Self {
        let averaging_window = convergence.as_ref().map_or(200, |c| c.window + 1);
        FluidConfig { max_slots, convergence, record_stride: 1, averaging_window }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub slot: usize,
    pub z: f64,
    pub max_cap_violation: f64,
    pub min_margin: f64,
}

/// Per-slot invariant failures seen during a run. All zero on a healthy run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InvariantTally {
    pub slots_checked: usize,
    pub negative_queue: usize,
    pub negative_rate: usize,
    pub negative_dual: usize,
    pub source_rate_below_floor: usize,
    pub node_schedule_infeasible: usize,
    pub pressure_inconsistent: usize,
}

impl InvariantTally {
    pub fn total(&self) -> usize {
        self.negative_queue
            + self.negative_rate
            + self.negative_dual
            + self.source_rate_below_floor
            + self.node_schedule_infeasible
            + self.pressure_inconsistent
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub converged: bool,
    /// First slot of the window that satisfied the stop rule.
    pub convergence_slot: Option<usize>,
    pub slots: usize,
    pub state: AlgorithmState,
    pub rates: RateAllocation,
    pub duals: Option<LinkDuals>,
    /// Rates averaged over the trailing averaging window.
    pub mean_rates: RateAllocation,
    pub invariants: InvariantTally,
}

impl Trajectory {
    pub fn z_final(&self) -> f64 {
        self.state.z
    }

    pub fn summary_line(&self) -> String {
        format!("converged={} slots={} z_final={}", self.converged, self.slots, self.state.z)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,z,max_cap_violation,min_margin\n");
        for row in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", row.slot, row.z, row.max_cap_violation, row.min_margin));
        }
        out
    }
}

enum Scheduler {
    Node(Vec<f64>),
    ClosedForm,
    Dynamic(LinkDuals),
}

fn check_slot(
    tally: &mut InvariantTally,
    g: &OverlayGraph,
    pressure: &PressureField,
    rates: &RateAllocation,
    state: &AlgorithmState,
    scheduler: &Scheduler,
    params: &StepParams,
) {
    tally.slots_checked += 1;
    tally.negative_queue += state.theta.as_slice().iter().filter(|&&t| t.is_nan() || t < 0.0).count();
    tally.negative_rate += rates.as_slice().iter().filter(|&&r| r.is_nan() || r < 0.0).count();
    if state.z < params.z_floor {
        tally.source_rate_below_floor += 1;
    }
    match scheduler {
        Scheduler::Dynamic(duals) => {
            tally.negative_dual += duals.as_slice().iter().filter(|&&l| l.is_nan() || l < 0.0).count();
        }
        Scheduler::Node(caps) => {
            for v in g.nodes() {
                let out: f64 = g.out_edges(v).iter().map(|&e| rates[e]).sum();
                if out != 0.0 && out != caps[v.0] {
                    tally.node_schedule_infeasible += 1;
                }
            }
        }
        Scheduler::ClosedForm => {}
    }
    for u in g.nodes() {
        let mut values = g.in_edges(u).iter().map(|&e| pressure.on_edge(e));
        if let Some(first) = values.next() {
            if values.any(|p| p != first) {
                tally.pressure_inconsistent += 1;
            }
        }
    }
}

/// Runs the slot loop: back-pressure, capacity scheduling, then the outer
/// primal-dual step, until the stop rule holds or `max_slots` is reached.
///
/// Node-capacitated models use the closed-form scheduler. Edge-capacitated
/// models use either the link dynamics with identity rows or their exact
/// per-edge solution, per `params.edge_scheduling`. Other models run
/// `params.inner_iters` warm-started link steps per slot.
pub fn run_fluid(
    g: &OverlayGraph,
    m: &CapacityModel,
    params: &StepParams,
    utility: &dyn Utility,
    config: &FluidConfig,
) -> Result<Trajectory> {
    if m.edge_count() != g.edge_count() {
        return Err(Error::DimensionMismatch { expected: g.edge_count(), actual: m.edge_count() });
    }
    params.validate()?;
    if let Some(c) = &config.convergence {
        if !(c.reference > 0.0 && c.eps_rel > 0.0) {
            return Err(Error::InvalidParams("convergence reference and band must be positive".into()));
        }
    }
    let params = params.resolved(m);
    let stride = config.record_stride.max(1);

    let mut scheduler = match (m.kind(), params.edge_scheduling) {
        (CapacityKind::NodeCap, _) => Scheduler::Node(node_caps(g, m)?),
        (CapacityKind::EdgeCap, EdgeScheduling::ClosedForm) => Scheduler::ClosedForm,
        _ => Scheduler::Dynamic(LinkDuals::zeros(m)),
    };
    let mut state = AlgorithmState::initial(g, &params);
    let mut rates = RateAllocation::zeros(g.edge_count());
    let mut rows = vec![TrajectoryRow {
        slot: 0,
        z: state.z,
        max_cap_violation: 0.0,
        min_margin: min_neighbor_margin(g, &rates, state.z),
    }];
    let mut tally = InvariantTally::default();
    let mut recent: VecDeque<RateAllocation> = VecDeque::new();
    let mut rate_sum = vec![0.0; g.edge_count()];
    let window = config.averaging_window.max(1);

    let mut streak_start = match &config.convergence {
        Some(c) if c.in_band(state.z) => Some(0),
        _ => None,
    };
    let mut convergence_slot = None;
    let mut slot = 0;
    while slot < config.max_slots {
        if let (Some(c), Some(start)) = (&config.convergence, streak_start) {
            if slot - start >= c.window {
                convergence_slot = Some(start);
                break;
            }
        }
        slot += 1;

        let pressure = back_pressure(&state.theta, g)?;
        rates = match &mut scheduler {
            Scheduler::Node(caps) => schedule_node_capacitated(&pressure, g, caps),
            Scheduler::ClosedForm => schedule_closed_form_edges(&pressure, m)?,
            Scheduler::Dynamic(duals) => {
                let mut r = rates;
                for _ in 0..params.inner_iters {
                    let (next_r, next_duals) = schedule_general_step(&pressure, &r, duals, m, &params)?;
                    r = next_r;
                    *duals = next_duals;
                }
                r
            }
        };
        state = primal_dual_step(&state, &rates, g, &params, utility)?;
        check_slot(&mut tally, g, &pressure, &rates, &state, &scheduler, &params);

        for (sum, r) in rate_sum.iter_mut().zip(rates.as_slice()) {
            *sum += r;
        }
        recent.push_back(rates.clone());
        if recent.len() > window {
            let old = recent.pop_front().expect("nonempty");
            for (sum, r) in rate_sum.iter_mut().zip(old.as_slice()) {
                *sum -= r;
            }
        }

        if slot % stride == 0 {
            rows.push(TrajectoryRow {
                slot,
                z: state.z,
                max_cap_violation: feasible(&rates, m, 0.0)?.max_violation,
                min_margin: min_neighbor_margin(g, &rates, state.z),
            });
        }

        if let Some(c) = &config.convergence {
            if c.in_band(state.z) {
                streak_start.get_or_insert(slot);
            } else {
                streak_start = None;
            }
        }
    }
    if convergence_slot.is_none() {
        if let (Some(c), Some(start)) = (&config.convergence, streak_start) {
            if slot - start >= c.window {
                convergence_slot = Some(start);
            }
        }
    }
    if rows.last().map(|r| r.slot) != Some(slot) {
        rows.push(TrajectoryRow {
            slot,
            z: state.z,
            max_cap_violation: feasible(&rates, m, 0.0)?.max_violation,
            min_margin: min_neighbor_margin(g, &rates, state.z),
        });
    }

    let mean_rates = if recent.is_empty() {
        rates.clone()
    } else {
        let n = recent.len() as f64;
        RateAllocation::new(rate_sum.iter().map(|s| (s / n).max(0.0)).collect())?
    };
    let duals = match scheduler {
        Scheduler::Dynamic(d) => Some(d),
        _ => None,
    };
    Ok(Trajectory {
        rows,
        converged: convergence_slot.is_some(),
        convergence_slot,
        slots: slot,
        state,
        rates,
        duals,
        mean_rates,
        invariants: tally,
    })
}
