//! Grid scenarios with a two-path bottleneck at the top-left corner, and
//! convergence-time measurement over them.

use std::collections::BTreeMap;
use std::fmt;
use std::thread;

use crate::capacity::{edge_capacitated, node_capacitated, CapacityModel};
use crate::dynamics::{run_fluid, Convergence, FluidConfig, LogUtility, StepParams, Trajectory, TrajectoryRow};
use crate::error::{Error, Result};
use crate::graph::{gen_grid, EdgeId, GridLayout, NodeId, OverlayGraph};
use crate::oracle::max_broadcast_rate_cut;

pub const EDGE_CAPACITY: f64 = 4.0;
pub const NODE_CAPACITY: f64 = 8.0;
pub const SOURCE_CAPACITY: f64 = 16.0;
pub const CORNER_CAPACITY: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Setting {
    /// Edge capacities 4, except the two edges into the top-left node at 1.
    One,
    /// Node capacities 8, source 16, the two in-neighbors of the top-left node 1.
    Two,
}

impl Setting {
    pub fn scenario(self, side: usize) -> Result<Scenario> {
        match self {
            Setting::One => setting_one(side),
            Setting::Two => setting_two(side),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::One => "1",
            Setting::Two => "2",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UtilityKind {
    #[default]
    Log,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub label: String,
    pub graph: OverlayGraph,
    pub layout: Option<GridLayout>,
    pub model: CapacityModel,
    pub params: StepParams,
    pub utility: UtilityKind,
    pub reference: Option<f64>,
}

impl Scenario {
    pub fn new(label: impl Into<String>, graph: OverlayGraph, model: CapacityModel) -> Result<Self> {
        if model.edge_count() != graph.edge_count() {
            return Err(Error::DimensionMismatch { expected: graph.edge_count(), actual: model.edge_count() });
        }
        Ok(Scenario {
            label: label.into(),
            graph,
            layout: None,
            model,
            params: StepParams::default(),
            utility: UtilityKind::Log,
            reference: None,
        })
    }

    /// The reference rate, computing it with the cut oracle on first use.
    pub fn reference_rate(&mut self) -> Result<f64> {
        if let Some(b) = self.reference {
            return Ok(b);
        }
        let b = max_broadcast_rate_cut(&self.graph, &self.model)?.rate;
        self.reference = Some(b);
        Ok(b)
    }

    pub fn run(&mut self, max_slots: usize, eps_rel: f64, window: usize) -> Result<(Trajectory, ConvergenceReport)> {
        let reference = self.reference_rate()?;
        let convergence = Convergence { reference, eps_rel, window };
        let config = FluidConfig::new(max_slots, Some(convergence));
        let traj = match self.utility {
            UtilityKind::Log => run_fluid(&self.graph, &self.model, &self.params, &LogUtility, &config)?,
        };
        let report =
            ConvergenceReport::from_trajectory(&self.label, self.graph.node_count(), &traj, reference, eps_rel, window);
        Ok((traj, report))
    }
}

pub fn setting_one(side: usize) -> Result<Scenario> {
    let (g, layout) = gen_grid(side)?;
    let corner = layout.top_left();
    let caps: BTreeMap<EdgeId, f64> =
        g.edge_ids().map(|e| (e, if g.edge(e).to == corner { CORNER_CAPACITY } else { EDGE_CAPACITY })).collect();
    let m = edge_capacitated(&g, &caps)?;
    let mut s = Scenario::new(format!("setting1-side{side}"), g, m)?;
    s.layout = Some(layout);
    Ok(s)
}

pub fn setting_two(side: usize) -> Result<Scenario> {
    let (g, layout) = gen_grid(side)?;
    let corner = layout.top_left();
    let caps: BTreeMap<NodeId, f64> = g
        .nodes()
        .filter(|&v| g.out_degree(v) > 0)
        .map(|v| {
            let cap = if v == g.source() {
                SOURCE_CAPACITY
            } else if g.find_edge(v, corner).is_some() {
                CORNER_CAPACITY
            } else {
                NODE_CAPACITY
            };
            (v, cap)
        })
        .collect();
    let m = node_capacitated(&g, &caps)?;
    let mut s = Scenario::new(format!("setting2-side{side}"), g, m)?;
    s.layout = Some(layout);
    Ok(s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub label: String,
    pub nodes: usize,
    pub converged: bool,
    pub convergence_time: Option<usize>,
    pub slots: usize,
    pub final_z: f64,
    pub reference: f64,
    pub relative_error: f64,
}

impl ConvergenceReport {
    pub fn from_trajectory(
        label: &str,
        nodes: usize,
        traj: &Trajectory,
        reference: f64,
        eps_rel: f64,
        window: usize,
    ) -> Self {
        let time = measure_convergence(&traj.rows, reference, eps_rel, window);
        let final_z = traj.z_final();
        ConvergenceReport {
            label: label.to_string(),
            nodes,
            converged: time.is_some(),
            convergence_time: time,
            slots: traj.slots,
            final_z,
            reference,
            relative_error: (final_z - reference).abs() / reference,
        }
    }
}

/// First recorded slot `t` with `|z - reference| / reference < eps_rel` at
/// every recorded slot in `[t, t + window]`, provided the record reaches
/// `t + window`.
pub fn measure_convergence(rows: &[TrajectoryRow], reference: f64, eps_rel: f64, window: usize) -> Option<usize> {
    let mut start = None;
    for row in rows {
        if ((row.z - reference) / reference).abs() < eps_rel {
            let t = *start.get_or_insert(row.slot);
            if row.slot - t >= window {
                return Some(t);
            }
        } else {
            start = None;
        }
    }
    None
}

pub const REPORT_HEADER: &str = "label,nodes,converged,convergence_time_slots,slots,final_z,reference_b,relative_error";

pub fn reports_to_csv(reports: &[ConvergenceReport]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        let time = r.convergence_time.map(|t| t.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.label, r.nodes, r.converged, time, r.slots, r.final_z, r.reference, r.relative_error
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub params: StepParams,
    pub max_slots: usize,
    pub eps_rel: f64,
    pub window: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { params: StepParams::default(), max_slots: 200_000, eps_rel: 0.02, window: 200 }
    }
}

/// Runs `setting` on every side concurrently; reports come back in input
/// order. A run that hits `max_slots` is reported as not converged.
pub fn size_sweep(setting: Setting, sides: &[usize], config: &SweepConfig) -> Result<Vec<ConvergenceReport>> {
    let results: Vec<Result<ConvergenceReport>> = thread::scope(|scope| {
        let handles: Vec<_> = sides
            .iter()
            .map(|&side| {
                scope.spawn(move || {
                    let mut s = setting.scenario(side)?;
                    s.params = config.params.clone();
                    Ok(s.run(config.max_slots, config.eps_rel, config.window)?.1)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    results.into_iter().collect()
}

/// Whether convergence times strictly grow along the list; `false` if any
/// entry did not converge.
pub fn times_increasing(reports: &[ConvergenceReport]) -> bool {
    let times: Option<Vec<usize>> = reports.iter().map(|r| r.convergence_time).collect();
    times.is_some_and(|t| t.windows(2).all(|w| w[0] < w[1]))
}
