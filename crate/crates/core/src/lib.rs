//! Neighbor-only broadcast rate maximization on acyclic overlays.

pub mod capacity;
pub mod content;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod format;
pub mod graph;
pub mod oracle;

pub use capacity::{
    edge_capacitated, feasible, node_capacitated, physical_link_model, CapacityKind, CapacityModel, Feasibility,
    RateAllocation, RowLabel,
};
pub use content::{run_packet_sim, schedule_contents, PacketReport, PacketSimConfig, PacketWorld};
pub use dynamics::{
    back_pressure, primal_dual_step, project_positive, run_fluid, AlgorithmState, Convergence, FluidConfig, LogUtility,
    PressureField, QueueState, StepParams, Trajectory, Utility,
};
pub use error::{Error, Result};
pub use experiments::{
    measure_convergence, reports_to_csv, setting_one, setting_two, size_sweep, times_increasing, ConvergenceReport,
    Scenario, Setting, SweepConfig, REPORT_HEADER,
};
pub use graph::{
    build_overlay, gen_grid, gen_random_dag, topological_index, EdgeId, GridLayout, IndexAssignment, NodeId,
    OverlayGraph,
};
pub use oracle::{
    brute_force_min_cut, lp_solve, max_broadcast_rate_cut, max_broadcast_rate_neighbor, min_cut, BroadcastOptimum,
    CutResult, LinearProgram, LpStatus,
};
