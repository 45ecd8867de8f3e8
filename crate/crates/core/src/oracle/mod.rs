//! Centralized reference computations for the broadcast capacity.

mod broadcast;
mod cut;
mod lp;

pub use broadcast::{
    max_broadcast_rate_cut, max_broadcast_rate_cut_generation, max_broadcast_rate_flow_lp, max_broadcast_rate_neighbor,
    BroadcastOptimum, FLOW_LP_MAX_VARIABLES,
};
pub use cut::{brute_force_min_cut, cut_value, min_cut, CutResult, BRUTE_FORCE_MAX_NODES};
pub use lp::{lp_solve, Constraint, LinearProgram, LpSolution, LpStatus, Sense};
