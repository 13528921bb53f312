//! Offline search for per-router elevator subsets.

mod amosa;
mod objectives;
mod placement;

pub use amosa::{amosa_optimize, is_mutually_nondominated, perturb, pick_solution, AmosaConfig, ArchiveSolution, PickStrategy};
pub use objectives::{
    average_distance, elevator_utilization, inter_layer_pairs, utilization_variance, ObjectiveModel, ObjectiveVector,
};
pub use placement::optimize_placement;
