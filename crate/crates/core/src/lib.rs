//! Simulation and optimization toolkit for partially connected 3D
//! networks-on-chip, where only some router columns ("elevators") carry
//! vertical links.
//!
//! * [`topology`]: mesh geometry, elevator placement and distances.
//! * [`traffic`]: uniform, shuffle and trace-driven workloads.
//! * [`routing`]: Elevator-First routing and a channel-dependency checker.
//! * [`selection`]: nearest, round-robin, adaptive and congestion-aware elevator choice.
//! * [`optimizer`]: archived multi-objective annealing over elevator subsets.
//! * [`engine`]: the cycle-level wormhole simulator and its sweeps.

pub mod engine;
pub mod error;
pub mod optimizer;
pub mod routing;
pub mod selection;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/topology.md")]
    mod topology {}
    #[doc = include_str!("../../../book/src/traffic.md")]
    mod traffic {}
    #[doc = include_str!("../../../book/src/routing.md")]
    mod routing {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
