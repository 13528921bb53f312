use thiserror::Error;

use crate::topology::ElevatorId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("unknown topology preset `{0}`")]
    UnknownPreset(String),
    #[error("elevator {0} does not exist")]
    InvalidElevator(ElevatorId),
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("elevator {0} is not in the router's subset")]
    NotInSubset(ElevatorId),
    #[error("invalid traffic: {0}")]
    InvalidTraffic(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("inconsistent cost sample: {0}")]
    InvalidSample(String),
    #[error("routing state corrupted: {0}")]
    RoutingState(String),
    #[error("simulation invariant violated: {0}")]
    Simulation(String),
    #[error("empty archive")]
    EmptyArchive,
    #[error("trace error: {0}")]
    Trace(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
