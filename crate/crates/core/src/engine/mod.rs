//! Cycle-level wormhole simulator.
//!
//! Routers are input-queued with two virtual channels per port (one per
//! virtual network), four-flit buffers and credit-based flow control. A flit
//! advances one hop per cycle. Each cycle is computed from the state at the
//! start of the cycle and then committed, so router evaluation order never
//! changes the outcome.

mod metrics;
mod sim;
mod sweep;

pub use metrics::{EnergyModel, LoadDistribution, SimMetrics};
pub use sim::{Simulator, BUFFER_DEPTH};
pub use sim::Counters;
pub use sweep::{latency_sweep, load_distribution, zero_load_latency, SweepPoint, SweepResult, SATURATION_FACTOR};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::{AdeleParams, ElevatorAssignment, Policy};
use crate::topology::{Topology, TopologyDoc};
use crate::traffic::TrafficSource;

/// A bundled preset name or an inline topology document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologySpec {
    Preset(String),
    Inline(TopologyDoc),
}

impl TopologySpec {
    pub fn resolve(&self) -> Result<Topology> {
        match self {
            TopologySpec::Preset(name) => Topology::preset(name),
            TopologySpec::Inline(doc) => Topology::from_doc(doc),
        }
    }
}

impl From<&Topology> for TopologySpec {
    fn from(t: &Topology) -> Self {
        TopologySpec::Inline(t.to_doc())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub topology: TopologySpec,
    #[serde(default)]
    pub traffic: TrafficSource,
    #[serde(default = "default_policy")]
    pub policy: Policy,
    #[serde(default)]
    pub adele: AdeleParams,
    /// Per-router subsets; required by `rr` and `adele`, rejected otherwise.
    #[serde(default)]
    pub assignment: Option<ElevatorAssignment>,
    #[serde(default = "default_warmup")]
    pub warmup_cycles: u64,
    #[serde(default = "default_measure")]
    pub measure_cycles: u64,
    /// Extra cycles after the measurement window to let measured packets
    /// finish; `None` means as long as the window itself.
    #[serde(default)]
    pub drain_cycles: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub energy: EnergyModel,
}

fn default_policy() -> Policy {
    Policy::Nearest
}

fn default_warmup() -> u64 {
    10_000
}

fn default_measure() -> u64 {
    100_000
}

impl SimConfig {
    pub fn new(topology: &Topology, traffic: TrafficSource, policy: Policy) -> Self {
        SimConfig {
            topology: topology.into(),
            traffic,
            policy,
            adele: AdeleParams::default(),
            assignment: None,
            warmup_cycles: default_warmup(),
            measure_cycles: default_measure(),
            drain_cycles: None,
            seed: 0,
            energy: EnergyModel::default(),
        }
    }

    pub fn with_assignment(mut self, assignment: ElevatorAssignment) -> Self {
        self.assignment = Some(assignment);
        self
    }

    pub fn drain_limit(&self) -> u64 {
        self.drain_cycles.unwrap_or(self.measure_cycles)
    }

    /// Checks internal consistency and returns the resolved topology.
    pub fn validate(&self) -> Result<Topology> {
        let topology = self.topology.resolve()?;
        if self.measure_cycles == 0 {
            return Err(Error::InvalidConfig("measure_cycles must be positive".into()));
        }
        self.traffic.validate()?;
        self.adele.validate()?;
        self.energy.validate()?;
        match (&self.assignment, self.policy.needs_assignment()) {
            (Some(a), true) => a.validate(&topology)?,
            (None, true) => {
                return Err(Error::InvalidConfig(format!("policy `{}` needs an elevator assignment", self.policy)))
            }
            (Some(_), false) => {
                return Err(Error::InvalidConfig(format!(
                    "policy `{}` does not use an elevator assignment; remove it",
                    self.policy
                )))
            }
            (None, false) => {}
        }
        Ok(topology)
    }
}

/// Runs one simulation to completion.
pub fn simulate(config: &SimConfig) -> Result<SimMetrics> {
    Simulator::new(config)?.run()
}
