use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy charged per flit for each resource it crosses (arbitrary units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    pub e_router: f64,
    pub e_link: f64,
    pub e_tsv: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel { e_router: 0.8, e_link: 0.4, e_tsv: 0.2 }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        let all = [self.e_router, self.e_link, self.e_tsv];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("energy coefficients must be non-negative, got {all:?}")));
        }
        Ok(())
    }

    pub fn total(&self, router_traversals: u64, horizontal_hops: u64, vertical_hops: u64) -> f64 {
        router_traversals as f64 * self.e_router + horizontal_hops as f64 * self.e_link + vertical_hops as f64 * self.e_tsv
    }
}

/// Results of one run. Packet and energy figures cover packets generated
/// inside the measurement window; router loads cover every flit forwarded
/// during the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Mean generation-to-tail-delivery latency of delivered measured packets.
    pub avg_latency: f64,
    pub max_latency: u64,
    pub injected: u64,
    pub delivered: u64,
    pub delivered_flits: u64,
    /// Delivered measured flits per node per measured cycle.
    pub throughput: f64,
    /// Measured packets that took each elevator.
    pub elevator_traversals: Vec<u64>,
    /// Flits each router switched during the window.
    pub router_load: Vec<u64>,
    pub router_traversals: u64,
    pub horizontal_hops: u64,
    pub vertical_hops: u64,
    pub energy_total: f64,
    pub energy_per_flit: f64,
    /// Total cycles simulated, including warmup and drain.
    pub cycles: u64,
}

/// Elevator-router loads normalized to the elevator-less average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadDistribution {
    /// Mean forwarded flits over each elevator column's routers; divided by
    /// `baseline` when `normalized` is true.
    pub elevator_loads: Vec<f64>,
    /// Mean forwarded flits over routers without an elevator.
    pub baseline: f64,
    pub normalized: bool,
}

impl LoadDistribution {
    pub fn max(&self) -> f64 {
        self.elevator_loads.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.elevator_loads.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn variance(&self) -> f64 {
        crate::optimizer::utilization_variance(&self.elevator_loads)
    }
}
