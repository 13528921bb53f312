use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{LoadDistribution, SimMetrics};
use super::{simulate, SimConfig};
use crate::error::{Error, Result};
use crate::topology::Topology;

/// Latency multiple over zero-load latency that marks saturation.
pub const SATURATION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub injection_rate: f64,
    pub seed: u64,
    pub metrics: SimMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Average latency at the lowest swept rate.
    pub zero_load_latency: f64,
    /// First rate whose latency exceeds ten times the zero-load latency.
    pub saturation_rate: Option<f64>,
}

/// Latency of the lowest-rate point, or `None` if nothing was delivered there.
pub fn zero_load_latency(points: &[SweepPoint]) -> Option<f64> {
    points
        .first()
        .filter(|p| p.metrics.delivered > 0)
        .map(|p| p.metrics.avg_latency)
}

/// Runs one independent simulation per rate, in parallel. Rate `k` uses seed
/// `config.seed + k`.
pub fn latency_sweep(config: &SimConfig, rates: &[f64]) -> Result<SweepResult> {
    if rates.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one injection rate".into()));
    }
    if rates.iter().any(|r| !(*r > 0.0)) || rates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(format!("sweep rates must be positive and ascending, got {rates:?}")));
    }
    config.validate()?;
    let points = rates
        .par_iter()
        .enumerate()
        .map(|(k, &rate)| {
            let mut c = config.clone();
            c.traffic.injection_rate = rate;
            c.seed = config.seed.wrapping_add(k as u64);
            simulate(&c).map(|metrics| SweepPoint { injection_rate: rate, seed: c.seed, metrics })
        })
        .collect::<Result<Vec<_>>>()?;
    let zero = zero_load_latency(&points).unwrap_or(0.0);
    let saturation_rate = points
        .iter()
        .find(|p| zero > 0.0 && p.metrics.avg_latency > SATURATION_FACTOR * zero)
        .map(|p| p.injection_rate);
    Ok(SweepResult { points, zero_load_latency: zero, saturation_rate })
}

/// Per-elevator load: the mean forwarded-flit count over the column's
/// routers, divided by the mean over routers without an elevator. Falls back
/// to absolute loads when that mean is zero or no such router exists.
pub fn load_distribution(metrics: &SimMetrics, topology: &Topology) -> Result<LoadDistribution> {
    let n = topology.node_count();
    if metrics.router_load.len() != n {
        return Err(Error::InvalidConfig(format!(
            "metrics cover {} routers, topology has {n}",
            metrics.router_load.len()
        )));
    }
    let layers = topology.dims().layers;
    let mut column_sum = vec![0u64; topology.elevator_count()];
    let (mut other_sum, mut other_count) = (0u64, 0u64);
    for (id, &load) in metrics.router_load.iter().enumerate() {
        let c = topology.coord(id);
        match topology.elevator_at(c.x, c.y) {
            Some(e) => column_sum[e] += load,
            None => {
                other_sum += load;
                other_count += 1;
            }
        }
    }
    let baseline = if other_count > 0 { other_sum as f64 / other_count as f64 } else { 0.0 };
    let normalized = baseline > 0.0;
    let elevator_loads = column_sum
        .iter()
        .map(|&s| {
            let mean = s as f64 / layers as f64;
            if normalized {
                mean / baseline
            } else {
                mean
            }
        })
        .collect();
    Ok(LoadDistribution { elevator_loads, baseline, normalized })
}
