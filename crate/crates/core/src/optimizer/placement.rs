//! Elevator column placement that minimizes traffic-weighted mean
//! inter-layer distance when every router may use every elevator.

use crate::error::{Error, Result};
use crate::topology::{Dims, Topology};
use crate::traffic::TrafficMatrix;

/// Per-column cost `Σ_ij f_ij (|s_i − p| + |p − d_j|)` over inter-layer pairs.
/// With all-elevator subsets the mean distance is a constant plus the
/// average of these costs over the chosen columns.
fn column_costs(dims: Dims, traffic: &TrafficMatrix) -> Vec<f64> {
    let per_layer = dims.layer_size();
    let n = dims.nodes();
    let xy = |id: usize| {
        let r = id % per_layer;
        (r % dims.x, r / dims.x)
    };
    // traffic leaving and entering each (x, y) position across layers
    let mut out_w = vec![0.0; per_layer];
    let mut in_w = vec![0.0; per_layer];
    for i in 0..n {
        for j in 0..n {
            if i / per_layer == j / per_layer {
                continue;
            }
            let f = traffic.get(i, j);
            out_w[i % per_layer] += f;
            in_w[j % per_layer] += f;
        }
    }
    (0..per_layer)
        .map(|p| {
            let (px, py) = xy(p);
            (0..per_layer)
                .map(|q| {
                    let (qx, qy) = xy(q);
                    (out_w[q] + in_w[q]) * (px.abs_diff(qx) + py.abs_diff(qy)) as f64
                })
                .sum()
        })
        .collect()
}

/// Chooses `count` distinct columns by greedy insertion followed by
/// first-improvement swaps. Deterministic: ties go to the lowest row-major
/// position.
pub fn optimize_placement(dims: Dims, count: usize, traffic: &TrafficMatrix) -> Result<Vec<(usize, usize)>> {
    let per_layer = dims.layer_size();
    if count == 0 || count > per_layer {
        return Err(Error::InvalidConfig(format!("cannot place {count} elevators on a {}x{} layer", dims.x, dims.y)));
    }
    // validates dims and traffic size against a throwaway topology
    let probe = Topology::new(dims, vec![(0, 0)])?;
    traffic.validate(&probe)?;
    let cost = column_costs(dims, traffic);

    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    while chosen.len() < count {
        let best = (0..per_layer)
            .filter(|p| !chosen.contains(p))
            .min_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(a.cmp(&b)))
            .expect("free column");
        chosen.push(best);
    }
    let total = |set: &[usize]| set.iter().map(|&p| cost[p]).sum::<f64>();
    let mut improved = true;
    while improved {
        improved = false;
        'outer: for slot in 0..chosen.len() {
            for cand in 0..per_layer {
                if chosen.contains(&cand) {
                    continue;
                }
                let mut trial = chosen.clone();
                trial[slot] = cand;
                if total(&trial) < total(&chosen) - 1e-9 {
                    chosen = trial;
                    improved = true;
                    break 'outer;
                }
            }
        }
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|p| (p % dims.x, p / dims.x)).collect())
}
