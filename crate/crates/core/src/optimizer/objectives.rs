//! The two offline objectives: how unevenly traffic spreads over the
//! elevators, and how far inter-layer packets travel on average.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::ElevatorAssignment;
use crate::topology::Topology;
use crate::traffic::TrafficMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Population variance of per-elevator utilization.
    pub variance: f64,
    /// Mean source→elevator→destination hops over inter-layer pairs.
    pub avg_distance: f64,
}

impl ObjectiveVector {
    pub fn as_array(&self) -> [f64; 2] {
        [self.variance, self.avg_distance]
    }

    /// Pareto dominance for minimization.
    pub fn dominates(&self, other: &ObjectiveVector) -> bool {
        self.variance <= other.variance
            && self.avg_distance <= other.avg_distance
            && (self.variance < other.variance || self.avg_distance < other.avg_distance)
    }
}

fn check_sizes(assignment: &ElevatorAssignment, topology: &Topology) -> Result<()> {
    assignment.validate(topology)
}

/// Expected load on each elevator when every router spreads its inter-layer
/// flows evenly over its subset: `U_e = Σ_i 1/|A_i| Σ_j f_ij·[e ∈ A_i]`.
pub fn elevator_utilization(assignment: &ElevatorAssignment, traffic: &TrafficMatrix, topology: &Topology) -> Result<Vec<f64>> {
    check_sizes(assignment, topology)?;
    let n = topology.node_count();
    if traffic.size() != n {
        return Err(Error::InvalidTraffic(format!(
            "traffic matrix covers {} routers, topology has {n}",
            traffic.size()
        )));
    }
    let per_layer = topology.dims().layer_size();
    let mut u = vec![0.0; topology.elevator_count()];
    for i in 0..n {
        let subset = assignment.subset(i);
        let share = 1.0 / subset.len() as f64;
        let row = traffic.row(i);
        for (j, &f) in row.iter().enumerate() {
            if f == 0.0 || i / per_layer == j / per_layer {
                continue;
            }
            for &e in subset {
                u[e] += share * f;
            }
        }
    }
    Ok(u)
}

/// Population variance.
pub fn utilization_variance(u: &[f64]) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    let n = u.len() as f64;
    let mean = u.iter().sum::<f64>() / n;
    u.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Number of ordered router pairs on different layers, `N·(N − X·Y)`.
pub fn inter_layer_pairs(topology: &Topology) -> usize {
    let n = topology.node_count();
    n * (n - topology.dims().layer_size())
}

/// Mean elevator path length over ordered inter-layer pairs, each source
/// averaging uniformly over its subset.
pub fn average_distance(assignment: &ElevatorAssignment, topology: &Topology) -> Result<f64> {
    check_sizes(assignment, topology)?;
    let n = topology.node_count();
    let mut total = 0.0;
    for i in 0..n {
        let src = topology.coord(i);
        let subset = assignment.subset(i);
        let mut s = 0usize;
        for j in 0..n {
            let dst = topology.coord(j);
            if src.z == dst.z {
                continue;
            }
            for &e in subset {
                s += topology.path_distance_unchecked(src, dst, e);
            }
        }
        total += s as f64 / subset.len() as f64;
    }
    Ok(total / inter_layer_pairs(topology) as f64)
}

/// Precomputed per-router sums so that both objectives of a candidate
/// assignment cost `O(Σ|A_i|)`.
#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    elevators: usize,
    // Σ_j f_ij over inter-layer j
    outflow: Vec<f64>,
    // Σ_j D_ij^e over inter-layer j, row-major by (i, e)
    distance_sums: Vec<u64>,
    pairs: f64,
}

impl ObjectiveModel {
    pub fn new(topology: &Topology, traffic: &TrafficMatrix) -> Result<Self> {
        traffic.validate(topology)?;
        let n = topology.node_count();
        let ne = topology.elevator_count();
        let per_layer = topology.dims().layer_size();
        let mut outflow = vec![0.0; n];
        let mut distance_sums = vec![0u64; n * ne];
        for i in 0..n {
            let src = topology.coord(i);
            for j in 0..n {
                if i / per_layer == j / per_layer {
                    continue;
                }
                outflow[i] += traffic.get(i, j);
                let dst = topology.coord(j);
                for e in 0..ne {
                    distance_sums[i * ne + e] += topology.path_distance_unchecked(src, dst, e) as u64;
                }
            }
        }
        Ok(ObjectiveModel { elevators: ne, outflow, distance_sums, pairs: inter_layer_pairs(topology) as f64 })
    }

    pub fn utilization(&self, assignment: &ElevatorAssignment) -> Vec<f64> {
        let mut u = vec![0.0; self.elevators];
        for (i, subset) in assignment.subsets().iter().enumerate() {
            let share = self.outflow[i] / subset.len() as f64;
            for &e in subset {
                u[e] += share;
            }
        }
        u
    }

    pub fn average_distance(&self, assignment: &ElevatorAssignment) -> f64 {
        let mut total = 0.0;
        for (i, subset) in assignment.subsets().iter().enumerate() {
            let s: u64 = subset.iter().map(|&e| self.distance_sums[i * self.elevators + e]).sum();
            total += s as f64 / subset.len() as f64;
        }
        total / self.pairs
    }

    pub fn evaluate(&self, assignment: &ElevatorAssignment) -> ObjectiveVector {
        ObjectiveVector {
            variance: utilization_variance(&self.utilization(assignment)),
            avg_distance: self.average_distance(assignment),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Dims;

    #[test]
    fn variance_examples() {
        assert_eq!(utilization_variance(&[4.0, 4.0, 4.0]), 0.0);
        assert_eq!(utilization_variance(&[0.0, 2.0]), 1.0);
        assert_eq!(utilization_variance(&[1.0, 2.0, 3.0, 6.0]), 3.5);
    }

    #[test]
    fn utilization_examples() {
        let t = Topology::new(Dims::new(2, 2, 2), vec![(0, 0)]).unwrap();
        let a = ElevatorAssignment::nearest(&t);
        assert_eq!(elevator_utilization(&a, &TrafficMatrix::zeros(8), &t).unwrap(), vec![0.0]);
        // N·N·(L−1)/L = 8·8/2
        assert_eq!(elevator_utilization(&a, &TrafficMatrix::uniform(8), &t).unwrap(), vec![32.0]);
        let t = Topology::new(Dims::new(2, 2, 2), vec![(0, 0), (1, 1)]).unwrap();
        let a = ElevatorAssignment::all(&t);
        assert_eq!(elevator_utilization(&a, &TrafficMatrix::uniform(8), &t).unwrap(), vec![16.0, 16.0]);
        assert!(elevator_utilization(&a, &TrafficMatrix::uniform(4), &t).is_err());
    }

    #[test]
    fn distance_examples() {
        let t = Topology::new(Dims::new(1, 1, 2), vec![(0, 0)]).unwrap();
        assert_eq!(average_distance(&ElevatorAssignment::nearest(&t), &t).unwrap(), 1.0);
        let t = Topology::new(Dims::new(2, 1, 2), vec![(0, 0)]).unwrap();
        assert_eq!(average_distance(&ElevatorAssignment::nearest(&t), &t).unwrap(), 2.0);
    }

    #[test]
    fn model_agrees_with_direct_formulas() {
        let t = Topology::new(Dims::new(3, 2, 3), vec![(0, 0), (2, 1), (1, 0)]).unwrap();
        let traffic = TrafficMatrix::uniform(t.node_count());
        let m = ObjectiveModel::new(&t, &traffic).unwrap();
        for a in [ElevatorAssignment::nearest(&t), ElevatorAssignment::all(&t)] {
            let u = elevator_utilization(&a, &traffic, &t).unwrap();
            for (x, y) in u.iter().zip(m.utilization(&a)) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
            let ad = average_distance(&a, &t).unwrap();
            assert!((ad - m.average_distance(&a)).abs() <= 1e-12);
        }
    }

    #[test]
    fn dominance() {
        let a = ObjectiveVector { variance: 1.0, avg_distance: 2.0 };
        let b = ObjectiveVector { variance: 1.0, avg_distance: 3.0 };
        assert!(a.dominates(&b));
        assert!(!b.dominates(&a));
        assert!(!a.dominates(&a));
        let c = ObjectiveVector { variance: 0.5, avg_distance: 4.0 };
        assert!(!a.dominates(&c) && !c.dominates(&a));
    }
}
