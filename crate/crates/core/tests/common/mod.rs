//! Brute-force reference implementations shared by the integration tests.
//! Everything here works from raw coordinates and exact rationals and does
//! not call into the library's objective code.

#![allow(dead_code)]

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;

use adele::selection::ElevatorAssignment;
use adele::topology::{Dims, Topology};

pub type Q = Ratio<i64>;

pub fn coord(dims: Dims, id: usize) -> (usize, usize, usize) {
    let per = dims.x * dims.y;
    (id % dims.x, (id % per) / dims.x, id / per)
}

/// Hop count of the elevator path from `i` to `j` through column `(ex, ey)`,
/// or zero for same-layer pairs.
pub fn path_hops(dims: Dims, i: usize, j: usize, (ex, ey): (usize, usize)) -> i64 {
    let (si, sj) = (coord(dims, i), coord(dims, j));
    if si.2 == sj.2 {
        return 0;
    }
    (si.0.abs_diff(ex) + si.1.abs_diff(ey) + si.2.abs_diff(sj.2) + ex.abs_diff(sj.0) + ey.abs_diff(sj.1)) as i64
}

/// Per-elevator load with every source spreading its inter-layer traffic
/// evenly over its subset.
pub fn utilization_oracle(dims: Dims, subsets: &[Vec<usize>], elevators: usize, traffic: &[Vec<i64>]) -> Vec<Q> {
    let n = dims.nodes();
    let mut u = vec![Q::from_integer(0); elevators];
    for i in 0..n {
        for j in 0..n {
            if coord(dims, i).2 == coord(dims, j).2 {
                continue;
            }
            for &e in &subsets[i] {
                u[e] += Q::new(traffic[i][j], subsets[i].len() as i64);
            }
        }
    }
    u
}

pub fn variance_oracle(u: &[Q]) -> Q {
    let k = u.len() as i64;
    let mean = u.iter().copied().sum::<Q>() / k;
    u.iter().map(|&x| (x - mean) * (x - mean)).sum::<Q>() / k
}

/// Mean elevator-path length over all ordered inter-layer pairs.
pub fn avg_distance_oracle(dims: Dims, subsets: &[Vec<usize>], columns: &[(usize, usize)]) -> Q {
    let n = dims.nodes();
    let mut total = Q::from_integer(0);
    let mut pairs = 0i64;
    for i in 0..n {
        for j in 0..n {
            if coord(dims, i).2 == coord(dims, j).2 {
                continue;
            }
            pairs += 1;
            for &e in &subsets[i] {
                total += Q::new(path_hops(dims, i, j, columns[e]), subsets[i].len() as i64);
            }
        }
    }
    total / pairs
}

pub fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Every way to put `count` elevators on the layer grid.
pub fn placements(dims: Dims, count: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(start: usize, left: usize, cells: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for c in start..cells {
            cur.push(c);
            rec(c + 1, left - 1, cells, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, count, dims.x * dims.y, &mut Vec::new(), &mut out);
    out.into_iter().map(|v| v.into_iter().map(|c| (c % dims.x, c / dims.x)).collect()).collect()
}

pub fn random_subsets<R: Rng>(nodes: usize, elevators: usize, rng: &mut R) -> Vec<Vec<usize>> {
    (0..nodes)
        .map(|_| {
            let k = rng.gen_range(1..=elevators);
            let mut all: Vec<usize> = (0..elevators).collect();
            all.shuffle(rng);
            let mut s = all[..k].to_vec();
            s.sort_unstable();
            s
        })
        .collect()
}

pub fn random_traffic<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec<i64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0 } else { rng.gen_range(0..10) }).collect())
        .collect()
}

pub fn assignment(subsets: &[Vec<usize>]) -> ElevatorAssignment {
    ElevatorAssignment::new(subsets.to_vec())
}

/// Every subset assignment of a tiny network, or `None` if there are more
/// than `limit` of them.
pub fn all_assignments(topology: &Topology, limit: usize) -> Option<Vec<Vec<Vec<usize>>>> {
    let e = topology.elevator_count();
    let n = topology.node_count();
    let choices: Vec<Vec<usize>> = (1u32..(1 << e))
        .map(|mask| (0..e).filter(|k| mask & (1 << k) != 0).collect())
        .collect();
    let total = (choices.len() as f64).powi(n as i32);
    if total > limit as f64 {
        return None;
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        out.push(idx.iter().map(|&k| choices[k].clone()).collect());
        let mut p = 0;
        loop {
            if p == n {
                return Some(out);
            }
            idx[p] += 1;
            if idx[p] < choices.len() {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}
