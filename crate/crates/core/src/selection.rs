//! Elevator-selection policies.
//!
//! The adaptive policy keeps one smoothed latency cost per elevator in the
//! router's subset. Costs come from how long a packet took to drain out of
//! the source router beyond its own serialization time. Round-robin then
//! skips costly elevators with a probability that grows with their share of
//! the total cost, and when every cost is below a threshold the router falls
//! back to the shortest path.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Coord, ElevatorId, NodeId, Topology};

/// Per-router elevator subsets `A_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElevatorAssignment {
    subsets: Vec<Vec<ElevatorId>>,
}

impl ElevatorAssignment {
    pub fn new(subsets: Vec<Vec<ElevatorId>>) -> Self {
        ElevatorAssignment { subsets }
    }

    /// Elevator-First's assignment: every router gets only its nearest elevator.
    pub fn nearest(topology: &Topology) -> Self {
        Self::new(topology.coords().map(|c| vec![topology.nearest_elevator(c)]).collect())
    }

    /// Every router may use every elevator.
    pub fn all(topology: &Topology) -> Self {
        let all: Vec<ElevatorId> = (0..topology.elevator_count()).collect();
        Self::new(vec![all; topology.node_count()])
    }

    pub fn subset(&self, router: NodeId) -> &[ElevatorId] {
        &self.subsets[router]
    }

    pub fn subsets(&self) -> &[Vec<ElevatorId>] {
        &self.subsets
    }

    pub(crate) fn subset_mut(&mut self, router: NodeId) -> &mut Vec<ElevatorId> {
        &mut self.subsets[router]
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        if self.subsets.len() != topology.node_count() {
            return Err(Error::InvalidAssignment(format!(
                "{} subsets for {} routers",
                self.subsets.len(),
                topology.node_count()
            )));
        }
        let e = topology.elevator_count();
        for (i, s) in self.subsets.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidAssignment(format!("router {i} has an empty subset")));
            }
            if let Some(&bad) = s.iter().find(|&&k| k >= e) {
                return Err(Error::InvalidAssignment(format!("router {i} lists unknown elevator {bad}")));
            }
            for (pos, k) in s.iter().enumerate() {
                if s[..pos].contains(k) {
                    return Err(Error::InvalidAssignment(format!("router {i} lists elevator {k} twice")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Elevator-First: nearest elevator to the source.
    Nearest,
    /// Plain round-robin over the router's subset.
    Rr,
    /// Cost-aware round-robin with skip probabilities.
    Adele,
    /// Least-congested path to the elevator, using a global buffer snapshot.
    Cda,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Nearest, Policy::Rr, Policy::Adele, Policy::Cda];

    pub fn needs_assignment(self) -> bool {
        matches!(self, Policy::Rr | Policy::Adele)
    }

    pub fn name(self) -> &'static str {
        match self {
            Policy::Nearest => "nearest",
            Policy::Rr => "rr",
            Policy::Adele => "adele",
            Policy::Cda => "cda",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown policy `{s}` (nearest|rr|adele|cda)")))
    }
}

/// Tuning knobs of the adaptive policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdeleParams {
    /// Weight of the newest latency sample in the smoothed cost.
    pub a: f64,
    /// Exploration floor: every elevator keeps at least this chance of being taken.
    pub xi: f64,
    /// Below this maximum cost the router takes the minimal-path elevator.
    pub threshold: f64,
}

impl Default for AdeleParams {
    fn default() -> Self {
        AdeleParams { a: 0.2, xi: 0.05, threshold: 0.5 }
    }
}

impl AdeleParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a) {
            return Err(Error::InvalidConfig(format!("adele.a must be in [0,1], got {}", self.a)));
        }
        if !(0.0..1.0).contains(&self.xi) {
            return Err(Error::InvalidConfig(format!("adele.xi must be in [0,1), got {}", self.xi)));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!("adele.threshold must be >= 0, got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Timing of one packet leaving its source router.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionCostSample {
    /// Cycle the head flit left the source router.
    pub t_head: u64,
    /// Cycle by which the tail flit had left (departure cycle + 1).
    pub t_tail: u64,
    /// Packet length in flits.
    pub length: u64,
}

/// Blocking per flit seen while the packet drained out of the source router.
pub fn selection_latency(sample: SelectionCostSample) -> Result<f64> {
    let SelectionCostSample { t_head, t_tail, length } = sample;
    if length == 0 || t_tail < t_head + length {
        return Err(Error::InvalidSample(format!(
            "t_head={t_head}, t_tail={t_tail}, length={length}: the tail cannot leave before the packet serializes"
        )));
    }
    Ok((t_tail - t_head - length) as f64 / length as f64)
}

/// Skip probability for an elevator with relative cost `relative` in a subset
/// of `subset_len` elevators.
pub fn skip_probability(relative: f64, subset_len: usize, xi: f64) -> f64 {
    let n = subset_len as f64;
    if relative >= 2.0 / n {
        1.0 - xi
    } else if relative >= 1.0 / n {
        n * (relative - 1.0 / n) * (1.0 - xi)
    } else {
        0.0
    }
}

/// Selection state kept by one source router.
#[derive(Debug, Clone)]
pub struct SelectorState {
    subset: Vec<ElevatorId>,
    rr_pointer: usize,
    costs: Vec<f64>,
    params: AdeleParams,
    rng: ChaCha8Rng,
}

impl SelectorState {
    pub fn new(subset: Vec<ElevatorId>, params: AdeleParams, rng: ChaCha8Rng) -> Result<Self> {
        params.validate()?;
        if subset.is_empty() {
            return Err(Error::InvalidAssignment("selector needs a non-empty subset".into()));
        }
        let costs = vec![0.0; subset.len()];
        Ok(SelectorState { subset, rr_pointer: 0, costs, params, rng })
    }

    pub fn subset(&self) -> &[ElevatorId] {
        &self.subset
    }

    pub fn params(&self) -> &AdeleParams {
        &self.params
    }

    pub fn rr_pointer(&self) -> usize {
        self.rr_pointer
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    fn position(&self, k: ElevatorId) -> Option<usize> {
        self.subset.iter().position(|&e| e == k)
    }

    fn slot(&self, k: ElevatorId) -> Result<usize> {
        self.position(k).ok_or(Error::NotInSubset(k))
    }

    pub fn cost(&self, k: ElevatorId) -> Result<f64> {
        Ok(self.costs[self.slot(k)?])
    }

    /// Overwrites a cost directly; used to seed experiments and tests.
    pub fn set_cost(&mut self, k: ElevatorId, value: f64) -> Result<()> {
        let i = self.slot(k)?;
        self.costs[i] = value.max(0.0);
        Ok(())
    }

    /// Exponential smoothing `C_k ← a·T + (1−a)·C_k`. Returns the new cost.
    pub fn update_cost(&mut self, k: ElevatorId, latency: f64) -> Result<f64> {
        let i = self.slot(k)?;
        let a = self.params.a;
        self.costs[i] = a * latency + (1.0 - a) * self.costs[i];
        Ok(self.costs[i])
    }

    /// `C_k / Σ C_p` over the subset, or `1/|A|` while every cost is zero.
    pub fn relative_cost(&self, k: ElevatorId) -> Result<f64> {
        let i = self.slot(k)?;
        Ok(self.relative_at(i))
    }

    fn relative_at(&self, i: usize) -> f64 {
        let total: f64 = self.costs.iter().sum();
        if total > 0.0 {
            self.costs[i] / total
        } else {
            1.0 / self.subset.len() as f64
        }
    }

    pub fn skip_probability(&self, k: ElevatorId) -> Result<f64> {
        let i = self.slot(k)?;
        Ok(self.skip_at(i))
    }

    fn skip_at(&self, i: usize) -> f64 {
        skip_probability(self.relative_at(i), self.subset.len(), self.params.xi)
    }

    /// Plain round-robin.
    pub fn select_rr(&mut self) -> ElevatorId {
        let e = self.subset[self.rr_pointer];
        self.rr_pointer = (self.rr_pointer + 1) % self.subset.len();
        e
    }

    /// Adaptive selection for an inter-layer packet from `src` to `dst`.
    pub fn select_adele(&mut self, src: Coord, dst: Coord, topology: &Topology) -> ElevatorId {
        let max_cost = self.costs.iter().copied().fold(0.0, f64::max);
        if max_cost < self.params.threshold {
            return topology.minimal_path_elevator(src, dst, &self.subset);
        }
        let n = self.subset.len();
        for _ in 0..10 * n {
            let i = self.rr_pointer;
            self.rr_pointer = (self.rr_pointer + 1) % n;
            let skip = self.skip_at(i);
            if !self.rng.gen_bool(skip) {
                return self.subset[i];
            }
        }
        self.select_rr()
    }
}

/// Elevator-First selection.
pub fn select_nearest(src: Coord, topology: &Topology) -> ElevatorId {
    topology.nearest_elevator(src)
}

/// Idealized congestion-aware selection: the elevator whose XY path from
/// `src` (both ends included) holds the fewest buffered flits, then the
/// shortest such path, then the lowest id. `occupancy` is indexed by router.
pub fn select_cda(src: Coord, topology: &Topology, occupancy: &[u32]) -> ElevatorId {
    (0..topology.elevator_count())
        .min_by_key(|&e| {
            let (ex, ey) = topology.elevators()[e];
            let mut load: u64 = 0;
            let mut c = src;
            loop {
                load += u64::from(occupancy[topology.node_id(c)]);
                if c.x != ex {
                    c.x = if c.x < ex { c.x + 1 } else { c.x - 1 };
                } else if c.y != ey {
                    c.y = if c.y < ey { c.y + 1 } else { c.y - 1 };
                } else {
                    break;
                }
            }
            (load, topology.distance_to_column(src, e), e)
        })
        .expect("topology has at least one elevator")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Dims;
    use rand::SeedableRng;

    fn state(subset: &[ElevatorId], costs: &[f64]) -> SelectorState {
        let mut s = SelectorState::new(subset.to_vec(), AdeleParams::default(), ChaCha8Rng::seed_from_u64(1)).unwrap();
        for (&k, &c) in subset.iter().zip(costs) {
            s.set_cost(k, c).unwrap();
        }
        s
    }

    fn sample(t_head: u64, t_tail: u64, length: u64) -> SelectionCostSample {
        SelectionCostSample { t_head, t_tail, length }
    }

    #[test]
    fn latency_examples() {
        assert_eq!(selection_latency(sample(100, 110, 10)).unwrap(), 0.0);
        assert_eq!(selection_latency(sample(100, 120, 10)).unwrap(), 1.0);
        assert_eq!(selection_latency(sample(0, 45, 30)).unwrap(), 0.5);
        assert!(selection_latency(sample(100, 105, 10)).is_err());
        assert!(selection_latency(sample(0, 5, 0)).is_err());
    }

    #[test]
    fn cost_update_examples() {
        let mut s = state(&[0, 1], &[0.0, 2.0]);
        assert!((s.update_cost(0, 5.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s.update_cost(1, 2.0).unwrap(), 2.0);
        let mut s = state(&[3], &[1.0]);
        assert!((s.update_cost(3, 0.0).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(s.update_cost(4, 1.0), Err(Error::NotInSubset(4))));
    }

    #[test]
    fn relative_cost_examples() {
        let s = state(&[0, 1, 2, 3], &[1.0; 4]);
        assert_eq!(s.relative_cost(2).unwrap(), 0.25);
        let s = state(&[4, 7], &[3.0, 1.0]);
        assert_eq!(s.relative_cost(4).unwrap(), 0.75);
        let s = state(&[4, 7], &[0.0, 0.0]);
        assert_eq!(s.relative_cost(7).unwrap(), 0.5);
    }

    #[test]
    fn skip_examples() {
        assert!((skip_probability(0.6, 4, 0.05) - 0.95).abs() < 1e-12);
        assert!((skip_probability(0.75, 2, 0.05) - 0.475).abs() < 1e-12);
        for n in 1..10 {
            assert_eq!(skip_probability(1.0 / n as f64, n, 0.05), 0.0);
        }
        assert_eq!(skip_probability(0.1, 4, 0.05), 0.0);
    }

    #[test]
    fn rr_cycles_through_subset() {
        let mut s = state(&[2, 5, 7], &[]);
        let seq: Vec<_> = (0..6).map(|_| s.select_rr()).collect();
        assert_eq!(seq, [2, 5, 7, 2, 5, 7]);
        let mut s = state(&[4], &[]);
        assert!((0..5).all(|_| s.select_rr() == 4));
        let mut s = state(&[0, 1, 2], &[]);
        let mut counts = [0; 3];
        for _ in 0..3000 {
            counts[s.select_rr()] += 1;
        }
        assert_eq!(counts, [1000; 3]);
    }

    #[test]
    fn adele_threshold_takes_minimal_path() {
        let t = Topology::new(Dims::new(4, 4, 2), vec![(0, 0), (3, 3)]).unwrap();
        let mut s = SelectorState::new(vec![0, 1], AdeleParams { threshold: 0.1, ..Default::default() }, ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(s.select_adele(Coord::new(3, 2, 0), Coord::new(3, 3, 1), &t), 1);
        assert_eq!(s.select_adele(Coord::new(0, 1, 0), Coord::new(0, 0, 1), &t), 0);
        assert_eq!(s.rr_pointer(), 0);
    }

    #[test]
    fn adele_single_elevator() {
        let t = Topology::new(Dims::new(4, 4, 2), vec![(0, 0), (3, 3)]).unwrap();
        let mut s = state(&[1], &[7.0]);
        assert!((0..100).all(|_| s.select_adele(Coord::new(0, 0, 0), Coord::new(0, 0, 1), &t) == 1));
    }

    #[test]
    fn adele_with_zero_costs_matches_rr() {
        let t = Topology::new(Dims::new(4, 4, 2), vec![(0, 0), (3, 3), (1, 2)]).unwrap();
        let params = AdeleParams { a: 0.0, threshold: 0.0, ..Default::default() };
        let mut adele = SelectorState::new(vec![2, 0, 1], params, ChaCha8Rng::seed_from_u64(9)).unwrap();
        let mut rr = adele.clone();
        for i in 0..100 {
            let src = t.coord(i % 16);
            assert_eq!(adele.select_adele(src, Coord::new(1, 1, 1), &t), rr.select_rr());
            adele.update_cost(adele.subset()[i % 3], 4.0).unwrap();
        }
    }

    #[test]
    fn cda_examples() {
        let t = Topology::new(Dims::new(4, 4, 2), vec![(0, 0), (3, 0)]).unwrap();
        let empty = vec![0u32; 32];
        assert_eq!(select_cda(Coord::new(2, 0, 0), &t, &empty), 1);
        assert_eq!(select_cda(Coord::new(1, 0, 0), &t, &empty), 0);
        let mut busy = empty.clone();
        busy[0] = 8;
        assert_eq!(select_cda(Coord::new(1, 0, 0), &t, &busy), 1);
        let t = Topology::new(Dims::new(3, 1, 2), vec![(0, 0), (2, 0)]).unwrap();
        assert_eq!(select_cda(Coord::new(1, 0, 0), &t, &[1, 0, 1, 0, 0, 0]), 0);
    }

    #[test]
    fn assignment_validation() {
        let t = Topology::new(Dims::new(2, 1, 2), vec![(0, 0), (1, 0)]).unwrap();
        assert!(ElevatorAssignment::nearest(&t).validate(&t).is_ok());
        assert!(ElevatorAssignment::all(&t).validate(&t).is_ok());
        let mut a = ElevatorAssignment::all(&t);
        a.subset_mut(1).clear();
        assert!(a.validate(&t).is_err());
        assert!(ElevatorAssignment::new(vec![vec![0]; 3]).validate(&t).is_err());
        assert!(ElevatorAssignment::new(vec![vec![0, 0], vec![0], vec![1], vec![2]]).validate(&t).is_err());
        assert_eq!(serde_json::to_string(&ElevatorAssignment::nearest(&t)).unwrap(), "[[0],[1],[0],[1]]");
    }

    #[test]
    fn params_validation() {
        assert!(AdeleParams { a: 1.5, ..Default::default() }.validate().is_err());
        assert!(AdeleParams { xi: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdeleParams { threshold: -1.0, ..Default::default() }.validate().is_err());
        assert_eq!("adele".parse::<Policy>().unwrap(), Policy::Adele);
        assert!("xy".parse::<Policy>().is_err());
    }
}
