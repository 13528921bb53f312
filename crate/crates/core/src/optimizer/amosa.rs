//! Archived multi-objective simulated annealing over per-router elevator
//! subsets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objectives::{ObjectiveModel, ObjectiveVector};
use crate::error::{Error, Result};
use crate::selection::ElevatorAssignment;
use crate::topology::{ElevatorId, Topology};
use crate::traffic::TrafficMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmosaConfig {
    pub t_initial: f64,
    pub t_final: f64,
    pub cooling_ratio: f64,
    pub iterations_per_temp: usize,
    pub hard_limit: usize,
    pub soft_limit: usize,
    /// Allowed subset sizes; an upper bound of `None` means "all elevators".
    pub subset_min: usize,
    pub subset_max: Option<usize>,
    pub seed: u64,
}

impl Default for AmosaConfig {
    fn default() -> Self {
        AmosaConfig {
            t_initial: 100.0,
            t_final: 0.01,
            cooling_ratio: 0.95,
            iterations_per_temp: 200,
            hard_limit: 20,
            soft_limit: 60,
            subset_min: 1,
            subset_max: None,
            seed: 1,
        }
    }
}

impl AmosaConfig {
    /// Inclusive subset-size bounds for a network with `elevators` elevators.
    pub fn subset_range(&self, elevators: usize) -> (usize, usize) {
        (self.subset_min, self.subset_max.unwrap_or(elevators).min(elevators))
    }

    pub fn validate(&self, elevators: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.t_final > 0.0 && self.t_final < self.t_initial) {
            return bad(format!("need 0 < t_final < t_initial, got {} and {}", self.t_final, self.t_initial));
        }
        if !(self.cooling_ratio > 0.0 && self.cooling_ratio < 1.0) {
            return bad(format!("cooling_ratio must be in (0,1), got {}", self.cooling_ratio));
        }
        if self.iterations_per_temp == 0 {
            return bad("iterations_per_temp must be positive".into());
        }
        if self.hard_limit == 0 || self.soft_limit < self.hard_limit {
            return bad(format!(
                "need 1 <= hard_limit <= soft_limit, got {} and {}",
                self.hard_limit, self.soft_limit
            ));
        }
        let max = self.subset_max.unwrap_or(elevators);
        if self.subset_min < 1 || self.subset_min > max || max > elevators {
            return bad(format!("subset size range [{}, {max}] invalid for {elevators} elevators", self.subset_min));
        }
        Ok(())
    }
}

/// One archive member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveSolution {
    pub objectives: ObjectiveVector,
    #[serde(rename = "subsets")]
    pub assignment: ElevatorAssignment,
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Add,
    Remove,
    Swap,
}

fn feasible(len: usize, mv: Move, elevators: usize, min: usize, max: usize) -> bool {
    match mv {
        Move::Add => len < max && len < elevators,
        Move::Remove => len > min,
        Move::Swap => len < elevators,
    }
}

/// Neighbourhood move: on a random router, add a non-member, drop a member
/// or swap one for the other. Infeasible draws are redrawn. Subsets are kept
/// sorted. Returns the input unchanged when no router has a legal move.
pub fn perturb<R: Rng + ?Sized>(
    assignment: &ElevatorAssignment,
    elevators: usize,
    (min, max): (usize, usize),
    rng: &mut R,
) -> ElevatorAssignment {
    let mut out = assignment.clone();
    let moves = [Move::Add, Move::Remove, Move::Swap];
    let any_legal = out
        .subsets()
        .iter()
        .any(|s| moves.iter().any(|&m| feasible(s.len(), m, elevators, min, max)));
    if out.is_empty() || !any_legal {
        return out;
    }
    loop {
        let router = rng.gen_range(0..out.len());
        let mv = moves[rng.gen_range(0..3)];
        let subset = out.subset_mut(router);
        if !feasible(subset.len(), mv, elevators, min, max) {
            continue;
        }
        let outside: Vec<ElevatorId> = (0..elevators).filter(|e| !subset.contains(e)).collect();
        match mv {
            Move::Add => subset.push(*outside.choose(rng).expect("feasible add")),
            Move::Remove => {
                let i = rng.gen_range(0..subset.len());
                subset.remove(i);
            }
            Move::Swap => {
                let i = rng.gen_range(0..subset.len());
                subset[i] = *outside.choose(rng).expect("feasible swap");
            }
        }
        subset.sort_unstable();
        return out;
    }
}

/// Amount of domination between two objective vectors, normalized by the
/// per-objective `ranges`.
fn amount_of_domination(a: &ObjectiveVector, b: &ObjectiveVector, ranges: [f64; 2]) -> f64 {
    let (a, b) = (a.as_array(), b.as_array());
    let mut prod = 1.0;
    for k in 0..2 {
        if a[k] != b[k] && ranges[k] > 0.0 {
            prod *= (a[k] - b[k]).abs() / ranges[k];
        }
    }
    prod
}

pub fn is_mutually_nondominated(archive: &[ArchiveSolution]) -> bool {
    archive.iter().enumerate().all(|(i, a)| {
        archive.iter().enumerate().all(|(j, b)| i == j || !a.objectives.dominates(&b.objectives))
    })
}

/// Keeps `keep` members spread over the front by farthest-point selection in
/// range-normalized objective space, starting from both extremes.
fn cluster(archive: &mut Vec<ArchiveSolution>, keep: usize) {
    if archive.len() <= keep {
        return;
    }
    let pts: Vec<[f64; 2]> = archive.iter().map(|s| s.objectives.as_array()).collect();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let norm: Vec<[f64; 2]> = pts
        .iter()
        .map(|p| {
            let mut q = [0.0; 2];
            for k in 0..2 {
                q[k] = if hi[k] > lo[k] { (p[k] - lo[k]) / (hi[k] - lo[k]) } else { 0.0 };
            }
            q
        })
        .collect();
    let argmin = |k: usize| {
        (0..pts.len())
            .min_by(|&a, &b| pts[a][k].total_cmp(&pts[b][k]).then(a.cmp(&b)))
            .expect("non-empty")
    };
    let mut chosen = vec![argmin(0)];
    let other = argmin(1);
    if keep > 1 && other != chosen[0] {
        chosen.push(other);
    }
    let dist = |a: usize, b: usize| {
        let dx = norm[a][0] - norm[b][0];
        let dy = norm[a][1] - norm[b][1];
        dx * dx + dy * dy
    };
    let mut nearest: Vec<f64> = (0..pts.len())
        .map(|i| chosen.iter().map(|&c| dist(i, c)).fold(f64::INFINITY, f64::min))
        .collect();
    while chosen.len() < keep {
        let next = (0..pts.len())
            .filter(|i| !chosen.contains(i))
            .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a)))
            .expect("more points than kept");
        chosen.push(next);
        for i in 0..pts.len() {
            nearest[i] = nearest[i].min(dist(i, next));
        }
    }
    chosen.sort_unstable();
    let mut it = chosen.into_iter().peekable();
    let mut idx = 0;
    archive.retain(|_| {
        let keep_it = it.peek() == Some(&idx);
        if keep_it {
            it.next();
        }
        idx += 1;
        keep_it
    });
}

/// Inserts `candidate` unless an identical objective vector is already
/// archived, evicting members it dominates.
fn archive_insert(archive: &mut Vec<ArchiveSolution>, candidate: ArchiveSolution) {
    if archive.iter().any(|s| s.objectives == candidate.objectives) {
        return;
    }
    archive.retain(|s| !candidate.objectives.dominates(&s.objectives));
    archive.push(candidate);
}

fn accept_probability(delta: f64, temperature: f64) -> f64 {
    1.0 / (1.0 + (delta / temperature).exp())
}

/// Elevator-First's singleton subsets, widened by next-nearest elevators up to
/// `min` members when the configuration forbids singletons.
fn initial_assignment(topology: &Topology, min: usize) -> ElevatorAssignment {
    let subsets = topology
        .coords()
        .map(|c| {
            let mut order: Vec<ElevatorId> = (0..topology.elevator_count()).collect();
            order.sort_by_key(|&e| (topology.distance_to_column(c, e), e));
            let mut s: Vec<ElevatorId> = order.into_iter().take(min.max(1)).collect();
            s.sort_unstable();
            s
        })
        .collect();
    ElevatorAssignment::new(subsets)
}

/// Runs the annealing search and returns the final non-dominated archive,
/// sorted by variance ascending.
pub fn amosa_optimize(topology: &Topology, traffic: &TrafficMatrix, config: &AmosaConfig) -> Result<Vec<ArchiveSolution>> {
    let ne = topology.elevator_count();
    config.validate(ne)?;
    let range = config.subset_range(ne);
    let model = ObjectiveModel::new(topology, traffic)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let start = initial_assignment(topology, range.0);
    let mut current = ArchiveSolution { objectives: model.evaluate(&start), assignment: start };
    let mut archive = vec![current.clone()];

    let mut temperature = config.t_initial;
    while temperature > config.t_final {
        for _ in 0..config.iterations_per_temp {
            let assignment = perturb(&current.assignment, ne, range, &mut rng);
            let new = ArchiveSolution { objectives: model.evaluate(&assignment), assignment };
            let (nv, cv) = (new.objectives, current.objectives);

            let mut lo = [nv.variance.min(cv.variance), nv.avg_distance.min(cv.avg_distance)];
            let mut hi = [nv.variance.max(cv.variance), nv.avg_distance.max(cv.avg_distance)];
            for s in &archive {
                let p = s.objectives.as_array();
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            let ranges = [hi[0] - lo[0], hi[1] - lo[1]];
            let dominators: Vec<usize> =
                (0..archive.len()).filter(|&i| archive[i].objectives.dominates(&nv)).collect();
            let dom_sum: f64 = dominators.iter().map(|&i| amount_of_domination(&archive[i].objectives, &nv, ranges)).sum();

            if cv.dominates(&nv) {
                let k = dominators.len() as f64;
                let delta = (dom_sum + amount_of_domination(&cv, &nv, ranges)) / (k + 1.0);
                if rng.gen_bool(accept_probability(delta, temperature)) {
                    current = new;
                }
            } else if nv.dominates(&cv) {
                if dominators.is_empty() {
                    archive_insert(&mut archive, new.clone());
                    current = new;
                } else {
                    let (best, delta_min) = dominators
                        .iter()
                        .map(|&i| (i, amount_of_domination(&archive[i].objectives, &nv, ranges)))
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .expect("non-empty dominators");
                    if rng.gen_bool(1.0 / (1.0 + (-delta_min).exp())) {
                        current = archive[best].clone();
                    } else {
                        current = new;
                    }
                }
            } else if dominators.is_empty() {
                archive_insert(&mut archive, new.clone());
                current = new;
            } else {
                let delta = dom_sum / dominators.len() as f64;
                if rng.gen_bool(accept_probability(delta, temperature)) {
                    current = new;
                }
            }
            if archive.len() > config.soft_limit {
                cluster(&mut archive, config.hard_limit);
            }
            debug_assert!(is_mutually_nondominated(&archive));
        }
        temperature *= config.cooling_ratio;
    }
    cluster(&mut archive, config.hard_limit);
    archive.sort_by(|a, b| {
        a.objectives
            .variance
            .total_cmp(&b.objectives.variance)
            .then(a.objectives.avg_distance.total_cmp(&b.objectives.avg_distance))
    });
    Ok(archive)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickStrategy {
    MinVariance,
    MinDistance,
    /// Farthest from the (worst variance, worst distance) corner after
    /// normalizing both objectives to the archive's range.
    Knee,
}

impl std::str::FromStr for PickStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_variance" => Ok(PickStrategy::MinVariance),
            "min_distance" => Ok(PickStrategy::MinDistance),
            "knee" => Ok(PickStrategy::Knee),
            _ => Err(Error::InvalidConfig(format!("unknown strategy `{s}` (min_variance|min_distance|knee)"))),
        }
    }
}

pub fn pick_solution(archive: &[ArchiveSolution], strategy: PickStrategy) -> Result<&ArchiveSolution> {
    if archive.is_empty() {
        return Err(Error::EmptyArchive);
    }
    let by = |f: &dyn Fn(&ObjectiveVector) -> [f64; 2]| {
        archive
            .iter()
            .min_by(|a, b| {
                let (x, y) = (f(&a.objectives), f(&b.objectives));
                x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1]))
            })
            .expect("non-empty")
    };
    Ok(match strategy {
        PickStrategy::MinVariance => by(&|o| [o.variance, o.avg_distance]),
        PickStrategy::MinDistance => by(&|o| [o.avg_distance, o.variance]),
        PickStrategy::Knee => {
            let lo_v = archive.iter().map(|s| s.objectives.variance).fold(f64::INFINITY, f64::min);
            let hi_v = archive.iter().map(|s| s.objectives.variance).fold(f64::NEG_INFINITY, f64::max);
            let lo_d = archive.iter().map(|s| s.objectives.avg_distance).fold(f64::INFINITY, f64::min);
            let hi_d = archive.iter().map(|s| s.objectives.avg_distance).fold(f64::NEG_INFINITY, f64::max);
            let norm = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            let score = |o: &ObjectiveVector| {
                let dv = 1.0 - norm(o.variance, lo_v, hi_v);
                let dd = 1.0 - norm(o.avg_distance, lo_d, hi_d);
                dv * dv + dd * dd
            };
            // max score; first member wins ties
            let mut best = &archive[0];
            for s in &archive[1..] {
                if score(&s.objectives) > score(&best.objectives) {
                    best = s;
                }
            }
            best
        }
    })
}
