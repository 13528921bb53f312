//! Command implementations. Each writes its artifacts under `out` and returns
//! the report it wrote.

use std::fs;
use std::path::Path;

use adele::engine::{latency_sweep, load_distribution, LoadDistribution, SimConfig, SimMetrics, Simulator, SweepResult};
use adele::optimizer::{amosa_optimize, optimize_placement, pick_solution, ArchiveSolution, ObjectiveModel};
use adele::selection::{ElevatorAssignment, Policy};
use adele::topology::{Dims, Topology};
use adele::traffic::frequency_matrix;
use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{set_path, Experiment};

/// Provenance written next to every artifact set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub seed: u64,
    pub config: Value,
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: Serialize>(out: &Path, name: &str, rows: &[T]) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_record(out: &Path, command: &str, exp: &Experiment) -> Result<()> {
    write_json(out, "run.json", &RunRecord { command: command.into(), seed: exp.seed(), config: exp.document.clone() })
}

/// Runs the optimizer on the experiment's topology and traffic.
fn optimize(exp: &Experiment, topology: &Topology) -> Result<Vec<ArchiveSolution>> {
    let traffic = frequency_matrix(&exp.sim.traffic, topology)?;
    Ok(amosa_optimize(topology, &traffic, &exp.amosa)?)
}

/// Subsets for `policy`: `None` for policies without one, otherwise the
/// inline assignment, the assignment file, or a fresh optimization (in that
/// order). A fresh result is saved as `assignment.json`.
pub fn resolve_assignment(exp: &Experiment, topology: &Topology, policy: Policy, out: &Path) -> Result<Option<ElevatorAssignment>> {
    if !policy.needs_assignment() {
        return Ok(None);
    }
    if let Some(a) = &exp.sim.assignment {
        return Ok(Some(a.clone()));
    }
    if let Some(a) = exp.read_assignment_file()? {
        return Ok(Some(a));
    }
    let archive = optimize(exp, topology).context("optimizing subsets")?;
    let chosen = pick_solution(&archive, exp.pick)?.assignment.clone();
    write_json(out, "assignment.json", &chosen)?;
    Ok(Some(chosen))
}

fn sim_for(exp: &Experiment, policy: Policy, assignment: Option<ElevatorAssignment>) -> SimConfig {
    let mut c = exp.sim.clone();
    c.policy = policy;
    c.assignment = assignment;
    c
}

// ------------------------------------------------------------------ placement

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementReport {
    pub topology: adele::topology::TopologyDoc,
    pub avg_distance: f64,
}

pub fn run_placement(exp: &Experiment, out: &Path) -> Result<PlacementReport> {
    let [x, y, layers] = exp.placement.dims;
    let dims = Dims::new(x, y, layers);
    // traffic matrices only depend on the grid, so any column works here
    let probe = Topology::new(dims, vec![(0, 0)])?;
    let traffic = frequency_matrix(&exp.sim.traffic, &probe)?;
    let columns = optimize_placement(dims, exp.placement.count, &traffic)?;
    let topology = Topology::new(dims, columns)?;
    let avg_distance = ObjectiveModel::new(&topology, &traffic)?.average_distance(&ElevatorAssignment::all(&topology));
    write_json(out, "topology.json", &topology.to_doc())?;
    write_record(out, "placement", exp)?;
    Ok(PlacementReport { topology: topology.to_doc(), avg_distance })
}

// ------------------------------------------------------------------ optimize

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub archive: Vec<ArchiveSolution>,
    pub chosen: ArchiveSolution,
    pub baseline: adele::optimizer::ObjectiveVector,
}

pub fn run_optimize(exp: &Experiment, out: &Path) -> Result<OptimizeReport> {
    let topology = exp.sim.topology.resolve()?;
    let archive = optimize(exp, &topology)?;
    write_json(out, "archive.json", &archive)?;
    let chosen = pick_solution(&archive, exp.pick)?.clone();
    write_json(out, "assignment.json", &chosen.assignment)?;
    write_record(out, "optimize", exp)?;
    let traffic = frequency_matrix(&exp.sim.traffic, &topology)?;
    let baseline = ObjectiveModel::new(&topology, &traffic)?.evaluate(&ElevatorAssignment::nearest(&topology));
    Ok(OptimizeReport { archive, chosen, baseline })
}

// ------------------------------------------------------------------ simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub config: Value,
    pub policy: Policy,
    pub assignment: Option<ElevatorAssignment>,
    pub metrics: SimMetrics,
    pub load_distribution: LoadDistribution,
}

fn simulate_with(exp: &Experiment, sim: SimConfig, log: Option<&Path>) -> Result<SimReport> {
    let topology = sim.validate()?;
    let simulator = Simulator::new(&sim)?;
    let metrics = match log {
        Some(path) => {
            let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            simulator.run_with_log(std::io::BufWriter::new(f))?
        }
        None => simulator.run()?,
    };
    let load_distribution = load_distribution(&metrics, &topology)?;
    Ok(SimReport {
        seed: sim.seed,
        config: exp.document.clone(),
        policy: sim.policy,
        assignment: sim.assignment,
        metrics,
        load_distribution,
    })
}

pub fn run_simulate(exp: &Experiment, out: &Path, log: Option<&Path>) -> Result<SimReport> {
    let topology = exp.sim.topology.resolve()?;
    if exp.sim.assignment.is_some() && !exp.sim.policy.needs_assignment() {
        bail!("policy `{}` does not use an elevator assignment; remove it", exp.sim.policy);
    }
    let assignment = resolve_assignment(exp, &topology, exp.sim.policy, out)?;
    let report = simulate_with(exp, sim_for(exp, exp.sim.policy, assignment), log)?;
    write_json(out, "metrics.json", &report)?;
    write_record(out, "simulate", exp)?;
    Ok(report)
}

// ------------------------------------------------------------------ sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: String,
    pub policy: Policy,
    pub injection_rate: f64,
    pub seed: u64,
    pub avg_latency: f64,
    pub max_latency: u64,
    pub throughput: f64,
    pub energy_per_flit: f64,
    pub delivered: u64,
    pub zero_load_latency: f64,
    pub saturation_rate: Option<f64>,
}

fn sweep_rows(parameter: &str, value: &str, policy: Policy, r: &SweepResult) -> Vec<SweepRow> {
    r.points
        .iter()
        .map(|p| SweepRow {
            parameter: parameter.into(),
            value: value.into(),
            policy,
            injection_rate: p.injection_rate,
            seed: p.seed,
            avg_latency: p.metrics.avg_latency,
            max_latency: p.metrics.max_latency,
            throughput: p.metrics.throughput,
            energy_per_flit: p.metrics.energy_per_flit,
            delivered: p.metrics.delivered,
            zero_load_latency: r.zero_load_latency,
            saturation_rate: r.saturation_rate,
        })
        .collect()
}

/// Latency sweep over `exp.rates`, optionally repeated for each value of one
/// config key (e.g. `adele.threshold`).
pub fn run_sweep(exp: &Experiment, vary: Option<(&str, &[Value])>, out: &Path) -> Result<Vec<SweepRow>> {
    let topology = exp.sim.topology.resolve()?;
    let variants: Vec<(String, String, Experiment)> = match vary {
        None => vec![(String::new(), String::new(), exp.clone())],
        Some((key, values)) => values
            .iter()
            .map(|v| {
                let mut doc = exp.document.clone();
                set_path(&mut doc, key, v.clone())?;
                let e = Experiment::from_document(doc).with_context(|| format!("{key} = {v}"))?;
                Ok((key.to_string(), v.to_string(), e))
            })
            .collect::<Result<_>>()?,
    };
    let mut rows = Vec::new();
    for (key, value, e) in &variants {
        let assignment = resolve_assignment(e, &topology, e.sim.policy, out)?;
        let r = latency_sweep(&sim_for(e, e.sim.policy, assignment), &e.rates)
            .with_context(|| if key.is_empty() { "sweep".to_string() } else { format!("sweep with {key} = {value}") })?;
        rows.extend(sweep_rows(key, value, e.sim.policy, &r));
    }
    write_csv(out, "sweep.csv", &rows)?;
    write_record(out, "sweep", exp)?;
    Ok(rows)
}

// ------------------------------------------------------------------ compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub policy: Policy,
    pub injection_rate: f64,
    pub avg_latency: f64,
    pub energy_per_flit: f64,
    pub max_elevator_load: f64,
    pub saturation_rate: Option<f64>,
    /// Percent changes against the first listed policy at the same rate.
    pub latency_delta_pct: f64,
    pub energy_delta_pct: f64,
    pub max_load_delta_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub seed: u64,
    pub config: Value,
    pub rows: Vec<CompareRow>,
}

fn delta_pct(value: f64, base: f64) -> f64 {
    if value == base {
        0.0
    } else {
        100.0 * (value - base) / base
    }
}

/// Matched sweeps (same seeds) for every listed policy. `nearest` and `cda`
/// run without subsets; `rr` and `adele` share the resolved assignment.
pub fn run_compare(exp: &Experiment, out: &Path) -> Result<CompareReport> {
    if exp.policies.len() < 2 {
        bail!("compare needs at least two policies, got {:?}", exp.policies);
    }
    let topology = exp.sim.topology.resolve()?;
    let shared = if exp.policies.iter().any(|p| p.needs_assignment()) {
        resolve_assignment(exp, &topology, Policy::Adele, out)?
    } else {
        None
    };
    let results: Vec<(Policy, SweepResult)> = exp
        .policies
        .par_iter()
        .map(|&policy| {
            let assignment = if policy.needs_assignment() { shared.clone() } else { None };
            latency_sweep(&sim_for(exp, policy, assignment), &exp.rates)
                .map(|r| (policy, r))
                .with_context(|| format!("policy `{policy}`"))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let base = &results[0].1;
    for (policy, r) in &results {
        for (p, b) in r.points.iter().zip(&base.points) {
            let load = load_distribution(&p.metrics, &topology)?.max();
            let base_load = load_distribution(&b.metrics, &topology)?.max();
            rows.push(CompareRow {
                policy: *policy,
                injection_rate: p.injection_rate,
                avg_latency: p.metrics.avg_latency,
                energy_per_flit: p.metrics.energy_per_flit,
                max_elevator_load: load,
                saturation_rate: r.saturation_rate,
                latency_delta_pct: delta_pct(p.metrics.avg_latency, b.metrics.avg_latency),
                energy_delta_pct: delta_pct(p.metrics.energy_per_flit, b.metrics.energy_per_flit),
                max_load_delta_pct: delta_pct(load, base_load),
            });
        }
    }
    let report = CompareReport { seed: exp.seed(), config: exp.document.clone(), rows };
    write_csv(out, "compare.csv", &report.rows)?;
    write_json(out, "compare.json", &report)?;
    write_record(out, "compare", exp)?;
    Ok(report)
}

// ------------------------------------------------------------------ pipeline

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub archive: Vec<ArchiveSolution>,
    pub chosen: ArchiveSolution,
    pub simulation: SimReport,
}

/// Optimize, pick one archive member, then simulate it. The configured policy
/// is used if it takes subsets, `adele` otherwise.
pub fn run_pipeline(exp: &Experiment, out: &Path) -> Result<PipelineReport> {
    write_record(out, "pipeline", exp)?;
    let topology = exp.sim.topology.resolve().context("pipeline setup")?;
    let archive = optimize(exp, &topology).context("optimize stage")?;
    write_json(out, "archive.json", &archive)?;
    let chosen = pick_solution(&archive, exp.pick).context("pick stage")?.clone();
    write_json(out, "assignment.json", &chosen.assignment)?;
    let policy = if exp.sim.policy.needs_assignment() { exp.sim.policy } else { Policy::Adele };
    let simulation =
        simulate_with(exp, sim_for(exp, policy, Some(chosen.assignment.clone())), None).context("simulate stage")?;
    write_json(out, "metrics.json", &simulation)?;
    Ok(PipelineReport { archive, chosen, simulation })
}
