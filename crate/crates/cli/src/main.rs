use std::path::PathBuf;

use adele_cli::commands::{run_compare, run_optimize, run_pipeline, run_placement, run_simulate, run_sweep};
use adele_cli::config::{apply_override, default_document, load_file, merge, set_path, topology_value, Experiment};
use adele_cli::text::{opt, table};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

/// Partially connected 3D NoC toolkit: elevator placement, offline subset
/// optimization, and cycle-level simulation of elevator-selection policies.
#[derive(Parser)]
#[command(name = "adele", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON config; keys mirror the simulation and optimizer settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for both simulation and optimization.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dotted-path override, e.g. `adele.xi=0.1`. Repeatable; applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Preset name (p_s1, p_s2, p_s3, p_m) or topology JSON file.
    #[arg(long, global = true)]
    topology: Option<String>,
    /// Traffic pattern: uniform, shuffle or trace:<path>.
    #[arg(long, global = true)]
    traffic: Option<String>,
    /// Injection rate in flits per node per cycle.
    #[arg(long, global = true)]
    pir: Option<f64>,
    /// Selection policy: nearest, rr, adele or cda.
    #[arg(long, global = true)]
    policy: Option<String>,
    #[arg(long, global = true)]
    warmup: Option<u64>,
    /// Measured cycles.
    #[arg(long, global = true)]
    cycles: Option<u64>,
    /// Subsets JSON for rr/adele, e.g. an assignment.json from `optimize`.
    #[arg(long, global = true)]
    assignment: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Choose elevator columns that minimize mean inter-layer distance.
    Placement {
        /// Grid as X,Y,L.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Number of elevators.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Run the subset optimizer; writes archive.json and assignment.json.
    Optimize {
        /// min_variance, min_distance or knee.
        #[arg(long)]
        pick: Option<String>,
    },
    /// Run one simulation; writes metrics.json.
    Simulate {
        /// Per-cycle CSV of injected/delivered/in-flight flits.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Latency against injection rate; writes sweep.csv.
    Sweep {
        /// Injection rates, comma separated.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        /// Repeat the sweep for each value of one key, e.g. adele.threshold=0,0.5,1.
        #[arg(long, value_name = "KEY=V1,V2,...")]
        vary: Option<String>,
    },
    /// Matched sweeps for several policies; writes compare.csv.
    Compare {
        /// Policies, comma separated; deltas are against the first.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
    },
    /// Optimize, pick a solution and simulate it.
    Pipeline {
        #[arg(long)]
        pick: Option<String>,
    },
}

fn resolve(global: &Global, command: &Command) -> Result<Experiment> {
    let mut doc = default_document();
    if let Some(path) = &global.config {
        merge(&mut doc, load_file(path)?);
    }
    let mut flags: Vec<(&str, Value)> = Vec::new();
    if let Some(t) = &global.topology {
        flags.push(("topology", topology_value(t)?));
    }
    if let Some(t) = &global.traffic {
        flags.push(("traffic.kind", json!(t)));
    }
    if let Some(r) = global.pir {
        flags.push(("traffic.injection_rate", json!(r)));
    }
    if let Some(p) = &global.policy {
        flags.push(("policy", json!(p)));
    }
    if let Some(w) = global.warmup {
        flags.push(("warmup_cycles", json!(w)));
    }
    if let Some(c) = global.cycles {
        flags.push(("measure_cycles", json!(c)));
    }
    if let Some(a) = &global.assignment {
        flags.push(("assignment_file", json!(a)));
    }
    if let Some(s) = global.seed {
        flags.push(("seed", json!(s)));
        flags.push(("amosa.seed", json!(s)));
    }
    match command {
        Command::Placement { dims, count } => {
            if let Some(d) = dims {
                flags.push(("placement.dims", json!(d)));
            }
            if let Some(c) = count {
                flags.push(("placement.count", json!(c)));
            }
        }
        Command::Optimize { pick } | Command::Pipeline { pick } => {
            if let Some(p) = pick {
                flags.push(("pick", json!(p)));
            }
        }
        Command::Sweep { rates, .. } => {
            if let Some(r) = rates {
                flags.push(("rates", json!(r)));
            }
        }
        Command::Compare { policies, rates } => {
            if let Some(p) = policies {
                flags.push(("policies", json!(p)));
            }
            if let Some(r) = rates {
                flags.push(("rates", json!(r)));
            }
        }
        Command::Simulate { .. } => {}
    }
    for (key, value) in flags {
        set_path(&mut doc, key, value)?;
    }
    for o in &global.overrides {
        apply_override(&mut doc, o)?;
    }
    Experiment::from_document(doc)
}

fn parse_vary(spec: &str) -> Result<(String, Vec<Value>)> {
    let (key, values) = spec.split_once('=').context("--vary expects KEY=V1,V2,...")?;
    let values = values
        .split(',')
        .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string())))
        .collect();
    Ok((key.to_string(), values))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let exp = resolve(&cli.global, &cli.command)?;
    let out = &cli.global.out;
    match &cli.command {
        Command::Placement { .. } => {
            let r = run_placement(&exp, out)?;
            println!("{}", serde_json::to_string(&r.topology)?);
            println!("mean inter-layer distance with all elevators: {:.4}", r.avg_distance);
        }
        Command::Optimize { .. } => {
            let r = run_optimize(&exp, out)?;
            let rows: Vec<Vec<String>> = r
                .archive
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let mark = if s == &r.chosen { "*" } else { "" };
                    vec![format!("{k}{mark}"), format!("{:.4}", s.objectives.variance), format!("{:.4}", s.objectives.avg_distance)]
                })
                .collect();
            print!("{}", table(&["member", "variance", "avg_distance"], &rows));
            println!(
                "nearest-elevator baseline: variance {:.4}, avg_distance {:.4}",
                r.baseline.variance, r.baseline.avg_distance
            );
        }
        Command::Simulate { log } => {
            let r = run_simulate(&exp, out, log.as_deref())?;
            let m = &r.metrics;
            let rows = vec![vec![
                r.policy.to_string(),
                format!("{:.2}", m.avg_latency),
                m.max_latency.to_string(),
                m.delivered.to_string(),
                format!("{:.5}", m.throughput),
                format!("{:.4}", m.energy_per_flit),
                format!("{:.3}", r.load_distribution.max()),
            ]];
            print!(
                "{}",
                table(&["policy", "avg_latency", "max_latency", "delivered", "throughput", "energy/flit", "max_elev_load"], &rows)
            );
        }
        Command::Sweep { vary, .. } => {
            let vary = vary.as_deref().map(parse_vary).transpose()?;
            let rows = run_sweep(&exp, vary.as_ref().map(|(k, v)| (k.as_str(), v.as_slice())), out)?;
            let text: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.value.clone(),
                        format!("{:.4}", r.injection_rate),
                        format!("{:.2}", r.avg_latency),
                        format!("{:.5}", r.throughput),
                        format!("{:.4}", r.energy_per_flit),
                        opt(r.saturation_rate),
                    ]
                })
                .collect();
            print!("{}", table(&["value", "rate", "avg_latency", "throughput", "energy/flit", "saturation"], &text));
        }
        Command::Compare { .. } => {
            let r = run_compare(&exp, out)?;
            let text: Vec<Vec<String>> = r
                .rows
                .iter()
                .map(|c| {
                    vec![
                        c.policy.to_string(),
                        format!("{:.4}", c.injection_rate),
                        format!("{:.2}", c.avg_latency),
                        format!("{:+.1}%", c.latency_delta_pct),
                        format!("{:.4}", c.energy_per_flit),
                        format!("{:+.1}%", c.energy_delta_pct),
                        format!("{:.3}", c.max_elevator_load),
                        opt(c.saturation_rate),
                    ]
                })
                .collect();
            print!(
                "{}",
                table(&["policy", "rate", "latency", "d_lat", "energy/flit", "d_energy", "max_load", "saturation"], &text)
            );
        }
        Command::Pipeline { .. } => {
            let r = run_pipeline(&exp, out)?;
            let m = &r.simulation.metrics;
            println!(
                "chosen: variance {:.4}, avg_distance {:.4} ({} archive members)",
                r.chosen.objectives.variance,
                r.chosen.objectives.avg_distance,
                r.archive.len()
            );
            println!(
                "{}: avg latency {:.2} cycles, energy/flit {:.4}, max elevator load {:.3}",
                r.simulation.policy,
                m.avg_latency,
                m.energy_per_flit,
                r.simulation.load_distribution.max()
            );
        }
    }
    eprintln!("artifacts in {}", out.display());
    Ok(())
}
