mod common;

use adele::engine::{simulate, SimConfig, Simulator, BUFFER_DEPTH};
use adele::selection::{ElevatorAssignment, Policy};
use adele::topology::{Dims, Topology};
use adele::traffic::{write_trace, TraceRecord, TrafficGenerator, TrafficKind, TrafficSource};
use common::path_hops;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn single_packet(t: &Topology, src: usize, dst: usize, length: usize, policy: Policy) -> adele::engine::SimMetrics {
    let mut c = SimConfig::new(t, TrafficSource::new(TrafficKind::Uniform, 0.0), policy);
    c.warmup_cycles = 0;
    c.measure_cycles = 10;
    c.drain_cycles = Some(1000);
    if policy.needs_assignment() {
        c = c.with_assignment(ElevatorAssignment::all(t));
    }
    let record = TraceRecord { src, dst, length, cycle: 0 };
    let gen = TrafficGenerator::from_records(&c.traffic, t.node_count(), vec![record]).unwrap();
    Simulator::with_traffic(&c, gen).unwrap().run().unwrap()
}

#[test]
fn zero_rate_moves_nothing() {
    let t = Topology::preset("p_s2").unwrap();
    let mut c = SimConfig::new(&t, TrafficSource::new(TrafficKind::Uniform, 0.0), Policy::Nearest);
    c.warmup_cycles = 100;
    c.measure_cycles = 1000;
    let m = simulate(&c).unwrap();
    assert_eq!((m.injected, m.delivered, m.delivered_flits), (0, 0, 0));
    assert_eq!(m.energy_total, 0.0);
    assert!(m.router_load.iter().all(|&l| l == 0));
}

#[test]
fn one_hop_packet_takes_hop_plus_length() {
    let t = Topology::preset("p_s2").unwrap();
    let m = single_packet(&t, 0, 1, 10, Policy::Nearest);
    assert_eq!(m.delivered, 1);
    assert_eq!(m.avg_latency, 11.0);
    assert_eq!(m.max_latency, 11);
    assert_eq!(m.horizontal_hops, 10);
    assert_eq!(m.vertical_hops, 0);
    // each flit crosses the source switch and ejects at the destination
    assert_eq!(m.router_traversals, 20);
}

#[test]
fn inter_layer_packet_accounting() {
    // elevator two hops from both ends, one layer apart
    let t = Topology::new(Dims::new(4, 4, 2), vec![(0, 0)]).unwrap();
    let src = t.node_id(adele::topology::Coord::new(1, 1, 0));
    let dst = t.node_id(adele::topology::Coord::new(1, 1, 1));
    let len = 7;
    let m = single_packet(&t, src, dst, len, Policy::Nearest);
    assert_eq!(m.delivered, 1);
    assert_eq!(m.avg_latency, (5 + len) as f64);
    assert_eq!(m.elevator_traversals, vec![1]);
    assert_eq!(m.horizontal_hops, 4 * len as u64);
    assert_eq!(m.vertical_hops, len as u64);
    assert_eq!(m.router_traversals, 6 * len as u64);
    let e = m.router_traversals as f64 * 0.8 + m.horizontal_hops as f64 * 0.4 + m.vertical_hops as f64 * 0.2;
    assert_eq!(m.energy_total, e);
    assert_eq!(m.energy_per_flit, e / len as f64);
}

#[test]
fn contention_free_latency_matches_path_length() {
    let t = Topology::preset("p_s1").unwrap();
    let dims = t.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let src = rng.gen_range(0..t.node_count());
        let dst = (src + rng.gen_range(1..t.node_count())) % t.node_count();
        let len = rng.gen_range(1..=30);
        let m = single_packet(&t, src, dst, len, Policy::Nearest);
        let (cs, cd) = (t.coord(src), t.coord(dst));
        let hops = if cs.z == cd.z {
            (cs.x.abs_diff(cd.x) + cs.y.abs_diff(cd.y)) as i64
        } else {
            let e = t.nearest_elevator(cs);
            path_hops(dims, src, dst, t.elevator_position(e).unwrap())
        };
        assert_eq!(m.max_latency as i64, hops + len as i64, "{cs} -> {cd}, {len} flits");
    }
}

#[test]
fn conservation_and_credits_hold_every_cycle_under_load() {
    let t = Topology::preset("p_s1").unwrap();
    for policy in Policy::ALL {
        let mut c = SimConfig::new(&t, TrafficSource::new(TrafficKind::Uniform, 0.2), policy);
        c.warmup_cycles = 0;
        c.measure_cycles = 3000;
        if policy.needs_assignment() {
            c = c.with_assignment(ElevatorAssignment::all(&t));
        }
        let mut sim = Simulator::new(&c).unwrap();
        let mut peak = 0;
        for _ in 0..3000 {
            sim.step().unwrap();
            sim.check_invariants().unwrap();
            peak = peak.max(sim.in_flight_flits());
        }
        assert!(peak > 0);
        assert!(sim.counters().delivered_packets > 100, "{policy}");
        assert!(peak as usize <= t.node_count() * 14 * BUFFER_DEPTH);
    }
}

#[test]
fn identical_seeds_give_identical_metrics() {
    let t = Topology::preset("p_s1").unwrap();
    let mut c = SimConfig::new(&t, TrafficSource::new(TrafficKind::Uniform, 0.05), Policy::Adele)
        .with_assignment(ElevatorAssignment::all(&t));
    c.warmup_cycles = 500;
    c.measure_cycles = 5000;
    c.seed = 42;
    let a = serde_json::to_string(&simulate(&c).unwrap()).unwrap();
    let b = serde_json::to_string(&simulate(&c).unwrap()).unwrap();
    assert_eq!(a, b);
    c.seed = 43;
    let other = serde_json::to_string(&simulate(&c).unwrap()).unwrap();
    assert_ne!(a, other);
}

#[test]
fn trace_file_replays_through_config() {
    let t = Topology::preset("p_s2").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let records: Vec<TraceRecord> =
        (0..50).map(|k| TraceRecord { src: k % 64, dst: (k * 7 + 1) % 64, length: 5, cycle: k as u64 * 3 }).collect();
    let records: Vec<_> = records.into_iter().filter(|r| r.src != r.dst).collect();
    write_trace(std::fs::File::create(&path).unwrap(), &records).unwrap();
    let mut c = SimConfig::new(&t, TrafficSource::new(TrafficKind::Trace(path), 0.0), Policy::Cda);
    c.warmup_cycles = 0;
    c.measure_cycles = 1000;
    let m = simulate(&c).unwrap();
    assert_eq!(m.injected, records.len() as u64);
    assert_eq!(m.delivered, records.len() as u64);
    assert_eq!(m.delivered_flits, 5 * records.len() as u64);
}

#[test]
fn policy_and_assignment_must_agree() {
    let t = Topology::preset("p_s2").unwrap();
    let c = SimConfig::new(&t, TrafficSource::default(), Policy::Rr);
    assert!(simulate(&c).is_err());
    let c = SimConfig::new(&t, TrafficSource::default(), Policy::Nearest).with_assignment(ElevatorAssignment::all(&t));
    assert!(simulate(&c).is_err());
}

#[test]
fn run_with_log_writes_one_row_per_cycle() {
    let t = Topology::preset("p_s2").unwrap();
    let mut c = SimConfig::new(&t, TrafficSource::new(TrafficKind::Uniform, 0.05), Policy::Nearest);
    c.warmup_cycles = 10;
    c.measure_cycles = 200;
    let mut log = Vec::new();
    let m = Simulator::new(&c).unwrap().run_with_log(&mut log).unwrap();
    let text = String::from_utf8(log).unwrap();
    assert_eq!(text.lines().count() as u64, m.cycles + 1);
    assert!(text.starts_with("cycle,injected_flits,delivered_flits,in_flight\n"));
}
