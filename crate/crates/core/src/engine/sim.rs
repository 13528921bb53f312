use std::collections::VecDeque;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::SimMetrics;
use super::SimConfig;
use crate::error::{Error, Result};
use crate::routing::{route, PacketRouteState, Port, RouteDecision, Vn};
use crate::selection::{select_cda, select_nearest, selection_latency, Policy, SelectionCostSample, SelectorState};
use crate::topology::{Coord, ElevatorId, NodeId, Topology};
use crate::traffic::{PacketDescriptor, TrafficGenerator};

/// Flits per input virtual channel.
pub const BUFFER_DEPTH: usize = 4;

const VCS: usize = 2;
const SLOTS: usize = Port::COUNT * VCS;
const LOCAL: usize = Port::Local.index();
// cycles without any flit movement, while flits are buffered, before the
// run is declared deadlocked
const STALL_LIMIT: u64 = 20_000;

type PacketId = u32;

#[derive(Debug, Clone, Copy, Default)]
struct Flit {
    packet: PacketId,
    head: bool,
    tail: bool,
}

/// Fixed-capacity FIFO.
#[derive(Debug, Clone, Copy, Default)]
struct FlitQueue {
    buf: [Flit; BUFFER_DEPTH],
    start: u8,
    len: u8,
}

impl FlitQueue {
    fn len(&self) -> usize {
        self.len as usize
    }

    fn front(&self) -> Option<&Flit> {
        (self.len > 0).then(|| &self.buf[self.start as usize])
    }

    fn push(&mut self, f: Flit) {
        debug_assert!(self.len() < BUFFER_DEPTH);
        let idx = (self.start as usize + self.len()) % BUFFER_DEPTH;
        self.buf[idx] = f;
        self.len += 1;
    }

    fn pop(&mut self) -> Flit {
        debug_assert!(self.len > 0);
        let f = self.buf[self.start as usize];
        self.start = ((self.start as usize + 1) % BUFFER_DEPTH) as u8;
        self.len -= 1;
        f
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct InputVc {
    queue: FlitQueue,
    // output slot (port·2 + vn) held by the packet at the front
    route: Option<u8>,
}

#[derive(Debug, Clone, Copy)]
struct OutputVc {
    // input slot that owns this output until its tail passes
    owner: Option<u8>,
    credits: u8,
}

#[derive(Debug, Clone)]
struct Router {
    coord: Coord,
    inputs: [InputVc; SLOTS],
    outputs: [OutputVc; SLOTS],
    in_rr: [u8; Port::COUNT],
    out_rr: [u8; Port::COUNT],
    // neighbour router through each port
    neighbour: [Option<NodeId>; Port::COUNT],
    occupancy: u32,
}

#[derive(Debug, Clone)]
struct Packet {
    src: NodeId,
    dst: NodeId,
    dst_coord: Coord,
    length: u32,
    created: u64,
    measured: bool,
    route: PacketRouteState,
    elevator: Option<ElevatorId>,
    t_head: u64,
    router_traversals: u64,
    horizontal_hops: u64,
    vertical_hops: u64,
    counted_elevator: bool,
}

#[derive(Debug, Clone, Copy)]
struct Move {
    router: u32,
    in_slot: u8,
    out_slot: u8,
}

#[derive(Debug, Default)]
struct Injection {
    queue: VecDeque<PacketDescriptor>,
    // packet being streamed into the local buffer and flits already sent
    active: Option<(PacketId, u32)>,
}

/// Running counters exposed for invariant checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub injected_flits: u64,
    pub delivered_flits: u64,
    pub delivered_packets: u64,
    pub generated_packets: u64,
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Step-wise simulator; [`super::simulate`] wraps it for whole runs.
pub struct Simulator {
    topology: Topology,
    policy: Policy,
    warmup: u64,
    measure: u64,
    drain: u64,
    energy: super::EnergyModel,
    traffic: TrafficGenerator,
    traffic_rng: ChaCha8Rng,
    selectors: Vec<Option<SelectorState>>,
    routers: Vec<Router>,
    packets: Vec<Packet>,
    injection: Vec<Injection>,
    moves: Vec<Move>,
    occupancy_snapshot: Vec<u32>,
    cycle: u64,
    last_progress: u64,
    counters: Counters,
    // measurement
    measured_outstanding: u64,
    m_injected: u64,
    m_delivered: u64,
    m_delivered_flits: u64,
    m_latency_sum: u64,
    m_latency_max: u64,
    m_router_traversals: u64,
    m_horizontal: u64,
    m_vertical: u64,
    elevator_traversals: Vec<u64>,
    router_load: Vec<u64>,
}

impl Simulator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let topology = config.validate()?;
        let traffic = TrafficGenerator::new(&config.traffic, topology.node_count())?;
        Self::build(config, topology, traffic)
    }

    /// Uses `traffic` instead of the generator described by the config.
    pub fn with_traffic(config: &SimConfig, traffic: TrafficGenerator) -> Result<Self> {
        let topology = config.validate()?;
        Self::build(config, topology, traffic)
    }

    fn build(config: &SimConfig, topology: Topology, traffic: TrafficGenerator) -> Result<Self> {
        let n = topology.node_count();
        let selectors = match (&config.assignment, config.policy.needs_assignment()) {
            (Some(a), true) => (0..n)
                .map(|i| SelectorState::new(a.subset(i).to_vec(), config.adele, rng_stream(config.seed, 1 + i as u64)).map(Some))
                .collect::<Result<Vec<_>>>()?,
            _ => vec![None; n],
        };
        let routers = (0..n)
            .map(|id| {
                let coord = topology.coord(id);
                let mut neighbour = [None; Port::COUNT];
                let mut outputs = [OutputVc { owner: None, credits: 0 }; SLOTS];
                for p in Port::ALL {
                    if p == Port::Local {
                        continue;
                    }
                    neighbour[p.index()] = p.step(coord, &topology).map(|c| topology.node_id(c));
                    if neighbour[p.index()].is_some() {
                        for v in 0..VCS {
                            outputs[p.index() * VCS + v].credits = BUFFER_DEPTH as u8;
                        }
                    }
                }
                Router {
                    coord,
                    inputs: [InputVc::default(); SLOTS],
                    outputs,
                    in_rr: [0; Port::COUNT],
                    out_rr: [0; Port::COUNT],
                    neighbour,
                    occupancy: 0,
                }
            })
            .collect();
        Ok(Simulator {
            policy: config.policy,
            warmup: config.warmup_cycles,
            measure: config.measure_cycles,
            drain: config.drain_limit(),
            energy: config.energy,
            traffic,
            traffic_rng: rng_stream(config.seed, 0),
            selectors,
            routers,
            packets: Vec::new(),
            injection: (0..n).map(|_| Injection::default()).collect(),
            moves: Vec::with_capacity(n * Port::COUNT),
            occupancy_snapshot: vec![0; n],
            cycle: 0,
            last_progress: 0,
            counters: Counters::default(),
            measured_outstanding: 0,
            m_injected: 0,
            m_delivered: 0,
            m_delivered_flits: 0,
            m_latency_sum: 0,
            m_latency_max: 0,
            m_router_traversals: 0,
            m_horizontal: 0,
            m_vertical: 0,
            elevator_traversals: vec![0; topology.elevator_count()],
            router_load: vec![0; n],
            topology,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Flits currently held in router buffers.
    pub fn in_flight_flits(&self) -> u64 {
        self.routers.iter().map(|r| u64::from(r.occupancy)).sum()
    }

    /// Packets generated but still waiting to enter the network.
    pub fn queued_packets(&self) -> usize {
        self.injection.iter().map(|i| i.queue.len()).sum()
    }

    fn in_window(&self) -> bool {
        self.cycle >= self.warmup && self.cycle < self.warmup + self.measure
    }

    /// Verifies flit conservation, buffer bounds and credit accounting.
    pub fn check_invariants(&self) -> Result<()> {
        let in_flight = self.in_flight_flits();
        let c = self.counters;
        if c.injected_flits != c.delivered_flits + in_flight {
            return Err(Error::Simulation(format!(
                "flit conservation broken at cycle {}: injected {} != delivered {} + in flight {in_flight}",
                self.cycle, c.injected_flits, c.delivered_flits
            )));
        }
        for (id, r) in self.routers.iter().enumerate() {
            let occ: usize = r.inputs.iter().map(|i| i.queue.len()).sum();
            if occ as u32 != r.occupancy {
                return Err(Error::Simulation(format!("router {id} occupancy counter out of sync")));
            }
            for p in 0..Port::COUNT {
                let Some(nb) = r.neighbour[p] else { continue };
                let back = Port::from_index(p).opposite().index();
                for v in 0..VCS {
                    let downstream = self.routers[nb].inputs[back * VCS + v].queue.len();
                    let credits = r.outputs[p * VCS + v].credits as usize;
                    if downstream + credits != BUFFER_DEPTH {
                        return Err(Error::Simulation(format!(
                            "router {id} port {} vc {v}: {credits} credits but {downstream} flits downstream",
                            Port::from_index(p)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Which output slot the front flit of `slot` wants, and whether it is
    /// allowed to go this cycle.
    fn request(&self, r: &Router, slot: usize) -> Result<Option<u8>> {
        let ivc = &r.inputs[slot];
        let Some(flit) = ivc.queue.front() else { return Ok(None) };
        let out = match ivc.route {
            Some(out) => out,
            None => {
                debug_assert!(flit.head, "body flit without an allocated route");
                let pkt = &self.packets[flit.packet as usize];
                let d = route(r.coord, pkt.dst_coord, &pkt.route, &self.topology)?;
                let out = (d.output_port.index() * VCS + d.virtual_network.index()) as u8;
                if r.outputs[out as usize].owner.is_some() {
                    return Ok(None);
                }
                if d.output_port != Port::Local && r.neighbour[d.output_port.index()].is_none() {
                    return Err(Error::RoutingState(format!(
                        "router {} routed packet {} off the mesh through {}",
                        r.coord, flit.packet, d.output_port
                    )));
                }
                out
            }
        };
        let port = out as usize / VCS;
        if port != LOCAL && r.outputs[out as usize].credits == 0 {
            return Ok(None);
        }
        Ok(Some(out))
    }

    fn allocate(&mut self) -> Result<()> {
        self.moves.clear();
        for id in 0..self.routers.len() {
            let r = &self.routers[id];
            if r.occupancy == 0 {
                continue;
            }
            let mut requests: [Option<(u8, u8)>; Port::COUNT] = [None; Port::COUNT];
            let mut any = false;
            for p in 0..Port::COUNT {
                for k in 0..VCS {
                    let v = (r.in_rr[p] as usize + k) % VCS;
                    let slot = p * VCS + v;
                    if let Some(out) = self.request(r, slot)? {
                        requests[p] = Some((slot as u8, out));
                        any = true;
                        break;
                    }
                }
            }
            if !any {
                continue;
            }
            let mut grants: [Option<(u8, u8)>; Port::COUNT] = [None; Port::COUNT];
            for o in 0..Port::COUNT {
                let start = r.out_rr[o] as usize;
                for k in 0..Port::COUNT {
                    let p = (start + k) % Port::COUNT;
                    if let Some((slot, out)) = requests[p] {
                        if out as usize / VCS == o {
                            grants[o] = Some((slot, out));
                            break;
                        }
                    }
                }
            }
            let r = &mut self.routers[id];
            for (o, g) in grants.iter().enumerate() {
                if let Some((slot, out)) = *g {
                    let p = slot as usize / VCS;
                    r.in_rr[p] = ((slot as usize % VCS + 1) % VCS) as u8;
                    r.out_rr[o] = ((p + 1) % Port::COUNT) as u8;
                    self.moves.push(Move { router: id as u32, in_slot: slot, out_slot: out });
                }
            }
        }
        Ok(())
    }

    fn commit(&mut self) -> Result<()> {
        let measuring = self.in_window();
        for i in 0..self.moves.len() {
            let Move { router, in_slot, out_slot } = self.moves[i];
            let id = router as usize;
            let (in_port, out_port) = (in_slot as usize / VCS, out_slot as usize / VCS);
            let out_vn = out_slot as usize % VCS;

            let r = &mut self.routers[id];
            let flit = r.inputs[in_slot as usize].queue.pop();
            r.occupancy -= 1;
            if flit.head {
                r.inputs[in_slot as usize].route = Some(out_slot);
                r.outputs[out_slot as usize].owner = Some(in_slot);
            }
            if flit.tail {
                r.inputs[in_slot as usize].route = None;
                r.outputs[out_slot as usize].owner = None;
            }
            let upstream = r.neighbour[in_port];
            let downstream = r.neighbour[out_port];
            if out_port != LOCAL {
                r.outputs[out_slot as usize].credits -= 1;
            }
            if measuring {
                self.router_load[id] += 1;
            }
            if in_port != LOCAL {
                let up = upstream.expect("flit arrived through a connected port");
                let back = Port::from_index(in_port).opposite().index();
                self.routers[up].outputs[back * VCS + in_slot as usize % VCS].credits += 1;
            }

            let port = Port::from_index(out_port);
            let pkt = &mut self.packets[flit.packet as usize];
            pkt.router_traversals += 1;
            if port.is_horizontal() {
                pkt.horizontal_hops += 1;
            } else if port.is_vertical() {
                pkt.vertical_hops += 1;
            }
            if flit.head {
                let vn = if out_vn == 0 { Vn::Vn0 } else { Vn::Vn1 };
                pkt.route.advance(RouteDecision { output_port: port, virtual_network: vn });
                if port.is_vertical() && !pkt.counted_elevator {
                    pkt.counted_elevator = true;
                    if pkt.measured {
                        let e = pkt.elevator.expect("inter-layer packet has an elevator");
                        self.elevator_traversals[e] += 1;
                    }
                }
                if in_port == LOCAL && id == pkt.src {
                    pkt.t_head = self.cycle;
                }
            }
            if flit.tail && in_port == LOCAL && id == pkt.src {
                if let (Some(e), Some(sel)) = (pkt.elevator, self.selectors[id].as_mut()) {
                    let t = selection_latency(SelectionCostSample {
                        t_head: pkt.t_head,
                        t_tail: self.cycle + 1,
                        length: u64::from(pkt.length),
                    })?;
                    sel.update_cost(e, t)?;
                }
            }

            if port == Port::Local {
                if id != pkt.dst {
                    return Err(Error::Simulation(format!("packet {} ejected at {id}, not {}", flit.packet, pkt.dst)));
                }
                self.counters.delivered_flits += 1;
                if flit.tail {
                    self.counters.delivered_packets += 1;
                    if pkt.measured {
                        let latency = self.cycle - pkt.created;
                        self.m_delivered += 1;
                        self.m_delivered_flits += u64::from(pkt.length);
                        self.m_latency_sum += latency;
                        self.m_latency_max = self.m_latency_max.max(latency);
                        self.m_router_traversals += pkt.router_traversals;
                        self.m_horizontal += pkt.horizontal_hops;
                        self.m_vertical += pkt.vertical_hops;
                        self.measured_outstanding -= 1;
                    }
                }
            } else {
                let nb = downstream.expect("granted output is connected");
                let back = port.opposite().index();
                let dr = &mut self.routers[nb];
                dr.inputs[back * VCS + out_vn].queue.push(flit);
                dr.occupancy += 1;
            }
        }
        if !self.moves.is_empty() {
            self.last_progress = self.cycle;
        }
        Ok(())
    }

    fn choose_elevator(&mut self, src: NodeId, dst: NodeId) -> Option<ElevatorId> {
        let (s, d) = (self.topology.coord(src), self.topology.coord(dst));
        if s.z == d.z {
            return None;
        }
        Some(match self.policy {
            Policy::Nearest => select_nearest(s, &self.topology),
            Policy::Rr => self.selectors[src].as_mut().expect("rr has selectors").select_rr(),
            Policy::Adele => self.selectors[src].as_mut().expect("adele has selectors").select_adele(s, d, &self.topology),
            Policy::Cda => {
                for (snap, r) in self.occupancy_snapshot.iter_mut().zip(&self.routers) {
                    *snap = r.occupancy;
                }
                select_cda(s, &self.topology, &self.occupancy_snapshot)
            }
        })
    }

    fn inject(&mut self) -> Result<()> {
        let n = self.routers.len();
        for node in 0..n {
            if self.traffic.is_trace() {
                while let Some(p) = self.traffic.next_packet(node, self.cycle, &mut self.traffic_rng) {
                    self.injection[node].queue.push_back(p);
                }
            } else if let Some(p) = self.traffic.next_packet(node, self.cycle, &mut self.traffic_rng) {
                self.injection[node].queue.push_back(p);
            }
        }
        for node in 0..n {
            let local = LOCAL * VCS + Vn::Vn0.index();
            if self.routers[node].inputs[local].queue.len() >= BUFFER_DEPTH {
                continue;
            }
            if self.injection[node].active.is_none() {
                let Some(desc) = self.injection[node].queue.pop_front() else { continue };
                let elevator = self.choose_elevator(node, desc.dst);
                let src = self.topology.coord(node);
                let dst_coord = self.topology.coord(desc.dst);
                // measurement membership follows generation time
                let measured = desc.created >= self.warmup && desc.created < self.warmup + self.measure;
                if measured {
                    self.m_injected += 1;
                    self.measured_outstanding += 1;
                }
                self.counters.generated_packets += 1;
                let id = PacketId::try_from(self.packets.len())
                    .map_err(|_| Error::Simulation("more than 2^32 packets".into()))?;
                self.packets.push(Packet {
                    src: node,
                    dst: desc.dst,
                    dst_coord,
                    length: desc.length as u32,
                    created: desc.created,
                    measured,
                    route: PacketRouteState::new(src, dst_coord, elevator)?,
                    elevator,
                    t_head: 0,
                    router_traversals: 0,
                    horizontal_hops: 0,
                    vertical_hops: 0,
                    counted_elevator: false,
                });
                self.injection[node].active = Some((id, 0));
            }
            let (id, sent) = self.injection[node].active.expect("active packet");
            let length = self.packets[id as usize].length;
            let flit = Flit { packet: id, head: sent == 0, tail: sent + 1 == length };
            let r = &mut self.routers[node];
            r.inputs[local].queue.push(flit);
            r.occupancy += 1;
            self.counters.injected_flits += 1;
            self.injection[node].active = (sent + 1 < length).then_some((id, sent + 1));
        }
        Ok(())
    }

    /// Advances one cycle: switch traversal, then packet generation and injection.
    pub fn step(&mut self) -> Result<()> {
        self.allocate()?;
        self.commit()?;
        self.inject()?;
        if self.in_flight_flits() > 0 && self.cycle - self.last_progress > STALL_LIMIT {
            return Err(Error::Simulation(format!(
                "no flit moved for {STALL_LIMIT} cycles at cycle {} with {} flits buffered",
                self.cycle,
                self.in_flight_flits()
            )));
        }
        self.cycle += 1;
        Ok(())
    }

    fn finished(&self) -> bool {
        let end = self.warmup + self.measure;
        if self.cycle < end {
            return false;
        }
        self.measured_outstanding == 0 || self.cycle >= end + self.drain
    }

    pub fn run(mut self) -> Result<SimMetrics> {
        while !self.finished() {
            self.step()?;
        }
        Ok(self.metrics())
    }

    /// Like [`Simulator::run`], writing `cycle,injected_flits,delivered_flits,in_flight`
    /// after every cycle.
    pub fn run_with_log<W: Write>(mut self, mut log: W) -> Result<SimMetrics> {
        writeln!(log, "cycle,injected_flits,delivered_flits,in_flight")?;
        while !self.finished() {
            self.step()?;
            let c = self.counters;
            writeln!(log, "{},{},{},{}", self.cycle - 1, c.injected_flits, c.delivered_flits, self.in_flight_flits())?;
        }
        Ok(self.metrics())
    }

    pub fn metrics(&self) -> SimMetrics {
        let energy_total = self.energy.total(self.m_router_traversals, self.m_horizontal, self.m_vertical);
        SimMetrics {
            avg_latency: if self.m_delivered > 0 { self.m_latency_sum as f64 / self.m_delivered as f64 } else { 0.0 },
            max_latency: self.m_latency_max,
            injected: self.m_injected,
            delivered: self.m_delivered,
            delivered_flits: self.m_delivered_flits,
            throughput: self.m_delivered_flits as f64 / (self.routers.len() as f64 * self.measure as f64),
            elevator_traversals: self.elevator_traversals.clone(),
            router_load: self.router_load.clone(),
            router_traversals: self.m_router_traversals,
            horizontal_hops: self.m_horizontal,
            vertical_hops: self.m_vertical,
            energy_total,
            energy_per_flit: if self.m_delivered_flits > 0 { energy_total / self.m_delivered_flits as f64 } else { 0.0 },
            cycles: self.cycle,
        }
    }
}
