//! Elevator-First routing: XY inside a layer toward the packet's elevator,
//! straight up or down the column, then XY to the destination.
//!
//! Deadlock freedom comes from two virtual networks. Everything travels on
//! VN0 until it first takes a downward vertical hop; from then on the packet
//! stays on VN1. VN0 therefore only ever climbs and VN1 only ever descends,
//! and XY ordering inside each layer keeps both acyclic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::ElevatorAssignment;
use crate::topology::{Coord, ElevatorId, NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Port {
    /// +x
    East,
    /// -x
    West,
    /// +y
    North,
    /// -y
    South,
    /// +z
    Up,
    /// -z
    Down,
    Local,
}

impl Port {
    pub const ALL: [Port; 7] = [Port::East, Port::West, Port::North, Port::South, Port::Up, Port::Down, Port::Local];
    pub const COUNT: usize = 7;

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn from_index(i: usize) -> Port {
        Port::ALL[i]
    }

    /// Input port on the neighbour that receives what leaves through `self`.
    pub const fn opposite(self) -> Port {
        match self {
            Port::East => Port::West,
            Port::West => Port::East,
            Port::North => Port::South,
            Port::South => Port::North,
            Port::Up => Port::Down,
            Port::Down => Port::Up,
            Port::Local => Port::Local,
        }
    }

    pub const fn is_vertical(self) -> bool {
        matches!(self, Port::Up | Port::Down)
    }

    pub const fn is_horizontal(self) -> bool {
        matches!(self, Port::East | Port::West | Port::North | Port::South)
    }

    /// Neighbouring coordinate through this port, if it exists in the mesh.
    pub fn step(self, c: Coord, topology: &Topology) -> Option<Coord> {
        let d = topology.dims();
        let next = match self {
            Port::East if c.x + 1 < d.x => Coord::new(c.x + 1, c.y, c.z),
            Port::West if c.x > 0 => Coord::new(c.x - 1, c.y, c.z),
            Port::North if c.y + 1 < d.y => Coord::new(c.x, c.y + 1, c.z),
            Port::South if c.y > 0 => Coord::new(c.x, c.y - 1, c.z),
            Port::Up if c.z + 1 < d.layers => Coord::new(c.x, c.y, c.z + 1),
            Port::Down if c.z > 0 => Coord::new(c.x, c.y, c.z - 1),
            _ => return None,
        };
        if self.is_vertical() && topology.elevator_at(c.x, c.y).is_none() {
            return None;
        }
        Some(next)
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Port::East => "E",
            Port::West => "W",
            Port::North => "N",
            Port::South => "S",
            Port::Up => "Up",
            Port::Down => "Down",
            Port::Local => "Local",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Vn {
    Vn0 = 0,
    Vn1 = 1,
}

impl Vn {
    pub const fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    ToElevator,
    Vertical,
    ToDestination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RouteDecision {
    pub output_port: Port,
    pub virtual_network: Vn,
}

/// Per-packet routing state carried by the head flit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRouteState {
    /// Chosen at the source; `None` for intra-layer packets.
    pub assigned_elevator: Option<ElevatorId>,
    pub phase: Phase,
    pub vn: Vn,
}

impl PacketRouteState {
    pub fn new(src: Coord, dst: Coord, elevator: Option<ElevatorId>) -> Result<Self> {
        match (src.z == dst.z, elevator) {
            (true, _) => Ok(PacketRouteState { assigned_elevator: None, phase: Phase::ToDestination, vn: Vn::Vn0 }),
            (false, Some(e)) => Ok(PacketRouteState { assigned_elevator: Some(e), phase: Phase::ToElevator, vn: Vn::Vn0 }),
            (false, None) => Err(Error::RoutingState(format!("inter-layer packet {src} -> {dst} has no elevator"))),
        }
    }

    /// State after the packet takes `decision`.
    pub fn advance(&mut self, decision: RouteDecision) {
        self.vn = decision.virtual_network;
        match (self.phase, decision.output_port) {
            (_, p) if p.is_vertical() => self.phase = Phase::Vertical,
            (Phase::Vertical, _) => self.phase = Phase::ToDestination,
            _ => {}
        }
    }
}

fn xy_port(current: Coord, tx: usize, ty: usize) -> Option<Port> {
    if current.x < tx {
        Some(Port::East)
    } else if current.x > tx {
        Some(Port::West)
    } else if current.y < ty {
        Some(Port::North)
    } else if current.y > ty {
        Some(Port::South)
    } else {
        None
    }
}

fn vertical(current: Coord, dst: Coord) -> RouteDecision {
    if dst.z > current.z {
        RouteDecision { output_port: Port::Up, virtual_network: Vn::Vn0 }
    } else {
        RouteDecision { output_port: Port::Down, virtual_network: Vn::Vn1 }
    }
}

/// Next hop for a packet at `current` heading to `dst`.
pub fn route(current: Coord, dst: Coord, state: &PacketRouteState, topology: &Topology) -> Result<RouteDecision> {
    let stay = |port| RouteDecision { output_port: port, virtual_network: state.vn };
    if current == dst {
        return Ok(stay(Port::Local));
    }
    let Some(e) = state.assigned_elevator else {
        if current.z != dst.z {
            return Err(Error::RoutingState(format!("packet at {current} for {dst} changed layer without an elevator")));
        }
        return Ok(stay(xy_port(current, dst.x, dst.y).expect("current != dst on one layer")));
    };
    let (ex, ey) = topology.elevator_position(e)?;
    match state.phase {
        Phase::ToElevator => {
            if current.z == dst.z {
                return Err(Error::RoutingState(format!(
                    "packet at {current} still heading to elevator {e} on its destination layer"
                )));
            }
            match xy_port(current, ex, ey) {
                Some(p) => Ok(RouteDecision { output_port: p, virtual_network: Vn::Vn0 }),
                None => Ok(vertical(current, dst)),
            }
        }
        Phase::Vertical => {
            if (current.x, current.y) != (ex, ey) {
                return Err(Error::RoutingState(format!("vertical phase at {current}, off elevator {e}'s column")));
            }
            if current.z != dst.z {
                let d = vertical(current, dst);
                if d.output_port == Port::Up && state.vn == Vn::Vn1 {
                    return Err(Error::RoutingState(format!("packet at {current} climbing after descending")));
                }
                Ok(d)
            } else {
                Ok(stay(xy_port(current, dst.x, dst.y).expect("current != dst on one layer")))
            }
        }
        Phase::ToDestination => {
            if current.z != dst.z {
                return Err(Error::RoutingState(format!("destination phase at {current} but {dst} is on another layer")));
            }
            Ok(stay(xy_port(current, dst.x, dst.y).expect("current != dst on one layer")))
        }
    }
}

/// Every hop of the route from `src` to `dst`, ending with the `Local` ejection.
pub fn trace_route(topology: &Topology, src: Coord, dst: Coord, elevator: Option<ElevatorId>) -> Result<Vec<(Coord, RouteDecision)>> {
    let mut state = PacketRouteState::new(src, dst, elevator)?;
    let mut current = src;
    let mut hops = Vec::new();
    // longest legal route is well under this bound
    let limit = 4 * topology.node_count() + 8;
    loop {
        let d = route(current, dst, &state, topology)?;
        hops.push((current, d));
        if d.output_port == Port::Local {
            return Ok(hops);
        }
        state.advance(d);
        current = d.output_port.step(current, topology).ok_or_else(|| {
            Error::RoutingState(format!("port {} at {current} leaves the mesh", d.output_port))
        })?;
        if hops.len() > limit {
            return Err(Error::RoutingState(format!("route {src} -> {dst} does not terminate")));
        }
    }
}

/// A unidirectional link leaving `node` through `port`, on one virtual network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Channel {
    pub node: NodeId,
    pub port: Port,
    pub vn: Vn,
}

#[derive(Debug, Clone, Default)]
pub struct ChannelDependencyGraph {
    edges: BTreeMap<Channel, BTreeSet<Channel>>,
}

impl ChannelDependencyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_dependency(&mut self, from: Channel, to: Channel) {
        self.edges.entry(from).or_default().insert(to);
        self.edges.entry(to).or_default();
    }

    pub fn channel_count(&self) -> usize {
        self.edges.len()
    }

    pub fn dependency_count(&self) -> usize {
        self.edges.values().map(BTreeSet::len).sum()
    }

    /// A cycle among dependencies whose endpoints both lie on `vn`, if any.
    pub fn find_cycle(&self, vn: Vn) -> Option<Vec<Channel>> {
        self.find_cycle_where(|c| c.vn == vn)
    }

    /// A cycle anywhere in the graph, crossing virtual networks if need be.
    pub fn find_any_cycle(&self) -> Option<Vec<Channel>> {
        self.find_cycle_where(|_| true)
    }

    fn find_cycle_where(&self, keep: impl Fn(&Channel) -> bool) -> Option<Vec<Channel>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Fresh,
            Open,
            Done,
        }
        let nodes: Vec<Channel> = self.edges.keys().copied().filter(|c| keep(c)).collect();
        let mut mark: BTreeMap<Channel, Mark> = nodes.iter().map(|&c| (c, Mark::Fresh)).collect();
        for &root in &nodes {
            if mark[&root] != Mark::Fresh {
                continue;
            }
            // iterative DFS; the stack holds (channel, successors still to visit)
            let mut stack: Vec<(Channel, Vec<Channel>)> = Vec::new();
            let succ = |c: &Channel| -> Vec<Channel> {
                self.edges[c].iter().copied().filter(|n| keep(n)).collect()
            };
            mark.insert(root, Mark::Open);
            stack.push((root, succ(&root)));
            while let Some((top, pending)) = stack.last_mut() {
                let top = *top;
                match pending.pop() {
                    Some(next) => match mark[&next] {
                        Mark::Fresh => {
                            mark.insert(next, Mark::Open);
                            let s = succ(&next);
                            stack.push((next, s));
                        }
                        Mark::Open => {
                            let start = stack.iter().position(|(c, _)| *c == next).expect("open node on stack");
                            return Some(stack[start..].iter().map(|(c, _)| *c).collect());
                        }
                        Mark::Done => {}
                    },
                    None => {
                        mark.insert(top, Mark::Done);
                        stack.pop();
                    }
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone)]
pub struct DeadlockReport {
    pub channels: usize,
    pub dependencies: usize,
    /// First cycle found on each virtual network.
    pub cycles: [Option<Vec<Channel>>; 2],
    /// A cycle through both networks; impossible while VN1 never feeds VN0.
    pub mixed_cycle: Option<Vec<Channel>>,
}

impl DeadlockReport {
    pub fn is_acyclic(&self) -> bool {
        self.cycles.iter().all(Option::is_none) && self.mixed_cycle.is_none()
    }
}

/// Channel-dependency graph induced by [`route`] over every source,
/// destination and elevator in the source's subset.
pub fn build_dependency_graph(topology: &Topology, assignment: &ElevatorAssignment) -> Result<ChannelDependencyGraph> {
    assignment.validate(topology)?;
    let mut cdg = ChannelDependencyGraph::new();
    let n = topology.node_count();
    for s in 0..n {
        let src = topology.coord(s);
        for d in 0..n {
            if s == d {
                continue;
            }
            let dst = topology.coord(d);
            let elevators: Vec<Option<ElevatorId>> = if src.z == dst.z {
                vec![None]
            } else {
                assignment.subset(s).iter().copied().map(Some).collect()
            };
            for e in elevators {
                let hops = trace_route(topology, src, dst, e)?;
                let chans: Vec<Channel> = hops
                    .iter()
                    .filter(|(_, d)| d.output_port != Port::Local)
                    .map(|(c, d)| Channel { node: topology.node_id(*c), port: d.output_port, vn: d.virtual_network })
                    .collect();
                for w in chans.windows(2) {
                    cdg.add_dependency(w[0], w[1]);
                }
            }
        }
    }
    Ok(cdg)
}

pub fn check_deadlock_freedom(topology: &Topology, assignment: &ElevatorAssignment) -> Result<DeadlockReport> {
    let cdg = build_dependency_graph(topology, assignment)?;
    Ok(DeadlockReport {
        channels: cdg.channel_count(),
        dependencies: cdg.dependency_count(),
        cycles: [cdg.find_cycle(Vn::Vn0), cdg.find_cycle(Vn::Vn1)],
        mixed_cycle: cdg.find_any_cycle(),
    })
}
