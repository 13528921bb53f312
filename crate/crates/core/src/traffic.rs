//! Synthetic and trace-driven packet sources, plus the pairwise frequency
//! matrix consumed by the offline optimizer.

use std::collections::VecDeque;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrafficKind {
    Uniform,
    /// Bit-rotate-left-by-one permutation of the source id.
    Shuffle,
    Trace(PathBuf),
}

impl fmt::Display for TrafficKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrafficKind::Uniform => f.write_str("uniform"),
            TrafficKind::Shuffle => f.write_str("shuffle"),
            TrafficKind::Trace(p) => write!(f, "trace:{}", p.display()),
        }
    }
}

impl FromStr for TrafficKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(TrafficKind::Uniform),
            "shuffle" => Ok(TrafficKind::Shuffle),
            _ => match s.strip_prefix("trace:") {
                Some(path) if !path.is_empty() => Ok(TrafficKind::Trace(PathBuf::from(path))),
                _ => Err(Error::InvalidTraffic(format!(
                    "expected uniform, shuffle or trace:<path>, got `{s}`"
                ))),
            },
        }
    }
}

impl Serialize for TrafficKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TrafficKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where packets come from and how often.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSource {
    pub kind: TrafficKind,
    /// Flits per node per cycle. Ignored for traces.
    pub injection_rate: f64,
    /// Inclusive packet length range in flits.
    pub packet_length: [usize; 2],
}

impl Default for TrafficSource {
    fn default() -> Self {
        TrafficSource { kind: TrafficKind::Uniform, injection_rate: 0.005, packet_length: [10, 30] }
    }
}

impl TrafficSource {
    pub fn new(kind: TrafficKind, injection_rate: f64) -> Self {
        TrafficSource { kind, injection_rate, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let [min, max] = self.packet_length;
        if min < 1 || min > max {
            return Err(Error::InvalidTraffic(format!("packet length range [{min},{max}] is empty")));
        }
        if !(self.injection_rate >= 0.0) || !self.injection_rate.is_finite() {
            return Err(Error::InvalidTraffic(format!(
                "injection rate must be a non-negative number, got {}",
                self.injection_rate
            )));
        }
        if self.packet_probability() > 1.0 {
            return Err(Error::InvalidTraffic(format!(
                "injection rate {} exceeds one packet per node per cycle",
                self.injection_rate
            )));
        }
        Ok(())
    }

    pub fn mean_packet_length(&self) -> f64 {
        (self.packet_length[0] + self.packet_length[1]) as f64 / 2.0
    }

    /// Per-node, per-cycle probability of generating a packet.
    pub fn packet_probability(&self) -> f64 {
        self.injection_rate / self.mean_packet_length()
    }
}

/// One packet to inject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketDescriptor {
    pub dst: NodeId,
    pub length: usize,
    /// Cycle the packet was generated.
    pub created: u64,
}

/// One row of a trace file: `src,dst,length,cycle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub length: usize,
    pub cycle: u64,
}

pub fn parse_trace<R: Read>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["src", "dst", "length", "cycle"] {
        return Err(Error::InvalidTraffic(format!(
            "trace header must be `src,dst,length,cycle`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    let mut last_cycle = 0;
    for row in rdr.deserialize() {
        let rec: TraceRecord = row?;
        if rec.cycle < last_cycle {
            return Err(Error::InvalidTraffic(format!(
                "trace cycles must be nondecreasing ({} after {last_cycle})",
                rec.cycle
            )));
        }
        if rec.length == 0 {
            return Err(Error::InvalidTraffic("trace packet with zero length".into()));
        }
        last_cycle = rec.cycle;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    parse_trace(std::fs::File::open(path)?)
}

pub fn write_trace<W: std::io::Write>(writer: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Destination of `src` under the shuffle permutation: rotate the id left by
/// one bit within `ceil(log2 n)` bits. `None` when the image is the source
/// itself or falls outside `0..n` (non power-of-two sizes).
pub fn shuffle_destination(src: NodeId, n: usize) -> Option<NodeId> {
    if n < 2 {
        return None;
    }
    let bits = usize::BITS - (n - 1).leading_zeros();
    let mask = (1usize << bits) - 1;
    let dst = ((src << 1) | (src >> (bits - 1))) & mask;
    (dst != src && dst < n).then_some(dst)
}

enum Pattern {
    Uniform,
    Shuffle,
    // pending records per source node
    Trace(Vec<VecDeque<TraceRecord>>),
}

/// Stateful per-simulation packet generator.
pub struct TrafficGenerator {
    nodes: usize,
    probability: f64,
    length: [usize; 2],
    pattern: Pattern,
}

impl TrafficGenerator {
    pub fn new(source: &TrafficSource, nodes: usize) -> Result<Self> {
        source.validate()?;
        let pattern = match &source.kind {
            TrafficKind::Uniform => Pattern::Uniform,
            TrafficKind::Shuffle => Pattern::Shuffle,
            TrafficKind::Trace(path) => return Self::from_records(source, nodes, read_trace(path)?),
        };
        Ok(TrafficGenerator {
            nodes,
            probability: source.packet_probability(),
            length: source.packet_length,
            pattern,
        })
    }

    /// Trace replay over already-parsed records.
    pub fn from_records(source: &TrafficSource, nodes: usize, records: Vec<TraceRecord>) -> Result<Self> {
        let mut queues = vec![VecDeque::new(); nodes];
        for r in records {
            if r.src >= nodes || r.dst >= nodes {
                return Err(Error::InvalidTraffic(format!(
                    "trace record {}->{} outside a {nodes}-node network",
                    r.src, r.dst
                )));
            }
            if r.src == r.dst {
                return Err(Error::InvalidTraffic(format!("trace record with src == dst == {}", r.src)));
            }
            queues[r.src].push_back(r);
        }
        Ok(TrafficGenerator { nodes, probability: 0.0, length: source.packet_length, pattern: Pattern::Trace(queues) })
    }

    pub fn is_trace(&self) -> bool {
        matches!(self.pattern, Pattern::Trace(_))
    }

    /// True once a trace has been fully replayed. Synthetic sources never end.
    pub fn is_exhausted(&self) -> bool {
        match &self.pattern {
            Pattern::Trace(q) => q.iter().all(VecDeque::is_empty),
            _ => false,
        }
    }

    /// Polls `node` for a new packet at `cycle`. Synthetic patterns make one
    /// Bernoulli draw per call and must be polled once per node per cycle;
    /// trace replay returns the next due record and may be polled repeatedly.
    pub fn next_packet<R: Rng + ?Sized>(&mut self, node: NodeId, cycle: u64, rng: &mut R) -> Option<PacketDescriptor> {
        match &mut self.pattern {
            Pattern::Trace(queues) => {
                let q = &mut queues[node];
                if q.front().is_some_and(|r| r.cycle <= cycle) {
                    let r = q.pop_front().expect("front checked");
                    return Some(PacketDescriptor { dst: r.dst, length: r.length, created: r.cycle });
                }
                None
            }
            Pattern::Uniform => {
                if self.nodes < 2 || !rng.gen_bool(self.probability) {
                    return None;
                }
                let mut dst = rng.gen_range(0..self.nodes - 1);
                if dst >= node {
                    dst += 1;
                }
                let length = rng.gen_range(self.length[0]..=self.length[1]);
                Some(PacketDescriptor { dst, length, created: cycle })
            }
            Pattern::Shuffle => {
                if !rng.gen_bool(self.probability) {
                    return None;
                }
                let length = rng.gen_range(self.length[0]..=self.length[1]);
                let dst = shuffle_destination(node, self.nodes)?;
                Some(PacketDescriptor { dst, length, created: cycle })
            }
        }
    }
}

/// Pairwise flow frequencies, row-major `n × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    n: usize,
    rates: Vec<f64>,
}

impl TrafficMatrix {
    pub fn zeros(n: usize) -> Self {
        TrafficMatrix { n, rates: vec![0.0; n * n] }
    }

    pub fn uniform(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m.rates[i * n + j] = 1.0;
                }
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut rates = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidTraffic(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            rates.extend(row);
        }
        let m = TrafficMatrix { n, rates };
        m.check_entries()?;
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.rates[i * self.n + j]
    }

    pub fn set(&mut self, i: NodeId, j: NodeId, v: f64) {
        self.rates[i * self.n + j] = v;
    }

    pub fn row(&self, i: NodeId) -> &[f64] {
        &self.rates[i * self.n..(i + 1) * self.n]
    }

    pub fn nonzero_count(&self) -> usize {
        self.rates.iter().filter(|&&v| v != 0.0).count()
    }

    fn check_entries(&self) -> Result<()> {
        for i in 0..self.n {
            if self.get(i, i) != 0.0 {
                return Err(Error::InvalidTraffic(format!("diagonal entry ({i},{i}) must be 0")));
            }
        }
        if let Some(v) = self.rates.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidTraffic(format!("negative or non-finite rate {v}")));
        }
        Ok(())
    }

    /// Full invariant check against a topology, including the requirement
    /// that some inter-layer pair carries traffic.
    pub fn validate(&self, topology: &Topology) -> Result<()> {
        if self.n != topology.node_count() {
            return Err(Error::InvalidTraffic(format!(
                "traffic matrix is {}x{} but the topology has {} routers",
                self.n,
                self.n,
                topology.node_count()
            )));
        }
        self.check_entries()?;
        let per_layer = topology.dims().layer_size();
        let any_inter = (0..self.n)
            .any(|i| (0..self.n).any(|j| i / per_layer != j / per_layer && self.get(i, j) > 0.0));
        if !any_inter {
            return Err(Error::InvalidTraffic("no inter-layer pair carries traffic".into()));
        }
        Ok(())
    }
}

/// Offline frequency matrix for a traffic source: 1 on every pair the
/// pattern can produce (uniform, shuffle) or packet counts (trace).
pub fn frequency_matrix(source: &TrafficSource, topology: &Topology) -> Result<TrafficMatrix> {
    let n = topology.node_count();
    match &source.kind {
        TrafficKind::Uniform => Ok(TrafficMatrix::uniform(n)),
        TrafficKind::Shuffle => {
            let mut m = TrafficMatrix::zeros(n);
            for src in 0..n {
                if let Some(dst) = shuffle_destination(src, n) {
                    m.set(src, dst, 1.0);
                }
            }
            Ok(m)
        }
        TrafficKind::Trace(path) => trace_matrix(&read_trace(path)?, n),
    }
}

pub fn trace_matrix(records: &[TraceRecord], n: usize) -> Result<TrafficMatrix> {
    let mut m = TrafficMatrix::zeros(n);
    for r in records {
        if r.src >= n || r.dst >= n || r.src == r.dst {
            return Err(Error::InvalidTraffic(format!("trace record {}->{} invalid for {n} routers", r.src, r.dst)));
        }
        m.rates[r.src * n + r.dst] += 1.0;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Dims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn topo(x: usize, y: usize, l: usize) -> Topology {
        Topology::new(Dims::new(x, y, l), vec![(0, 0)]).unwrap()
    }

    #[test]
    fn parses_kinds() {
        assert_eq!("uniform".parse::<TrafficKind>().unwrap(), TrafficKind::Uniform);
        assert_eq!("shuffle".parse::<TrafficKind>().unwrap(), TrafficKind::Shuffle);
        assert_eq!(
            "trace:/tmp/a.csv".parse::<TrafficKind>().unwrap(),
            TrafficKind::Trace(PathBuf::from("/tmp/a.csv"))
        );
        assert!("trace:".parse::<TrafficKind>().is_err());
        assert!("transpose".parse::<TrafficKind>().is_err());
    }

    #[test]
    fn shuffle_is_bit_rotation() {
        assert_eq!(shuffle_destination(0b000001, 64), Some(0b000010));
        assert_eq!(shuffle_destination(0b100000, 64), Some(0b000001));
        assert_eq!(shuffle_destination(0, 64), None);
        assert_eq!(shuffle_destination(63, 64), None);
        // 3 bits for n = 6; 3 = 0b011 -> 0b110 = 6 is out of range
        assert_eq!(shuffle_destination(3, 6), None);
    }

    #[test]
    fn uniform_covers_every_other_node() {
        let src = TrafficSource { injection_rate: 20.0, ..Default::default() };
        let mut g = TrafficGenerator::new(&src, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = [0u32; 64];
        for c in 0..1_000_000 {
            let p = g.next_packet(5, c, &mut rng).unwrap();
            assert!((10..=30).contains(&p.length));
            seen[p.dst] += 1;
        }
        assert_eq!(seen[5], 0);
        assert!(seen.iter().enumerate().all(|(i, &s)| i == 5 || s > 0));
    }

    #[test]
    fn trace_replays_at_record_cycle() {
        let text = "src,dst,length,cycle\n3,40,12,100\n";
        let recs = parse_trace(text.as_bytes()).unwrap();
        let src = TrafficSource { kind: TrafficKind::Uniform, ..Default::default() };
        let mut g = TrafficGenerator::from_records(&src, 64, recs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut emitted = Vec::new();
        for c in 0..200 {
            for n in 0..64 {
                while let Some(p) = g.next_packet(n, c, &mut rng) {
                    emitted.push((n, c, p));
                }
            }
        }
        assert_eq!(emitted, vec![(3, 100, PacketDescriptor { dst: 40, length: 12, created: 100 })]);
        assert!(g.is_exhausted());
    }

    #[test]
    fn trace_rejects_bad_input() {
        assert!(parse_trace("a,b,c,d\n1,2,3,4\n".as_bytes()).is_err());
        assert!(parse_trace("src,dst,length,cycle\n1,2,3,10\n1,2,3,4\n".as_bytes()).is_err());
        assert!(parse_trace("src,dst,length,cycle\n1,2,x,10\n".as_bytes()).is_err());
    }

    #[test]
    fn frequency_matrices() {
        let t = topo(2, 2, 2);
        let m = frequency_matrix(&TrafficSource::default(), &t).unwrap();
        assert_eq!(m.nonzero_count(), 56);
        assert!((0..8).all(|i| (0..8).all(|j| m.get(i, j) == m.get(j, i))));

        let shuffle = TrafficSource::new(TrafficKind::Shuffle, 0.01);
        let m = frequency_matrix(&shuffle, &t).unwrap();
        // 0 and 7 map to themselves
        assert_eq!(m.nonzero_count(), 6);
        assert!((0..8).all(|i| m.row(i).iter().sum::<f64>() <= 1.0));

        let recs = parse_trace("src,dst,length,cycle\n0,5,10,0\n0,5,10,3\n1,6,10,9\n".as_bytes()).unwrap();
        let m = trace_matrix(&recs, 8).unwrap();
        assert_eq!(m.get(0, 5), 2.0);
        assert_eq!(m.get(1, 6), 1.0);
        assert_eq!(m.nonzero_count(), 2);
    }

    #[test]
    fn matrix_validation() {
        let t = topo(2, 1, 2);
        assert!(TrafficMatrix::uniform(4).validate(&t).is_ok());
        assert!(TrafficMatrix::zeros(4).validate(&t).is_err());
        assert!(TrafficMatrix::uniform(3).validate(&t).is_err());
        let mut intra = TrafficMatrix::zeros(4);
        intra.set(0, 1, 1.0);
        assert!(intra.validate(&t).is_err());
        assert!(TrafficMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(TrafficMatrix::from_rows(vec![vec![0.0, -1.0], vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn source_validation() {
        assert!(TrafficSource { packet_length: [0, 3], ..Default::default() }.validate().is_err());
        assert!(TrafficSource { packet_length: [5, 3], ..Default::default() }.validate().is_err());
        assert!(TrafficSource { injection_rate: -0.1, ..Default::default() }.validate().is_err());
        assert!(TrafficSource { injection_rate: 25.0, ..Default::default() }.validate().is_err());
        assert!(TrafficSource { injection_rate: 0.0, ..Default::default() }.validate().is_ok());
    }
}
