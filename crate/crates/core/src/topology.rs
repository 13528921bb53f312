//! 3D mesh geometry: dimensions, elevator columns, router numbering and the
//! hop-distance primitives shared by routing, selection and the optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into [`Topology::elevators`].
pub type ElevatorId = usize;

/// Router index, `z·X·Y + y·X + x`.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Coord {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Coord { x, y, z }
    }
}

impl std::fmt::Display for Coord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

/// Width, depth and layer count of the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub x: usize,
    pub y: usize,
    pub layers: usize,
}

impl Dims {
    pub const fn new(x: usize, y: usize, layers: usize) -> Self {
        Dims { x, y, layers }
    }

    pub const fn layer_size(&self) -> usize {
        self.x * self.y
    }

    pub const fn nodes(&self) -> usize {
        self.x * self.y * self.layers
    }
}

/// A partially connected 3D mesh. Each elevator is a full-height column of
/// vertical links at one `(x, y)` position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    dims: Dims,
    elevators: Vec<(usize, usize)>,
    // elevator id at each (x, y), row-major
    column_owner: Vec<Option<ElevatorId>>,
}

/// On-disk form: `{"dims":[X,Y,L], "elevators":[[x,y],...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyDoc {
    pub dims: [usize; 3],
    pub elevators: Vec<[usize; 2]>,
}

pub const PRESET_NAMES: [&str; 4] = ["p_s1", "p_s2", "p_s3", "p_m"];

impl Topology {
    /// Validates and builds a topology.
    pub fn new(dims: Dims, elevators: Vec<(usize, usize)>) -> Result<Self> {
        if dims.x == 0 || dims.y == 0 {
            return Err(Error::InvalidTopology(format!(
                "mesh must be at least 1x1, got {}x{}",
                dims.x, dims.y
            )));
        }
        if dims.layers < 2 {
            return Err(Error::InvalidTopology(format!(
                "need at least 2 layers, got {}",
                dims.layers
            )));
        }
        if elevators.is_empty() {
            return Err(Error::InvalidTopology("at least one elevator is required".into()));
        }
        let mut column_owner = vec![None; dims.layer_size()];
        for (id, &(x, y)) in elevators.iter().enumerate() {
            if x >= dims.x || y >= dims.y {
                return Err(Error::InvalidTopology(format!(
                    "elevator {id} at ({x},{y}) is outside the {}x{} grid",
                    dims.x, dims.y
                )));
            }
            let slot = &mut column_owner[y * dims.x + x];
            if let Some(prev) = slot {
                return Err(Error::InvalidTopology(format!(
                    "duplicate elevator position ({x},{y}) for elevators {prev} and {id}"
                )));
            }
            *slot = Some(id);
        }
        Ok(Topology { dims, elevators, column_owner })
    }

    pub fn from_doc(doc: &TopologyDoc) -> Result<Self> {
        let [x, y, l] = doc.dims;
        Topology::new(Dims::new(x, y, l), doc.elevators.iter().map(|&[a, b]| (a, b)).collect())
    }

    pub fn to_doc(&self) -> TopologyDoc {
        TopologyDoc {
            dims: [self.dims.x, self.dims.y, self.dims.layers],
            elevators: self.elevators.iter().map(|&(x, y)| [x, y]).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TopologyDoc = serde_json::from_str(text)?;
        Topology::from_doc(&doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("topology doc serializes")
    }

    /// Bundled placement presets. `p_s2` uses the four corners;
    /// `p_s1`, `p_s3` and `p_m` were generated with
    /// [`crate::optimizer::optimize_placement`] under uniform traffic.
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "p_s1" => include_str!("../presets/p_s1.json"),
            "p_s2" => include_str!("../presets/p_s2.json"),
            "p_s3" => include_str!("../presets/p_s3.json"),
            "p_m" => include_str!("../presets/p_m.json"),
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        Topology::from_json(text)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn node_count(&self) -> usize {
        self.dims.nodes()
    }

    pub fn elevator_count(&self) -> usize {
        self.elevators.len()
    }

    pub fn elevators(&self) -> &[(usize, usize)] {
        &self.elevators
    }

    pub fn elevator_position(&self, e: ElevatorId) -> Result<(usize, usize)> {
        self.elevators.get(e).copied().ok_or(Error::InvalidElevator(e))
    }

    pub fn node_id(&self, c: Coord) -> NodeId {
        c.z * self.dims.layer_size() + c.y * self.dims.x + c.x
    }

    pub fn coord(&self, id: NodeId) -> Coord {
        let per_layer = self.dims.layer_size();
        let z = id / per_layer;
        let rem = id % per_layer;
        Coord::new(rem % self.dims.x, rem / self.dims.x, z)
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.x < self.dims.x && c.y < self.dims.y && c.z < self.dims.layers
    }

    /// The elevator whose column passes through `(x, y)`, if any.
    pub fn elevator_at(&self, x: usize, y: usize) -> Option<ElevatorId> {
        if x >= self.dims.x || y >= self.dims.y {
            return None;
        }
        self.column_owner[y * self.dims.x + x]
    }

    /// Intra-layer Manhattan distance from `node` to elevator `e`'s column.
    pub fn distance_to_column(&self, node: Coord, e: ElevatorId) -> usize {
        let (ex, ey) = self.elevators[e];
        node.x.abs_diff(ex) + node.y.abs_diff(ey)
    }

    /// Hops from `src` to `dst` through elevator `e`: zero for same-layer
    /// pairs, otherwise source-to-column + vertical + column-to-destination.
    pub fn elevator_path_distance(&self, src: Coord, dst: Coord, e: ElevatorId) -> Result<usize> {
        if e >= self.elevators.len() {
            return Err(Error::InvalidElevator(e));
        }
        Ok(self.path_distance_unchecked(src, dst, e))
    }

    pub(crate) fn path_distance_unchecked(&self, src: Coord, dst: Coord, e: ElevatorId) -> usize {
        if src.z == dst.z {
            return 0;
        }
        self.distance_to_column(src, e) + src.z.abs_diff(dst.z) + self.distance_to_column(dst, e)
    }

    /// Elevator-First's choice: the closest column to `node`, lowest id on ties.
    pub fn nearest_elevator(&self, node: Coord) -> ElevatorId {
        (0..self.elevators.len())
            .min_by_key(|&e| (self.distance_to_column(node, e), e))
            .expect("topology has at least one elevator")
    }

    /// Lowest-distance elevator among `candidates` for the `src → dst` pair.
    pub fn minimal_path_elevator(&self, src: Coord, dst: Coord, candidates: &[ElevatorId]) -> ElevatorId {
        candidates
            .iter()
            .copied()
            .min_by_key(|&e| (self.path_distance_unchecked(src, dst, e), e))
            .expect("non-empty candidate list")
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.node_count()).map(|id| self.coord(id))
    }
}

/// Intra-layer Manhattan distance; the vertical component `|Δz|` is reported
/// separately by [`vertical_distance`].
pub fn manhattan(a: Coord, b: Coord) -> usize {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

pub fn vertical_distance(a: Coord, b: Coord) -> usize {
    a.z.abs_diff(b.z)
}
