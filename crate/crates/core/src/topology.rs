//! Node placement and the unit-disk neighbor relation.
//!
//! Nodes are static points in a rectangular area. Two distinct nodes are
//! linked iff their Euclidean distance is at most the radio radius. The
//! adjacency is built once on construction with a uniform cell grid and
//! kept as sorted per-node lists, so iteration order is deterministic.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Rectangular deployment area `[0, width] x [0, height]`, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub const fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.height.is_finite())
            || self.width <= 0.0
            || self.height <= 0.0
        {
            return Err(Error::InvalidParameter(format!(
                "area must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<Point>,
    radio_radius: f64,
    area: Area,
    adjacency: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Builds a topology from positions indexed by node id.
    pub fn new(positions: Vec<Point>, radio_radius: f64, area: Area) -> Result<Self> {
        area.validate()?;
        if !(radio_radius.is_finite() && radio_radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radio radius must be positive, got {radio_radius}"
            )));
        }
        for (i, p) in positions.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidParameter(format!("node {i} has a non-finite position")));
            }
            if !area.contains(*p) {
                return Err(Error::InvalidParameter(format!(
                    "node {i} at ({}, {}) lies outside the {}x{} area",
                    p.x, p.y, area.width, area.height
                )));
            }
        }
        let adjacency = build_adjacency(&positions, radio_radius);
        Ok(Self { positions, radio_radius, area, adjacency })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn radio_radius(&self) -> f64 {
        self.radio_radius
    }

    pub fn area(&self) -> Area {
        self.area
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.positions.len()).map(NodeId)
    }

    pub fn contains(&self, u: NodeId) -> bool {
        u.0 < self.positions.len()
    }

    pub fn position(&self, u: NodeId) -> Result<Point> {
        self.positions.get(u.0).copied().ok_or(Error::UnknownNode(u))
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    /// Neighbors of `u` in ascending id order.
    pub fn neighbors(&self, u: NodeId) -> Result<&[NodeId]> {
        self.adjacency.get(u.0).map(Vec::as_slice).ok_or(Error::UnknownNode(u))
    }

    pub fn is_link(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency
            .get(u.0)
            .is_some_and(|adj| adj.binary_search(&v).is_ok())
    }

    /// All undirected links as `(low, high)` pairs, sorted.
    pub fn links(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (i, adj) in self.adjacency.iter().enumerate() {
            for &v in adj {
                if v.0 > i {
                    out.push((NodeId(i), v));
                }
            }
        }
        out
    }

    /// Connected components, each sorted ascending, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut label = vec![usize::MAX; self.len()];
        let mut components = Vec::new();
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut members = vec![NodeId(start)];
            label[start] = id;
            let mut head = 0;
            while head < members.len() {
                let u = members[head];
                head += 1;
                for &v in &self.adjacency[u.0] {
                    if label[v.0] == usize::MAX {
                        label[v.0] = id;
                        members.push(v);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }

    pub fn to_file(&self) -> TopologyFile {
        TopologyFile {
            area: [self.area.width, self.area.height],
            radio_radius: self.radio_radius,
            nodes: self
                .positions
                .iter()
                .enumerate()
                .map(|(i, p)| (i, p.x, p.y))
                .collect(),
        }
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.to_file())
            .map_err(|e| Error::TopologyFormat(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let file: TopologyFile =
            serde_json::from_reader(r).map_err(|e| Error::TopologyFormat(e.to_string()))?;
        file.into_topology()
    }
}

/// Serialized form: `{"area": [w, h], "radio_radius": r, "nodes": [[id, x, y], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub area: [f64; 2],
    pub radio_radius: f64,
    pub nodes: Vec<(usize, f64, f64)>,
}

impl TopologyFile {
    pub fn into_topology(self) -> Result<Topology> {
        let area = Area::new(self.area[0], self.area[1]);
        let n = self.nodes.len();
        let mut seen = HashSet::with_capacity(n);
        let mut positions = vec![Point::new(f64::NAN, f64::NAN); n];
        for &(id, x, y) in &self.nodes {
            if !seen.insert(id) {
                return Err(Error::TopologyFormat(format!("duplicate node id {id}")));
            }
            if id >= n {
                return Err(Error::TopologyFormat(format!(
                    "node ids must be dense 0..{n}, found {id}"
                )));
            }
            let p = Point::new(x, y);
            if !p.is_finite() || !area.contains(p) {
                return Err(Error::TopologyFormat(format!(
                    "node {id} at ({x}, {y}) lies outside the {}x{} area",
                    area.width, area.height
                )));
            }
            positions[id] = p;
        }
        Topology::new(positions, self.radio_radius, area)
            .map_err(|e| Error::TopologyFormat(e.to_string()))
    }
}

/// Places `n` nodes independently and uniformly at random in `area`.
pub fn generate_topology(n: usize, area: Area, radio_radius: f64, seed: u64) -> Result<Topology> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {n}")));
    }
    area.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n)
        .map(|_| {
            Point::new(
                rng.random_range(0.0..=area.width),
                rng.random_range(0.0..=area.height),
            )
        })
        .collect();
    Topology::new(positions, radio_radius, area)
}

pub fn neighbors(topology: &Topology, u: NodeId) -> Result<&[NodeId]> {
    topology.neighbors(u)
}

fn build_adjacency(positions: &[Point], radius: f64) -> Vec<Vec<NodeId>> {
    let cell_of = |p: Point| ((p.x / radius).floor() as i64, (p.y / radius).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in positions.iter().enumerate() {
        grid.entry(cell_of(p)).or_default().push(i);
    }

    let mut adjacency = vec![Vec::new(); positions.len()];
    for (i, &p) in positions.iter().enumerate() {
        let (cx, cy) = cell_of(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &j in bucket {
                    if j != i && p.distance(positions[j]) <= radius {
                        adjacency[i].push(NodeId(j));
                    }
                }
            }
        }
        adjacency[i].sort_unstable();
    }
    adjacency
}
