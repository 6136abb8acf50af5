//! Embedded network topologies.
//!
//! A [`Topology`] carries an explicit rotation system: for every node, the
//! clockwise cyclic order of its neighbors. Bounded faces of the embedding are
//! the polygons the protocol reasons about; the outer face is excluded.

mod connectivity;
mod critical;
mod faces;
mod generate;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use connectivity::{exhaustive_min_cut, find_small_cut, is_k_connected, local_connectivity};
pub use critical::{critical_counterexample, CriticalNetwork};
pub use faces::{correct_polygons_connected, enumerate_faces, enumerate_polygons, polygon_adjacent, FaceSet};
pub use generate::{generate, GeneratorKind};

/// Dense node identifier in `0..n`.
pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("embedding error: {0}")]
    Embedding(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("topology file error: {0}")]
    File(String),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// How polygons are obtained for a topology.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Embedding {
    /// Planar rotation system. The outer face is the face traced from the
    /// given arc; `None` picks the longest face.
    Planar { outer: Option<(NodeId, NodeId)> },
    /// Non-planar baseline (the torus): polygons and `Z` are declared.
    Declared { z: usize, polygons: Vec<Vec<NodeId>> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    rotation: Vec<Vec<NodeId>>,
    label: String,
    embedding: Embedding,
    automorphism: Option<Vec<NodeId>>,
}

impl Topology {
    /// Builds a planar topology from a rotation system.
    pub fn planar(label: impl Into<String>, rotation: Vec<Vec<NodeId>>) -> Result<Self> {
        Self::build(label.into(), rotation, Embedding::Planar { outer: None }, None)
    }

    pub fn declared(
        label: impl Into<String>,
        rotation: Vec<Vec<NodeId>>,
        z: usize,
        polygons: Vec<Vec<NodeId>>,
    ) -> Result<Self> {
        Self::build(label.into(), rotation, Embedding::Declared { z, polygons }, None)
    }

    fn build(
        label: String,
        rotation: Vec<Vec<NodeId>>,
        embedding: Embedding,
        automorphism: Option<Vec<NodeId>>,
    ) -> Result<Self> {
        let n = rotation.len();
        if n == 0 {
            return Err(GraphError::Embedding("empty topology".into()));
        }
        for (u, cycle) in rotation.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &v in cycle {
                if v as usize >= n {
                    return Err(GraphError::Embedding(format!("node {u} lists unknown neighbor {v}")));
                }
                if v as usize == u {
                    return Err(GraphError::Embedding(format!("loop at node {u}")));
                }
                if !seen.insert(v) {
                    return Err(GraphError::Embedding(format!("edge {u}-{v} appears twice in the rotation of {u}")));
                }
                if !rotation[v as usize].contains(&(u as NodeId)) {
                    return Err(GraphError::Embedding(format!("edge {u}-{v} is missing from the rotation of {v}")));
                }
            }
        }
        let topo = Topology { rotation, label, embedding, automorphism: None };
        if !topo.is_connected_without(&[]) {
            return Err(GraphError::Embedding("graph is not connected".into()));
        }
        if let Embedding::Declared { polygons, .. } = &topo.embedding {
            for p in polygons {
                if p.len() < 3 {
                    return Err(GraphError::Embedding("declared polygon with fewer than 3 nodes".into()));
                }
                for i in 0..p.len() {
                    let (a, b) = (p[i], p[(i + 1) % p.len()]);
                    if !topo.has_edge(a, b) {
                        return Err(GraphError::Embedding(format!("declared polygon uses non-edge {a}-{b}")));
                    }
                }
            }
        }
        match automorphism {
            Some(map) => topo.with_automorphism(map),
            None => Ok(topo),
        }
    }

    /// Marks the face containing the arc `u -> v` as the outer face.
    pub fn with_outer_arc(mut self, u: NodeId, v: NodeId) -> Result<Self> {
        if !self.has_edge(u, v) {
            return Err(GraphError::Embedding(format!("outer arc {u}->{v} is not an edge")));
        }
        match &mut self.embedding {
            Embedding::Planar { outer } => *outer = Some((u, v)),
            Embedding::Declared { .. } => {
                return Err(GraphError::Embedding("declared embeddings have no outer face".into()))
            }
        }
        Ok(self)
    }

    /// Attaches a declared graph automorphism (checked to preserve adjacency
    /// and the rotation system up to the same orientation).
    pub fn with_automorphism(mut self, map: Vec<NodeId>) -> Result<Self> {
        let n = self.node_count();
        if map.len() != n {
            return Err(GraphError::Embedding("automorphism has wrong length".into()));
        }
        let mut seen = vec![false; n];
        for &v in &map {
            if v as usize >= n || std::mem::replace(&mut seen[v as usize], true) {
                return Err(GraphError::Embedding("automorphism is not a permutation".into()));
            }
        }
        for u in 0..n {
            let image: Vec<NodeId> = self.rotation[u].iter().map(|&w| map[w as usize]).collect();
            let target = &self.rotation[map[u] as usize];
            if !is_cyclic_shift(&image, target) {
                return Err(GraphError::Embedding(format!("map does not preserve the rotation at node {u}")));
            }
        }
        self.automorphism = Some(map);
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn is_planar(&self) -> bool {
        matches!(self.embedding, Embedding::Planar { .. })
    }

    pub fn automorphism(&self) -> Option<&[NodeId]> {
        self.automorphism.as_deref()
    }

    pub fn node_count(&self) -> usize {
        self.rotation.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.rotation.len() as NodeId
    }

    pub fn edge_count(&self) -> usize {
        self.rotation.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Unordered edges as `(min, max)` pairs, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, cycle) in self.rotation.iter().enumerate() {
            for &v in cycle {
                if (u as NodeId) < v {
                    out.push((u as NodeId, v));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Neighbors of `v` in clockwise order.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.rotation[v as usize]
    }

    pub fn rotation(&self) -> &[Vec<NodeId>] {
        &self.rotation
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.rotation[v as usize].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.rotation.get(u as usize).is_some_and(|c| c.contains(&v))
    }

    /// Maximal degree (`Y`).
    pub fn compute_y(&self) -> usize {
        self.rotation.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.rotation.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Maximal number of edges of a bounded polygon (`Z`).
    pub fn compute_z(&self) -> Result<usize> {
        match &self.embedding {
            Embedding::Declared { z, .. } => Ok(*z),
            Embedding::Planar { .. } => enumerate_polygons(self)?
                .iter()
                .map(Polygon::len)
                .max()
                .ok_or_else(|| GraphError::Embedding("no bounded face".into())),
        }
    }

    /// Hop distances from `src`; `None` for unreachable nodes.
    pub fn bfs(&self, src: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        dist[src as usize] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize].unwrap_or_default();
            for &w in self.neighbors(u) {
                if dist[w as usize].is_none() {
                    dist[w as usize] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> usize {
        self.bfs(a)[b as usize].expect("topology is connected")
    }

    pub fn eccentricity(&self, v: NodeId) -> usize {
        self.bfs(v).into_iter().flatten().max().unwrap_or(0)
    }

    /// Network diameter `d`.
    pub fn diameter(&self) -> usize {
        self.nodes().map(|v| self.eccentricity(v)).max().unwrap_or(0)
    }

    /// Whether the graph stays connected once `removed` nodes are deleted.
    pub fn is_connected_without(&self, removed: &[NodeId]) -> bool {
        let n = self.node_count();
        let mut gone = vec![false; n];
        for &r in removed {
            gone[r as usize] = true;
        }
        let Some(start) = (0..n).find(|&v| !gone[v]) else {
            return true;
        };
        let mut seen = gone.clone();
        seen[start] = true;
        let mut stack = vec![start as NodeId];
        let mut reached = 1;
        while let Some(u) = stack.pop() {
            for &w in self.neighbors(u) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    reached += 1;
                    stack.push(w);
                }
            }
        }
        reached == n - gone.iter().filter(|g| **g).count()
    }

    /// Rank of every neighbor in a receiver's inbox order, as `ranks[v][w]`.
    ///
    /// Without an automorphism this is the position of `w` in sorted `N(v)`.
    /// With one, ranks are transported along each orbit from its smallest
    /// member, so `rank(rho(v), rho(w)) = rank(v, w)` except at fixed points.
    pub fn port_ranks(&self) -> Vec<std::collections::HashMap<NodeId, usize>> {
        let n = self.node_count();
        let sorted = |v: NodeId| {
            let mut s = self.rotation[v as usize].clone();
            s.sort_unstable();
            s
        };
        let Some(rho) = &self.automorphism else {
            return self.nodes().map(|v| sorted(v).into_iter().enumerate().map(|(i, w)| (w, i)).collect()).collect();
        };
        let mut inverse = vec![0; n];
        for (v, &img) in rho.iter().enumerate() {
            inverse[img as usize] = v as NodeId;
        }
        let mut ranks = vec![std::collections::HashMap::new(); n];
        let mut done = vec![false; n];
        for r in self.nodes() {
            if done[r as usize] {
                continue;
            }
            let base = sorted(r);
            // walk the orbit r, rho(r), rho^2(r), ...
            let mut v = r;
            let mut back: Vec<NodeId> = (0..n as NodeId).collect(); // rho^{-j}
            loop {
                done[v as usize] = true;
                let table = self.rotation[v as usize]
                    .iter()
                    .map(|&w| (w, base.iter().position(|&b| b == back[w as usize]).unwrap_or(0)))
                    .collect();
                ranks[v as usize] = table;
                v = rho[v as usize];
                if v == r {
                    break;
                }
                back = back.iter().map(|&x| inverse[x as usize]).collect();
            }
        }
        ranks
    }

    /// Identifier bit-width `X`: `ceil(log2 n)` rounded up to a whole byte.
    pub fn id_bits(&self) -> u64 {
        id_bits_for(self.node_count())
    }

    /// Stable content digest used to tie reports and transcripts to a topology.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(&TopologyFile::from(self.clone())).expect("serializable");
        hex::encode(Sha256::digest(&json))
    }

    /// Nodes of degree below 4 or a witness cut if the topology is not fit for the protocol.
    pub fn validate_for_protocol(&self) -> Result<()> {
        if self.min_degree() < 4 {
            let v = self.nodes().find(|&v| self.degree(v) < 4).unwrap_or_default();
            return Err(GraphError::Domain(format!("node {v} has degree {} < 4", self.degree(v))));
        }
        if self.node_count() > 4 {
            if let Some(cut) = find_small_cut(self, 4)? {
                return Err(GraphError::Domain(format!("not 4-connected, node-cut {cut:?}")));
            }
        }
        if self.is_planar() {
            enumerate_faces(self)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&TopologyFile::from(self.clone())).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TopologyFile = serde_json::from_str(text).map_err(|e| GraphError::File(e.to_string()))?;
        Topology::try_from(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GraphError::File(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| GraphError::File(format!("{}: {e}", path.display())))
    }
}

pub(crate) fn id_bits_for(n: usize) -> u64 {
    let raw = (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as u64;
    raw.div_ceil(8) * 8
}

fn is_cyclic_shift(a: &[NodeId], b: &[NodeId]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    if a.is_empty() {
        return true;
    }
    let Some(start) = b.iter().position(|&x| x == a[0]) else {
        return false;
    };
    a.iter().enumerate().all(|(i, &x)| b[(start + i) % b.len()] == x)
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (n={}, e={})", self.label, self.node_count(), self.edge_count())
    }
}

/// On-disk form. Field order is the canonical key order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopologyFile {
    pub nodes: usize,
    pub rotation: Vec<Vec<NodeId>>,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_arc: Option<(NodeId, NodeId)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared: Option<DeclaredPolygons>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automorphism: Option<Vec<NodeId>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeclaredPolygons {
    pub z: usize,
    pub polygons: Vec<Vec<NodeId>>,
}

impl From<Topology> for TopologyFile {
    fn from(t: Topology) -> Self {
        let (outer_arc, declared) = match t.embedding {
            Embedding::Planar { outer } => (outer, None),
            Embedding::Declared { z, polygons } => (None, Some(DeclaredPolygons { z, polygons })),
        };
        TopologyFile {
            nodes: t.rotation.len(),
            rotation: t.rotation,
            label: t.label,
            outer_arc,
            declared,
            automorphism: t.automorphism,
        }
    }
}

impl TryFrom<TopologyFile> for Topology {
    type Error = GraphError;

    fn try_from(f: TopologyFile) -> Result<Self> {
        if f.nodes != f.rotation.len() {
            return Err(GraphError::File(format!(
                "`nodes` is {} but `rotation` has {} entries",
                f.nodes,
                f.rotation.len()
            )));
        }
        let embedding = match f.declared {
            Some(d) => Embedding::Declared { z: d.z, polygons: d.polygons },
            None => Embedding::Planar { outer: None },
        };
        let topo = Topology::build(f.label, f.rotation, embedding, None)?;
        let topo = match f.outer_arc {
            Some((u, v)) => topo.with_outer_arc(u, v)?,
            None => topo,
        };
        match f.automorphism {
            Some(map) => topo.with_automorphism(map),
            None => Ok(topo),
        }
    }
}

impl Serialize for Topology {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TopologyFile::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Topology {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = TopologyFile::deserialize(d)?;
        Topology::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// A bounded face: circular sequence of nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<NodeId>,
}

impl Polygon {
    pub fn new(vertices: Vec<NodeId>) -> Self {
        Polygon { vertices }
    }

    pub fn vertices(&self) -> &[NodeId] {
        &self.vertices
    }

    /// Number of edges (equal to the length of the closed walk).
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges of the walk as normalised `(min, max)` pairs.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let k = self.vertices.len();
        (0..k)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % k]);
                (a.min(b), a.max(b))
            })
            .collect()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.vertices.contains(&v)
    }
}

/// Static Byzantine placement plus the broadcast source.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub source: NodeId,
    pub byzantine: BTreeSet<NodeId>,
}

impl Placement {
    pub fn new(source: NodeId, byzantine: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let byzantine: BTreeSet<NodeId> = byzantine.into_iter().collect();
        if byzantine.contains(&source) {
            return Err(GraphError::Domain(format!("source {source} cannot be Byzantine")));
        }
        Ok(Placement { source, byzantine })
    }

    pub fn is_byzantine(&self, v: NodeId) -> bool {
        self.byzantine.contains(&v)
    }

    pub fn is_correct(&self, v: NodeId) -> bool {
        !self.is_byzantine(v)
    }

    pub fn check_against(&self, topo: &Topology) -> Result<()> {
        let n = topo.node_count() as NodeId;
        if self.source >= n || self.byzantine.iter().any(|&b| b >= n) {
            return Err(GraphError::Domain("placement references unknown nodes".into()));
        }
        Ok(())
    }
}

/// Minimal pairwise hop distance among Byzantine nodes (`D`); `None` is infinity.
pub fn min_byzantine_distance(topo: &Topology, placement: &Placement) -> Option<usize> {
    let byz: Vec<NodeId> = placement.byzantine.iter().copied().collect();
    let mut best: Option<usize> = None;
    for (i, &a) in byz.iter().enumerate() {
        let dist = topo.bfs(a);
        for &b in &byz[i + 1..] {
            let d = dist[b as usize].expect("topology is connected");
            best = Some(best.map_or(d, |x| x.min(d)));
        }
    }
    best
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn triangle() -> Topology {
        Topology::planar("k3", vec![vec![1, 2], vec![2, 0], vec![0, 1]]).unwrap()
    }

    pub fn path(n: usize) -> Topology {
        let rotation = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i as NodeId - 1);
                }
                if i + 1 < n {
                    v.push(i as NodeId + 1);
                }
                v
            })
            .collect();
        Topology::planar(format!("path{n}"), rotation).unwrap()
    }

    /// Octahedron: poles 0 and 5, equator 1..=4.
    pub fn octahedron() -> Topology {
        let rotation = vec![
            vec![4, 3, 2, 1],
            vec![0, 2, 5, 4],
            vec![0, 3, 5, 1],
            vec![0, 4, 5, 2],
            vec![0, 1, 5, 3],
            vec![1, 2, 3, 4],
        ];
        Topology::planar("octahedron", rotation).unwrap()
    }

    /// K5 is not planar; it is only used through its adjacency.
    pub fn k5() -> Topology {
        let rotation = (0..5u32).map(|u| (0..5u32).filter(|&v| v != u).collect()).collect();
        Topology::declared("k5", rotation, 3, Vec::new()).unwrap()
    }

    /// `w x h` planar grid patch with straight-line rotation.
    pub fn grid(w: usize, h: usize) -> Topology {
        let id = |x: usize, y: usize| (y * w + x) as NodeId;
        let mut rotation = Vec::new();
        for y in 0..h {
            for x in 0..w {
                // clockwise with y pointing up: north, east, south, west
                let mut r = Vec::new();
                if y + 1 < h {
                    r.push(id(x, y + 1));
                }
                if x + 1 < w {
                    r.push(id(x + 1, y));
                }
                if y > 0 {
                    r.push(id(x, y - 1));
                }
                if x > 0 {
                    r.push(id(x - 1, y));
                }
                rotation.push(r);
            }
        }
        Topology::planar(format!("grid{w}x{h}"), rotation).unwrap().with_outer_arc(id(1, 0), id(0, 0)).unwrap()
    }
}
