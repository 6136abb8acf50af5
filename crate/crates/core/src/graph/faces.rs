use std::collections::{BTreeSet, HashMap};

use super::{Embedding, GraphError, NodeId, Placement, Polygon, Result, Topology};

/// Every face of a planar rotation system, with the outer face singled out.
#[derive(Clone, Debug)]
pub struct FaceSet {
    pub faces: Vec<Vec<NodeId>>,
    pub outer: usize,
    /// Face index of every arc, keyed by `(tail, head)`.
    pub arc_face: HashMap<(NodeId, NodeId), usize>,
}

impl FaceSet {
    pub fn bounded(&self) -> impl Iterator<Item = &Vec<NodeId>> {
        self.faces.iter().enumerate().filter(move |(i, _)| *i != self.outer).map(|(_, f)| f)
    }
}

/// Traces all faces of the rotation system. After arriving at `v` through
/// `u -> v`, the walk leaves along the neighbor following `u` in `v`'s
/// clockwise order. Every arc lies on exactly one face.
pub fn enumerate_faces(topo: &Topology) -> Result<FaceSet> {
    let Embedding::Planar { outer } = topo.embedding() else {
        return Err(GraphError::Embedding("face tracing needs a planar rotation system".into()));
    };
    let n = topo.node_count();
    let mut position: HashMap<(NodeId, NodeId), usize> = HashMap::new();
    for u in topo.nodes() {
        for (i, &w) in topo.neighbors(u).iter().enumerate() {
            position.insert((u, w), i);
        }
    }
    let mut arc_face: HashMap<(NodeId, NodeId), usize> = HashMap::with_capacity(position.len());
    let mut faces = Vec::new();
    for u in topo.nodes() {
        for &v in topo.neighbors(u) {
            if arc_face.contains_key(&(u, v)) {
                continue;
            }
            let id = faces.len();
            let mut walk = Vec::new();
            let (mut a, mut b) = (u, v);
            loop {
                if arc_face.insert((a, b), id).is_some() {
                    return Err(GraphError::Embedding(format!("arc {a}->{b} traced twice")));
                }
                walk.push(a);
                let rot = topo.neighbors(b);
                let next = rot[(position[&(b, a)] + 1) % rot.len()];
                (a, b) = (b, next);
                if (a, b) == (u, v) {
                    break;
                }
            }
            faces.push(walk);
        }
    }
    let v = n as i64;
    let e = topo.edge_count() as i64;
    let f = faces.len() as i64;
    if v - e + f != 2 {
        return Err(GraphError::Embedding(format!(
            "rotation system is not planar: V - E + F = {v} - {e} + {f} = {}",
            v - e + f
        )));
    }
    let outer = match outer {
        Some(arc) => arc_face[arc],
        None => {
            let longest = faces.iter().map(Vec::len).max().unwrap_or(0);
            faces.iter().position(|f| f.len() == longest).unwrap_or(0)
        }
    };
    Ok(FaceSet { faces, outer, arc_face })
}

/// Polygons: the bounded faces, or the declared cells for non-planar baselines.
pub fn enumerate_polygons(topo: &Topology) -> Result<Vec<Polygon>> {
    match topo.embedding() {
        Embedding::Declared { polygons, .. } => Ok(polygons.iter().cloned().map(Polygon::new).collect()),
        Embedding::Planar { .. } => {
            let faces = enumerate_faces(topo)?;
            Ok(faces.bounded().cloned().map(Polygon::new).collect())
        }
    }
}

/// Two polygons are adjacent when they share at least one edge.
pub fn polygon_adjacent(p: &Polygon, q: &Polygon) -> bool {
    let pe: BTreeSet<_> = p.edges().into_iter().collect();
    q.edges().iter().any(|e| pe.contains(e))
}

/// Whether the polygons containing no Byzantine node form a connected set
/// under edge-adjacency.
pub fn correct_polygons_connected(topo: &Topology, placement: &Placement) -> Result<bool> {
    let polygons = enumerate_polygons(topo)?;
    let correct: Vec<&Polygon> =
        polygons.iter().filter(|p| p.vertices().iter().all(|&v| placement.is_correct(v))).collect();
    Ok(polygon_set_connected(&correct))
}

pub(crate) fn polygon_set_connected(polys: &[&Polygon]) -> bool {
    if polys.len() <= 1 {
        return true;
    }
    let mut by_edge: HashMap<(NodeId, NodeId), Vec<usize>> = HashMap::new();
    for (i, p) in polys.iter().enumerate() {
        for e in p.edges() {
            by_edge.entry(e).or_default().push(i);
        }
    }
    let mut seen = vec![false; polys.len()];
    seen[0] = true;
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        for e in polys[i].edges() {
            for &j in &by_edge[&e] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn triangle_has_one_bounded_face() {
        let polys = enumerate_polygons(&triangle()).unwrap();
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].len(), 3);
    }

    #[test]
    fn octahedron_has_seven_bounded_triangles() {
        // Euler: F = 2 - 6 + 12 = 8, one of which is outer.
        let oct = octahedron();
        let polys = enumerate_polygons(&oct).unwrap();
        assert_eq!(polys.len(), 7);
        assert!(polys.iter().all(|p| p.len() == 3));
        assert_eq!(oct.compute_z().unwrap(), 3);
    }

    #[test]
    fn grid_patch_has_unit_cells() {
        let g = grid(4, 4);
        let polys = enumerate_polygons(&g).unwrap();
        assert_eq!(polys.len(), 9);
        assert_eq!(g.compute_z().unwrap(), 4);
    }

    #[test]
    fn every_arc_on_exactly_one_face() {
        let g = grid(5, 3);
        let faces = enumerate_faces(&g).unwrap();
        let total: usize = faces.faces.iter().map(Vec::len).sum();
        assert_eq!(total, 2 * g.edge_count());
        assert_eq!(faces.arc_face.len(), 2 * g.edge_count());
    }

    #[test]
    fn inconsistent_rotation_fails_euler() {
        // octahedron with one node's cyclic order scrambled
        let mut rot = octahedron().rotation().to_vec();
        rot[1] = vec![0, 5, 2, 4];
        let t = Topology::planar("scrambled", rot).unwrap();
        assert!(matches!(enumerate_faces(&t), Err(GraphError::Embedding(_))));
    }

    #[test]
    fn adjacency_needs_a_shared_edge() {
        let g = grid(3, 3);
        let polys = enumerate_polygons(&g).unwrap();
        let cell = |x: u32, y: u32| {
            let corner = y * 3 + x;
            polys
                .iter()
                .find(|p| {
                    let mut v = p.vertices().to_vec();
                    v.sort_unstable();
                    v == [corner, corner + 1, corner + 3, corner + 4]
                })
                .unwrap()
        };
        assert!(polygon_adjacent(cell(0, 0), cell(1, 0)));
        assert!(!polygon_adjacent(cell(0, 0), cell(1, 1)));
    }

    #[test]
    fn no_byzantines_means_connected() {
        let g = grid(4, 4);
        let p = Placement::new(0, []).unwrap();
        assert!(correct_polygons_connected(&g, &p).unwrap());
    }

    #[test]
    fn a_column_of_byzantines_disconnects_the_grid() {
        let g = grid(5, 3);
        // middle column x = 2: nodes 2, 7, 12
        let p = Placement::new(0, [2, 7, 12]).unwrap();
        assert!(!correct_polygons_connected(&g, &p).unwrap());
    }
}
