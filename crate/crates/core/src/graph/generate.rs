use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{critical_counterexample, enumerate_faces, GraphError, NodeId, Result, Topology};

/// Benchmark topology families.
///
/// The planar families are polar grids: `rings` concentric cycles of
/// `sectors` nodes, capped by a pole on each side. Cells between rings are
/// quadrilaterals (split into triangles for `Triangulation`); the caps are
/// triangles. One south-cap triangle is the outer face.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// `w x h` torus; non-planar baseline with `Z` declared as 4.
    Torus {
        w: usize,
        h: usize,
    },
    #[serde(alias = "quad_annulus")]
    Quadrangulation {
        rings: usize,
        sectors: usize,
    },
    Triangulation {
        rings: usize,
        sectors: usize,
    },
    /// The fixed network where `D = Z = 4` defeats reliable broadcast.
    Critical,
}

impl GeneratorKind {
    pub fn name(&self) -> String {
        match self {
            GeneratorKind::Torus { w, h } => format!("torus({w},{h})"),
            GeneratorKind::Quadrangulation { rings, sectors } => format!("quadrangulation({rings},{sectors})"),
            GeneratorKind::Triangulation { rings, sectors } => format!("triangulation({rings},{sectors})"),
            GeneratorKind::Critical => "critical".to_string(),
        }
    }
}

/// Deterministic in `(kind, seed)`. Planar outputs are validated: consistent
/// embedding, minimum degree 4 and 4-connectivity.
pub fn generate(kind: &GeneratorKind, seed: u64) -> Result<Topology> {
    let topo = match *kind {
        GeneratorKind::Torus { w, h } => torus(w, h)?,
        GeneratorKind::Quadrangulation { rings, sectors } => polar_grid(rings, sectors, None)?,
        GeneratorKind::Triangulation { rings, sectors } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            polar_grid(rings, sectors, Some(&mut rng))?
        }
        GeneratorKind::Critical => return Ok(critical_counterexample().topology),
    };
    topo.validate_for_protocol()
        .map_err(|e| GraphError::Generation(format!("{} failed validation: {e}", kind.name())))?;
    Ok(topo)
}

fn torus(w: usize, h: usize) -> Result<Topology> {
    if w < 5 || h < 5 {
        return Err(GraphError::Generation(format!(
            "torus({w},{h}): both sides must be at least 5 so that 4-cycles are the only short cycles"
        )));
    }
    let id = |x: usize, y: usize| ((y % h) * w + (x % w)) as NodeId;
    let mut rotation = Vec::with_capacity(w * h);
    let mut polygons = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            rotation.push(vec![id(x, y + 1), id(x + 1, y), id(x, y + h - 1), id(x + w - 1, y)]);
            polygons.push(vec![id(x, y), id(x + 1, y), id(x + 1, y + 1), id(x, y + 1)]);
        }
    }
    Topology::declared(format!("torus({w},{h})"), rotation, 4, polygons)
}

fn polar_grid(rings: usize, sectors: usize, diagonals: Option<&mut ChaCha8Rng>) -> Result<Topology> {
    let family = if diagonals.is_some() { "triangulation" } else { "quadrangulation" };
    if rings < 2 || sectors < 4 {
        return Err(GraphError::Generation(format!(
            "{family}({rings},{sectors}): need at least 2 rings of at least 4 sectors for degree >= 4"
        )));
    }
    if diagonals.is_some() && sectors < 5 {
        return Err(GraphError::Generation(format!(
            "{family}({rings},{sectors}): 4 sectors create separating triangles; use at least 5"
        )));
    }
    let m = sectors;
    let north: NodeId = 0;
    let south = (1 + rings * m) as NodeId;
    let node = |ring: usize, sector: usize| (1 + ring * m + sector % m) as NodeId;
    let n = rings * m + 2;
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut link = |a: NodeId, b: NodeId| {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    };
    for s in 0..m {
        link(north, node(0, s));
        link(south, node(rings - 1, s));
        for r in 0..rings {
            link(node(r, s), node(r, s + 1));
            if r + 1 < rings {
                link(node(r, s), node(r + 1, s));
            }
        }
    }
    if let Some(rng) = diagonals {
        for r in 0..rings - 1 {
            for s in 0..m {
                if rng.random_bool(0.5) {
                    link(node(r, s), node(r + 1, s + 1));
                } else {
                    link(node(r, s + 1), node(r + 1, s));
                }
            }
        }
    }
    // straight-line drawing: north pole at the origin, ring r on radius r + 1
    let mut pos = vec![(0.0, 0.0); n];
    for r in 0..rings {
        for s in 0..m {
            let angle = TAU * s as f64 / m as f64;
            let radius = (r + 1) as f64;
            pos[node(r, s) as usize] = (radius * angle.cos(), radius * angle.sin());
        }
    }
    // The south pole sits at infinity: edges towards it point radially
    // outwards, and seen from there the outer ring runs the other way round.
    let mut rotation = clockwise_by_direction(&adj, |u, w| {
        let (ux, uy) = pos[u as usize];
        if w == south {
            (ux, uy)
        } else {
            let (wx, wy) = pos[w as usize];
            (wx - ux, wy - uy)
        }
    });
    rotation[south as usize] = (0..m).map(|s| node(rings - 1, s)).collect();
    let topo = Topology::planar(format!("{family}({rings},{m})"), rotation)?;
    let cap: BTreeSet<NodeId> = [south, node(rings - 1, 0), node(rings - 1, 1)].into();
    let faces = enumerate_faces(&topo)?;
    let outer = faces
        .faces
        .iter()
        .find(|f| f.iter().copied().collect::<BTreeSet<_>>() == cap)
        .ok_or_else(|| GraphError::Generation(format!("{}: south cap is not a face", topo.label())))?;
    let (a, b) = (outer[0], outer[1]);
    topo.with_outer_arc(a, b)
}

/// Orders every adjacency list clockwise around its node's drawing position.
pub(crate) fn clockwise_rotation(adj: &[Vec<NodeId>], pos: &[(f64, f64)]) -> Vec<Vec<NodeId>> {
    clockwise_by_direction(adj, |u, w| {
        let ((ux, uy), (wx, wy)) = (pos[u as usize], pos[w as usize]);
        (wx - ux, wy - uy)
    })
}

fn clockwise_by_direction(adj: &[Vec<NodeId>], dir: impl Fn(NodeId, NodeId) -> (f64, f64)) -> Vec<Vec<NodeId>> {
    adj.iter()
        .enumerate()
        .map(|(u, nbrs)| {
            let mut keyed: Vec<(f64, NodeId)> = nbrs
                .iter()
                .map(|&w| {
                    let (dx, dy) = dir(u as NodeId, w);
                    (dy.atan2(dx), w)
                })
                .collect();
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
            keyed.into_iter().map(|(_, w)| w).collect()
        })
        .collect()
}
