//! The critical network where `D = Z = 4` and reliable broadcast is impossible.
//!
//! Layout, from the centre outwards (indices `i` taken mod 4):
//!
//! * `s`: the source, adjacent to the inner ring `k_0..k_3`;
//! * `g_i`: grey nodes, adjacent to `k_i`, `k_{i+1}`, `x_i`, `x_{i+1}`;
//! * `x_i`: the four cut nodes; `x_0`, `x_2` are correct, `x_1`, `x_3` Byzantine;
//! * `o_i`: outer nodes, adjacent to `x_i`, `x_{i+1}`, `q_i`, `q_{i+1}`;
//! * `q_i`: the outer ring, whose 4-cycle is the outer face.
//!
//! Consecutive cut nodes are opposite corners of the quadrilateral
//! `(x_i, g_i, x_{i+1}, o_i)`, which puts the two Byzantine nodes exactly four
//! hops apart. A quarter turn `i -> i + 1` is an automorphism of the embedding
//! that fixes `s` and sends every correct cut node to a Byzantine one.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use super::generate::clockwise_rotation;
use super::{enumerate_faces, is_k_connected, min_byzantine_distance, NodeId, Placement, Topology};

#[derive(Clone, Debug)]
pub struct CriticalNetwork {
    pub topology: Topology,
    pub placement: Placement,
    /// Cut nodes in cyclic order: correct, Byzantine, correct, Byzantine.
    pub cut: [NodeId; 4],
    /// Side of the cut holding the source.
    pub grey: Vec<NodeId>,
    /// The other side.
    pub outer: Vec<NodeId>,
    /// Quarter-turn automorphism; maps each correct cut node to a Byzantine one.
    pub automorphism: Vec<NodeId>,
}

impl CriticalNetwork {
    pub fn correct_cut(&self) -> [NodeId; 2] {
        [self.cut[0], self.cut[2]]
    }

    pub fn byzantine_cut(&self) -> [NodeId; 2] {
        [self.cut[1], self.cut[3]]
    }

    /// Re-checks every structural claim; returns the first violated one.
    pub fn check(&self) -> Result<(), String> {
        let t = &self.topology;
        if !is_k_connected(t, 4).map_err(|e| e.to_string())? {
            return Err("not 4-connected".into());
        }
        if t.compute_z().map_err(|e| e.to_string())? != 4 {
            return Err("Z != 4".into());
        }
        if self.placement.byzantine.len() != 2 {
            return Err("expected exactly two Byzantine nodes".into());
        }
        if min_byzantine_distance(t, &self.placement) != Some(4) {
            return Err("D != 4".into());
        }
        let byz: BTreeSet<NodeId> = self.byzantine_cut().into_iter().collect();
        if byz != self.placement.byzantine {
            return Err("Byzantine nodes are not the odd cut positions".into());
        }
        // the cut separates the source's side from the rest
        let mut removed = self.cut.to_vec();
        removed.extend(&self.outer);
        if !t.is_connected_without(&removed) || t.is_connected_without(&self.cut) {
            return Err("cut does not isolate the grey region".into());
        }
        if !self.grey.contains(&self.placement.source) {
            return Err("source is not in the grey region".into());
        }
        let rho = &self.automorphism;
        for i in 0..4 {
            if rho[self.cut[i] as usize] != self.cut[(i + 1) % 4] {
                return Err("automorphism does not rotate the cut".into());
            }
        }
        if self.outer.iter().any(|&o| !self.outer.contains(&rho[o as usize])) {
            return Err("automorphism does not preserve the outer region".into());
        }
        if t.automorphism() != Some(rho.as_slice()) {
            return Err("automorphism not attached to the topology".into());
        }
        Ok(())
    }
}

const SOURCE: NodeId = 0;
fn ring(base: NodeId, i: usize) -> NodeId {
    base + (i % 4) as NodeId
}
const K: NodeId = 1;
const G: NodeId = 5;
const X: NodeId = 9;
const O: NodeId = 13;
const Q: NodeId = 17;

fn build() -> CriticalNetwork {
    let n = 21;
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut link = |a: NodeId, b: NodeId| {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    };
    for i in 0..4 {
        link(SOURCE, ring(K, i));
        link(ring(K, i), ring(K, i + 1));
        link(ring(G, i), ring(K, i));
        link(ring(G, i), ring(K, i + 1));
        link(ring(G, i), ring(X, i));
        link(ring(G, i), ring(X, i + 1));
        link(ring(O, i), ring(X, i));
        link(ring(O, i), ring(X, i + 1));
        link(ring(O, i), ring(Q, i));
        link(ring(O, i), ring(Q, i + 1));
        link(ring(Q, i), ring(Q, i + 1));
    }
    let polar = |radius: f64, quarter: f64| {
        let a = quarter * std::f64::consts::FRAC_PI_2;
        (radius * a.cos(), radius * a.sin())
    };
    let mut pos = vec![(0.0, 0.0); n];
    for i in 0..4 {
        let q = i as f64;
        pos[ring(K, i) as usize] = polar(1.0, q);
        pos[ring(G, i) as usize] = polar(2.0, q + 0.5);
        pos[ring(X, i) as usize] = polar(3.0, q);
        pos[ring(O, i) as usize] = polar(3.4, q + 0.5);
        pos[ring(Q, i) as usize] = polar(6.0, q);
    }
    let rotation = clockwise_rotation(&adj, &pos);
    let topo = Topology::planar("critical", rotation).expect("critical rotation is well formed");
    let faces = enumerate_faces(&topo).expect("critical rotation is planar");
    let ring_q: BTreeSet<NodeId> = (0..4).map(|i| ring(Q, i)).collect();
    let outer_face = faces
        .faces
        .iter()
        .find(|f| f.iter().copied().collect::<BTreeSet<_>>() == ring_q)
        .expect("outer ring bounds a face");
    let rho: Vec<NodeId> = std::iter::once(SOURCE)
        .chain([K, G, X, O, Q].into_iter().flat_map(|base| (0..4).map(move |i| ring(base, i + 1))))
        .collect();
    let topo = topo
        .with_outer_arc(outer_face[0], outer_face[1])
        .and_then(|t| t.with_automorphism(rho.clone()))
        .expect("outer arc and automorphism are valid");
    let cut = [ring(X, 0), ring(X, 1), ring(X, 2), ring(X, 3)];
    let placement = Placement::new(SOURCE, [cut[1], cut[3]]).expect("source is correct");
    let grey = std::iter::once(SOURCE).chain((0..4).map(|i| ring(K, i))).chain((0..4).map(|i| ring(G, i))).collect();
    let outer = (0..4).map(|i| ring(O, i)).chain((0..4).map(|i| ring(Q, i))).collect();
    CriticalNetwork { topology: topo, placement, cut, grey, outer, automorphism: rho }
}

/// The critical network, machine-checked on first use.
pub fn critical_counterexample() -> CriticalNetwork {
    static NET: OnceLock<CriticalNetwork> = OnceLock::new();
    NET.get_or_init(|| {
        let net = build();
        if let Err(why) = net.check() {
            panic!("critical network construction is inconsistent: {why}");
        }
        net
    })
    .clone()
}
