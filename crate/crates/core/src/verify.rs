//! Executable predicates over run reports and topologies.
//!
//! Every predicate is pure. A failing result names the first offending node,
//! channel or record as its witness.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{correct_polygons_connected, enumerate_polygons, GraphError, NodeId, Placement, Topology};
use crate::protocol::Info;
use crate::sim::{RunReport, TimingModel};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("verification configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub name: String,
    pub passed: bool,
    #[serde(default)]
    pub witnesses: Vec<String>,
    #[serde(default)]
    pub measured: BTreeMap<String, f64>,
}

impl VerificationResult {
    fn new(name: &str) -> Self {
        VerificationResult { name: name.into(), passed: true, witnesses: Vec::new(), measured: BTreeMap::new() }
    }

    fn fail(&mut self, witness: String) {
        if self.passed {
            self.witnesses.push(witness);
        }
        self.passed = false;
    }

    fn measure(mut self, key: &str, value: f64) -> Self {
        self.measured.insert(key.into(), value);
        self
    }
}

/// No correct node delivered anything other than `m0`.
pub fn assert_safety(report: &RunReport, m0: &Info) -> VerificationResult {
    let mut r = VerificationResult::new("safety");
    for o in report.correct_nodes() {
        if let Some(d) = o.delivered.as_ref().filter(|d| *d != m0) {
            r.fail(format!("node {} delivered {d} at tick {:?}", o.node, o.delivery_tick));
        }
    }
    r
}

/// Every correct node delivered `m0`.
pub fn assert_liveness(report: &RunReport) -> VerificationResult {
    let mut r = VerificationResult::new("liveness");
    let mut missing = 0;
    for o in report.correct_nodes() {
        if o.delivered.as_ref() != Some(&report.m0) {
            missing += 1;
            r.fail(format!("node {} has {:?} at termination {:?}", o.node, o.delivered, report.termination));
        }
    }
    r.measure("undelivered", missing as f64).measure("delivered_fraction", report.delivered_fraction())
}

/// Latest correct delivery within `Y^3 Z^3 T d` time units, in bounded mode.
pub fn assert_time_bound(
    report: &RunReport,
    topology: &Topology,
    timing: &TimingModel,
) -> Result<VerificationResult, VerifyError> {
    let t = timing
        .bound_t()
        .ok_or_else(|| VerifyError::Config("the time bound is stated for bounded timing only".into()))?;
    let (y, z, d) = (topology.compute_y() as f64, topology.compute_z()? as f64, topology.diameter() as f64);
    let bound = y.powi(3) * z.powi(3) * t * d;
    let mut r = VerificationResult::new("time_bound");
    let measured = report.max_delivery_time();
    match measured {
        Some(m) if m <= bound => {}
        Some(m) => r.fail(format!("latest delivery at {m} time units exceeds {bound}")),
        None => r.fail("no correct node delivered".into()),
    }
    Ok(r.measure("bound", bound).measure("max_delivery_time", measured.unwrap_or(f64::NAN)))
}

/// Node bound `Y(M + ZX)`; in interval mode also the channel bound `N(M + XZ)`
/// on channels between correct nodes.
pub fn assert_memory_bound(report: &RunReport, m: u64, x: u64, y: u64, z: u64) -> VerificationResult {
    let node_bound = y * (m + z * x);
    let mut r = VerificationResult::new("memory_bound");
    for o in report.correct_nodes() {
        if o.peak_state_bits > node_bound {
            r.fail(format!("node {} peaked at {} bits > {node_bound}", o.node, o.peak_state_bits));
        }
    }
    r = r.measure("node_bound", node_bound as f64).measure("peak_node_bits", report.peak_node_bits() as f64);
    if let Some(n) = report.params.channel_bound {
        let channel_bound = n * (m + x * z);
        let peak = report.channels.iter().filter(|c| c.correct).map(|c| c.peak_bits).max().unwrap_or(0);
        for c in report.channels.iter().filter(|c| c.correct) {
            if c.peak_bits > channel_bound {
                r.fail(format!("channel {}->{} peaked at {} bits > {channel_bound}", c.from, c.to, c.peak_bits));
            }
        }
        r = r.measure("channel_bound", channel_bound as f64).measure("peak_channel_bits", peak as f64);
    }
    r
}

/// Every correct node lies on a polygon without Byzantine nodes, and those
/// polygons form an edge-connected set.
pub fn check_lemma_correct_polygons(
    topology: &Topology,
    placement: &Placement,
) -> Result<VerificationResult, VerifyError> {
    let polygons = enumerate_polygons(topology)?;
    let correct: Vec<_> = polygons.iter().filter(|p| p.vertices().iter().all(|&v| placement.is_correct(v))).collect();
    let mut r = VerificationResult::new("correct_polygons");
    for v in topology.nodes().filter(|&v| placement.is_correct(v)) {
        if !correct.iter().any(|p| p.contains(v)) {
            r.fail(format!("correct node {v} lies on no correct polygon"));
        }
    }
    if !correct_polygons_connected(topology, placement)? {
        r.fail("correct polygons are not connected".into());
    }
    Ok(r.measure("correct_polygons", correct.len() as f64).measure("polygons", polygons.len() as f64))
}

/// The receive records of `a` at each node of `outer`, relabelled by the
/// automorphism, equal the receive records of `b` at the image node.
pub fn assert_indistinguishable(
    a: &RunReport,
    b: &RunReport,
    automorphism: &[NodeId],
    outer: &[NodeId],
) -> Result<VerificationResult, VerifyError> {
    if a.topology_digest != b.topology_digest {
        return Err(VerifyError::Config("the two runs use different topologies".into()));
    }
    if a.transcript.is_empty() || b.transcript.is_empty() {
        return Err(VerifyError::Config("both runs need recorded transcripts".into()));
    }
    if automorphism.len() != a.params.n {
        return Err(VerifyError::Config("automorphism length differs from node count".into()));
    }
    let mut r = VerificationResult::new("indistinguishable");
    let mut compared = 0usize;
    for &o in outer {
        let image = automorphism[o as usize];
        let left: Vec<_> = a
            .receives_at(o)
            .into_iter()
            .map(|(t, from, msg)| (t, automorphism[from as usize], msg.relabel(automorphism)))
            .collect();
        let right: Vec<_> = b.receives_at(image).into_iter().map(|(t, from, msg)| (t, from, msg.clone())).collect();
        compared += left.len();
        if left.len() != right.len() {
            r.fail(format!("node {o}: {} receives vs {} at node {image}", left.len(), right.len()));
            continue;
        }
        if let Some(i) = left.iter().zip(&right).position(|(x, y)| x != y) {
            r.fail(format!("node {o} receive #{i}: {:?} vs {:?} at node {image}", left[i], right[i]));
        }
    }
    Ok(r.measure("compared_receives", compared as f64))
}

/// Trend check for linear time: the protocol / baseline ratios across a size
/// ladder stay within a factor `spread` of each other.
pub fn assert_ratio_trend(ratios: &[f64], spread: f64) -> VerificationResult {
    let mut r = VerificationResult::new("ratio_trend");
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    if ratios.is_empty() || ratios.iter().any(|r| r.is_nan() || *r <= 0.0) {
        r.fail(format!("ratios {ratios:?} are not all positive"));
    } else if max / min > spread {
        r.fail(format!("max/min ratio {} exceeds {spread}", max / min));
    }
    r.measure("max_ratio", max).measure("min_ratio", min)
}
