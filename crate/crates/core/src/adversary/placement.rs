use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{min_byzantine_distance, NodeId, Placement, Topology};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlacementError {
    #[error("no placement of {count} Byzantine nodes at pairwise distance >= {min_distance} found in {tries} tries")]
    Infeasible { count: usize, min_distance: usize, tries: usize },
    #[error("source {0} is not a node of the topology")]
    BadSource(NodeId),
}

const RETRY_BUDGET: usize = 20_000;

/// Samples `count` Byzantine nodes uniformly among non-source nodes until the
/// pairwise hop distance is at least `min_distance`. Returns the placement
/// and the achieved `D` (`None` when fewer than two Byzantine nodes).
pub fn place_byzantines(
    topology: &Topology,
    source: NodeId,
    count: usize,
    min_distance: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Placement, Option<usize>), PlacementError> {
    let n = topology.node_count();
    if source as usize >= n {
        return Err(PlacementError::BadSource(source));
    }
    let candidates: Vec<NodeId> = topology.nodes().filter(|&v| v != source).collect();
    let infeasible = PlacementError::Infeasible { count, min_distance, tries: RETRY_BUDGET };
    if count > candidates.len() {
        return Err(infeasible);
    }
    if count >= 2 && min_distance > topology.diameter() {
        return Err(infeasible);
    }
    let dist: Vec<Vec<Option<usize>>> =
        if count >= 2 { topology.nodes().map(|v| topology.bfs(v)).collect() } else { Vec::new() };
    for _ in 0..RETRY_BUDGET {
        let picked: Vec<NodeId> = sample(rng, candidates.len(), count).into_iter().map(|i| candidates[i]).collect();
        let ok = picked.iter().enumerate().all(|(i, &a)| {
            picked[i + 1..].iter().all(|&b| dist[a as usize][b as usize].is_some_and(|d| d >= min_distance))
        });
        if ok {
            let placement = Placement::new(source, picked).expect("source excluded");
            let d = min_byzantine_distance(topology, &placement);
            return Ok((placement, d));
        }
    }
    Err(infeasible)
}
