//! Per-node broadcast state machine.
//!
//! * The source multicasts `m0` as a bare [`Message::SourceInfo`].
//! * A neighbor of the source waits for that information, delivers it,
//!   multicasts `(m, {})` and stops.
//! * Any other correct node, on receiving `(m, S)` from `q` with `q ∉ S` and
//!   `|S| <= Z - 3`, overwrites `Rec(q)` and multicasts `(m, S ∪ {q})`. It
//!   delivers `m`, multicasts `(m, {})` and stops as soon as two different
//!   neighbors `q`, `p` hold `Rec(q) = (m, {})` and `Rec(p) = (m, S)` with `q ∉ S`.

mod message;
mod reference;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;

pub use message::{Info, Message, WireError};
pub use reference::{FloodNode, StoreAllNode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("node {0} is not the source")]
    NotSource(NodeId),
    #[error("source {0} already started")]
    AlreadyStarted(NodeId),
    #[error("node {node} received from non-neighbor {from}")]
    NotNeighbor { node: NodeId, from: NodeId },
    #[error("information of {bits} bits exceeds the {max}-bit limit")]
    InfoTooLarge { bits: u64, max: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Source,
    SourceNeighbor,
    Inner,
}

/// Protocol parameters known to every correct node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// `Z`: maximal polygon size.
    pub z: usize,
    /// `M`: maximal information size in bits.
    pub max_info_bits: u64,
}

impl ProtocolParams {
    /// Largest visited set a node accepts: `Z - 3`.
    pub fn max_visited(&self) -> usize {
        self.z.saturating_sub(3)
    }
}

pub type Outbox = Vec<(NodeId, Message)>;

/// A stored relay tuple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecEntry {
    pub info: Info,
    pub visited: BTreeSet<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeState {
    id: NodeId,
    role: Role,
    neighbors: Vec<NodeId>,
    source: NodeId,
    params: ProtocolParams,
    rec: BTreeMap<NodeId, RecEntry>,
    delivered: Option<Info>,
    stopped: bool,
}

impl NodeState {
    pub fn new(id: NodeId, neighbors: Vec<NodeId>, source: NodeId, params: ProtocolParams) -> Self {
        let role = if id == source {
            Role::Source
        } else if neighbors.contains(&source) {
            Role::SourceNeighbor
        } else {
            Role::Inner
        };
        NodeState { id, role, neighbors, source, params, rec: BTreeMap::new(), delivered: None, stopped: false }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn params(&self) -> ProtocolParams {
        self.params
    }

    pub fn neighbors(&self) -> &[NodeId] {
        &self.neighbors
    }

    pub fn rec(&self) -> &BTreeMap<NodeId, RecEntry> {
        &self.rec
    }

    pub fn delivered(&self) -> Option<&Info> {
        self.delivered.as_ref()
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    fn multicast(&self, msg: Message) -> Outbox {
        self.neighbors.iter().map(|&n| (n, msg.clone())).collect()
    }

    /// The source multicasts `m0` and counts as having delivered it.
    pub fn source_start(&mut self, m0: Info) -> Result<Outbox, ProtocolError> {
        if self.role != Role::Source {
            return Err(ProtocolError::NotSource(self.id));
        }
        if self.stopped {
            return Err(ProtocolError::AlreadyStarted(self.id));
        }
        if m0.bits() > self.params.max_info_bits {
            return Err(ProtocolError::InfoTooLarge { bits: m0.bits(), max: self.params.max_info_bits });
        }
        let out = self.multicast(Message::SourceInfo(m0.clone()));
        self.delivered = Some(m0);
        self.stopped = true;
        Ok(out)
    }

    /// Acceptance rule for relay tuples: `from ∉ S`, `|S| <= Z - 3`, info within `M` bits.
    pub fn accepts_relay(&self, from: NodeId, info: &Info, visited: &BTreeSet<NodeId>) -> bool {
        !visited.contains(&from)
            && visited.len() <= self.params.max_visited()
            && info.bits() <= self.params.max_info_bits
    }

    pub fn handle_message(&mut self, from: NodeId, msg: &Message) -> Result<Outbox, ProtocolError> {
        if !self.neighbors.contains(&from) {
            return Err(ProtocolError::NotNeighbor { node: self.id, from });
        }
        if self.stopped {
            return Ok(Vec::new());
        }
        match (self.role, msg) {
            (Role::Source, _) => Ok(Vec::new()),
            (Role::SourceNeighbor, Message::SourceInfo(info)) => {
                // authenticated channel: only the real source counts
                if from != self.source || info.bits() > self.params.max_info_bits {
                    return Ok(Vec::new());
                }
                Ok(self.deliver(info.clone()))
            }
            (Role::SourceNeighbor, Message::Relay { .. }) => Ok(Vec::new()),
            (Role::Inner, Message::SourceInfo(_)) => Ok(Vec::new()),
            (Role::Inner, Message::Relay { info, visited }) => {
                if !self.accepts_relay(from, info, visited) {
                    return Ok(Vec::new());
                }
                self.rec.insert(from, RecEntry { info: info.clone(), visited: visited.clone() });
                let mut forwarded = visited.clone();
                forwarded.insert(from);
                let mut out = self.multicast(Message::Relay { info: info.clone(), visited: forwarded });
                if let Some(m) = self.check_delivery() {
                    out.extend(self.deliver(m));
                }
                Ok(out)
            }
        }
    }

    fn deliver(&mut self, m: Info) -> Outbox {
        let out = self.multicast(Message::relay(m.clone(), []));
        self.delivered = Some(m);
        self.stopped = true;
        out
    }

    /// Two-witness predicate over the current `Rec` map. When several
    /// informations qualify the smallest one wins.
    pub fn check_delivery(&self) -> Option<Info> {
        if self.role != Role::Inner || self.stopped {
            return None;
        }
        let mut best: Option<&Info> = None;
        for (q, direct) in &self.rec {
            if !direct.visited.is_empty() {
                continue;
            }
            let witnessed =
                self.rec.iter().any(|(p, other)| p != q && other.info == direct.info && !other.visited.contains(q));
            if witnessed && best.is_none_or(|b| direct.info < *b) {
                best = Some(&direct.info);
            }
        }
        best.cloned()
    }

    /// Semantic memory: info bits plus `id_bits` per stored identifier.
    pub fn state_size_bits(&self, id_bits: u64) -> u64 {
        self.rec.values().map(|e| e.info.bits() + id_bits * e.visited.len() as u64).sum()
    }
}
