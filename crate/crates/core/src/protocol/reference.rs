//! Reference processes used as baselines.

use std::collections::{BTreeSet, HashMap};

use super::{Info, Message, NodeState, Outbox, ProtocolError, ProtocolParams, Role};
use crate::graph::NodeId;

/// Same rules as [`NodeState`], except that every accepted tuple is kept
/// instead of only the last one per neighbor. Memory grows with the number
/// of distinct informations an adversary injects.
#[derive(Clone, Debug)]
pub struct StoreAllNode {
    inner: NodeState,
    stored: BTreeSet<(NodeId, Info, BTreeSet<NodeId>)>,
}

impl StoreAllNode {
    pub fn new(id: NodeId, neighbors: Vec<NodeId>, source: NodeId, params: ProtocolParams) -> Self {
        StoreAllNode { inner: NodeState::new(id, neighbors, source, params), stored: BTreeSet::new() }
    }

    pub fn source_start(&mut self, m0: Info) -> Result<Outbox, ProtocolError> {
        self.inner.source_start(m0)
    }

    pub fn delivered(&self) -> Option<&Info> {
        self.inner.delivered()
    }

    pub fn is_stopped(&self) -> bool {
        self.inner.is_stopped()
    }

    pub fn handle_message(&mut self, from: NodeId, msg: &Message) -> Result<Outbox, ProtocolError> {
        let Message::Relay { info, visited } = msg else {
            return self.inner.handle_message(from, msg);
        };
        if self.inner.role() != Role::Inner || self.inner.is_stopped() {
            return self.inner.handle_message(from, msg);
        }
        if !self.inner.neighbors().contains(&from) {
            return Err(ProtocolError::NotNeighbor { node: self.inner.id(), from });
        }
        if !self.inner.accepts_relay(from, info, visited) {
            return Ok(Vec::new());
        }
        self.stored.insert((from, info.clone(), visited.clone()));
        let mut forwarded = visited.clone();
        forwarded.insert(from);
        let relay = Message::Relay { info: info.clone(), visited: forwarded };
        let mut out: Outbox = self.inner.neighbors().iter().map(|&n| (n, relay.clone())).collect();
        if let Some(m) = self.check_delivery() {
            out.extend(self.inner.neighbors().iter().map(|&n| (n, Message::relay(m.clone(), []))));
            self.inner = self.inner.clone().into_delivered(m);
        }
        Ok(out)
    }

    fn check_delivery(&self) -> Option<Info> {
        let mut by_info: HashMap<&Info, Vec<(NodeId, &BTreeSet<NodeId>)>> = HashMap::new();
        for (from, info, visited) in &self.stored {
            by_info.entry(info).or_default().push((*from, visited));
        }
        by_info
            .into_iter()
            .filter(|(_, tuples)| {
                tuples.iter().any(|(q, s)| s.is_empty() && tuples.iter().any(|(p, other)| p != q && !other.contains(q)))
            })
            .map(|(info, _)| info.clone())
            .min()
    }

    pub fn state_size_bits(&self, id_bits: u64) -> u64 {
        self.stored.iter().map(|(_, info, s)| info.bits() + id_bits * s.len() as u64).sum()
    }
}

impl NodeState {
    pub(crate) fn into_delivered(mut self, m: Info) -> Self {
        self.delivered = Some(m);
        self.stopped = true;
        self
    }
}

/// Simple broadcast: forward the first information once, deliver it, stop.
#[derive(Clone, Debug)]
pub struct FloodNode {
    id: NodeId,
    neighbors: Vec<NodeId>,
    delivered: Option<Info>,
}

impl FloodNode {
    pub fn new(id: NodeId, neighbors: Vec<NodeId>) -> Self {
        FloodNode { id, neighbors, delivered: None }
    }

    pub fn source_start(&mut self, m0: Info) -> Result<Outbox, ProtocolError> {
        if self.delivered.is_some() {
            return Err(ProtocolError::AlreadyStarted(self.id));
        }
        self.delivered = Some(m0.clone());
        Ok(self.neighbors.iter().map(|&n| (n, Message::SourceInfo(m0.clone()))).collect())
    }

    pub fn delivered(&self) -> Option<&Info> {
        self.delivered.as_ref()
    }

    pub fn is_stopped(&self) -> bool {
        self.delivered.is_some()
    }

    pub fn handle_message(&mut self, from: NodeId, msg: &Message) -> Result<Outbox, ProtocolError> {
        if !self.neighbors.contains(&from) {
            return Err(ProtocolError::NotNeighbor { node: self.id, from });
        }
        if self.delivered.is_some() {
            return Ok(Vec::new());
        }
        let info = msg.info().clone();
        self.delivered = Some(info.clone());
        Ok(self.neighbors.iter().map(|&n| (n, Message::relay(info.clone(), []))).collect())
    }
}
