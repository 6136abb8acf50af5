//! Byzantine placements and behaviours.
//!
//! A single [`Strategy`] object drives every Byzantine node of a run, so
//! Byzantine nodes may coordinate. Strategies see the whole topology and
//! placement.

mod mirror;
mod placement;

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, Placement, Topology};
use crate::protocol::{Info, Message, Outbox, ProtocolParams};

pub use mirror::Mirror;
pub use placement::{place_byzantines, PlacementError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("strategy configuration: {0}")]
    Config(String),
}

/// What a Byzantine node knows when it is activated.
#[derive(Clone, Copy, Debug)]
pub struct ByzContext<'a> {
    pub topology: &'a Topology,
    pub placement: &'a Placement,
    pub params: ProtocolParams,
    pub node: NodeId,
    /// How many times this node has been activated before.
    pub activation: u64,
    pub now: u64,
    /// Set when every node is activated at multiples of this many ticks.
    pub lockstep_period: Option<u64>,
}

pub trait Strategy: Send {
    fn name(&self) -> String;

    /// Messages sent by `ctx.node` on this activation. The inbox lists every
    /// message consumed, in processing order. Sends to non-neighbors are
    /// discarded by the harness.
    fn activate(&mut self, ctx: &ByzContext<'_>, inbox: &[(NodeId, Message)], rng: &mut ChaCha8Rng) -> Outbox;

    /// True when further activations with empty inboxes produce nothing.
    fn is_idle(&self) -> bool {
        true
    }
}

/// Serializable strategy selection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum StrategySpec {
    Silent,
    ForgeFlood { forge_count: u64 },
    Garbage,
    Mirror { m_alt: Info },
}

impl StrategySpec {
    pub fn label(&self) -> String {
        match self {
            StrategySpec::Silent => "silent".into(),
            StrategySpec::ForgeFlood { forge_count } => format!("forge_flood({forge_count})"),
            StrategySpec::Garbage => "garbage".into(),
            StrategySpec::Mirror { m_alt } => format!("mirror({m_alt})"),
        }
    }

    /// Builds the strategy for a run broadcasting `m0`.
    pub fn build(
        &self,
        topology: &Topology,
        placement: &Placement,
        params: ProtocolParams,
        m0: &Info,
    ) -> Result<Box<dyn Strategy>, AdversaryError> {
        Ok(match self {
            StrategySpec::Silent => Box::new(Silent),
            StrategySpec::ForgeFlood { forge_count } => Box::new(ForgeFlood::new(*forge_count, m0.clone())?),
            StrategySpec::Garbage => Box::new(Garbage::default()),
            StrategySpec::Mirror { m_alt } => Box::new(Mirror::new(topology, placement, params, m_alt.clone())?),
        })
    }
}

/// Sends nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct Silent;

impl Strategy for Silent {
    fn name(&self) -> String {
        "silent".into()
    }

    fn activate(&mut self, _: &ByzContext<'_>, _: &[(NodeId, Message)], _: &mut ChaCha8Rng) -> Outbox {
        Vec::new()
    }
}

/// Exhaustion attack: cycles through `forge_count` false informations. Each
/// activation sends the next one to every neighbor three ways: as a bare
/// source information, as `(m', {})`, and as `(m', S)` with `|S| = Z - 3`.
#[derive(Clone, Debug)]
pub struct ForgeFlood {
    forge_count: u64,
    m0: Info,
    next: u64,
}

impl ForgeFlood {
    pub fn new(forge_count: u64, m0: Info) -> Result<Self, AdversaryError> {
        if forge_count == 0 {
            return Err(AdversaryError::Config("forge_flood needs forge_count >= 1".into()));
        }
        Ok(ForgeFlood { forge_count, m0, next: 0 })
    }

    /// The `i`-th forged information; never equal to `m0`.
    pub fn forged(&self, i: u64) -> Info {
        let width = self.m0.as_bytes().len().max(8);
        let mut bytes = vec![0xf0; width];
        let tail = width - 8;
        bytes[tail..].copy_from_slice(&i.to_be_bytes());
        if bytes == self.m0.as_bytes() {
            bytes[0] ^= 0x0f;
        }
        Info::new(bytes)
    }
}

impl Strategy for ForgeFlood {
    fn name(&self) -> String {
        format!("forge_flood({})", self.forge_count)
    }

    fn activate(&mut self, ctx: &ByzContext<'_>, _: &[(NodeId, Message)], rng: &mut ChaCha8Rng) -> Outbox {
        let info = self.forged(self.next);
        self.next = (self.next + 1) % self.forge_count;
        let nbrs = ctx.topology.neighbors(ctx.node);
        let limit = ctx.params.max_visited();
        let mut out = Vec::with_capacity(nbrs.len() * 3);
        for &to in nbrs {
            // crafted visited sets avoid the receiver so they pass the filter
            let pool: Vec<NodeId> = ctx.topology.nodes().filter(|&v| v != to).collect();
            let crafted: BTreeSet<NodeId> = pool.choose_multiple(rng, limit).copied().collect();
            out.push((to, Message::SourceInfo(info.clone())));
            out.push((to, Message::relay(info.clone(), [])));
            out.push((to, Message::Relay { info: info.clone(), visited: crafted }));
        }
        out
    }

    fn is_idle(&self) -> bool {
        false
    }
}

/// Sends only malformed messages: oversized visited sets, the sender inside
/// its own visited set, informations over `M` bits, and bare informations
/// from a node that is not the source.
#[derive(Clone, Debug, Default)]
pub struct Garbage {
    round: u64,
}

impl Strategy for Garbage {
    fn name(&self) -> String {
        "garbage".into()
    }

    fn activate(&mut self, ctx: &ByzContext<'_>, _: &[(NodeId, Message)], rng: &mut ChaCha8Rng) -> Outbox {
        let n = ctx.topology.node_count() as NodeId;
        let small = |rng: &mut ChaCha8Rng| Info::new((0..16).map(|_| rng.random()).collect::<Vec<u8>>());
        let mut out = Vec::new();
        for &to in ctx.topology.neighbors(ctx.node) {
            let kind = (self.round + u64::from(to)) % 4;
            let msg = match kind {
                0 => {
                    let mut visited = BTreeSet::new();
                    while visited.len() < ctx.params.max_visited() + 1 {
                        visited.insert(rng.random_range(0..n));
                    }
                    Message::Relay { info: small(rng), visited }
                }
                1 => Message::relay(small(rng), [ctx.node]),
                2 => {
                    let len = (ctx.params.max_info_bits / 8) as usize + 1 + rng.random_range(0..8);
                    Message::relay(Info::new((0..len).map(|_| rng.random()).collect::<Vec<u8>>()), [])
                }
                _ => Message::SourceInfo(small(rng)),
            };
            out.push((to, msg));
        }
        self.round += 1;
        out
    }

    fn is_idle(&self) -> bool {
        false
    }
}
