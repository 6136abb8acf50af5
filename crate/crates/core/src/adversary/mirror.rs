//! Symmetry attack on the critical network.
//!
//! The adversary privately runs the protocol on a two-fold cover `H` of the
//! network. `H` has copies `(v, A)` and `(v, B)` of every node; an edge
//! between a grey node and a Byzantine node joins opposite copies, every
//! other edge joins equal copies. The real correct nodes are the `A` copies.
//! The adversary simulates all `B` copies of correct nodes (with a second
//! source broadcasting `m_alt`) and both copies of each Byzantine node `b`:
//! real messages from outer neighbors feed `(b, A)`, real messages from grey
//! neighbors feed `(b, B)`, and whatever those copies send to real nodes is
//! what `b` sends.
//!
//! Swapping copies on the grey side and turning by the quarter-turn
//! automorphism is an automorphism of `H` that swaps the two sources and maps
//! real outer nodes to real outer nodes. Under lockstep activations and
//! rotation-equivariant inbox order, the outer region therefore sees the same
//! thing whether the source broadcast `m0` or `m_alt`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand_chacha::ChaCha8Rng;

use super::{AdversaryError, ByzContext, Strategy};
use crate::graph::{critical_counterexample, NodeId, Placement, Topology};
use crate::protocol::{Info, Message, NodeState, Outbox, ProtocolParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Copy {
    A,
    B,
}

impl Copy {
    fn flip(self) -> Copy {
        match self {
            Copy::A => Copy::B,
            Copy::B => Copy::A,
        }
    }
}

type Cover = (NodeId, Copy);

#[derive(Clone, Debug)]
struct Pending {
    round: u64,
    from: NodeId,
    to: Cover,
    msg: Message,
}

pub struct Mirror {
    m_alt: Info,
    source: NodeId,
    byzantine: BTreeSet<NodeId>,
    grey: BTreeSet<NodeId>,
    neighbors: Vec<Vec<NodeId>>,
    ranks: Vec<HashMap<NodeId, usize>>,
    nodes: BTreeMap<Cover, NodeState>,
    pending: Vec<Pending>,
    stepped: Option<u64>,
}

impl Mirror {
    pub fn new(
        topology: &Topology,
        placement: &Placement,
        params: ProtocolParams,
        m_alt: Info,
    ) -> Result<Self, AdversaryError> {
        let net = critical_counterexample();
        if *topology != net.topology || *placement != net.placement {
            return Err(AdversaryError::Config("mirror only applies to the critical network and its placement".into()));
        }
        if m_alt.bits() > params.max_info_bits {
            return Err(AdversaryError::Config(format!(
                "m_alt has {} bits, above M = {}",
                m_alt.bits(),
                params.max_info_bits
            )));
        }
        let neighbors: Vec<Vec<NodeId>> = topology.nodes().map(|v| topology.neighbors(v).to_vec()).collect();
        let mut nodes = BTreeMap::new();
        for v in topology.nodes() {
            let state = || NodeState::new(v, neighbors[v as usize].clone(), placement.source, params);
            nodes.insert((v, Copy::B), state());
            if placement.is_byzantine(v) {
                nodes.insert((v, Copy::A), state());
            }
        }
        Ok(Mirror {
            m_alt,
            source: placement.source,
            byzantine: placement.byzantine.clone(),
            grey: net.grey.iter().copied().collect(),
            neighbors,
            ranks: topology.port_ranks(),
            nodes,
            pending: Vec::new(),
            stepped: None,
        })
    }

    fn crosses(&self, u: NodeId, w: NodeId) -> bool {
        (self.grey.contains(&u) && self.byzantine.contains(&w))
            || (self.byzantine.contains(&u) && self.grey.contains(&w))
    }

    /// Routes the sends of cover node `from` in `round`; returns the real ones.
    fn route(&mut self, round: u64, from: Cover, out: Outbox) -> Outbox {
        let mut real = Vec::new();
        for (w, msg) in out {
            let copy = if self.crosses(from.0, w) { from.1.flip() } else { from.1 };
            if copy == Copy::A && !self.byzantine.contains(&w) {
                real.push((w, msg));
            } else {
                self.pending.push(Pending { round, from: from.0, to: (w, copy), msg });
            }
        }
        real
    }

    /// Runs one activation of cover node `id` on the given messages, sorted
    /// by sender rank (stable, so each sender's own order is kept).
    fn step(&mut self, round: u64, id: Cover, mut inbox: Vec<(NodeId, Message)>) -> Outbox {
        let ranks = &self.ranks[id.0 as usize];
        inbox.sort_by_key(|(from, _)| ranks[from]);
        let state = self.nodes.get_mut(&id).expect("simulated node");
        let mut out = Vec::new();
        if id.0 == self.source && !state.is_stopped() {
            out = state.source_start(self.m_alt.clone()).expect("simulated source starts once");
        }
        for (from, msg) in &inbox {
            out.extend(state.handle_message(*from, msg).expect("cover edges are edges"));
        }
        self.route(round, id, out)
    }

    fn take_pending(&mut self, round: u64, to: Cover) -> Vec<(NodeId, Message)> {
        let mut taken = Vec::new();
        self.pending.retain(|p| {
            if p.to == to && p.round < round {
                taken.push((p.from, p.msg.clone()));
                false
            } else {
                true
            }
        });
        taken
    }

    fn step_virtual(&mut self, round: u64) {
        let ids: Vec<Cover> = self.nodes.keys().copied().filter(|(v, _)| !self.byzantine.contains(v)).collect();
        let inboxes: Vec<_> = ids.iter().map(|&id| self.take_pending(round, id)).collect();
        for (id, inbox) in ids.into_iter().zip(inboxes) {
            let real = self.step(round, id, inbox);
            debug_assert!(real.is_empty(), "only Byzantine copies reach real nodes");
        }
    }
}

impl Strategy for Mirror {
    fn name(&self) -> String {
        format!("mirror({})", self.m_alt)
    }

    fn activate(&mut self, ctx: &ByzContext<'_>, inbox: &[(NodeId, Message)], _: &mut ChaCha8Rng) -> Outbox {
        let round = ctx.activation;
        if self.stepped.is_none_or(|r| r < round) {
            self.step_virtual(round);
            self.stepped = Some(round);
        }
        let b = ctx.node;
        let mut outer_side = self.take_pending(round, (b, Copy::A));
        let mut grey_side = self.take_pending(round, (b, Copy::B));
        for (from, msg) in inbox {
            if self.grey.contains(from) {
                grey_side.push((*from, msg.clone()));
            } else {
                outer_side.push((*from, msg.clone()));
            }
        }
        let mut real = self.step(round, (b, Copy::A), outer_side);
        real.extend(self.step(round, (b, Copy::B), grey_side));
        debug_assert!(real.iter().all(|(w, _)| self.neighbors[b as usize].contains(w)));
        real
    }

    fn is_idle(&self) -> bool {
        self.stepped.is_some() && self.pending.is_empty()
    }
}
