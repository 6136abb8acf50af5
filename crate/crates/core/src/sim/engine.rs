use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{
    to_ticks, ChannelPeak, NodeKind, NodeOutcome, Record, RunParams, RunReport, RunSpec, SchedulerPolicy, SimError,
    Termination, TimingModel, FORMAT_VERSION, MIN_HORIZON, TICKS_PER_UNIT,
};
use crate::adversary::{ByzContext, Strategy, StrategySpec};
use crate::graph::{min_byzantine_distance, NodeId, Topology};
use crate::protocol::{FloodNode, Info, Message, NodeState, Outbox, ProtocolParams, StoreAllNode};

enum Correct {
    Standard(NodeState),
    StoreAll(StoreAllNode),
    Flood(FloodNode),
}

impl Correct {
    fn start(&mut self, m0: Info) -> Outbox {
        let out = match self {
            Correct::Standard(s) => s.source_start(m0),
            Correct::StoreAll(s) => s.source_start(m0),
            Correct::Flood(s) => s.source_start(m0),
        };
        out.expect("source starts once with a valid information")
    }

    fn handle(&mut self, from: NodeId, msg: &Message) -> Outbox {
        let out = match self {
            Correct::Standard(s) => s.handle_message(from, msg),
            Correct::StoreAll(s) => s.handle_message(from, msg),
            Correct::Flood(s) => s.handle_message(from, msg),
        };
        out.expect("the harness only delivers along edges")
    }

    fn delivered(&self) -> Option<&Info> {
        match self {
            Correct::Standard(s) => s.delivered(),
            Correct::StoreAll(s) => s.delivered(),
            Correct::Flood(s) => s.delivered(),
        }
    }

    fn stopped(&self) -> bool {
        match self {
            Correct::Standard(s) => s.is_stopped(),
            Correct::StoreAll(s) => s.is_stopped(),
            Correct::Flood(s) => s.is_stopped(),
        }
    }

    fn state_bits(&self, id_bits: u64) -> u64 {
        match self {
            Correct::Standard(s) => s.state_size_bits(id_bits),
            Correct::StoreAll(s) => s.state_size_bits(id_bits),
            Correct::Flood(s) => s.delivered().map_or(0, Info::bits),
        }
    }
}

struct InFlight {
    arrival: u64,
    rank: usize,
    seq: u64,
    from: NodeId,
    msg: Message,
}

#[derive(Default, Clone, Copy)]
struct Load {
    messages: u64,
    bits: u64,
    peak_messages: u64,
    peak_bits: u64,
}

/// Activation gaps and message delays, in ticks.
struct Clock {
    policy: SchedulerPolicy,
    timing: TimingModel,
    seed: u64,
    rng: ChaCha8Rng,
}

impl Clock {
    fn period(&self) -> u64 {
        match self.timing {
            TimingModel::Bounded { t } => to_ticks(t),
            TimingModel::Interval { t1, .. } => to_ticks(t1),
            TimingModel::UnboundedAsync => TICKS_PER_UNIT,
        }
    }

    fn slow(&self, salt: &[u8]) -> bool {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(salt);
        h.finalize()[0] & 1 == 1
    }

    fn exponential(&mut self) -> u64 {
        let u: f64 = self.rng.random_range(f64::EPSILON..1.0);
        ((-u.ln()) * TICKS_PER_UNIT as f64).ceil().max(1.0) as u64
    }

    fn first_activation(&mut self) -> u64 {
        match self.policy {
            SchedulerPolicy::RoundRobin | SchedulerPolicy::AdversarialDelay => 0,
            SchedulerPolicy::Random => self.rng.random_range(0..self.period()),
        }
    }

    fn gap(&mut self, node: NodeId, byzantine: bool) -> u64 {
        match (self.policy, self.timing) {
            (SchedulerPolicy::RoundRobin, _) => self.period(),
            (SchedulerPolicy::Random, TimingModel::Bounded { t }) => self.rng.random_range(1..=to_ticks(t)),
            (SchedulerPolicy::Random, TimingModel::Interval { t1, t2 }) => {
                self.rng.random_range(to_ticks(t1)..=to_ticks(t2))
            }
            (SchedulerPolicy::Random, TimingModel::UnboundedAsync) => self.exponential(),
            (SchedulerPolicy::AdversarialDelay, timing) => {
                let slow = !byzantine && self.slow(&node.to_le_bytes());
                match (timing, slow) {
                    (TimingModel::Bounded { t }, true) => to_ticks(t),
                    (TimingModel::Bounded { t }, false) => (to_ticks(t) / 4).max(1),
                    (TimingModel::Interval { t2, .. }, true) => to_ticks(t2),
                    (TimingModel::Interval { t1, .. }, false) => to_ticks(t1),
                    (TimingModel::UnboundedAsync, true) => 4 * TICKS_PER_UNIT,
                    (TimingModel::UnboundedAsync, false) => TICKS_PER_UNIT / 4,
                }
            }
        }
    }

    fn max_delay(&self) -> u64 {
        match self.timing {
            TimingModel::Bounded { t } => to_ticks(t),
            TimingModel::Interval { t1, .. } => to_ticks(t1),
            TimingModel::UnboundedAsync => 4 * TICKS_PER_UNIT,
        }
    }

    fn delay(&mut self, from: NodeId, to: NodeId, byzantine_sender: bool) -> u64 {
        match (self.policy, self.timing) {
            (SchedulerPolicy::RoundRobin, _) => 1,
            (SchedulerPolicy::Random, TimingModel::UnboundedAsync) => self.exponential(),
            (SchedulerPolicy::Random, _) => self.rng.random_range(1..=self.max_delay()),
            (SchedulerPolicy::AdversarialDelay, _) => {
                let mut salt = from.to_le_bytes().to_vec();
                salt.extend(to.to_le_bytes());
                if !byzantine_sender && self.slow(&salt) {
                    self.max_delay()
                } else {
                    1
                }
            }
        }
    }
}

struct Engine<'a> {
    spec: &'a RunSpec,
    topo: &'a Topology,
    params: ProtocolParams,
    id_bits: u64,
    ranks: Vec<HashMap<NodeId, usize>>,
    clock: Clock,
    adv_rng: ChaCha8Rng,
    strategy: Box<dyn Strategy>,
    correct: Vec<Option<Correct>>,
    inbox: Vec<Vec<InFlight>>,
    queue: BinaryHeap<Reverse<(u64, u64, NodeId)>>,
    seq: u64,
    loads: HashMap<(NodeId, NodeId), Load>,
    last_arrival: HashMap<(NodeId, NodeId), u64>,
    outcomes: Vec<NodeOutcome>,
    last_activation: Vec<Option<u64>>,
    started: bool,
    in_flight: u64,
    events: u64,
    messages: u64,
    transcript: Vec<Record>,
}

/// Executes a run. Deterministic in the spec.
pub fn run(spec: &RunSpec) -> Result<RunReport, SimError> {
    let topo = &spec.topology;
    spec.timing.validate()?;
    spec.placement.check_against(topo)?;
    if matches!(spec.strategy, StrategySpec::Mirror { .. }) && spec.policy != SchedulerPolicy::RoundRobin {
        return Err(SimError::Config("the mirror strategy needs the round_robin policy".into()));
    }
    if spec.m0.bits() > spec.max_info_bits {
        return Err(SimError::Config(format!("m0 has {} bits, above M = {}", spec.m0.bits(), spec.max_info_bits)));
    }
    if topo.node_count() < 2 || !topo.is_connected_without(&[]) {
        return Err(SimError::Config("topology must be connected with at least two nodes".into()));
    }
    let z = topo.compute_z()?;
    let params = ProtocolParams { z, max_info_bits: spec.max_info_bits };
    let y = topo.compute_y();
    let diameter = topo.diameter();
    let horizon = spec.horizon.unwrap_or_else(|| default_horizon(y, z, diameter));
    if horizon == 0 {
        return Err(SimError::Config("horizon must be positive".into()));
    }
    let strategy = spec.strategy.build(topo, &spec.placement, params, &spec.m0)?;
    let mut adv_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    adv_rng.set_stream(1);
    let n = topo.node_count();
    let correct = topo
        .nodes()
        .map(|v| {
            if spec.placement.is_byzantine(v) {
                return None;
            }
            let nbrs = topo.neighbors(v).to_vec();
            let src = spec.placement.source;
            Some(match spec.node_kind {
                NodeKind::Standard => Correct::Standard(NodeState::new(v, nbrs, src, params)),
                NodeKind::StoreAll => Correct::StoreAll(StoreAllNode::new(v, nbrs, src, params)),
                NodeKind::Flood => Correct::Flood(FloodNode::new(v, nbrs)),
            })
        })
        .collect();
    let outcomes = topo
        .nodes()
        .map(|v| NodeOutcome {
            node: v,
            byzantine: spec.placement.is_byzantine(v),
            delivered: None,
            delivery_tick: None,
            peak_state_bits: 0,
            activations: 0,
            max_activation_gap: 0,
            stopped: false,
        })
        .collect();
    let mut engine = Engine {
        spec,
        topo,
        params,
        id_bits: topo.id_bits(),
        ranks: topo.port_ranks(),
        clock: Clock {
            policy: spec.policy,
            timing: spec.timing,
            seed: spec.seed,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
        },
        adv_rng,
        strategy,
        correct,
        inbox: (0..n).map(|_| Vec::new()).collect(),
        queue: BinaryHeap::new(),
        seq: 0,
        loads: HashMap::new(),
        last_arrival: HashMap::new(),
        outcomes,
        last_activation: vec![None; n],
        started: false,
        in_flight: 0,
        events: 0,
        messages: 0,
        transcript: Vec::new(),
    };
    for v in topo.nodes() {
        let t = engine.clock.first_activation();
        engine.schedule(t, v);
    }
    let (termination, final_tick) = engine.main_loop(horizon);
    let params = RunParams {
        n,
        max_info_bits: spec.max_info_bits,
        id_bits: engine.id_bits,
        y,
        z,
        diameter,
        byzantine_distance: min_byzantine_distance(topo, &spec.placement),
        channel_bound: spec.timing.channel_bound(),
        horizon,
    };
    Ok(engine.finish(termination, final_tick, params))
}

fn default_horizon(y: usize, z: usize, d: usize) -> u64 {
    let (y, z, d) = (y as u64, z as u64, d as u64);
    MIN_HORIZON.max(100u64.saturating_mul(y.pow(3)).saturating_mul(z.pow(3)).saturating_mul(d))
}

impl Engine<'_> {
    fn schedule(&mut self, t: u64, v: NodeId) {
        self.seq += 1;
        self.queue.push(Reverse((t, self.seq, v)));
    }

    fn main_loop(&mut self, horizon: u64) -> (Termination, u64) {
        let mut now = 0;
        while let Some(Reverse((t, _, v))) = self.queue.pop() {
            now = t;
            self.activate(now, v);
            if self.correct.iter().flatten().all(Correct::stopped) {
                return (Termination::AllStopped, now);
            }
            if self.spec.stop_when_stalled && self.started && self.in_flight == 0 && self.strategy.is_idle() {
                return (Termination::Stalled, now);
            }
            if self.events >= horizon {
                return (Termination::HorizonExhausted, now);
            }
            let byz = self.spec.placement.is_byzantine(v);
            let gap = self.clock.gap(v, byz);
            self.schedule(now + gap, v);
        }
        (Termination::HorizonExhausted, now)
    }

    fn activate(&mut self, now: u64, v: NodeId) {
        self.events += 1;
        let idx = v as usize;
        let outcome = &mut self.outcomes[idx];
        if let Some(prev) = self.last_activation[idx] {
            outcome.max_activation_gap = outcome.max_activation_gap.max(now - prev);
        }
        self.last_activation[idx] = Some(now);
        let activation = outcome.activations;
        outcome.activations += 1;

        let mut arrived: Vec<InFlight> = Vec::new();
        let mut waiting = Vec::new();
        for m in std::mem::take(&mut self.inbox[idx]) {
            if m.arrival <= now {
                arrived.push(m)
            } else {
                waiting.push(m)
            }
        }
        self.inbox[idx] = waiting;
        arrived.sort_by_key(|m| (m.arrival, m.rank, m.seq));
        self.events += arrived.len() as u64;
        self.in_flight -= arrived.len() as u64;
        for m in &arrived {
            let load = self.loads.get_mut(&(m.from, v)).expect("load tracked on send");
            load.messages -= 1;
            load.bits -= m.msg.size_bits(self.id_bits);
            if self.spec.record_transcript {
                self.transcript.push(Record::Recv { t: now, from: m.from, to: v, msg: m.msg.clone() });
            }
        }

        let mut out = Vec::new();
        match self.correct[idx].as_mut() {
            Some(node) => {
                let was_delivered = node.delivered().is_some();
                if v == self.spec.placement.source && !self.started {
                    out.extend(node.start(self.spec.m0.clone()));
                }
                for m in &arrived {
                    out.extend(node.handle(m.from, &m.msg));
                }
                let bits = node.state_bits(self.id_bits);
                let outcome = &mut self.outcomes[idx];
                outcome.peak_state_bits = outcome.peak_state_bits.max(bits);
                outcome.stopped = node.stopped();
                if !was_delivered {
                    if let Some(info) = node.delivered() {
                        outcome.delivered = Some(info.clone());
                        outcome.delivery_tick = Some(now);
                        if self.spec.record_transcript {
                            self.transcript.push(Record::Deliver { t: now, node: v, info: info.clone() });
                        }
                    }
                }
            }
            None => {
                let inbox: Vec<(NodeId, Message)> = arrived.into_iter().map(|m| (m.from, m.msg)).collect();
                let ctx = ByzContext {
                    topology: self.topo,
                    placement: &self.spec.placement,
                    params: self.params,
                    node: v,
                    activation,
                    now,
                    lockstep_period: (self.spec.policy == SchedulerPolicy::RoundRobin).then(|| self.clock.period()),
                };
                out = self.strategy.activate(&ctx, &inbox, &mut self.adv_rng);
                // channels are physical: a node can only talk to its neighbors
                out.retain(|(to, _)| self.topo.has_edge(v, *to));
            }
        }
        if v == self.spec.placement.source {
            self.started = true;
        }
        for (to, msg) in out {
            self.send(now, v, to, msg);
        }
    }

    fn send(&mut self, now: u64, from: NodeId, to: NodeId, msg: Message) {
        let byz = self.spec.placement.is_byzantine(from);
        let mut arrival = now + self.clock.delay(from, to, byz);
        if self.spec.fifo {
            let last = self.last_arrival.entry((from, to)).or_insert(0);
            arrival = arrival.max(*last);
            *last = arrival;
        }
        let bits = msg.size_bits(self.id_bits);
        let load = self.loads.entry((from, to)).or_default();
        load.messages += 1;
        load.bits += bits;
        load.peak_messages = load.peak_messages.max(load.messages);
        load.peak_bits = load.peak_bits.max(load.bits);
        if self.spec.record_transcript {
            self.transcript.push(Record::Send { t: now, from, to, msg: msg.clone() });
        }
        self.seq += 1;
        let rank = self.ranks[to as usize][&from];
        self.inbox[to as usize].push(InFlight { arrival, rank, seq: self.seq, from, msg });
        self.in_flight += 1;
        self.messages += 1;
    }

    fn finish(self, termination: Termination, final_tick: u64, params: RunParams) -> RunReport {
        let placement = &self.spec.placement;
        let mut channels: Vec<ChannelPeak> = self
            .loads
            .iter()
            .map(|(&(from, to), load)| ChannelPeak {
                from,
                to,
                correct: placement.is_correct(from) && placement.is_correct(to),
                peak_messages: load.peak_messages,
                peak_bits: load.peak_bits,
            })
            .collect();
        channels.sort_by_key(|c| (c.from, c.to));
        RunReport {
            format: FORMAT_VERSION,
            topology: self.topo.label().to_string(),
            topology_digest: self.topo.digest(),
            strategy: self.spec.strategy.label(),
            policy: self.spec.policy,
            timing: self.spec.timing,
            node_kind: self.spec.node_kind,
            seed: self.spec.seed,
            source: placement.source,
            m0: self.spec.m0.clone(),
            params,
            nodes: self.outcomes,
            channels,
            messages_sent: self.messages,
            events: self.events,
            final_tick,
            termination,
            verifications: Vec::new(),
            transcript: self.transcript,
        }
    }
}
