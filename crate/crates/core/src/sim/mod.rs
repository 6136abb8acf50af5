//! Deterministic discrete-event execution.
//!
//! Time is counted in integer ticks, [`TICKS_PER_UNIT`] per time unit. The
//! event queue holds node activations; messages wait in per-receiver buffers
//! until their arrival tick and are consumed at the receiver's next
//! activation, all at once, in `(arrival, sender rank, send order)` order.

mod engine;
mod transcript;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversaryError, StrategySpec};
use crate::graph::{GraphError, NodeId, Placement, Topology};
use crate::protocol::{Info, Message};
use crate::verify::VerificationResult;

pub use engine::run;
pub use transcript::{parse_record, read_transcript, replay, write_transcript, ReplayOutcome, Transcript};

pub const TICKS_PER_UNIT: u64 = 1000;
pub const FORMAT_VERSION: u32 = 1;
pub const MIN_HORIZON: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error("transcript format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Bounds on activation gaps, in time units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TimingModel {
    UnboundedAsync,
    /// Activation gaps at most `t`.
    Bounded {
        t: f64,
    },
    /// Activation gaps within `[t1, t2]`.
    Interval {
        t1: f64,
        t2: f64,
    },
}

pub(crate) fn to_ticks(units: f64) -> u64 {
    (units * TICKS_PER_UNIT as f64).round() as u64
}

impl TimingModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |why: &str| Err(SimError::Config(format!("timing {self:?}: {why}")));
        match *self {
            TimingModel::UnboundedAsync => Ok(()),
            TimingModel::Bounded { t } if !(t.is_finite() && to_ticks(t) >= 4) => bad("T must be at least 0.004"),
            TimingModel::Interval { t1, t2 } if !(t1.is_finite() && t2.is_finite() && to_ticks(t1) >= 1) => {
                bad("T1 must be positive")
            }
            TimingModel::Interval { t1, t2 } if t2 < t1 => bad("T2 must not be below T1"),
            _ => Ok(()),
        }
    }

    /// `N`, the smallest integer above `T2 / T1`; only defined in interval mode.
    pub fn channel_bound(&self) -> Option<u64> {
        match *self {
            TimingModel::Interval { t1, t2 } => Some(to_ticks(t2) / to_ticks(t1) + 1),
            _ => None,
        }
    }

    /// `T` in bounded mode.
    pub fn bound_t(&self) -> Option<f64> {
        match *self {
            TimingModel::Bounded { t } => Some(t),
            _ => None,
        }
    }
}

/// Who is activated when, and how long messages travel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerPolicy {
    /// Lockstep: every node is activated once per period, in id order, and
    /// every message arrives one tick after it was sent.
    RoundRobin,
    /// Seeded random gaps and delays within the timing model.
    Random,
    /// Seeded split of nodes and channels into slow and fast ones, each
    /// pushed to the extremes allowed by the timing model. Byzantine nodes
    /// and their channels are always fast.
    AdversarialDelay,
}

impl SchedulerPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerPolicy::RoundRobin => "round_robin",
            SchedulerPolicy::Random => "random",
            SchedulerPolicy::AdversarialDelay => "adversarial_delay",
        }
    }
}

/// Which process correct nodes run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    #[default]
    Standard,
    /// Keeps every accepted tuple (memory contrast).
    StoreAll,
    /// Forward the first information once (time baseline).
    Flood,
}

fn yes() -> bool {
    true
}

/// Everything that determines a run. Serialized as the transcript header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub topology: Topology,
    pub placement: Placement,
    pub strategy: StrategySpec,
    pub timing: TimingModel,
    pub policy: SchedulerPolicy,
    pub seed: u64,
    /// Event budget; `None` means `max(10^6, 100 Y^3 Z^3 d)`.
    #[serde(default)]
    pub horizon: Option<u64>,
    pub m0: Info,
    pub max_info_bits: u64,
    #[serde(default)]
    pub fifo: bool,
    /// End the run once no message is in flight and the adversary is idle.
    #[serde(default = "yes")]
    pub stop_when_stalled: bool,
    #[serde(default)]
    pub node_kind: NodeKind,
    #[serde(default)]
    pub record_transcript: bool,
}

/// Default broadcast value: 16 bytes, `M = 128` bits.
pub fn default_m0() -> Info {
    Info::new(*b"reliable-bcast-0")
}

impl RunSpec {
    pub fn new(topology: Topology, placement: Placement, strategy: StrategySpec) -> Self {
        RunSpec {
            topology,
            placement,
            strategy,
            timing: TimingModel::Bounded { t: 1.0 },
            policy: SchedulerPolicy::RoundRobin,
            seed: 0,
            horizon: None,
            m0: default_m0(),
            max_info_bits: 128,
            fifo: false,
            stop_when_stalled: true,
            node_kind: NodeKind::Standard,
            record_transcript: false,
        }
    }

    pub fn timing(mut self, timing: TimingModel) -> Self {
        self.timing = timing;
        self
    }

    pub fn policy(mut self, policy: SchedulerPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn horizon(mut self, events: u64) -> Self {
        self.horizon = Some(events);
        self
    }

    pub fn node_kind(mut self, kind: NodeKind) -> Self {
        self.node_kind = kind;
        self
    }

    pub fn recorded(mut self) -> Self {
        self.record_transcript = true;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every correct node stopped.
    AllStopped,
    /// Nothing in flight and the adversary idle, with correct nodes still waiting.
    Stalled,
    /// The event budget ran out (non-quiescent).
    HorizonExhausted,
}

/// Parameters of the run, as known to the protocol and the bounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunParams {
    pub n: usize,
    /// `M`.
    pub max_info_bits: u64,
    /// `X`.
    pub id_bits: u64,
    pub y: usize,
    pub z: usize,
    pub diameter: usize,
    /// `D`; `None` when fewer than two Byzantine nodes.
    pub byzantine_distance: Option<usize>,
    /// `N` in interval mode.
    pub channel_bound: Option<u64>,
    pub horizon: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeOutcome {
    pub node: NodeId,
    pub byzantine: bool,
    pub delivered: Option<Info>,
    pub delivery_tick: Option<u64>,
    pub peak_state_bits: u64,
    pub activations: u64,
    /// Largest gap between two consecutive activations, in ticks.
    pub max_activation_gap: u64,
    pub stopped: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelPeak {
    pub from: NodeId,
    pub to: NodeId,
    /// Both endpoints correct.
    pub correct: bool,
    pub peak_messages: u64,
    pub peak_bits: u64,
}

/// One transcript line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Send { t: u64, from: NodeId, to: NodeId, msg: Message },
    Recv { t: u64, from: NodeId, to: NodeId, msg: Message },
    Deliver { t: u64, node: NodeId, info: Info },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: u32,
    pub topology: String,
    pub topology_digest: String,
    pub strategy: String,
    pub policy: SchedulerPolicy,
    pub timing: TimingModel,
    pub node_kind: NodeKind,
    pub seed: u64,
    pub source: NodeId,
    pub m0: Info,
    pub params: RunParams,
    pub nodes: Vec<NodeOutcome>,
    pub channels: Vec<ChannelPeak>,
    pub messages_sent: u64,
    pub events: u64,
    pub final_tick: u64,
    pub termination: Termination,
    #[serde(default)]
    pub verifications: Vec<VerificationResult>,
    /// Filled when the spec asks for it; written separately as JSON lines.
    #[serde(skip)]
    pub transcript: Vec<Record>,
}

impl RunReport {
    pub fn correct_nodes(&self) -> impl Iterator<Item = &NodeOutcome> {
        self.nodes.iter().filter(|o| !o.byzantine)
    }

    pub fn delivered_fraction(&self) -> f64 {
        let (mut total, mut good) = (0usize, 0usize);
        for o in self.correct_nodes() {
            total += 1;
            good += usize::from(o.delivered.as_ref() == Some(&self.m0));
        }
        if total == 0 {
            1.0
        } else {
            good as f64 / total as f64
        }
    }

    /// Latest delivery among correct nodes, in time units.
    pub fn max_delivery_time(&self) -> Option<f64> {
        self.correct_nodes().filter_map(|o| o.delivery_tick).max().map(|t| t as f64 / TICKS_PER_UNIT as f64)
    }

    pub fn peak_node_bits(&self) -> u64 {
        self.correct_nodes().map(|o| o.peak_state_bits).max().unwrap_or(0)
    }

    pub fn non_quiescent(&self) -> bool {
        self.termination == Termination::HorizonExhausted
    }

    /// Receive records at `node`, in order.
    pub fn receives_at(&self, node: NodeId) -> Vec<(u64, NodeId, &Message)> {
        self.transcript
            .iter()
            .filter_map(|r| match r {
                Record::Recv { t, from, to, msg } if *to == node => Some((*t, *from, msg)),
                _ => None,
            })
            .collect()
    }

    /// Canonical JSON of the report, transcript excluded.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn all_verifications_passed(&self) -> bool {
        self.verifications.iter().all(|v| v.passed)
    }
}

/// The simple-broadcast baseline: same harness, Byzantine nodes silent.
pub fn run_flood_baseline(
    topology: &Topology,
    placement: &Placement,
    timing: TimingModel,
    seed: u64,
) -> Result<RunReport, SimError> {
    let spec = RunSpec::new(topology.clone(), placement.clone(), StrategySpec::Silent)
        .timing(timing)
        .seed(seed)
        .node_kind(NodeKind::Flood);
    run(&spec)
}

/// Every correct-correct channel held at most `N` messages. `None` outside
/// interval mode, where no bound is claimed.
pub fn channel_occupancy_check(report: &RunReport, timing: &TimingModel) -> Option<bool> {
    let n = timing.channel_bound()?;
    Some(report.channels.iter().filter(|c| c.correct).all(|c| c.peak_messages <= n))
}
