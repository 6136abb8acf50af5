//! Experiment configuration files.

use std::path::{Path, PathBuf};

use pbcast::adversary::{place_byzantines, StrategySpec};
use pbcast::graph::{generate, GeneratorKind, NodeId, Placement, Topology};
use pbcast::protocol::Info;
use pbcast::sim::{default_m0, RunSpec, SchedulerPolicy, TimingModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub topology: TopologySpec,
    #[serde(default)]
    pub placement: PlacementSpec,
    #[serde(default = "silent")]
    pub strategy: StrategySpec,
    #[serde(default = "bounded")]
    pub timing: TimingModel,
    #[serde(default = "round_robin")]
    pub policy: SchedulerPolicy,
    #[serde(default)]
    pub seeds: Seeds,
    /// Event budget per run; the simulator default when absent.
    #[serde(default)]
    pub horizon: Option<u64>,
    /// Broadcast value, hex.
    #[serde(default)]
    pub m0: Option<Info>,
    #[serde(default)]
    pub verifications: Vec<Verification>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_name() -> String {
    "experiment".into()
}

fn silent() -> StrategySpec {
    StrategySpec::Silent
}

fn bounded() -> TimingModel {
    TimingModel::Bounded { t: 1.0 }
}

fn round_robin() -> SchedulerPolicy {
    SchedulerPolicy::RoundRobin
}

/// Exactly one of `generate` and `file`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    #[serde(default)]
    pub generate: Option<GeneratorKind>,
    /// Generator seed.
    #[serde(default)]
    pub seed: u64,
    /// Topology file, relative to the config file.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

/// Either explicit `byzantine` ids, or `count` nodes sampled per seed at
/// pairwise distance at least `min_distance` (default `Z + 1`).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    #[serde(default)]
    pub source: NodeId,
    #[serde(default)]
    pub byzantine: Option<Vec<NodeId>>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub min_distance: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    /// Half-open `start..end`.
    Range {
        start: u64,
        end: u64,
    },
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::List(vec![0])
    }
}

impl Seeds {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { start, end } => (*start..*end).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    Safety,
    Liveness,
    TimeBound,
    MemoryBound,
    CorrectPolygons,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "summary_name")]
    pub summary: String,
    #[serde(default = "yes")]
    pub transcripts: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: None, summary: summary_name(), transcripts: true }
    }
}

fn summary_name() -> String {
    "summary.csv".into()
}

fn yes() -> bool {
    true
}

/// A validated config, expanded into one spec per seed.
pub struct Batch {
    pub config: ExperimentConfig,
    pub topology: Topology,
    pub runs: Vec<RunSpec>,
}

impl ExperimentConfig {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(file), Some(dir)) = (&config.topology.file, path.parent()) {
            if file.is_relative() {
                config.topology.file = Some(dir.join(file));
            }
        }
        Ok(config)
    }

    pub fn load_topology(&self) -> Result<Topology, CliError> {
        match (&self.topology.generate, &self.topology.file) {
            (Some(kind), None) => generate(kind, self.topology.seed).map_err(|e| CliError::Config(e.to_string())),
            (None, Some(file)) => {
                Topology::read(file).map_err(|e| CliError::Config(format!("{}: {e}", file.display())))
            }
            _ => Err(CliError::Config("topology needs exactly one of `generate` and `file`".into())),
        }
    }

    /// Validates everything and resolves placements, before any run starts.
    pub fn expand(self) -> Result<Batch, CliError> {
        let topology = self.load_topology()?;
        topology.validate_for_protocol().map_err(|e| CliError::Config(e.to_string()))?;
        self.timing.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let z = topology.compute_z().map_err(|e| CliError::Config(e.to_string()))?;
        if self.verifications.contains(&Verification::TimeBound) && self.timing.bound_t().is_none() {
            return Err(CliError::Config("time_bound needs bounded timing".into()));
        }
        let seeds = self.seeds.expand();
        if seeds.is_empty() {
            return Err(CliError::Config("no seeds".into()));
        }
        let p = &self.placement;
        let mut runs = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            let placement = match (&p.byzantine, p.count) {
                (Some(ids), None) => {
                    let placement =
                        Placement::new(p.source, ids.iter().copied()).map_err(|e| CliError::Config(e.to_string()))?;
                    placement.check_against(&topology).map_err(|e| CliError::Config(e.to_string()))?;
                    placement
                }
                (None, count) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let min_distance = p.min_distance.unwrap_or(z + 1);
                    place_byzantines(&topology, p.source, count.unwrap_or(0), min_distance, &mut rng)
                        .map_err(|e| match e {
                            pbcast::adversary::PlacementError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
                            _ => CliError::Config(e.to_string()),
                        })?
                        .0
                }
                (Some(_), Some(_)) => {
                    return Err(CliError::Config("placement takes `byzantine` or `count`, not both".into()))
                }
            };
            let mut spec = RunSpec::new(topology.clone(), placement, self.strategy.clone())
                .timing(self.timing)
                .policy(self.policy)
                .seed(seed);
            spec.horizon = self.horizon;
            spec.m0 = self.m0.clone().unwrap_or_else(default_m0);
            spec.record_transcript = self.output.transcripts;
            runs.push(spec);
        }
        Ok(Batch { config: self, topology, runs })
    }
}
