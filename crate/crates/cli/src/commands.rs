use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use pbcast::graph::{
    critical_counterexample, enumerate_polygons, find_small_cut, min_byzantine_distance, Embedding, Topology,
};
use pbcast::protocol::Info;
use pbcast::sim::{default_m0, replay, run, write_transcript, ReplayOutcome, RunReport, RunSpec, SimError};
use pbcast::verify::{
    assert_indistinguishable, assert_liveness, assert_memory_bound, assert_safety, assert_time_bound,
    check_lemma_correct_polygons, VerificationResult,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Batch, ExperimentConfig, Verification};
use crate::CliError;

/// One summary line. Column order is part of the output contract.
#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub seed: u64,
    pub topology: String,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "Z")]
    pub z: usize,
    #[serde(rename = "Y")]
    pub y: usize,
    #[serde(rename = "D")]
    pub byzantine_distance: String,
    pub strategy: String,
    pub delivered_fraction: f64,
    pub max_delivery_time: String,
    pub peak_node_bits: u64,
    pub verifications_passed: bool,
}

impl SummaryRow {
    fn of(report: &RunReport) -> Self {
        let p = &report.params;
        SummaryRow {
            seed: report.seed,
            topology: report.topology.clone(),
            n: p.n,
            d: p.diameter,
            z: p.z,
            y: p.y,
            byzantine_distance: p.byzantine_distance.map(|d| d.to_string()).unwrap_or_default(),
            strategy: report.strategy.clone(),
            delivered_fraction: report.delivered_fraction(),
            max_delivery_time: report.max_delivery_time().map(|t| t.to_string()).unwrap_or_default(),
            peak_node_bits: report.peak_node_bits(),
            verifications_passed: report.all_verifications_passed(),
        }
    }
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Io(e) => CliError::Io(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn verify(report: &RunReport, spec: &RunSpec, topology: &Topology, checks: &[Verification]) -> Vec<VerificationResult> {
    let p = &report.params;
    checks
        .iter()
        .map(|check| match check {
            Verification::Safety => assert_safety(report, &spec.m0),
            Verification::Liveness => assert_liveness(report),
            Verification::TimeBound => {
                assert_time_bound(report, topology, &spec.timing).expect("validated with the config")
            }
            Verification::MemoryBound => {
                assert_memory_bound(report, p.max_info_bits, p.id_bits, p.y as u64, p.z as u64)
            }
            Verification::CorrectPolygons => {
                check_lemma_correct_polygons(topology, &spec.placement).expect("topology validated with the config")
            }
        })
        .collect()
}

/// Runs every seed of the batch, writes transcripts and appends to the
/// summary. Returns whether every requested verification passed.
pub fn cmd_run(batch: Batch, out: &Path, jobs: Option<usize>) -> Result<bool, CliError> {
    let Batch { config, topology, runs } = batch;
    std::fs::create_dir_all(out).map_err(io_error(out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let reports: Vec<Result<RunReport, CliError>> = pool.install(|| {
        runs.par_iter()
            .map(|spec| {
                let mut report = run(spec).map_err(sim_error)?;
                // the transcript holds the report exactly as the simulator produced it
                if config.output.transcripts {
                    let path = out.join(format!("{}-seed{}.jsonl", config.name, spec.seed));
                    write_transcript(&path, spec, &report).map_err(sim_error)?;
                }
                report.verifications = verify(&report, spec, &topology, &config.verifications);
                Ok(report)
            })
            .collect()
    });
    let reports: Vec<RunReport> = reports.into_iter().collect::<Result<_, _>>()?;

    let summary = out.join(&config.output.summary);
    let fresh = std::fs::metadata(&summary).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(&summary).map_err(io_error(&summary))?;
    let mut csv = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    let mut all_passed = true;
    for report in &reports {
        csv.serialize(SummaryRow::of(report)).map_err(|e| CliError::Io(e.to_string()))?;
        for v in report.verifications.iter().filter(|v| !v.passed) {
            all_passed = false;
            eprintln!("seed {}: {} failed: {}", report.seed, v.name, v.witnesses.join("; "));
        }
    }
    csv.flush().map_err(io_error(&summary))?;
    println!(
        "{}: {} runs on {}, {} with every verification passing; summary in {}",
        config.name,
        reports.len(),
        topology.label(),
        reports.iter().filter(|r| r.all_verifications_passed()).count(),
        summary.display()
    );
    Ok(all_passed)
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub label: String,
    pub n: usize,
    pub edges: usize,
    pub planar: bool,
    #[serde(rename = "Z")]
    pub z: usize,
    #[serde(rename = "Y")]
    pub y: usize,
    pub diameter: usize,
    pub four_connected: bool,
    /// A separating set of fewer than four nodes, when one exists.
    pub cut: Option<Vec<u32>>,
    pub polygons: usize,
}

pub fn analyze(topology: &Topology) -> Result<Analysis, CliError> {
    let config = |e: pbcast::graph::GraphError| CliError::Config(e.to_string());
    let cut = if topology.node_count() > 4 { find_small_cut(topology, 4).map_err(config)? } else { None };
    Ok(Analysis {
        label: topology.label().to_string(),
        n: topology.node_count(),
        edges: topology.edge_count(),
        planar: matches!(topology.embedding(), Embedding::Planar { .. }),
        z: topology.compute_z().map_err(config)?,
        y: topology.compute_y(),
        diameter: topology.diameter(),
        four_connected: topology.node_count() > 4 && cut.is_none(),
        cut,
        polygons: enumerate_polygons(topology).map_err(config)?.len(),
    })
}

pub fn cmd_analyze(path: &Path, json: bool) -> Result<bool, CliError> {
    let topology = Topology::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let a = analyze(&topology)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&a).expect("analysis serializes"));
    } else {
        println!("topology   {}", a.label);
        println!("nodes      {}", a.n);
        println!("edges      {}", a.edges);
        println!("embedding  {}", if a.planar { "planar" } else { "declared (non-planar), Z given" });
        println!("Z          {}", a.z);
        println!("Y          {}", a.y);
        println!("diameter   {}", a.diameter);
        match &a.cut {
            None if a.four_connected => println!("4-connected yes"),
            None => println!("4-connected no (at most 4 nodes)"),
            Some(cut) => println!("4-connected no, cut {cut:?}"),
        }
        println!("polygons   {}", a.polygons);
    }
    Ok(true)
}

#[derive(Debug, Serialize)]
struct Verdict {
    topology_digest: String,
    #[serde(rename = "D")]
    byzantine_distance: Option<usize>,
    #[serde(rename = "Z")]
    z: usize,
    cut: [u32; 4],
    indistinguishable: VerificationResult,
    safety: [VerificationResult; 2],
    outer_undelivered: [usize; 2],
    outer: usize,
}

/// Writes the critical network and the paired mirror runs. Passes when the
/// two runs are indistinguishable on the outer side and that side stays
/// undelivered while no correct node delivers a wrong value.
pub fn cmd_counterexample(out: &Path, horizon: Option<u64>) -> Result<bool, CliError> {
    std::fs::create_dir_all(out).map_err(io_error(out))?;
    let net = critical_counterexample();
    net.check().map_err(CliError::Config)?;
    let topo_path = out.join("critical.json");
    net.topology.write(&topo_path).map_err(|e| CliError::Io(e.to_string()))?;

    let m0 = default_m0();
    let m_alt = Info::new(*b"alternate-value!");
    let mut a = RunSpec::new(
        net.topology.clone(),
        net.placement.clone(),
        pbcast::adversary::StrategySpec::Mirror { m_alt: m_alt.clone() },
    )
    .recorded();
    a.horizon = horizon;
    let mut b = a.clone();
    b.m0 = m_alt.clone();
    b.strategy = pbcast::adversary::StrategySpec::Mirror { m_alt: m0.clone() };
    let ra = run(&a).map_err(sim_error)?;
    let rb = run(&b).map_err(sim_error)?;
    write_transcript(&out.join("critical-m0.jsonl"), &a, &ra).map_err(sim_error)?;
    write_transcript(&out.join("critical-alt.jsonl"), &b, &rb).map_err(sim_error)?;

    let indistinguishable = assert_indistinguishable(&ra, &rb, &net.automorphism, &net.outer)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let undelivered = |r: &RunReport| net.outer.iter().filter(|&&o| r.nodes[o as usize].delivered.is_none()).count();
    let verdict = Verdict {
        topology_digest: net.topology.digest(),
        byzantine_distance: min_byzantine_distance(&net.topology, &net.placement),
        z: net.topology.compute_z().map_err(|e| CliError::Config(e.to_string()))?,
        cut: net.cut,
        indistinguishable,
        safety: [assert_safety(&ra, &m0), assert_safety(&rb, &m_alt)],
        outer_undelivered: [undelivered(&ra), undelivered(&rb)],
        outer: net.outer.len(),
    };
    let passed = verdict.indistinguishable.passed
        && verdict.safety.iter().all(|s| s.passed)
        && verdict.outer_undelivered.iter().all(|&u| u > 0);
    let verdict_path = out.join("verdict.json");
    let mut text = serde_json::to_string_pretty(&verdict).expect("verdict serializes");
    text.push('\n');
    std::fs::write(&verdict_path, text).map_err(io_error(&verdict_path))?;
    println!(
        "critical network: D = {:?}, Z = {}; runs indistinguishable on the outer side: {}; outer nodes undelivered: {}/{} and {}/{}",
        verdict.byzantine_distance,
        verdict.z,
        verdict.indistinguishable.passed,
        verdict.outer_undelivered[0],
        verdict.outer,
        verdict.outer_undelivered[1],
        verdict.outer
    );
    println!("wrote {}, {} and two transcripts", topo_path.display(), verdict_path.display());
    Ok(passed)
}

pub fn cmd_replay(path: &Path) -> Result<bool, CliError> {
    match replay(path).map_err(sim_error)? {
        ReplayOutcome::Match => {
            println!("{}: replay matches", path.display());
            Ok(true)
        }
        ReplayOutcome::Diverged { line, expected, actual } => {
            eprintln!("{}: first divergence at line {line}", path.display());
            eprintln!("  recorded: {expected}");
            eprintln!("  replayed: {actual}");
            Ok(false)
        }
    }
}

/// Output directory: the flag, then the config, then `PBCAST_OUT`, then `./pbcast-out`.
pub fn output_dir(flag: Option<PathBuf>, config: Option<&ExperimentConfig>) -> PathBuf {
    flag.or_else(|| config.and_then(|c| c.output.dir.clone()))
        .or_else(|| std::env::var_os("PBCAST_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("pbcast-out"))
}
