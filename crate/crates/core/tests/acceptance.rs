//! Acceptance criteria 1-8. Every criterion runs, prints one PASS/FAIL line
//! (written straight to stderr so it shows without `--nocapture`), and the
//! test fails afterwards if any criterion failed.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use pbcast::adversary::{place_byzantines, StrategySpec};
use pbcast::graph::{
    critical_counterexample, enumerate_faces, exhaustive_min_cut, generate, is_k_connected, min_byzantine_distance,
    GeneratorKind, NodeId, Placement, Topology,
};
use pbcast::protocol::Info;
use pbcast::sim::{
    default_m0, replay, run, run_flood_baseline, write_transcript, NodeKind, ReplayOutcome, RunReport, RunSpec,
    SchedulerPolicy, Termination, TimingModel,
};
use pbcast::verify::{
    assert_indistinguishable, assert_liveness, assert_memory_bound, assert_ratio_trend, assert_safety,
    assert_time_bound, check_lemma_correct_polygons,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const POLICIES: [SchedulerPolicy; 3] =
    [SchedulerPolicy::RoundRobin, SchedulerPolicy::Random, SchedulerPolicy::AdversarialDelay];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

/// Every report produced by the suite whose placement has `D >= Z`; checked
/// for safety by criterion 2.
struct SafetyLog(Mutex<Vec<(String, bool)>>);

impl SafetyLog {
    fn record(&self, label: &str, report: &RunReport) {
        let applies = report.params.byzantine_distance.is_none_or(|d| d >= report.params.z);
        if applies && report.node_kind == NodeKind::Standard {
            let ok = assert_safety(report, &report.m0).passed;
            self.0.lock().unwrap().push((label.to_string(), ok));
        }
    }
}

fn corpus() -> Vec<GeneratorKind> {
    vec![
        GeneratorKind::Quadrangulation { rings: 5, sectors: 8 },
        GeneratorKind::Quadrangulation { rings: 7, sectors: 10 },
        GeneratorKind::Quadrangulation { rings: 9, sectors: 12 },
        GeneratorKind::Triangulation { rings: 5, sectors: 8 },
        GeneratorKind::Triangulation { rings: 7, sectors: 10 },
        GeneratorKind::Triangulation { rings: 10, sectors: 14 },
    ]
}

fn timing_for(policy: SchedulerPolicy) -> TimingModel {
    match policy {
        SchedulerPolicy::Random => TimingModel::UnboundedAsync,
        _ => TimingModel::Bounded { t: 1.0 },
    }
}

fn criterion_1(log: &SafetyLog) -> Outcome {
    let started = Instant::now();
    let strategies = [StrategySpec::ForgeFlood { forge_count: 64 }, StrategySpec::Garbage];
    let mut jobs = Vec::new();
    for kind in corpus() {
        let topo = generate(&kind, 7).expect("corpus topology");
        let n = topo.node_count();
        assert!((30..=150).contains(&n), "{} has {n} nodes", kind.name());
        for seed in 0..50u64 {
            for strategy in &strategies {
                for policy in POLICIES {
                    jobs.push((topo.clone(), seed, strategy.clone(), policy));
                }
            }
        }
    }
    let failures: Vec<String> = jobs
        .par_iter()
        .filter_map(|(topo, seed, strategy, policy)| {
            let z = topo.compute_z().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let source = rng.random_range(0..topo.node_count() as NodeId);
            // 2..=4 Byzantine nodes, fewer where the graph is too small to spread them
            let placement = (2..=2 + (*seed % 3) as usize)
                .rev()
                .find_map(|count| place_byzantines(topo, source, count, z + 1, &mut rng).ok())
                .expect("two Byzantine nodes fit at distance Z + 1");
            assert!(placement.1.unwrap() > z);
            let placement = placement.0;
            let spec = RunSpec::new(topo.clone(), placement, strategy.clone())
                .policy(*policy)
                .timing(timing_for(*policy))
                .seed(*seed);
            let report = run(&spec).unwrap();
            let label = format!("{} seed {seed} {} {}", topo.label(), strategy.label(), policy.name());
            log.record(&label, &report);
            let live = assert_liveness(&report);
            (!live.passed).then(|| format!("{label}: {:?}", live.witnesses))
        })
        .collect();
    outcome(
        failures.is_empty(),
        format!(
            "{} runs over {} topologies, {} liveness failures{} ({:.1}s)",
            jobs.len(),
            corpus().len(),
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default(),
            started.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_2(log: &SafetyLog) -> Outcome {
    // extra runs right at the threshold D = Z
    let strategies = [StrategySpec::ForgeFlood { forge_count: 64 }, StrategySpec::Garbage, StrategySpec::Silent];
    let jobs: Vec<_> = corpus()
        .into_iter()
        .flat_map(|k| (0..20u64).map(move |s| (k.clone(), s)))
        .flat_map(|(k, s)| strategies.clone().into_iter().map(move |st| (k.clone(), s, st)))
        .collect();
    jobs.par_iter().for_each(|(kind, seed, strategy)| {
        let topo = generate(kind, 7).unwrap();
        let z = topo.compute_z().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (placement, _) = place_byzantines(&topo, 0, 3, z, &mut rng).unwrap();
        let policy = POLICIES[(*seed % 3) as usize];
        let spec =
            RunSpec::new(topo, placement, strategy.clone()).policy(policy).timing(timing_for(policy)).seed(*seed);
        let report = run(&spec).unwrap();
        log.record(&format!("{} D>=Z seed {seed} {}", kind.name(), strategy.label()), &report);
    });
    let results = log.0.lock().unwrap();
    let bad: Vec<&String> = results.iter().filter(|(_, ok)| !ok).map(|(l, _)| l).collect();
    outcome(
        bad.is_empty() && !results.is_empty(),
        format!(
            "{} runs with D >= Z checked, {} false deliveries{}",
            results.len(),
            bad.len(),
            bad.first().map(|b| format!(", first: {b}")).unwrap_or_default()
        ),
    )
}

fn criterion_3(log: &SafetyLog) -> Outcome {
    let net = critical_counterexample();
    let structure = net.check();
    let planar = net.topology.is_planar() && enumerate_faces(&net.topology).is_ok();
    let m0 = default_m0();
    let m_alt = Info::new(*b"alternate-value!");
    let mut a =
        RunSpec::new(net.topology.clone(), net.placement.clone(), StrategySpec::Mirror { m_alt: m_alt.clone() })
            .horizon(1_000_000)
            .recorded();
    a.stop_when_stalled = false;
    a.m0 = m0.clone();
    let mut b = a.clone();
    b.m0 = m_alt.clone();
    b.strategy = StrategySpec::Mirror { m_alt: m0 };
    let ra = run(&a).unwrap();
    let rb = run(&b).unwrap();
    log.record("critical mirror(m_alt)", &ra);
    log.record("critical mirror(m0)", &rb);
    let verdict = assert_indistinguishable(&ra, &rb, &net.automorphism, &net.outer).unwrap();
    let undelivered = net.outer.iter().filter(|&&o| ra.nodes[o as usize].delivered.is_none()).count();
    let passed = structure.is_ok()
        && planar
        && verdict.passed
        && ra.termination == Termination::HorizonExhausted
        && ra.events >= 1_000_000
        && undelivered >= 1;
    outcome(
        passed,
        format!(
            "structure {:?}, planar {planar}, D = {:?}, indistinguishable {} over {} receives, {undelivered}/{} outer nodes undelivered after {} events ({:?})",
            structure,
            min_byzantine_distance(&net.topology, &net.placement),
            verdict.passed,
            verdict.measured["compared_receives"],
            net.outer.len(),
            ra.events,
            ra.termination
        ),
    )
}

fn criterion_4(log: &SafetyLog) -> Outcome {
    let timing = TimingModel::Bounded { t: 1.0 };
    let ladders: [(&str, Vec<GeneratorKind>); 2] = [
        ("torus", [6, 10, 14, 18, 24].map(|w| GeneratorKind::Torus { w, h: w }).to_vec()),
        (
            "quadrangulation",
            [5, 8, 11, 14, 23].map(|rings| GeneratorKind::Quadrangulation { rings, sectors: 8 }).to_vec(),
        ),
    ];
    let mut passed = true;
    let mut lines = Vec::new();
    for (family, kinds) in ladders {
        let mut ratios = Vec::new();
        let mut diameters = Vec::new();
        for kind in kinds {
            let topo = generate(&kind, 0).unwrap();
            let z = topo.compute_z().unwrap();
            diameters.push(topo.diameter());
            let per_seed: Vec<(bool, f64)> = (0..6u64)
                .into_par_iter()
                .map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let (placement, _) = place_byzantines(&topo, 0, 2, z + 1, &mut rng).unwrap();
                    let policy = POLICIES[(seed % 3) as usize];
                    let spec =
                        RunSpec::new(topo.clone(), placement.clone(), StrategySpec::ForgeFlood { forge_count: 64 })
                            .timing(timing)
                            .policy(policy)
                            .seed(seed);
                    let report = run(&spec).unwrap();
                    log.record(&format!("{} time seed {seed}", kind.name()), &report);
                    let bound = assert_time_bound(&report, &topo, &timing).unwrap();
                    let ok = bound.passed && assert_liveness(&report).passed;
                    // ratio under lockstep scheduling for both processes
                    let rr = run(&spec.clone().policy(SchedulerPolicy::RoundRobin)).unwrap();
                    let flood = run_flood_baseline(&topo, &placement, timing, seed).unwrap();
                    let ratio =
                        rr.max_delivery_time().unwrap_or(f64::INFINITY) / flood.max_delivery_time().unwrap_or(f64::NAN);
                    (ok, ratio)
                })
                .collect();
            passed &= per_seed.iter().all(|(ok, _)| *ok);
            ratios.push(per_seed.iter().map(|(_, r)| r).sum::<f64>() / per_seed.len() as f64);
        }
        let span = *diameters.last().unwrap() as f64 / diameters[0] as f64;
        let trend = assert_ratio_trend(&ratios, 3.0);
        passed &= trend.passed && span >= 4.0;
        lines.push(format!(
            "{family} d={diameters:?} ratios={:?}",
            ratios.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>()
        ));
    }
    outcome(passed, lines.join("; "))
}

fn criterion_5(log: &SafetyLog) -> Outcome {
    let timing = TimingModel::Interval { t1: 1.0, t2: 2.0 };
    let kinds = [
        GeneratorKind::Quadrangulation { rings: 6, sectors: 8 },
        GeneratorKind::Triangulation { rings: 6, sectors: 8 },
        GeneratorKind::Torus { w: 8, h: 8 },
    ];
    let jobs: Vec<_> =
        kinds.iter().flat_map(|k| (0..10u64).flat_map(move |s| POLICIES.map(|p| (k.clone(), s, p)))).collect();
    struct M {
        node_ok: bool,
        channel_ok: bool,
        store_exceeds: bool,
        peak_node: u64,
        node_bound: u64,
        peak_channel: u64,
        channel_bound: u64,
        peak_store: u64,
    }
    let results: Vec<M> = jobs
        .par_iter()
        .map(|(kind, seed, policy)| {
            let topo = generate(kind, 1).unwrap();
            let z = topo.compute_z().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let (placement, _) = place_byzantines(&topo, 0, 2, z + 1, &mut rng).unwrap();
            let spec = RunSpec::new(topo.clone(), placement, StrategySpec::ForgeFlood { forge_count: 10_000 })
                .timing(timing)
                .policy(*policy)
                .seed(*seed);
            let report = run(&spec).unwrap();
            log.record(&format!("{} memory seed {seed}", kind.name()), &report);
            let (m, x, y) = (report.params.max_info_bits, report.params.id_bits, report.params.y as u64);
            let verdict = assert_memory_bound(&report, m, x, y, z as u64);
            assert_eq!(
                verdict.passed,
                verdict.measured["peak_channel_bits"] <= verdict.measured["channel_bound"]
                    && verdict.measured["peak_node_bits"] <= verdict.measured["node_bound"]
            );
            let node_bound = y * (m + z as u64 * x);
            let channel_bound = report.params.channel_bound.unwrap() * (m + x * z as u64);
            let peak_channel = report.channels.iter().filter(|c| c.correct).map(|c| c.peak_bits).max().unwrap_or(0);
            let store = run(&spec.clone().node_kind(NodeKind::StoreAll)).unwrap();
            M {
                node_ok: report.peak_node_bits() <= node_bound,
                channel_ok: peak_channel <= channel_bound,
                store_exceeds: store.peak_node_bits() > node_bound,
                peak_node: report.peak_node_bits(),
                node_bound,
                peak_channel,
                channel_bound,
                peak_store: store.peak_node_bits(),
            }
        })
        .collect();
    let node_ok = results.iter().all(|r| r.node_ok);
    let channel_fail = results.iter().filter(|r| !r.channel_ok).count();
    let store_exceeds = results.iter().filter(|r| r.store_exceeds).count();
    let worst_node = results.iter().map(|r| r.peak_node as f64 / r.node_bound as f64).fold(0.0, f64::max);
    let worst_channel = results.iter().max_by_key(|r| r.peak_channel * 1000 / r.channel_bound).unwrap();
    let worst_store = results.iter().map(|r| r.peak_store as f64 / r.node_bound as f64).fold(0.0, f64::max);
    outcome(
        node_ok && channel_fail == 0 && store_exceeds > 0,
        format!(
            "{} runs: node bound held in all (worst {:.0}% of Y(M+ZX)); channel bound N(M+XZ) violated in {channel_fail} runs \
             (worst {} bits vs {}); store-all exceeded the node bound in {store_exceeds} runs (up to {:.1}x)",
            results.len(),
            100.0 * worst_node,
            worst_channel.peak_channel,
            worst_channel.channel_bound,
            worst_store
        ),
    )
}

/// Random connected graph on at most 12 nodes; topologies must be connected,
/// so disconnected draws are resampled.
fn random_graph(rng: &mut ChaCha8Rng) -> Topology {
    loop {
        if let Some(t) = random_draw(rng) {
            return t;
        }
    }
}

fn random_draw(rng: &mut ChaCha8Rng) -> Option<Topology> {
    let n = rng.random_range(2..=12usize);
    let p = rng.random_range(0.2..0.9);
    let mut adj = vec![Vec::new(); n];
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                adj[u].push(v as NodeId);
                adj[v].push(u as NodeId);
            }
        }
    }
    Topology::declared("random", adj, 3, Vec::new()).ok()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    let mut disagreements = Vec::new();
    for i in 0..300 {
        let g = random_graph(&mut rng);
        let n = g.node_count();
        for k in 1..=4usize.min(n - 1) {
            let fast = is_k_connected(&g, k).unwrap();
            let brute = exhaustive_min_cut(&g, k).is_none();
            checked += 1;
            if fast != brute {
                disagreements.push(format!("graph {i} k={k}: flow {fast}, exhaustive {brute}"));
            }
        }
    }
    let mut embeddings = 0;
    let mut euler_bad = Vec::new();
    let mut planar: Vec<Topology> = corpus().iter().map(|k| generate(k, 3).unwrap()).collect();
    planar.push(critical_counterexample().topology);
    for seed in 0..20 {
        planar.push(
            generate(&GeneratorKind::Triangulation { rings: 3 + seed % 5, sectors: 5 + seed % 7 }, seed as u64)
                .unwrap(),
        );
        planar
            .push(generate(&GeneratorKind::Quadrangulation { rings: 2 + seed % 6, sectors: 4 + seed % 9 }, 0).unwrap());
    }
    for t in &planar {
        embeddings += 1;
        match enumerate_faces(t) {
            Ok(f) => {
                let total: usize = f.faces.iter().map(Vec::len).sum();
                let v = t.node_count() as i64;
                let e = t.edge_count() as i64;
                if total != 2 * t.edge_count()
                    || f.arc_face.len() != 2 * t.edge_count()
                    || v - e + f.faces.len() as i64 != 2
                {
                    euler_bad.push(t.label().to_string());
                }
            }
            Err(err) => euler_bad.push(format!("{}: {err}", t.label())),
        }
    }
    outcome(
        disagreements.is_empty() && euler_bad.is_empty() && checked >= 200,
        format!(
            "{checked} connectivity checks on 300 random graphs, {} disagreements; {embeddings} embeddings, {} Euler/arc failures",
            disagreements.len(),
            euler_bad.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut topos: Vec<Topology> = corpus().iter().map(|k| generate(k, 7).unwrap()).collect();
    topos.push(generate(&GeneratorKind::Torus { w: 10, h: 10 }, 0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    for i in 0..200 {
        let t = &topos[i % topos.len()];
        let z = t.compute_z().unwrap();
        let count = rng.random_range(2..=4);
        let source = rng.random_range(0..t.node_count() as NodeId);
        let (p, d) = (2..=count).rev().find_map(|c| place_byzantines(t, source, c, z + 1, &mut rng).ok()).unwrap();
        assert!(d.unwrap() > z);
        let v = check_lemma_correct_polygons(t, &p).unwrap();
        if !v.passed {
            failures.push(format!("{} {:?}: {:?}", t.label(), p.byzantine, v.witnesses));
        }
    }
    outcome(failures.is_empty(), format!("200 placements with D > Z, {} failures", failures.len()))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let net = critical_counterexample();
    let quad = generate(&GeneratorKind::Quadrangulation { rings: 5, sectors: 8 }, 0).unwrap();
    let torus = generate(&GeneratorKind::Torus { w: 6, h: 6 }, 0).unwrap();
    let mut specs = vec![RunSpec::new(
        net.topology.clone(),
        net.placement.clone(),
        StrategySpec::Mirror { m_alt: Info::new(vec![7; 16]) },
    )];
    for (i, policy) in POLICIES.into_iter().enumerate() {
        let placement = Placement::new(0, [14, 30]).unwrap();
        specs.push(
            RunSpec::new(quad.clone(), placement, StrategySpec::ForgeFlood { forge_count: 9 })
                .policy(policy)
                .timing(TimingModel::Interval { t1: 1.0, t2: 2.0 })
                .seed(i as u64),
        );
        specs.push(
            RunSpec::new(torus.clone(), Placement::new(3, [0, 21]).unwrap(), StrategySpec::Garbage)
                .policy(policy)
                .timing(TimingModel::UnboundedAsync)
                .seed(40 + i as u64),
        );
    }
    let mut problems = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let spec = spec.clone().recorded();
        let report = run(&spec).unwrap();
        let path = dir.path().join(format!("run{i}.jsonl"));
        write_transcript(&path, &spec, &report).unwrap();
        match replay(&path).unwrap() {
            ReplayOutcome::Match => {}
            diverged => problems.push(format!("run {i}: {diverged:?}")),
        }
        if run(&spec).unwrap().to_json() != report.to_json() {
            problems.push(format!("run {i}: re-execution differs"));
        }
    }
    outcome(problems.is_empty(), format!("{} transcripts replayed, {} mismatches", specs.len(), problems.len()))
}

#[test]
fn acceptance_criteria() {
    let log = SafetyLog(Mutex::new(Vec::new()));
    let mut results = Vec::new();
    let mut report = |n: usize, name: &str, o: Outcome| {
        let line = format!("criterion {n} ({name}): {} - {}\n", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        results.push((n, o.passed));
    };
    report(1, "liveness with D > Z", criterion_1(&log));
    report(3, "tightness witness", criterion_3(&log));
    report(4, "time bound", criterion_4(&log));
    report(5, "memory bound", criterion_5(&log));
    report(6, "graph oracles", criterion_6());
    report(7, "correct polygons", criterion_7());
    report(8, "determinism", criterion_8());
    report(2, "safety with D >= Z", criterion_2(&log));
    let failed: Vec<usize> = results.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
