use std::path::PathBuf;

use pbcast::adversary::{place_byzantines as place, StrategySpec};
use pbcast::graph::{self, enumerate_polygons, is_k_connected, GeneratorKind};
use pbcast::sim::{self, ReplayOutcome, SchedulerPolicy, TimingModel};
use pbcast::verify;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(module = "pbcast_py", frozen)]
struct Topology {
    inner: graph::Topology,
}

#[pymethods]
impl Topology {
    /// `kind` is one of torus, quadrangulation, triangulation, critical.
    #[staticmethod]
    #[pyo3(signature = (kind, a=0, b=0, seed=0))]
    fn generate(kind: &str, a: usize, b: usize, seed: u64) -> PyResult<Self> {
        let kind = match kind {
            "torus" => GeneratorKind::Torus { w: a, h: b },
            "quadrangulation" | "quad_annulus" => GeneratorKind::Quadrangulation { rings: a, sectors: b },
            "triangulation" => GeneratorKind::Triangulation { rings: a, sectors: b },
            "critical" => GeneratorKind::Critical,
            other => return Err(PyValueError::new_err(format!("unknown generator {other:?}"))),
        };
        Ok(Topology { inner: graph::generate(&kind, seed).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Topology { inner: graph::Topology::from_json(text).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.node_count()
    }

    fn edges(&self) -> Vec<(u32, u32)> {
        self.inner.edges()
    }

    fn neighbors(&self, v: u32) -> PyResult<Vec<u32>> {
        if v as usize >= self.inner.node_count() {
            return Err(value_err(format!("no node {v}")));
        }
        Ok(self.inner.neighbors(v).to_vec())
    }

    #[getter]
    fn z(&self) -> PyResult<usize> {
        self.inner.compute_z().map_err(value_err)
    }

    #[getter]
    fn y(&self) -> usize {
        self.inner.compute_y()
    }

    #[getter]
    fn diameter(&self) -> usize {
        self.inner.diameter()
    }

    #[getter]
    fn is_planar(&self) -> bool {
        self.inner.is_planar()
    }

    fn is_k_connected(&self, k: usize) -> PyResult<bool> {
        is_k_connected(&self.inner, k).map_err(value_err)
    }

    fn polygons(&self) -> PyResult<Vec<Vec<u32>>> {
        Ok(enumerate_polygons(&self.inner).map_err(value_err)?.iter().map(|p| p.vertices().to_vec()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Topology({:?}, n={})", self.inner.label(), self.inner.node_count())
    }
}

#[pyclass(module = "pbcast_py", frozen)]
struct Report {
    inner: sim::RunReport,
}

#[pymethods]
impl Report {
    #[getter]
    fn delivered_fraction(&self) -> f64 {
        self.inner.delivered_fraction()
    }

    #[getter]
    fn max_delivery_time(&self) -> Option<f64> {
        self.inner.max_delivery_time()
    }

    #[getter]
    fn peak_node_bits(&self) -> u64 {
        self.inner.peak_node_bits()
    }

    #[getter]
    fn termination(&self) -> String {
        serde_json::to_value(self.inner.termination).unwrap().as_str().unwrap_or_default().to_string()
    }

    #[getter]
    fn events(&self) -> u64 {
        self.inner.events
    }

    #[getter]
    fn byzantine_distance(&self) -> Option<usize> {
        self.inner.params.byzantine_distance
    }

    /// Delivered value per node as hex, `None` for Byzantine or undelivered nodes.
    fn deliveries(&self) -> Vec<Option<String>> {
        self.inner.nodes.iter().map(|o| o.delivered.as_ref().filter(|_| !o.byzantine).map(|i| i.to_hex())).collect()
    }

    fn safety(&self) -> (bool, Vec<String>) {
        let v = verify::assert_safety(&self.inner, &self.inner.m0);
        (v.passed, v.witnesses)
    }

    fn liveness(&self) -> (bool, Vec<String>) {
        let v = verify::assert_liveness(&self.inner);
        (v.passed, v.witnesses)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }
}

/// Samples `count` Byzantine nodes at pairwise distance `>= min_distance`.
/// Returns the node ids and the achieved distance.
#[pyfunction]
#[pyo3(signature = (topology, source, count, min_distance, seed=0))]
fn place_byzantines(
    topology: &Topology,
    source: u32,
    count: usize,
    min_distance: usize,
    seed: u64,
) -> PyResult<(Vec<u32>, Option<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, d) = place(&topology.inner, source, count, min_distance, &mut rng).map_err(value_err)?;
    Ok((p.byzantine.into_iter().collect(), d))
}

fn parse_timing(timing: &str, t: f64, t2: Option<f64>) -> PyResult<TimingModel> {
    Ok(match timing {
        "bounded" => TimingModel::Bounded { t },
        "interval" => TimingModel::Interval { t1: t, t2: t2.ok_or_else(|| value_err("interval timing needs t2"))? },
        "unbounded_async" => TimingModel::UnboundedAsync,
        other => return Err(value_err(format!("unknown timing {other:?}"))),
    })
}

/// Runs one broadcast. `strategy` is a name (`silent`, `garbage`) or a JSON
/// object such as `{"name": "forge_flood", "forge_count": 10}`.
#[pyfunction]
#[pyo3(signature = (topology, source, byzantine, strategy="silent", policy="round_robin", timing="bounded", t=1.0, t2=None, seed=0, horizon=None, transcript=None))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    topology: &Topology,
    source: u32,
    byzantine: Vec<u32>,
    strategy: &str,
    policy: &str,
    timing: &str,
    t: f64,
    t2: Option<f64>,
    seed: u64,
    horizon: Option<u64>,
    transcript: Option<PathBuf>,
) -> PyResult<Report> {
    let strategy: StrategySpec = if strategy.trim_start().starts_with('{') {
        serde_json::from_str(strategy).map_err(value_err)?
    } else {
        serde_json::from_value(serde_json::json!({ "name": strategy })).map_err(value_err)?
    };
    let policy: SchedulerPolicy =
        serde_json::from_value(serde_json::Value::String(policy.into())).map_err(value_err)?;
    let placement = graph::Placement::new(source, byzantine).map_err(value_err)?;
    let mut spec = sim::RunSpec::new(topology.inner.clone(), placement, strategy)
        .policy(policy)
        .timing(parse_timing(timing, t, t2)?)
        .seed(seed);
    spec.horizon = horizon;
    spec.record_transcript = transcript.is_some();
    let report = py.detach(|| sim::run(&spec)).map_err(value_err)?;
    if let Some(path) = transcript {
        sim::write_transcript(&path, &spec, &report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    }
    Ok(Report { inner: report })
}

/// True when re-executing the transcript reproduces it exactly.
#[pyfunction]
fn replay(py: Python<'_>, path: PathBuf) -> PyResult<bool> {
    match py.detach(|| sim::replay(&path)).map_err(value_err)? {
        ReplayOutcome::Match => Ok(true),
        ReplayOutcome::Diverged { .. } => Ok(false),
    }
}

#[pyfunction]
fn correct_polygons(topology: &Topology, source: u32, byzantine: Vec<u32>) -> PyResult<bool> {
    let placement = graph::Placement::new(source, byzantine).map_err(value_err)?;
    Ok(verify::check_lemma_correct_polygons(&topology.inner, &placement).map_err(value_err)?.passed)
}

#[pymodule]
fn pbcast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Topology>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(place_byzantines, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(correct_polygons, m)?)?;
    Ok(())
}
