//! Python bindings. Reports come back as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyList;

use mirrorlab::harness::{
    build_players, memory_profile as profile, montecarlo as mc, ExperimentSpec,
};
use mirrorlab::setfam::{self, SetFamily, TownKind};
use mirrorlab::strategies::{self, StrategyName};
use mirrorlab::{run_game, GameConfig};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes through JSON so Python sees dicts and lists.
fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn family(n: usize, sets: Vec<Vec<usize>>) -> PyResult<SetFamily> {
    SetFamily::from_lists(n, &sets).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (n, alice = "naive", bob = "smallest-unsaid", seed = 0, a = 1, b = 1))]
fn play<'py>(
    py: Python<'py>,
    n: usize,
    alice: &str,
    bob: &str,
    seed: u64,
    a: usize,
    b: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let config = GameConfig::new(n, a, b).map_err(value_error)?;
    let alice: StrategyName = alice.parse().map_err(value_error)?;
    let bob: StrategyName = bob.parse().map_err(value_error)?;
    let (mut x, mut y) = build_players(&config, &alice, &bob, seed).map_err(value_error)?;
    let transcript = run_game(x.as_mut(), y.as_mut(), &config, seed).map_err(value_error)?;
    to_py(py, &transcript)
}

fn spec(
    n: usize,
    a: usize,
    b: usize,
    alice: &str,
    bob: &str,
    trials: u64,
    seed: u64,
) -> PyResult<ExperimentSpec> {
    let config = GameConfig::new(n, a, b).map_err(value_error)?;
    Ok(ExperimentSpec::new(config, alice, bob, trials, seed))
}

#[pyfunction]
#[pyo3(signature = (n, alice, bob, trials, seed = 0, a = 1, b = 1))]
#[allow(clippy::too_many_arguments)]
fn montecarlo<'py>(
    py: Python<'py>,
    n: usize,
    alice: &str,
    bob: &str,
    trials: u64,
    seed: u64,
    a: usize,
    b: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = spec(n, a, b, alice, bob, trials, seed)?;
    let report = py.detach(|| mc(&spec)).map_err(value_error)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (n, alice, bob, trials, seed = 0, a = 1, b = 1))]
#[allow(clippy::too_many_arguments)]
fn memory_profile<'py>(
    py: Python<'py>,
    n: usize,
    alice: &str,
    bob: &str,
    trials: u64,
    seed: u64,
    a: usize,
    b: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = spec(n, a, b, alice, bob, trials, seed)?;
    let report = py.detach(|| profile(&spec)).map_err(value_error)?;
    to_py(py, &report)
}

/// Power sums of a stream modulo the smallest prime above n.
#[pyclass(name = "PowerSumSketch")]
struct PySketch(mirrorlab::PowerSumSketch);

#[pymethods]
impl PySketch {
    #[new]
    fn new(n: usize, k: usize) -> PyResult<Self> {
        mirrorlab::PowerSumSketch::new(n, k)
            .map(PySketch)
            .map_err(value_error)
    }

    fn ingest(&mut self, x: usize) -> PyResult<()> {
        self.0.ingest(x).map_err(value_error)
    }

    fn extend(&mut self, xs: Vec<usize>) -> PyResult<()> {
        xs.into_iter()
            .try_for_each(|x| self.0.ingest(x))
            .map_err(value_error)
    }

    fn merge(&mut self, other: &PySketch) -> PyResult<()> {
        self.0.merge(&other.0).map_err(value_error)
    }

    /// The k missing numbers, ascending.
    fn recover(&self, k: usize) -> PyResult<Vec<usize>> {
        mirrorlab::recover_missing(&self.0, self.0.n(), k).map_err(value_error)
    }

    #[getter]
    fn sums(&self) -> Vec<u64> {
        self.0.sums().to_vec()
    }

    #[getter]
    fn count(&self) -> usize {
        self.0.count()
    }

    #[getter]
    fn modulus(&self) -> u64 {
        self.0.field().modulus()
    }

    #[getter]
    fn state_bits(&self) -> u64 {
        self.0.state_bits()
    }

    fn __repr__(&self) -> String {
        format!(
            "PowerSumSketch(n={}, k={}, q={}, count={})",
            self.0.n(),
            self.0.k(),
            self.0.field().modulus(),
            self.0.count()
        )
    }
}

#[pyfunction]
fn recover_missing(n: usize, k: usize, stream: Vec<usize>) -> PyResult<Vec<usize>> {
    let mut sketch = mirrorlab::PowerSumSketch::new(n, k).map_err(value_error)?;
    for x in stream {
        sketch.ingest(x).map_err(value_error)?;
    }
    mirrorlab::recover_missing(&sketch, n, k).map_err(value_error)
}

#[pyfunction]
fn select_prime(n: usize) -> PyResult<u64> {
    mirrorlab::select_prime(n)
        .map(|f| f.modulus())
        .map_err(value_error)
}

#[pyfunction]
fn sample_matching(n: usize, seed: u64) -> PyResult<Vec<(usize, usize)>> {
    strategies::sample_matching(n, seed)
        .map(|m| m.pairs())
        .map_err(value_error)
}

#[pyfunction]
fn check_town(n: usize, sets: Vec<Vec<usize>>, kind: &str) -> PyResult<bool> {
    let kind: TownKind = kind.parse().map_err(value_error)?;
    Ok(setfam::check_town(&family(n, sets)?, kind))
}

#[pyfunction]
fn check_modtown(n: usize, sets: Vec<Vec<usize>>, p: u64, residues: Vec<u64>) -> PyResult<bool> {
    let spec = setfam::ModtownSpec::new(p, residues).map_err(value_error)?;
    Ok(setfam::check_modtown(&family(n, sets)?, &spec))
}

#[pyfunction]
fn max_town_size<'py>(py: Python<'py>, n: usize, kind: &str) -> PyResult<Bound<'py, PyAny>> {
    let kind: TownKind = kind.parse().map_err(value_error)?;
    let search = py
        .detach(|| setfam::max_town_size(n, kind))
        .map_err(value_error)?;
    let report = serde_json::json!({
        "size": search.size,
        "size_without_empty": search.size_without_empty,
        "witness": search.witness.canonical().to_lists(),
    });
    to_py(py, &report)
}

#[pyfunction]
fn eventown_pairing(n: usize) -> PyResult<Vec<Vec<usize>>> {
    setfam::eventown_pairing(n)
        .map(|f| f.to_lists())
        .map_err(value_error)
}

#[pyfunction]
fn modtown_to_mv<'py>(
    py: Python<'py>,
    n: usize,
    sets: Vec<Vec<usize>>,
    m: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let mv = setfam::modtown_to_mv(&family(n, sets)?, m).map_err(value_error)?;
    to_py(py, &mv)
}

#[pyfunction]
fn check_mv(m: u64, u: Vec<Vec<u64>>, v: Vec<Vec<u64>>) -> PyResult<bool> {
    let dim = u.first().or(v.first()).map_or(0, Vec::len);
    setfam::check_mv(&setfam::MVFamily { m, dim, u, v }).map_err(value_error)
}

#[pyfunction]
fn strategies_list(py: Python<'_>) -> PyResult<Bound<'_, PyList>> {
    PyList::new(
        py,
        [
            "mirror",
            "tuple-mirror",
            "odd-mirror",
            "naive",
            "rand-log",
            "rand-sqrt",
            "smallest-unsaid",
            "largest-unsaid",
            "random-unsaid",
            "prefer-T:<list>",
            "avoid-D:<list>",
            "constant:<list>",
        ],
    )
}

#[pymodule]
#[pyo3(name = "mirrorlab")]
fn mirrorlab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(play, m)?)?;
    m.add_function(wrap_pyfunction!(montecarlo, m)?)?;
    m.add_function(wrap_pyfunction!(memory_profile, m)?)?;
    m.add_function(wrap_pyfunction!(recover_missing, m)?)?;
    m.add_function(wrap_pyfunction!(select_prime, m)?)?;
    m.add_function(wrap_pyfunction!(sample_matching, m)?)?;
    m.add_function(wrap_pyfunction!(check_town, m)?)?;
    m.add_function(wrap_pyfunction!(check_modtown, m)?)?;
    m.add_function(wrap_pyfunction!(max_town_size, m)?)?;
    m.add_function(wrap_pyfunction!(eventown_pairing, m)?)?;
    m.add_function(wrap_pyfunction!(modtown_to_mv, m)?)?;
    m.add_function(wrap_pyfunction!(check_mv, m)?)?;
    m.add("strategies", strategies_list(m.py())?)?;
    m.add_class::<PySketch>()?;
    Ok(())
}
