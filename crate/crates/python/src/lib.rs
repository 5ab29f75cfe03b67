//! Python bindings for `osgpcp`.

use std::path::PathBuf;

use pyo3::exceptions::{PyFileNotFoundError, PyIOError, PyValueError};
use pyo3::prelude::*;

use osgpcp::bench::{self, Dataset, ExperimentConfig, Method};
use osgpcp::conformal::{self, EtaMode, IntervalSet, ScoreHistory};
use osgpcp::{stream, Error};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::MissingFile(path) => PyFileNotFoundError::new_err(path.display().to_string()),
        e @ (Error::Io { .. } | Error::Json { .. }) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

/// `(lower, upper)`; `None` for the empty set.
fn bounds(set: &IntervalSet) -> Option<(f64, f64)> {
    (!set.empty).then(|| (set.lower(), set.upper()))
}

#[pyclass(name = "KernelHyperparams", module = "pyosgpcp", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyKernelHyperparams(osgpcp::KernelHyperparams);

#[pymethods]
impl PyKernelHyperparams {
    #[new]
    fn new(sigma_theta2: f64, sigma_l2: f64, sigma_n2: f64) -> PyResult<Self> {
        osgpcp::KernelHyperparams::new(sigma_theta2, sigma_l2, sigma_n2)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn sigma_theta2(&self) -> f64 {
        self.0.sigma_theta2
    }

    #[getter]
    fn sigma_l2(&self) -> f64 {
        self.0.sigma_l2
    }

    #[getter]
    fn sigma_n2(&self) -> f64 {
        self.0.sigma_n2
    }

    /// Exact RBF kernel value between two inputs.
    fn rbf(&self, x: Vec<f64>, x_prime: Vec<f64>) -> PyResult<f64> {
        osgpcp::rbf_eval(&x, &x_prime, &self.0).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "KernelHyperparams(sigma_theta2={}, sigma_l2={}, sigma_n2={})",
            self.0.sigma_theta2, self.0.sigma_l2, self.0.sigma_n2
        )
    }
}

#[pyclass(name = "FeatureVector", module = "pyosgpcp", frozen)]
struct PyFeatureVector(osgpcp::FeatureVector);

#[pymethods]
impl PyFeatureVector {
    fn to_list(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    fn dot(&self, other: &PyFeatureVector) -> PyResult<f64> {
        if self.0.len() != other.0.len() {
            return Err(PyValueError::new_err("feature vectors differ in length"));
        }
        Ok(self.0.dot(&other.0))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "RfMap", module = "pyosgpcp", frozen)]
struct PyRfMap(osgpcp::RfMap);

#[pymethods]
impl PyRfMap {
    #[staticmethod]
    fn sample(params: &PyKernelHyperparams, dim: usize, num_features: usize, seed: u64) -> PyResult<Self> {
        osgpcp::sample_frequencies(&params.0, dim, num_features, seed)
            .map(Self)
            .map_err(to_py)
    }

    fn feature_map(&self, x: Vec<f64>) -> PyResult<PyFeatureVector> {
        self.0.feature_map(&x).map(PyFeatureVector).map_err(to_py)
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.0.num_features()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed()
    }

    /// Frequencies as a list of rows.
    fn frequencies(&self) -> Vec<Vec<f64>> {
        self.0.row_major().chunks(self.0.dim()).map(<[f64]>::to_vec).collect()
    }
}

#[pyclass(name = "PredictiveGaussian", module = "pyosgpcp", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyPredictive(osgpcp::PredictiveGaussian);

#[pymethods]
impl PyPredictive {
    #[new]
    fn new(mean: f64, variance: f64) -> Self {
        Self(osgpcp::PredictiveGaussian { mean, variance })
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance
    }

    fn __repr__(&self) -> String {
        format!("PredictiveGaussian(mean={}, variance={})", self.0.mean, self.0.variance)
    }
}

#[pyclass(name = "PosteriorState", module = "pyosgpcp")]
struct PyPosteriorState(osgpcp::PosteriorState);

#[pymethods]
impl PyPosteriorState {
    #[new]
    fn new(params: &PyKernelHyperparams, num_features: usize) -> PyResult<Self> {
        osgpcp::PosteriorState::new(&params.0, num_features)
            .map(Self)
            .map_err(to_py)
    }

    fn predict(&self, phi: &PyFeatureVector, sigma_n2: f64) -> PyResult<PyPredictive> {
        self.0.predict(&phi.0, sigma_n2).map(PyPredictive).map_err(to_py)
    }

    fn update(&mut self, phi: &PyFeatureVector, y: f64, sigma_n2: f64) -> PyResult<()> {
        self.0.update(&phi.0, y, sigma_n2).map_err(to_py)
    }

    #[getter]
    fn t(&self) -> u64 {
        self.0.t()
    }

    #[getter]
    fn theta_hat(&self) -> Vec<f64> {
        self.0.theta_hat().iter().copied().collect()
    }

    #[getter]
    fn sigma(&self) -> Vec<Vec<f64>> {
        self.0
            .sigma()
            .row_iter()
            .map(|row| row.iter().copied().collect())
            .collect()
    }
}

#[pyclass(name = "ExperimentRun", module = "pyosgpcp", frozen)]
struct PyExperimentRun(bench::ExperimentRun);

#[pymethods]
impl PyExperimentRun {
    #[getter]
    fn hyperparams(&self) -> PyKernelHyperparams {
        PyKernelHyperparams(self.0.hyperparams)
    }

    #[getter]
    fn q0(&self) -> f64 {
        self.0.q0
    }

    #[getter]
    fn slots(&self) -> Vec<usize> {
        self.0.rows.iter().map(|r| r.t).collect()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.0.rows.iter().map(|r| r.q_t).collect()
    }

    fn reset_slots(&self) -> Vec<usize> {
        bench::reset_slots(&self.0.rows)
    }

    /// Prefix-mean coverage of `method` (bayes, standard_cp or osgpcp).
    fn running_coverage(&self, method: &str) -> PyResult<Vec<f64>> {
        bench::running_coverage(&self.0.rows, method).map_err(to_py)
    }

    /// `[(method, final_coverage, mean_finite_size, unbounded_sets), ...]`.
    fn summary(&self) -> Vec<(String, f64, f64, usize)> {
        bench::summarize(&self.0.rows)
            .into_iter()
            .map(|s| (s.method.to_string(), s.final_coverage, s.mean_size, s.unbounded_sets))
            .collect()
    }

    /// Writes the trace CSV and its JSON sidecar; returns the sidecar path.
    fn write(&self, path: PathBuf) -> PyResult<PathBuf> {
        self.0.write(path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.rows.len()
    }
}

#[pyfunction]
#[pyo3(signature = (pred, y, clip_bound = None))]
fn nll_score(pred: &PyPredictive, y: f64, clip_bound: Option<f64>) -> PyResult<f64> {
    match clip_bound {
        Some(b) => conformal::nll_score(&pred.0, y, b),
        None => conformal::nll_score_raw(&pred.0, y),
    }
    .map_err(to_py)
}

#[pyfunction]
fn invert_score(pred: &PyPredictive, q: f64) -> Option<(f64, f64)> {
    bounds(&conformal::invert_score(&pred.0, q))
}

#[pyfunction]
fn bayes_credible_set(pred: &PyPredictive, beta: f64) -> PyResult<(f64, f64)> {
    let set = conformal::bayes_credible_set(&pred.0, beta).map_err(to_py)?;
    Ok((set.lower(), set.upper()))
}

#[pyfunction]
fn standard_cp_quantile(scores: Vec<f64>, alpha: f64) -> PyResult<f64> {
    let mut history = ScoreHistory::new();
    for s in scores {
        history.push(s).map_err(to_py)?;
    }
    Ok(conformal::standard_cp_quantile(&history, alpha))
}

#[pyfunction]
fn adaptive_update(q: f64, covered: bool, eta: f64, alpha: f64) -> f64 {
    conformal::adaptive_update(q, covered, eta, alpha)
}

type Records = Vec<(usize, Vec<f64>, f64)>;

fn records(stream: stream::SyntheticStream) -> Records {
    stream.map(|r| (r.t, r.x, r.y)).collect()
}

/// `[(t, x, y), ...]` from the stationary sine stream.
#[pyfunction]
fn gen_iid(n: usize, seed: u64) -> Records {
    records(stream::gen_iid(n, seed))
}

/// Same as `gen_iid` until slot 5000, then doubled noise.
#[pyfunction]
fn gen_shift(n: usize, seed: u64) -> Records {
    records(stream::gen_shift(n, seed))
}

#[pyfunction]
#[pyo3(signature = (
    dataset = "iid",
    samples = 10_000,
    csv_path = None,
    alpha = 0.1,
    features = 200,
    warmup = 100,
    eta_mode = "constant",
    seed_features = 0,
    seed_data = 0,
))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    dataset: &str,
    samples: usize,
    csv_path: Option<PathBuf>,
    alpha: f64,
    features: usize,
    warmup: usize,
    eta_mode: &str,
    seed_features: u64,
    seed_data: u64,
) -> PyResult<PyExperimentRun> {
    let dataset = match (dataset, csv_path) {
        ("iid", _) => Dataset::Iid { samples },
        ("shift", _) => Dataset::Shift { samples },
        ("csv", Some(path)) => Dataset::csv(path),
        ("csv", None) => return Err(PyValueError::new_err("dataset 'csv' needs csv_path")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown dataset '{other}'"))),
    };
    let config = ExperimentConfig {
        dataset,
        alpha,
        num_features: features,
        warmup,
        eta_mode: eta_mode.parse::<EtaMode>().map_err(to_py)?,
        seed_features,
        seed_data,
        ..ExperimentConfig::default()
    };
    py.detach(|| bench::run_experiment(&config))
        .map(PyExperimentRun)
        .map_err(to_py)
}

#[pyfunction]
fn running_coverage(covered: Vec<bool>) -> Vec<f64> {
    let mut hits = 0usize;
    covered
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            hits += usize::from(c);
            hits as f64 / (i + 1) as f64
        })
        .collect()
}

#[pymodule]
fn pyosgpcp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernelHyperparams>()?;
    m.add_class::<PyFeatureVector>()?;
    m.add_class::<PyRfMap>()?;
    m.add_class::<PyPredictive>()?;
    m.add_class::<PyPosteriorState>()?;
    m.add_class::<PyExperimentRun>()?;
    m.add_function(wrap_pyfunction!(nll_score, m)?)?;
    m.add_function(wrap_pyfunction!(invert_score, m)?)?;
    m.add_function(wrap_pyfunction!(bayes_credible_set, m)?)?;
    m.add_function(wrap_pyfunction!(standard_cp_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_update, m)?)?;
    m.add_function(wrap_pyfunction!(gen_iid, m)?)?;
    m.add_function(wrap_pyfunction!(gen_shift, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(running_coverage, m)?)?;
    m.add("METHODS", Method::ALL.map(|m| m.to_string()).to_vec())?;
    Ok(())
}
