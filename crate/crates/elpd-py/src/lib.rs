//! Python bindings: fit Bayesian logistic regressions, estimate the
//! expected log predictive density several ways, and compare models.
//! The module mirrors the Rust API with plain Python types (lists,
//! dicts, floats); heavy computation releases the interpreter lock.

use std::path::PathBuf;

use ndarray::{Array1, Array2};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use elpd::{
    ApproxCorrection, McmcConfig, NewtonConfig, ParamVector, PointwiseLogLik, PosteriorDraws,
    RunConfig,
};

/// Configuration and input mistakes raise ValueError; numerical failures
/// (non-convergence, degenerate data) raise RuntimeError.
fn to_py_err(e: elpd::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn log_mean_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + (row.iter().map(|v| (v - max).exp()).sum::<f64>() / row.len() as f64).ln()
}

/// A design matrix with a binary outcome, ready to fit.
#[pyclass(frozen)]
struct Dataset {
    inner: elpd::Dataset,
}

#[pymethods]
impl Dataset {
    /// Build from row-major predictor values, outcomes in {0, 1}, and one
    /// name per predictor column.
    #[new]
    fn new(x: Vec<Vec<f64>>, y: Vec<f64>, names: Vec<String>) -> PyResult<Self> {
        let rows = x.len();
        let cols = names.len();
        for (i, row) in x.iter().enumerate() {
            if row.len() != cols {
                return Err(PyValueError::new_err(format!(
                    "row {i} has {} values but {cols} column names were given",
                    row.len()
                )));
            }
        }
        let flat: Vec<f64> = x.into_iter().flatten().collect();
        let design = Array2::from_shape_vec((rows, cols), flat)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let inner =
            elpd::Dataset::new(design, Array1::from(y), names).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Load a CSV file, coercing the outcome column to {0, 1} and dropping
    /// rows with missing or unusable values (see `dropped_rows`).
    #[staticmethod]
    fn from_csv(path: PathBuf, outcome: &str, predictors: Vec<String>) -> PyResult<Self> {
        let inner = elpd::ingest_csv(&path, outcome, &predictors).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Copy with every predictor column centered and scaled to unit
    /// standard deviation; constant columns are rejected.
    fn standardized(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.standardized().map_err(to_py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn dropped_rows(&self) -> usize {
        self.inner.dropped_rows()
    }

    #[getter]
    fn column_names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, predictors={}, dropped_rows={})",
            self.inner.n(),
            self.inner.names().len(),
            self.inner.dropped_rows()
        )
    }
}

/// A logistic regression over a subset of predictor columns, with
/// independent Gaussian priors on the intercept and coefficients.
#[pyclass(frozen)]
struct Model {
    inner: elpd::ModelSpec,
}

#[pymethods]
impl Model {
    /// Model over the given 0-based predictor column indices. The default
    /// prior is Normal(0, 2.5) on every parameter.
    #[new]
    #[pyo3(signature = (predictors, prior_location=0.0, prior_scale=2.5))]
    fn new(predictors: Vec<usize>, prior_location: f64, prior_scale: f64) -> Self {
        Self {
            inner: elpd::ModelSpec::new(predictors).with_prior(prior_location, prior_scale),
        }
    }

    #[getter]
    fn predictors(&self) -> Vec<usize> {
        self.inner.predictor_indices.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(predictors={:?}, prior=Normal({}, {}))",
            self.inner.predictor_indices, self.inner.prior_location, self.inner.prior_scale
        )
    }
}

/// Posterior draws from one fitted model, with convergence diagnostics and
/// (for approximate fits) the density correction used by importance ratios.
#[pyclass(frozen)]
struct Fit {
    draws: PosteriorDraws,
    correction: Option<ApproxCorrection>,
    mode: Option<ParamVector>,
    max_rhat: Option<f64>,
    divergent_chains: usize,
}

#[pymethods]
impl Fit {
    #[getter]
    fn num_draws(&self) -> usize {
        self.draws.num_draws()
    }

    /// "mcmc" or "laplace" depending on how the draws were produced.
    #[getter]
    fn method(&self) -> &'static str {
        if self.correction.is_some() {
            "laplace"
        } else {
            "mcmc"
        }
    }

    /// Largest split-chain shrink factor, or None for single-chain and
    /// approximation draws.
    #[getter]
    fn max_rhat(&self) -> Option<f64> {
        self.max_rhat
    }

    #[getter]
    fn divergent_chains(&self) -> usize {
        self.divergent_chains
    }

    /// Posterior mean of each parameter (intercept first).
    fn posterior_mean(&self) -> Vec<f64> {
        self.draws.mean_vector()
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(method={:?}, num_draws={}, max_rhat={:?})",
            self.method(),
            self.draws.num_draws(),
            self.max_rhat
        )
    }
}

/// One expected-log-predictive-density estimate with its uncertainty.
#[pyclass(frozen)]
struct Report {
    inner: elpd::ElpdReport,
}

#[pymethods]
impl Report {
    /// Estimator label: "psis_loo", "waic", "is_loo", "kfold",
    /// "loo_exact", "psis_loo_subsampled", or "dic".
    #[getter]
    fn estimator(&self) -> &'static str {
        self.inner.estimator.label()
    }

    #[getter]
    fn elpd_sum(&self) -> f64 {
        self.inner.elpd_sum
    }

    #[getter]
    fn elpd_avg(&self) -> f64 {
        self.inner.elpd_avg
    }

    /// Sampling standard error of `elpd_sum` across observations.
    #[getter]
    fn se(&self) -> f64 {
        self.inner.se_loo
    }

    /// Additional standard error due to subsampling, when applicable.
    #[getter]
    fn subsampling_se(&self) -> Option<f64> {
        self.inner.subsampling_se
    }

    #[getter]
    fn n_refits(&self) -> usize {
        self.inner.n_refits
    }

    /// Per-observation contributions (per-draw for subsampled reports).
    #[getter]
    fn pointwise(&self) -> Vec<f64> {
        self.inner.pointwise.to_vec()
    }

    /// Importance-weight tail shapes, for the smoothed estimators.
    #[getter]
    fn khat(&self) -> Option<Vec<f64>> {
        self.inner.khat.as_ref().map(|k| k.to_vec())
    }

    fn __repr__(&self) -> String {
        match self.inner.subsampling_se {
            Some(sub) => format!(
                "Report({}: elpd_sum={:.2}, se={:.2}, subsampling_se={:.2})",
                self.inner.estimator.label(),
                self.inner.elpd_sum,
                self.inner.se_loo,
                sub
            ),
            None => format!(
                "Report({}: elpd_sum={:.2}, se={:.2})",
                self.inner.estimator.label(),
                self.inner.elpd_sum,
                self.inner.se_loo
            ),
        }
    }
}

fn mcmc_config(chains: usize, iterations: usize, warmup: usize, seed: u64) -> McmcConfig {
    McmcConfig {
        chains,
        iterations,
        warmup,
        seed,
        initial_points: None,
    }
}

/// Multi-chain MCMC fit of the full posterior.
#[pyfunction]
#[pyo3(signature = (model, data, chains=4, iterations=4000, warmup=2000, seed=0))]
fn fit_mcmc(
    py: Python<'_>,
    model: &Model,
    data: &Dataset,
    chains: usize,
    iterations: usize,
    warmup: usize,
    seed: u64,
) -> PyResult<Fit> {
    let spec = &model.inner;
    let ds = &data.inner;
    py.detach(|| {
        let config = mcmc_config(chains, iterations, warmup, seed);
        let (draws, conv) = elpd::sample_posterior_mcmc(spec, ds, &config)?;
        let max_rhat = conv
            .rhat
            .iter()
            .cloned()
            .fold(f64::NAN, f64::max);
        Ok(Fit {
            draws,
            correction: None,
            mode: None,
            max_rhat: if max_rhat.is_nan() { None } else { Some(max_rhat) },
            divergent_chains: conv.divergent.iter().filter(|&&d| d).count(),
        })
    })
    .map_err(to_py_err)
}

/// Laplace approximation of the posterior: Newton mode finding, Gaussian
/// draws, and the log-density correction the importance ratios need.
#[pyfunction]
#[pyo3(signature = (model, data, num_draws=4000, seed=0))]
fn fit_laplace(
    py: Python<'_>,
    model: &Model,
    data: &Dataset,
    num_draws: usize,
    seed: u64,
) -> PyResult<Fit> {
    let spec = &model.inner;
    let ds = &data.inner;
    py.detach(|| {
        let approx = elpd::laplace_approximate(spec, ds, &NewtonConfig::default())?;
        let draws = elpd::sample_from_laplace(&approx, num_draws, seed)?;
        let correction = ApproxCorrection::for_approximation(spec, ds, &approx, &draws)?;
        let mean = approx.mean();
        let mode = ParamVector::new(mean[0], mean.iter().skip(1).cloned().collect());
        Ok(Fit {
            draws,
            correction: Some(correction),
            mode: Some(mode),
            max_rhat: None,
            divergent_chains: 0,
        })
    })
    .map_err(to_py_err)
}

fn loglik_of(fit: &Fit, model: &Model, data: &Dataset) -> elpd::Result<PointwiseLogLik> {
    PointwiseLogLik::compute(&model.inner, &data.inner, &fit.draws)
}

/// Pareto-smoothed importance-sampled leave-one-out estimate. Approximate
/// fits are corrected with their stored log-density ratio automatically.
#[pyfunction]
fn psis_loo(py: Python<'_>, fit: &Fit, model: &Model, data: &Dataset) -> PyResult<Report> {
    py.detach(|| {
        let loglik = loglik_of(fit, model, data)?;
        elpd::elpd_psis_loo(&loglik, fit.correction.as_ref(), None).map(|inner| Report { inner })
    })
    .map_err(to_py_err)
}

/// Widely applicable information criterion (full-posterior fits only).
#[pyfunction]
fn waic(py: Python<'_>, fit: &Fit, model: &Model, data: &Dataset) -> PyResult<Report> {
    py.detach(|| {
        let loglik = loglik_of(fit, model, data)?;
        elpd::waic(&loglik).map(|inner| Report { inner })
    })
    .map_err(to_py_err)
}

/// Plain (unsmoothed) importance-sampled leave-one-out estimate
/// (full-posterior fits only).
#[pyfunction]
fn is_loo(py: Python<'_>, fit: &Fit, model: &Model, data: &Dataset) -> PyResult<Report> {
    py.detach(|| {
        let loglik = loglik_of(fit, model, data)?;
        elpd::elpd_is_loo(&loglik).map(|inner| Report { inner })
    })
    .map_err(to_py_err)
}

/// K-fold cross-validation: random folds, one MCMC refit per fold.
#[pyfunction]
#[pyo3(signature = (model, data, k, chains=4, iterations=4000, warmup=2000, seed=0))]
fn kfold(
    py: Python<'_>,
    model: &Model,
    data: &Dataset,
    k: usize,
    chains: usize,
    iterations: usize,
    warmup: usize,
    seed: u64,
) -> PyResult<Report> {
    let spec = &model.inner;
    let ds = &data.inner;
    py.detach(|| {
        let config = mcmc_config(chains, iterations, warmup, seed);
        elpd::elpd_kfold(spec, ds, k, &config).map(|inner| Report { inner })
    })
    .map_err(to_py_err)
}

/// Exact leave-one-out: one MCMC refit per observation. Slow by design;
/// intended for oracle checks at small n.
#[pyfunction]
#[pyo3(signature = (model, data, chains=4, iterations=4000, warmup=2000, seed=0))]
fn loo_exact(
    py: Python<'_>,
    model: &Model,
    data: &Dataset,
    chains: usize,
    iterations: usize,
    warmup: usize,
    seed: u64,
) -> PyResult<Report> {
    let spec = &model.inner;
    let ds = &data.inner;
    py.detach(|| {
        let config = mcmc_config(chains, iterations, warmup, seed);
        elpd::elpd_loo_exact(spec, ds, &config).map(|inner| Report { inner })
    })
    .map_err(to_py_err)
}

/// Smoothed leave-one-out over a probability-proportional-to-size
/// subsample of `m` observations (with replacement). Observations the
/// model finds hard to predict are drawn more often; the estimate and a
/// dedicated subsampling standard error cover the full data set.
#[pyfunction]
#[pyo3(signature = (fit, model, data, m, seed=0))]
fn psis_loo_subsampled(
    py: Python<'_>,
    fit: &Fit,
    model: &Model,
    data: &Dataset,
    m: usize,
    seed: u64,
) -> PyResult<Report> {
    py.detach(|| {
        let loglik = loglik_of(fit, model, data)?;
        // drawing probabilities from the pointwise predictive density: the
        // posterior-mean density for MCMC fits, the at-mode density for
        // approximate fits
        let density = match &fit.mode {
            Some(mode) => elpd::log_likelihood_pointwise(mode, &model.inner, &data.inner)?,
            None => Array1::from_iter((0..loglik.n()).map(|i| {
                let row = loglik.matrix().row(i);
                log_mean_exp(row.as_slice().expect("contiguous row"))
            })),
        };
        let pi = elpd::compute_pps_probabilities(&density)?;
        let plan = elpd::draw_subsample(&pi, m, seed)?;
        elpd::elpd_psis_loo_subsampled(&loglik, &plan, fit.correction.as_ref(), None)
            .map(|inner| Report { inner })
    })
    .map_err(to_py_err)
}

/// Pairwise elpd differences with standard errors from paired pointwise
/// contributions. Takes `[(name, report), ...]`; reports must cover the
/// same observations (and, for subsampled reports, the same subsample).
/// Returns one dict per ordered pair.
#[pyfunction]
fn compare<'py>(
    py: Python<'py>,
    reports: Vec<(String, Bound<'py, Report>)>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let named: Vec<(&str, &elpd::ElpdReport)> = reports
        .iter()
        .map(|(name, r)| (name.as_str(), &r.get().inner))
        .collect();
    let rows = elpd::compare_models(&named).map_err(to_py_err)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let d = PyDict::new(py);
        d.set_item("model_a", row.model_a)?;
        d.set_item("model_b", row.model_b)?;
        d.set_item("elpd_diff", row.elpd_diff)?;
        d.set_item("se_diff", row.se_diff)?;
        d.set_item("subsampling_se", row.subsampling_se)?;
        out.push(d);
    }
    Ok(out)
}

/// Leave-one-out probability integral transform with a uniformity check:
/// returns {"pit", "ks_statistic", "ks_pvalue", "passed"}; `passed` is the
/// 1%-level verdict. Binary outcomes are randomized with the given seed.
#[pyfunction]
#[pyo3(signature = (fit, model, data, seed=0))]
fn loo_pit_check<'py>(
    py: Python<'py>,
    fit: &Fit,
    model: &Model,
    data: &Dataset,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let result = py
        .detach(|| {
            let loglik = loglik_of(fit, model, data)?;
            let weights = elpd::psis_smoothed_weights(&loglik, fit.correction.as_ref())?;
            elpd::loo_pit(&loglik, &weights, data.inner.y(), seed)
        })
        .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("pit", result.pit.to_vec())?;
    d.set_item("ks_statistic", result.ks_statistic)?;
    d.set_item("ks_pvalue", result.ks_pvalue)?;
    d.set_item("passed", result.ks_band == elpd::KsBand::Pass)?;
    Ok(d)
}

/// Run the full comparison pipeline from a config file and write the
/// output tables (same behavior as the `fit-compare` binary). Returns
/// {"n", "dropped_rows", "warnings", "files"}.
#[pyfunction]
#[pyo3(signature = (config_path, seed=None, out_dir=None))]
fn run<'py>(
    py: Python<'py>,
    config_path: PathBuf,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = RunConfig::from_file(&config_path).map_err(to_py_err)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(dir) = out_dir {
        config.out_dir = Some(dir);
    }
    let bundle = py
        .detach(|| elpd::run_pipeline(&config))
        .map_err(|failure| to_py_err(failure.error))?;
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let files = elpd::emit_reports(&bundle, &dir).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("n", bundle.n)?;
    d.set_item("dropped_rows", bundle.dropped_rows)?;
    d.set_item("warnings", bundle.warnings.clone())?;
    d.set_item(
        "files",
        files
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

#[pymodule]
fn elpd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Fit>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(fit_mcmc, m)?)?;
    m.add_function(wrap_pyfunction!(fit_laplace, m)?)?;
    m.add_function(wrap_pyfunction!(psis_loo, m)?)?;
    m.add_function(wrap_pyfunction!(waic, m)?)?;
    m.add_function(wrap_pyfunction!(is_loo, m)?)?;
    m.add_function(wrap_pyfunction!(kfold, m)?)?;
    m.add_function(wrap_pyfunction!(loo_exact, m)?)?;
    m.add_function(wrap_pyfunction!(psis_loo_subsampled, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(loo_pit_check, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
