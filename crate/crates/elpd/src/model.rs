//! Data container and Bayesian logistic regression model: pointwise
//! log-likelihood, unnormalized log-posterior, and its analytic
//! gradient/Hessian under independent Gaussian priors.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::math::{log1p_exp, sigmoid};

/// A binary-outcome regression dataset.
///
/// `x` is the full predictor matrix (models select columns from it), `y`
/// holds outcomes coded 0/1. A zero-row dataset is permitted so that
/// prior-only posteriors can be formed; CSV ingestion rejects it.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    names: Vec<String>,
    dropped_rows: usize,
}

impl Dataset {
    /// Validate and build a dataset. Predictor values must be finite,
    /// outcomes exactly 0 or 1, and column names unique with one name
    /// per predictor column.
    pub fn new(x: Array2<f64>, y: Array1<f64>, names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "predictor matrix has {} rows but outcome vector has {}",
                x.nrows(),
                y.len()
            )));
        }
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} column names for {} predictor columns",
                names.len(),
                x.ncols()
            )));
        }
        for (i, row) in x.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    index: i,
                    context: "predictor value".to_string(),
                });
            }
        }
        for (i, &v) in y.iter().enumerate() {
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidInput(format!(
                    "outcome at row {i} is {v}, expected 0 or 1"
                )));
            }
        }
        for (j, name) in names.iter().enumerate() {
            if names[..j].contains(name) {
                return Err(Error::InvalidInput(format!(
                    "duplicate predictor name '{name}'"
                )));
            }
        }
        Ok(Self {
            x,
            y,
            names,
            dropped_rows: 0,
        })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of predictor columns available for model selection.
    pub fn num_predictors(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Rows discarded during ingestion for missing/non-numeric values
    /// (zero for datasets built in memory).
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub(crate) fn set_dropped_rows(&mut self, dropped: usize) {
        self.dropped_rows = dropped;
    }

    /// Copy of the dataset without observation `i`.
    pub fn without_row(&self, i: usize) -> Result<Self> {
        if i >= self.n() {
            return Err(Error::InvalidInput(format!(
                "row {i} out of range for {} observations",
                self.n()
            )));
        }
        let keep: Vec<usize> = (0..self.n()).filter(|&r| r != i).collect();
        self.with_rows(&keep)
    }

    /// Copy of the dataset restricted to `rows` (in the given order).
    pub fn with_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut x = Array2::zeros((rows.len(), self.num_predictors()));
        let mut y = Array1::zeros(rows.len());
        for (out, &r) in rows.iter().enumerate() {
            if r >= self.n() {
                return Err(Error::InvalidInput(format!(
                    "row {r} out of range for {} observations",
                    self.n()
                )));
            }
            x.row_mut(out).assign(&self.x.row(r));
            y[out] = self.y[r];
        }
        Ok(Self {
            x,
            y,
            names: self.names.clone(),
            dropped_rows: self.dropped_rows,
        })
    }

    /// Dataset with every predictor column rescaled to mean 0, sd 1
    /// (sample sd, `n - 1` divisor). Constant columns are rejected.
    pub fn standardized(&self) -> Result<Self> {
        if self.n() < 2 {
            return Err(Error::InvalidInput(
                "standardization needs at least two rows".to_string(),
            ));
        }
        let mut x = self.x.clone();
        for j in 0..self.num_predictors() {
            let col: Vec<f64> = self.x.column(j).iter().cloned().collect();
            let m = crate::math::mean(&col);
            let sd = crate::math::sample_variance(&col).sqrt();
            if sd == 0.0 {
                return Err(Error::Degenerate(format!(
                    "predictor '{}' is constant; cannot standardize",
                    self.names[j]
                )));
            }
            for v in x.column_mut(j).iter_mut() {
                *v = (*v - m) / sd;
            }
        }
        Ok(Self {
            x,
            y: self.y.clone(),
            names: self.names.clone(),
            dropped_rows: self.dropped_rows,
        })
    }
}

/// A logistic regression model: which predictor columns enter the linear
/// term, plus the shared Gaussian prior on intercept and coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// Column indices (0-based) of the predictors included in the model.
    pub predictor_indices: Vec<usize>,
    /// Prior mean for the intercept and every coefficient.
    pub prior_location: f64,
    /// Prior standard deviation (> 0) for the intercept and every coefficient.
    pub prior_scale: f64,
}

impl ModelSpec {
    /// Model with the given predictor columns and the default
    /// `Normal(0, 2.5)` prior on all parameters.
    pub fn new(predictor_indices: Vec<usize>) -> Self {
        Self {
            predictor_indices,
            prior_location: 0.0,
            prior_scale: 2.5,
        }
    }

    pub fn with_prior(mut self, location: f64, scale: f64) -> Self {
        self.prior_location = location;
        self.prior_scale = scale;
        self
    }

    /// Parameter dimension: intercept plus one coefficient per predictor.
    pub fn dim(&self) -> usize {
        1 + self.predictor_indices.len()
    }

    /// Check the spec against a dataset: indices in range and distinct,
    /// prior scale positive and finite.
    pub fn validate_for(&self, data: &Dataset) -> Result<()> {
        if !(self.prior_scale > 0.0) || !self.prior_scale.is_finite() {
            return Err(Error::InvalidInput(format!(
                "prior scale must be a positive finite number, got {}",
                self.prior_scale
            )));
        }
        if !self.prior_location.is_finite() {
            return Err(Error::InvalidInput("prior location must be finite".into()));
        }
        for (j, &idx) in self.predictor_indices.iter().enumerate() {
            if idx >= data.num_predictors() {
                return Err(Error::InvalidInput(format!(
                    "predictor index {idx} out of range for {} columns",
                    data.num_predictors()
                )));
            }
            if self.predictor_indices[..j].contains(&idx) {
                return Err(Error::InvalidInput(format!(
                    "duplicate predictor index {idx}"
                )));
            }
        }
        Ok(())
    }
}

/// Model parameters: intercept and one coefficient per selected predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub alpha: f64,
    pub beta: Vec<f64>,
}

impl ParamVector {
    pub fn new(alpha: f64, beta: Vec<f64>) -> Self {
        Self { alpha, beta }
    }

    /// All-zero parameter vector for a model with `k` predictors.
    pub fn zeros(k: usize) -> Self {
        Self {
            alpha: 0.0,
            beta: vec![0.0; k],
        }
    }

    pub fn dim(&self) -> usize {
        1 + self.beta.len()
    }

    /// Flat layout `[alpha, beta_1, ..., beta_k]` used by samplers and
    /// draw matrices.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.alpha);
        v.extend_from_slice(&self.beta);
        v
    }

    pub fn from_flat(theta: &[f64]) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidInput(
                "parameter vector must contain at least the intercept".to_string(),
            ));
        }
        Ok(Self {
            alpha: theta[0],
            beta: theta[1..].to_vec(),
        })
    }
}

/// Log-posterior value with its analytic first and second derivatives.
#[derive(Debug, Clone)]
pub struct LogPosterior {
    /// Log joint density `sum_i log p(y_i | theta) + log p(theta)`
    /// (prior normalizing constants included).
    pub value: f64,
    pub gradient: Array1<f64>,
    pub hessian: Array2<f64>,
}

/// Per-observation log-likelihood `y_i eta_i - log(1 + exp(eta_i))` with
/// `eta_i = alpha + x_i' beta` over the model's predictors.
pub fn log_likelihood_pointwise(
    theta: &ParamVector,
    model: &ModelSpec,
    data: &Dataset,
) -> Result<Array1<f64>> {
    let core = PosteriorCore::new(model, data)?;
    if theta.dim() != core.dim() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has dimension {} but model needs {}",
            theta.dim(),
            core.dim()
        )));
    }
    core.log_lik_pointwise(&theta.flat())
}

/// Unnormalized log-posterior (log joint) with analytic gradient and
/// Hessian. The Hessian is symmetric and negative definite everywhere:
/// the log-likelihood is concave and the Gaussian prior contributes
/// `-1/prior_scale^2` to every diagonal entry.
pub fn log_posterior_unnormalized(
    theta: &ParamVector,
    model: &ModelSpec,
    data: &Dataset,
) -> Result<LogPosterior> {
    let core = PosteriorCore::new(model, data)?;
    if theta.dim() != core.dim() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has dimension {} but model needs {}",
            theta.dim(),
            core.dim()
        )));
    }
    core.log_posterior_grad_hess(&theta.flat())
}

/// Precomputed design matrix and prior for one (model, dataset) pair;
/// the hot path for samplers, optimizers, and likelihood matrices.
#[derive(Debug, Clone)]
pub(crate) struct PosteriorCore {
    /// n x d design matrix, first column all ones.
    design: Array2<f64>,
    y: Array1<f64>,
    prior_location: f64,
    prior_scale: f64,
}

impl PosteriorCore {
    pub(crate) fn new(model: &ModelSpec, data: &Dataset) -> Result<Self> {
        model.validate_for(data)?;
        let n = data.n();
        let d = model.dim();
        let mut design = Array2::ones((n, d));
        for (c, &idx) in model.predictor_indices.iter().enumerate() {
            design.column_mut(c + 1).assign(&data.x().column(idx));
        }
        Ok(Self {
            design,
            y: data.y().clone(),
            prior_location: model.prior_location,
            prior_scale: model.prior_scale,
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.design.ncols()
    }

    pub(crate) fn n(&self) -> usize {
        self.design.nrows()
    }

    fn eta(&self, theta: &[f64], i: usize) -> f64 {
        let row = self.design.row(i);
        let mut eta = 0.0;
        for (a, b) in row.iter().zip(theta) {
            eta += a * b;
        }
        eta
    }

    /// Per-observation log-likelihood at one parameter point.
    pub(crate) fn log_lik_pointwise(&self, theta: &[f64]) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(self.n());
        for i in 0..self.n() {
            let eta = self.eta(theta, i);
            if !eta.is_finite() {
                return Err(Error::NonFinite {
                    index: i,
                    context: "linear predictor".to_string(),
                });
            }
            out[i] = self.y[i] * eta - log1p_exp(eta);
        }
        Ok(out)
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let var = self.prior_scale * self.prior_scale;
        let norm = -0.5 * ((2.0 * std::f64::consts::PI).ln() + var.ln());
        theta
            .iter()
            .map(|&t| {
                let z = t - self.prior_location;
                norm - 0.5 * z * z / var
            })
            .sum()
    }

    /// Log-posterior value only. Returns NaN for a non-finite linear
    /// predictor so samplers can reject the proposal cheaply; the
    /// derivative path reports a structured error instead.
    pub(crate) fn log_posterior_value(&self, theta: &[f64]) -> f64 {
        let mut ll = 0.0;
        for i in 0..self.n() {
            let eta = self.eta(theta, i);
            if !eta.is_finite() {
                return f64::NAN;
            }
            ll += self.y[i] * eta - log1p_exp(eta);
        }
        ll + self.log_prior(theta)
    }

    pub(crate) fn log_posterior_grad_hess(&self, theta: &[f64]) -> Result<LogPosterior> {
        let d = self.dim();
        let var = self.prior_scale * self.prior_scale;
        let mut value = self.log_prior(theta);
        let mut gradient = Array1::zeros(d);
        let mut hessian = Array2::zeros((d, d));
        for j in 0..d {
            gradient[j] = -(theta[j] - self.prior_location) / var;
            hessian[(j, j)] = -1.0 / var;
        }
        for i in 0..self.n() {
            let eta = self.eta(theta, i);
            if !eta.is_finite() {
                return Err(Error::NonFinite {
                    index: i,
                    context: "linear predictor".to_string(),
                });
            }
            value += self.y[i] * eta - log1p_exp(eta);
            let p = sigmoid(eta);
            let resid = self.y[i] - p;
            // p(1-p) via the two tails keeps precision for |eta| large
            let w = sigmoid(eta) * sigmoid(-eta);
            let row = self.design.row(i);
            for a in 0..d {
                gradient[a] += resid * row[a];
                for b in a..d {
                    hessian[(a, b)] -= w * row[a] * row[b];
                }
            }
        }
        // mirror the upper triangle
        for a in 0..d {
            for b in (a + 1)..d {
                hessian[(b, a)] = hessian[(a, b)];
            }
        }
        Ok(LogPosterior {
            value,
            gradient,
            hessian,
        })
    }

    /// n x S matrix of pointwise log-likelihoods over a draw matrix
    /// (rows of `draws` are parameter vectors).
    pub(crate) fn log_lik_matrix(&self, draws: &Array2<f64>) -> Result<Array2<f64>> {
        if draws.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "draws have dimension {} but model needs {}",
                draws.ncols(),
                self.dim()
            )));
        }
        // eta[(i, s)] = design row i . draw s
        let mut eta = self.design.dot(&draws.t());
        for (s, _) in draws.rows().into_iter().enumerate() {
            for i in 0..self.n() {
                let e = eta[(i, s)];
                if !e.is_finite() {
                    return Err(Error::NonFinite {
                        index: i,
                        context: format!("linear predictor at draw {s}"),
                    });
                }
                eta[(i, s)] = self.y[i] * e - log1p_exp(e);
            }
        }
        Ok(eta)
    }

}
