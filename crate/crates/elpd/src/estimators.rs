//! Estimators of expected log pointwise predictive density (elpd) for
//! held-out data: exact leave-one-out refitting, K-fold cross-validation,
//! plain and smoothed importance sampling over a single posterior fit,
//! the in-sample information criteria, and pairwise model comparison.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{sample_posterior_mcmc, DrawMethod, McmcConfig, PosteriorDraws};
use crate::math::{derive_seed, log_mean_exp, log_sum_exp, mean, population_variance, sample_variance};
use crate::model::{Dataset, ModelSpec, PosteriorCore};
use crate::psis::{
    corrected_importance_log_ratios, plain_importance_log_ratios, smooth_weights, SmoothedWeights,
};
use crate::subsample::{hh_average, hh_sigma_loo_sq, hh_variance, weighted_terms};

/// Seed streams keeping refit RNG independent of the main fit's chains.
const REFIT_STREAM: u64 = 0x5245_4649_54;
const FOLD_ASSIGN_STREAM: u64 = 0x464f_4c44_53;
const FOLD_FIT_STREAM: u64 = 0x464f_4c44_46;

/// Which estimator produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    LooExact,
    KFold,
    IsLoo,
    PsisLoo,
    PsisLooSubsampled,
    Waic,
    Dic,
}

impl EstimatorKind {
    /// Stable lowercase label used in output tables.
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::LooExact => "loo_exact",
            EstimatorKind::KFold => "kfold",
            EstimatorKind::IsLoo => "is_loo",
            EstimatorKind::PsisLoo => "psis_loo",
            EstimatorKind::PsisLooSubsampled => "psis_loo_subsampled",
            EstimatorKind::Waic => "waic",
            EstimatorKind::Dic => "dic",
        }
    }
}

/// Per-observation, per-draw log likelihood evaluated over a set of
/// posterior (or approximate-posterior) draws, with its provenance.
#[derive(Debug, Clone)]
pub struct PointwiseLogLik {
    matrix: Array2<f64>,
    method: DrawMethod,
}

impl PointwiseLogLik {
    /// Evaluate the log likelihood of every observation under every draw.
    pub fn compute(model: &ModelSpec, data: &Dataset, draws: &PosteriorDraws) -> Result<Self> {
        let core = PosteriorCore::new(model, data)?;
        let matrix = core.log_lik_matrix(draws.draws())?;
        Ok(Self {
            matrix,
            method: draws.method(),
        })
    }

    /// Wrap a precomputed `n x S` matrix (rows = observations).
    pub fn from_matrix(matrix: Array2<f64>, method: DrawMethod) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidInput(
                "log-likelihood matrix must have at least one observation and one draw".into(),
            ));
        }
        for (i, row) in matrix.outer_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    index: i,
                    context: "log-likelihood matrix row".to_string(),
                });
            }
        }
        Ok(Self { matrix, method })
    }

    /// Number of observations (rows).
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of draws (columns).
    pub fn num_draws(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// How the underlying draws were produced.
    pub fn method(&self) -> DrawMethod {
        self.method
    }

    fn row(&self, i: usize) -> Array1<f64> {
        self.matrix.row(i).to_owned()
    }
}

/// Identifies the exact subsample a report was computed on, so comparisons
/// can insist both models shared it.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleStamp {
    /// Drawn observation indices (with replacement, draw order).
    pub indices: Vec<usize>,
    /// Drawing probabilities of those indices, aligned with `indices`.
    pub pi_tilde: Vec<f64>,
    /// Size of the full data set the subsample was drawn from.
    pub population_n: usize,
}

/// An elpd estimate with its uncertainty and per-observation detail.
#[derive(Debug, Clone)]
pub struct ElpdReport {
    pub estimator: EstimatorKind,
    /// Total elpd over all n observations (estimated, for subsampled runs).
    pub elpd_sum: f64,
    /// Per-observation average; `elpd_avg * n` equals `elpd_sum` exactly.
    pub elpd_avg: f64,
    /// Sampling standard error of `elpd_sum` across observations.
    pub se_loo: f64,
    /// Additional standard error of `elpd_sum` due to subsampling, when the
    /// estimate came from a subsample of at least two draws.
    pub subsampling_se: Option<f64>,
    /// Pointwise contributions: one per observation, or one per subsample
    /// draw for subsampled reports.
    pub pointwise: Array1<f64>,
    /// Importance-weight tail shapes per observation, for smoothed
    /// importance sampling estimators.
    pub khat: Option<Array1<f64>>,
    /// Number of times the model was refit from scratch.
    pub n_refits: usize,
    /// Present when `pointwise` covers a weighted subsample.
    pub subsample: Option<SubsampleStamp>,
}

impl ElpdReport {
    /// Assemble a full-data report from pointwise contributions. The sum is
    /// defined as `avg * n` so the two advertised scales agree bit for bit.
    pub fn from_pointwise(
        estimator: EstimatorKind,
        pointwise: Array1<f64>,
        khat: Option<Array1<f64>>,
        n_refits: usize,
    ) -> Self {
        let n = pointwise.len() as f64;
        let avg = pointwise.iter().sum::<f64>() / n;
        let variance = population_variance(pointwise.as_slice().expect("contiguous"));
        Self {
            estimator,
            elpd_sum: avg * n,
            elpd_avg: avg,
            se_loo: (n * variance).sqrt(),
            subsampling_se: None,
            pointwise,
            khat,
            n_refits,
            subsample: None,
        }
    }

    /// Number of pointwise contributions carried by this report.
    pub fn len(&self) -> usize {
        self.pointwise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pointwise.is_empty()
    }
}

/// Per-draw corrections turning approximate-posterior importance ratios into
/// full-posterior ones: the log joint density and the log approximation
/// density, both evaluated at every draw.
#[derive(Debug, Clone)]
pub struct ApproxCorrection {
    pub log_p_full: Array1<f64>,
    pub log_q: Array1<f64>,
}

impl ApproxCorrection {
    pub fn new(log_p_full: Array1<f64>, log_q: Array1<f64>) -> Result<Self> {
        if log_p_full.len() != log_q.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} joint-density values vs {} approximation-density values",
                log_p_full.len(),
                log_q.len()
            )));
        }
        Ok(Self { log_p_full, log_q })
    }

    /// Evaluate the correction for draws from a Gaussian posterior
    /// approximation: log joint density minus log approximation density
    /// at each draw.
    pub fn for_approximation(
        model: &ModelSpec,
        data: &Dataset,
        approx: &crate::inference::LaplaceApproximation,
        draws: &PosteriorDraws,
    ) -> Result<Self> {
        let core = PosteriorCore::new(model, data)?;
        let s = draws.num_draws();
        let mut log_p_full = Array1::zeros(s);
        let mut log_q = Array1::zeros(s);
        for (j, draw) in draws.draws().outer_iter().enumerate() {
            let theta = draw.as_slice().expect("contiguous draw");
            let lp = core.log_posterior_value(theta);
            if !lp.is_finite() {
                return Err(Error::NonFinite {
                    index: j,
                    context: "log joint density at draw".to_string(),
                });
            }
            log_p_full[j] = lp;
            log_q[j] = crate::inference::laplace_log_density(approx, theta)?;
        }
        Ok(Self { log_p_full, log_q })
    }
}

/// Everything needed to refit the model without one observation when an
/// importance-sampling estimate is too unreliable to keep.
#[derive(Debug, Clone)]
pub struct RefitContext<'a> {
    pub model: &'a ModelSpec,
    pub data: &'a Dataset,
    pub config: McmcConfig,
}

impl<'a> RefitContext<'a> {
    pub fn new(model: &'a ModelSpec, data: &'a Dataset, config: McmcConfig) -> Self {
        Self {
            model,
            data,
            config,
        }
    }
}

/// Exact leave-one-out contribution for observation `i`: refit the model
/// on the data without it, then average the held-out likelihood over the
/// refit draws.
pub fn exact_loo_pointwise(
    model: &ModelSpec,
    data: &Dataset,
    i: usize,
    config: &McmcConfig,
) -> Result<f64> {
    if i >= data.n() {
        return Err(Error::InvalidInput(format!(
            "observation {i} out of range for {} rows",
            data.n()
        )));
    }
    let data_minus = data.without_row(i)?;
    let refit_config = config
        .clone()
        .with_seed(derive_seed(derive_seed(config.seed, REFIT_STREAM), i as u64));
    let (draws, _) = sample_posterior_mcmc(model, &data_minus, &refit_config)
        .map_err(|e| Error::Convergence(format!("refit without observation {i}: {e}")))?;
    let held_out = data.with_rows(&[i])?;
    let core = PosteriorCore::new(model, &held_out)?;
    let loglik = core.log_lik_matrix(draws.draws())?;
    let row = loglik.row(0).to_owned();
    Ok(log_mean_exp(row.as_slice().expect("contiguous")))
}

/// Exact leave-one-out elpd: one refit per observation. The gold standard,
/// at n times the cost of a single fit.
pub fn elpd_loo_exact(
    model: &ModelSpec,
    data: &Dataset,
    config: &McmcConfig,
) -> Result<ElpdReport> {
    model.validate_for(data)?;
    if data.n() < 2 {
        return Err(Error::InvalidInput(
            "exact leave-one-out needs at least two observations".into(),
        ));
    }
    let pointwise: Vec<f64> = (0..data.n())
        .into_par_iter()
        .map(|i| exact_loo_pointwise(model, data, i, config))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ElpdReport::from_pointwise(
        EstimatorKind::LooExact,
        Array1::from(pointwise),
        None,
        data.n(),
    ))
}

/// Deterministic shuffled partition of `0..n` into `k` folds whose sizes
/// differ by at most one. Every index appears in exactly one fold.
pub(crate) fn kfold_partition(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let base = n / k;
    let rem = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < rem);
        let mut fold = order[pos..pos + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        pos += size;
    }
    folds
}

/// K-fold cross-validated elpd: refit once per fold, score each held-out
/// observation against its fold's refit. `k = n` reduces to exact
/// leave-one-out.
pub fn elpd_kfold(
    model: &ModelSpec,
    data: &Dataset,
    k: usize,
    config: &McmcConfig,
) -> Result<ElpdReport> {
    model.validate_for(data)?;
    let n = data.n();
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!(
            "fold count {k} must lie in 2..={n}"
        )));
    }
    let folds = kfold_partition(n, k, derive_seed(config.seed, FOLD_ASSIGN_STREAM));
    let per_fold: Vec<Vec<(usize, f64)>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| -> Result<Vec<(usize, f64)>> {
            let in_fold: Vec<bool> = {
                let mut mask = vec![false; n];
                for &i in fold {
                    mask[i] = true;
                }
                mask
            };
            let train: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
            let data_train = data.with_rows(&train)?;
            let fit_config = config.clone().with_seed(derive_seed(
                derive_seed(config.seed, FOLD_FIT_STREAM),
                f as u64,
            ));
            let (draws, _) = sample_posterior_mcmc(model, &data_train, &fit_config)
                .map_err(|e| Error::Convergence(format!("refit for fold {f}: {e}")))?;
            let held_out = data.with_rows(fold)?;
            let core = PosteriorCore::new(model, &held_out)?;
            let loglik = core.log_lik_matrix(draws.draws())?;
            Ok(fold
                .iter()
                .zip(loglik.outer_iter())
                .map(|(&i, row)| {
                    let row = row.to_owned();
                    (i, log_mean_exp(row.as_slice().expect("contiguous")))
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pointwise = Array1::from_elem(n, f64::NAN);
    for entries in per_fold {
        for (i, value) in entries {
            pointwise[i] = value;
        }
    }
    Ok(ElpdReport::from_pointwise(
        EstimatorKind::KFold,
        pointwise,
        None,
        k,
    ))
}

/// Plain importance-sampled leave-one-out elpd from a single full-posterior
/// fit: each contribution is minus the log of the mean inverse pointwise
/// likelihood over draws. Cheap, but degrades when any weight distribution
/// is heavy-tailed.
pub fn elpd_is_loo(loglik: &PointwiseLogLik) -> Result<ElpdReport> {
    require_full_posterior(loglik, "plain importance-sampled leave-one-out")?;
    require_multiple_draws(loglik)?;
    let pointwise: Vec<f64> = (0..loglik.n())
        .map(|i| {
            let neg = loglik.row(i).mapv(|v| -v);
            -log_mean_exp(neg.as_slice().expect("contiguous"))
        })
        .collect();
    Ok(ElpdReport::from_pointwise(
        EstimatorKind::IsLoo,
        Array1::from(pointwise),
        None,
        0,
    ))
}

/// Outcome of the importance-sampling estimate for one observation.
struct RowEstimate {
    pointwise: f64,
    khat: f64,
    refitted: bool,
}

fn psis_row_estimate(
    loglik: &PointwiseLogLik,
    i: usize,
    correction: Option<&ApproxCorrection>,
    fallback: Option<&RefitContext<'_>>,
) -> Result<RowEstimate> {
    let row = loglik.row(i);
    let raw = match correction {
        Some(c) => corrected_importance_log_ratios(&row, &c.log_p_full, &c.log_q)?,
        None => plain_importance_log_ratios(&row)?,
    };
    let smoothed = smooth_weights(&raw).map_err(|e| {
        Error::InvalidInput(format!("importance weights for observation {i}: {e}"))
    })?;
    if smoothed.unreliable() {
        if let Some(ctx) = fallback {
            let pointwise = exact_loo_pointwise(ctx.model, ctx.data, i, &ctx.config)?;
            return Ok(RowEstimate {
                pointwise,
                khat: smoothed.khat(),
                refitted: true,
            });
        }
    }
    let lw = smoothed.log_weights();
    let weighted = &row + lw;
    let pointwise = log_sum_exp(weighted.as_slice().expect("contiguous"))
        - log_sum_exp(lw.as_slice().expect("contiguous"));
    Ok(RowEstimate {
        pointwise,
        khat: smoothed.khat(),
        refitted: false,
    })
}

/// Smoothed importance-sampling leave-one-out estimates for a chosen set of
/// observation rows. Returns the pointwise contributions, the weight tail
/// shapes, and how many rows fell back to an exact refit (only possible when
/// a `fallback` context is supplied; rows whose tail shape exceeds 0.7 keep
/// their unreliable smoothed estimate otherwise). Duplicated rows are
/// evaluated once per occurrence, in the order given.
pub fn psis_loo_pointwise_for_rows(
    loglik: &PointwiseLogLik,
    rows: &[usize],
    correction: Option<&ApproxCorrection>,
    fallback: Option<&RefitContext<'_>>,
) -> Result<(Array1<f64>, Array1<f64>, usize)> {
    validate_psis_inputs(loglik, correction, fallback)?;
    for &i in rows {
        if i >= loglik.n() {
            return Err(Error::InvalidInput(format!(
                "observation {i} out of range for {} rows",
                loglik.n()
            )));
        }
    }
    let estimates: Vec<RowEstimate> = rows
        .par_iter()
        .map(|&i| psis_row_estimate(loglik, i, correction, fallback))
        .collect::<Result<Vec<_>>>()?;
    let pointwise = Array1::from_iter(estimates.iter().map(|e| e.pointwise));
    let khat = Array1::from_iter(estimates.iter().map(|e| e.khat));
    let n_refits = estimates.iter().filter(|e| e.refitted).count();
    Ok((pointwise, khat, n_refits))
}

/// Smoothed importance-sampling leave-one-out elpd over all observations.
///
/// Draws from a posterior approximation (rather than the posterior itself)
/// must come with an [`ApproxCorrection`]; with a perfect approximation the
/// correction cancels and the result matches the uncorrected estimator
/// exactly. Supplying a [`RefitContext`] turns observations with unreliable
/// weight tails (shape above 0.7) into exact refits.
pub fn elpd_psis_loo(
    loglik: &PointwiseLogLik,
    correction: Option<&ApproxCorrection>,
    fallback: Option<&RefitContext<'_>>,
) -> Result<ElpdReport> {
    let rows: Vec<usize> = (0..loglik.n()).collect();
    let (pointwise, khat, n_refits) =
        psis_loo_pointwise_for_rows(loglik, &rows, correction, fallback)?;
    Ok(ElpdReport::from_pointwise(
        EstimatorKind::PsisLoo,
        pointwise,
        Some(khat),
        n_refits,
    ))
}

/// Smoothed importance weights for every observation, as used by the
/// smoothed leave-one-out estimator. Exposed so diagnostics (probability
/// integral transforms, tail-shape tables) can reuse exactly the weights
/// the estimator saw. Draws from a posterior approximation require the
/// same density [`ApproxCorrection`] as the estimator itself.
pub fn psis_smoothed_weights(
    loglik: &PointwiseLogLik,
    correction: Option<&ApproxCorrection>,
) -> Result<Vec<SmoothedWeights>> {
    validate_psis_inputs(loglik, correction, None)?;
    (0..loglik.n())
        .into_par_iter()
        .map(|i| {
            let row = loglik.row(i);
            let raw = match correction {
                Some(c) => corrected_importance_log_ratios(&row, &c.log_p_full, &c.log_q)?,
                None => plain_importance_log_ratios(&row)?,
            };
            smooth_weights(&raw).map_err(|e| {
                Error::InvalidInput(format!("importance weights for observation {i}: {e}"))
            })
        })
        .collect()
}

fn validate_psis_inputs(
    loglik: &PointwiseLogLik,
    correction: Option<&ApproxCorrection>,
    fallback: Option<&RefitContext<'_>>,
) -> Result<()> {
    require_multiple_draws(loglik)?;
    if loglik.method() == DrawMethod::LaplaceSample && correction.is_none() {
        return Err(Error::InvalidInput(
            "draws from a posterior approximation need a density correction \
             (log joint minus log approximation density per draw)"
                .into(),
        ));
    }
    if let Some(c) = correction {
        if c.log_p_full.len() != loglik.num_draws() {
            return Err(Error::DimensionMismatch(format!(
                "{} correction values vs {} draws",
                c.log_p_full.len(),
                loglik.num_draws()
            )));
        }
    }
    if let Some(ctx) = fallback {
        if ctx.data.n() != loglik.n() {
            return Err(Error::DimensionMismatch(format!(
                "refit data has {} rows but the log-likelihood matrix has {}",
                ctx.data.n(),
                loglik.n()
            )));
        }
        ctx.model.validate_for(ctx.data)?;
    }
    Ok(())
}

fn require_full_posterior(loglik: &PointwiseLogLik, what: &str) -> Result<()> {
    if loglik.method() != DrawMethod::Mcmc {
        return Err(Error::InvalidInput(format!(
            "{what} requires draws from the full posterior, not an approximation"
        )));
    }
    Ok(())
}

fn require_multiple_draws(loglik: &PointwiseLogLik) -> Result<()> {
    if loglik.num_draws() < 2 {
        return Err(Error::InvalidInput(
            "at least two draws are required".into(),
        ));
    }
    Ok(())
}

/// Widely applicable information criterion on the elpd scale: in-sample
/// log pointwise predictive density minus the summed per-observation
/// variance of the log likelihood across draws.
pub fn waic(loglik: &PointwiseLogLik) -> Result<ElpdReport> {
    require_full_posterior(loglik, "the widely applicable information criterion")?;
    require_multiple_draws(loglik)?;
    let pointwise: Vec<f64> = (0..loglik.n())
        .map(|i| {
            let row = loglik.row(i);
            let slice = row.as_slice().expect("contiguous");
            log_mean_exp(slice) - sample_variance(slice)
        })
        .collect();
    Ok(ElpdReport::from_pointwise(
        EstimatorKind::Waic,
        Array1::from(pointwise),
        None,
        0,
    ))
}

/// Effective number of parameters for the deviance information criterion:
/// twice the gap between the log likelihood at the posterior mean and the
/// mean log likelihood over draws. Non-negative whenever the pointwise log
/// likelihood is concave in the parameters.
pub fn dic_effective_params(
    loglik: &PointwiseLogLik,
    loglik_at_mean: &Array1<f64>,
) -> Result<f64> {
    require_full_posterior(loglik, "the deviance information criterion")?;
    require_multiple_draws(loglik)?;
    if loglik_at_mean.len() != loglik.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} point-estimate log likelihoods vs {} observations",
            loglik_at_mean.len(),
            loglik.n()
        )));
    }
    let mut p_e = 0.0;
    for (i, row) in loglik.matrix().outer_iter().enumerate() {
        let row_mean = mean(row.as_slice().expect("contiguous"));
        p_e += 2.0 * (loglik_at_mean[i] - row_mean);
    }
    Ok(p_e)
}

/// Deviance information criterion on the elpd scale: log likelihood at the
/// posterior mean, penalized by the effective number of parameters spread
/// evenly over observations.
pub fn dic(loglik_at_mean: &Array1<f64>, p_e: f64) -> Result<ElpdReport> {
    if loglik_at_mean.is_empty() {
        return Err(Error::InvalidInput("empty pointwise vector".into()));
    }
    if loglik_at_mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "log likelihood at the posterior mean must be finite".into(),
        ));
    }
    if !p_e.is_finite() || p_e < 0.0 {
        return Err(Error::InvalidInput(format!(
            "effective parameter count {p_e} must be finite and non-negative"
        )));
    }
    let n = loglik_at_mean.len() as f64;
    let pointwise = loglik_at_mean.mapv(|v| v - p_e / n);
    Ok(ElpdReport::from_pointwise(
        EstimatorKind::Dic,
        pointwise,
        None,
        0,
    ))
}

/// One direction of a pairwise model comparison on the summed elpd scale.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub model_a: String,
    pub model_b: String,
    /// `elpd_sum` of model a minus model b, computed from paired pointwise
    /// differences.
    pub elpd_diff: f64,
    /// Sampling standard error of the paired difference.
    pub se_diff: f64,
    /// Extra subsampling standard error when both reports share a subsample
    /// of at least two draws.
    pub subsampling_se: Option<f64>,
}

/// Pairwise elpd differences with standard errors for every ordered pair of
/// models. All reports must cover the same observations: equal pointwise
/// lengths, and — for subsampled reports — the identical subsample plan.
/// Differences are computed pointwise, so shared noise cancels; each pair is
/// computed once and mirrored, making the table exactly antisymmetric.
pub fn compare_models(reports: &[(&str, &ElpdReport)]) -> Result<Vec<ComparisonRow>> {
    if reports.len() < 2 {
        return Err(Error::InvalidInput(
            "model comparison needs at least two reports".into(),
        ));
    }
    for (idx, (name, _)) in reports.iter().enumerate() {
        if reports[..idx].iter().any(|(other, _)| other == name) {
            return Err(Error::InvalidInput(format!("duplicate model name {name}")));
        }
    }
    let first = reports[0].1;
    for (name, report) in reports {
        if report.len() != first.len() {
            return Err(Error::DimensionMismatch(format!(
                "model {name} has {} pointwise values, expected {}",
                report.len(),
                first.len()
            )));
        }
        match (&report.subsample, &first.subsample) {
            (None, None) => {}
            (Some(a), Some(b)) if a == b => {}
            _ => {
                return Err(Error::InvalidInput(format!(
                    "model {name} was not evaluated on the same subsample as {}; \
                     differences require a shared plan",
                    reports[0].0
                )));
            }
        }
    }

    let mut rows = Vec::with_capacity(reports.len() * (reports.len() - 1));
    for a in 0..reports.len() {
        for b in (a + 1)..reports.len() {
            let (name_a, report_a) = reports[a];
            let (name_b, report_b) = reports[b];
            let diff: Vec<f64> = report_a
                .pointwise
                .iter()
                .zip(report_b.pointwise.iter())
                .map(|(&x, &y)| x - y)
                .collect();
            let (elpd_diff, se_diff, subsampling_se) = match &report_a.subsample {
                None => {
                    let n = diff.len() as f64;
                    let avg = diff.iter().sum::<f64>() / n;
                    (avg * n, (n * population_variance(&diff)).sqrt(), None)
                }
                Some(stamp) => {
                    let n = stamp.population_n;
                    let terms = weighted_terms(&diff, &stamp.pi_tilde);
                    let avg = hh_average(&terms, n);
                    let v20 = hh_variance(&terms, n, avg);
                    let sigma =
                        hh_sigma_loo_sq(&diff, &stamp.pi_tilde, n, avg, v20);
                    let nf = n as f64;
                    (
                        avg * nf,
                        sigma.map(|(v, _)| (nf * v).sqrt()).unwrap_or(f64::NAN),
                        v20.map(|v| (nf * nf * v).sqrt()),
                    )
                }
            };
            rows.push(ComparisonRow {
                model_a: name_a.to_string(),
                model_b: name_b.to_string(),
                elpd_diff,
                se_diff,
                subsampling_se,
            });
            rows.push(ComparisonRow {
                model_a: name_b.to_string(),
                model_b: name_a.to_string(),
                elpd_diff: -elpd_diff,
                se_diff,
                subsampling_se,
            });
        }
    }
    Ok(rows)
}
