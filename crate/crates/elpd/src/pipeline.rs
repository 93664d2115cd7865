//! End-to-end run orchestration: ingest a CSV, fit every model, run the
//! requested elpd estimators, compare models pairwise, and compute
//! calibration diagnostics — all deterministically from one seed.

use std::time::Instant;

use ndarray::Array1;

use crate::config::{InferenceMethod, RunConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    compare_models, dic, dic_effective_params, elpd_is_loo, elpd_kfold, elpd_loo_exact,
    elpd_psis_loo, psis_smoothed_weights, waic, ApproxCorrection, ComparisonRow, ElpdReport,
    EstimatorKind, PointwiseLogLik, RefitContext,
};
use crate::inference::{
    laplace_approximate, sample_from_laplace, sample_posterior_mcmc, McmcConfig, NewtonConfig,
    PosteriorDraws,
};
use crate::ingest::ingest_csv;
use crate::math::{derive_seed, log_mean_exp};
use crate::model::{Dataset, ModelSpec, PosteriorCore};
use crate::ppc::{loo_pit, uniform_reference_bands, LooPitResult, ReferenceBands};
use crate::psis::KHAT_THRESHOLD;
use crate::subsample::{
    compute_pps_probabilities, draw_subsample, elpd_psis_loo_subsampled, SubsamplePlan,
};

/// Seed streams for the pipeline's independent sources of randomness.
/// All models share the same fit seed so that identical model blocks
/// produce bitwise-identical draws (their comparison is then exactly zero)
/// and distinct models share common random numbers, which only reduces the
/// noise of paired differences.
const FIT_STREAM: u64 = 0x4649_5400;
const SUBSAMPLE_STREAM: u64 = 0x5355_4253;
const PIT_STREAM: u64 = 0x5049_5400;
const BAND_STREAM: u64 = 0x4241_4e44;

/// Number of uniform replicates behind the calibration reference envelope.
const BAND_REPLICATES: usize = 100;
/// Grid resolution for density curves and envelopes on [0, 1].
const GRID_POINTS: usize = 101;

/// Summary of the single posterior fit behind a model's estimates.
#[derive(Debug, Clone)]
pub struct FitSummary {
    pub method: InferenceMethod,
    /// Largest finite split-chain R-hat across parameters (None for
    /// approximate fits or single-chain runs).
    pub max_rhat: Option<f64>,
    /// Chains that hit a non-finite log posterior anywhere (always 0 for
    /// approximate fits).
    pub divergent_chains: usize,
    pub num_draws: usize,
}

/// Everything computed for one model.
#[derive(Debug, Clone)]
pub struct ModelResult {
    pub name: String,
    pub predictors: Vec<String>,
    pub fit: FitSummary,
    /// One report per requested estimator, in request order.
    pub reports: Vec<ElpdReport>,
    /// Smoothed-importance tail shape per observation (all n observations,
    /// even for subsampled estimates).
    pub khat: Option<Vec<f64>>,
    /// Leave-one-out probability integral transform with uniformity test.
    pub loo_pit: Option<LooPitResult>,
    /// Kernel density of the PIT values on the shared grid.
    pub pit_density: Option<Array1<f64>>,
}

/// Pairwise comparison table for one estimator.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub estimator: EstimatorKind,
    pub rows: Vec<ComparisonRow>,
}

/// Wall-clock duration of one pipeline stage.
#[derive(Debug, Clone)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// All results of a pipeline run; also returned partially filled when a
/// stage fails, so that completed work can still be persisted.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    /// Echo of the configuration the run was built from.
    pub config: RunConfig,
    /// Observations used after ingestion.
    pub n: usize,
    /// Rows dropped during ingestion.
    pub dropped_rows: usize,
    pub models: Vec<ModelResult>,
    pub comparisons: Vec<ComparisonTable>,
    /// Shared subsample plan, when subsampling was requested.
    pub subsample: Option<SubsamplePlan>,
    /// Grid on [0, 1] shared by PIT densities and the reference envelope.
    pub pit_grid: Option<Array1<f64>>,
    /// Envelope of uniform-sample PIT densities on `pit_grid`.
    pub pit_bands: Option<ReferenceBands>,
    pub timings: Vec<StageTiming>,
    pub warnings: Vec<String>,
}

/// A failed run: the error (labelled with the stage that failed) plus
/// whatever the earlier stages produced.
#[derive(Debug)]
pub struct PipelineFailure {
    pub error: Error,
    pub partial: ReportBundle,
}

impl ReportBundle {
    fn empty(config: &RunConfig) -> Self {
        Self {
            config: config.clone(),
            n: 0,
            dropped_rows: 0,
            models: Vec::new(),
            comparisons: Vec::new(),
            subsample: None,
            pit_grid: None,
            pit_bands: None,
            timings: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// Run the full workflow described by `config`. On failure the error is
/// labelled with its stage and accompanied by the partial bundle.
pub fn run_pipeline(config: &RunConfig) -> std::result::Result<ReportBundle, PipelineFailure> {
    let mut bundle = ReportBundle::empty(config);
    match run_stages(config, &mut bundle) {
        Ok(()) => Ok(bundle),
        Err(error) => Err(PipelineFailure {
            error,
            partial: bundle,
        }),
    }
}

/// The estimator kinds actually produced, in request order: requesting
/// subsampling turns the smoothed leave-one-out estimator into its
/// subsampled variant.
pub fn effective_estimators(config: &RunConfig) -> Vec<EstimatorKind> {
    config
        .estimators
        .iter()
        .map(|&kind| {
            if kind == EstimatorKind::PsisLoo && config.subsample_m.is_some() {
                EstimatorKind::PsisLooSubsampled
            } else {
                kind
            }
        })
        .collect()
}

fn record(bundle: &mut ReportBundle, stage: &str, start: Instant) {
    bundle.timings.push(StageTiming {
        stage: stage.to_string(),
        seconds: start.elapsed().as_secs_f64(),
    });
}

/// The per-model posterior sample plus the pieces needed by estimators.
struct FittedModel {
    spec: ModelSpec,
    draws: PosteriorDraws,
    correction: Option<ApproxCorrection>,
    summary: FitSummary,
}

fn fit_model(
    config: &RunConfig,
    spec: &ModelSpec,
    data: &Dataset,
    fit_seed: u64,
) -> Result<FittedModel> {
    match config.inference {
        InferenceMethod::Mcmc => {
            let mcmc = McmcConfig {
                chains: config.chains,
                iterations: config.iterations,
                warmup: config.warmup,
                seed: fit_seed,
                initial_points: None,
            };
            let (draws, convergence) = sample_posterior_mcmc(spec, data, &mcmc)?;
            let max_rhat = convergence
                .rhat
                .iter()
                .cloned()
                .filter(|v| v.is_finite())
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
            let divergent_chains = convergence.divergent.iter().filter(|&&d| d).count();
            let num_draws = draws.num_draws();
            Ok(FittedModel {
                spec: spec.clone(),
                draws,
                correction: None,
                summary: FitSummary {
                    method: InferenceMethod::Mcmc,
                    max_rhat,
                    divergent_chains,
                    num_draws,
                },
            })
        }
        InferenceMethod::Laplace => {
            let approx = laplace_approximate(spec, data, &NewtonConfig::default())?;
            let s = config.chains * (config.iterations - config.warmup);
            let draws = sample_from_laplace(&approx, s, fit_seed)?;
            let correction = ApproxCorrection::for_approximation(spec, data, &approx, &draws)?;
            let num_draws = draws.num_draws();
            Ok(FittedModel {
                spec: spec.clone(),
                draws,
                correction: Some(correction),
                summary: FitSummary {
                    method: InferenceMethod::Laplace,
                    max_rhat: None,
                    divergent_chains: 0,
                    num_draws,
                },
            })
        }
    }
}

/// Pointwise log predictive density used to size the sampling
/// probabilities: the log likelihood at the posterior mode for approximate
/// fits, otherwise the per-observation log of the posterior-averaged
/// likelihood.
fn plan_log_density(
    config: &RunConfig,
    spec: &ModelSpec,
    data: &Dataset,
    loglik: &PointwiseLogLik,
) -> Result<Array1<f64>> {
    match config.inference {
        InferenceMethod::Laplace => {
            let approx = laplace_approximate(spec, data, &NewtonConfig::default())?;
            let core = PosteriorCore::new(spec, data)?;
            core.log_lik_pointwise(approx.mean().as_slice().expect("contiguous"))
        }
        InferenceMethod::Mcmc => {
            let mut out = Array1::zeros(loglik.n());
            for i in 0..loglik.n() {
                let row = loglik.matrix().row(i).to_owned();
                out[i] = log_mean_exp(row.as_slice().expect("contiguous"));
            }
            Ok(out)
        }
    }
}

fn estimate_one(
    kind: EstimatorKind,
    config: &RunConfig,
    fitted: &FittedModel,
    data: &Dataset,
    loglik: &PointwiseLogLik,
    plan: Option<&SubsamplePlan>,
    refit_config: &McmcConfig,
) -> Result<ElpdReport> {
    let fallback = RefitContext::new(&fitted.spec, data, refit_config.clone());
    match kind {
        EstimatorKind::LooExact => elpd_loo_exact(&fitted.spec, data, refit_config),
        EstimatorKind::KFold => {
            let k = config
                .kfold_k
                .ok_or_else(|| Error::Config("kfold requested without kfold_k".into()))?;
            elpd_kfold(&fitted.spec, data, k, refit_config)
        }
        EstimatorKind::IsLoo => elpd_is_loo(loglik),
        EstimatorKind::Waic => waic(loglik),
        EstimatorKind::Dic => {
            let theta_bar = fitted.draws.mean_vector();
            let core = PosteriorCore::new(&fitted.spec, data)?;
            let at_mean = core.log_lik_pointwise(&theta_bar)?;
            let p_e = dic_effective_params(loglik, &at_mean)?;
            dic(&at_mean, p_e)
        }
        EstimatorKind::PsisLoo => {
            elpd_psis_loo(loglik, fitted.correction.as_ref(), Some(&fallback))
        }
        EstimatorKind::PsisLooSubsampled => {
            let plan = plan.ok_or_else(|| {
                Error::InvalidInput("subsampled estimate requested without a plan".into())
            })?;
            elpd_psis_loo_subsampled(loglik, plan, fitted.correction.as_ref(), Some(&fallback))
        }
    }
}

fn run_stages(config: &RunConfig, bundle: &mut ReportBundle) -> Result<()> {
    config.validate()?;

    // Union of predictor columns across models, in first-appearance order;
    // all models share one dataset so estimates stay paired.
    let mut columns: Vec<String> = Vec::new();
    for model in &config.models {
        for col in &model.predictors {
            if !columns.contains(col) {
                columns.push(col.clone());
            }
        }
    }

    let start = Instant::now();
    let ingested = ingest_csv(&config.dataset_path, &config.outcome_column, &columns)
        .map_err(|e| e.in_stage("ingest"));
    record(bundle, "ingest", start);
    let mut data = ingested?;

    if config.standardize {
        let start = Instant::now();
        let standardized = data.standardized().map_err(|e| e.in_stage("standardize"));
        record(bundle, "standardize", start);
        data = standardized?;
    }
    bundle.n = data.n();
    bundle.dropped_rows = data.dropped_rows();

    let specs: Vec<ModelSpec> = config
        .models
        .iter()
        .map(|def| {
            let indices = def
                .predictors
                .iter()
                .map(|col| columns.iter().position(|c| c == col).expect("union"))
                .collect();
            ModelSpec::new(indices)
        })
        .collect();

    let fit_seed = derive_seed(config.seed, FIT_STREAM);
    let pit_seed = derive_seed(config.seed, PIT_STREAM);
    let refit_config = McmcConfig {
        chains: config.chains,
        iterations: config.iterations,
        warmup: config.warmup,
        seed: config.seed,
        initial_points: None,
    };
    let kinds = effective_estimators(config);
    let wants_subsample = kinds.contains(&EstimatorKind::PsisLooSubsampled);

    for (idx, (def, spec)) in config.models.iter().zip(specs.iter()).enumerate() {
        let name = &def.name;

        let start = Instant::now();
        let fitted = fit_model(config, spec, &data, fit_seed)
            .map_err(|e| e.in_stage(&format!("fit:{name}")));
        record(bundle, &format!("fit:{name}"), start);
        let fitted = fitted?;
        if let Some(rhat) = fitted.summary.max_rhat {
            if rhat > 1.05 {
                bundle
                    .warnings
                    .push(format!("model {name}: max split-chain rhat {rhat:.3}"));
            }
        }
        if fitted.summary.divergent_chains > 0 {
            bundle.warnings.push(format!(
                "model {name}: {} chain(s) hit a non-finite log posterior",
                fitted.summary.divergent_chains
            ));
        }

        let start = Instant::now();
        let loglik = PointwiseLogLik::compute(spec, &data, &fitted.draws)
            .map_err(|e| e.in_stage(&format!("loglik:{name}")));
        record(bundle, &format!("loglik:{name}"), start);
        let loglik = loglik?;

        // The subsample plan is drawn once, from the first model's
        // predictive density, and shared by every model: paired draws make
        // the comparison table's differences subsampling-consistent.
        if idx == 0 && wants_subsample && bundle.subsample.is_none() {
            let start = Instant::now();
            let plan = (|| {
                let density = plan_log_density(config, spec, &data, &loglik)?;
                let pi = compute_pps_probabilities(&density)?;
                let m = config
                    .subsample_m
                    .expect("wants_subsample implies subsample_m")
                    .resolve(data.n());
                draw_subsample(&pi, m, derive_seed(config.seed, SUBSAMPLE_STREAM))
            })()
            .map_err(|e| e.in_stage("subsample-plan"));
            record(bundle, "subsample-plan", start);
            bundle.subsample = Some(plan?);
        }

        let mut reports = Vec::with_capacity(kinds.len());
        for &kind in &kinds {
            let stage = format!("estimate:{}:{name}", kind.label());
            let start = Instant::now();
            let report = estimate_one(
                kind,
                config,
                &fitted,
                &data,
                &loglik,
                bundle.subsample.as_ref(),
                &refit_config,
            )
            .map_err(|e| e.in_stage(&stage));
            record(bundle, &stage, start);
            let report = report?;
            if report.se_loo.is_nan() {
                bundle.warnings.push(format!(
                    "model {name}: {} sampling error undefined for a subsample of one",
                    kind.label()
                ));
            }
            reports.push(report);
        }

        // Smoothed weights over every observation drive both the tail-shape
        // table and the probability integral transform.
        let stage = format!("diagnostics:{name}");
        let start = Instant::now();
        let diagnostics = (|| {
            let weights = psis_smoothed_weights(&loglik, fitted.correction.as_ref())?;
            let khat: Vec<f64> = weights.iter().map(|w| w.khat()).collect();
            let pit = loo_pit(&loglik, &weights, data.y(), pit_seed)?;
            Ok::<_, Error>((khat, pit))
        })()
        .map_err(|e| e.in_stage(&stage));
        record(bundle, &stage, start);
        let (khat, pit) = diagnostics?;
        let unreliable = khat
            .iter()
            .filter(|&&k| !(k < KHAT_THRESHOLD))
            .count();
        if unreliable > 0 {
            bundle.warnings.push(format!(
                "model {name}: {unreliable} of {} importance-weight tails above {KHAT_THRESHOLD}",
                khat.len()
            ));
        }

        bundle.models.push(ModelResult {
            name: name.clone(),
            predictors: def.predictors.clone(),
            fit: fitted.summary,
            reports,
            khat: Some(khat),
            loo_pit: Some(pit),
            pit_density: None,
        });
    }

    if bundle.models.len() >= 2 {
        let start = Instant::now();
        let comparisons = (|| {
            let mut tables = Vec::with_capacity(kinds.len());
            for (pos, &kind) in kinds.iter().enumerate() {
                let pairs: Vec<(&str, &ElpdReport)> = bundle
                    .models
                    .iter()
                    .map(|m| (m.name.as_str(), &m.reports[pos]))
                    .collect();
                tables.push(ComparisonTable {
                    estimator: kind,
                    rows: compare_models(&pairs)?,
                });
            }
            Ok::<_, Error>(tables)
        })()
        .map_err(|e| e.in_stage("compare"));
        record(bundle, "compare", start);
        bundle.comparisons = comparisons?;
    }

    let start = Instant::now();
    let calibration = (|| {
        let grid = Array1::linspace(0.0, 1.0, GRID_POINTS);
        let bands = uniform_reference_bands(
            data.n(),
            BAND_REPLICATES,
            &grid,
            derive_seed(config.seed, BAND_STREAM),
        )?;
        let mut densities = Vec::with_capacity(bundle.models.len());
        for model in &bundle.models {
            let pit = model.loo_pit.as_ref().expect("set in the model loop");
            let values: Vec<f64> = pit.pit.iter().cloned().collect();
            densities.push(crate::ppc::kde_density_unit_interval(&values, &grid)?);
        }
        Ok::<_, Error>((grid, bands, densities))
    })()
    .map_err(|e| e.in_stage("calibration"));
    record(bundle, "calibration", start);
    let (grid, bands, densities) = calibration?;
    bundle.pit_grid = Some(grid);
    bundle.pit_bands = Some(bands);
    for (model, density) in bundle.models.iter_mut().zip(densities) {
        model.pit_density = Some(density);
    }

    Ok(())
}
