//! Expected log predictive density (elpd) estimation and model comparison
//! for Bayesian logistic regression.
//!
//! The crate fits logistic models with Gaussian priors by adaptive
//! random-walk Metropolis or a Laplace approximation, then estimates
//! out-of-sample predictive performance by exact leave-one-out refits,
//! K-fold cross-validation, importance sampling (plain and Pareto-smoothed,
//! with optional approximation-correction terms), WAIC, and DIC. Large
//! datasets can be handled by probability-proportional-to-size subsampling
//! of the leave-one-out contributions. Calibration diagnostics (Pareto
//! k-hat, split chain diagnostics, leave-one-out PIT) and a small CLI
//! (`fit-compare`) round out the toolkit.

pub mod config;
pub mod error;
pub mod estimators;
pub mod ingest;
pub mod math;
pub mod inference;
pub mod model;
pub mod pipeline;
pub mod ppc;
pub mod psis;
pub mod report;
pub mod subsample;

pub use config::{InferenceMethod, ModelDef, RunConfig, SubsampleSize};
pub use error::{Error, Result};
pub use estimators::{compare_models, dic, dic_effective_params, elpd_is_loo, elpd_kfold, elpd_loo_exact, elpd_psis_loo, exact_loo_pointwise, psis_loo_pointwise_for_rows, psis_smoothed_weights, waic, ApproxCorrection, ComparisonRow, ElpdReport, EstimatorKind, PointwiseLogLik, RefitContext, SubsampleStamp};
pub use inference::{gelman_rubin, laplace_approximate, laplace_log_density, sample_from_laplace, sample_posterior_mcmc, ConvergenceReport, DrawMethod, LaplaceApproximation, McmcConfig, NewtonConfig, PosteriorDraws};
pub use ingest::ingest_csv;
pub use model::{log_likelihood_pointwise, log_posterior_unnormalized, Dataset, LogPosterior, ModelSpec, ParamVector};
pub use pipeline::{effective_estimators, run_pipeline, ComparisonTable, FitSummary, ModelResult, PipelineFailure, ReportBundle, StageTiming};
pub use report::emit_reports;
pub use ppc::{kde_density_unit_interval, kolmogorov_survival, ks_uniform_pvalue, ks_uniform_statistic, loo_pit, uniform_reference_bands, KsBand, LooPitResult, ReferenceBands};
pub use psis::{corrected_importance_log_ratios, fit_generalized_pareto, plain_importance_log_ratios, smooth_weights, GpdFit, SmoothStatus, SmoothedWeights, KHAT_SENTINEL, KHAT_THRESHOLD};
pub use subsample::{compute_pps_probabilities, draw_subsample, elpd_psis_loo_subsampled, sigma_loo_sq_subsampled, subsampled_elpd, subsampled_elpd_report, subsampling_variance, SubsamplePlan, SubsampledElpd};
