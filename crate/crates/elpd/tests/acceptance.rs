//! End-to-end acceptance checks. Each test prints one machine-greppable
//! `ACCEPTANCE <id> (<name>): PASS|FAIL|SKIP` line (visible with
//! `cargo test --test acceptance -- --nocapture`) plus one line per
//! sub-check; a test fails if and only if any sub-check fails.
//!
//! Checks 1-3 replicate published results on the Western Collaborative
//! Group Study data, which is not bundled for licensing reasons. Set
//! `WCGS_CSV=/path/to/wcgs.csv` (see `scripts/fetch_wcgs.R`) to enable
//! them; without it they SKIP and report why. Checks 4-7 are
//! self-contained and always run.

use std::env;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use elpd::{
    compare_models, compute_pps_probabilities, draw_subsample, elpd_is_loo, elpd_kfold,
    elpd_loo_exact, elpd_psis_loo, elpd_psis_loo_subsampled, fit_generalized_pareto,
    gelman_rubin, ingest_csv, laplace_approximate, log_likelihood_pointwise,
    log_posterior_unnormalized, loo_pit, psis_smoothed_weights, sample_from_laplace,
    sample_posterior_mcmc, sigma_loo_sq_subsampled, smooth_weights, subsampled_elpd, waic,
    ApproxCorrection, Dataset, DrawMethod, ElpdReport, KsBand, McmcConfig, ModelSpec,
    NewtonConfig, ParamVector, PointwiseLogLik, PosteriorDraws, RefitContext, SubsamplePlan,
    KHAT_THRESHOLD,
};

// ---------------------------------------------------------------------------
// fixed seeds: the statistical criteria below are calibrated against this
// exact seed set; changing any of them invalidates the published tolerances
// ---------------------------------------------------------------------------
const FIT_SEED: u64 = 20240001;
const REFIT_SEED: u64 = 20240002;
const SUBSAMPLE_SEEDS: [u64; 4] = [31, 32, 33, 34];
const REPLICATION_SEED: u64 = 20240005;

/// Draw budget used by every full-scale fit in this suite: 2 chains x
/// (5000 - 1000) iterations = 8000 retained draws.
fn big_fit(seed: u64) -> McmcConfig {
    McmcConfig {
        chains: 2,
        iterations: 5000,
        warmup: 1000,
        seed,
        initial_points: None,
    }
}

// ---------------------------------------------------------------------------
// reporting helpers
// ---------------------------------------------------------------------------

struct Criterion {
    id: u32,
    name: &'static str,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(id: u32, name: &'static str) -> Self {
        Self {
            id,
            name,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    /// Print one line per sub-check plus the verdict line, then panic if
    /// anything failed so `cargo test` reports the criterion honestly.
    fn conclude(self) {
        for (label, ok) in &self.checks {
            println!("  [{}] {label}", if *ok { "ok" } else { "FAIL" });
        }
        let pass = self.checks.iter().all(|(_, ok)| *ok);
        println!(
            "ACCEPTANCE {} ({}): {}",
            self.id,
            self.name,
            if pass { "PASS" } else { "FAIL" }
        );
        assert!(
            pass,
            "acceptance criterion {} ({}) failed; see the check list above",
            self.id, self.name
        );
    }

    fn skip(id: u32, name: &'static str, why: &str) {
        println!("ACCEPTANCE {id} ({name}): SKIP - {why}");
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

fn log_mean_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + (row.iter().map(|v| (v - max).exp()).sum::<f64>() / row.len() as f64).ln()
}

// ---------------------------------------------------------------------------
// data helpers
// ---------------------------------------------------------------------------

const HEART_PREDICTORS: [&str; 8] = [
    "age", "height", "weight", "sdp", "dbp", "chol", "cigs", "arcus",
];
/// Nested model sizes: first 3, first 6, all 8 predictors.
const MODEL_SIZES: [usize; 3] = [3, 6, 8];
const MODEL_NAMES: [&str; 3] = ["M1", "M2", "M3"];

const SKIP_MSG: &str =
    "set WCGS_CSV to the heart-study CSV (scripts/fetch_wcgs.R exports it) to run this check";

/// Heart-study data with all eight predictors, standardized. Covariates are
/// standardized because the published analysis does not state its scaling;
/// the reproduction tolerances absorb the difference.
fn heart_dataset() -> Option<Dataset> {
    let path = env::var("WCGS_CSV").ok()?;
    let cols: Vec<String> = HEART_PREDICTORS.iter().map(|s| s.to_string()).collect();
    let data = ingest_csv(Path::new(&path), "chd", &cols)
        .expect("failed to ingest the heart-study CSV named by WCGS_CSV");
    Some(data.standardized().expect("standardization failed"))
}

fn nested_model(size: usize) -> ModelSpec {
    ModelSpec::new((0..size).collect())
}

/// Synthetic logistic data with known coefficients, for the self-contained
/// checks: x ~ N(0,1) i.i.d., eta = 0.3 + 1.0 x1 - 0.8 x2 + 0.5 x3.
fn synthetic_logistic(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 3));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        for j in 0..3 {
            x[[i, j]] = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let eta = 0.3 + 1.0 * x[[i, 0]] - 0.8 * x[[i, 1]] + 0.5 * x[[i, 2]];
        let p = 1.0 / (1.0 + (-eta).exp());
        y[i] = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
    }
    Dataset::new(x, y, vec!["x1".into(), "x2".into(), "x3".into()]).unwrap()
}

fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_200.csv")
}

/// Fit with the big budget and return draws plus the pointwise loglik.
fn fit_and_loglik(spec: &ModelSpec, data: &Dataset, seed: u64) -> (PosteriorDraws, PointwiseLogLik) {
    let (draws, _) = sample_posterior_mcmc(spec, data, &big_fit(seed)).expect("MCMC fit failed");
    let loglik = PointwiseLogLik::compute(spec, data, &draws).expect("loglik evaluation failed");
    (draws, loglik)
}

/// Laplace fit, 8000 approximation draws, density correction, loglik.
fn laplace_fit_and_loglik(
    spec: &ModelSpec,
    data: &Dataset,
    seed: u64,
) -> (ApproxCorrection, PointwiseLogLik, ParamVector) {
    let approx = laplace_approximate(spec, data, &NewtonConfig::default())
        .expect("Laplace approximation failed");
    let draws = sample_from_laplace(&approx, 8000, seed).expect("approximation sampling failed");
    let corr = ApproxCorrection::for_approximation(spec, data, &approx, &draws)
        .expect("density correction failed");
    let loglik = PointwiseLogLik::compute(spec, data, &draws).expect("loglik evaluation failed");
    let mode = approx.mean();
    let mode_params = ParamVector::new(mode[0], mode.iter().skip(1).cloned().collect());
    (corr, loglik, mode_params)
}

/// Evaluate subsampled smoothed-importance LOO on a shared plan.
fn subsampled_report(
    plan: &SubsamplePlan,
    loglik: &PointwiseLogLik,
    corr: Option<&ApproxCorrection>,
) -> ElpdReport {
    elpd_psis_loo_subsampled(loglik, plan, corr, None)
        .expect("subsampled estimation failed")
}

// ---------------------------------------------------------------------------
// 1. reference elpd table on the heart-study data
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_heart_study_reference_elpds() {
    let name = "heart-study reference elpd table";
    let Some(data) = heart_dataset() else {
        Criterion::skip(1, name, SKIP_MSG);
        return;
    };
    let mut c = Criterion::new(1, name);
    c.check(
        format!("ingested n = {} (expected 3140)", data.n()),
        data.n() == 3140,
    );

    // reference sum-scale elpd values for the three nested models
    let psis_targets = [-859.5, -817.7, -804.4];
    let kfold_targets = [-857.9, -816.8, -806.0];

    let mut sums: Vec<[f64; 3]> = Vec::new(); // per model: [psis, waic, is], kfold separate
    let mut kfold_sums = [0.0f64; 3];
    for (mi, &size) in MODEL_SIZES.iter().enumerate() {
        let spec = nested_model(size);
        let config = big_fit(FIT_SEED);
        let (draws, conv) =
            sample_posterior_mcmc(&spec, &data, &config).expect("heart-study fit failed");
        let max_rhat = conv.rhat.iter().cloned().fold(f64::NAN, f64::max);
        println!("  {}: max split-Rhat {max_rhat:.4}", MODEL_NAMES[mi]);
        let loglik =
            PointwiseLogLik::compute(&spec, &data, &draws).expect("loglik evaluation failed");
        let refit = RefitContext::new(&spec, &data, config.clone());
        let psis = elpd_psis_loo(&loglik, None, Some(&refit)).expect("smoothed LOO failed");
        let w = waic(&loglik).expect("WAIC failed");
        let is = elpd_is_loo(&loglik).expect("plain IS-LOO failed");
        let kf = elpd_kfold(&spec, &data, 10, &config).expect("10-fold CV failed");
        for (label, report, target, tol) in [
            ("smoothed LOO", &psis, psis_targets[mi], 2.0),
            ("WAIC", &w, psis_targets[mi], 2.0),
            ("plain IS-LOO", &is, psis_targets[mi], 2.0),
            ("10-fold CV", &kf, kfold_targets[mi], 4.0),
        ] {
            c.check(
                format!(
                    "{} {label} sum {:.2} within {tol} of {target}",
                    MODEL_NAMES[mi], report.elpd_sum
                ),
                (report.elpd_sum - target).abs() <= tol,
            );
        }
        sums.push([psis.elpd_sum, w.elpd_sum, is.elpd_sum]);
        kfold_sums[mi] = kf.elpd_sum;
    }
    for (ei, label) in ["smoothed LOO", "WAIC", "plain IS-LOO"].iter().enumerate() {
        c.check(
            format!("{label}: ordering M3 > M2 > M1"),
            sums[2][ei] > sums[1][ei] && sums[1][ei] > sums[0][ei],
        );
    }
    c.check(
        "10-fold CV: ordering M3 > M2 > M1".to_string(),
        kfold_sums[2] > kfold_sums[1] && kfold_sums[1] > kfold_sums[0],
    );

    // exact LOO exercised on a 200-row subset (full-scale exactness is
    // covered by the self-contained oracle check below)
    let rows: Vec<usize> = (0..200).collect();
    let subset = data.with_rows(&rows).expect("subset construction failed");
    let spec = nested_model(MODEL_SIZES[0]);
    let exact =
        elpd_loo_exact(&spec, &subset, &big_fit(REFIT_SEED)).expect("exact LOO refits failed");
    let (_, sub_loglik) = fit_and_loglik(&spec, &subset, FIT_SEED);
    let sub_psis = elpd_psis_loo(&sub_loglik, None, None).expect("subset smoothed LOO failed");
    let combined = (exact.se_loo.powi(2) + sub_psis.se_loo.powi(2)).sqrt();
    c.check(
        format!(
            "200-row subset: |exact {:.2} - smoothed {:.2}| <= 3 x combined SE {:.2}",
            exact.elpd_sum, sub_psis.elpd_sum, combined
        ),
        (exact.elpd_sum - sub_psis.elpd_sum).abs() <= 3.0 * combined,
    );
    c.conclude();
}

// ---------------------------------------------------------------------------
// 2. importance-weight tail shapes on the heart-study data
// ---------------------------------------------------------------------------

#[test]
fn acceptance_2_heart_study_tail_shape_diagnostics() {
    let name = "heart-study tail-shape diagnostics";
    let Some(data) = heart_dataset() else {
        Criterion::skip(2, name, SKIP_MSG);
        return;
    };
    let mut c = Criterion::new(2, name);
    for (mi, &size) in MODEL_SIZES.iter().enumerate() {
        let spec = nested_model(size);
        let (_, loglik) = fit_and_loglik(&spec, &data, FIT_SEED);
        let weights = psis_smoothed_weights(&loglik, None).expect("weight smoothing failed");
        let worst = weights
            .iter()
            .map(|w| w.khat())
            .fold(f64::NEG_INFINITY, f64::max);
        let bad = weights.iter().filter(|w| w.khat() >= KHAT_THRESHOLD).count();
        c.check(
            format!(
                "{}: all {} tail shapes below {KHAT_THRESHOLD} (worst {worst:.3}, {bad} at or above)",
                MODEL_NAMES[mi],
                data.n()
            ),
            bad == 0,
        );
    }
    c.conclude();
}

// ---------------------------------------------------------------------------
// 3. subsampled comparison under Laplace inference on the heart-study data
// ---------------------------------------------------------------------------

#[test]
fn acceptance_3_heart_study_subsampled_comparison() {
    let name = "heart-study subsampled comparison";
    let Some(data) = heart_dataset() else {
        Criterion::skip(3, name, SKIP_MSG);
        return;
    };
    let mut c = Criterion::new(3, name);
    let n = data.n();

    // full-sample corrected smoothed LOO per model, plus the pieces the
    // subsampled passes reuse
    let mut full_sums = [0.0f64; 3];
    let mut parts: Vec<(PointwiseLogLik, ApproxCorrection)> = Vec::new();
    let mut plan_density = None;
    for (mi, &size) in MODEL_SIZES.iter().enumerate() {
        let spec = nested_model(size);
        let (corr, loglik, mode) = laplace_fit_and_loglik(&spec, &data, FIT_SEED);
        let full = elpd_psis_loo(&loglik, Some(&corr), None).expect("full smoothed LOO failed");
        println!("  {}: full corrected sum {:.2}", MODEL_NAMES[mi], full.elpd_sum);
        full_sums[mi] = full.elpd_sum;
        if mi == 0 {
            // drawing probabilities come from the first model's predictive
            // density at its mode, shared by every model and subsample size
            let ld = log_likelihood_pointwise(&mode, &spec, &data)
                .expect("at-mode loglik evaluation failed");
            plan_density = Some(ld);
        }
        parts.push((loglik, corr));
    }
    let pi = compute_pps_probabilities(&plan_density.unwrap())
        .expect("drawing probabilities failed");

    // subsample sizes: 5%, 10%, 25%, 50% of n (157/314/785/1570 at n=3140)
    let m_grid = [n / 20, n / 10, n / 4, n / 2];
    let mut covered = [[false; 4]; 3];
    for (si, (&m, &seed)) in m_grid.iter().zip(SUBSAMPLE_SEEDS.iter()).enumerate() {
        let plan = draw_subsample(&pi, m, seed).expect("subsample draw failed");
        let reports: Vec<ElpdReport> = parts
            .iter()
            .map(|(loglik, corr)| subsampled_report(&plan, loglik, Some(corr)))
            .collect();
        for mi in 0..3 {
            let bar = 2.0 * reports[mi].subsampling_se.expect("subsampling SE absent");
            covered[mi][si] = (reports[mi].elpd_sum - full_sums[mi]).abs() <= bar;
        }
        if m == n / 10 {
            let named: Vec<(&str, &ElpdReport)> = MODEL_NAMES
                .iter()
                .zip(reports.iter())
                .map(|(n, r)| (*n, r))
                .collect();
            let table = compare_models(&named).expect("comparison failed");
            for (b, target) in [("M2", 7.2f64), ("M1", 42.0f64)] {
                let row = table
                    .iter()
                    .find(|r| r.model_a == "M3" && r.model_b == b)
                    .expect("comparison row missing");
                let band =
                    row.se_diff + 2.0 * row.subsampling_se.expect("subsampling SE absent");
                c.check(
                    format!(
                        "m = n/10: diff(M3, {b}) = {:.2} within {target} +- {band:.2}",
                        row.elpd_diff
                    ),
                    (row.elpd_diff - target).abs() <= band,
                );
            }
        }
    }
    for mi in 0..3 {
        let hits = covered[mi].iter().filter(|&&h| h).count();
        c.check(
            format!(
                "{}: 2-SE subsampling bars cover the full-sample value in {hits}/4 sizes (need >= 3)",
                MODEL_NAMES[mi]
            ),
            hits >= 3,
        );
    }
    c.conclude();
}

// ---------------------------------------------------------------------------
// 4. desk-scale oracle: smoothed LOO against n exact refits
// ---------------------------------------------------------------------------

#[test]
fn acceptance_4_desk_scale_exact_loo_oracle() {
    let name = "desk-scale exact-refit oracle";
    let mut c = Criterion::new(4, name);
    let start = Instant::now();
    let cols = vec!["x1".to_string(), "x2".to_string(), "x3".to_string()];
    let data = ingest_csv(&fixture_path(), "y", &cols).expect("bundled fixture failed to load");
    assert_eq!(data.n(), 200, "bundled fixture should have 200 rows");
    let spec = ModelSpec::new(vec![0, 1, 2]);

    let (_, loglik) = fit_and_loglik(&spec, &data, FIT_SEED);
    let psis = elpd_psis_loo(&loglik, None, None).expect("smoothed LOO failed");
    let w = waic(&loglik).expect("WAIC failed");
    let exact =
        elpd_loo_exact(&spec, &data, &big_fit(REFIT_SEED)).expect("exact LOO refits failed");

    let mut gaps: Vec<f64> = psis
        .pointwise
        .iter()
        .zip(exact.pointwise.iter())
        .map(|(a, b)| (a - b).abs())
        .collect();
    let med = median(&mut gaps);
    c.check(
        format!("median |smoothed - exact| pointwise gap {med:.4} < 0.02"),
        med < 0.02,
    );
    c.check(
        format!(
            "|WAIC sum {:.2} - smoothed LOO sum {:.2}| < 2.0",
            w.elpd_sum, psis.elpd_sum
        ),
        (w.elpd_sum - psis.elpd_sum).abs() < 2.0,
    );
    let elapsed = start.elapsed().as_secs_f64();
    c.check(format!("runtime {elapsed:.1}s < 600s"), elapsed < 600.0);
    c.conclude();
}

// ---------------------------------------------------------------------------
// 5. unbiasedness of the subsampled estimator
// ---------------------------------------------------------------------------

#[test]
fn acceptance_5_subsampled_estimator_unbiasedness() {
    let name = "subsampled-estimator unbiasedness";
    let mut c = Criterion::new(5, name);
    let n = 500;
    let data = synthetic_logistic(n, 501);
    let spec = ModelSpec::new(vec![0, 1, 2]);
    let (_, loglik) = fit_and_loglik(&spec, &data, FIT_SEED);
    let full = elpd_psis_loo(&loglik, None, None).expect("smoothed LOO failed");

    // drawing probabilities from the pointwise predictive density, as in
    // the production pipeline
    let lppd = Array1::from_iter((0..n).map(|i| {
        let row = loglik.matrix().row(i);
        log_mean_exp(row.as_slice().expect("contiguous"))
    }));
    let pi = compute_pps_probabilities(&lppd).expect("drawing probabilities failed");

    let reps = 500usize;
    let m = n / 10;
    let mut sums = Vec::with_capacity(reps);
    let mut var_small = Vec::with_capacity(reps);
    let mut var_large = Vec::with_capacity(reps);
    for r in 0..reps {
        let plan = draw_subsample(&pi, m, REPLICATION_SEED + r as u64).unwrap();
        let pw = Array1::from_iter(plan.indices().iter().map(|&i| full.pointwise[i]));
        let est = subsampled_elpd(&plan, &pw).unwrap();
        sums.push(est.elpd_sum_hat);
        var_small.push(est.subsampling_variance.unwrap());

        let plan2 = draw_subsample(&pi, 2 * m, REPLICATION_SEED + 10_000 + r as u64).unwrap();
        let pw2 = Array1::from_iter(plan2.indices().iter().map(|&i| full.pointwise[i]));
        var_large.push(subsampled_elpd(&plan2, &pw2).unwrap().subsampling_variance.unwrap());
    }
    let mean_hat = mean(&sums);
    let tol = 4.0 * sample_sd(&sums) / (reps as f64).sqrt();
    c.check(
        format!(
            "|mean of {reps} m={m} estimates ({mean_hat:.3}) - full sum ({:.3})| <= {tol:.3}",
            full.elpd_sum
        ),
        (mean_hat - full.elpd_sum).abs() <= tol,
    );
    let ratio = median(&mut var_large) / median(&mut var_small);
    c.check(
        format!("subsampling variance halves when m doubles: median ratio {ratio:.3} in [0.35, 0.7]"),
        (0.35..=0.7).contains(&ratio),
    );
    c.conclude();
}

// ---------------------------------------------------------------------------
// 6. Laplace-corrected vs full-MCMC elpd gap
// ---------------------------------------------------------------------------

#[test]
fn acceptance_6_laplace_vs_mcmc_gap() {
    let name = "Laplace vs MCMC gap";
    let mut c = Criterion::new(6, name);
    let data = synthetic_logistic(500, 601);
    let spec = ModelSpec::new(vec![0, 1, 2]);

    let (_, mcmc_loglik) = fit_and_loglik(&spec, &data, FIT_SEED);
    let mcmc = elpd_psis_loo(&mcmc_loglik, None, None).expect("MCMC smoothed LOO failed");

    let (corr, lap_loglik, _) = laplace_fit_and_loglik(&spec, &data, FIT_SEED);
    let lap = elpd_psis_loo(&lap_loglik, Some(&corr), None).expect("corrected smoothed LOO failed");

    let combined = (mcmc.se_loo.powi(2) + lap.se_loo.powi(2)).sqrt();
    c.check(
        format!(
            "|corrected approximation sum {:.2} - MCMC sum {:.2}| <= 3 x combined SE {:.2}",
            lap.elpd_sum, mcmc.elpd_sum, combined
        ),
        (lap.elpd_sum - mcmc.elpd_sum).abs() <= 3.0 * combined,
    );
    c.conclude();
}

// ---------------------------------------------------------------------------
// 7. numerical property suite (always runnable)
// ---------------------------------------------------------------------------

#[test]
fn acceptance_7_numerical_property_suite() {
    let name = "numerical property suite";
    let mut c = Criterion::new(7, name);

    // --- gradient and Hessian against central finite differences ---
    let data = synthetic_logistic(40, 701);
    let spec = ModelSpec::new(vec![0, 1]);
    let dim = 3; // intercept + two coefficients
    let to_params = |t: &[f64]| ParamVector::new(t[0], t[1..].to_vec());
    let value = |t: &[f64]| {
        log_posterior_unnormalized(&to_params(t), &spec, &data)
            .unwrap()
            .value
    };
    let gradient = |t: &[f64]| {
        log_posterior_unnormalized(&to_params(t), &spec, &data)
            .unwrap()
            .gradient
    };
    let mut rng = ChaCha8Rng::seed_from_u64(702);
    let h = 1e-5;
    let mut worst_grad = 0.0f64;
    let mut worst_hess = 0.0f64;
    for _ in 0..5 {
        let theta: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lp = log_posterior_unnormalized(&to_params(&theta), &spec, &data).unwrap();
        for j in 0..dim {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (value(&up) - value(&dn)) / (2.0 * h);
            let rel = (fd - lp.gradient[j]).abs() / lp.gradient[j].abs().max(1.0);
            worst_grad = worst_grad.max(rel);
            let gu = gradient(&up);
            let gd = gradient(&dn);
            for i in 0..dim {
                let fd2 = (gu[i] - gd[i]) / (2.0 * h);
                let rel2 = (fd2 - lp.hessian[[i, j]]).abs() / lp.hessian[[i, j]].abs().max(1.0);
                worst_hess = worst_hess.max(rel2);
            }
        }
    }
    c.check(
        format!("gradient matches central differences (worst rel {worst_grad:.2e} <= 1e-6)"),
        worst_grad <= 1e-6,
    );
    c.check(
        format!("Hessian matches differentiated gradient (worst rel {worst_hess:.2e} <= 1e-5)"),
        worst_hess <= 1e-5,
    );

    // --- generalized Pareto shape recovery at tail size 10^4 ---
    let mut rng = ChaCha8Rng::seed_from_u64(703);
    for k in [0.0f64, 0.5] {
        let sample: Vec<f64> = (0..10_000)
            .map(|_| {
                let u: f64 = rng.random::<f64>();
                if k == 0.0 {
                    -(1.0 - u).ln()
                } else {
                    ((1.0 - u).powf(-k) - 1.0) / k
                }
            })
            .collect();
        let fit = fit_generalized_pareto(&sample).expect("tail fit failed");
        c.check(
            format!("tail shape {k} recovered as {:.3} (+- 0.05)", fit.khat),
            (fit.khat - k).abs() <= 0.05,
        );
    }

    // --- truncation invariant on 1000 random ratio vectors ---
    let mut rng = ChaCha8Rng::seed_from_u64(704);
    let mut violations = 0usize;
    for _ in 0..1000 {
        let s = rng.random_range(25..=400);
        let scale = rng.random_range(0.5..3.0);
        let raw = Array1::from_iter(
            (0..s).map(|_| scale * rng.sample::<f64, _>(rand_distr::StandardNormal)),
        );
        let raw_max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sw = smooth_weights(&raw).expect("smoothing failed");
        let smoothed_max = sw
            .log_weights()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if smoothed_max > raw_max + 1e-12 {
            violations += 1;
        }
    }
    c.check(
        format!("smoothed max never exceeds raw max ({violations}/1000 violations)"),
        violations == 0,
    );

    // --- identity-plan variance reduces to the population variance ---
    let n = 10usize;
    let plan = SubsamplePlan::from_parts(
        Array1::from_elem(n, 1.0 / n as f64),
        (0..n).collect(),
        0,
    )
    .unwrap();
    let pointwise = Array1::from_iter((0..n).map(|i| -0.4 - 0.31 * i as f64));
    let (sigma, clamped) = sigma_loo_sq_subsampled(&plan, &pointwise)
        .unwrap()
        .expect("variance absent");
    let mu = pointwise.sum() / n as f64;
    let pop = pointwise.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64;
    c.check(
        format!(
            "identity-plan variance {sigma:.4} matches population variance {pop:.4} (rel < {})",
            2.0 / n as f64
        ),
        !clamped && (sigma - pop).abs() / pop < 2.0 / n as f64,
    );

    // --- split-Rhat below 1.01 on stationary chains ---
    let mut rng = ChaCha8Rng::seed_from_u64(705);
    let draws = Array2::from_shape_fn((8000, 2), |_| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let stationary = PosteriorDraws::new(draws, 4, DrawMethod::Mcmc, 705).unwrap();
    let rhat = gelman_rubin(&stationary).expect("Rhat failed");
    let worst = rhat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    c.check(
        format!("split-Rhat on stationary i.i.d. chains {worst:.4} < 1.01"),
        worst < 1.01,
    );

    // --- predictive calibration passes on well-specified data ---
    let mut passes = 0;
    for rep in 0..20u64 {
        let n = 500;
        let mut rng = ChaCha8Rng::seed_from_u64(800 + rep);
        let mut x = Array2::zeros((n, 2));
        let mut y = Array1::zeros(n);
        for i in 0..n {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            x[[i, 0]] = a;
            x[[i, 1]] = b;
            let eta: f64 = 0.3 + 0.8 * a - 0.5 * b;
            let p = 1.0 / (1.0 + (-eta).exp());
            y[i] = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        }
        let data = Dataset::new(x, y, vec!["x0".into(), "x1".into()]).unwrap();
        let model = ModelSpec::new(vec![0, 1]);
        let config = McmcConfig {
            chains: 2,
            iterations: 2000,
            warmup: 500,
            seed: 800 + rep,
            initial_points: None,
        };
        let (draws, _) = sample_posterior_mcmc(&model, &data, &config).unwrap();
        let loglik = PointwiseLogLik::compute(&model, &data, &draws).unwrap();
        let weights = psis_smoothed_weights(&loglik, None).unwrap();
        let result = loo_pit(&loglik, &weights, data.y(), 900 + rep).unwrap();
        if result.ks_band == KsBand::Pass {
            passes += 1;
        }
    }
    c.check(
        format!("predictive calibration passed in {passes}/20 replications (need >= 19)"),
        passes >= 19,
    );
    c.conclude();
}
