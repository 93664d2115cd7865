//! Probability-proportional-to-size subsampling of leave-one-out
//! contributions: draw a with-replacement subsample weighted by each
//! observation's predictive difficulty, then estimate the full-data elpd,
//! the subsampling noise, and the sampling variance of the elpd itself
//! from the subsample alone.

use std::collections::HashMap;

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{
    psis_loo_pointwise_for_rows, ApproxCorrection, ElpdReport, EstimatorKind, PointwiseLogLik,
    RefitContext, SubsampleStamp,
};

/// A with-replacement subsample plan: inclusion probabilities over all `n`
/// observations plus the `m` drawn indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsamplePlan {
    pi_tilde: Array1<f64>,
    indices: Vec<usize>,
    seed: u64,
}

impl SubsamplePlan {
    /// Population size.
    pub fn n(&self) -> usize {
        self.pi_tilde.len()
    }

    /// Subsample size (with replacement; duplicates count).
    pub fn m(&self) -> usize {
        self.indices.len()
    }

    /// Normalized drawing probabilities over the population.
    pub fn pi_tilde(&self) -> &Array1<f64> {
        &self.pi_tilde
    }

    /// Drawn observation indices, in draw order, duplicates preserved.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Probabilities of the drawn indices, aligned with `indices()`.
    pub fn drawn_probabilities(&self) -> Vec<f64> {
        self.indices.iter().map(|&i| self.pi_tilde[i]).collect()
    }

    /// Distinct drawn indices in ascending order (duplicates merged);
    /// useful for computing each distinct contribution once.
    pub fn unique_indices(&self) -> Vec<usize> {
        let mut u = self.indices.clone();
        u.sort_unstable();
        u.dedup();
        u
    }

    /// Identity stamp recorded on reports built from this plan, so that
    /// comparisons can verify both models used the identical subsample.
    pub fn stamp(&self) -> SubsampleStamp {
        SubsampleStamp {
            indices: self.indices.clone(),
            pi_tilde: self.drawn_probabilities(),
            population_n: self.n(),
        }
    }

    /// Rebuild a plan from stored parts (for example the run manifest),
    /// so a previous run's subsample can be replayed exactly. `pi_tilde`
    /// must be strictly positive and normalized; every index must address
    /// the population described by `pi_tilde`.
    pub fn from_parts(pi_tilde: Array1<f64>, indices: Vec<usize>, seed: u64) -> Result<Self> {
        let n = pi_tilde.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if indices.is_empty() {
            return Err(Error::InvalidInput("empty subsample index list".into()));
        }
        for (i, &p) in pi_tilde.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "drawing probability for observation {i} is {p}; must be positive"
                )));
            }
        }
        let total: f64 = pi_tilde.sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "drawing probabilities sum to {total}; must be normalized"
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidInput(format!(
                "subsample index {bad} out of range for population of {n}"
            )));
        }
        Ok(Self {
            pi_tilde,
            indices,
            seed,
        })
    }
}

/// Turn pointwise log predictive densities (all strictly negative) into
/// normalized drawing probabilities proportional to `-log p`: observations
/// the model finds hard to predict are sampled more often.
pub fn compute_pps_probabilities(pointwise_log_density: &Array1<f64>) -> Result<Array1<f64>> {
    if pointwise_log_density.is_empty() {
        return Err(Error::InvalidInput("empty pointwise vector".into()));
    }
    for (i, &ld) in pointwise_log_density.iter().enumerate() {
        if !ld.is_finite() {
            return Err(Error::NonFinite {
                index: i,
                context: "pointwise log predictive density".to_string(),
            });
        }
        if ld >= 0.0 {
            return Err(Error::InvalidInput(format!(
                "pointwise log density at observation {i} is {ld}; sizes -log p \
                 require strictly negative log densities"
            )));
        }
    }
    let total: f64 = pointwise_log_density.iter().map(|&ld| -ld).sum();
    Ok(pointwise_log_density.mapv(|ld| -ld / total))
}

/// Draw `m` indices with replacement according to `pi_tilde` (which must
/// be normalized). Fixed seeds give identical plans.
pub fn draw_subsample(pi_tilde: &Array1<f64>, m: usize, seed: u64) -> Result<SubsamplePlan> {
    let n = pi_tilde.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty probability vector".into()));
    }
    if m == 0 {
        return Err(Error::InvalidInput("subsample size must be positive".into()));
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut total = 0.0;
    for (i, &p) in pi_tilde.iter().enumerate() {
        if !p.is_finite() || p <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "probability at index {i} is {p}; must be positive"
            )));
        }
        total += p;
        cumulative.push(total);
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = Vec::with_capacity(m);
    for _ in 0..m {
        let u: f64 = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= u).min(n - 1);
        indices.push(idx);
    }
    Ok(SubsamplePlan {
        pi_tilde: pi_tilde.clone(),
        indices,
        seed,
    })
}

/// Elpd estimates from a weighted subsample of pointwise contributions.
#[derive(Debug, Clone)]
pub struct SubsampledElpd {
    /// Estimate of the average (per-observation) elpd over the population.
    pub elpd_avg_hat: f64,
    /// Estimate of the total elpd (`n * elpd_avg_hat`).
    pub elpd_sum_hat: f64,
    /// Variance of `elpd_avg_hat` due to subsampling alone
    /// (with-replacement estimator, `m(m-1)` denominator); absent at m = 1.
    pub subsampling_variance: Option<f64>,
    /// Estimate of the per-observation variance of the pointwise elpd
    /// contributions, debiased for subsampling noise and clamped at zero;
    /// absent at m = 1.
    pub sigma_loo_sq_hat: Option<f64>,
    /// True when the variance combination went negative and was clamped.
    pub sigma_clamped: bool,
    pub m: usize,
    pub n: usize,
}

/// Weighted per-draw terms `pointwise_j / pi_tilde_j`.
pub(crate) fn weighted_terms(pointwise: &[f64], pi_drawn: &[f64]) -> Vec<f64> {
    pointwise
        .iter()
        .zip(pi_drawn)
        .map(|(&l, &p)| l / p)
        .collect()
}

/// Average-scale elpd estimate: `(1/(n m)) * sum_j pointwise_j / pi_j`.
pub(crate) fn hh_average(terms: &[f64], n: usize) -> f64 {
    terms.iter().sum::<f64>() / (n as f64 * terms.len() as f64)
}

/// Subsampling variance of the average-scale estimate; `None` at m = 1.
pub(crate) fn hh_variance(terms: &[f64], n: usize, avg_hat: f64) -> Option<f64> {
    let m = terms.len();
    if m < 2 {
        return None;
    }
    let center = n as f64 * avg_hat;
    let ss: f64 = terms.iter().map(|&t| (t - center) * (t - center)).sum();
    Some(ss / ((n as f64).powi(2) * m as f64 * (m as f64 - 1.0)))
}

/// Debiased estimate of the population variance of pointwise contributions:
/// `(1/(n m)) sum_j pointwise_j^2 / pi_j - avg_hat^2 + subsampling variance`,
/// clamped at zero. Returns `(value, clamped)`; `None` at m = 1.
pub(crate) fn hh_sigma_loo_sq(
    pointwise: &[f64],
    pi_drawn: &[f64],
    n: usize,
    avg_hat: f64,
    subsampling_variance: Option<f64>,
) -> Option<(f64, bool)> {
    let v20 = subsampling_variance?;
    let m = pointwise.len();
    let term1 = pointwise
        .iter()
        .zip(pi_drawn)
        .map(|(&l, &p)| l * l / p)
        .sum::<f64>()
        / (n as f64 * m as f64);
    let raw = term1 - avg_hat * avg_hat + v20;
    if raw < 0.0 {
        Some((0.0, true))
    } else {
        Some((raw, false))
    }
}

/// Estimate the population elpd from pointwise contributions evaluated at
/// the drawn indices only (`pointwise_hat[j]` belongs to `plan.indices()[j]`,
/// duplicates keep duplicated contributions).
pub fn subsampled_elpd(plan: &SubsamplePlan, pointwise_hat: &Array1<f64>) -> Result<SubsampledElpd> {
    if pointwise_hat.len() != plan.m() {
        return Err(Error::DimensionMismatch(format!(
            "{} pointwise values for a subsample of {}",
            pointwise_hat.len(),
            plan.m()
        )));
    }
    for (j, &l) in pointwise_hat.iter().enumerate() {
        if !l.is_finite() {
            return Err(Error::NonFinite {
                index: j,
                context: "subsampled pointwise contribution".to_string(),
            });
        }
    }
    let pointwise: Vec<f64> = pointwise_hat.to_vec();
    let pi_drawn = plan.drawn_probabilities();
    let terms = weighted_terms(&pointwise, &pi_drawn);
    let n = plan.n();
    let elpd_avg_hat = hh_average(&terms, n);
    let subsampling_variance = hh_variance(&terms, n, elpd_avg_hat);
    let sigma = hh_sigma_loo_sq(&pointwise, &pi_drawn, n, elpd_avg_hat, subsampling_variance);
    Ok(SubsampledElpd {
        elpd_avg_hat,
        elpd_sum_hat: elpd_avg_hat * n as f64,
        subsampling_variance,
        sigma_loo_sq_hat: sigma.map(|(v, _)| v),
        sigma_clamped: sigma.map(|(_, c)| c).unwrap_or(false),
        m: plan.m(),
        n,
    })
}

/// Standalone subsampling-variance estimate (average scale); `None` at m = 1.
pub fn subsampling_variance(
    plan: &SubsamplePlan,
    pointwise_hat: &Array1<f64>,
) -> Result<Option<f64>> {
    Ok(subsampled_elpd(plan, pointwise_hat)?.subsampling_variance)
}

/// Standalone pointwise-variance estimate with its clamp flag; `None` at m = 1.
pub fn sigma_loo_sq_subsampled(
    plan: &SubsamplePlan,
    pointwise_hat: &Array1<f64>,
) -> Result<Option<(f64, bool)>> {
    let est = subsampled_elpd(plan, pointwise_hat)?;
    Ok(est.sigma_loo_sq_hat.map(|v| (v, est.sigma_clamped)))
}

/// Assemble a full report from a subsampled estimate. `se_loo` is on the
/// sum scale (`sqrt(n^2 * sigma_loo_sq / n)` = `sqrt(n * sigma_loo_sq)`),
/// as is `subsampling_se`.
pub fn subsampled_elpd_report(
    plan: &SubsamplePlan,
    pointwise_hat: &Array1<f64>,
    khat: Option<Array1<f64>>,
    n_refits: usize,
) -> Result<ElpdReport> {
    let est = subsampled_elpd(plan, pointwise_hat)?;
    if let Some(k) = &khat {
        if k.len() != plan.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} tail-shape values for a subsample of {}",
                k.len(),
                plan.m()
            )));
        }
    }
    let n = est.n as f64;
    Ok(ElpdReport {
        estimator: EstimatorKind::PsisLooSubsampled,
        elpd_sum: est.elpd_sum_hat,
        elpd_avg: est.elpd_avg_hat,
        se_loo: est.sigma_loo_sq_hat.map(|v| (n * v).sqrt()).unwrap_or(f64::NAN),
        subsampling_se: est.subsampling_variance.map(|v| (n * n * v).sqrt()),
        pointwise: pointwise_hat.clone(),
        khat,
        n_refits,
        subsample: Some(plan.stamp()),
    })
}

/// Smoothed importance-sampled LOO over a weighted subsample: each distinct
/// drawn observation is estimated once (duplicates in the with-replacement
/// draw reuse that estimate), and the weighted expansion over the plan
/// produces the population-scale report. Draws from a posterior
/// approximation require the matching density `correction`; a `fallback`
/// context enables exact refits for observations with unreliable weights.
pub fn elpd_psis_loo_subsampled(
    loglik: &PointwiseLogLik,
    plan: &SubsamplePlan,
    correction: Option<&ApproxCorrection>,
    fallback: Option<&RefitContext<'_>>,
) -> Result<ElpdReport> {
    if plan.n() != loglik.n() {
        return Err(Error::DimensionMismatch(format!(
            "subsample plan covers a population of {} but the log likelihood has {} rows",
            plan.n(),
            loglik.n()
        )));
    }
    let unique = plan.unique_indices();
    let (pw_unique, khat_unique, n_refits) =
        psis_loo_pointwise_for_rows(loglik, &unique, correction, fallback)?;
    let position: HashMap<usize, usize> =
        unique.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let pw: Array1<f64> = plan
        .indices()
        .iter()
        .map(|i| pw_unique[position[i]])
        .collect();
    let khat: Array1<f64> = plan
        .indices()
        .iter()
        .map(|i| khat_unique[position[i]])
        .collect();
    subsampled_elpd_report(plan, &pw, Some(khat), n_refits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{mean, population_variance, sample_variance};
    use ndarray::arr1;

    fn uniform_plan(n: usize) -> SubsamplePlan {
        SubsamplePlan {
            pi_tilde: Array1::from_elem(n, 1.0 / n as f64),
            indices: (0..n).collect(),
            seed: 0,
        }
    }

    #[test]
    fn subsampled_psis_loo_matches_manual_expansion() {
        use crate::inference::DrawMethod;
        use ndarray::Array2;
        use rand::prelude::*;
        // loglik matrix for 12 observations, 200 draws, mildly varied rows
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let matrix = Array2::from_shape_fn((12, 200), |(i, _)| {
            -0.3 - 0.05 * i as f64 - 0.2 * rng.random::<f64>()
        });
        let loglik = PointwiseLogLik::from_matrix(matrix, DrawMethod::Mcmc).unwrap();
        let pi = compute_pps_probabilities(
            &Array1::from_iter((0..12).map(|i| -0.5 - 0.1 * i as f64)),
        )
        .unwrap();
        let plan = draw_subsample(&pi, 9, 4).unwrap();
        // the seed must produce duplicate draws or the test loses its point
        assert!(plan.unique_indices().len() < plan.m());
        let report = elpd_psis_loo_subsampled(&loglik, &plan, None, None).unwrap();
        // oracle: evaluate every drawn row independently (duplicates twice)
        let (pw, khat, _) =
            psis_loo_pointwise_for_rows(&loglik, plan.indices(), None, None).unwrap();
        let expected = subsampled_elpd_report(&plan, &pw, Some(khat), 0).unwrap();
        assert_eq!(report.elpd_sum.to_bits(), expected.elpd_sum.to_bits());
        assert_eq!(report.subsampling_se, expected.subsampling_se);
        for (a, b) in report.pointwise.iter().zip(expected.pointwise.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(report.subsample, expected.subsample);

        // population mismatch is rejected
        let short = draw_subsample(&compute_pps_probabilities(&arr1(&[-1.0, -2.0])).unwrap(), 3, 1)
            .unwrap();
        assert!(elpd_psis_loo_subsampled(&loglik, &short, None, None).is_err());
    }

    #[test]
    fn from_parts_round_trips_and_validates() {
        let pi = compute_pps_probabilities(&arr1(&[-1.0, -2.0, -3.0])).unwrap();
        let plan = draw_subsample(&pi, 5, 42).unwrap();
        let rebuilt =
            SubsamplePlan::from_parts(plan.pi_tilde().clone(), plan.indices().to_vec(), plan.seed())
                .unwrap();
        assert_eq!(rebuilt, plan);
        // out-of-range index, unnormalized, non-positive entry, empty draw
        assert!(SubsamplePlan::from_parts(arr1(&[0.5, 0.5]), vec![2], 0).is_err());
        assert!(SubsamplePlan::from_parts(arr1(&[0.5, 0.4]), vec![0], 0).is_err());
        assert!(SubsamplePlan::from_parts(arr1(&[1.0, 0.0]), vec![0], 0).is_err());
        assert!(SubsamplePlan::from_parts(arr1(&[0.5, 0.5]), vec![], 0).is_err());
    }

    #[test]
    fn pps_probabilities_for_equal_densities_are_uniform() {
        let pi = compute_pps_probabilities(&arr1(&[-0.4, -0.4, -0.4, -0.4])).unwrap();
        for &p in pi.iter() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn pps_probabilities_known_values() {
        // -log p of (0.5, 0.25) gives sizes (log 2, log 4) = (1, 2) ratio
        let pi = compute_pps_probabilities(&arr1(&[0.5f64.ln(), 0.25f64.ln()])).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-15, "{}", pi[0]);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-15, "{}", pi[1]);
    }

    #[test]
    fn pps_probabilities_reject_non_negative_log_densities() {
        assert!(matches!(
            compute_pps_probabilities(&arr1(&[-0.5, 0.0])),
            Err(Error::InvalidInput(_))
        ));
        assert!(compute_pps_probabilities(&arr1(&[-0.5, 0.3])).is_err());
        assert!(matches!(
            compute_pps_probabilities(&arr1(&[-0.5, f64::NEG_INFINITY])),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(compute_pps_probabilities(&arr1(&[])).is_err());
    }

    #[test]
    fn pps_probabilities_normalize_and_commute_with_permutation() {
        let ld = arr1(&[-0.1, -2.0, -0.7, -1.3, -0.25]);
        let pi = compute_pps_probabilities(&ld).unwrap();
        assert!((pi.sum() - 1.0).abs() < 1e-12);
        let perm = [4usize, 2, 0, 1, 3];
        let ld_p = Array1::from_iter(perm.iter().map(|&i| ld[i]));
        let pi_p = compute_pps_probabilities(&ld_p).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert!((pi_p[j] - pi[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn draw_subsample_is_deterministic_and_respects_probabilities() {
        let pi = arr1(&[0.5, 0.2, 0.15, 0.1, 0.05]);
        let a = draw_subsample(&pi, 1_000_000, 99).unwrap();
        let b = draw_subsample(&pi, 1_000_000, 99).unwrap();
        assert_eq!(a.indices(), b.indices());
        let c = draw_subsample(&pi, 1_000_000, 100).unwrap();
        assert_ne!(a.indices(), c.indices());

        let mut freq = [0usize; 5];
        for &i in a.indices() {
            freq[i] += 1;
        }
        let m = a.m() as f64;
        for (i, &p) in pi.iter().enumerate() {
            let observed = freq[i] as f64 / m;
            let tol = 4.0 * (p * (1.0 - p) / m).sqrt();
            assert!(
                (observed - p).abs() < tol,
                "index {i}: observed {observed}, expected {p}"
            );
        }
    }

    #[test]
    fn draw_subsample_concentrated_probability_dominates() {
        let eps = 1e-9;
        let mut pi = Array1::from_elem(4, eps);
        pi[2] = 1.0 - 3.0 * eps;
        let plan = draw_subsample(&pi, 10_000, 7).unwrap();
        let hits = plan.indices().iter().filter(|&&i| i == 2).count();
        assert!(hits >= 9990, "{hits}");
    }

    #[test]
    fn draw_subsample_validates_input() {
        assert!(draw_subsample(&arr1(&[0.5, 0.5]), 0, 1).is_err());
        assert!(draw_subsample(&arr1(&[]), 3, 1).is_err());
        assert!(draw_subsample(&arr1(&[0.5, 0.0, 0.5]), 3, 1).is_err());
        assert!(draw_subsample(&arr1(&[0.6, 0.6]), 3, 1).is_err());
    }

    #[test]
    fn identity_plan_with_power_of_two_population_is_exact() {
        // n = 8 keeps every intermediate a power-of-two rescaling, so the
        // estimate must equal the plain sum bit for bit
        let n = 8;
        let plan = uniform_plan(n);
        let pointwise = arr1(&[-0.9, -1.4, -0.3, -2.2, -0.7, -1.1, -0.5, -1.9]);
        let est = subsampled_elpd(&plan, &pointwise).unwrap();
        let direct: f64 = pointwise.iter().sum();
        assert_eq!(est.elpd_sum_hat.to_bits(), direct.to_bits());
    }

    #[test]
    fn identity_plan_matches_plain_sum() {
        let n = 10;
        let plan = uniform_plan(n);
        let pointwise = Array1::from_iter((0..n).map(|i| -0.3 - 0.17 * i as f64));
        let est = subsampled_elpd(&plan, &pointwise).unwrap();
        let direct: f64 = pointwise.iter().sum();
        assert!((est.elpd_sum_hat - direct).abs() < 1e-12 * direct.abs());
        assert!((est.elpd_avg_hat * n as f64 - est.elpd_sum_hat).abs() < 1e-15);
    }

    #[test]
    fn estimator_is_unbiased_over_replications() {
        // fixed population of pointwise values; the drawing probabilities
        // come from a related but different sizing vector, as in practice,
        // so individual weighted terms genuinely vary
        let n = 500;
        let pointwise: Vec<f64> = (0..n)
            .map(|i| -0.2 - 3.0 * ((i * 37 % 101) as f64 / 101.0))
            .collect();
        let sizing = Array1::from_iter(
            (0..n).map(|i| -0.4 - 2.0 * ((i * 59 % 113) as f64 / 113.0)),
        );
        let pi = compute_pps_probabilities(&sizing).unwrap();
        let truth: f64 = pointwise.iter().sum();

        let reps = 500;
        let m = 50;
        let mut estimates = Vec::with_capacity(reps);
        for r in 0..reps {
            let plan = draw_subsample(&pi, m, 1000 + r as u64).unwrap();
            let values = Array1::from_iter(plan.indices().iter().map(|&i| pointwise[i]));
            estimates.push(subsampled_elpd(&plan, &values).unwrap().elpd_sum_hat);
        }
        let est_mean = mean(&estimates);
        let se_of_mean = (sample_variance(&estimates) / reps as f64).sqrt();
        assert!(
            (est_mean - truth).abs() < 4.0 * se_of_mean,
            "mean {est_mean} vs truth {truth} (se {se_of_mean})"
        );
    }

    #[test]
    fn subsampling_variance_is_zero_for_proportional_values() {
        // pointwise exactly proportional to probabilities: every weighted
        // term is identical, so the estimator sees zero subsampling noise
        let pi = arr1(&[0.1, 0.2, 0.3, 0.4]);
        let c = -2.0;
        let plan = draw_subsample(&pi, 200, 5).unwrap();
        let values = Array1::from_iter(plan.indices().iter().map(|&i| c * pi[i]));
        let est = subsampled_elpd(&plan, &values).unwrap();
        assert!(est.subsampling_variance.unwrap().abs() < 1e-28);
    }

    #[test]
    fn subsampling_variance_halves_when_subsample_doubles() {
        let n = 400;
        let pointwise: Vec<f64> = (0..n)
            .map(|i| -0.1 - 2.5 * ((i * 53 % 97) as f64 / 97.0).powi(2))
            .collect();
        let sizing = Array1::from_iter(
            (0..n).map(|i| -0.3 - 1.1 * ((i * 41 % 83) as f64 / 83.0)),
        );
        let pi = compute_pps_probabilities(&sizing).unwrap();
        let mut ratios = Vec::new();
        for r in 0..50 {
            let small = draw_subsample(&pi, 40, 2000 + r).unwrap();
            let big = draw_subsample(&pi, 80, 3000 + r).unwrap();
            let sv = |plan: &SubsamplePlan| {
                let values = Array1::from_iter(plan.indices().iter().map(|&i| pointwise[i]));
                subsampled_elpd(plan, &values)
                    .unwrap()
                    .subsampling_variance
                    .unwrap()
            };
            ratios.push(sv(&big) / sv(&small));
        }
        ratios.sort_by(f64::total_cmp);
        let median = ratios[ratios.len() / 2];
        assert!(
            (0.35..=0.7).contains(&median),
            "median variance ratio {median}"
        );
    }

    #[test]
    fn replication_spread_shrinks_with_subsample_size() {
        let n = 400;
        let pointwise: Vec<f64> = (0..n)
            .map(|i| -0.3 - 1.7 * ((i * 29 % 89) as f64 / 89.0))
            .collect();
        let sizing = Array1::from_iter(
            (0..n).map(|i| -0.6 - 0.9 * ((i * 71 % 79) as f64 / 79.0)),
        );
        let pi = compute_pps_probabilities(&sizing).unwrap();
        let spread = |m: usize, base: u64| {
            let estimates: Vec<f64> = (0..300)
                .map(|r| {
                    let plan = draw_subsample(&pi, m, base + r).unwrap();
                    let values =
                        Array1::from_iter(plan.indices().iter().map(|&i| pointwise[i]));
                    subsampled_elpd(&plan, &values).unwrap().elpd_sum_hat
                })
                .collect();
            sample_variance(&estimates).sqrt()
        };
        let sd_small = spread(n / 20, 4000);
        let sd_large = spread(n / 2, 5000);
        assert!(
            sd_large < sd_small,
            "sd at m=n/2 ({sd_large}) should be below sd at m=n/20 ({sd_small})"
        );
    }

    #[test]
    fn sigma_loo_identity_plan_reduces_to_population_variance() {
        // at m = n with uniform probabilities and the identity plan the
        // combination equals the population variance up to a 1/(n-1) factor
        let n = 10;
        let plan = uniform_plan(n);
        let pointwise = Array1::from_iter((0..n).map(|i| -0.4 - 0.31 * i as f64));
        let (sigma, clamped) = sigma_loo_sq_subsampled(&plan, &pointwise)
            .unwrap()
            .unwrap();
        assert!(!clamped);
        let pop = population_variance(pointwise.as_slice().unwrap());
        assert!(
            (sigma - pop).abs() / pop < 2.0 / n as f64,
            "sigma {sigma} vs population variance {pop}"
        );
    }

    #[test]
    fn sigma_loo_constant_pointwise_is_near_zero() {
        let n = 16;
        let plan = uniform_plan(n);
        let pointwise = Array1::from_elem(n, -1.3);
        let (sigma, _) = sigma_loo_sq_subsampled(&plan, &pointwise)
            .unwrap()
            .unwrap();
        assert!(sigma.abs() < 1e-12, "{sigma}");
    }

    #[test]
    fn single_draw_subsample_has_no_variance_estimates() {
        let pi = arr1(&[0.25, 0.25, 0.25, 0.25]);
        let plan = draw_subsample(&pi, 1, 3).unwrap();
        let est = subsampled_elpd(&plan, &arr1(&[-1.0])).unwrap();
        assert!(est.subsampling_variance.is_none());
        assert!(est.sigma_loo_sq_hat.is_none());
        assert!(!est.sigma_clamped);
        assert!(est.elpd_sum_hat.is_finite());
    }

    #[test]
    fn subsampled_elpd_validates_lengths() {
        let plan = uniform_plan(4);
        assert!(subsampled_elpd(&plan, &arr1(&[-1.0, -2.0])).is_err());
        assert!(subsampled_elpd(&plan, &arr1(&[-1.0, -2.0, f64::NAN, -0.5])).is_err());
    }

    #[test]
    fn report_assembly_carries_the_plan_stamp() {
        let pi = arr1(&[0.4, 0.3, 0.2, 0.1]);
        let plan = draw_subsample(&pi, 3, 11).unwrap();
        let values = arr1(&[-0.5, -1.5, -0.9]);
        let report = subsampled_elpd_report(&plan, &values, None, 0).unwrap();
        assert_eq!(report.estimator, EstimatorKind::PsisLooSubsampled);
        let stamp = report.subsample.as_ref().unwrap();
        assert_eq!(stamp.indices, plan.indices());
        assert_eq!(stamp.population_n, 4);
        assert!(report.subsampling_se.unwrap().is_finite());
        assert!((report.elpd_avg * 4.0 - report.elpd_sum).abs() < 1e-15);
    }
}
