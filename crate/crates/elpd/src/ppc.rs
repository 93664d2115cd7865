//! Marginal calibration checks for binary-outcome models: leave-one-out
//! probability integral transform (PIT) values computed from smoothed
//! importance weights, a Kolmogorov–Smirnov uniformity test, and uniform
//! reference envelopes for density plots.

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::PointwiseLogLik;
use crate::math::derive_seed;
use crate::psis::SmoothedWeights;

/// Verdict of the uniformity test at the 1% level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsBand {
    Pass,
    Fail,
}

/// Leave-one-out PIT values with their uniformity diagnostic.
#[derive(Debug, Clone)]
pub struct LooPitResult {
    /// One PIT value per observation, each in [0, 1].
    pub pit: Array1<f64>,
    /// True when discrete-outcome randomization was applied (always, for
    /// binary outcomes).
    pub randomized: bool,
    /// Kolmogorov–Smirnov distance between the PIT sample and Uniform(0,1).
    pub ks_statistic: f64,
    /// Asymptotic p-value of that distance.
    pub ks_pvalue: f64,
    /// Pass/fail verdict at the 1% level.
    pub ks_band: KsBand,
}

/// Weighted mean of `values` under self-normalized weights given in log
/// scale, accumulated in a canonical order so the result is identical for
/// any permutation of the draws.
fn canonical_weighted_mean(log_weights: &Array1<f64>, values: &[f64]) -> Result<f64> {
    let max_lw = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_lw.is_finite() {
        return Err(Error::Degenerate(
            "importance weights are all zero or non-finite".into(),
        ));
    }
    let mut pairs: Vec<(f64, f64)> = log_weights
        .iter()
        .zip(values)
        .map(|(&lw, &v)| ((lw - max_lw).exp(), v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut numer = 0.0;
    let mut denom = 0.0;
    for &(w, v) in &pairs {
        numer += w * v;
        denom += w;
    }
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Degenerate(
            "importance weights sum to zero".into(),
        ));
    }
    Ok(numer / denom)
}

/// Randomized leave-one-out PIT values for binary outcomes.
///
/// For each observation the leave-one-out predictive probability of its
/// class is estimated by the smoothed-importance-weighted average over
/// draws, and the discrete PIT is randomized into the continuous unit
/// interval: `u_i = P(Y < y_i) + v_i * P(Y = y_i)` with `v_i` uniform.
/// Deterministic given the seed, and exactly invariant under permutations
/// of the draws.
pub fn loo_pit(
    loglik: &PointwiseLogLik,
    weights: &[SmoothedWeights],
    y: &Array1<f64>,
    seed: u64,
) -> Result<LooPitResult> {
    let n = loglik.n();
    let s = loglik.num_draws();
    if weights.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} weight vectors for {} observations",
            weights.len(),
            n
        )));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} outcomes for {} observations",
            y.len(),
            n
        )));
    }
    for (i, &yi) in y.iter().enumerate() {
        if yi != 0.0 && yi != 1.0 {
            return Err(Error::InvalidInput(format!(
                "outcome at observation {i} is {yi}; must be 0 or 1"
            )));
        }
    }
    for (i, w) in weights.iter().enumerate() {
        if w.log_weights().len() != s {
            return Err(Error::DimensionMismatch(format!(
                "weight vector {i} has {} entries for {s} draws",
                w.log_weights().len()
            )));
        }
    }

    let pit_values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            // probability of class zero under each draw, recovered from the
            // pointwise log likelihood of the observed class
            let row = loglik.matrix().row(i);
            let p_zero: Vec<f64> = row
                .iter()
                .map(|&ll| if y[i] == 0.0 { ll.exp() } else { 1.0 - ll.exp() })
                .collect();
            let prob_zero = canonical_weighted_mean(weights[i].log_weights(), &p_zero)
                .map_err(|e| Error::InvalidInput(format!("observation {i}: {e}")))?
                .clamp(0.0, 1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let v: f64 = rng.random();
            let u = if y[i] == 0.0 {
                // P(Y < 0) = 0, P(Y = 0) = prob_zero
                v * prob_zero
            } else {
                // P(Y < 1) = prob_zero, P(Y = 1) = 1 - prob_zero
                prob_zero + v * (1.0 - prob_zero)
            };
            Ok(u.clamp(0.0, 1.0))
        })
        .collect::<Result<Vec<f64>>>()?;

    let pit = Array1::from(pit_values);
    let ks_statistic = ks_uniform_statistic(&pit)?;
    let ks_pvalue = ks_uniform_pvalue(ks_statistic, n);
    Ok(LooPitResult {
        pit,
        randomized: true,
        ks_statistic,
        ks_pvalue,
        ks_band: if ks_pvalue > 0.01 {
            KsBand::Pass
        } else {
            KsBand::Fail
        },
    })
}

/// Kolmogorov–Smirnov distance between a sample and Uniform(0,1).
pub fn ks_uniform_statistic(values: &Array1<f64>) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidInput(format!(
                "value at index {i} is {v}; must lie in [0, 1]"
            )));
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &u) in sorted.iter().enumerate() {
        let above = (i as f64 + 1.0) / nf - u;
        let below = u - i as f64 / nf;
        d = d.max(above).max(below);
    }
    Ok(d)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 * sum_j (-1)^(j-1) exp(-2 j^2 x^2)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64 * x).powi(2)).exp();
        total += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Asymptotic p-value for the one-sample Kolmogorov–Smirnov distance `d`
/// at sample size `n`, with the usual finite-sample scale adjustment.
pub fn ks_uniform_pvalue(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    kolmogorov_survival(lambda)
}

/// Gaussian kernel density estimate on the unit interval with boundary
/// reflection at 0 and 1 and Silverman's rule-of-thumb bandwidth.
pub fn kde_density_unit_interval(values: &[f64], grid: &Array1<f64>) -> Result<Array1<f64>> {
    let n = values.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidInput(format!(
                "value at index {i} is {v}; must lie in [0, 1]"
            )));
        }
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty evaluation grid".into()));
    }
    for (i, &g) in grid.iter().enumerate() {
        if !g.is_finite() || !(0.0..=1.0).contains(&g) {
            return Err(Error::InvalidInput(format!(
                "grid point {i} is {g}; must lie in [0, 1]"
            )));
        }
    }
    let h = silverman_bandwidth(values)?;
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid.mapv(|x| {
        let mut total = 0.0;
        for &u in values {
            // reflect mass that leaks past each boundary back inside
            for center in [u, -u, 2.0 - u] {
                let z = (x - center) / h;
                total += (-0.5 * z * z).exp();
            }
        }
        norm * total
    });
    Ok(density)
}

fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len() as f64;
    let sd = crate::math::sample_variance(values).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = interpolated_quantile(&sorted, 0.75) - interpolated_quantile(&sorted, 0.25);
    // rule-of-thumb scale with the usual fallback chain for degenerate
    // spread measures
    let mut scale = sd.min(iqr / 1.34);
    if scale <= 0.0 {
        scale = sd;
    }
    if scale <= 0.0 {
        scale = sorted[0].abs();
    }
    if scale <= 0.0 {
        scale = 1.0;
    }
    Ok(0.9 * scale * n.powf(-0.2))
}

fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Pointwise envelope of uniform-sample densities used as the reference
/// band in PIT density plots.
#[derive(Debug, Clone)]
pub struct ReferenceBands {
    pub lower: Array1<f64>,
    pub upper: Array1<f64>,
}

/// Envelope of kernel density estimates over `n_replicates` independent
/// Uniform(0,1) samples of size `n`, evaluated on `grid`. A PIT density
/// escaping this band signals miscalibration.
pub fn uniform_reference_bands(
    n: usize,
    n_replicates: usize,
    grid: &Array1<f64>,
    seed: u64,
) -> Result<ReferenceBands> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    if n_replicates < 50 {
        return Err(Error::InvalidInput(format!(
            "{n_replicates} replicates cannot outline a stable envelope; need at least 50"
        )));
    }
    let densities: Vec<Array1<f64>> = (0..n_replicates)
        .into_par_iter()
        .map(|r| -> Result<Array1<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
            let sample: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            kde_density_unit_interval(&sample, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lower = Array1::from_elem(grid.len(), f64::INFINITY);
    let mut upper = Array1::from_elem(grid.len(), f64::NEG_INFINITY);
    for density in &densities {
        for (j, &v) in density.iter().enumerate() {
            lower[j] = lower[j].min(v);
            upper[j] = upper[j].max(v);
        }
    }
    Ok(ReferenceBands { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{sample_posterior_mcmc, DrawMethod, McmcConfig};
    use crate::model::{Dataset, ModelSpec};
    use crate::psis::{plain_importance_log_ratios, smooth_weights};
    use ndarray::{arr1, Array2};
    use proptest::prelude::*;

    fn uniform_weights(s: usize) -> SmoothedWeights {
        // equal raw ratios pass through the smoother unchanged
        smooth_weights(&Array1::from_elem(s, 0.3)).unwrap()
    }

    fn smoothed_rows(loglik: &PointwiseLogLik) -> Vec<SmoothedWeights> {
        (0..loglik.n())
            .map(|i| {
                let row = loglik.matrix().row(i).to_owned();
                smooth_weights(&plain_importance_log_ratios(&row).unwrap()).unwrap()
            })
            .collect()
    }

    #[test]
    fn ks_statistic_matches_hand_computation() {
        let pit = arr1(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95]);
        // empirical CDF steps at i/10 meet the diagonal everywhere except
        // the last point: largest deviation is 0.1 from below
        let d = ks_uniform_statistic(&pit).unwrap();
        assert!((d - 0.1).abs() < 1e-15, "{d}");
    }

    #[test]
    fn kolmogorov_survival_matches_published_critical_values() {
        // classic table: median 0.8276, 5% point 1.3581, 1% point 1.6276
        assert!((kolmogorov_survival(0.82757) - 0.5).abs() < 2e-3);
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 2e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(10.0) < 1e-15);
    }

    #[test]
    fn pit_respects_class_zero_support_boundary() {
        // constant predictive probabilities make the expected PIT exact:
        // for y = 0 the value is v * P(Y=0); for y = 1 it starts at P(Y=0)
        let s = 30;
        let p1 = 0.4; // P(Y = 1) under every draw
        let mut m = Array2::zeros((2, s));
        for j in 0..s {
            m[[0, j]] = (1.0f64 - p1).ln(); // observation 0 has y = 0
            m[[1, j]] = p1.ln(); // observation 1 has y = 1
        }
        let loglik = PointwiseLogLik::from_matrix(m, DrawMethod::Mcmc).unwrap();
        let weights = vec![uniform_weights(s), uniform_weights(s)];
        let y = arr1(&[0.0, 1.0]);
        let seed = 5;
        let result = loo_pit(&loglik, &weights, &y, seed).unwrap();
        assert!(result.randomized);

        let v0: f64 = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0)).random();
        let v1: f64 = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)).random();
        assert!((result.pit[0] - v0 * 0.6).abs() < 1e-12);
        assert!(result.pit[0] <= 0.6 + 1e-12);
        assert!((result.pit[1] - (0.6 + v1 * 0.4)).abs() < 1e-12);
        assert!(result.pit[1] >= 0.6 - 1e-12);
    }

    #[test]
    fn pit_is_deterministic_in_the_seed() {
        let s = 40;
        let m = Array2::from_shape_fn((5, s), |(i, j)| {
            -0.2 - 0.1 * i as f64 - 0.004 * j as f64
        });
        let loglik = PointwiseLogLik::from_matrix(m, DrawMethod::Mcmc).unwrap();
        let weights = smoothed_rows(&loglik);
        let y = arr1(&[1.0, 0.0, 1.0, 1.0, 0.0]);
        let a = loo_pit(&loglik, &weights, &y, 9).unwrap();
        let b = loo_pit(&loglik, &weights, &y, 9).unwrap();
        for (x, z) in a.pit.iter().zip(b.pit.iter()) {
            assert_eq!(x.to_bits(), z.to_bits());
        }
        let c = loo_pit(&loglik, &weights, &y, 10).unwrap();
        assert!(a.pit.iter().zip(c.pit.iter()).any(|(x, z)| x != z));
    }

    #[test]
    fn pit_is_exactly_invariant_under_draw_permutation() {
        let data = {
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            let n = 40;
            let mut x = Array2::zeros((n, 1));
            let mut y = Array1::zeros(n);
            for i in 0..n {
                x[[i, 0]] = rng.random_range(-2.0..2.0);
                let eta: f64 = 0.4 + 0.9 * x[[i, 0]];
                let p = 1.0 / (1.0 + (-eta).exp());
                y[i] = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
            }
            Dataset::new(x, y, vec!["x0".into()]).unwrap()
        };
        let model = ModelSpec::new(vec![0]);
        let config = McmcConfig {
            chains: 2,
            iterations: 700,
            warmup: 200,
            seed: 31,
            initial_points: None,
        };
        let (draws, _) = sample_posterior_mcmc(&model, &data, &config).unwrap();
        let loglik = PointwiseLogLik::compute(&model, &data, &draws).unwrap();
        let weights = smoothed_rows(&loglik);
        let y = data.y().clone();
        let base = loo_pit(&loglik, &weights, &y, 77).unwrap();

        // permute the draw axis and recompute everything downstream
        let s = loglik.num_draws();
        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..s).collect();
            p.shuffle(&mut ChaCha8Rng::seed_from_u64(123));
            p
        };
        let permuted_matrix = Array2::from_shape_fn((loglik.n(), s), |(i, j)| {
            loglik.matrix()[[i, perm[j]]]
        });
        let permuted = PointwiseLogLik::from_matrix(permuted_matrix, DrawMethod::Mcmc).unwrap();
        let permuted_weights = smoothed_rows(&permuted);
        let shuffled = loo_pit(&permuted, &permuted_weights, &y, 77).unwrap();
        for (a, b) in base.pit.iter().zip(shuffled.pit.iter()) {
            assert_eq!(a.to_bits(), b.to_bits(), "PIT changed under permutation");
        }
        assert_eq!(base.ks_statistic.to_bits(), shuffled.ks_statistic.to_bits());
    }

    #[test]
    fn pit_is_calibrated_for_well_specified_models() {
        // data generated from the fitted family: the uniformity test should
        // pass at the 1% level in at least 19 of 20 replications
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
            let weights = smoothed_rows(&loglik);
            let result = loo_pit(&loglik, &weights, data.y(), 900 + rep).unwrap();
            if result.ks_band == KsBand::Pass {
                passes += 1;
            }
        }
        assert!(passes >= 19, "only {passes}/20 replications passed");
    }

    #[test]
    fn pit_flags_a_grossly_misspecified_model() {
        // constant fifty-fifty model on imbalanced well-separated data:
        // the PIT piles up away from the ends and uniformity must fail
        let n = 500;
        let ones = 350;
        let s = 100;
        let m = Array2::from_elem((n, s), 0.5f64.ln());
        let loglik = PointwiseLogLik::from_matrix(m, DrawMethod::Mcmc).unwrap();
        let weights: Vec<SmoothedWeights> = (0..n).map(|_| uniform_weights(s)).collect();
        let y = Array1::from_shape_fn(n, |i| if i < ones { 1.0 } else { 0.0 });
        let result = loo_pit(&loglik, &weights, &y, 3).unwrap();
        assert_eq!(result.ks_band, KsBand::Fail);
        assert!(result.ks_pvalue < 1e-6, "p = {}", result.ks_pvalue);
    }

    #[test]
    fn pit_validates_shapes_and_outcomes() {
        let s = 30;
        let m = Array2::from_elem((2, s), -0.5);
        let loglik = PointwiseLogLik::from_matrix(m, DrawMethod::Mcmc).unwrap();
        let weights = vec![uniform_weights(s), uniform_weights(s)];
        assert!(loo_pit(&loglik, &weights[..1], &arr1(&[0.0, 1.0]), 0).is_err());
        assert!(loo_pit(&loglik, &weights, &arr1(&[0.0]), 0).is_err());
        assert!(loo_pit(&loglik, &weights, &arr1(&[0.0, 0.5]), 0).is_err());
        let short = vec![uniform_weights(s - 1), uniform_weights(s - 1)];
        assert!(loo_pit(&loglik, &short, &arr1(&[0.0, 1.0]), 0).is_err());
    }

    #[test]
    fn kde_integrates_to_one_with_boundary_reflection() {
        let values: Vec<f64> = (0..200).map(|i| ((i * 73 % 199) as f64) / 199.0).collect();
        let grid = Array1::from_iter((0..=400).map(|i| i as f64 / 400.0));
        let density = kde_density_unit_interval(&values, &grid).unwrap();
        assert!(density.iter().all(|&d| d >= 0.0));
        let h = 1.0 / 400.0;
        let integral: f64 = density
            .iter()
            .enumerate()
            .map(|(i, &d)| if i == 0 || i == 400 { 0.5 * d } else { d })
            .sum::<f64>()
            * h;
        assert!((integral - 1.0).abs() < 0.02, "integral {integral}");
    }

    #[test]
    fn reference_bands_contain_the_uniform_density() {
        let grid = Array1::from_iter((0..=50).map(|i| i as f64 / 50.0));
        let bands = uniform_reference_bands(200, 100, &grid, 4).unwrap();
        for (j, &g) in grid.iter().enumerate() {
            if (0.1..=0.9).contains(&g) {
                assert!(
                    bands.lower[j] <= 1.0 && 1.0 <= bands.upper[j],
                    "band [{}, {}] at {g} misses 1.0",
                    bands.lower[j],
                    bands.upper[j]
                );
            }
        }
    }

    #[test]
    fn reference_bands_tighten_with_sample_size() {
        let grid = Array1::from_iter((0..=50).map(|i| i as f64 / 50.0));
        let small = uniform_reference_bands(100, 60, &grid, 6).unwrap();
        let large = uniform_reference_bands(10_000, 60, &grid, 7).unwrap();
        let mut ratios: Vec<f64> = grid
            .iter()
            .enumerate()
            .filter(|(_, &g)| (0.1..=0.9).contains(&g))
            .map(|(j, _)| (small.upper[j] - small.lower[j]) / (large.upper[j] - large.lower[j]))
            .collect();
        ratios.sort_by(f64::total_cmp);
        let median = ratios[ratios.len() / 2];
        assert!(median > 2.0, "median width ratio {median}");
    }

    #[test]
    fn reference_bands_are_reproducible_and_validated() {
        let grid = Array1::from_iter((0..=20).map(|i| i as f64 / 20.0));
        let a = uniform_reference_bands(50, 60, &grid, 11).unwrap();
        let b = uniform_reference_bands(50, 60, &grid, 11).unwrap();
        for (x, y) in a.lower.iter().zip(b.lower.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.upper.iter().zip(b.upper.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!(uniform_reference_bands(50, 49, &grid, 11).is_err());
        assert!(uniform_reference_bands(0, 60, &grid, 11).is_err());
    }

    proptest! {
        // PIT values stay inside the unit interval for arbitrary smoothed
        // weights and likelihood rows
        #[test]
        fn pit_values_always_lie_in_the_unit_interval(
            lls in proptest::collection::vec(-5.0f64..-0.01, 30),
            ratios in proptest::collection::vec(-3.0f64..3.0, 30),
            y_bit in proptest::bool::ANY,
            seed in 0u64..1000,
        ) {
            let m = Array2::from_shape_vec((1, 30), lls).unwrap();
            let loglik = PointwiseLogLik::from_matrix(m, DrawMethod::Mcmc).unwrap();
            let smoothed = smooth_weights(&Array1::from(ratios)).unwrap();
            let y = arr1(&[if y_bit { 1.0 } else { 0.0 }]);
            let result = loo_pit(&loglik, &[smoothed], &y, seed).unwrap();
            prop_assert!((0.0..=1.0).contains(&result.pit[0]));
        }
    }
}
