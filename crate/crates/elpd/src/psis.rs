//! Pareto-smoothed importance sampling: construct leave-one-out importance
//! ratios, fit a generalized Pareto distribution to the ratio tail, and
//! replace the tail by its fitted quantiles (truncated at the raw maximum).

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::math::log_sum_exp;

/// Tail-shape threshold above which a smoothed estimate is considered
/// unreliable and callers should fall back to an exact refit.
pub const KHAT_THRESHOLD: f64 = 0.7;

/// Sentinel reported when no tail fit was possible (too few draws or a
/// degenerate tail); compares above every real threshold.
pub const KHAT_SENTINEL: f64 = f64::INFINITY;

/// Generalized Pareto fit to tail exceedances.
#[derive(Debug, Clone, Copy)]
pub struct GpdFit {
    /// Shape: positive values mean a heavy tail. Above `KHAT_THRESHOLD`
    /// importance-sampling estimates are unreliable.
    pub khat: f64,
    /// Scale (> 0).
    pub sigma: f64,
}

/// Fit a generalized Pareto distribution to positive exceedances with a
/// profile-likelihood quadrature: the scale is profiled out analytically
/// and the remaining one-dimensional likelihood in `theta = -shape/scale`
/// is averaged over a deterministic grid weighted by its own likelihood.
pub fn fit_generalized_pareto(exceedances: &[f64]) -> Result<GpdFit> {
    let m = exceedances.len();
    if m < 5 {
        return Err(Error::InvalidInput(format!(
            "generalized Pareto fit needs at least 5 exceedances, got {m}"
        )));
    }
    for (i, &x) in exceedances.iter().enumerate() {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "exceedance {i} is {x}; all must be positive and finite"
            )));
        }
    }
    let mut x: Vec<f64> = exceedances.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    let x_max = x[m - 1];
    if (x_max - x[0]).abs() <= 1e-12 * x_max {
        return Err(Error::Degenerate(
            "all exceedances are equal; tail has zero variance".into(),
        ));
    }

    // grid over theta, denser near the constraint theta < 1/x_max
    let grid_len = 30 + (m as f64).sqrt().floor() as usize;
    let quart = x[((m as f64 / 4.0 + 0.5).floor() as usize).saturating_sub(1)];
    let mut weights = Vec::with_capacity(grid_len);
    let mut thetas = Vec::with_capacity(grid_len);
    let mut log_liks = Vec::with_capacity(grid_len);
    for j in 1..=grid_len {
        let theta = 1.0 / x_max
            + (1.0 - (grid_len as f64 / (j as f64 - 0.5)).sqrt()) / (3.0 * quart);
        if theta == 0.0 {
            continue;
        }
        // profile shape for this theta and the resulting log-likelihood
        let k = x.iter().map(|&v| (-theta * v).ln_1p()).sum::<f64>() / m as f64;
        if k == 0.0 {
            continue;
        }
        let ll = m as f64 * ((-theta / k).ln() - k - 1.0);
        thetas.push(theta);
        log_liks.push(ll);
    }
    if thetas.is_empty() {
        return Err(Error::Degenerate("no usable profile-likelihood grid".into()));
    }
    let norm = log_sum_exp(&log_liks);
    for &ll in &log_liks {
        weights.push((ll - norm).exp());
    }
    let theta_hat: f64 = thetas.iter().zip(&weights).map(|(t, w)| t * w).sum();
    if theta_hat.abs() < 1e-300 {
        // exponential limit
        let sigma = x.iter().sum::<f64>() / m as f64;
        return Ok(GpdFit { khat: 0.0, sigma });
    }
    let khat = x.iter().map(|&v| (-theta_hat * v).ln_1p()).sum::<f64>() / m as f64;
    let sigma = -khat / theta_hat;
    if !khat.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::Degenerate(format!(
            "profile fit produced shape {khat}, scale {sigma}"
        )));
    }
    Ok(GpdFit { khat, sigma })
}

/// Generalized Pareto quantile function.
fn gpd_quantile(p: f64, khat: f64, sigma: f64) -> f64 {
    if khat.abs() < 1e-8 {
        -sigma * (1.0 - p).ln()
    } else {
        sigma / khat * ((1.0 - p).powf(-khat) - 1.0)
    }
}

/// Why (or whether) a weight vector was smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothStatus {
    /// Tail was fitted and replaced by generalized Pareto quantiles.
    Smoothed,
    /// Fewer than 25 draws: raw ratios passed through untouched.
    TooFewDraws,
    /// Tail fit failed (ties or degenerate spread): raw ratios passed
    /// through untouched.
    DegenerateTail,
}

/// Importance weights after Pareto smoothing, in log domain.
#[derive(Debug, Clone)]
pub struct SmoothedWeights {
    log_weights: Array1<f64>,
    khat: f64,
    tail_size: usize,
    raw_max: f64,
    status: SmoothStatus,
}

impl SmoothedWeights {
    /// Smoothed log-weights, index-aligned with the input ratios.
    pub fn log_weights(&self) -> &Array1<f64> {
        &self.log_weights
    }

    /// Tail shape estimate; `KHAT_SENTINEL` when no fit was possible.
    pub fn khat(&self) -> f64 {
        self.khat
    }

    /// Number of tail draws replaced by fitted quantiles.
    pub fn tail_size(&self) -> usize {
        self.tail_size
    }

    /// Largest raw log-ratio; smoothed weights never exceed it.
    pub fn raw_max(&self) -> f64 {
        self.raw_max
    }

    pub fn status(&self) -> SmoothStatus {
        self.status
    }

    /// True when the tail shape exceeds the reliability threshold or no
    /// fit was possible.
    pub fn unreliable(&self) -> bool {
        !(self.khat <= KHAT_THRESHOLD)
    }

    /// Weights normalized to sum to one (linear domain).
    pub fn normalized(&self) -> Array1<f64> {
        let lse = log_sum_exp(self.log_weights.as_slice().unwrap());
        self.log_weights.mapv(|lw| (lw - lse).exp())
    }
}

/// Number of draws treated as the weight tail: `ceil(min(S/5, 3 sqrt(S)))`.
pub fn tail_length(s: usize) -> usize {
    let s = s as f64;
    (0.2 * s).min(3.0 * s.sqrt()).ceil() as usize
}

/// Pareto-smooth a vector of raw log importance ratios.
///
/// The largest `tail_length(S)` ratios (on the raw scale, above the
/// `S - M`-th order statistic) are replaced by generalized Pareto quantiles
/// at plotting positions `(j - 1/2)/M`, truncated at the raw maximum.
/// All other entries are returned bit-for-bit unchanged. With fewer than
/// 25 draws, or when the tail fit fails, the raw ratios pass through with
/// `khat = KHAT_SENTINEL` and a status flag.
pub fn smooth_weights(raw_log_ratios: &Array1<f64>) -> Result<SmoothedWeights> {
    let s = raw_log_ratios.len();
    if s == 0 {
        return Err(Error::InvalidInput("empty ratio vector".into()));
    }
    for (i, &r) in raw_log_ratios.iter().enumerate() {
        if !r.is_finite() {
            return Err(Error::NonFinite {
                index: i,
                context: "raw log importance ratio".to_string(),
            });
        }
    }
    let raw_max = raw_log_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pass_through = |status: SmoothStatus| SmoothedWeights {
        log_weights: raw_log_ratios.clone(),
        khat: KHAT_SENTINEL,
        tail_size: 0,
        raw_max,
        status,
    };
    if s < 25 {
        return Ok(pass_through(SmoothStatus::TooFewDraws));
    }

    let m = tail_length(s);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| raw_log_ratios[a].total_cmp(&raw_log_ratios[b]));
    let cutoff = raw_log_ratios[order[s - m - 1]];

    // work on the ratio scale, stabilized by the max; ratios tied with the
    // cutoff (common when a Metropolis sampler repeats draws) exceed it by
    // nothing and carry no tail information, so only strict exceedances
    // enter the fit
    let cut_ratio = (cutoff - raw_max).exp();
    let mut exceedances = Vec::with_capacity(m);
    for &idx in &order[s - m..] {
        let e = (raw_log_ratios[idx] - raw_max).exp() - cut_ratio;
        if e > 0.0 {
            exceedances.push(e);
        }
    }
    if exceedances.len() < 5 {
        // nearly the whole tail ties the cutoff: no usable tail
        return Ok(pass_through(SmoothStatus::DegenerateTail));
    }
    let fit = match fit_generalized_pareto(&exceedances) {
        Ok(fit) => fit,
        Err(_) => return Ok(pass_through(SmoothStatus::DegenerateTail)),
    };

    let mut log_weights = raw_log_ratios.clone();
    for (j, &idx) in order[s - m..].iter().enumerate() {
        let p = (j as f64 + 0.5) / m as f64;
        let q = gpd_quantile(p, fit.khat, fit.sigma);
        let smoothed = (cut_ratio + q).ln() + raw_max;
        log_weights[idx] = smoothed.min(raw_max);
    }
    Ok(SmoothedWeights {
        log_weights,
        khat: fit.khat,
        tail_size: m,
        raw_max,
        status: SmoothStatus::Smoothed,
    })
}

/// Raw leave-one-out importance log-ratios from full-posterior draws:
/// the ratio for draw `s` is `1 / p(y_i | theta_s)`, so the log-ratio is
/// the negated pointwise log-likelihood.
pub fn plain_importance_log_ratios(loglik_row: &Array1<f64>) -> Result<Array1<f64>> {
    for (s, &ll) in loglik_row.iter().enumerate() {
        if !ll.is_finite() {
            return Err(Error::NonFinite {
                index: s,
                context: "pointwise log-likelihood".to_string(),
            });
        }
    }
    Ok(loglik_row.mapv(|ll| -ll))
}

/// Leave-one-out importance log-ratios corrected for draws that come from
/// an approximation `q` rather than the full posterior:
/// `-loglik(i, s) + log p_full(theta_s) - log q(theta_s)`.
///
/// The first term moves the full posterior to the leave-one-out posterior;
/// the remaining two correct the approximation. Both density vectors may
/// be unnormalized — constants cancel in self-normalized estimates.
pub fn corrected_importance_log_ratios(
    loglik_row: &Array1<f64>,
    log_p_full: &Array1<f64>,
    log_q: &Array1<f64>,
) -> Result<Array1<f64>> {
    let s = loglik_row.len();
    if log_p_full.len() != s || log_q.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "loglik has {s} draws, log p has {}, log q has {}",
            log_p_full.len(),
            log_q.len()
        )));
    }
    let mut out = Array1::zeros(s);
    for i in 0..s {
        if !loglik_row[i].is_finite() {
            return Err(Error::NonFinite {
                index: i,
                context: "pointwise log-likelihood".to_string(),
            });
        }
        if !log_p_full[i].is_finite() {
            return Err(Error::NonFinite {
                index: i,
                context: "full-posterior log-density".to_string(),
            });
        }
        if !log_q[i].is_finite() {
            return Err(Error::NonFinite {
                index: i,
                context: "approximation log-density".to_string(),
            });
        }
        // grouping the correction difference first makes a perfect
        // approximation (log q == log p) cancel exactly
        out[i] = -loglik_row[i] + (log_p_full[i] - log_q[i]);
    }
    Ok(out)
}
