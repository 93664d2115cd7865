//! Posterior inference: adaptive random-walk Metropolis sampling with
//! split-chain convergence diagnostics, and a Laplace (Gaussian)
//! approximation fitted by Newton's method with step halving.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{derive_seed, Welford};
use crate::model::{Dataset, ModelSpec, ParamVector, PosteriorCore};

/// Metropolis acceptance rate targeted during warmup adaptation.
const TARGET_ACCEPT: f64 = 0.234;

/// How a draw matrix was produced. Importance-ratio construction differs
/// between full-posterior draws and draws from a Gaussian approximation,
/// so the provenance travels with the draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawMethod {
    /// Post-warmup draws from Markov chains targeting the full posterior.
    Mcmc,
    /// Independent draws from a Laplace approximation.
    LaplaceSample,
}

/// A matrix of posterior (or approximate-posterior) draws.
///
/// Rows are parameter vectors in flat `[alpha, beta..]` layout, stored
/// chain-major: chain `c` occupies rows `c*per .. (c+1)*per`.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    draws: Array2<f64>,
    chains: usize,
    method: DrawMethod,
    seed: u64,
}

impl PosteriorDraws {
    /// Validate and wrap a draw matrix. The row count must divide evenly
    /// into `chains`, all values must be finite, and draws from a Gaussian
    /// approximation form a single chain by construction.
    pub fn new(draws: Array2<f64>, chains: usize, method: DrawMethod, seed: u64) -> Result<Self> {
        if chains == 0 {
            return Err(Error::InvalidInput("need at least one chain".into()));
        }
        if draws.nrows() == 0 || draws.ncols() == 0 {
            return Err(Error::InvalidInput("empty draw matrix".into()));
        }
        if draws.nrows() % chains != 0 {
            return Err(Error::InvalidInput(format!(
                "{} draws do not split into {} equal chains",
                draws.nrows(),
                chains
            )));
        }
        if method == DrawMethod::LaplaceSample && chains != 1 {
            return Err(Error::InvalidInput(
                "approximation draws are independent and form a single chain".into(),
            ));
        }
        for (s, row) in draws.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    index: s,
                    context: "posterior draw".to_string(),
                });
            }
        }
        Ok(Self {
            draws,
            chains,
            method,
            seed,
        })
    }

    /// Total number of draws across chains.
    pub fn num_draws(&self) -> usize {
        self.draws.nrows()
    }

    /// Parameter dimension.
    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn per_chain(&self) -> usize {
        self.draws.nrows() / self.chains
    }

    pub fn method(&self) -> DrawMethod {
        self.method
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draws(&self) -> &Array2<f64> {
        &self.draws
    }

    /// View of one chain's rows.
    pub fn chain(&self, c: usize) -> ndarray::ArrayView2<'_, f64> {
        let per = self.per_chain();
        self.draws.slice(ndarray::s![c * per..(c + 1) * per, ..])
    }

    /// Column means: the posterior mean parameter vector.
    pub fn mean_vector(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.draws.column(j).sum() / self.num_draws() as f64)
            .collect()
    }
}

/// Configuration for `sample_posterior_mcmc`.
#[derive(Debug, Clone)]
pub struct McmcConfig {
    /// Independent chains (default 4).
    pub chains: usize,
    /// Iterations per chain, warmup included (default 4000).
    pub iterations: usize,
    /// Warmup iterations per chain, discarded and used for proposal
    /// adaptation (default 2000). Adaptation is frozen afterwards.
    pub warmup: usize,
    /// Base RNG seed; each chain derives its own sub-seed.
    pub seed: u64,
    /// Optional per-chain initial parameter vectors. By default each chain
    /// starts from an independent uniform(-2, 2) point.
    pub initial_points: Option<Vec<ParamVector>>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iterations: 4000,
            warmup: 2000,
            seed: 0,
            initial_points: None,
        }
    }
}

impl McmcConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidInput("need at least one chain".into()));
        }
        if self.warmup >= self.iterations {
            return Err(Error::InvalidInput(format!(
                "warmup ({}) must be smaller than iterations ({})",
                self.warmup, self.iterations
            )));
        }
        if self.iterations - self.warmup < 2 {
            return Err(Error::InvalidInput(
                "need at least two post-warmup draws per chain".into(),
            ));
        }
        if let Some(inits) = &self.initial_points {
            if inits.len() != self.chains {
                return Err(Error::InvalidInput(format!(
                    "{} initial points for {} chains",
                    inits.len(),
                    self.chains
                )));
            }
            for init in inits {
                if init.dim() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "initial point has dimension {} but model needs {dim}",
                        init.dim()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Convergence diagnostics attached to an MCMC run.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Split-chain R-hat per parameter; NaN when only one chain was run.
    pub rhat: Array1<f64>,
    /// Per chain: whether a non-finite log-posterior was encountered
    /// anywhere along the trajectory (such proposals are rejected).
    pub divergent: Vec<bool>,
}

struct ChainRun {
    draws: Array2<f64>,
    divergent: bool,
}

/// Draw from the posterior by adaptive random-walk Metropolis.
///
/// Proposals are Gaussian with a per-coordinate scale: a global step-size
/// factor adapts toward a 0.234 acceptance rate while per-coordinate
/// spreads are re-estimated from warmup quarters. Both are frozen at the
/// end of warmup, so the post-warmup kernel is a fixed Metropolis kernel.
/// Returns `(iterations - warmup) * chains` draws plus diagnostics.
pub fn sample_posterior_mcmc(
    model: &ModelSpec,
    data: &Dataset,
    config: &McmcConfig,
) -> Result<(PosteriorDraws, ConvergenceReport)> {
    let core = PosteriorCore::new(model, data)?;
    config.validate(core.dim())?;
    let per = config.iterations - config.warmup;

    let runs: Vec<Result<ChainRun>> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, c as u64));
            let init: Vec<f64> = match &config.initial_points {
                Some(points) => points[c].flat(),
                None => (0..core.dim()).map(|_| rng.random_range(-2.0..2.0)).collect(),
            };
            run_chain(&core, config.iterations, config.warmup, init, &mut rng)
                .map_err(|e| match e {
                    Error::Convergence(msg) => Error::Convergence(format!("chain {c}: {msg}")),
                    other => other,
                })
        })
        .collect();

    let mut draws = Array2::zeros((config.chains * per, core.dim()));
    let mut divergent = Vec::with_capacity(config.chains);
    for (c, run) in runs.into_iter().enumerate() {
        let run = run?;
        draws
            .slice_mut(ndarray::s![c * per..(c + 1) * per, ..])
            .assign(&run.draws);
        divergent.push(run.divergent);
    }

    let draws = PosteriorDraws::new(draws, config.chains, DrawMethod::Mcmc, config.seed)?;
    let rhat = if config.chains >= 2 {
        gelman_rubin(&draws)?
    } else {
        Array1::from_elem(core.dim(), f64::NAN)
    };
    Ok((draws, ConvergenceReport { rhat, divergent }))
}

fn run_chain(
    core: &PosteriorCore,
    iterations: usize,
    warmup: usize,
    init: Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<ChainRun> {
    let d = core.dim();
    let mut theta = init;
    let mut logp = core.log_posterior_value(&theta);
    if !logp.is_finite() {
        return Err(Error::Convergence(
            "log-posterior is not finite at the initial point".into(),
        ));
    }

    let mut lambda = 2.38 / (d as f64).sqrt();
    let mut coord_sd = vec![1.0; d];
    let mut welford = vec![Welford::new(); d];
    let refresh_at: Vec<usize> = (1..4).map(|q| q * warmup / 4).filter(|&t| t > 0).collect();

    let mut draws = Array2::zeros((iterations - warmup, d));
    let mut divergent = false;
    let mut proposal = vec![0.0; d];

    for t in 0..iterations {
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            proposal[j] = theta[j] + lambda * coord_sd[j] * z;
        }
        let lp = core.log_posterior_value(&proposal);
        let accept_prob = if lp.is_nan() {
            divergent = true;
            0.0
        } else {
            (lp - logp).min(0.0).exp()
        };
        if rng.random::<f64>() < accept_prob {
            std::mem::swap(&mut theta, &mut proposal);
            logp = lp;
        }

        if t < warmup {
            let gamma = (t as f64 + 10.0).powf(-0.6);
            lambda = (lambda.ln() + gamma * (accept_prob - TARGET_ACCEPT))
                .exp()
                .clamp(1e-8, 1e4);
            for j in 0..d {
                welford[j].push(theta[j]);
            }
            if refresh_at.contains(&(t + 1)) && welford[0].count() >= 25 {
                for j in 0..d {
                    let sd = welford[j].sd();
                    if sd > 0.0 {
                        coord_sd[j] = sd;
                    }
                    welford[j] = Welford::new();
                }
            }
        } else {
            for j in 0..d {
                draws[(t - warmup, j)] = theta[j];
            }
        }
    }
    Ok(ChainRun { draws, divergent })
}

/// Split-chain R-hat per parameter.
///
/// Each chain is halved; with `W` the mean within-half-chain variance, `B/S'`
/// the variance of half-chain means, and `S'` the half-chain length, the
/// statistic is `sqrt((W (S'-1)/S' + B/S') / W)`. Values close to 1 indicate
/// the chains agree; the run diagnostics flag anything above 1.01.
pub fn gelman_rubin(draws: &PosteriorDraws) -> Result<Array1<f64>> {
    if draws.chains() < 2 {
        return Err(Error::InvalidInput(
            "split-chain diagnostic needs at least two chains".into(),
        ));
    }
    let half = draws.per_chain() / 2;
    if half < 4 {
        return Err(Error::InvalidInput(
            "need at least four draws per split chain".into(),
        ));
    }
    let d = draws.dim();
    let mut rhat = Array1::zeros(d);
    for j in 0..d {
        let mut means = Vec::with_capacity(2 * draws.chains());
        let mut vars = Vec::with_capacity(2 * draws.chains());
        for c in 0..draws.chains() {
            let chain = draws.chain(c);
            for part in 0..2 {
                let mut w = Welford::new();
                for t in 0..half {
                    w.push(chain[(part * half + t, j)]);
                }
                means.push(w.mean());
                vars.push(w.variance());
            }
        }
        let w = crate::math::mean(&vars);
        if w == 0.0 {
            return Err(Error::Degenerate(format!(
                "zero within-chain variance for parameter {j}"
            )));
        }
        let b_over_len = crate::math::sample_variance(&means);
        let s = half as f64;
        rhat[j] = ((w * (s - 1.0) / s + b_over_len) / w).sqrt();
    }
    Ok(rhat)
}

/// Configuration for the Newton optimizer behind `laplace_approximate`.
#[derive(Debug, Clone)]
pub struct NewtonConfig {
    pub max_iters: usize,
    /// Convergence threshold on the Euclidean norm of the gradient.
    pub grad_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            grad_tol: 1e-8,
        }
    }
}

/// Gaussian approximation of the posterior at its mode.
#[derive(Debug, Clone)]
pub struct LaplaceApproximation {
    mean: Array1<f64>,
    covariance: Array2<f64>,
    log_det_cov: f64,
    mode_log_posterior: f64,
    /// Lower Cholesky factor L of the negative Hessian at the mode
    /// (so the precision matrix is L L'); reused for densities and sampling.
    chol_precision: nalgebra::DMatrix<f64>,
}

impl LaplaceApproximation {
    /// Posterior mode.
    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    /// Inverse negative Hessian at the mode, computed from its Cholesky
    /// factor (never by a general matrix inverse).
    pub fn covariance(&self) -> &Array2<f64> {
        &self.covariance
    }

    pub fn log_det_cov(&self) -> f64 {
        self.log_det_cov
    }

    /// Unnormalized log-posterior value at the mode.
    pub fn mode_log_posterior(&self) -> f64 {
        self.mode_log_posterior
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fit a Laplace approximation: Newton iterations from the origin with
/// step halving on the log-posterior, then covariance from the Cholesky
/// factor of the negative Hessian at the mode.
pub fn laplace_approximate(
    model: &ModelSpec,
    data: &Dataset,
    config: &NewtonConfig,
) -> Result<LaplaceApproximation> {
    let core = PosteriorCore::new(model, data)?;
    let d = core.dim();
    let mut theta = vec![0.0; d];
    let mut state = core.log_posterior_grad_hess(&theta)?;

    let mut converged = false;
    for _ in 0..config.max_iters {
        let grad_norm = state.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < config.grad_tol {
            converged = true;
            break;
        }
        let neg_h =
            nalgebra::DMatrix::from_fn(d, d, |a, b| -state.hessian[(a, b)]);
        let chol = nalgebra::Cholesky::new(neg_h).ok_or_else(|| {
            Error::Convergence("negative Hessian is not positive definite".into())
        })?;
        let g = nalgebra::DVector::from_fn(d, |a, _| state.gradient[a]);
        let step = chol.solve(&g);

        // step halving: accept the first scaled step that improves the
        // target by more than its floating-point resolution, so rounding
        // jitter near the mode cannot masquerade as progress
        let noise = 4.0 * f64::EPSILON * (1.0 + state.value.abs());
        let mut scale = 1.0;
        let mut improved = false;
        while scale > 1e-10 {
            let candidate: Vec<f64> =
                (0..d).map(|j| theta[j] + scale * step[j]).collect();
            let value = core.log_posterior_value(&candidate);
            if value.is_finite() && value > state.value + noise {
                theta = candidate;
                state = core.log_posterior_grad_hess(&theta)?;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            // the value has hit its floating-point resolution; the full
            // Newton step still contracts the gradient quadratically on
            // this concave target, so accept it on that criterion instead
            let candidate: Vec<f64> = (0..d).map(|j| theta[j] + step[j]).collect();
            match core.log_posterior_grad_hess(&candidate) {
                Ok(cand) if cand.value.is_finite() => {
                    let cand_norm =
                        cand.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
                    if cand_norm < 0.5 * grad_norm {
                        theta = candidate;
                        state = cand;
                        continue;
                    }
                }
                _ => {}
            }
            // no step improves the value or shrinks the gradient: we are at
            // the optimum up to rounding
            converged = true;
            break;
        }
    }
    let grad_norm = state.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !converged && grad_norm >= config.grad_tol {
        return Err(Error::Convergence(format!(
            "Newton did not reach gradient tolerance {} in {} iterations (norm {grad_norm:.3e})",
            config.grad_tol, config.max_iters
        )));
    }

    let neg_h = nalgebra::DMatrix::from_fn(d, d, |a, b| -state.hessian[(a, b)]);
    let chol = nalgebra::Cholesky::new(neg_h).ok_or_else(|| {
        Error::Convergence("negative Hessian at the mode is not positive definite".into())
    })?;
    let l = chol.l();
    let log_det_cov = -2.0 * (0..d).map(|j| l[(j, j)].ln()).sum::<f64>();
    let cov_na = chol.inverse();
    // symmetrize against rounding
    let covariance = Array2::from_shape_fn((d, d), |(a, b)| {
        0.5 * (cov_na[(a, b)] + cov_na[(b, a)])
    });

    Ok(LaplaceApproximation {
        mean: Array1::from_vec(theta),
        covariance,
        log_det_cov,
        mode_log_posterior: state.value,
        chol_precision: l,
    })
}

/// Log-density of the Laplace approximation at `theta`
/// (flat `[alpha, beta..]` layout).
pub fn laplace_log_density(q: &LaplaceApproximation, theta: &[f64]) -> Result<f64> {
    let d = q.dim();
    if theta.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "point has dimension {} but approximation has {d}",
            theta.len()
        )));
    }
    // quadratic form via the precision factor: delta' L L' delta = |L' delta|^2
    let mut quad = 0.0;
    for b in 0..d {
        // (L' delta)_b = sum_a L[a,b] delta_a
        let mut z = 0.0;
        for a in b..d {
            z += q.chol_precision[(a, b)] * (theta[a] - q.mean[a]);
        }
        quad += z * z;
    }
    Ok(-0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * q.log_det_cov - 0.5 * quad)
}

/// Draw `s` independent samples from the Laplace approximation.
///
/// Uses `mean + L^-T z` with `z` standard normal, solved against the
/// stored precision factor; fixed seeds give bitwise-identical draws.
pub fn sample_from_laplace(
    q: &LaplaceApproximation,
    s: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    if s == 0 {
        return Err(Error::InvalidInput("need at least one draw".into()));
    }
    let d = q.dim();
    let lt = q.chol_precision.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Array2::zeros((s, d));
    for i in 0..s {
        let z = nalgebra::DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Degenerate("singular precision factor".into()))?;
        for j in 0..d {
            draws[(i, j)] = q.mean[j] + x[j];
        }
    }
    PosteriorDraws::new(draws, 1, DrawMethod::LaplaceSample, seed)
}
