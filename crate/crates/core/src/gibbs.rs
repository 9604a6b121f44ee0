//! Pieces shared by the Pólya–Gamma Gibbs samplers: the normal prior, chain
//! bookkeeping, a row-major design matrix and the Gaussian coefficient draw.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::draws::{ParamKind, PosteriorDraws, SamplerStats};
use crate::error::{Error, Result};
use crate::randkit::{PrecisionGaussian, RngStream, SimRng};

/// `beta ~ N(mean, cov)`, stored with its precision and `precision * mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalPrior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    precision_mean: DVector<f64>,
}

impl NormalPrior {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        if cov.nrows() != p || cov.ncols() != p {
            return Err(Error::Validation("prior covariance has wrong shape".into()));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Validation("prior covariance is not positive definite".into()))?;
        let precision = chol.inverse();
        let precision = (&precision + precision.transpose()) * 0.5;
        let precision_mean = &precision * &mean;
        Ok(Self {
            mean,
            cov,
            precision,
            precision_mean,
        })
    }

    /// Independent `N(0, sd^2)` on each of `p` coefficients.
    pub fn isotropic(p: usize, sd: f64) -> Result<Self> {
        if !(sd > 0.0) {
            return Err(Error::Validation(format!("prior sd must be positive, got {sd}")));
        }
        Self::new(DVector::zeros(p), DMatrix::identity(p, p) * (sd * sd))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn with_mean(mut self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::Validation("prior mean has wrong length".into()));
        }
        self.precision_mean = &self.precision * &mean;
        self.mean = mean;
        Ok(self)
    }
}

/// Iteration counts and the random stream of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    /// Total sweeps, burn-in included.
    pub n_iter: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub stream: RngStream,
    /// Consecutive failed coefficient updates tolerated before aborting.
    pub max_failures: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            n_iter: 3000,
            n_burnin: 1000,
            thin: 1,
            stream: RngStream::new(1, 0),
            max_failures: 10,
        }
    }
}

impl ChainSettings {
    pub fn new(n_iter: usize, n_burnin: usize, seed: u64) -> Self {
        Self {
            n_iter,
            n_burnin,
            stream: RngStream::new(seed, 0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.thin == 0 || self.max_failures == 0 {
            return Err(Error::Validation(
                "n_iter, thin and max_failures must be positive".into(),
            ));
        }
        if self.n_burnin >= self.n_iter {
            return Err(Error::Validation(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.n_burnin, self.n_iter
            )));
        }
        Ok(())
    }

    pub fn keeps(&self, iteration: usize) -> bool {
        iteration > self.n_burnin && (iteration - self.n_burnin).is_multiple_of(self.thin)
    }

    pub fn n_retained(&self) -> usize {
        (self.n_iter - self.n_burnin) / self.thin
    }
}

/// Row-major copy of the design matrix.
#[derive(Debug, Clone)]
pub struct Design {
    n: usize,
    p: usize,
    rows: Vec<f64>,
}

impl Design {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let mut rows = Vec::with_capacity(n * p);
        for i in 0..n {
            rows.extend(x.row(i).iter());
        }
        Self { n, p, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    pub fn dot_row(&self, i: usize, beta: &[f64]) -> f64 {
        self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    pub fn predictor_into(&self, beta: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.dot_row(i, beta);
        }
    }

    /// Precision `X' diag(w) X + P` and vector `X' r + P m`.
    pub fn normal_system(
        &self,
        weights: &[f64],
        resid: &[f64],
        prior: &NormalPrior,
    ) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.p;
        let mut b = vec![0.0; p * p];
        let mut g = vec![0.0; p];
        for i in 0..self.n {
            let w = weights[i];
            let r = resid[i];
            if w == 0.0 && r == 0.0 {
                continue;
            }
            let x = self.row(i);
            for j in 0..p {
                g[j] += x[j] * r;
                let wx = w * x[j];
                for k in 0..=j {
                    b[j * p + k] += wx * x[k];
                }
            }
        }
        let mut bm = DMatrix::from_fn(p, p, |j, k| if k <= j { b[j * p + k] } else { b[k * p + j] });
        bm += prior.precision();
        let gv = DVector::from_vec(g) + &prior.precision_mean;
        (bm, gv)
    }

    /// Draws coefficients from `N(B^{-1} g, B^{-1})` for the PG-augmented system.
    pub fn draw_coefficients<R: Rng + ?Sized>(
        &self,
        weights: &[f64],
        resid: &[f64],
        prior: &NormalPrior,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        let (b, g) = self.normal_system(weights, resid, prior);
        let gauss = PrecisionGaussian::new(g, b)?;
        let draw = gauss.sample(rng);
        if draw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient draw".into()));
        }
        Ok(draw)
    }
}

/// Tracks consecutive failed updates and aborts past the limit.
#[derive(Debug, Clone, Default)]
pub(crate) struct FailureGuard {
    consecutive: usize,
    pub(crate) total: u64,
    max: usize,
}

impl FailureGuard {
    pub(crate) fn new(max: usize) -> Self {
        Self {
            max,
            ..Self::default()
        }
    }

    pub(crate) fn check<T>(&mut self, iteration: usize, outcome: Result<T>) -> Result<Option<T>> {
        match outcome {
            Ok(v) => {
                self.consecutive = 0;
                Ok(Some(v))
            }
            Err(e @ (Error::NotPositiveDefinite | Error::NonFinite(_))) => {
                self.consecutive += 1;
                self.total += 1;
                if self.consecutive >= self.max {
                    Err(Error::Divergence {
                        iteration,
                        failures: self.consecutive,
                        reason: e.to_string(),
                    })
                } else {
                    Ok(None)
                }
            }
            Err(e) => Err(e),
        }
    }
}

/// A Pólya–Gamma augmented sampler for a rank likelihood, viewed as one
/// Gibbs block structure: latent event-time variables, PG weights, and
/// coefficients, with an optional per-subject additive offset (frailty).
pub trait AugmentedSampler {
    fn design(&self) -> &Design;
    fn beta(&self) -> &DVector<f64>;
    fn update_latent(&mut self, rng: &mut SimRng) -> Result<()>;
    fn update_omega(&mut self, rng: &mut SimRng) -> Result<()>;
    fn update_beta(&mut self, rng: &mut SimRng) -> Result<()>;
    /// PG weights `omega_i`; zero for subjects that carry no information.
    fn omega(&self) -> &[f64];
    /// `kappa_i`; zero for subjects that carry no information.
    fn kappa(&self) -> &[f64];
    /// Model offset on the PG scale (`log(zeta_i / delta)` for PL, zero for GPL).
    fn model_offset(&self) -> &[f64];
    /// `x_i' beta` without the additive offset.
    fn fixed_predictor(&self) -> Vec<f64>;
    /// Sets the additive per-subject term (e.g. `u_{g(i)}`) and refreshes derived quantities.
    fn set_extra(&mut self, extra: &[f64]);
    /// Adds `shift` to the intercept coefficient.
    fn shift_intercept(&mut self, shift: f64);
    /// Model log-likelihood at the current linear predictor.
    fn loglik(&self) -> f64;
    fn clamped(&self) -> u64;
}

/// Runs `settings.n_iter` sweeps of latent -> omega -> beta.
pub fn run_chain<S: AugmentedSampler>(
    sampler: &mut S,
    settings: &ChainSettings,
    names: Vec<String>,
    kinds: Vec<ParamKind>,
) -> Result<PosteriorDraws> {
    settings.validate()?;
    let start = Instant::now();
    let mut rng = settings.stream.rng();
    let mut guard = FailureGuard::new(settings.max_failures);
    let mut draws = PosteriorDraws::new(names, kinds);
    for it in 1..=settings.n_iter {
        sampler.update_latent(&mut rng)?;
        sampler.update_omega(&mut rng)?;
        let outcome = sampler.update_beta(&mut rng);
        guard.check(it, outcome)?;
        if settings.keeps(it) {
            let beta = sampler.beta().as_slice().to_vec();
            draws.push(it, &beta, sampler.loglik());
        }
    }
    draws.elapsed = start.elapsed();
    draws.stats = SamplerStats {
        clamped: sampler.clamped(),
        failed_updates: guard.total,
    };
    Ok(draws)
}

pub(crate) fn coefficient_kinds(names: &[String], has_intercept: bool) -> Vec<ParamKind> {
    (0..names.len())
        .map(|j| {
            if has_intercept && j == 0 {
                ParamKind::Intercept
            } else {
                ParamKind::Coefficient
            }
        })
        .collect()
}
