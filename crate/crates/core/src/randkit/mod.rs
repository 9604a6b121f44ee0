//! Seeded random-variate generation.
//!
//! Every sampler takes the generator explicitly, so a draw sequence depends
//! only on the parameters and the [`RngStream`] the generator came from.

mod polya_gamma;

pub use polya_gamma::{pg_mean, pg_variance, sample_polya_gamma, FractionalShape, PolyaGamma};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator type used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// A reproducible stream: one root seed plus a stream index.
///
/// The generator is ChaCha8 keyed by `seed` (expanded through
/// `seed_from_u64`) with its 64-bit stream counter set to `stream_id`, so
/// different stream ids never share keystream. [`fork`](Self::fork) derives
/// a stream for a different purpose (data generation, a particular method)
/// by mixing a tag into the seed with SplitMix64 while keeping the id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    pub fn fork(&self, tag: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x9E37_79B9_7F4A_7C15))),
            stream_id: self.stream_id,
        }
    }

    pub fn with_stream(&self, stream_id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id,
        }
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gamma draw with the given shape and *rate*.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Parameter(format!(
            "gamma requires positive finite shape and rate, got ({shape}, {rate})"
        )));
    }
    let dist = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::Parameter(format!("gamma({shape}, {rate}): {e}")))?;
    Ok(dist.sample(rng))
}

/// Geometric draw on `{1, 2, ...}` with success probability `p`.
pub fn sample_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<i64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Parameter(format!(
            "geometric success probability must be in (0, 1], got {p}"
        )));
    }
    sample_geometric_log_complement((-p).ln_1p(), rng)
}

/// Geometric draw given `log(1 - p)` instead of `p`.
///
/// Drawn as `ceil(log U / log(1 - p))`; stays finite when `p` is within
/// rounding of 1 or when `1 - p` is a product that would underflow.
pub fn sample_geometric_log_complement<R: Rng + ?Sized>(log_q: f64, rng: &mut R) -> Result<i64> {
    if log_q.is_nan() || log_q >= 0.0 {
        return Err(Error::Parameter(format!(
            "log(1 - p) must be negative, got {log_q}"
        )));
    }
    if log_q == f64::NEG_INFINITY {
        return Ok(1);
    }
    let u: f64 = rng.sample(Open01);
    let k = (u.ln() / log_q).ceil().max(1.0);
    if k >= i64::MAX as f64 {
        return Err(Error::NonFinite(format!(
            "geometric draw overflowed with log(1-p) = {log_q}"
        )));
    }
    Ok(k as i64)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian `N(B^{-1} g, B^{-1})` held by its precision `B` and vector `g`.
#[derive(Debug, Clone)]
pub struct PrecisionGaussian {
    g: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl PrecisionGaussian {
    pub fn new(g: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        let p = g.len();
        if precision.nrows() != p || precision.ncols() != p {
            return Err(Error::Validation(format!(
                "precision is {}x{}, vector has length {p}",
                precision.nrows(),
                precision.ncols()
            )));
        }
        if precision.iter().chain(g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("precision system".into()));
        }
        let scale = precision.diagonal().amax().max(f64::MIN_POSITIVE);
        for i in 0..p {
            for j in 0..i {
                if (precision[(i, j)] - precision[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::Validation("precision matrix is not symmetric".into()));
                }
            }
        }
        let chol = Cholesky::new(precision).ok_or(Error::NotPositiveDefinite)?;
        // near-zero pivots mean numerically rank-deficient
        let l = chol.l_dirty();
        if (0..p).any(|i| l[(i, i)] * l[(i, i)] <= 1e-13 * scale) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { g, chol })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.chol.solve(&self.g)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Draws `B^{-1} g + L^{-T} e` with `B = L L^T` and `e` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let p = self.dim();
        let eps = DVector::from_fn(p, |_, _| standard_normal(rng));
        let l = self.chol.l_dirty();
        let noise = l
            .tr_solve_lower_triangular(&eps)
            .expect("cholesky factor has a nonzero diagonal");
        self.mean() + noise
    }
}

pub fn sample_mvn_precision<R: Rng + ?Sized>(
    gauss: &PrecisionGaussian,
    rng: &mut R,
) -> DVector<f64> {
    gauss.sample(rng)
}
