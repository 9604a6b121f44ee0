//! Pólya–Gamma variates `PG(b, c)`.
//!
//! `PG(1, c)` is drawn exactly with Devroye's alternating-series rejection
//! sampler (the scheme of Polson, Scott and Windle): propose from a mixture
//! of a truncated inverse Gaussian on `(0, t]` and an exponential tail on
//! `(t, inf)`, then accept by bracketing the Jacobi density between partial
//! sums of its alternating series. Integer shapes up to a threshold are sums
//! of independent `PG(1, c)` draws. Larger or fractional shapes use a normal
//! with the exact mean and variance of `PG(b, c)`.

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const TRUNC: f64 = 0.64;
const TRUNC_RECIP: f64 = 1.0 / TRUNC;

/// How shapes that are not whole numbers (and not above the exact
/// threshold) are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FractionalShape {
    /// Normal with the exact first two moments, floored at a tiny positive value.
    #[default]
    MomentMatched,
    /// Experimental: `floor(b)` exact draws plus the fractional remainder from
    /// the infinite gamma convolution truncated at `terms` terms, with the
    /// expected mass of the dropped terms added back.
    TruncatedSeries { terms: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyaGamma {
    /// Largest integer shape drawn as an exact sum of `PG(1, c)` variates.
    pub exact_max_shape: u32,
    pub fractional: FractionalShape,
}

impl Default for PolyaGamma {
    fn default() -> Self {
        Self {
            exact_max_shape: 20,
            fractional: FractionalShape::MomentMatched,
        }
    }
}

impl PolyaGamma {
    pub fn new(exact_max_shape: u32) -> Self {
        Self {
            exact_max_shape,
            ..Self::default()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, b: f64, c: f64, rng: &mut R) -> Result<f64> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::Parameter(format!("PG shape must be positive, got {b}")));
        }
        if !c.is_finite() {
            return Err(Error::Parameter(format!("PG tilt must be finite, got {c}")));
        }
        Ok(self.sample_unchecked(b, c, rng))
    }

    /// Caller guarantees `b > 0` and finite `c`.
    pub fn sample_unchecked<R: Rng + ?Sized>(&self, b: f64, c: f64, rng: &mut R) -> f64 {
        let whole = b.fract() == 0.0;
        if b > self.exact_max_shape as f64 {
            return moment_matched(b, c, rng);
        }
        if whole {
            let pg1 = Pg1::new(c);
            return (0..b as u32).map(|_| pg1.draw(rng)).sum();
        }
        match self.fractional {
            FractionalShape::MomentMatched => moment_matched(b, c, rng),
            FractionalShape::TruncatedSeries { terms } => {
                let pg1 = Pg1::new(c);
                let int_part: f64 = (0..b.floor() as u32).map(|_| pg1.draw(rng)).sum();
                int_part + truncated_series(b.fract(), c, terms.max(1), rng)
            }
        }
    }
}

/// `PG(b, c)` with the default strategy.
pub fn sample_polya_gamma<R: Rng + ?Sized>(b: f64, c: f64, rng: &mut R) -> Result<f64> {
    PolyaGamma::default().sample(b, c, rng)
}

/// `E[PG(b, c)] = b tanh(c/2) / (2c)`, `b/4` at `c = 0`.
pub fn pg_mean(b: f64, c: f64) -> f64 {
    let c = c.abs();
    if c < 1e-5 {
        b * 0.25 * (1.0 - c * c / 12.0)
    } else {
        b * (0.5 * c).tanh() / (2.0 * c)
    }
}

/// `Var[PG(b, c)] = b (sinh c - c) sech^2(c/2) / (4 c^3)`, `b/24` at `c = 0`.
pub fn pg_variance(b: f64, c: f64) -> f64 {
    let c = c.abs();
    if c < 1e-2 {
        // (sinh c - c)/c^3 by series, times sech^2(c/2)
        let c2 = c * c;
        let ratio = 1.0 / 6.0 + c2 / 120.0 + c2 * c2 / 5040.0;
        let sech = 1.0 / (0.5 * c).cosh();
        b * ratio * sech * sech / 4.0
    } else {
        // equivalent overflow-free form: b tanh(c/2) (1 - c/sinh c) / (2 c^3)
        let c_over_sinh = if c > 700.0 { 0.0 } else { c / c.sinh() };
        b * (0.5 * c).tanh() * (1.0 - c_over_sinh) / (2.0 * c * c * c)
    }
}

fn moment_matched<R: Rng + ?Sized>(b: f64, c: f64, rng: &mut R) -> f64 {
    let m = pg_mean(b, c);
    let s = pg_variance(b, c).sqrt();
    let z: f64 = StandardNormal.sample(rng);
    (m + s * z).max(m * 1e-6)
}

fn truncated_series<R: Rng + ?Sized>(b: f64, c: f64, terms: usize, rng: &mut R) -> f64 {
    let gamma = Gamma::new(b, 1.0).expect("positive shape");
    let c2 = c * c / (4.0 * PI * PI);
    let mut sum = 0.0;
    let mut kept_mean = 0.0;
    for k in 1..=terms {
        let h = k as f64 - 0.5;
        let denom = h * h + c2;
        sum += gamma.sample(rng) / denom;
        kept_mean += b / denom;
    }
    let scale = 1.0 / (2.0 * PI * PI);
    let tail = (pg_mean(b, c) - kept_mean * scale).max(0.0);
    sum * scale + tail
}

/// Precomputed proposal constants for `PG(1, c)`.
struct Pg1 {
    z: f64,
    fz: f64,
    p_exp: f64,
}

impl Pg1 {
    fn new(c: f64) -> Self {
        let z = 0.5 * c.abs();
        let fz = 0.125 * PI * PI + 0.5 * z * z;
        Self {
            z,
            fz,
            p_exp: mass_texpon(z, fz),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.random();
            let x = if u < self.p_exp {
                let e: f64 = Exp1.sample(rng);
                TRUNC + e / self.fz
            } else {
                rtigauss(self.z, rng)
            };
            let mut s = series_term(0, x);
            let y = rng.random::<f64>() * s;
            let mut n = 0u32;
            loop {
                n += 1;
                if n % 2 == 1 {
                    s -= series_term(n, x);
                    if y <= s {
                        return 0.25 * x;
                    }
                } else {
                    s += series_term(n, x);
                    if y > s {
                        break;
                    }
                }
            }
        }
    }
}

/// n-th coefficient of the alternating series for the `J*(1)` density,
/// using the left representation below the truncation point.
fn series_term(n: u32, x: f64) -> f64 {
    let h = n as f64 + 0.5;
    let k = h * PI;
    if x > TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let expnt = -1.5 * ((0.5 * PI).ln() + x.ln()) + k.ln() - 2.0 * h * h / x;
        expnt.exp()
    } else {
        0.0
    }
}

/// Probability of drawing from the exponential (right) piece of the proposal.
fn mass_texpon(z: f64, fz: f64) -> f64 {
    let t = TRUNC;
    let b = (1.0 / t).sqrt() * (t * z - 1.0);
    let a = -(1.0 / t).sqrt() * (t * z + 1.0);
    let x0 = fz.ln() + fz * t;
    let xb = x0 - z + ln_norm_cdf(b);
    let xa = x0 + z + ln_norm_cdf(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// Inverse Gaussian `IG(1/z, 1)` truncated to `(0, TRUNC]`.
fn rtigauss<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = TRUNC;
    if z < TRUNC_RECIP {
        // mean beyond the truncation point: inverse-chi-square proposal
        loop {
            let (mut e1, mut e2): (f64, f64) = (Exp1.sample(rng), Exp1.sample(rng));
            while e1 * e1 > 2.0 * e2 / t {
                e1 = Exp1.sample(rng);
                e2 = Exp1.sample(rng);
            }
            let d = 1.0 + e1 * t;
            let x = t / (d * d);
            let alpha = (-0.5 * z * z * x).exp();
            let u: f64 = rng.sample(Open01);
            if u <= alpha {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let y: f64 = StandardNormal.sample(rng);
            let y = y * y;
            let half_mu = 0.5 * mu;
            let mu_y = mu * y;
            let mut x = mu + half_mu * mu_y - half_mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x <= t {
                return x;
            }
        }
    }
}

/// `log Phi(x)` with an asymptotic expansion far in the lower tail.
pub(crate) fn ln_norm_cdf(x: f64) -> f64 {
    if x > -20.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::RngStream;

    fn stats(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn moment_formulas() {
        assert!((pg_mean(1.0, 0.0) - 0.25).abs() < 1e-15);
        assert!((pg_mean(2.0, 1.0) - 0.462_117_157).abs() < 1e-8);
        assert!((pg_variance(1.0, 0.0) - 1.0 / 24.0).abs() < 1e-15);
        // small-c series joins the closed form
        let a = pg_variance(3.0, 0.0099);
        let b = pg_variance(3.0, 0.0101);
        assert!((a - b).abs() < 1e-6);
        assert!(pg_variance(1.0, 2000.0).is_finite());
        assert!(pg_mean(1.0, -2.0) == pg_mean(1.0, 2.0));
    }

    #[test]
    fn ln_norm_cdf_matches_erfc_at_crossover() {
        let a = (0.5 * erfc(20.0 / std::f64::consts::SQRT_2)).ln();
        assert!((ln_norm_cdf(-20.0 - 1e-9) - a).abs() < 1e-4);
        assert!(ln_norm_cdf(-300.0).is_finite());
    }

    #[test]
    fn pg1_zero_tilt_mean_and_variance() {
        let mut rng = RngStream::new(1, 0).rng();
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_polya_gamma(1.0, 0.0, &mut rng).unwrap())
            .collect();
        let (m, v) = stats(&xs);
        let var = 1.0 / 24.0;
        assert!((m - 0.25).abs() < 3.0 * (var / n as f64).sqrt(), "mean {m}");
        // SE of the sample variance from the fourth central moment
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
        let se_v = ((m4 - v * v) / n as f64).sqrt();
        assert!((v - var).abs() < 3.0 * se_v, "var {v}");
    }

    #[test]
    fn pg2_tilted_mean() {
        let mut rng = RngStream::new(2, 0).rng();
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_polya_gamma(2.0, 1.0, &mut rng).unwrap())
            .collect();
        let (m, _) = stats(&xs);
        let se = (pg_variance(2.0, 1.0) / n as f64).sqrt();
        assert!((m - 0.46212).abs() < 3.0 * se, "mean {m}");
    }

    #[test]
    fn additivity_of_shape() {
        let mut rng = RngStream::new(3, 0).rng();
        let n = 50_000;
        let c = 1.5;
        let two: Vec<f64> = (0..n)
            .map(|_| sample_polya_gamma(2.0, c, &mut rng).unwrap())
            .collect();
        let sums: Vec<f64> = (0..n)
            .map(|_| {
                sample_polya_gamma(1.0, c, &mut rng).unwrap()
                    + sample_polya_gamma(1.0, c, &mut rng).unwrap()
            })
            .collect();
        let (m1, v1) = stats(&two);
        let (m2, v2) = stats(&sums);
        let se = (v1 / n as f64 + v2 / n as f64).sqrt();
        assert!((m1 - m2).abs() < 4.0 * se);
    }

    #[test]
    fn extreme_tilts_and_shapes_are_finite() {
        let mut rng = RngStream::new(4, 0).rng();
        for &c in &[-700.0, -40.0, 1e-9, 0.7, 35.0, 700.0] {
            let x = sample_polya_gamma(1.0, c, &mut rng).unwrap();
            assert!(x.is_finite() && x > 0.0, "c={c} x={x}");
        }
        let x = sample_polya_gamma(500.0, 0.3, &mut rng).unwrap();
        assert!(x.is_finite() && x > 0.0);
        let x = sample_polya_gamma(1e13, 3.0, &mut rng).unwrap();
        assert!(x.is_finite() && x > 0.0);
        assert!(sample_polya_gamma(0.0, 1.0, &mut rng).is_err());
        assert!(sample_polya_gamma(1.0, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn truncated_series_fractional_shape() {
        let pg = PolyaGamma {
            exact_max_shape: 20,
            fractional: FractionalShape::TruncatedSeries { terms: 200 },
        };
        let mut rng = RngStream::new(6, 0).rng();
        let n = 40_000;
        for &(b, c) in &[(0.5, 0.0), (2.5, 1.0)] {
            let xs: Vec<f64> = (0..n).map(|_| pg.sample(b, c, &mut rng).unwrap()).collect();
            let (m, v) = stats(&xs);
            let se = (pg_variance(b, c) / n as f64).sqrt();
            assert!((m - pg_mean(b, c)).abs() < 4.0 * se, "b={b} c={c} m={m}");
            assert!((v / pg_variance(b, c) - 1.0).abs() < 0.05, "b={b} v={v}");
        }
    }

    #[test]
    fn same_stream_same_draws() {
        let draw = || {
            let mut rng = RngStream::new(42, 9).rng();
            (0..50)
                .map(|i| sample_polya_gamma(1.0 + (i % 30) as f64, i as f64 * 0.3, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }
}
