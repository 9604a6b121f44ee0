//! Partial-likelihood maximum likelihood with Breslow or Efron ties.
//!
//! The design must not contain an intercept column: the partial likelihood
//! is invariant to it and the information would be singular.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survdata::RiskStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    Breslow,
    Efron,
}

impl std::str::FromStr for Ties {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "breslow" => Ok(Ties::Breslow),
            "efron" => Ok(Ties::Efron),
            other => Err(Error::Validation(format!("unknown ties method '{other}'"))),
        }
    }
}

/// Value, gradient and Hessian of a log partial likelihood.
#[derive(Debug, Clone)]
pub struct LogLikDerivs {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

pub fn breslow_loglik_grad_hess(beta: &[f64], risk: &RiskStructure, x: &DMatrix<f64>) -> Result<LogLikDerivs> {
    loglik_grad_hess(beta, risk, x, Ties::Breslow)
}

pub fn efron_loglik_grad_hess(beta: &[f64], risk: &RiskStructure, x: &DMatrix<f64>) -> Result<LogLikDerivs> {
    loglik_grad_hess(beta, risk, x, Ties::Efron)
}

pub fn loglik_grad_hess(
    beta: &[f64],
    risk: &RiskStructure,
    x: &DMatrix<f64>,
    ties: Ties,
) -> Result<LogLikDerivs> {
    let (n, p) = x.shape();
    if beta.len() != p || risk.n() != n {
        return Err(Error::Validation(format!(
            "beta has length {}, design is {n}x{p}, risk structure has {} subjects",
            beta.len(),
            risk.n()
        )));
    }
    let eta: Vec<f64> = (0..n)
        .map(|i| (0..p).map(|j| x[(i, j)] * beta[j]).sum())
        .collect();
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|&e| (e - shift).exp()).collect();

    let mut value = 0.0;
    let mut grad = DVector::zeros(p);
    let mut hess = DMatrix::zeros(p, p);

    // running risk-set moments, accumulated from the latest time backwards
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let order = risk.order();
    let mut added = order.len();
    let add = |i: usize, s0: &mut f64, s1: &mut DVector<f64>, s2: &mut DMatrix<f64>| {
        let wi = w[i];
        *s0 += wi;
        for j in 0..p {
            let a = wi * x[(i, j)];
            s1[j] += a;
            for k in 0..=j {
                s2[(j, k)] += a * x[(i, k)];
            }
        }
    };

    for r in (0..risk.n_distinct()).rev() {
        let start = risk.risk_start(r);
        while added > start {
            added -= 1;
            add(order[added], &mut s0, &mut s1, &mut s2);
        }
        let events = risk.event_set(r);
        let d = events.len();
        let mut t0 = 0.0;
        let mut t1 = DVector::zeros(p);
        let mut t2 = DMatrix::zeros(p, p);
        for &i in events {
            value += eta[i];
            for j in 0..p {
                grad[j] += x[(i, j)];
            }
            if ties == Ties::Efron && d > 1 {
                add(i, &mut t0, &mut t1, &mut t2);
            }
        }
        for k in 0..d {
            let f = if ties == Ties::Efron { k as f64 / d as f64 } else { 0.0 };
            let den = s0 - f * t0;
            if !(den > 0.0) {
                return Err(Error::NonFinite(format!("risk-set denominator at event time {r}")));
            }
            value -= den.ln() + shift;
            let m1 = (&s1 - &t1 * f) / den;
            grad -= &m1;
            for j in 0..p {
                for l in 0..=j {
                    hess[(j, l)] -= (s2[(j, l)] - f * t2[(j, l)]) / den - m1[j] * m1[l];
                }
            }
        }
    }
    for j in 0..p {
        for l in 0..j {
            hess[(l, j)] = hess[(j, l)];
        }
    }
    if !value.is_finite() || grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("partial likelihood or gradient".into()));
    }
    Ok(LogLikDerivs {
        value,
        gradient: grad,
        hessian: hess,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Convergence threshold on the gradient infinity norm.
    pub tol: f64,
    pub max_iter: usize,
    /// `||beta||` beyond which the fit is declared divergent.
    pub beta_bound: f64,
    pub max_halvings: usize,
    /// Smallest information eigenvalue accepted at convergence.
    pub min_information: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            beta_bound: 50.0,
            max_halvings: 20,
            min_information: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MleResult {
    pub beta_hat: Vec<f64>,
    /// Inverse observed information at `beta_hat`.
    pub covariance: Vec<Vec<f64>>,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub ties: Ties,
    /// Why the fit did not converge, if it did not.
    pub diagnostic: Option<String>,
}

impl MleResult {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.beta_hat.len())
            .map(|j| self.covariance[j][j].max(0.0).sqrt())
            .collect()
    }

    /// Wald interval `beta_hat +- z * se` for each coefficient.
    pub fn wald_intervals(&self, z: f64) -> Vec<(f64, f64)> {
        self.beta_hat
            .iter()
            .zip(self.std_errors())
            .map(|(&b, se)| (b - z * se, b + z * se))
            .collect()
    }
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

fn singular_direction(info: &DMatrix<f64>) -> Option<Vec<f64>> {
    let eig = SymmetricEigen::new(info.clone());
    let (k, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let scale = eig.eigenvalues.amax().max(1.0);
    if lmin <= 1e-10 * scale {
        let v = eig.eigenvectors.column(k);
        let sign = if v.iter().fold(0.0f64, |a, &b| if b.abs() > a.abs() { b } else { a }) < 0.0 {
            -1.0
        } else {
            1.0
        };
        Some(v.iter().map(|c| sign * c).collect())
    } else {
        None
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Newton–Raphson with step halving, started at zero.
pub fn newton_mle(
    risk: &RiskStructure,
    x: &DMatrix<f64>,
    ties: Ties,
    options: &NewtonOptions,
) -> Result<MleResult> {
    let p = x.ncols();
    if p == 0 {
        return Err(Error::Validation("at least one covariate is required".into()));
    }
    let mut beta = DVector::zeros(p);
    let mut cur = loglik_grad_hess(beta.as_slice(), risk, x, ties)?;
    if let Some(direction) = singular_direction(&(-&cur.hessian)) {
        return Err(Error::SingularInformation { direction });
    }
    let mut n_iter = 0;
    let mut diagnostic = None;
    let mut converged = false;
    while n_iter < options.max_iter {
        if cur.gradient.amax() < options.tol {
            converged = true;
            break;
        }
        n_iter += 1;
        let info = -&cur.hessian;
        let step = match info.clone().cholesky() {
            Some(ch) => ch.solve(&cur.gradient),
            None => {
                diagnostic = Some(format!("information not positive definite at iteration {n_iter}"));
                break;
            }
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let cand = &beta + &step * t;
            if let Ok(next) = loglik_grad_hess(cand.as_slice(), risk, x, ties) {
                if next.value >= cur.value - 1e-12 * cur.value.abs().max(1.0) {
                    accepted = Some((cand, next));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, next)) = accepted else {
            diagnostic = Some(format!("step halving failed at iteration {n_iter}"));
            break;
        };
        beta = cand;
        cur = next;
        if beta.norm() > options.beta_bound {
            diagnostic = Some(format!(
                "coefficient norm {:.3} exceeds {}: monotone likelihood",
                beta.norm(),
                options.beta_bound
            ));
            break;
        }
    }
    if !converged && diagnostic.is_none() {
        converged = cur.gradient.amax() < options.tol;
        if !converged {
            diagnostic = Some(format!("no convergence within {} iterations", options.max_iter));
        }
    }
    let info = -&cur.hessian;
    if converged {
        let lmin = min_eigenvalue(&info);
        if lmin < options.min_information {
            converged = false;
            diagnostic = Some(format!(
                "information eigenvalue {lmin:.3e} vanishes at the optimum: monotone likelihood"
            ));
        }
    }
    let cov = info
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| DMatrix::from_element(p, p, f64::NAN));
    Ok(MleResult {
        beta_hat: beta.as_slice().to_vec(),
        covariance: (0..p).map(|j| cov.row(j).iter().copied().collect()).collect(),
        loglik: cur.value,
        converged,
        n_iter,
        ties,
        diagnostic,
    })
}
