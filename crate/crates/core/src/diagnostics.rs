//! Posterior summaries, effective sample size and DIC.

use std::fmt::Write as _;

use serde::Serialize;

use crate::draws::{ParamKind, PosteriorDraws};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub kind: ParamKind,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    /// `exp` of mean and interval endpoints, for hazard coefficients only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hazard_ratio: Option<HazardRatio>,
    pub ess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HazardRatio {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wall-clock figures, kept apart so the rest of a summary is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub seconds: f64,
    pub ess_per_sec: Vec<f64>,
    pub median_ess_per_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub n_draws: usize,
    pub params: Vec<ParamSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl PosteriorSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn without_timing(&self) -> Self {
        Self {
            timing: None,
            ..self.clone()
        }
    }

    /// Aligned text table with `HR [low, high]` for hazard coefficients.
    pub fn table(&self) -> String {
        let width = self.params.iter().map(|p| p.name.len()).max().unwrap_or(9).max(9);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>8}  {:>21}  {:>26}  {:>8}",
            "parameter", "mean", "sd", "95% interval", "HR [95% interval]", "ESS"
        );
        for p in &self.params {
            let hr = match p.hazard_ratio {
                Some(h) => format!("{:.3} [{:.3}, {:.3}]", h.estimate, h.lower, h.upper),
                None => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>8.4}  {:>21}  {:>26}  {:>8.1}",
                p.name,
                p.mean,
                p.sd,
                format!("[{:.4}, {:.4}]", p.lower, p.upper),
                hr,
                p.ess
            );
        }
        out
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, f64::NAN);
    }
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

pub fn summarize(draws: &PosteriorDraws) -> Result<PosteriorSummary> {
    if draws.n_draws() < 2 {
        return Err(Error::Validation(format!(
            "at least 2 retained draws are needed, got {}",
            draws.n_draws()
        )));
    }
    let mut params = Vec::with_capacity(draws.n_params());
    for j in 0..draws.n_params() {
        let col = draws.column(j);
        let (mean, sd) = mean_sd(&col);
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        let lower = quantile_sorted(&sorted, 0.025);
        let upper = quantile_sorted(&sorted, 0.975);
        let kind = draws.kinds()[j];
        let hazard_ratio = kind.is_hazard_coefficient().then(|| HazardRatio {
            estimate: mean.exp(),
            lower: lower.exp(),
            upper: upper.exp(),
        });
        params.push(ParamSummary {
            name: draws.names()[j].clone(),
            kind,
            mean,
            sd,
            lower,
            upper,
            hazard_ratio,
            ess: ess(&col),
        });
    }
    let seconds = draws.elapsed.as_secs_f64();
    let timing = (seconds > 0.0).then(|| {
        let ess_per_sec: Vec<f64> = params.iter().map(|p| p.ess / seconds).collect();
        Timing {
            seconds,
            median_ess_per_sec: median(&ess_per_sec),
            ess_per_sec,
        }
    });
    Ok(PosteriorSummary {
        n_draws: draws.n_draws(),
        params,
        timing,
    })
}

pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

/// Effective sample size by Geyer's initial monotone positive sequence.
///
/// A chain with zero variance has ESS equal to its length.
pub fn ess(chain: &[f64]) -> f64 {
    let n = chain.len();
    if n < 4 {
        return n as f64;
    }
    let nf = n as f64;
    if chain.iter().all(|&v| v == chain[0]) {
        return nf;
    }
    let m = chain.iter().sum::<f64>() / nf;
    let c: Vec<f64> = chain.iter().map(|v| v - m).collect();
    let gamma0 = c.iter().map(|v| v * v).sum::<f64>() / nf;
    if !(gamma0 > 0.0) {
        return nf;
    }
    let rho = |k: usize| -> f64 {
        c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / nf / gamma0
    };
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    (nf / tau.max(1e-12)).min(nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dic {
    pub dic: f64,
    pub p_d: f64,
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
}

/// DIC from per-draw log-likelihoods and the log-likelihood at the posterior mean.
pub fn dic(loglik_draws: &[f64], loglik_at_mean: f64) -> Result<Dic> {
    if loglik_draws.is_empty() {
        return Err(Error::Validation("no log-likelihood draws".into()));
    }
    if !loglik_at_mean.is_finite() || loglik_draws.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("log-likelihood input to DIC".into()));
    }
    let mean_deviance = -2.0 * loglik_draws.iter().sum::<f64>() / loglik_draws.len() as f64;
    let deviance_at_mean = -2.0 * loglik_at_mean;
    let p_d = mean_deviance - deviance_at_mean;
    Ok(Dic {
        dic: deviance_at_mean + 2.0 * p_d,
        p_d,
        mean_deviance,
        deviance_at_mean,
    })
}
