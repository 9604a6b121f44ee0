use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::Rng;

use super::scenario::{Censoring, Coarsening, Family, HazardShape, ScenarioSpec};
use crate::error::{Error, Result};
use crate::randkit::{standard_normal, SimRng};
use crate::survdata::{coarsen_grid, coarsen_round, SurvivalDataset};

/// Latent event and censoring times before observation.
#[derive(Debug, Clone)]
pub struct LatentSample {
    pub covariates: DMatrix<f64>,
    /// `f64::INFINITY` where no event occurs within the follow-up.
    pub event_times: Vec<f64>,
    pub censor_times: Vec<f64>,
}

fn covariates(n: usize, p: usize, rng: &mut SimRng) -> DMatrix<f64> {
    // row by row so that a subject's covariates are drawn together
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = standard_normal(rng);
        }
    }
    x
}

fn linpred(x: &DMatrix<f64>, beta: &[f64], i: usize) -> f64 {
    beta.iter().enumerate().map(|(j, b)| x[(i, j)] * b).sum()
}

fn censor_time(c: Censoring, rng: &mut SimRng) -> f64 {
    match c {
        Censoring::None => f64::INFINITY,
        Censoring::Uniform { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
        Censoring::DiscreteUniform { max } => rng.random_range(1..=max) as f64,
    }
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draws `n` subjects from the scenario's mechanism without coarsening.
pub fn latent(spec: &ScenarioSpec, n: usize, rng: &mut SimRng) -> Result<LatentSample> {
    spec.validate()?;
    let beta = &spec.beta_true;
    let x = covariates(n, beta.len(), rng);
    let censoring = spec.censoring();
    let mut event_times = Vec::with_capacity(n);
    let mut censor_times = Vec::with_capacity(n);
    for i in 0..n {
        let eta = linpred(&x, beta, i);
        let c = censor_time(censoring, rng);
        let t = match spec.family {
            Family::WeibullPh { shape, scale } => {
                let e: f64 = -rng.sample::<f64, _>(Open01).ln();
                scale * (-eta / shape).exp() * e.powf(1.0 / shape)
            }
            Family::LognormalNph { mu, sigma } => (mu.ln() - eta + sigma * standard_normal(rng)).exp(),
            Family::DiscreteLogistic { alpha0, hazard, t_max } => {
                // trials beyond the censoring time cannot be observed
                let last = if c.is_finite() { (c as u32).min(t_max) } else { t_max };
                let span = (t_max.max(2) - 1) as f64;
                let mut t = f64::INFINITY;
                for s in 1..=last {
                    let frac = (s - 1) as f64 / span;
                    let alpha = match hazard {
                        HazardShape::Constant => alpha0,
                        HazardShape::Decreasing => alpha0 + 1.2 * (1.0 - frac),
                        HazardShape::Increasing => alpha0 + 1.2 * frac,
                    };
                    if rng.random::<f64>() < expit(alpha + eta) {
                        t = s as f64;
                        break;
                    }
                }
                t
            }
        };
        event_times.push(t);
        censor_times.push(c);
    }
    // the discrete design ends follow-up at t_max
    if let Family::DiscreteLogistic { t_max, .. } = spec.family {
        for c in censor_times.iter_mut() {
            *c = c.min(t_max as f64);
        }
    }
    Ok(LatentSample {
        covariates: x,
        event_times,
        censor_times,
    })
}

/// Applies censoring and coarsening and builds the dataset (no intercept).
pub fn observe(sample: LatentSample, coarsening: Coarsening) -> Result<SurvivalDataset> {
    let LatentSample {
        covariates,
        event_times,
        censor_times,
    } = sample;
    let (times, events) = match coarsening {
        Coarsening::None | Coarsening::Round { .. } => {
            let mut times = Vec::with_capacity(event_times.len());
            let mut events = Vec::with_capacity(event_times.len());
            for (&t, &c) in event_times.iter().zip(&censor_times) {
                times.push(t.min(c));
                events.push(t <= c);
            }
            if let Coarsening::Round { width } = coarsening {
                times = coarsen_round(&times, width)?;
            }
            (times, events)
        }
        Coarsening::Grid { width } => coarsen_grid(&event_times, &censor_times, width)?,
    };
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Validation(
            "uncensored design produced subjects without events; add censoring".into(),
        ));
    }
    let names = (1..=covariates.ncols()).map(|j| format!("x{j}")).collect();
    SurvivalDataset::new(times, events, covariates, names)
}

/// Generates one observed dataset of `spec.n` subjects.
pub fn generate(spec: &ScenarioSpec, rng: &mut SimRng) -> Result<SurvivalDataset> {
    observe(latent(spec, spec.n, rng)?, spec.coarsening())
}

pub fn gen_weibull_ph(spec: &ScenarioSpec, rng: &mut SimRng) -> Result<SurvivalDataset> {
    require(spec, matches!(spec.family, Family::WeibullPh { .. }), "weibull_ph")?;
    generate(spec, rng)
}

pub fn gen_discrete_logistic(spec: &ScenarioSpec, rng: &mut SimRng) -> Result<SurvivalDataset> {
    require(spec, matches!(spec.family, Family::DiscreteLogistic { .. }), "discrete_logistic")?;
    generate(spec, rng)
}

pub fn gen_lognormal_nph(spec: &ScenarioSpec, rng: &mut SimRng) -> Result<SurvivalDataset> {
    require(spec, matches!(spec.family, Family::LognormalNph { .. }), "lognormal_nph")?;
    generate(spec, rng)
}

fn require(spec: &ScenarioSpec, ok: bool, kind: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("expected a {kind} family, got {:?}", spec.family)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{newton_mle, NewtonOptions, Ties};
    use crate::randkit::RngStream;
    use crate::survdata::RiskStructure;

    fn rng(seed: u64) -> SimRng {
        RngStream::new(seed, 0).rng()
    }

    #[test]
    fn exponential_mean_equals_scale() {
        let mut spec = ScenarioSpec::new(Family::weibull(1.0, 10.0));
        spec.beta_true = vec![0.0];
        spec.censoring = Some(Censoring::None);
        let n = 100_000;
        let s = latent(&spec, n, &mut rng(1)).unwrap();
        let m = s.event_times.iter().sum::<f64>() / n as f64;
        assert!((m - 10.0).abs() < 4.0 * 10.0 / (n as f64).sqrt());
    }

    #[test]
    fn lognormal_median_is_mu() {
        let mut spec = ScenarioSpec::new(Family::lognormal(60.0, 0.6));
        spec.beta_true = vec![0.0];
        let n = 40_000;
        let mut t = latent(&spec, n, &mut rng(2)).unwrap().event_times;
        t.sort_by(f64::total_cmp);
        let med = t[n / 2];
        assert!((med / 60.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn vanishing_discrete_hazard_censors_everyone() {
        let mut spec = ScenarioSpec::new(Family::discrete(-20.0, HazardShape::Constant, 300));
        spec.beta_true = vec![0.0];
        spec.coarsening = Some(Coarsening::Grid { width: 1 });
        spec.n = 2000;
        let ds = generate(&spec, &mut rng(3)).unwrap();
        assert!(ds.n_events() <= 1);
        assert!(ds.times().iter().all(|&t| (1.0..=300.0).contains(&t) && t.fract() == 0.0));
    }

    #[test]
    fn grid_coarsened_events_on_grid() {
        let mut spec = ScenarioSpec::new(Family::discrete(-5.0, HazardShape::Increasing, 300));
        spec.coarsening = Some(Coarsening::Grid { width: 28 });
        let ds = generate(&spec, &mut rng(4)).unwrap();
        assert!(ds.n_events() > 0);
        for (t, e) in ds.times().iter().zip(ds.events()) {
            if *e {
                assert_eq!(t % 28.0, 0.0);
            }
        }
    }

    #[test]
    fn censoring_independent_of_covariates() {
        let spec = ScenarioSpec::new(Family::weibull(1.0, 10.0));
        let n = 50_000;
        let s = latent(&spec, n, &mut rng(5)).unwrap();
        let c = &s.censor_times;
        let cm = c.iter().sum::<f64>() / n as f64;
        for j in 0..4 {
            let x = s.covariates.column(j);
            let xm = x.mean();
            let cov: f64 = (0..n).map(|i| (c[i] - cm) * (x[i] - xm)).sum();
            let sc = (c.iter().map(|v| (v - cm).powi(2)).sum::<f64>()
                * x.iter().map(|v| (v - xm).powi(2)).sum::<f64>())
            .sqrt();
            assert!((cov / sc).abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn weibull_large_n_mle_recovers_coefficients() {
        let mut spec = ScenarioSpec::new(Family::weibull(0.7, 8.0));
        spec.n = 20_000;
        let ds = generate(&spec, &mut rng(6)).unwrap();
        let rs = RiskStructure::build(&ds).unwrap();
        let fit = newton_mle(&rs, ds.covariates(), Ties::Breslow, &NewtonOptions::default()).unwrap();
        for (b, t) in fit.beta_hat.iter().zip(&spec.beta_true) {
            assert!((b - t).abs() < 0.04, "{:?}", fit.beta_hat);
        }
    }

    #[test]
    fn family_checked_by_named_generators() {
        let spec = ScenarioSpec::new(Family::weibull(1.0, 10.0));
        assert!(gen_lognormal_nph(&spec, &mut rng(7)).is_err());
        assert!(gen_weibull_ph(&spec, &mut rng(7)).is_ok());
    }
}
