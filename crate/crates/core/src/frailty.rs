//! Shared log-normal frailty for the PL-Cox and GPL-Cox samplers.
//!
//! The linear predictor becomes `x_i' beta + u_{g(i)}` with
//! `u_g ~ N(0, sigma_u^2)` and `sigma_u^2 ~ InvGamma(a0, b0)`. Given the
//! PG weights both blocks are conjugate. Under PL-Cox the likelihood is
//! invariant to a common shift of `u`, so the frailties are recentred every
//! sweep and the mean moved into the intercept; GPL-Cox is not shift
//! invariant and relies on the prior alone.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::draws::{ParamKind, PosteriorDraws, SamplerStats};
use crate::error::{Error, Result};
use crate::gibbs::{coefficient_kinds, AugmentedSampler, FailureGuard};
use crate::gplcox::{gpl_loglik_eta, GPLCoxConfig, GplSampler};
use crate::plcox::{pl_loglik_eta, PLCoxConfig, PlSampler};
use crate::randkit::{sample_gamma, standard_normal, SimRng};
use crate::survdata::{RiskStructure, SurvivalDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Pl,
    Gpl,
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pl" => Ok(Model::Pl),
            "gpl" => Ok(Model::Gpl),
            other => Err(Error::Validation(format!("unknown model '{other}' (expected pl or gpl)"))),
        }
    }
}

impl Model {
    pub fn loglik_eta(self, eta: &[f64], risk: &RiskStructure) -> f64 {
        match self {
            Model::Pl => pl_loglik_eta(eta, risk),
            Model::Gpl => gpl_loglik_eta(eta, risk),
        }
    }
}

#[derive(Debug, Clone)]
pub enum BaseConfig {
    Pl(PLCoxConfig),
    Gpl(GPLCoxConfig),
}

impl BaseConfig {
    pub fn model(&self) -> Model {
        match self {
            BaseConfig::Pl(_) => Model::Pl,
            BaseConfig::Gpl(_) => Model::Gpl,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrailtyConfig {
    pub variance_prior_shape: f64,
    pub variance_prior_rate: f64,
    pub base: BaseConfig,
    /// Starting value of `sigma_u^2`.
    pub initial_variance: f64,
    /// Holds `sigma_u^2` at this value instead of sampling it.
    pub fixed_variance: Option<f64>,
}

impl FrailtyConfig {
    /// `InvGamma(0.01, 0.01)` on the frailty variance.
    pub fn new(base: BaseConfig) -> Self {
        Self {
            variance_prior_shape: 0.01,
            variance_prior_rate: 0.01,
            base,
            initial_variance: 1.0,
            fixed_variance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.variance_prior_shape) || !ok(self.variance_prior_rate) {
            return Err(Error::Validation(
                "frailty variance prior shape and rate must be positive".into(),
            ));
        }
        if !ok(self.initial_variance) || self.fixed_variance.is_some_and(|v| !ok(v)) {
            return Err(Error::Validation("frailty variance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrailtyState {
    pub u: Vec<f64>,
    pub sigma2_u: f64,
    /// Cluster index `g(i)` of each subject.
    pub cluster_index: Vec<usize>,
    /// Original label of each cluster index.
    pub labels: Vec<u64>,
}

impl FrailtyState {
    pub fn from_labels(clusters: &[u64], sigma2_u: f64) -> Self {
        let mut map = BTreeMap::new();
        for &c in clusters {
            let next = map.len();
            map.entry(c).or_insert(next);
        }
        // index clusters in label order
        let labels: Vec<u64> = map.keys().copied().collect();
        let index: BTreeMap<u64, usize> = labels.iter().enumerate().map(|(k, &l)| (l, k)).collect();
        Self {
            u: vec![0.0; labels.len()],
            sigma2_u,
            cluster_index: clusters.iter().map(|c| index[c]).collect(),
            labels,
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.u.len()
    }

    pub fn subject_effects(&self) -> Vec<f64> {
        self.cluster_index.iter().map(|&g| self.u[g]).collect()
    }
}

/// Draws each `u_g` from its Gaussian full conditional given PG weights,
/// `kappa`, the model offset `o` and the fixed predictor `x' beta`.
pub fn update_frailty(
    state: &mut FrailtyState,
    omega: &[f64],
    kappa: &[f64],
    offset: &[f64],
    fixed: &[f64],
    rng: &mut SimRng,
) {
    let g = state.n_clusters();
    let mut prec = vec![1.0 / state.sigma2_u; g];
    let mut lin = vec![0.0; g];
    for (i, &c) in state.cluster_index.iter().enumerate() {
        prec[c] += omega[i];
        lin[c] += kappa[i] - omega[i] * (fixed[i] + offset[i]);
    }
    for c in 0..g {
        let mean = lin[c] / prec[c];
        state.u[c] = mean + standard_normal(rng) / prec[c].sqrt();
    }
}

/// `sigma_u^2 ~ InvGamma(a0 + G/2, b0 + sum u_g^2 / 2)`.
pub fn update_frailty_variance(state: &mut FrailtyState, config: &FrailtyConfig, rng: &mut SimRng) -> Result<()> {
    if let Some(v) = config.fixed_variance {
        state.sigma2_u = v;
        return Ok(());
    }
    let (shape, rate) = variance_posterior(state, config);
    let prec = sample_gamma(shape, rate, rng)?;
    state.sigma2_u = 1.0 / prec;
    if !state.sigma2_u.is_finite() {
        return Err(Error::NonFinite("frailty variance".into()));
    }
    Ok(())
}

/// Shape and rate of the inverse-gamma full conditional of `sigma_u^2`.
pub fn variance_posterior(state: &FrailtyState, config: &FrailtyConfig) -> (f64, f64) {
    let ss: f64 = state.u.iter().map(|u| u * u).sum();
    (
        config.variance_prior_shape + state.n_clusters() as f64 / 2.0,
        config.variance_prior_rate + ss / 2.0,
    )
}

/// Runs the frailty Gibbs sampler on top of the chosen base model.
///
/// Draws hold the coefficients, one `u[label]` per cluster, then
/// `frailty_variance`. Log-likelihoods are conditional on the frailties.
pub fn run_frailty_gibbs(
    ds: &SurvivalDataset,
    risk: &RiskStructure,
    config: &FrailtyConfig,
) -> Result<PosteriorDraws> {
    config.validate()?;
    let clusters = ds
        .clusters()
        .ok_or_else(|| Error::Validation("frailty model requires cluster labels".into()))?;
    if !ds.has_intercept() {
        return Err(Error::Validation(
            "frailty fits require an intercept column (call with_intercept)".into(),
        ));
    }
    let state = FrailtyState::from_labels(clusters, config.fixed_variance.unwrap_or(config.initial_variance));
    match &config.base {
        BaseConfig::Pl(c) => {
            let mut init = c.chain.stream.fork(0x4652_504c).rng();
            let mut s = PlSampler::new(ds, risk, c, &mut init)?;
            frailty_chain(&mut s, ds, state, config, &c.chain, true)
        }
        BaseConfig::Gpl(c) => {
            let mut init = c.chain.stream.fork(0x4652_4750).rng();
            let mut s = GplSampler::new(ds, risk, c, &mut init)?;
            frailty_chain(&mut s, ds, state, config, &c.chain, false)
        }
    }
}

fn frailty_chain<S: AugmentedSampler>(
    sampler: &mut S,
    ds: &SurvivalDataset,
    mut state: FrailtyState,
    config: &FrailtyConfig,
    chain: &crate::gibbs::ChainSettings,
    recentre: bool,
) -> Result<PosteriorDraws> {
    let start = Instant::now();
    let mut names = ds.covariate_names().to_vec();
    let mut kinds = coefficient_kinds(&names, true);
    names.extend(state.labels.iter().map(|l| format!("u[{l}]")));
    kinds.extend(std::iter::repeat_n(ParamKind::Frailty, state.n_clusters()));
    names.push("frailty_variance".into());
    kinds.push(ParamKind::FrailtyVariance);
    let mut draws = PosteriorDraws::new(names, kinds);

    let mut rng = chain.stream.rng();
    let mut guard = FailureGuard::new(chain.max_failures);
    let mut row = Vec::with_capacity(draws.n_params());
    for it in 1..=chain.n_iter {
        sampler.update_latent(&mut rng)?;
        sampler.update_omega(&mut rng)?;
        let outcome = sampler.update_beta(&mut rng);
        guard.check(it, outcome)?;

        let fixed = sampler.fixed_predictor();
        update_frailty(
            &mut state,
            sampler.omega(),
            sampler.kappa(),
            sampler.model_offset(),
            &fixed,
            &mut rng,
        );
        if recentre {
            let mean = state.u.iter().sum::<f64>() / state.n_clusters() as f64;
            state.u.iter_mut().for_each(|u| *u -= mean);
            sampler.shift_intercept(mean);
        }
        sampler.set_extra(&state.subject_effects());
        update_frailty_variance(&mut state, config, &mut rng)?;

        if chain.keeps(it) {
            row.clear();
            row.extend_from_slice(sampler.beta().as_slice());
            row.extend_from_slice(&state.u);
            row.push(state.sigma2_u);
            draws.push(it, &row, sampler.loglik());
        }
    }
    draws.elapsed = start.elapsed();
    draws.stats = SamplerStats {
        clamped: sampler.clamped(),
        failed_updates: guard.total,
    };
    Ok(draws)
}

/// Model log-likelihood at the posterior mean of the coefficients and,
/// when present, of the frailties. This is the DIC plug-in.
pub fn loglik_at_posterior_mean(
    ds: &SurvivalDataset,
    risk: &RiskStructure,
    draws: &PosteriorDraws,
    model: Model,
) -> Result<f64> {
    let means = draws.means();
    let p = ds.p();
    if means.len() < p {
        return Err(Error::Validation("draws do not match the design".into()));
    }
    let x = ds.covariates();
    let mut eta: Vec<f64> = (0..ds.n())
        .map(|i| (0..p).map(|j| x[(i, j)] * means[j]).sum())
        .collect();
    let frailty = draws.indices_of(ParamKind::Frailty);
    if !frailty.is_empty() {
        let clusters = ds
            .clusters()
            .ok_or_else(|| Error::Validation("frailty draws without cluster labels".into()))?;
        let st = FrailtyState::from_labels(clusters, 1.0);
        if st.n_clusters() != frailty.len() {
            return Err(Error::Validation("cluster count does not match frailty draws".into()));
        }
        for (i, &g) in st.cluster_index.iter().enumerate() {
            eta[i] += means[frailty[g]];
        }
    }
    let ll = model.loglik_eta(&eta, risk);
    if !ll.is_finite() {
        return Err(Error::NonFinite("log-likelihood at posterior mean".into()));
    }
    Ok(ll)
}
