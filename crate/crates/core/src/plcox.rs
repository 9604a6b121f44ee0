//! Plackett–Luce Cox model.
//!
//! Each distinct event time contributes `prod_{E_r} lambda_i / (sum_{R_r} lambda_j)^{d_r}`
//! with `lambda_i = exp(x_i' beta)`, which is Breslow's partial likelihood.
//! The sampler introduces `Z_r ~ Gamma(d_r, sum_{R_r} lambda_j)` so that each
//! subject's kernel becomes Poisson with mean `zeta_i lambda_i`, replaces the
//! Poisson by a negative binomial with concentration `delta`, and augments
//! that with `omega_i ~ PG(c_i + delta, psi_i)` for a Gaussian coefficient
//! update. The gamma mixing variables of the negative binomial are integrated
//! out and never stored.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::gibbs::{coefficient_kinds, run_chain, AugmentedSampler, ChainSettings, Design, NormalPrior};
use crate::randkit::{sample_gamma, PolyaGamma, SimRng};
use crate::survdata::{RiskStructure, SurvivalDataset};

#[derive(Debug, Clone)]
pub struct PLCoxConfig {
    /// Negative-binomial concentration; larger values approach the Poisson kernel.
    pub delta: f64,
    pub prior: NormalPrior,
    pub chain: ChainSettings,
    pub pg: PolyaGamma,
    /// Bound on `|psi_i|` applied before PG sampling.
    pub psi_bound: f64,
}

impl PLCoxConfig {
    /// `delta = 10`, independent `N(0, 100)` priors, 3000 sweeps with 1000 burn-in.
    pub fn new(p: usize) -> Result<Self> {
        Ok(Self {
            delta: 10.0,
            prior: NormalPrior::isotropic(p, 10.0)?,
            chain: ChainSettings::default(),
            pg: PolyaGamma::default(),
            psi_bound: 700.0,
        })
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Validation(format!("delta must be positive, got {}", self.delta)));
        }
        if self.prior.dim() != p {
            return Err(Error::Validation(format!(
                "prior has dimension {}, design has {p} columns",
                self.prior.dim()
            )));
        }
        self.chain.validate()
    }
}

/// Log of the PL (Breslow) likelihood at linear predictor `eta`.
pub fn pl_loglik_eta(eta: &[f64], risk: &RiskStructure) -> f64 {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|&e| (e - m).exp()).collect();
    let sums = risk.risk_sums(&w);
    let mut ll = 0.0;
    for (r, s) in sums.iter().enumerate() {
        let events = risk.event_set(r);
        let num: f64 = events.iter().map(|&i| eta[i]).sum();
        ll += num - events.len() as f64 * (s.ln() + m);
    }
    ll
}

/// Log of the PL (Breslow) likelihood at `beta`.
pub fn pl_loglik(beta: &[f64], risk: &RiskStructure, x: &DMatrix<f64>) -> Result<f64> {
    let eta = linear_predictor(beta, risk, x)?;
    Ok(pl_loglik_eta(&eta, risk))
}

pub(crate) fn linear_predictor(beta: &[f64], risk: &RiskStructure, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != beta.len() || x.nrows() != risk.n() {
        return Err(Error::Validation(format!(
            "design is {}x{}, beta has {} entries, risk structure has {} subjects",
            x.nrows(),
            x.ncols(),
            beta.len(),
            risk.n()
        )));
    }
    let eta = x * DVector::from_column_slice(beta);
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear predictor".into()));
    }
    Ok(eta.as_slice().to_vec())
}

/// Current values of every quantity in the PL-Cox sweep.
#[derive(Debug, Clone, Serialize)]
pub struct PLCoxState {
    pub beta: Vec<f64>,
    /// `x_i' beta` plus any additive offset.
    pub eta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub z: Vec<f64>,
    pub zeta: Vec<f64>,
    pub psi: Vec<f64>,
    pub kappa: Vec<f64>,
    pub offset: Vec<f64>,
    pub omega: Vec<f64>,
    pub extra: Vec<f64>,
}

pub struct PlSampler<'a> {
    design: Design,
    risk: &'a RiskStructure,
    delta: f64,
    prior: NormalPrior,
    pg: PolyaGamma,
    psi_bound: f64,
    has_intercept: bool,
    beta: DVector<f64>,
    state: PLCoxState,
    clamped: u64,
}

impl<'a> PlSampler<'a> {
    /// Starts at the prior mean with `Z` drawn once from its full conditional.
    pub fn new(
        ds: &SurvivalDataset,
        risk: &'a RiskStructure,
        config: &PLCoxConfig,
        rng: &mut SimRng,
    ) -> Result<Self> {
        config.validate(ds.p())?;
        if risk.n() != ds.n() {
            return Err(Error::Validation("risk structure does not match dataset".into()));
        }
        let n = ds.n();
        let beta = config.prior.mean().clone();
        let mut s = Self {
            design: Design::new(ds.covariates()),
            risk,
            delta: config.delta,
            prior: config.prior.clone(),
            pg: config.pg,
            psi_bound: config.psi_bound,
            has_intercept: ds.has_intercept(),
            state: PLCoxState {
                beta: beta.as_slice().to_vec(),
                eta: vec![0.0; n],
                lambda: vec![0.0; n],
                z: vec![0.0; risk.n_distinct()],
                zeta: vec![0.0; n],
                psi: vec![0.0; n],
                kappa: vec![0.0; n],
                offset: vec![0.0; n],
                omega: vec![0.0; n],
                extra: vec![0.0; n],
            },
            beta,
            clamped: 0,
        };
        s.refresh_predictor();
        s.update_z(rng)?;
        Ok(s)
    }

    pub fn state(&self) -> &PLCoxState {
        &self.state
    }

    fn refresh_predictor(&mut self) {
        let st = &mut self.state;
        st.beta.copy_from_slice(self.beta.as_slice());
        self.design.predictor_into(self.beta.as_slice(), &mut st.eta);
        for i in 0..st.eta.len() {
            st.eta[i] += st.extra[i];
            st.lambda[i] = st.eta[i].exp();
            st.psi[i] = st.eta[i] + st.offset[i];
        }
    }

    /// Recomputes `zeta`, offsets and `kappa` from the current `z`.
    fn refresh_latent(&mut self) -> Result<()> {
        let st = &mut self.state;
        self.risk.membership_sums_into(&st.z, &mut st.zeta);
        for i in 0..st.zeta.len() {
            if self.risk.in_any_risk_set(i) {
                if !(st.zeta[i] > 0.0) || !st.zeta[i].is_finite() {
                    return Err(Error::NonFinite(format!("zeta[{i}] = {}", st.zeta[i])));
                }
                st.offset[i] = (st.zeta[i] / self.delta).ln();
                st.kappa[i] = (self.risk.event_count(i) as f64 - self.delta) / 2.0;
            } else {
                st.offset[i] = 0.0;
                st.kappa[i] = 0.0;
            }
            st.psi[i] = st.eta[i] + st.offset[i];
        }
        Ok(())
    }

    /// `Z_r ~ Gamma(d_r, sum_{R_r} lambda_j)`, then `zeta` by prefix sums.
    pub fn update_z(&mut self, rng: &mut SimRng) -> Result<()> {
        let sums = self.risk.risk_sums(&self.state.lambda);
        for (r, &a) in sums.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 {
                return Err(Error::NonFinite(format!(
                    "risk-set sum {a} at event time {r}; coefficients diverged"
                )));
            }
            self.state.z[r] = sample_gamma(self.risk.tie_count(r) as f64, a, rng)?;
        }
        self.refresh_latent()
    }

    /// Replaces `Z` directly and refreshes the dependent quantities.
    pub fn set_z(&mut self, z: Vec<f64>) -> Result<()> {
        if z.len() != self.risk.n_distinct() || z.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Validation("z must hold one positive value per event time".into()));
        }
        self.state.z = z;
        self.refresh_latent()
    }

    /// `omega_i ~ PG(c_i + delta, psi_i)`; zero for subjects in no risk set.
    pub fn update_omega(&mut self, rng: &mut SimRng) -> Result<()> {
        let st = &mut self.state;
        for i in 0..st.omega.len() {
            if !self.risk.in_any_risk_set(i) {
                st.omega[i] = 0.0;
                continue;
            }
            let mut psi = st.psi[i];
            if !psi.is_finite() {
                return Err(Error::NonFinite(format!("psi[{i}]")));
            }
            if psi.abs() > self.psi_bound {
                psi = psi.clamp(-self.psi_bound, self.psi_bound);
                self.clamped += 1;
            }
            let shape = self.risk.event_count(i) as f64 + self.delta;
            st.omega[i] = self.pg.sample_unchecked(shape, psi, rng);
        }
        Ok(())
    }

    /// `beta ~ N(B^{-1} g, B^{-1})`, `B = X' Omega X + V0^{-1}`,
    /// `g = X' (kappa - Omega (o + extra)) + V0^{-1} b0`.
    pub fn update_beta(&mut self, rng: &mut SimRng) -> Result<()> {
        let st = &self.state;
        let resid: Vec<f64> = (0..st.omega.len())
            .map(|i| st.kappa[i] - st.omega[i] * (st.offset[i] + st.extra[i]))
            .collect();
        self.beta = self
            .design
            .draw_coefficients(&st.omega, &resid, &self.prior, rng)?;
        self.refresh_predictor();
        Ok(())
    }
}

impl AugmentedSampler for PlSampler<'_> {
    fn design(&self) -> &Design {
        &self.design
    }

    fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    fn update_latent(&mut self, rng: &mut SimRng) -> Result<()> {
        self.update_z(rng)
    }

    fn update_omega(&mut self, rng: &mut SimRng) -> Result<()> {
        PlSampler::update_omega(self, rng)
    }

    fn update_beta(&mut self, rng: &mut SimRng) -> Result<()> {
        PlSampler::update_beta(self, rng)
    }

    fn omega(&self) -> &[f64] {
        &self.state.omega
    }

    fn kappa(&self) -> &[f64] {
        &self.state.kappa
    }

    fn model_offset(&self) -> &[f64] {
        &self.state.offset
    }

    fn fixed_predictor(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.design.n()];
        self.design.predictor_into(self.beta.as_slice(), &mut out);
        out
    }

    fn set_extra(&mut self, extra: &[f64]) {
        self.state.extra.copy_from_slice(extra);
        self.refresh_predictor();
    }

    fn shift_intercept(&mut self, shift: f64) {
        if self.has_intercept {
            self.beta[0] += shift;
            self.refresh_predictor();
        }
    }

    fn loglik(&self) -> f64 {
        pl_loglik_eta(&self.state.eta, self.risk)
    }

    fn clamped(&self) -> u64 {
        self.clamped
    }
}

/// Runs the PL-Cox Gibbs sampler. The dataset must carry an intercept column.
pub fn run_pl_gibbs(
    ds: &SurvivalDataset,
    risk: &RiskStructure,
    config: &PLCoxConfig,
) -> Result<PosteriorDraws> {
    if !ds.has_intercept() {
        return Err(Error::Validation(
            "PL-Cox fits require an intercept column (call with_intercept)".into(),
        ));
    }
    let mut init_rng = config.chain.stream.fork(0x504c_494e_4954).rng();
    let mut sampler = PlSampler::new(ds, risk, config, &mut init_rng)?;
    let names = ds.covariate_names().to_vec();
    let kinds = coefficient_kinds(&names, true);
    run_chain(&mut sampler, &config.chain, names, kinds)
}
