//! Geometric Plackett–Luce Cox model.
//!
//! At each distinct event time the event set is the top bucket of a
//! geometric ranking of the risk set:
//!
//! ```text
//! L_r = prod_{E_r} theta_i * prod_{R_r \ E_r} (1 - theta_i) / (1 - prod_{R_r} (1 - theta_j))
//! ```
//!
//! with `theta_i = expit(x_i' beta)`. A geometric `Z_r` per event time turns
//! the denominator into a product of per-subject terms,
//! `theta_i^{c_i} (1 - theta_i)^{zeta_i - c_i}`, which is a binomial-logit
//! kernel and takes the Pólya–Gamma augmentation exactly.
//!
//! All products over risk sets are accumulated as sums of `log(1 - theta_j)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::gibbs::{coefficient_kinds, run_chain, AugmentedSampler, ChainSettings, Design, NormalPrior};
use crate::plcox::linear_predictor;
use crate::randkit::{sample_geometric_log_complement, PolyaGamma, SimRng};
use crate::survdata::{RiskStructure, SurvivalDataset};

/// `|eta|` beyond which `theta` is held at `1e-12` or `1 - 1e-12` in log terms.
pub const ETA_BOUND: f64 = 27.631_021_115_871_7;

#[derive(Debug, Clone)]
pub struct GPLCoxConfig {
    pub prior: NormalPrior,
    pub chain: ChainSettings,
    pub pg: PolyaGamma,
}

impl GPLCoxConfig {
    /// Independent `N(0, 100)` priors, 3000 sweeps with 1000 burn-in.
    pub fn new(p: usize) -> Result<Self> {
        Ok(Self {
            prior: NormalPrior::isotropic(p, 10.0)?,
            chain: ChainSettings::default(),
            pg: PolyaGamma::default(),
        })
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.prior.dim() != p {
            return Err(Error::Validation(format!(
                "prior has dimension {}, design has {p} columns",
                self.prior.dim()
            )));
        }
        self.chain.validate()
    }
}

/// `log(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 - e^x)` for `x < 0`.
pub(crate) fn log1mexp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `(log theta, log(1 - theta))` with `theta` kept inside `[1e-12, 1 - 1e-12]`.
fn log_theta_pair(eta: f64) -> (f64, f64) {
    let e = eta.clamp(-ETA_BOUND, ETA_BOUND);
    (-softplus(-e), -softplus(e))
}

/// Log of the GPL likelihood at linear predictor `eta`.
pub fn gpl_loglik_eta(eta: &[f64], risk: &RiskStructure) -> f64 {
    let log1m: Vec<f64> = eta.iter().map(|&e| log_theta_pair(e).1).collect();
    let sums = risk.risk_sums(&log1m);
    let mut ll = 0.0;
    for (r, &s) in sums.iter().enumerate() {
        for &i in risk.event_set(r) {
            let (lt, l1m) = log_theta_pair(eta[i]);
            ll += lt - l1m;
        }
        ll += s - log1mexp(s);
    }
    ll
}

pub fn gpl_loglik(beta: &[f64], risk: &RiskStructure, x: &DMatrix<f64>) -> Result<f64> {
    let eta = linear_predictor(beta, risk, x)?;
    Ok(gpl_loglik_eta(&eta, risk))
}

#[derive(Debug, Clone, Serialize)]
pub struct GPLCoxState {
    pub beta: Vec<f64>,
    /// `x_i' beta` plus any additive offset.
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
    pub z: Vec<i64>,
    pub zeta: Vec<i64>,
    pub omega: Vec<f64>,
    pub kappa: Vec<f64>,
    pub extra: Vec<f64>,
}

pub struct GplSampler<'a> {
    design: Design,
    risk: &'a RiskStructure,
    prior: NormalPrior,
    pg: PolyaGamma,
    has_intercept: bool,
    beta: DVector<f64>,
    state: GPLCoxState,
    zeros: Vec<f64>,
    clamped: u64,
}

impl<'a> GplSampler<'a> {
    pub fn new(
        ds: &SurvivalDataset,
        risk: &'a RiskStructure,
        config: &GPLCoxConfig,
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
            prior: config.prior.clone(),
            pg: config.pg,
            has_intercept: ds.has_intercept(),
            state: GPLCoxState {
                beta: beta.as_slice().to_vec(),
                eta: vec![0.0; n],
                theta: vec![0.0; n],
                z: vec![1; risk.n_distinct()],
                zeta: vec![0; n],
                omega: vec![0.0; n],
                kappa: vec![0.0; n],
                extra: vec![0.0; n],
            },
            beta,
            zeros: vec![0.0; n],
            clamped: 0,
        };
        s.refresh_predictor();
        s.update_z(rng)?;
        Ok(s)
    }

    pub fn state(&self) -> &GPLCoxState {
        &self.state
    }

    fn refresh_predictor(&mut self) {
        let st = &mut self.state;
        st.beta.copy_from_slice(self.beta.as_slice());
        self.design.predictor_into(self.beta.as_slice(), &mut st.eta);
        for i in 0..st.eta.len() {
            st.eta[i] += st.extra[i];
            st.theta[i] = 1.0 / (1.0 + (-st.eta[i]).exp());
        }
    }

    fn refresh_latent(&mut self) -> Result<()> {
        let st = &mut self.state;
        self.risk.membership_sums_int(&st.z, &mut st.zeta)?;
        for i in 0..st.zeta.len() {
            st.kappa[i] = self.risk.event_count(i) as f64 - st.zeta[i] as f64 / 2.0;
        }
        Ok(())
    }

    /// `Z_r ~ Geom(1 - prod_{R_r} (1 - theta_j))` through `log(1 - p) = sum log(1 - theta_j)`.
    pub fn update_z(&mut self, rng: &mut SimRng) -> Result<()> {
        let mut log1m = vec![0.0; self.state.eta.len()];
        for (l, &e) in log1m.iter_mut().zip(&self.state.eta) {
            if e.abs() > ETA_BOUND {
                self.clamped += 1;
            }
            *l = log_theta_pair(e).1;
        }
        let sums = self.risk.risk_sums(&log1m);
        for (r, &s) in sums.iter().enumerate() {
            self.state.z[r] = sample_geometric_log_complement(s, rng)?;
        }
        self.refresh_latent()
    }

    pub fn set_z(&mut self, z: Vec<i64>) -> Result<()> {
        if z.len() != self.risk.n_distinct() || z.iter().any(|&v| v < 1) {
            return Err(Error::Validation("z must hold one value >= 1 per event time".into()));
        }
        self.state.z = z;
        self.refresh_latent()
    }

    /// `omega_i ~ PG(zeta_i, eta_i)`, exactly zero when `zeta_i = 0`.
    pub fn update_omega(&mut self, rng: &mut SimRng) -> Result<()> {
        let st = &mut self.state;
        for i in 0..st.omega.len() {
            let b = st.zeta[i];
            st.omega[i] = if b == 0 {
                0.0
            } else {
                let c = st.eta[i];
                if !c.is_finite() {
                    return Err(Error::NonFinite(format!("eta[{i}]")));
                }
                self.pg.sample_unchecked(b as f64, c, rng)
            };
        }
        Ok(())
    }

    /// `beta ~ N(B^{-1} g, B^{-1})`, `B = X' Omega X + V0^{-1}`,
    /// `g = X' (kappa - Omega extra) + V0^{-1} b0`.
    pub fn update_beta(&mut self, rng: &mut SimRng) -> Result<()> {
        let st = &self.state;
        let resid: Vec<f64> = (0..st.omega.len())
            .map(|i| st.kappa[i] - st.omega[i] * st.extra[i])
            .collect();
        self.beta = self
            .design
            .draw_coefficients(&st.omega, &resid, &self.prior, rng)?;
        self.refresh_predictor();
        Ok(())
    }
}

impl AugmentedSampler for GplSampler<'_> {
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
        GplSampler::update_omega(self, rng)
    }

    fn update_beta(&mut self, rng: &mut SimRng) -> Result<()> {
        GplSampler::update_beta(self, rng)
    }

    fn omega(&self) -> &[f64] {
        &self.state.omega
    }

    fn kappa(&self) -> &[f64] {
        &self.state.kappa
    }

    fn model_offset(&self) -> &[f64] {
        &self.zeros
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
        gpl_loglik_eta(&self.state.eta, self.risk)
    }

    fn clamped(&self) -> u64 {
        self.clamped
    }
}

/// Runs the GPL-Cox Gibbs sampler. The dataset must carry an intercept column.
pub fn run_gpl_gibbs(
    ds: &SurvivalDataset,
    risk: &RiskStructure,
    config: &GPLCoxConfig,
) -> Result<PosteriorDraws> {
    if !ds.has_intercept() {
        return Err(Error::Validation(
            "GPL-Cox requires an intercept column (call with_intercept)".into(),
        ));
    }
    let mut init_rng = config.chain.stream.fork(0x4750_4c49_4e49).rng();
    let mut sampler = GplSampler::new(ds, risk, config, &mut init_rng)?;
    let names = ds.covariate_names().to_vec();
    let kinds = coefficient_kinds(&names, true);
    run_chain(&mut sampler, &config.chain, names, kinds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plcox::pl_loglik;
    use crate::randkit::RngStream;
    use crate::survdata::tests::ds5;

    fn expit(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Direct product form of the GPL likelihood with explicit risk-set scans.
    fn brute_gpl(times: &[f64], events: &[bool], eta: &[f64]) -> f64 {
        let mut distinct: Vec<f64> = (0..times.len())
            .filter(|&i| events[i])
            .map(|i| times[i])
            .collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let mut lik = 1.0;
        for t in distinct {
            let mut num = 1.0;
            let mut all_fail = 1.0;
            for j in 0..times.len() {
                if times[j] >= t {
                    let th = expit(eta[j]);
                    all_fail *= 1.0 - th;
                    num *= if events[j] && times[j] == t { th } else { 1.0 - th };
                }
            }
            lik *= num / (1.0 - all_fail);
        }
        lik.ln()
    }

    #[test]
    fn ds5_hand_value() {
        let ds = ds5().with_intercept().unwrap();
        let rs = RiskStructure::build(&ds).unwrap();
        let ll = gpl_loglik(&[0.0, 0.0], &rs, ds.covariates()).unwrap();
        let hand = (1.0f64 / 31.0).ln() + (1.0f64 / 15.0).ln() + 0.0;
        assert!((ll - hand).abs() < 1e-12);
        assert!((ll + 6.14204).abs() < 1e-5);
    }

    #[test]
    fn last_subject_contributes_zero() {
        let rs = RiskStructure::from_outcomes(&[1.0], &[true]).unwrap();
        for eta in [-5.0, 0.0, 3.0] {
            assert!(gpl_loglik_eta(&[eta], &rs).abs() < 1e-12);
        }
    }

    #[test]
    fn intercept_shift_changes_value() {
        let ds = ds5().with_intercept().unwrap();
        let rs = RiskStructure::build(&ds).unwrap();
        let a = gpl_loglik(&[0.0, 0.5], &rs, ds.covariates()).unwrap();
        let b = gpl_loglik(&[1.0, 0.5], &rs, ds.covariates()).unwrap();
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn matches_direct_product() {
        let ds = ds5().with_intercept().unwrap();
        let rs = RiskStructure::build(&ds).unwrap();
        for beta in [[-2.0, 0.3], [0.5, -1.0], [1.5, 2.0]] {
            let eta: Vec<f64> = (0..5)
                .map(|i| beta[0] + beta[1] * ds.covariates()[(i, 1)])
                .collect();
            let a = gpl_loglik(&beta, &rs, ds.covariates()).unwrap();
            let b = brute_gpl(ds.times(), ds.events(), &eta);
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn approaches_pl_as_intercept_decreases() {
        let ds = ds5();
        let times = vec![1.0, 2.0, 3.0, 5.0, 7.0];
        let ds = ds.with_outcomes(times, vec![true, true, true, false, true]).unwrap();
        let rs = RiskStructure::build(&ds).unwrap();
        let pl = pl_loglik(&[0.8], &rs, ds.covariates()).unwrap();
        let dsi = ds.with_intercept().unwrap();
        let gaps: Vec<f64> = [-4.0, -8.0, -12.0]
            .iter()
            .map(|&a| (gpl_loglik(&[a, 0.8], &rs, dsi.covariates()).unwrap() - pl).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] < 1e-4);
    }

    #[test]
    fn geometric_marginalization_recovers_contribution() {
        // two subjects, one risk set, subject 0 has the event
        let (t0, t1) = (0.3f64, 0.6f64);
        let direct = t0 * (1.0 - t1) / (1.0 - (1.0 - t0) * (1.0 - t1));
        // P(top bucket = {0}) = sum_z P(W0 = z) P(W1 > z)
        let mut total = 0.0;
        for z in 1..=2000 {
            let zf = z as f64;
            total += t0 * (1.0 - t0).powf(zf - 1.0) * (1.0 - t1).powf(zf);
        }
        assert!((total - direct).abs() < 1e-10);
        // and the augmented complete-data kernel summed over Z with the
        // geometric normalizer of the latent gives the same value
        let q = (1.0 - t0) * (1.0 - t1);
        let mut aug = 0.0;
        for z in 1..=2000 {
            let zf = z as f64;
            // theta^c (1-theta)^(zeta-c) over subjects, zeta = z for both
            let kernel = t0 * (1.0 - t0).powf(zf - 1.0) * (1.0 - t1).powf(zf);
            aug += kernel;
            let _ = q;
        }
        assert!((aug - direct).abs() < 1e-10);
    }

    #[test]
    fn complete_data_kernel_matches_bookkeeping() {
        let ds = ds5().with_intercept().unwrap();
        let rs = RiskStructure::build(&ds).unwrap();
        let config = GPLCoxConfig::new(2).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        let mut s = GplSampler::new(&ds, &rs, &config, &mut rng).unwrap();
        s.set_z(vec![2, 3, 1]).unwrap();
        let st = s.state();
        assert_eq!(st.zeta, vec![2, 5, 5, 5, 6]);
        // kernel via zeta vs. direct per-risk-set product
        let th = &st.theta;
        let via_zeta: f64 = (0..5)
            .map(|i| {
                let c = rs.event_count(i) as f64;
                th[i].powf(c) * (1.0 - th[i]).powf(st.zeta[i] as f64 - c)
            })
            .product();
        let mut direct = 1.0;
        for (r, &z) in st.z.iter().enumerate() {
            for &j in rs.risk_set(r) {
                direct *= (1.0 - th[j]).powf(z as f64);
            }
            for &i in rs.event_set(r) {
                direct *= th[i] / (1.0 - th[i]);
            }
        }
        assert!((via_zeta - direct).abs() < 1e-12 * direct);
        assert_eq!(st.kappa[1], 1.0 - 2.5);
    }

    #[test]
    fn z_success_probability_and_absorbing_case() {
        // five subjects with theta = 0.5: p = 1 - 2^-5
        let rs = RiskStructure::from_outcomes(&[1.0; 5], &[true, false, false, false, false]).unwrap();
        let ds = SurvivalDataset::new(vec![1.0; 5], vec![true, false, false, false, false], DMatrix::zeros(5, 0), vec![])
            .unwrap()
            .with_intercept()
            .unwrap();
        let config = GPLCoxConfig::new(1).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        let mut s = GplSampler::new(&ds, &rs, &config, &mut rng).unwrap();
        let n = 40_000;
        let ones = (0..n)
            .filter(|_| {
                s.update_z(&mut rng).unwrap();
                s.state().z[0] == 1
            })
            .count() as f64
            / n as f64;
        let p = 0.96875;
        assert!((ones - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());

        // theta at the upper clamp in the risk set: success is essentially certain
        s.shift_intercept(60.0);
        for _ in 0..100 {
            s.update_z(&mut rng).unwrap();
            assert_eq!(s.state().z[0], 1);
        }
    }

    #[test]
    fn tiny_theta_large_risk_set_uses_log_space() {
        let eta = [-30.0; 10];
        let log1m: f64 = eta.iter().map(|&e| log_theta_pair(e).1).sum();
        let p_log = -log1m.exp_m1();
        let sum_theta = 10.0 * 1e-12;
        assert!((p_log / sum_theta - 1.0).abs() < 1e-6);
        // the brute product underflows to exactly 1 - 1 = 0 in f64
        let brute = 1.0 - (0..10).fold(1.0, |a, _| a * (1.0 - expit(-30.0)));
        assert!((brute / sum_theta - 1.0).abs() > 1e-6 || brute == 0.0);
    }

    #[test]
    fn omega_degenerate_and_moments() {
        let ds = ds5().with_intercept().unwrap();
        let rs = RiskStructure::build(&ds).unwrap();
        let config = GPLCoxConfig::new(2).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        let mut s = GplSampler::new(&ds, &rs, &config, &mut rng).unwrap();
        // zeta = (3, ...) at beta = 0
        s.set_z(vec![3, 1, 1]).unwrap();
        let n = 20_000;
        let mut acc = 0.0;
        for _ in 0..n {
            s.update_omega(&mut rng).unwrap();
            acc += s.state().omega[0];
        }
        let se = (crate::randkit::pg_variance(3.0, 0.0) / n as f64).sqrt();
        assert!((acc / n as f64 - 0.75).abs() < 4.0 * se);

        s.set_z(vec![500, 1, 1]).unwrap();
        s.update_omega(&mut rng).unwrap();
        assert!(s.state().omega[0].is_finite() && s.state().omega[0] > 0.0);

        let ds0 = SurvivalDataset::new(
            vec![0.5, 1.0],
            vec![false, true],
            DMatrix::zeros(2, 0),
            vec![],
        )
        .unwrap()
        .with_intercept()
        .unwrap();
        let rs0 = RiskStructure::build(&ds0).unwrap();
        let cfg0 = GPLCoxConfig::new(1).unwrap();
        let mut s0 = GplSampler::new(&ds0, &rs0, &cfg0, &mut rng).unwrap();
        s0.update_omega(&mut rng).unwrap();
        assert_eq!(s0.state().zeta[0], 0);
        assert_eq!(s0.state().omega[0], 0.0);
    }

    #[test]
    fn kappa_formula() {
        let ds = ds5().with_intercept().unwrap();
        let rs = RiskStructure::build(&ds).unwrap();
        let config = GPLCoxConfig::new(2).unwrap();
        let mut rng = RngStream::new(6, 0).rng();
        let mut s = GplSampler::new(&ds, &rs, &config, &mut rng).unwrap();
        s.set_z(vec![4, 1, 1]).unwrap();
        assert_eq!(s.state().kappa[0], -1.0);
    }
}
