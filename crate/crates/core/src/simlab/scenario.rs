use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients used throughout the simulation designs.
pub const BETA_TRUE: [f64; 4] = [0.10, 0.05, -0.15, 0.30];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardShape {
    Constant,
    Decreasing,
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `T ~ Weibull(shape, scale * exp(-x'beta / shape))`.
    WeibullPh { shape: f64, scale: f64 },
    /// Per-period event probability `expit(alpha_t + x'beta)` for `t = 1..=t_max`.
    DiscreteLogistic {
        alpha0: f64,
        #[serde(default = "default_hazard")]
        hazard: HazardShape,
        #[serde(default = "default_t_max")]
        t_max: u32,
    },
    /// `log T ~ N(log mu - x'beta, sigma^2)`.
    LognormalNph { mu: f64, sigma: f64 },
}

fn default_hazard() -> HazardShape {
    HazardShape::Constant
}

fn default_t_max() -> u32 {
    300
}

impl Family {
    pub fn weibull(shape: f64, scale: f64) -> Self {
        Family::WeibullPh { shape, scale }
    }

    pub fn discrete(alpha0: f64, hazard: HazardShape, t_max: u32) -> Self {
        Family::DiscreteLogistic { alpha0, hazard, t_max }
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Self {
        Family::LognormalNph { mu, sigma }
    }

    /// Censoring used when the scenario does not specify one.
    pub fn default_censoring(&self) -> Censoring {
        match *self {
            Family::WeibullPh { .. } => Censoring::Uniform { lower: 0.5, upper: 30.0 },
            Family::DiscreteLogistic { t_max, .. } => Censoring::DiscreteUniform { max: t_max },
            Family::LognormalNph { .. } => Censoring::Uniform { lower: 0.0, upper: 300.0 },
        }
    }

    /// Whether the Cox model holds, so the generating coefficients are the truth.
    pub fn is_proportional(&self) -> bool {
        !matches!(self, Family::LognormalNph { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Censoring {
    None,
    Uniform { lower: f64, upper: f64 },
    DiscreteUniform { max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coarsening {
    None,
    /// `delta * round(t / delta)` on observed times.
    Round { width: f64 },
    /// Events rounded up and censorings rounded down to multiples of `width`.
    Grid { width: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Breslow,
    Efron,
    Pl,
    Gpl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Breslow => "breslow",
            Method::Efron => "efron",
            Method::Pl => "pl",
            Method::Gpl => "gpl",
        }
    }

    pub fn is_bayesian(self) -> bool {
        matches!(self, Method::Pl | Method::Gpl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSettings {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub delta: f64,
    pub prior_sd: f64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            iters: 3000,
            burnin: 1000,
            thin: 1,
            delta: 10.0,
            prior_sd: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Truth {
    /// The generating coefficients.
    Given,
    /// Efron estimate on one large uncoarsened sample from the same mechanism.
    Pseudo { n: usize },
    Explicit { values: Vec<f64> },
}

/// One simulation scenario, read from TOML.
///
/// ```toml
/// name = "weibull-constant"
/// n = 300
/// beta_true = [0.10, 0.05, -0.15, 0.30]
/// replications = 200
/// seed = 20240601
/// methods = ["breslow", "efron", "pl", "gpl"]
///
/// [family]
/// kind = "weibull_ph"
/// shape = 1.0
/// scale = 10.0
///
/// [coarsening]
/// kind = "round"
/// width = 0.1
/// ```
///
/// `censoring` defaults to the family's design, `coarsening` to none,
/// `truth` to the generating coefficients for proportional-hazards families
/// and to a 500,000-subject pseudo-truth otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    pub family: Family,
    #[serde(default)]
    pub censoring: Option<Censoring>,
    #[serde(default)]
    pub coarsening: Option<Coarsening>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_beta")]
    pub beta_true: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub mcmc: McmcSettings,
    #[serde(default)]
    pub truth: Option<Truth>,
}

fn default_n() -> usize {
    300
}

fn default_beta() -> Vec<f64> {
    BETA_TRUE.to_vec()
}

fn default_replications() -> usize {
    200
}

fn default_seed() -> u64 {
    1
}

fn default_methods() -> Vec<Method> {
    vec![Method::Breslow, Method::Efron, Method::Pl, Method::Gpl]
}

impl ScenarioSpec {
    pub fn new(family: Family) -> Self {
        Self {
            name: String::new(),
            family,
            censoring: None,
            coarsening: None,
            n: default_n(),
            beta_true: default_beta(),
            replications: default_replications(),
            seed: default_seed(),
            methods: default_methods(),
            mcmc: McmcSettings::default(),
            truth: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn censoring(&self) -> Censoring {
        self.censoring.unwrap_or_else(|| self.family.default_censoring())
    }

    pub fn coarsening(&self) -> Coarsening {
        self.coarsening.unwrap_or(Coarsening::None)
    }

    pub fn truth(&self) -> Truth {
        self.truth.clone().unwrap_or(if self.family.is_proportional() {
            Truth::Given
        } else {
            Truth::Pseudo { n: 500_000 }
        })
    }

    pub fn p(&self) -> usize {
        self.beta_true.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match self.family {
            Family::WeibullPh { shape, scale } if !pos(shape) || !pos(scale) => {
                return bad(format!("weibull shape and scale must be positive, got {shape}, {scale}"));
            }
            Family::DiscreteLogistic { alpha0, t_max, .. } if t_max == 0 || !alpha0.is_finite() => {
                return bad("discrete logistic needs t_max >= 1 and a finite alpha0".into());
            }
            Family::LognormalNph { mu, sigma } if !pos(mu) || !pos(sigma) => {
                return bad(format!("lognormal mu and sigma must be positive, got {mu}, {sigma}"));
            }
            _ => {}
        }
        match self.censoring() {
            Censoring::Uniform { lower, upper } if !(lower >= 0.0 && upper > lower && upper.is_finite()) => {
                return bad(format!("uniform censoring needs 0 <= lower < upper, got [{lower}, {upper}]"));
            }
            Censoring::DiscreteUniform { max: 0 } => return bad("discrete censoring max must be >= 1".into()),
            _ => {}
        }
        match self.coarsening() {
            Coarsening::Round { width } if !pos(width) => return bad(format!("rounding width must be positive, got {width}")),
            Coarsening::Grid { width } if width <= 0 => return bad(format!("grid width must be positive, got {width}")),
            _ => {}
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.beta_true.is_empty() || self.beta_true.iter().any(|b| !b.is_finite()) {
            return bad("beta_true must be a non-empty list of finite values".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        let m = &self.mcmc;
        if m.iters == 0 || m.burnin >= m.iters || m.thin == 0 || !pos(m.delta) || !pos(m.prior_sd) {
            return bad("mcmc settings need iters > burnin, thin >= 1, delta > 0, prior_sd > 0".into());
        }
        match self.truth() {
            Truth::Pseudo { n } if n < 2 => return bad("pseudo-truth n must be at least 2".into()),
            Truth::Explicit { values } if values.len() != self.p() => {
                return bad("explicit truth must match beta_true in length".into())
            }
            _ => {}
        }
        Ok(())
    }
}
