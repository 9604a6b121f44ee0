//! Bayesian Cox regression through rank-ordered likelihoods.
//!
//! Two Gibbs samplers share the same risk-set machinery:
//!
//! - [`plcox`]: the Plackett–Luce form of the partial likelihood (identical to
//!   Breslow's tie handling), augmented with gamma latent variables per event
//!   time and a negative-binomial approximation so that Pólya–Gamma variables
//!   give a Gaussian update for the coefficients.
//! - [`gplcox`]: the geometric Plackett–Luce form, which assigns probability
//!   to tied events through a logistic success probability per subject and is
//!   augmented exactly with geometric latent variables.
//!
//! [`frailty`] adds shared Gaussian cluster effects to either sampler,
//! [`baseline`] provides Newton maximum partial likelihood (Breslow and Efron)
//! and [`simlab`] replays the simulation designs used to compare them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod diagnostics;
pub mod draws;
pub mod error;
pub mod frailty;
pub mod gibbs;
pub mod gplcox;
pub mod plcox;
pub mod randkit;
pub mod simlab;
pub mod survdata;

pub use draws::{ParamKind, PosteriorDraws};
pub use error::{Error, Result};
pub use survdata::{
    build_risk_structure, coarsen_grid, coarsen_round, load_csv, CsvSchema, RiskStructure,
    SubjectRecord, SurvivalDataset,
};
