use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Intercept,
    Coefficient,
    Frailty,
    FrailtyVariance,
}

impl ParamKind {
    /// Coefficients on the log-hazard scale, reported as hazard ratios.
    pub fn is_hazard_coefficient(self) -> bool {
        matches!(self, ParamKind::Coefficient)
    }
}

/// Counters collected while sampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerStats {
    /// Linear predictors or tilts pulled back into the finite range.
    pub clamped: u64,
    /// Sweeps whose coefficient update failed and kept the previous value.
    pub failed_updates: u64,
}

/// Retained post-burn-in draws, one row per kept sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    names: Vec<String>,
    kinds: Vec<ParamKind>,
    iterations: Vec<usize>,
    values: Vec<f64>,
    loglik: Vec<f64>,
    pub elapsed: Duration,
    pub stats: SamplerStats,
}

impl PosteriorDraws {
    pub fn new(names: Vec<String>, kinds: Vec<ParamKind>) -> Self {
        assert_eq!(names.len(), kinds.len());
        Self {
            names,
            kinds,
            iterations: Vec::new(),
            values: Vec::new(),
            loglik: Vec::new(),
            elapsed: Duration::ZERO,
            stats: SamplerStats::default(),
        }
    }

    pub fn push(&mut self, iteration: usize, values: &[f64], loglik: f64) {
        assert_eq!(values.len(), self.names.len());
        self.iterations.push(iteration);
        self.values.extend_from_slice(values);
        self.loglik.push(loglik);
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[ParamKind] {
        &self.kinds
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn n_draws(&self) -> usize {
        self.iterations.len()
    }

    pub fn iterations(&self) -> &[usize] {
        &self.iterations
    }

    /// Log-likelihood of the model at each retained draw.
    pub fn loglik(&self) -> &[f64] {
        &self.loglik
    }

    pub fn draw(&self, k: usize) -> &[f64] {
        let p = self.n_params();
        &self.values[k * p..(k + 1) * p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let p = self.n_params();
        self.values.iter().skip(j).step_by(p).copied().collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn indices_of(&self, kind: ParamKind) -> Vec<usize> {
        (0..self.n_params()).filter(|&j| self.kinds[j] == kind).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        let n = self.n_draws().max(1) as f64;
        let mut m = vec![0.0; self.n_params()];
        for k in 0..self.n_draws() {
            for (acc, v) in m.iter_mut().zip(self.draw(k)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Keeps every `step`-th draw, starting with the first.
    pub fn thinned(&self, step: usize) -> Self {
        let step = step.max(1);
        let mut out = Self::new(self.names.clone(), self.kinds.clone());
        for k in (0..self.n_draws()).step_by(step) {
            out.push(self.iterations[k], self.draw(k), self.loglik[k]);
        }
        out.elapsed = self.elapsed;
        out.stats = self.stats;
        out
    }

    /// Long format: `chain,iteration,parameter,value`, one row per scalar.
    pub fn write_long_csv<W: Write>(&self, chain: usize, out: &mut W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "chain,iteration,parameter,value")?;
        }
        for k in 0..self.n_draws() {
            for (name, v) in self.names.iter().zip(self.draw(k)) {
                writeln!(out, "{},{},{},{}", chain, self.iterations[k], name, v)?;
            }
        }
        Ok(())
    }

    /// Appends the draws of another chain over the same parameters.
    pub fn extend(&mut self, other: &PosteriorDraws) -> Result<()> {
        if other.names != self.names {
            return Err(Error::Validation("cannot merge draws over different parameters".into()));
        }
        self.iterations.extend_from_slice(&other.iterations);
        self.values.extend_from_slice(&other.values);
        self.loglik.extend_from_slice(&other.loglik);
        self.stats.clamped += other.stats.clamped;
        self.stats.failed_updates += other.stats.failed_updates;
        self.elapsed += other.elapsed;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_thinning_and_csv() {
        let mut d = PosteriorDraws::new(
            vec!["a".into(), "b".into()],
            vec![ParamKind::Intercept, ParamKind::Coefficient],
        );
        for k in 0..5 {
            d.push(k + 1, &[k as f64, 0.0 - k as f64], -1.0);
        }
        assert_eq!(d.column(1), vec![0.0, -1.0, -2.0, -3.0, -4.0]);
        assert_eq!(d.means(), vec![2.0, -2.0]);
        assert_eq!(d.thinned(2).column(0), vec![0.0, 2.0, 4.0]);
        let mut buf = Vec::new();
        d.thinned(4).write_long_csv(0, &mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "chain,iteration,parameter,value\n0,1,a,0\n0,1,b,0\n0,5,a,4\n0,5,b,-4\n"
        );
    }
}
