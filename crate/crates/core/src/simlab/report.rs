use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::scenario::{Method, ScenarioSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodEstimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Outcome of one replication: per-method estimates or the error message.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub index: usize,
    pub results: BTreeMap<Method, std::result::Result<Vec<MethodEstimate>, String>>,
    pub seconds: BTreeMap<Method, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamMetrics {
    pub parameter: String,
    pub truth: f64,
    pub bias: f64,
    /// Sample SD of the estimates; absent with fewer than two successes.
    pub sd: Option<f64>,
    pub rmse: f64,
    /// Coverage of the 95% intervals, in percent.
    pub cp: f64,
    pub aw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub n_success: usize,
    pub n_failed: usize,
    /// First few failure messages with their replication index.
    pub failures: Vec<(usize, String)>,
    pub params: Vec<ParamMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub scenario: String,
    pub n_replications: usize,
    pub truth: Vec<f64>,
    pub methods: Vec<MethodReport>,
    #[serde(skip)]
    pub records: Vec<ReplicationRecord>,
    /// Total fitting seconds per method. Not part of the reproducible outputs.
    #[serde(skip)]
    pub seconds: BTreeMap<Method, f64>,
}

const MAX_LOGGED_FAILURES: usize = 10;

/// Bias, SD (denominator `R - 1`), RMSE, CP and AW per method and coefficient.
///
/// RMSE is `sqrt(mean((est - truth)^2))`, so `RMSE^2 = Bias^2 + SD^2 (R-1)/R`.
pub fn aggregate(spec: &ScenarioSpec, truth: &[f64], records: Vec<ReplicationRecord>) -> ReplicationReport {
    let p = truth.len();
    let mut methods = Vec::new();
    let mut seconds = BTreeMap::new();
    for &m in &spec.methods {
        let mut ok: Vec<&Vec<MethodEstimate>> = Vec::new();
        let mut failures = Vec::new();
        let mut n_failed = 0;
        for rec in &records {
            *seconds.entry(m).or_insert(0.0) += rec.seconds.get(&m).copied().unwrap_or(0.0);
            match rec.results.get(&m) {
                Some(Ok(v)) => ok.push(v),
                Some(Err(e)) => {
                    n_failed += 1;
                    if failures.len() < MAX_LOGGED_FAILURES {
                        failures.push((rec.index, e.clone()));
                    }
                }
                None => {}
            }
        }
        let r = ok.len() as f64;
        let params = (0..p)
            .map(|j| {
                let t = truth[j];
                let est: Vec<f64> = ok.iter().map(|v| v[j].estimate).collect();
                let mean = est.iter().sum::<f64>() / r;
                let sd = (ok.len() >= 2)
                    .then(|| (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt());
                let mse = est.iter().map(|e| (e - t).powi(2)).sum::<f64>() / r;
                let covered = ok.iter().filter(|v| v[j].lower <= t && t <= v[j].upper).count();
                let aw = ok.iter().map(|v| v[j].upper - v[j].lower).sum::<f64>() / r;
                ParamMetrics {
                    parameter: format!("x{}", j + 1),
                    truth: t,
                    bias: mean - t,
                    sd,
                    rmse: mse.sqrt(),
                    cp: 100.0 * covered as f64 / r,
                    aw,
                }
            })
            .collect();
        methods.push(MethodReport {
            method: m,
            n_success: ok.len(),
            n_failed,
            failures,
            params,
        });
    }
    ReplicationReport {
        scenario: spec.name.clone(),
        n_replications: records.len(),
        truth: truth.to_vec(),
        methods,
        records,
        seconds,
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

impl ReplicationReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Share of replications in which every method succeeded.
    pub fn success_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let ok = self
            .records
            .iter()
            .filter(|r| r.results.values().all(|v| v.is_ok()))
            .count();
        ok as f64 / self.records.len() as f64
    }

    /// One row per method and coefficient, columns in Bias, SD, RMSE, CP, AW order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,parameter,truth,bias,sd,rmse,cp,aw,n_success,n_failed\n");
        for m in &self.methods {
            for q in &m.params {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    m.method.name(),
                    q.parameter,
                    num(q.truth),
                    num(q.bias),
                    q.sd.map(num).unwrap_or_default(),
                    num(q.rmse),
                    num(q.cp),
                    num(q.aw),
                    m.n_success,
                    m.n_failed
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Aligned text table for one coefficient.
    pub fn table(&self, parameter: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>8} {:>8} {:>8} {:>7} {:>7}  ({parameter}, {} replications)",
            "method", "Bias", "SD", "RMSE", "CP", "AW", self.n_replications
        );
        for m in &self.methods {
            if let Some(q) = m.params.iter().find(|q| q.parameter == parameter) {
                let sd = q.sd.map(|s| format!("{s:.3}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    out,
                    "{:<8} {:>8.3} {:>8} {:>8.3} {:>7.2} {:>7.3}",
                    m.method.name(),
                    q.bias,
                    sd,
                    q.rmse,
                    q.cp,
                    q.aw
                );
            }
        }
        out
    }
}
