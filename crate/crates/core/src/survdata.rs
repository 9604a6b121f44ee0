//! Right-censored survival data, the risk/tie structure shared by every
//! likelihood in the crate, and the two time-coarsening schemes.
//!
//! Risk sets are never materialized. Subjects are sorted by observed time
//! once; the risk set at the `r`th distinct event time is then the suffix of
//! that order starting at `risk_start[r]`, so sums over risk sets become
//! suffix sums and per-subject sums over the risk sets a subject belongs to
//! become prefix sums over event times.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One subject: observed time, event flag, covariates and optional cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
    pub cluster: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    events: Vec<bool>,
    covariates: DMatrix<f64>,
    names: Vec<String>,
    clusters: Option<Vec<u64>>,
    has_intercept: bool,
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    pub time: String,
    pub event: String,
    pub cluster: Option<String>,
    /// `None` selects every column that is not time, event or cluster.
    pub covariates: Option<Vec<String>>,
}

impl CsvSchema {
    pub fn new(time: impl Into<String>, event: impl Into<String>) -> Self {
        Self {
            time: time.into(),
            event: event.into(),
            cluster: None,
            covariates: None,
        }
    }

    pub fn cluster(mut self, name: impl Into<String>) -> Self {
        self.cluster = Some(name.into());
        self
    }

    pub fn covariates<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        self.covariates = Some(names.into_iter().map(Into::into).collect());
        self
    }
}

pub const INTERCEPT_NAME: &str = "(Intercept)";

impl SurvivalDataset {
    /// Builds a dataset from column data. `covariates` is `n x p`.
    pub fn new(
        times: Vec<f64>,
        events: Vec<bool>,
        covariates: DMatrix<f64>,
        names: Vec<String>,
    ) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::Validation("dataset has no subjects".into()));
        }
        if events.len() != n || covariates.nrows() != n {
            return Err(Error::Validation(format!(
                "length mismatch: {} times, {} events, {} covariate rows",
                n,
                events.len(),
                covariates.nrows()
            )));
        }
        if names.len() != covariates.ncols() {
            return Err(Error::Validation(format!(
                "{} covariate names for {} columns",
                names.len(),
                covariates.ncols()
            )));
        }
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("time must be finite and >= 0, got {t}"),
                });
            }
        }
        if let Some((k, _)) = covariates.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Row {
                row: k % n + 1,
                message: "non-finite covariate".into(),
            });
        }
        Ok(Self {
            times,
            events,
            covariates,
            names,
            clusters: None,
            has_intercept: false,
        })
    }

    pub fn from_records(records: &[SubjectRecord], names: Vec<String>) -> Result<Self> {
        let n = records.len();
        let p = names.len();
        let mut x = DMatrix::zeros(n, p);
        for (i, rec) in records.iter().enumerate() {
            if rec.covariates.len() != p {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("expected {p} covariates, found {}", rec.covariates.len()),
                });
            }
            for (j, &v) in rec.covariates.iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        let ds = Self::new(
            records.iter().map(|r| r.time).collect(),
            records.iter().map(|r| r.event).collect(),
            x,
            names,
        )?;
        let labelled = records.iter().filter(|r| r.cluster.is_some()).count();
        match labelled {
            0 => Ok(ds),
            l if l == n => ds.with_clusters(records.iter().map(|r| r.cluster.unwrap()).collect()),
            _ => Err(Error::Validation(
                "cluster labels must be given for all subjects or none".into(),
            )),
        }
    }

    pub fn with_clusters(mut self, clusters: Vec<u64>) -> Result<Self> {
        if clusters.len() != self.n() {
            return Err(Error::Validation(format!(
                "{} cluster labels for {} subjects",
                clusters.len(),
                self.n()
            )));
        }
        self.clusters = Some(clusters);
        Ok(self)
    }

    /// Prepends a constant-one column. Rejected if already present.
    pub fn with_intercept(self) -> Result<Self> {
        if self.has_intercept {
            return Err(Error::Validation("intercept already appended".into()));
        }
        let n = self.n();
        let x = self.covariates.insert_column(0, 1.0);
        debug_assert_eq!(x.nrows(), n);
        let mut names = Vec::with_capacity(self.names.len() + 1);
        names.push(INTERCEPT_NAME.to_string());
        names.extend(self.names);
        Ok(Self {
            covariates: x,
            names,
            has_intercept: true,
            ..self
        })
    }

    /// Returns the dataset with an intercept, appending one only if absent.
    pub fn ensure_intercept(self) -> Result<Self> {
        if self.has_intercept {
            Ok(self)
        } else {
            self.with_intercept()
        }
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.names
    }

    pub fn clusters(&self) -> Option<&[u64]> {
        self.clusters.as_deref()
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn record(&self, i: usize) -> SubjectRecord {
        SubjectRecord {
            time: self.times[i],
            event: self.events[i],
            covariates: self.covariates.row(i).iter().copied().collect(),
            cluster: self.clusters.as_ref().map(|c| c[i]),
        }
    }

    pub fn records(&self) -> impl Iterator<Item = SubjectRecord> + '_ {
        (0..self.n()).map(move |i| self.record(i))
    }

    /// Replaces observed times and event flags, keeping covariates and clusters.
    pub fn with_outcomes(mut self, times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        if times.len() != self.n() || events.len() != self.n() {
            return Err(Error::Validation("outcome length mismatch".into()));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Row {
                row: i + 1,
                message: format!("time must be finite and >= 0, got {}", times[i]),
            });
        }
        self.times = times;
        self.events = events;
        Ok(self)
    }
}

/// Reads a dataset from a comma-separated file with a header row.
///
/// Rows are kept in file order and no intercept is appended. Row numbers in
/// errors count data records from 1, excluding the header.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let col = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let time_col = col(&schema.time)?;
    let event_col = col(&schema.event)?;
    let cluster_col = schema.cluster.as_deref().map(col).transpose()?;
    let cov_names: Vec<String> = match &schema.covariates {
        Some(names) => names.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != time_col && *i != event_col && Some(*i) != cluster_col)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let cov_cols = cov_names
        .iter()
        .map(|n| col(n))
        .collect::<Result<Vec<_>>>()?;

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut clusters = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        let cell = |c: usize, name: &str| -> Result<&str> {
            match rec.get(c) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(Error::Row {
                    row,
                    message: format!("missing value in column `{name}`"),
                }),
            }
        };
        let num = |c: usize, name: &str| -> Result<f64> {
            let s = cell(c, name)?;
            s.parse::<f64>().map_err(|_| Error::Row {
                row,
                message: format!("column `{name}`: `{s}` is not a number"),
            })
        };

        let t = num(time_col, &schema.time)?;
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Row {
                row,
                message: format!("time must be finite and >= 0, got {t}"),
            });
        }
        let e = num(event_col, &schema.event)?;
        let event = if e == 0.0 {
            false
        } else if e == 1.0 {
            true
        } else {
            return Err(Error::Row {
                row,
                message: format!("event must be 0 or 1, got {e}"),
            });
        };
        if let (Some(c), Some(name)) = (cluster_col, schema.cluster.as_deref()) {
            let s = cell(c, name)?;
            let label = s.parse::<u64>().map_err(|_| Error::Row {
                row,
                message: format!("cluster `{s}` is not a nonnegative integer"),
            })?;
            clusters.push(label);
        }
        for (&c, name) in cov_cols.iter().zip(&cov_names) {
            let v = num(c, name)?;
            if !v.is_finite() {
                return Err(Error::Row {
                    row,
                    message: format!("column `{name}` is not finite"),
                });
            }
            values.push(v);
        }
        times.push(t);
        events.push(event);
    }

    let n = times.len();
    let x = DMatrix::from_row_slice(n, cov_names.len(), &values);
    let ds = SurvivalDataset::new(times, events, x, cov_names)?;
    if cluster_col.is_some() {
        ds.with_clusters(clusters)
    } else {
        Ok(ds)
    }
}

/// Distinct event times, tie blocks and nested risk sets.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskStructure {
    event_times: Vec<f64>,
    event_sets: Vec<Vec<usize>>,
    order: Vec<usize>,
    risk_start: Vec<usize>,
    event_count: Vec<u32>,
    memberships: Vec<usize>,
}

impl RiskStructure {
    pub fn build(ds: &SurvivalDataset) -> Result<Self> {
        Self::from_outcomes(ds.times(), ds.events())
    }

    pub fn from_outcomes(times: &[f64], events: &[bool]) -> Result<Self> {
        let n = times.len();
        if events.len() != n {
            return Err(Error::Validation("times/events length mismatch".into()));
        }
        if !events.iter().any(|&e| e) {
            return Err(Error::NoEvents);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));

        let mut event_times: Vec<f64> = Vec::new();
        let mut event_sets: Vec<Vec<usize>> = Vec::new();
        let mut risk_start = Vec::new();
        let mut event_count = vec![0u32; n];
        let mut pos = 0;
        while pos < n {
            let t = times[order[pos]];
            let mut end = pos;
            while end < n && times[order[end]] == t {
                end += 1;
            }
            let mut block: Vec<usize> = order[pos..end]
                .iter()
                .copied()
                .filter(|&i| events[i])
                .collect();
            if !block.is_empty() {
                block.sort_unstable();
                for &i in &block {
                    event_count[i] += 1;
                }
                event_times.push(t);
                event_sets.push(block);
                risk_start.push(pos);
            }
            pos = end;
        }

        // m_i = #{r : t_(r) <= T_i}
        let mut memberships = vec![0usize; n];
        let mut r = 0;
        for &i in &order {
            while r < event_times.len() && event_times[r] <= times[i] {
                r += 1;
            }
            memberships[i] = r;
        }

        Ok(Self {
            event_times,
            event_sets,
            order,
            risk_start,
            event_count,
            memberships,
        })
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Number of distinct event times `R`.
    pub fn n_distinct(&self) -> usize {
        self.event_times.len()
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn event_set(&self, r: usize) -> &[usize] {
        &self.event_sets[r]
    }

    pub fn event_sets(&self) -> &[Vec<usize>] {
        &self.event_sets
    }

    pub fn tie_count(&self, r: usize) -> usize {
        self.event_sets[r].len()
    }

    pub fn tie_counts(&self) -> Vec<usize> {
        self.event_sets.iter().map(Vec::len).collect()
    }

    pub fn total_events(&self) -> usize {
        self.event_sets.iter().map(Vec::len).sum()
    }

    pub fn max_tie(&self) -> usize {
        self.event_sets.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Subjects sorted by observed time (ties by index).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position in [`order`](Self::order) where the `r`th risk set begins.
    pub fn risk_start(&self, r: usize) -> usize {
        self.risk_start[r]
    }

    /// Members of `R_r`, i.e. all subjects with `T_j >= t_(r)`, in time order.
    pub fn risk_set(&self, r: usize) -> &[usize] {
        &self.order[self.risk_start[r]..]
    }

    pub fn risk_set_size(&self, r: usize) -> usize {
        self.n() - self.risk_start[r]
    }

    /// `c_i`, the number of event sets subject `i` belongs to (0 or 1).
    pub fn event_count(&self, i: usize) -> u32 {
        self.event_count[i]
    }

    pub fn event_counts(&self) -> &[u32] {
        &self.event_count
    }

    /// Number of risk sets containing subject `i`; they are `R_0..R_{m_i - 1}`.
    pub fn memberships(&self, i: usize) -> usize {
        self.memberships[i]
    }

    pub fn in_any_risk_set(&self, i: usize) -> bool {
        self.memberships[i] > 0
    }

    /// `sum_{j in R_r} w_j` for every `r`, via one suffix-sum pass.
    pub fn risk_sums(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_distinct()];
        self.risk_sums_into(w, &mut out);
        out
    }

    pub fn risk_sums_into(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.n());
        let mut acc = 0.0;
        let mut pos = self.n();
        for r in (0..self.n_distinct()).rev() {
            let start = self.risk_start[r];
            while pos > start {
                pos -= 1;
                acc += w[self.order[pos]];
            }
            out[r] = acc;
        }
    }

    /// `zeta_i = sum_{r : i in R_r} z_r` for every subject, via prefix sums.
    pub fn membership_sums_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.n_distinct());
        let prefix = prefix_sums(z);
        for (o, &m) in out.iter_mut().zip(&self.memberships) {
            *o = prefix[m];
        }
    }

    pub fn membership_sums(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.membership_sums_into(z, &mut out);
        out
    }

    /// Integer version of [`membership_sums`](Self::membership_sums) with overflow checks.
    pub fn membership_sums_int(&self, z: &[i64], out: &mut [i64]) -> Result<()> {
        let mut prefix = Vec::with_capacity(z.len() + 1);
        prefix.push(0i64);
        let mut acc = 0i64;
        for &v in z {
            acc = acc
                .checked_add(v)
                .ok_or_else(|| Error::NonFinite("integer latent sum overflowed".into()))?;
            prefix.push(acc);
        }
        for (o, &m) in out.iter_mut().zip(&self.memberships) {
            *o = prefix[m];
        }
        Ok(())
    }
}

pub fn build_risk_structure(ds: &SurvivalDataset) -> Result<RiskStructure> {
    RiskStructure::build(ds)
}

fn prefix_sums(z: &[f64]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(z.len() + 1);
    let mut acc = 0.0;
    prefix.push(acc);
    for &v in z {
        acc += v;
        prefix.push(acc);
    }
    prefix
}

/// Rounds each time to the nearest multiple of `delta`, ties to even.
///
/// When `1/delta` is an integer the multiple is formed by dividing by it,
/// so times already on the grid come back bit-identical.
pub fn coarsen_round(times: &[f64], delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Validation(format!(
            "rounding width must be positive, got {delta}"
        )));
    }
    let inv = 1.0 / delta;
    let inv_int = inv.round();
    let integer_grid = inv_int >= 1.0 && (inv - inv_int).abs() <= 1e-9 * inv_int;
    Ok(times
        .iter()
        .map(|&t| {
            if integer_grid {
                (t * inv_int).round_ties_even() / inv_int
            } else {
                (t / delta).round_ties_even() * delta
            }
        })
        .collect())
}

/// Moves event times up and censoring times down onto a grid of width `u`.
///
/// Returns observed times `min(event, censor)` and event flags
/// `event <= censor` on the coarsened scale.
pub fn coarsen_grid(
    event_times: &[f64],
    censor_times: &[f64],
    u: i64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if u <= 0 {
        return Err(Error::Validation(format!("grid width must be positive, got {u}")));
    }
    if event_times.len() != censor_times.len() {
        return Err(Error::Validation("event/censor length mismatch".into()));
    }
    let w = u as f64;
    let mut obs = Vec::with_capacity(event_times.len());
    let mut flags = Vec::with_capacity(event_times.len());
    for (&t, &c) in event_times.iter().zip(censor_times) {
        let te = w * (t / w).ceil();
        let tc = w * (c / w).floor();
        obs.push(te.min(tc));
        flags.push(te <= tc);
    }
    Ok((obs, flags))
}
