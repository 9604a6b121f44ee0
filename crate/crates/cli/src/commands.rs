use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use rankhaz::baseline::{newton_mle, MleResult, NewtonOptions, Ties, Z95};
use rankhaz::diagnostics::{dic, summarize, Dic, PosteriorSummary};
use rankhaz::draws::SamplerStats;
use rankhaz::frailty::{loglik_at_posterior_mean, run_frailty_gibbs, BaseConfig, FrailtyConfig, Model};
use rankhaz::gibbs::{ChainSettings, NormalPrior};
use rankhaz::gplcox::{run_gpl_gibbs, GPLCoxConfig};
use rankhaz::plcox::{run_pl_gibbs, PLCoxConfig};
use rankhaz::randkit::RngStream;
use rankhaz::simlab::{run_replications, ScenarioSpec};
use rankhaz::{load_csv, CsvSchema, Error, PosteriorDraws, RiskStructure, SurvivalDataset};

use crate::args::{resolve_seed, DataArgs, FitArgs, MleArgs, ModelArg, SimulateArgs, TiesArg};
use crate::manifest::{with_manifest_ref, RunManifest};

/// Fewer replications succeeded than the run requires.
#[derive(Debug)]
pub struct BudgetExceeded {
    pub succeeded: usize,
    pub total: usize,
}

impl std::fmt::Display for BudgetExceeded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "only {} of {} replications succeeded for every method (90% required)",
            self.succeeded, self.total
        )
    }
}

impl std::error::Error for BudgetExceeded {}

fn validation(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Error::Validation(msg.into()))
}

fn load(data: &DataArgs, cluster: Option<&str>) -> anyhow::Result<SurvivalDataset> {
    let mut schema = CsvSchema::new(&data.time, &data.event);
    if let Some(c) = cluster {
        schema = schema.cluster(c);
    }
    if let Some(cov) = &data.covariates {
        schema = schema.covariates(cov.iter().map(|s| s.trim().to_string()));
    }
    let ds = load_csv(&data.data, &schema).with_context(|| format!("reading {}", data.data.display()))?;
    Ok(ds)
}

fn prepare_out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).map_err(|e| validation(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Serialize)]
struct FitOutput<'a> {
    model: Model,
    frailty: bool,
    chains: usize,
    iterations: usize,
    burnin: usize,
    thin: usize,
    seed: u64,
    delta: Option<f64>,
    prior_sd: f64,
    summary: &'a PosteriorSummary,
    dic: Dic,
    stats: SamplerStats,
}

pub fn cmd_fit(args: &FitArgs) -> anyhow::Result<()> {
    let seed = resolve_seed(Some(args.seed))?.unwrap_or(args.seed);
    let model = match args.model {
        ModelArg::Pl => Model::Pl,
        ModelArg::Gpl => Model::Gpl,
    };
    if model == Model::Gpl && args.delta.is_some() {
        return Err(validation("--delta applies to the PL-Cox model only"));
    }
    if args.chains == 0 || args.parallel == 0 {
        return Err(validation("--chains and --parallel must be at least 1"));
    }
    let delta = (model == Model::Pl).then(|| args.delta.unwrap_or(10.0));
    let config_json = json!({
        "model": model,
        "data": args.data.data,
        "time": args.data.time,
        "event": args.data.event,
        "covariates": args.data.covariates,
        "frailty_col": args.frailty_col,
        "iters": args.iters,
        "burnin": args.burnin,
        "thin": args.thin,
        "delta": delta,
        "prior_sd": args.prior_sd,
        "chains": args.chains,
    });
    let mut manifest = RunManifest::start("fit", config_json, Some(seed), &args.data.data)?;

    let ds = load(&args.data, args.frailty_col.as_deref())?.ensure_intercept()?;
    let risk = RiskStructure::build(&ds)?;
    let p = ds.p();
    let prior = NormalPrior::isotropic(p, args.prior_sd)?;
    let chain_for = |k: usize| ChainSettings {
        n_iter: args.iters,
        n_burnin: args.burnin,
        thin: args.thin,
        stream: RngStream::new(seed, k as u64),
        ..ChainSettings::default()
    };
    chain_for(0).validate()?;
    let base_for = |k: usize| -> rankhaz::Result<BaseConfig> {
        Ok(match model {
            Model::Pl => {
                let mut c = PLCoxConfig::new(p)?;
                c.delta = delta.unwrap_or(10.0);
                c.prior = prior.clone();
                c.chain = chain_for(k);
                BaseConfig::Pl(c)
            }
            Model::Gpl => {
                let mut c = GPLCoxConfig::new(p)?;
                c.prior = prior.clone();
                c.chain = chain_for(k);
                BaseConfig::Gpl(c)
            }
        })
    };
    let run_chain = |k: usize| -> rankhaz::Result<PosteriorDraws> {
        match (base_for(k)?, args.frailty_col.is_some()) {
            (base, true) => run_frailty_gibbs(&ds, &risk, &FrailtyConfig::new(base)),
            (BaseConfig::Pl(c), false) => run_pl_gibbs(&ds, &risk, &c),
            (BaseConfig::Gpl(c), false) => run_gpl_gibbs(&ds, &risk, &c),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.parallel).build()?;
    let chains: Vec<PosteriorDraws> = pool.install(|| {
        (0..args.chains)
            .into_par_iter()
            .map(run_chain)
            .collect::<rankhaz::Result<Vec<_>>>()
    })?;

    prepare_out_dir(&args.out_dir)?;
    let mut draws_csv = Vec::new();
    for (k, d) in chains.iter().enumerate() {
        d.write_long_csv(k, &mut draws_csv, k == 0)?;
    }
    let mut pooled = chains[0].clone();
    for d in &chains[1..] {
        pooled.extend(d)?;
    }
    let summary = summarize(&pooled)?;
    let ll_mean = loglik_at_posterior_mean(&ds, &risk, &pooled, model)?;
    let dic = dic(pooled.loglik(), ll_mean)?;
    let reproducible = summary.without_timing();
    let out = FitOutput {
        model,
        frailty: args.frailty_col.is_some(),
        chains: args.chains,
        iterations: args.iters,
        burnin: args.burnin,
        thin: args.thin,
        seed,
        delta,
        prior_sd: args.prior_sd,
        summary: &reproducible,
        dic,
        stats: pooled.stats,
    };
    let mut table = reproducible.table();
    let _ = writeln!(table, "DIC {:.3} (pD {:.3})", dic.dic, dic.p_d);

    manifest.emit(&args.out_dir, "draws.csv", std::str::from_utf8(&draws_csv)?)?;
    manifest.emit(&args.out_dir, "summary.json", &with_manifest_ref(&out)?)?;
    manifest.emit(&args.out_dir, "summary.txt", &table)?;
    let timing = json!({
        "chain_seconds": chains.iter().map(|d| d.elapsed.as_secs_f64()).collect::<Vec<_>>(),
        "timing": summary.timing,
        "manifest": crate::manifest::MANIFEST_FILE,
    });
    manifest.emit(&args.out_dir, "timing.json", &(serde_json::to_string_pretty(&timing)? + "\n"))?;
    manifest.finish(&args.out_dir)?;
    print!("{table}");
    if let Some(t) = &summary.timing {
        println!("median ESS/sec {:.1} over {:.2}s", t.median_ess_per_sec, t.seconds);
    }
    Ok(())
}

#[derive(Serialize)]
struct MleRow {
    parameter: String,
    estimate: f64,
    se: f64,
    lower: f64,
    upper: f64,
    hazard_ratio: f64,
    hr_lower: f64,
    hr_upper: f64,
}

#[derive(Serialize)]
struct MleOutput<'a> {
    ties: Ties,
    loglik: f64,
    converged: bool,
    n_iter: usize,
    diagnostic: &'a Option<String>,
    coefficients: Vec<MleRow>,
}

fn mle_table(rows: &[MleRow], fit: &MleResult) -> String {
    let w = rows.iter().map(|r| r.parameter.len()).max().unwrap_or(9).max(9);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<w$}  {:>9}  {:>8}  {:>21}  {:>26}",
        "parameter", "estimate", "se", "95% Wald interval", "HR [95% interval]"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<w$}  {:>9.4}  {:>8.4}  {:>21}  {:>26}",
            r.parameter,
            r.estimate,
            r.se,
            format!("[{:.4}, {:.4}]", r.lower, r.upper),
            format!("{:.3} [{:.3}, {:.3}]", r.hazard_ratio, r.hr_lower, r.hr_upper)
        );
    }
    let _ = writeln!(
        out,
        "log partial likelihood {:.6} ({:?} ties, {} iterations)",
        fit.loglik, fit.ties, fit.n_iter
    );
    out
}

pub fn cmd_mle(args: &MleArgs) -> anyhow::Result<()> {
    let ties = match args.ties {
        TiesArg::Breslow => Ties::Breslow,
        TiesArg::Efron => Ties::Efron,
    };
    let config_json = json!({
        "data": args.data.data,
        "time": args.data.time,
        "event": args.data.event,
        "covariates": args.data.covariates,
        "ties": ties,
        "tol": args.tol,
        "max_iter": args.max_iter,
    });
    let mut manifest = RunManifest::start("mle", config_json, None, &args.data.data)?;
    let ds = load(&args.data, None)?;
    let risk = RiskStructure::build(&ds)?;
    let options = NewtonOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        ..NewtonOptions::default()
    };
    let fit = newton_mle(&risk, ds.covariates(), ties, &options)?;
    let rows: Vec<MleRow> = fit
        .beta_hat
        .iter()
        .zip(fit.std_errors())
        .zip(fit.wald_intervals(Z95))
        .zip(ds.covariate_names())
        .map(|(((&b, se), (lo, hi)), name)| MleRow {
            parameter: name.clone(),
            estimate: b,
            se,
            lower: lo,
            upper: hi,
            hazard_ratio: b.exp(),
            hr_lower: lo.exp(),
            hr_upper: hi.exp(),
        })
        .collect();
    let table = mle_table(&rows, &fit);
    let out = MleOutput {
        ties,
        loglik: fit.loglik,
        converged: fit.converged,
        n_iter: fit.n_iter,
        diagnostic: &fit.diagnostic,
        coefficients: rows,
    };
    prepare_out_dir(&args.out_dir)?;
    manifest.emit(&args.out_dir, "mle.json", &with_manifest_ref(&out)?)?;
    manifest.emit(&args.out_dir, "mle.txt", &table)?;
    manifest.finish(&args.out_dir)?;
    if !fit.converged {
        return Err(anyhow::Error::new(Error::NotConverged(
            fit.diagnostic.clone().unwrap_or_else(|| "unknown reason".into()),
        )));
    }
    print!("{table}");
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let mut spec = ScenarioSpec::from_file(&args.config)
        .with_context(|| format!("reading scenario {}", args.config.display()))?;
    if let Some(r) = args.reps {
        spec.replications = r;
    }
    if let Some(seed) = resolve_seed(args.seed)? {
        spec.seed = seed;
    }
    if args.parallel == 0 {
        return Err(validation("--parallel must be at least 1"));
    }
    spec.validate()?;
    let config_json = serde_json::to_value(&spec)?;
    let mut manifest = RunManifest::start("simulate", config_json, Some(spec.seed), &args.config)?;
    let report = run_replications(&spec, args.parallel)?;

    prepare_out_dir(&args.out_dir)?;
    manifest.emit(&args.out_dir, "report.csv", &report.to_csv())?;
    manifest.emit(&args.out_dir, "report.json", &with_manifest_ref(&report)?)?;
    let seconds: serde_json::Map<String, serde_json::Value> = report
        .seconds
        .iter()
        .map(|(m, s)| (m.name().to_string(), json!(s)))
        .collect();
    let timing = json!({ "method_seconds": seconds, "manifest": crate::manifest::MANIFEST_FILE });
    manifest.emit(&args.out_dir, "timing.json", &(serde_json::to_string_pretty(&timing)? + "\n"))?;
    manifest.finish(&args.out_dir)?;

    for j in 0..spec.p() {
        print!("{}", report.table(&format!("x{}", j + 1)));
    }
    if report.n_replications == 1 {
        println!("SD is undefined with a single replication and is reported as absent.");
    }
    for m in &report.methods {
        for (idx, msg) in &m.failures {
            eprintln!("{} failed on replication {idx}: {msg}", m.method.name());
        }
    }
    let succeeded = (report.success_rate() * report.n_replications as f64).round() as usize;
    if report.success_rate() < 0.9 {
        return Err(anyhow::Error::new(BudgetExceeded {
            succeeded,
            total: report.n_replications,
        }));
    }
    Ok(())
}

/// Maps an error to the documented exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<BudgetExceeded>().is_some() {
        return 4;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Divergence { .. } | Error::NotConverged(_) | Error::NotPositiveDefinite | Error::NonFinite(_)) => 3,
        _ => 2,
    }
}
