//! One function per subcommand. Each returns the result part of the summary
//! plus optional CSV / JSON-lines bodies; nothing here touches the filesystem
//! except the generator export.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;

use contact_qsd::aggregate::StateCounts;
use contact_qsd::exact::{self, EigenOptions, EigenSolution, TruncatedGenerator};
use contact_qsd::lattice::{CanonicalConfig, Configuration};
use contact_qsd::parallel::map_reduce;
use contact_qsd::qsd::{self, FlemingViotConfig, McConfig, QsdEstimate, StartLaw};
use contact_qsd::stats;
use contact_qsd::streams::replica_seed;
use contact_qsd::structures::{self, BreakCheck, StructureParams};
use contact_qsd::trajectory::{self, TrajectoryRecord};
use contact_qsd::{Error, Result};
use serde_json::{json, Value};

use crate::spec::ExperimentSpec;

#[derive(Default)]
pub struct Outcome {
    pub result: Value,
    pub csv: Option<String>,
    pub jsonl: Option<String>,
    pub warnings: Vec<String>,
}

/// Survivor counts below this trigger a warning.
const FEW_SURVIVORS: u64 = 100;

fn report(est: &QsdEstimate, top: usize) -> Value {
    let r = est.report(top);
    json!({
        "method": est.method,
        "n_effective": est.n_effective,
        "alpha_hat": est.alpha_hat,
        "alpha_stderr": est.alpha_stderr,
        "support_size": r.support_size,
        "support_truncated": r.support_truncated,
        "top": r.entries.iter().map(|(z, p)| json!({"state": z, "p": p})).collect::<Vec<_>>(),
        "other": r.other,
    })
}

fn pmf_csv(pmf: impl Iterator<Item = (CanonicalConfig, f64)>) -> String {
    let mut out = String::from("state,probability\n");
    for (z, p) in pmf {
        writeln!(out, "\"{z}\",{p}").expect("string write");
    }
    out
}

fn eigen_options(spec: &ExperimentSpec) -> EigenOptions {
    EigenOptions { tolerance: spec.tolerance.unwrap_or(exact::DEFAULT_TOLERANCE), ..EigenOptions::default() }
}

fn solve_eigen(spec: &ExperimentSpec, dim: usize, lambda: f64) -> Result<(TruncatedGenerator, EigenSolution)> {
    let g = exact::build_generator_with(dim, spec.width(), lambda, spec.truncation()?)?;
    let sol = exact::qsd_eigen(&g, eigen_options(spec))?;
    Ok((g, sol))
}

fn fv_config(spec: &ExperimentSpec, dim: usize, lambda: f64) -> FlemingViotConfig {
    FlemingViotConfig {
        dim,
        particles: spec.particles.unwrap_or(1000),
        lambda,
        t_burn: spec.t_burn.unwrap_or(50.0),
        t_sample: spec.t_sample.unwrap_or(200.0),
        seed: spec.seed(),
        initial: None,
    }
}

/// QSD estimate named by `sample:<method>` or `--reference`.
fn reference_estimate(method: &str, spec: &ExperimentSpec, dim: usize, lambda: f64) -> Result<QsdEstimate> {
    match method {
        "eigen" => {
            let (g, sol) = solve_eigen(spec, dim, lambda)?;
            Ok(sol.estimate(&g))
        }
        "fviot" | "fleming-viot" => qsd::fleming_viot_estimate(&fv_config(spec, dim, lambda)),
        other => Err(Error::Usage(format!("unknown QSD source {other:?}; use eigen or fviot"))),
    }
}

fn start_law(spec: &ExperimentSpec, dim: usize, lambda: f64) -> Result<(StartLaw, String)> {
    let text = spec.eta0.clone().unwrap_or_else(|| "0".into());
    match text.strip_prefix("sample:") {
        Some(method) => Ok((StartLaw::from_estimate(&reference_estimate(method, spec, dim, lambda)?)?, text)),
        None => Ok((StartLaw::Fixed(spec.fixed_eta0(dim)?), text)),
    }
}

fn mc_config(spec: &ExperimentSpec, lambda: f64, default_replicas: u64) -> Result<McConfig> {
    Ok(McConfig::new(lambda, spec.replicas(default_replicas)?, spec.seed())
        .with_engine(spec.engine()?)
        .with_workers(spec.workers()?))
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn simulate(spec: &ExperimentSpec) -> Result<Outcome> {
    let dim = spec.dim()?;
    let lambda = spec.lambda()?;
    let times = match spec.time_grid()? {
        Some(g) => g,
        None => vec![spec.time()?],
    };
    let cfg = mc_config(spec, lambda, 1)?;
    let (law, _) = start_law(spec, dim, lambda)?;
    let records: Vec<std::result::Result<TrajectoryRecord, String>> =
        map_reduce(cfg.n_replicas, cfg.workers, Vec::new, |i, acc| {
            let rs = replica_seed(cfg.seed, i);
            acc.push(trajectory::simulate(cfg.engine, &law.draw(rs), lambda, &times, rs).map_err(|e| e.to_string()));
        })?;
    let records = records.into_iter().collect::<std::result::Result<Vec<_>, _>>().map_err(Error::Usage)?;
    let alive: Vec<u64> =
        (0..times.len()).map(|k| records.iter().filter(|r| r.snapshots[k].is_some()).count() as u64).collect();
    let mut csv = String::from("replica,seed,tau,time,state\n");
    let mut jsonl = String::new();
    for (i, r) in records.iter().enumerate() {
        for (t, s) in r.snapshot_times.iter().zip(&r.snapshots) {
            let state = s.as_ref().map(|z| z.to_string()).unwrap_or_default();
            writeln!(csv, "{i},{},{},{t},\"{state}\"", r.seed, opt_num(r.tau)).expect("string write");
        }
        writeln!(jsonl, "{}", serde_json::to_string(r)?).expect("string write");
    }
    Ok(Outcome {
        result: json!({
            "replicas": cfg.n_replicas,
            "times": times,
            "alive": alive,
            "records": if records.len() <= 100 { json!(records) } else { Value::Null },
        }),
        csv: Some(csv),
        jsonl: Some(jsonl),
        warnings: Vec::new(),
    })
}

pub fn yaglom(spec: &ExperimentSpec) -> Result<Outcome> {
    let dim = spec.dim()?;
    let lambda = spec.lambda()?;
    let t = spec.time()?;
    let cfg = mc_config(spec, lambda, 1000)?;
    let (law, eta0_text) = start_law(spec, dim, lambda)?;
    let mut out = Outcome::default();
    let counts: StateCounts = if spec.csv.is_some() {
        let rows: Vec<(u64, Option<f64>, Option<CanonicalConfig>)> =
            map_reduce(cfg.n_replicas, cfg.workers, Vec::new, |i, acc| {
                let rs = replica_seed(cfg.seed, i);
                let r = trajectory::simulate(cfg.engine, &law.draw(rs), lambda, &[t], rs).expect("validated");
                acc.push((rs, r.tau, r.snapshots.into_iter().next().flatten()));
            })?;
        let mut csv = String::from("replica,seed,tau,state\n");
        let mut counts = StateCounts::default();
        for (i, (seed, tau, z)) in rows.into_iter().enumerate() {
            let state = z.as_ref().map(|z| z.to_string()).unwrap_or_default();
            writeln!(csv, "{i},{seed},{},\"{state}\"", opt_num(tau)).expect("string write");
            counts.record(z);
        }
        out.csv = Some(csv);
        counts
    } else {
        qsd::yaglom_counts(&law, t, &cfg)?
    };
    if counts.survivors < FEW_SURVIVORS {
        out.warnings.push(format!(
            "only {} of {} replicas survived to t={t}; conditioning needs about e^(alpha t) replicas",
            counts.survivors, counts.replicas
        ));
    }
    let survival = counts.survivors as f64 / counts.replicas as f64;
    if counts.survivors == 0 {
        return Err(Error::Degenerate { survivors: 0, replicas: counts.replicas, survival: 0.0 });
    }
    let est = qsd::estimate_from_counts(&counts)?;
    let mut result = json!({
        "eta0": eta0_text,
        "t": t,
        "replicas": counts.replicas,
        "survivors": counts.survivors,
        "survival": survival,
        "survival_stderr": stats::binomial_se(survival, counts.replicas),
        "qsd": report(&est, spec.top()),
    });
    if let Some(grid) = spec.time_grid()? {
        let curve = qsd::survival_curve(&law, &grid, &cfg)?;
        let fit = match qsd::estimate_alpha(&curve) {
            Ok(f) => json!(f),
            Err(e @ Error::InsufficientData(_)) => json!({"error": e.to_string()}),
            Err(e) => return Err(e),
        };
        result["survival_curve"] = json!(curve);
        result["alpha_fit"] = fit;
    }
    out.result = result;
    Ok(out)
}

pub fn fviot(spec: &ExperimentSpec) -> Result<Outcome> {
    let dim = spec.dim()?;
    let lambda = spec.lambda()?;
    let cfg = fv_config(spec, dim, lambda);
    let est = qsd::fleming_viot_estimate(&cfg)?;
    Ok(Outcome {
        result: json!({
            "particles": cfg.particles,
            "t_burn": cfg.t_burn,
            "t_sample": cfg.t_sample,
            "qsd": report(&est, spec.top()),
        }),
        csv: Some(pmf_csv(est.pmf.into_iter())),
        ..Outcome::default()
    })
}

pub fn exact(spec: &ExperimentSpec) -> Result<Outcome> {
    let dim = spec.dim()?;
    let lambda = spec.lambda()?;
    let (g, sol) = solve_eigen(spec, dim, lambda)?;
    if let Some(prefix) = &spec.export_prefix {
        let with_ext = |ext: &str| {
            let mut p = prefix.clone().into_os_string();
            p.push(ext);
            std::path::PathBuf::from(p)
        };
        g.export_coo(BufWriter::new(File::create(with_ext(".coo"))?))?;
        g.export_states(BufWriter::new(File::create(with_ext(".states"))?))?;
    }
    let top = sol.top(&g, spec.top());
    let top_mass: f64 = top.iter().map(|e| e.1).sum();
    let csv = spec.csv.is_some().then(|| {
        pmf_csv(sol.nu.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, &p)| (g.space().state(i), p)))
    });
    Ok(Outcome {
        result: json!({
            "W": g.space().width(),
            "truncation": g.truncation(),
            "n_states": g.n_states(),
            "nnz": g.nnz(),
            "alpha": sol.alpha,
            "residual": sol.residual,
            "iterations": sol.iterations,
            "uniformization": sol.uniformization,
            "qsd": {
                "method": "eigen",
                "top": top.iter().map(|(z, p)| json!({"state": z, "p": p})).collect::<Vec<_>>(),
                "other": 1.0 - top_mass,
            },
        }),
        csv,
        ..Outcome::default()
    })
}

pub fn sweep(spec: &ExperimentSpec) -> Result<Outcome> {
    let dim = spec.dim()?;
    let lambda = spec.lambda()?;
    let rows = exact::truncation_sweep(dim, lambda, &spec.widths()?, spec.truncation()?, eigen_options(spec))?;
    let mut csv = String::from("W,n_states,alpha,residual,iterations,tv_next,alpha_delta_next\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.width,
            r.n_states,
            r.alpha,
            r.residual,
            r.iterations,
            opt_num(r.tv_next),
            opt_num(r.alpha_delta_next)
        )
        .expect("string write");
    }
    Ok(Outcome { result: json!({ "rows": rows }), csv: Some(csv), ..Outcome::default() })
}

pub fn structures_cmd(spec: &ExperimentSpec) -> Result<Outcome> {
    let dim = spec.dim()?;
    let lambda = spec.lambda()?;
    let t = spec.time()?;
    let eta0 = spec.fixed_eta0(dim)?;
    let beta = spec.beta.unwrap_or(structures::DEFAULT_BETA);
    let check = match spec.window_margin {
        None => BreakCheck::Dual,
        Some(margin) => BreakCheck::Window { budget: structures::jump_budget(beta, t)?, margin },
    };
    let params = StructureParams {
        lambda,
        t,
        radius: spec.r.unwrap_or_else(|| structures::default_radius(t)),
        beta,
        check,
        flags: true,
    };
    let n = spec.replicas(1000)?;
    let scan = structures::structure_scan(&eta0, &params, n, spec.seed(), spec.workers()?)?;
    let mut csv = String::from("replica,seed,tau,X,Y,S,G,G_hat,G_tilde\n");
    let mut jsonl = String::new();
    let site = |s: Option<contact_qsd::Site>| s.map(|s| s.to_string()).unwrap_or_default();
    for (i, r) in scan.records.iter().enumerate() {
        let flag = |f: fn(&structures::GoodFlags) -> bool| r.good.as_ref().map(|g| f(g).to_string()).unwrap_or_default();
        writeln!(
            csv,
            "{i},{},{},\"{}\",\"{}\",{},{},{},{}",
            r.seed,
            opt_num(r.tau),
            site(r.x),
            site(r.y),
            r.s.map(|s| s.to_string()).unwrap_or_default(),
            flag(|g| g.g),
            flag(|g| g.g_hat),
            flag(|g| g.g_tilde)
        )
        .expect("string write");
        writeln!(jsonl, "{}", serde_json::to_string(r)?).expect("string write");
    }
    Ok(Outcome {
        result: json!({
            "eta0": eta0,
            "t": t,
            "R": params.radius,
            "beta": beta,
            "break_check": check,
            "replicas": scan.replicas,
            "survivors": scan.survivors,
            "early": scan.early,
            "early_fraction": scan.early_fraction,
            "early_stderr": scan.early_stderr,
            "good_tilde": scan.good_tilde,
        }),
        csv: Some(csv),
        jsonl: Some(jsonl),
        warnings: Vec::new(),
    })
}

pub fn diamgap(spec: &ExperimentSpec) -> Result<Outcome> {
    let dim = spec.dim()?;
    let lambda = spec.lambda()?;
    let t = spec.time()?;
    let zeta0 = spec.fixed_eta0(dim)?.canonicalize().alive().expect("non-empty");
    let r = spec.r.unwrap_or_else(|| structures::default_radius(t));
    let source = spec.reference.clone().unwrap_or_else(|| "eigen".into());
    let reference = reference_estimate(&source, spec, dim, lambda)?;
    let cfg = mc_config(spec, lambda, 10_000)?;
    let counts = qsd::yaglom_counts(&StartLaw::fixed(&zeta0), t, &cfg)?;
    let gap = structures::gap_from_counts(&counts, &reference, r, spec.n_boot(), cfg.seed)?;
    let mut csv = String::from("state,empirical,reference\n");
    for (z, c) in &counts.counts {
        writeln!(csv, "\"{z}\",{},{}", *c as f64 / counts.survivors as f64, reference.probability(z))
            .expect("string write");
    }
    Ok(Outcome {
        result: json!({
            "zeta0": zeta0,
            "t": t,
            "R": r,
            "reference": source,
            "gap": gap,
        }),
        csv: Some(csv),
        ..Outcome::default()
    })
}

/// Closed-form checks at `λ = 0` plus the two small exact cases.
pub fn selftest(spec: &ExperimentSpec) -> Result<Outcome> {
    let seed = spec.seed();
    let workers = spec.workers()?;
    let mut checks: Vec<Value> = Vec::new();
    let mut record = |name: &str, pass: bool, detail: Value| {
        checks.push(json!({"check": name, "pass": pass, "detail": detail}));
    };

    let grid = [1.0, 2.0, 3.0];
    let n = 100_000;
    let curve = qsd::survival_curve(
        &StartLaw::Fixed(Configuration::interval(0, 4)),
        &grid,
        &McConfig::new(0.0, n, seed).with_workers(workers),
    )?;
    for ((t, s), se) in grid.iter().zip(&curve.survival_prob).zip(&curve.stderr) {
        let exact = 1.0 - (1.0 - (-t as f64).exp()).powi(5);
        let sigma = stats::binomial_se(exact, n);
        record(
            &format!("survival of 5 independent sites at t={t}"),
            (s - exact).abs() <= 3.0 * sigma,
            json!({"estimate": s, "stderr": se, "exact": exact}),
        );
    }

    let one: CanonicalConfig = "0".parse()?;
    let est = qsd::yaglom_estimate(&StartLaw::fixed(&one), 3.0, &McConfig::new(0.0, 10_000, seed).with_workers(workers))?;
    record("conditioned singleton stays put", est.probability(&one) == 1.0, json!({"support": est.pmf.len()}));

    let t = 1.0f64;
    let p = (-t).exp();
    let counts = qsd::yaglom_counts(
        &StartLaw::fixed(&"0;3".parse()?),
        t,
        &McConfig::new(0.0, 100_000, seed).with_workers(workers),
    )?;
    let est = qsd::estimate_from_counts(&counts)?;
    let both = p / (2.0 - p);
    let sd = stats::binomial_se(both, counts.survivors);
    let got = est.probability(&"0;3".parse()?);
    record("two clocks conditioned on survival", (got - both).abs() <= 3.0 * sd, json!({"estimate": got, "exact": both}));

    let fv = qsd::fleming_viot_estimate(&FlemingViotConfig {
        dim: 1,
        particles: 200,
        lambda: 0.0,
        t_burn: 10.0,
        t_sample: 20.0,
        seed,
        initial: Some("0;2".parse()?),
    })?;
    let mass = fv.probability(&one);
    record("Fleming-Viot at zero infection rate", mass > 0.99, json!({"mass_on_singleton": mass}));

    let g1 = exact::build_generator(1, 1, 0.0)?;
    let a1 = exact::qsd_eigen(&g1, EigenOptions::default())?.alpha;
    record("exact solver W=1", (a1 - 1.0).abs() < 1e-12, json!({"alpha": a1}));
    let g2 = exact::build_generator(1, 2, 1.0)?;
    let s2 = exact::qsd_eigen(&g2, EigenOptions::default())?;
    let closed = (5.0 - 17f64.sqrt()) / 2.0;
    record(
        "exact solver W=2 closed form",
        (s2.alpha - closed).abs() < 1e-10 && s2.residual < 1e-10,
        json!({"alpha": s2.alpha, "closed_form": closed, "residual": s2.residual}),
    );

    let failed = checks.iter().filter(|c| c["pass"] == false).count();
    let result = json!({"checks": checks, "failed": failed});
    if failed > 0 {
        return Err(Error::Numerical { message: format!("{failed} selftest checks failed: {result}"), residual: f64::NAN });
    }
    Ok(Outcome { result, ..Outcome::default() })
}
