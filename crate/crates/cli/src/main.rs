//! `contactqsd`: experiment runner for the contact-qsd toolkit.
//!
//! Exit codes: 0 success, 2 usage or I/O error, 3 numerical or degenerate-sample error.
//! Errors are also reported on stderr as a JSON object.

mod commands;
mod spec;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use contact_qsd::{Error, Result};
use serde_json::{json, Value};

use crate::commands::Outcome;
use crate::spec::ExperimentSpec;

#[derive(Parser, Debug)]
#[command(name = "contactqsd", version, about = "Contact process quasi-stationary distribution laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate trajectories and record snapshots.
    Simulate(ExperimentSpec),
    /// Conditioned Monte Carlo estimate of the QSD at time t.
    Yaglom(ExperimentSpec),
    /// Fleming-Viot particle estimate of the QSD and absorption rate.
    Fviot(ExperimentSpec),
    /// Exact QSD of the diameter-truncated chain.
    Exact(ExperimentSpec),
    /// Exact solver over several truncation widths.
    Sweep(ExperimentSpec),
    /// Cut break points and good points per replica.
    Structures(ExperimentSpec),
    /// Diameter factorization gap statistic.
    Diamgap(ExperimentSpec),
    /// Closed-form checks of the simulators and solver.
    Selftest(ExperimentSpec),
}

impl Command {
    fn split(self) -> (&'static str, ExperimentSpec) {
        match self {
            Command::Simulate(s) => ("simulate", s),
            Command::Yaglom(s) => ("yaglom", s),
            Command::Fviot(s) => ("fviot", s),
            Command::Exact(s) => ("exact", s),
            Command::Sweep(s) => ("sweep", s),
            Command::Structures(s) => ("structures", s),
            Command::Diamgap(s) => ("diamgap", s),
            Command::Selftest(s) => ("selftest", s),
        }
    }
}

fn dispatch(name: &str, spec: &ExperimentSpec) -> Result<Outcome> {
    match name {
        "simulate" => commands::simulate(spec),
        "yaglom" => commands::yaglom(spec),
        "fviot" => commands::fviot(spec),
        "exact" => commands::exact(spec),
        "sweep" => commands::sweep(spec),
        "structures" => commands::structures_cmd(spec),
        "diamgap" => commands::diamgap(spec),
        "selftest" => commands::selftest(spec),
        other => Err(Error::Usage(format!("unknown subcommand {other:?}"))),
    }
}

/// Summary text: deterministic given the manifest, independent of worker count.
fn summary_text(name: &str, spec: &ExperimentSpec, outcome: &Outcome) -> Result<String> {
    let summary = json!({
        "manifest": {
            "tool": "contactqsd",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": name,
            "spec": spec.echo(),
        },
        "result": outcome.result,
    });
    Ok(serde_json::to_string_pretty(&summary)? + "\n")
}

fn write_artifact(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))
}

fn run(name: &str, spec: ExperimentSpec) -> Result<()> {
    let spec = spec.resolve()?;
    if let Some(path) = &spec.verify_manifest {
        return verify(path, spec.workers);
    }
    let started = Instant::now();
    let outcome = dispatch(name, &spec)?;
    for w in &outcome.warnings {
        eprintln!("{}", json!({ "warning": w }));
    }
    let text = summary_text(name, &spec, &outcome)?;
    let timing = json!({
        "wall_seconds": started.elapsed().as_secs_f64(),
        "workers": spec.workers()?,
    });
    match &spec.out {
        Some(path) => {
            write_artifact(path, &text)?;
            let mut side = path.clone().into_os_string();
            side.push(".timing.json");
            write_artifact(Path::new(&side), &(serde_json::to_string_pretty(&timing)? + "\n"))?;
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            eprintln!("{}", json!({ "timing": timing }));
        }
    }
    if let (Some(path), Some(body)) = (&spec.csv, &outcome.csv) {
        write_artifact(path, body)?;
    }
    if let (Some(path), Some(body)) = (&spec.jsonl, &outcome.jsonl) {
        write_artifact(path, body)?;
    }
    Ok(())
}

/// Re-runs the experiment recorded in a summary file and compares the bytes.
fn verify(path: &Path, workers: Option<usize>) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let recorded: Value = serde_json::from_str(&text)?;
    let manifest = &recorded["manifest"];
    let name = manifest["subcommand"]
        .as_str()
        .ok_or_else(|| Error::Parse(format!("{} has no manifest", path.display())))?;
    if manifest["version"] != env!("CARGO_PKG_VERSION") {
        eprintln!("{}", json!({ "warning": format!("summary was written by version {}", manifest["version"]) }));
    }
    let mut spec: ExperimentSpec = serde_json::from_value(manifest["spec"].clone())
        .map_err(|e| Error::Parse(format!("manifest spec: {e}")))?;
    spec.workers = workers;
    let again = summary_text(name, &spec, &dispatch(name, &spec)?)?;
    if again == text {
        println!("{}", json!({ "verified": true, "summary": path }));
        Ok(())
    } else {
        let first = again.lines().zip(text.lines()).position(|(a, b)| a != b);
        Err(Error::Numerical {
            message: format!("re-run differs from {} (first differing line: {:?})", path.display(), first.map(|k| k + 1)),
            residual: f64::NAN,
        })
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.to_string().trim_end().to_owned(), 2);
        }
    };
    let (name, spec) = cli.command.split();
    match run(name, spec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string(), if e.is_usage() { 2 } else { 3 }),
    }
}
