//! Experiment specification: CLI flags, optionally seeded from a JSON file.

use std::path::{Path, PathBuf};

use clap::Args;
use contact_qsd::exact::Truncation;
use contact_qsd::trajectory::Engine;
use contact_qsd::{Configuration, Error, Result};
use serde::{Deserialize, Serialize};

/// Every flag is optional so that a config file can supply it; the file's
/// keys are the flag names with `-` replaced by `_`.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Lattice dimension.
    #[arg(long = "d")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Infection rate per directed edge.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Initial configuration ("0;1;3", "0,0;1,0") or "sample:eigen" / "sample:fviot".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta0: Option<String>,
    /// Time horizon.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Comma list "1,2,4" or range "start:stop:step".
    #[arg(long = "time-grid")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    /// Fleming-Viot particle count.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[arg(long = "t-burn")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_burn: Option<f64>,
    #[arg(long = "t-sample")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_sample: Option<f64>,
    /// Truncation width: states have diameter < W.
    #[arg(long = "W")]
    #[serde(rename = "W", skip_serializing_if = "Option::is_none")]
    pub w: Option<u32>,
    /// Widths for `sweep`, comma separated.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<String>,
    /// Radius R (default e^{sqrt t}).
    #[arg(long = "R")]
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, env = "CONTACTQSD_WORKERS")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// "jump-chain" or "graphical".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
    /// "censor" or "kill".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Use the finite-window break check with this margin instead of the exact dual check.
    #[arg(long = "window-margin")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_margin: Option<u32>,
    /// Number of pmf entries reported.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top: Option<usize>,
    #[arg(long = "n-boot")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_boot: Option<usize>,
    /// Reference QSD for `diamgap`: "eigen" or "fviot".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    /// JSON summary path (stdout when absent).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Per-replica JSON lines.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jsonl: Option<PathBuf>,
    /// `exact`: write `<prefix>.coo` and `<prefix>.states`.
    #[arg(long = "export-prefix")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub export_prefix: Option<PathBuf>,
    /// JSON file with default values for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Re-run the experiment recorded in this summary and compare byte for byte.
    #[arg(long = "verify-manifest")]
    #[serde(skip)]
    pub verify_manifest: Option<PathBuf>,
}

macro_rules! overlay {
    ($cli:ident, $file:ident, $($f:ident),*) => {
        $( if $cli.$f.is_none() { $cli.$f = $file.$f; } )*
    };
}

impl ExperimentSpec {
    /// Fills unset flags from the config file, if one was given.
    pub fn resolve(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let file = Self::load(&path)?;
        overlay!(
            self, file, d, lambda, eta0, t, time_grid, replicas, particles, t_burn, t_sample, w, widths, r, beta, seed,
            workers, engine, truncation, tolerance, window_margin, top, n_boot, reference, out, csv, jsonl,
            export_prefix
        );
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))
    }

    /// The part of the spec that determines the results: no paths, no worker count.
    pub fn echo(&self) -> Self {
        ExperimentSpec {
            workers: None,
            out: None,
            csv: None,
            jsonl: None,
            export_prefix: None,
            config: None,
            verify_manifest: None,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> Result<usize> {
        let d = self.d.unwrap_or(1);
        if !(1..=contact_qsd::lattice::MAX_DIM).contains(&d) {
            return Err(Error::Usage(format!("--d must be in 1..={}, got {d}", contact_qsd::lattice::MAX_DIM)));
        }
        Ok(d)
    }

    pub fn lambda(&self) -> Result<f64> {
        let l = self.lambda.ok_or_else(|| Error::Usage("--lambda is required".into()))?;
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::Usage(format!("--lambda must be finite and >= 0, got {l}")));
        }
        Ok(l)
    }

    pub fn time(&self) -> Result<f64> {
        let t = self.t.ok_or_else(|| Error::Usage("--t is required".into()))?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Usage(format!("--t must be positive, got {t}")));
        }
        Ok(t)
    }

    pub fn time_grid(&self) -> Result<Option<Vec<f64>>> {
        self.time_grid.as_deref().map(parse_grid).transpose()
    }

    pub fn replicas(&self, default: u64) -> Result<u64> {
        let n = self.replicas.unwrap_or(default);
        if n == 0 {
            return Err(Error::Usage("--replicas must be at least 1".into()));
        }
        Ok(n)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn workers(&self) -> Result<usize> {
        let w = self.workers.unwrap_or(1);
        if w == 0 {
            return Err(Error::Usage("--workers must be at least 1".into()));
        }
        Ok(w)
    }

    pub fn engine(&self) -> Result<Engine> {
        self.engine.as_deref().map_or(Ok(Engine::default()), str::parse).map_err(usage)
    }

    pub fn truncation(&self) -> Result<Truncation> {
        match self.truncation.as_deref() {
            None | Some("censor") => Ok(Truncation::Censor),
            Some("kill") => Ok(Truncation::Kill),
            Some(other) => Err(Error::Usage(format!("unknown truncation {other:?}"))),
        }
    }

    pub fn width(&self) -> u32 {
        self.w.unwrap_or(12)
    }

    pub fn widths(&self) -> Result<Vec<u32>> {
        let text = self.widths.as_deref().unwrap_or("6,8,10,12");
        text.split(',')
            .map(|s| s.trim().parse::<u32>().map_err(|e| Error::Usage(format!("bad width {s:?}: {e}"))))
            .collect()
    }

    pub fn top(&self) -> usize {
        self.top.unwrap_or(20)
    }

    pub fn n_boot(&self) -> usize {
        self.n_boot.unwrap_or(200)
    }

    /// A fixed initial configuration (sampling is handled by the caller).
    pub fn fixed_eta0(&self, dim: usize) -> Result<Configuration> {
        let text = self.eta0.as_deref().unwrap_or("0");
        if text.starts_with("sample:") {
            return Err(Error::Usage("this subcommand needs a fixed --eta0".into()));
        }
        let c = Configuration::parse_with_dim(text, dim).map_err(usage)?;
        if c.is_empty() {
            return Err(Error::Usage("--eta0 must be non-empty".into()));
        }
        Ok(c)
    }
}

fn usage(e: Error) -> Error {
    match e {
        Error::Parse(m) => Error::Usage(m),
        other => other,
    }
}

/// "a,b,c" or "start:stop:step" (inclusive of `stop` up to rounding).
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Usage(format!("bad time {s:?}: {e}")));
    let grid: Vec<f64> = if let [a, b, step] = text.split(':').collect::<Vec<_>>()[..] {
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || b < a {
            return Err(Error::Usage(format!("bad time range {text:?}")));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| a + k as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("time grid must be positive and strictly increasing".into()));
    }
    Ok(grid)
}
