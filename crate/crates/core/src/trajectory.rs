//! Single-replica trajectories under either simulation engine.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::EventField;
use crate::jump::JumpProcess;
use crate::lattice::{Configuration, Quotient};
use crate::streams::{derive_seed, TAG_FIELD};

/// How trajectories are generated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Direct jump chain (fast).
    #[default]
    JumpChain,
    /// Open paths of a Poisson event field.
    Graphical,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jump" | "jump-chain" => Ok(Engine::JumpChain),
            "graphical" => Ok(Engine::Graphical),
            other => Err(Error::Parse(format!("unknown engine {other:?}"))),
        }
    }
}

/// One simulated path of `ζ_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub lambda: f64,
    pub eta0: Configuration,
    /// Absorption time; `None` when the process is still alive at the last snapshot.
    pub tau: Option<f64>,
    pub snapshot_times: Vec<f64>,
    /// Canonical state at each snapshot time; `None` once absorbed.
    pub snapshots: Vec<Option<crate::lattice::CanonicalConfig>>,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("snapshot times must be finite, non-negative and increasing"));
    }
    Ok(())
}

/// Simulates one replica from `eta0` and records `ζ` at the given times.
pub fn simulate(engine: Engine, eta0: &Configuration, lambda: f64, times: &[f64], seed: u64) -> Result<TrajectoryRecord> {
    check_times(times)?;
    let mut snapshots = Vec::with_capacity(times.len());
    let tau;
    match engine {
        Engine::JumpChain => {
            let mut p = JumpProcess::new(eta0, lambda, seed);
            for &t in times {
                p.advance_to(t);
                snapshots.push(p.config().canonicalize().alive());
            }
            tau = p.tau();
        }
        Engine::Graphical => {
            let horizon = times.last().copied().unwrap_or(0.0).max(1.0);
            let field = EventField::poisson(derive_seed(seed, &[TAG_FIELD]), eta0.dim(), lambda, horizon)?;
            let mut current = eta0.clone();
            let mut now = 0.0;
            let mut died = if eta0.is_empty() { Some(0.0) } else { None };
            for &t in times {
                if died.is_none() {
                    let e = field.evolve_tracked(&current, now, t);
                    current = e.config;
                    died = e.extinction;
                    now = t;
                }
                snapshots.push(current.canonicalize().alive());
            }
            tau = died;
        }
    }
    Ok(TrajectoryRecord {
        seed,
        lambda,
        eta0: eta0.clone(),
        tau,
        snapshot_times: times.to_vec(),
        snapshots,
    })
}

/// State at time `t` only.
pub fn final_state(engine: Engine, eta0: &Configuration, lambda: f64, t: f64, seed: u64) -> Result<Quotient> {
    Ok(match engine {
        Engine::JumpChain => {
            let mut p = JumpProcess::new(eta0, lambda, seed);
            p.advance_to(t);
            p.config().canonicalize()
        }
        Engine::Graphical => {
            let field = EventField::poisson(derive_seed(seed, &[TAG_FIELD]), eta0.dim(), lambda, t.max(1e-9))?;
            field.evolve(eta0, 0.0, t).canonicalize()
        }
    })
}

/// Absorption time if it happens before `t_max`.
pub fn absorption_time(engine: Engine, eta0: &Configuration, lambda: f64, t_max: f64, seed: u64) -> Result<Option<f64>> {
    Ok(match engine {
        Engine::JumpChain => {
            let mut p = JumpProcess::new(eta0, lambda, seed);
            p.advance_to(t_max);
            p.tau()
        }
        Engine::Graphical => {
            let field = EventField::poisson(derive_seed(seed, &[TAG_FIELD]), eta0.dim(), lambda, t_max.max(1e-9))?;
            field.evolve_tracked(eta0, 0.0, t_max).extinction
        }
    })
}
