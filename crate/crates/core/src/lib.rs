//! Simulation and numerical toolkit for the subcritical contact process on
//! `Z^d` modulo translations.
//!
//! * [`lattice`]: configurations, canonical representatives, boxes and shells.
//! * [`field`]: Poisson event fields and open-path evolution.
//! * [`jump`]: direct jump-chain simulation, the independent reference engine.
//! * [`qsd`]: Monte Carlo estimators of the quasi-stationary distribution.
//! * [`exact`]: truncated generator and its Perron eigenpair.
//! * [`structures`]: good points, cut and break points, the diameter gap statistic.

pub mod aggregate;
pub mod error;
pub mod exact;
pub mod field;
pub mod jump;
pub mod lattice;
pub mod parallel;
pub mod qsd;
pub mod stats;
pub mod streams;
pub mod structures;
pub mod trajectory;

pub use error::{Error, Result};
pub use field::{EventField, SpaceTimePoint, StreamKey};
pub use lattice::{lex_compare, CanonicalConfig, Configuration, Quotient, Region, RegionKind, Site};
pub use qsd::{Method, QsdEstimate, SurvivalCurve};
