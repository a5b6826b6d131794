//! Direct continuous-time simulation of the contact process.
//!
//! Every infected site carries total rate `1 + 2dλ`: pick an infected site
//! uniformly, then either recover it or fire an arrow in a uniform direction.
//! This engine shares no code with the graphical sweep and is the reference
//! against which the graphical construction is checked in law.

use std::collections::HashMap;

use rand::Rng;

use crate::lattice::{Configuration, Site};
use crate::streams::{self, StreamRng, TAG_JUMP};

/// A running jump-chain trajectory.
#[derive(Clone, Debug)]
pub struct JumpProcess {
    dim: usize,
    lambda: f64,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    time: f64,
    tau: Option<f64>,
    /// Censoring: infections that would make the diameter reach this value are suppressed.
    diameter_cap: Option<u32>,
    rng: StreamRng,
}

impl JumpProcess {
    pub fn new(eta0: &Configuration, lambda: f64, seed: u64) -> Self {
        let sites = eta0.sites().to_vec();
        let index = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        JumpProcess {
            dim: eta0.dim(),
            lambda,
            sites,
            index,
            time: 0.0,
            tau: if eta0.is_empty() { Some(0.0) } else { None },
            diameter_cap: None,
            rng: streams::stream(seed, &[TAG_JUMP]),
        }
    }

    /// Suppresses every infection whose result would have ℓ∞ diameter `>= cap`.
    pub fn with_diameter_cap(mut self, cap: u32) -> Self {
        self.diameter_cap = Some(cap);
        self
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Absorption time, once absorbed.
    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn is_absorbed(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn config(&self) -> Configuration {
        let mut v = self.sites.clone();
        v.sort_unstable();
        Configuration::from_sorted_unchecked(self.dim, v)
    }

    fn fits_cap(&self, y: &Site, cap: u32) -> bool {
        (0..self.dim).all(|k| {
                let (lo, hi) = self.sites.iter().fold((y.coords()[k], y.coords()[k]), |(lo, hi), s| {
                    (lo.min(s.coords()[k]), hi.max(s.coords()[k]))
                });
            hi.abs_diff(lo) < cap
        })
    }

    /// Runs the chain up to time `t` (no-op if already past it).
    /// Returns `true` while the process is alive at `t`.
    pub fn advance_to(&mut self, t: f64) -> bool {
        let per_site = 1.0 + 2.0 * self.dim as f64 * self.lambda;
        let p_recover = 1.0 / per_site;
        let n_dirs = 2 * self.dim;
        while !self.sites.is_empty() {
            let rate = per_site * self.sites.len() as f64;
            let dt = streams::exponential(&mut self.rng, rate);
            if self.time + dt > t {
                // memoryless: the overshoot is discarded
                self.time = t;
                return true;
            }
            self.time += dt;
            let i = self.rng.random_range(0..self.sites.len());
            let u: f64 = self.rng.random();
            if u < p_recover {
                let x = self.sites.swap_remove(i);
                self.index.remove(&x);
                if i < self.sites.len() {
                    self.index.insert(self.sites[i], i);
                }
                if self.sites.is_empty() {
                    self.tau = Some(self.time);
                    return false;
                }
            } else {
                let dir = self.rng.random_range(0..n_dirs);
                let y = self.sites[i].neighbor(dir);
                if !self.index.contains_key(&y) {
                    if let Some(cap) = self.diameter_cap {
                        if !self.fits_cap(&y, cap) {
                            continue;
                        }
                    }
                    self.index.insert(y, self.sites.len());
                    self.sites.push(y);
                }
            }
        }
        self.time = self.time.max(t);
        false
    }
}

/// One sample of `η_t` started from `eta0`.
pub fn jump_evolve(eta0: &Configuration, lambda: f64, t: f64, seed: u64) -> Configuration {
    let mut p = JumpProcess::new(eta0, lambda, seed);
    p.advance_to(t);
    p.config()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom_ok(hits: usize, n: usize, p: f64) -> bool {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        (hits as f64 / n as f64 - p).abs() < 3.0 * sigma
    }

    #[test]
    fn single_clock_survival() {
        let eta0 = Configuration::interval(0, 0);
        let n = 100_000;
        let alive = (0..n).filter(|&s| !jump_evolve(&eta0, 0.0, 1.0, s as u64).is_empty()).count();
        assert!(binom_ok(alive, n, (-1.0f64).exp()), "{alive}");
    }

    #[test]
    fn independent_clocks_survival() {
        let eta0 = Configuration::interval(0, 3);
        let t: f64 = 0.8;
        let p = 1.0 - (1.0 - (-t).exp()).powi(4);
        let n = 50_000;
        let alive = (0..n).filter(|&s| !jump_evolve(&eta0, 0.0, t, 1_000 + s as u64).is_empty()).count();
        assert!(binom_ok(alive, n, p), "{alive}");
    }

    #[test]
    fn zero_rate_never_moves() {
        let eta0 = Configuration::interval(2, 6);
        for s in 0..200 {
            let c = jump_evolve(&eta0, 0.0, 0.5, s);
            assert!(c.is_subset(&eta0));
        }
    }

    #[test]
    fn tau_recorded() {
        let mut p = JumpProcess::new(&Configuration::interval(0, 0), 0.5, 9);
        while p.advance_to(p.time() + 1.0) {}
        let tau = p.tau().unwrap();
        assert!(tau > 0.0 && tau <= p.time());
    }

    #[test]
    fn cap_bounds_diameter() {
        let eta0 = Configuration::interval(0, 0);
        for s in 0..200 {
            let mut p = JumpProcess::new(&eta0, 1.5, s).with_diameter_cap(4);
            p.advance_to(5.0);
            let c = p.config();
            if !c.is_empty() {
                assert!(c.diameter().unwrap() < 4);
            }
        }
    }
}
