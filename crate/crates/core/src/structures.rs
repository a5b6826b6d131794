//! Space-time structures of a realized event field: λ-path jump counts,
//! good points, cut break points, and the diameter-factorization gap.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::aggregate::StateCounts;
use crate::error::{Error, Result};
use crate::field::{EventField, SpaceTimePoint};
use crate::lattice::{CanonicalConfig, Configuration, Region, Site};
use crate::parallel::map_reduce;
use crate::qsd::{yaglom_counts, McConfig, QsdEstimate, StartLaw};
use crate::stats::{self, Interval};
use crate::streams::{self, derive_seed, replica_seed, TAG_BOOTSTRAP, TAG_FIELD};

pub const DEFAULT_BETA: f64 = 8.0;

/// `R_t = e^{√t}`.
pub fn default_radius(t: f64) -> f64 {
    t.sqrt().exp()
}

/// `⌊βt⌋`, which must be at least one.
pub fn jump_budget(beta: f64, t: f64) -> Result<u32> {
    let b = (beta * t).floor();
    if !(b >= 1.0 && b < u32::MAX as f64) {
        return Err(Error::usage(format!("jump budget floor(beta*t) = {b} must be at least 1")));
    }
    Ok(b as u32)
}

/// Integer ℓ∞ radius `⌊2R⌋` of the box `B_{2R}`.
pub fn double_radius(r: f64) -> u32 {
    (2.0 * r).floor() as u32
}

/// Longest λ-path jump count from `start` during `[start.time, end]`,
/// capped at `budget`. Recoveries are ignored; consecutive jumps need strictly
/// increasing times.
pub fn max_jump_chain(f: &EventField, start: SpaceTimePoint, end: f64, budget: u32) -> Result<u32> {
    if budget == 0 {
        return Ok(0);
    }
    let arrows = f.arrows_in_ball(start.site, budget, start.time, end)?;
    let mut best: HashMap<Site, u32> = HashMap::from([(start.site, 0)]);
    let mut longest = 0;
    let mut updates: Vec<(Site, u32)> = Vec::new();
    let mut k = 0;
    while k < arrows.len() {
        let time = arrows[k].0;
        updates.clear();
        while k < arrows.len() && arrows[k].0 == time {
            let (_, from, to) = arrows[k];
            if let Some(&n) = best.get(&from) {
                updates.push((to, n + 1));
            }
            k += 1;
        }
        for &(to, n) in &updates {
            let slot = best.entry(to).or_insert(0);
            *slot = (*slot).max(n);
            longest = longest.max(n);
        }
        if longest >= budget {
            return Ok(budget);
        }
    }
    Ok(longest)
}

/// `G_z^s`: every λ-path from `(z, s)` makes fewer than `⌊βt⌋` jumps during `[s, s+t]`.
pub fn is_good_point(f: &EventField, point: SpaceTimePoint, beta: f64, t: f64) -> Result<bool> {
    let budget = jump_budget(beta, t)?;
    Ok(max_jump_chain(f, point, point.time + t, budget)? < budget)
}

/// `G^s(A)`: every site of `A` is a good point at time `s`.
pub fn region_good(f: &EventField, sites: &[Site], s: f64, beta: f64, t: f64) -> Result<bool> {
    let budget = jump_budget(beta, t)?;
    for &z in sites {
        if max_jump_chain(f, SpaceTimePoint::new(z, s), s + t, budget)? >= budget {
            return Ok(false);
        }
    }
    Ok(true)
}

/// How the break-point condition `L_0 ↛ (x, s)` for `x ∈ B_{2R}^z \ {z}` is decided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BreakCheck {
    /// Exact: the dual of `(B_{2R}^z \ {z}) × {s}` must die out before time 0.
    #[default]
    Dual,
    /// Forward sweep from the finite window `B^z_{2R + budget + margin}`.
    Window { budget: u32, margin: u32 },
}

impl BreakCheck {
    fn check(&self) -> Result<()> {
        if let BreakCheck::Window { budget, margin } = *self {
            if budget == 0 || margin == 0 {
                return Err(Error::usage(
                    "window break check needs a positive jump budget and margin; a smaller window misses paths",
                ));
            }
        }
        Ok(())
    }

    fn is_break_point(&self, f: &EventField, z: Site, s: f64, radius: u32) -> bool {
        let ball = Region::ball(z, radius);
        match *self {
            BreakCheck::Dual => {
                let mut ring = Configuration::new(f.dim(), ball.sites()).expect("same dimension");
                ring.remove(&z);
                f.backward_set(&ring, s, 0.0).is_empty()
            }
            BreakCheck::Window { budget, margin } => {
                let window = Configuration::new(f.dim(), Region::ball(z, radius + budget + margin).sites())
                    .expect("same dimension");
                let reached = f.evolve(&window, 0.0, s);
                reached.sites().iter().all(|x| *x == z || !ball.contains(x))
            }
        }
    }
}

/// `(X, Y, S)`; `s` is `None` for `S = ∞`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutBreakResult {
    pub x: Option<Site>,
    pub y: Option<Site>,
    pub s: Option<u32>,
}

impl CutBreakResult {
    pub fn is_finite(&self) -> bool {
        self.s.is_some()
    }
}

/// First cut break point of the lexicographically smallest surviving initial site.
pub fn find_cut_break(f: &EventField, eta0: &Configuration, t: f64, r: f64, check: BreakCheck) -> Result<CutBreakResult> {
    if !(t >= 1.0) || !(r >= 1.0) {
        return Err(Error::usage(format!("need t >= 1 and R >= 1, got t={t}, R={r}")));
    }
    check.check()?;
    if t > f.horizon() {
        return Err(Error::usage(format!("t={t} exceeds the field horizon {}", f.horizon())));
    }
    let mut result = CutBreakResult::default();
    let Some(x) = eta0
        .sites()
        .iter()
        .copied()
        .find(|&x| !f.evolve(&Configuration::from_sorted_unchecked(f.dim(), vec![x]), 0.0, t).is_empty())
    else {
        return Ok(result);
    };
    result.x = Some(x);
    let single = Configuration::from_sorted_unchecked(f.dim(), vec![x]);
    let radius = double_radius(r);
    for s in 1..=(t.floor() as u32) {
        let c = f.evolve(&single, 0.0, s as f64);
        if c.len() == 1 {
            let z = c.sites()[0];
            if check.is_break_point(f, z, s as f64, radius) {
                result.y = Some(z);
                result.s = Some(s);
                break;
            }
        }
    }
    Ok(result)
}

/// Good-point events at the cut break point: `G`, `Ĝ` (shell `D_{2R}`) and `G̃`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodFlags {
    pub g: bool,
    pub g_hat: bool,
    pub g_tilde: bool,
}

pub fn good_flags(f: &EventField, y: Site, s: f64, r: f64, beta: f64, t: f64) -> Result<GoodFlags> {
    let g = is_good_point(f, SpaceTimePoint::new(y, s), beta, t)?;
    let shell = Region::shell(y, double_radius(r).max(1))?.sites();
    let g_hat = region_good(f, &shell, s, beta, t)?;
    Ok(GoodFlags { g, g_hat, g_tilde: g && g_hat })
}

/// One replica of a structure scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureRecord {
    pub seed: u64,
    /// Extinction time if `η` dies by `t`.
    pub tau: Option<f64>,
    #[serde(rename = "X")]
    pub x: Option<Site>,
    #[serde(rename = "Y")]
    pub y: Option<Site>,
    #[serde(rename = "S")]
    pub s: Option<u32>,
    pub good: Option<GoodFlags>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureParams {
    pub lambda: f64,
    pub t: f64,
    pub radius: f64,
    pub beta: f64,
    pub check: BreakCheck,
    /// Evaluate the good-point flags at `(Y, S)` (needs a field up to `S + t`).
    pub flags: bool,
}

impl StructureParams {
    pub fn new(lambda: f64, t: f64) -> Self {
        StructureParams { lambda, t, radius: default_radius(t), beta: DEFAULT_BETA, check: BreakCheck::Dual, flags: true }
    }
}

/// Field seed of replica `i`, shared with the trajectory module's graphical engine.
pub fn replica_field(seed: u64, i: u64, dim: usize, lambda: f64, horizon: f64) -> Result<EventField> {
    EventField::poisson(derive_seed(replica_seed(seed, i), &[TAG_FIELD]), dim, lambda, horizon)
}

pub fn structure_record(f: &EventField, seed: u64, eta0: &Configuration, p: &StructureParams) -> Result<StructureRecord> {
    let tau = f.evolve_tracked(eta0, 0.0, p.t).extinction;
    let cb = if tau.is_some() {
        CutBreakResult::default()
    } else {
        find_cut_break(f, eta0, p.t, p.radius, p.check)?
    };
    let good = match (cb.y, cb.s, p.flags) {
        (Some(y), Some(s), true) => Some(good_flags(f, y, s as f64, p.radius, p.beta, p.t)?),
        _ => None,
    };
    Ok(StructureRecord { seed, tau, x: cb.x, y: cb.y, s: cb.s, good })
}

/// Summary of a structure scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureScan {
    pub replicas: u64,
    pub survivors: u64,
    /// Survivors with `S <= t/2`.
    pub early: u64,
    /// `P̂(S <= t/2 | τ > t)`.
    pub early_fraction: f64,
    pub early_stderr: f64,
    /// Survivors with `G̃` at `(Y, S)` among those with finite `S`.
    pub good_tilde: u64,
    pub records: Vec<StructureRecord>,
}

pub fn structure_scan(eta0: &Configuration, p: &StructureParams, n: u64, seed: u64, workers: usize) -> Result<StructureScan> {
    if n == 0 {
        return Err(Error::usage("need at least one replica"));
    }
    jump_budget(p.beta, p.t)?;
    if p.t < 1.0 || p.radius < 1.0 {
        return Err(Error::usage("need t >= 1 and R >= 1"));
    }
    let horizon = if p.flags { 2.0 * p.t } else { p.t };
    let dim = eta0.dim();
    let records: Vec<Result<StructureRecord>> = map_reduce(n, workers, Vec::new, |i, acc| {
        let rs = replica_seed(seed, i);
        acc.push(replica_field(seed, i, dim, p.lambda, horizon).and_then(|f| structure_record(&f, rs, eta0, p)));
    })?;
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    let survivors = records.iter().filter(|r| r.tau.is_none()).count() as u64;
    let early = records.iter().filter(|r| r.s.is_some_and(|s| s as f64 <= p.t / 2.0)).count() as u64;
    let good_tilde = records.iter().filter(|r| r.good.is_some_and(|g| g.g_tilde)).count() as u64;
    let early_fraction = if survivors > 0 { early as f64 / survivors as f64 } else { f64::NAN };
    Ok(StructureScan {
        replicas: n,
        survivors,
        early,
        early_fraction,
        early_stderr: stats::binomial_se(early_fraction, survivors),
        good_tilde,
        records,
    })
}

/// `max_ζ |P̂(ζ_t = ζ | τ>t) − ν̂(ζ) P̂(diam ζ_t < R | τ>t)|` over observed `ζ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub gap: f64,
    pub argmax: CanonicalConfig,
    pub p_diam: f64,
    pub survivors: u64,
    pub replicas: u64,
    pub ci: Interval,
    pub stderr: f64,
    /// Bootstrap replicates of the gap.
    #[serde(skip)]
    pub boot: Vec<f64>,
}

fn gap_of(counts: &[(CanonicalConfig, u64)], diam_ok: &[bool], reference: &QsdEstimate) -> (f64, usize, f64) {
    let m: u64 = counts.iter().map(|c| c.1).sum();
    let m = m as f64;
    let small: u64 = counts.iter().zip(diam_ok).filter(|(_, ok)| **ok).map(|(c, _)| c.1).sum();
    let p_diam = small as f64 / m;
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, (z, c)) in counts.iter().enumerate() {
        if *c == 0 {
            continue;
        }
        let g = (*c as f64 / m - reference.probability(z) * p_diam).abs();
        if g > best.0 {
            best = (g, k);
        }
    }
    (best.0, best.1, p_diam)
}

/// Gap statistic from survivor counts with a multinomial bootstrap.
pub fn gap_from_counts(counts: &StateCounts, reference: &QsdEstimate, r: f64, n_boot: usize, seed: u64) -> Result<GapEstimate> {
    if counts.survivors == 0 {
        return Err(Error::Degenerate { survivors: 0, replicas: counts.replicas, survival: 0.0 });
    }
    let observed: Vec<(CanonicalConfig, u64)> = counts.counts.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let diam_ok: Vec<bool> = observed.iter().map(|(z, _)| (z.diameter() as f64) < r).collect();
    let (gap, arg, p_diam) = gap_of(&observed, &diam_ok, reference);
    let raw: Vec<u64> = observed.iter().map(|c| c.1).collect();
    let mut rng = streams::stream(seed, &[TAG_BOOTSTRAP, 0x6761]);
    let boot: Vec<f64> = (0..n_boot)
        .map(|_| {
            let re = stats::resample_counts(&raw, &mut rng);
            let resampled: Vec<(CanonicalConfig, u64)> =
                observed.iter().zip(re).map(|((z, _), c)| (z.clone(), c)).collect();
            gap_of(&resampled, &diam_ok, reference).0
        })
        .collect();
    let mean = boot.iter().sum::<f64>() / boot.len().max(1) as f64;
    let stderr = if boot.len() > 1 {
        (boot.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boot.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let ci = Interval::basic_bootstrap(gap, &mut boot.clone(), 0.95, 0.0);
    Ok(GapEstimate {
        gap,
        argmax: observed[arg].0.clone(),
        p_diam,
        survivors: counts.survivors,
        replicas: counts.replicas,
        ci,
        stderr,
        boot,
    })
}

/// Runs Yaglom replicas from `zeta0` to `t` and evaluates the gap against `reference`.
pub fn diam_factorization_gap(
    zeta0: &CanonicalConfig,
    t: f64,
    r: f64,
    cfg: &McConfig,
    reference: &QsdEstimate,
    n_boot: usize,
) -> Result<GapEstimate> {
    if !(r > 0.0) {
        return Err(Error::usage("R must be positive"));
    }
    if reference.pmf.is_empty() {
        return Err(Error::usage("reference QSD is empty"));
    }
    let counts = yaglom_counts(&StartLaw::fixed(zeta0), t, cfg)?;
    gap_from_counts(&counts, reference, r, n_boot, cfg.seed)
}

/// Exact conditioned law at time `t` of `λ = 0` dynamics from `{0, …, n-1}`:
/// every site survives independently with probability `e^{-t}`.
pub fn independent_clock_law(n: u32, t: f64) -> BTreeMap<CanonicalConfig, f64> {
    let p = (-t).exp();
    let mut law: BTreeMap<CanonicalConfig, f64> = BTreeMap::new();
    for mask in 1u64..(1u64 << n) {
        let k = mask.count_ones() as i32;
        let prob = p.powi(k) * (1.0 - p).powi(n as i32 - k);
        let c = Configuration::new(1, (0..n).filter(|b| mask >> b & 1 == 1).map(|b| Site::d1(b as i32)))
            .expect("one dimension");
        let z = c.canonicalize().alive().expect("non-empty");
        *law.entry(z).or_insert(0.0) += prob;
    }
    let alive = 1.0 - (1.0 - p).powi(n as i32);
    for v in law.values_mut() {
        *v /= alive;
    }
    law
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsd::Method;

    fn s(x: i32) -> Site {
        Site::d1(x)
    }

    fn start(x: i32, t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(s(x), t)
    }

    fn chain(k: i32) -> EventField {
        let mut f = EventField::explicit(1, 1.0, 10.0).unwrap();
        for i in 0..k {
            f = f.with_arrow(s(i), s(i + 1), 0.1 * (i + 1) as f64).unwrap();
        }
        f
    }

    #[test]
    fn no_arrows_no_jumps() {
        let f = EventField::explicit(1, 1.0, 10.0).unwrap();
        assert_eq!(max_jump_chain(&f, start(0, 0.0), 5.0, 10).unwrap(), 0);
        let f = EventField::poisson(3, 1, 0.0, 10.0).unwrap();
        assert!(is_good_point(&f, start(0, 0.0), 2.0, 5.0).unwrap());
        assert!(region_good(&f, &Region::ball(s(0), 6).sites(), 1.0, 2.0, 5.0).unwrap());
        assert!(region_good(&f, &[], 1.0, 2.0, 5.0).unwrap());
    }

    #[test]
    fn constructed_chain() {
        for k in 1..8 {
            let f = chain(k);
            assert_eq!(max_jump_chain(&f, start(0, 0.0), 5.0, 100).unwrap(), k as u32);
            // starting after the first arrow misses the whole chain
            assert_eq!(max_jump_chain(&f, start(0, 0.15), 5.0, 100).unwrap(), 0);
            assert_eq!(max_jump_chain(&f, start(0, 0.0), 5.0, 3).unwrap(), (k as u32).min(3));
        }
        // budget = floor(beta t) = k makes the start bad
        let f = chain(5);
        assert!(!is_good_point(&f, start(0, 0.0), 1.0, 5.0).unwrap());
        assert!(is_good_point(&f, start(0, 0.0), 1.2, 5.0).unwrap());
        assert!(!region_good(&f, &[s(-3), s(0), s(4)], 0.0, 1.0, 5.0).unwrap());
        assert!(jump_budget(0.1, 5.0).is_err());
    }

    #[test]
    fn longest_of_two_chains() {
        let mut f = EventField::explicit(1, 1.0, 10.0).unwrap();
        for i in 0..3 {
            f = f.with_arrow(s(-i), s(-i - 1), 1.0 + 0.1 * i as f64).unwrap();
        }
        for i in 0..5 {
            f = f.with_arrow(s(i), s(i + 1), 2.0 + 0.1 * i as f64).unwrap();
        }
        assert_eq!(max_jump_chain(&f, start(0, 0.0), 5.0, 40).unwrap(), 5);
    }

    #[test]
    fn equal_times_do_not_chain() {
        let f = EventField::explicit(1, 1.0, 10.0)
            .unwrap()
            .with_arrow(s(0), s(1), 1.0)
            .unwrap()
            .with_arrow(s(1), s(2), 1.0)
            .unwrap();
        assert_eq!(max_jump_chain(&f, start(0, 0.0), 5.0, 40).unwrap(), 1);
    }

    #[test]
    fn window_and_arrow_monotonicity() {
        for seed in 0..30 {
            let f = EventField::poisson(seed, 1, 1.0, 12.0).unwrap();
            let p = start(0, 1.0);
            let lens: Vec<u32> = [2.0, 4.0, 6.0, 9.0].iter().map(|&e| max_jump_chain(&f, p, e, 50).unwrap()).collect();
            assert!(lens.windows(2).all(|w| w[0] <= w[1]), "{lens:?}");
            // deleting arrows never makes a good point bad
            let arrows = f.arrows_in_ball(s(0), 12, 1.0, 4.0).unwrap();
            let mut g = f.clone();
            let mut prev = max_jump_chain(&g, p, 4.0, 12).unwrap();
            for (k, (t, from, to)) in arrows.iter().enumerate() {
                if k % 3 != 0 {
                    continue;
                }
                assert!(g.remove_event(crate::field::StreamKey::arrow(*from, *to).unwrap(), *t));
                let now = max_jump_chain(&g, p, 4.0, 12).unwrap();
                assert!(now <= prev);
                prev = now;
            }
        }
    }

    #[test]
    fn good_probability_grows_with_beta() {
        let mut good = [0u32; 3];
        let n = 400;
        for seed in 0..n {
            let f = EventField::poisson(seed, 1, 1.0, 5.0).unwrap();
            for (k, beta) in [2.0, 4.0, 8.0].iter().enumerate() {
                good[k] += is_good_point(&f, start(0, 0.0), *beta, 5.0).unwrap() as u32;
            }
        }
        assert!(good[0] <= good[1] && good[1] <= good[2]);
        assert!(good[2] as f64 / n as f64 > 0.99);
    }

    fn isolated_origin_field(r: u32) -> EventField {
        // every site of B_{2R} except 0 recovers at 0.5; nothing else happens before 1
        let mut f = EventField::explicit(1, 1.0, 4.0).unwrap();
        for x in -(2 * r as i32)..=(2 * r as i32) {
            if x != 0 {
                f = f.with_recovery(s(x), 0.5).unwrap();
            }
        }
        f
    }

    #[test]
    fn constructed_cut_break_point() {
        let r = 1.5;
        let f = isolated_origin_field(3);
        let eta0 = Configuration::new(1, Region::ball(s(0), 3).sites()).unwrap();
        for check in [BreakCheck::Dual] {
            let res = find_cut_break(&f, &eta0, 2.0, r, check).unwrap();
            assert_eq!(res, CutBreakResult { x: Some(s(0)), y: Some(s(0)), s: Some(1) });
        }
        // with the window check, sites beyond B_{2R} are still alive and never recover,
        // but without arrows they cannot reach the ball
        let res = find_cut_break(&f, &eta0, 2.0, r, BreakCheck::Window { budget: 2, margin: 2 }).unwrap();
        assert_eq!(res.s, Some(1));
        assert!(find_cut_break(&f, &eta0, 2.0, r, BreakCheck::Window { budget: 2, margin: 0 }).is_err());
    }

    #[test]
    fn extinct_field_has_infinite_s() {
        let f = EventField::explicit(1, 1.0, 4.0).unwrap().with_recovery(s(0), 0.3).unwrap();
        let res = find_cut_break(&f, &Configuration::interval(0, 0), 3.0, 2.0, BreakCheck::Dual).unwrap();
        assert_eq!(res, CutBreakResult::default());
    }

    #[test]
    fn lonely_site_is_cut_point() {
        // λ = 0 and no recovery at 0 up to t: the break test still needs the
        // neighbours to be dead, so give them early recoveries
        let f = isolated_origin_field(2);
        let eta0 = Configuration::interval(0, 0);
        for s_max in 1..=3 {
            for sec in 1..=s_max {
                assert_eq!(f.evolve(&eta0, 0.0, sec as f64), eta0);
            }
        }
        let res = find_cut_break(&f, &eta0, 3.0, 1.0, BreakCheck::Dual).unwrap();
        assert_eq!(res.s, Some(1));
    }

    #[test]
    fn found_points_reverify() {
        let p = StructureParams { radius: 2.0, ..StructureParams::new(1.0, 6.0) };
        let eta0 = Configuration::interval(0, 2);
        let mut finite = 0;
        for seed in 0..200 {
            let f = replica_field(seed, 0, 1, 1.0, 12.0).unwrap();
            let rec = structure_record(&f, seed, &eta0, &p).unwrap();
            let (Some(x), Some(y), Some(sv)) = (rec.x, rec.y, rec.s) else { continue };
            finite += 1;
            let single = Configuration::new(1, [x]).unwrap();
            assert_eq!(f.evolve(&single, 0.0, sv as f64), Configuration::new(1, [y]).unwrap());
            let window = Configuration::new(1, Region::ball(y, 4 + 60).sites()).unwrap();
            let reached = f.evolve(&window, 0.0, sv as f64);
            assert!(reached.sites().iter().all(|z| *z == y || z.linf(&y) > 4));
            // X is the smallest surviving site
            for &z in eta0.sites().iter().filter(|z| **z < x) {
                assert!(f.evolve(&Configuration::new(1, [z]).unwrap(), 0.0, 6.0).is_empty());
            }
        }
        assert!(finite > 0);
    }

    #[test]
    fn dual_and_window_agree() {
        let t = 5.0;
        let r = 2.0;
        let eta0 = Configuration::interval(0, 1);
        for seed in 0..100 {
            let f = EventField::poisson(seed, 1, 1.0, t).unwrap();
            let a = find_cut_break(&f, &eta0, t, r, BreakCheck::Dual).unwrap();
            let b = find_cut_break(&f, &eta0, t, r, BreakCheck::Window { budget: 40, margin: 40 }).unwrap();
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn scan_is_worker_invariant() {
        let p = StructureParams { radius: 2.0, ..StructureParams::new(1.0, 4.0) };
        let eta0 = Configuration::interval(0, 0);
        let a = structure_scan(&eta0, &p, 60, 5, 1).unwrap();
        let b = structure_scan(&eta0, &p, 60, 5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 60);
        let line = serde_json::to_string(&a.records[0]).unwrap();
        assert!(line.contains("\"S\""));
    }

    #[test]
    fn gap_zero_rate_singleton() {
        let reference = QsdEstimate::from_weights([("0".parse().unwrap(), 1.0)], Method::Eigen, 1.0);
        let g = diam_factorization_gap(&"0".parse().unwrap(), 2.0, 5.0, &McConfig::new(0.0, 2000, 1), &reference, 50)
            .unwrap();
        assert_eq!(g.gap, 0.0);
        assert_eq!(g.p_diam, 1.0);
    }

    #[test]
    fn gap_zero_rate_interval_matches_clocks() {
        let n = 4;
        let t = 1.0;
        let r = 10.0;
        let reference = QsdEstimate::from_weights([("0".parse().unwrap(), 1.0)], Method::Eigen, 1.0);
        let law = independent_clock_law(n, t);
        // every state has diameter < R, so the gap is max_ζ |law(ζ) − 1{ζ = {0}}|
        let exact = law
            .iter()
            .map(|(z, p)| (p - reference.probability(z)).abs())
            .fold(0.0, f64::max);
        let zeta0 = Configuration::interval(0, n as i32 - 1).canonicalize().alive().unwrap();
        let g = diam_factorization_gap(&zeta0, t, r, &McConfig::new(0.0, 40_000, 8), &reference, 200).unwrap();
        assert!((g.gap - exact).abs() < 4.0 * g.stderr.max(1e-3), "{} vs {exact} ({})", g.gap, g.stderr);
        assert!(g.ci.lo <= g.gap && g.gap <= g.ci.hi);
        assert!((law.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
