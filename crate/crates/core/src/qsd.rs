//! Monte Carlo estimators of the quasi-stationary distribution.
//!
//! * Yaglom: run independent replicas to time `t` and keep the survivors.
//!   The survivor count decays like `e^{-αt}`, so the replica budget has to
//!   grow like `e^{αt}`.
//! * Fleming–Viot: `N` particles evolve independently; a particle that gets
//!   absorbed jumps onto the current state of a uniformly chosen other
//!   particle. The time-averaged occupation measure estimates the QSD and the
//!   resampling rate per particle estimates `α`.
//! * Survival curves and a log-linear tail fit for `α`.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregate::{StateCounts, SurvivalTally};
use crate::error::{Error, Result};
use crate::lattice::{CanonicalConfig, Configuration, Site};
use crate::parallel::map_reduce;
use crate::stats::{self, Interval};
use crate::streams::{self, derive_seed, replica_seed, StreamRng, TAG_BOOTSTRAP, TAG_FLEMING_VIOT, TAG_START};
use crate::trajectory::{absorption_time, final_state, Engine};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Yaglom,
    FlemingViot,
    Eigen,
}

/// Probability mass function over canonical configurations plus an
/// absorption-rate estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QsdEstimate {
    pub pmf: BTreeMap<CanonicalConfig, f64>,
    pub support_truncated: bool,
    pub n_effective: f64,
    pub alpha_hat: Option<f64>,
    pub alpha_stderr: Option<f64>,
    pub method: Method,
}

/// Serializable view of a pmf: the largest entries, the rest lumped together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmfReport {
    pub entries: Vec<(CanonicalConfig, f64)>,
    pub other: f64,
    pub support_size: usize,
    pub support_truncated: bool,
}

/// States below this mass are lumped into the `other` bucket of reports.
pub const REPORT_MASS_FLOOR: f64 = 1e-6;

impl QsdEstimate {
    pub fn from_counts(counts: &BTreeMap<CanonicalConfig, u64>, method: Method) -> Result<Self> {
        let n: u64 = counts.values().sum();
        if n == 0 {
            return Err(Error::Degenerate { survivors: 0, replicas: 0, survival: 0.0 });
        }
        Ok(QsdEstimate {
            pmf: stats::normalize_counts(counts),
            support_truncated: false,
            n_effective: n as f64,
            alpha_hat: None,
            alpha_stderr: None,
            method,
        })
    }

    /// Normalizes non-negative weights; zero weights are dropped.
    pub fn from_weights(weights: impl IntoIterator<Item = (CanonicalConfig, f64)>, method: Method, n_effective: f64) -> Self {
        let mut pmf: BTreeMap<CanonicalConfig, f64> = weights.into_iter().filter(|(_, w)| *w > 0.0).collect();
        let total: f64 = pmf.values().sum();
        for v in pmf.values_mut() {
            *v /= total;
        }
        QsdEstimate { pmf, support_truncated: false, n_effective, alpha_hat: None, alpha_stderr: None, method }
    }

    pub fn probability(&self, c: &CanonicalConfig) -> f64 {
        self.pmf.get(c).copied().unwrap_or(0.0)
    }

    pub fn tv(&self, other: &QsdEstimate) -> f64 {
        stats::tv_distance(&self.pmf, &other.pmf)
    }

    pub fn dim(&self) -> Option<usize> {
        self.pmf.keys().next().map(CanonicalConfig::dim)
    }

    pub fn sampler(&self) -> QsdSampler {
        let mut states = Vec::with_capacity(self.pmf.len());
        let mut cum = Vec::with_capacity(self.pmf.len());
        let mut acc = 0.0;
        for (k, p) in &self.pmf {
            acc += p;
            states.push(k.clone());
            cum.push(acc);
        }
        QsdSampler { states, cum }
    }

    /// Up to `top_k` entries by decreasing mass, skipping states below
    /// [`REPORT_MASS_FLOOR`]; everything else goes to `other`.
    pub fn report(&self, top_k: usize) -> PmfReport {
        let mut entries: Vec<(CanonicalConfig, f64)> = self.pmf.iter().map(|(k, v)| (k.clone(), *v)).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let keep = entries.iter().take(top_k).take_while(|e| e.1 >= REPORT_MASS_FLOOR).count();
        let other: f64 = entries[keep..].iter().map(|e| e.1).sum();
        let support_size = entries.len();
        entries.truncate(keep);
        PmfReport { entries, other, support_size, support_truncated: keep < support_size || self.support_truncated }
    }

    pub fn mass_sum(&self) -> f64 {
        self.pmf.values().sum()
    }
}

/// Inverse-CDF sampler over a pmf.
#[derive(Clone, Debug)]
pub struct QsdSampler {
    states: Vec<CanonicalConfig>,
    cum: Vec<f64>,
}

impl QsdSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &CanonicalConfig {
        let total = *self.cum.last().expect("empty pmf");
        let u = rng.random::<f64>() * total;
        let i = self.cum.partition_point(|&c| c <= u).min(self.states.len() - 1);
        &self.states[i]
    }
}

/// Initial law of a replica.
#[derive(Clone, Debug)]
pub enum StartLaw {
    Fixed(Configuration),
    Sampled(QsdSampler),
}

impl StartLaw {
    pub fn fixed(c: &CanonicalConfig) -> Self {
        StartLaw::Fixed(c.as_config().clone())
    }

    pub fn from_estimate(est: &QsdEstimate) -> Result<Self> {
        if est.pmf.is_empty() {
            return Err(Error::usage("cannot sample from an empty pmf"));
        }
        Ok(StartLaw::Sampled(est.sampler()))
    }

    /// Initial configuration of replica `i` (seeded from the replica's substream).
    pub fn draw(&self, replica_seed: u64) -> Configuration {
        match self {
            StartLaw::Fixed(c) => c.clone(),
            StartLaw::Sampled(s) => {
                let mut rng = streams::stream(replica_seed, &[TAG_START]);
                s.sample(&mut rng).as_config().clone()
            }
        }
    }

    fn fingerprint_word(&self) -> u64 {
        match self {
            StartLaw::Fixed(c) => derive_seed(1, &c.to_string().bytes().map(u64::from).collect::<Vec<_>>()),
            StartLaw::Sampled(s) => derive_seed(
                2,
                &s.cum.iter().map(|p| p.to_bits()).chain([s.states.len() as u64]).collect::<Vec<_>>(),
            ),
        }
    }
}

/// Common Monte Carlo settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub lambda: f64,
    pub n_replicas: u64,
    pub seed: u64,
    pub engine: Engine,
    pub workers: usize,
}

impl McConfig {
    pub fn new(lambda: f64, n_replicas: u64, seed: u64) -> Self {
        McConfig { lambda, n_replicas, seed, engine: Engine::JumpChain, workers: 1 }
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::usage(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.n_replicas == 0 {
            return Err(Error::usage("need at least one replica"));
        }
        Ok(())
    }

    fn fingerprint(&self, start: &StartLaw, extra: &[u64]) -> u64 {
        let mut words = vec![self.lambda.to_bits(), self.n_replicas, self.seed, self.engine as u64, start.fingerprint_word()];
        words.extend_from_slice(extra);
        derive_seed(0x6671, &words)
    }
}

/// Final states of all replicas at time `t`.
pub fn yaglom_counts(start: &StartLaw, t: f64, cfg: &McConfig) -> Result<StateCounts> {
    cfg.check()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::usage(format!("time must be positive, got {t}")));
    }
    let fp = cfg.fingerprint(start, &[t.to_bits()]);
    let engine = cfg.engine;
    let lambda = cfg.lambda;
    let seed = cfg.seed;
    map_reduce(cfg.n_replicas, cfg.workers, || StateCounts::new(fp), |i, acc| {
        let rs = replica_seed(seed, i);
        let eta0 = start.draw(rs);
        let state = final_state(engine, &eta0, lambda, t, rs).expect("validated parameters");
        acc.record(state.alive());
    })
}

/// Conditioned-on-survival empirical law of `ζ_t`.
pub fn yaglom_estimate(start: &StartLaw, t: f64, cfg: &McConfig) -> Result<QsdEstimate> {
    let counts = yaglom_counts(start, t, cfg)?;
    estimate_from_counts(&counts)
}

pub fn estimate_from_counts(counts: &StateCounts) -> Result<QsdEstimate> {
    if counts.survivors == 0 {
        return Err(Error::Degenerate { survivors: 0, replicas: counts.replicas, survival: 0.0 });
    }
    QsdEstimate::from_counts(&counts.counts, Method::Yaglom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlemingViotConfig {
    pub dim: usize,
    pub particles: usize,
    pub lambda: f64,
    pub t_burn: f64,
    pub t_sample: f64,
    pub seed: u64,
    /// Initial state of every particle; `{0}` when absent.
    pub initial: Option<CanonicalConfig>,
}

/// Fenwick tree over particle sizes, used to pick the next event with
/// probability proportional to the number of infected sites.
struct SizeTree {
    tree: Vec<u64>,
    total: u64,
}

impl SizeTree {
    fn new(n: usize) -> Self {
        SizeTree { tree: vec![0; n + 1], total: 0 }
    }

    fn add(&mut self, i: usize, delta: i64) {
        self.total = (self.total as i64 + delta) as u64;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] = (self.tree[k] as i64 + delta) as u64;
            k += k & k.wrapping_neg();
        }
    }

    /// Returns `(i, offset)` with `prefix(i) <= k < prefix(i+1)`.
    fn find(&self, mut k: u64) -> (usize, u64) {
        let mut pos = 0;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        (pos, k)
    }
}

fn recanonicalize(sites: &mut [Site]) {
    let min = sites[0];
    for s in sites.iter_mut() {
        *s = s.sub(&min);
    }
}

/// Fleming–Viot particle estimate of the QSD and of `α`.
pub fn fleming_viot_estimate(cfg: &FlemingViotConfig) -> Result<QsdEstimate> {
    if cfg.particles < 2 {
        return Err(Error::usage("Fleming-Viot needs at least two particles"));
    }
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::usage("lambda must be finite and >= 0"));
    }
    if !(cfg.t_burn >= 0.0 && cfg.t_sample > 0.0) {
        return Err(Error::usage("need t_burn >= 0 and t_sample > 0"));
    }
    let dim = cfg.dim;
    if !(1..=crate::lattice::MAX_DIM).contains(&dim) {
        return Err(Error::usage(format!("unsupported dimension {dim}")));
    }
    let initial = cfg.initial.clone().unwrap_or_else(|| CanonicalConfig::singleton(dim));
    if initial.dim() != dim {
        return Err(Error::usage("initial state dimension differs"));
    }
    let n = cfg.particles;
    let mut rng: StreamRng = streams::stream(cfg.seed, &[TAG_FLEMING_VIOT]);
    let mut particles: Vec<Vec<Site>> = vec![initial.sites().to_vec(); n];
    let mut tree = SizeTree::new(n);
    for (i, p) in particles.iter().enumerate() {
        tree.add(i, p.len() as i64);
    }
    let per_site = 1.0 + 2.0 * dim as f64 * cfg.lambda;
    let p_recover = 1.0 / per_site;
    let t_burn = cfg.t_burn;
    let t_end = cfg.t_burn + cfg.t_sample;
    let mut last_change = vec![0.0f64; n];
    let mut occupation: HashMap<Vec<Site>, f64> = HashMap::new();
    let mut resamples: u64 = 0;
    let mut time = 0.0;

    let credit = |occ: &mut HashMap<Vec<Site>, f64>, state: &[Site], from: f64, to: f64| {
        let from = from.max(t_burn);
        if to > from {
            match occ.get_mut(state) {
                Some(v) => *v += to - from,
                None => {
                    occ.insert(state.to_vec(), to - from);
                }
            }
        }
    };

    loop {
        let rate = per_site * tree.total as f64;
        time += streams::exponential(&mut rng, rate);
        if time > t_end {
            break;
        }
        let (i, j) = tree.find(rng.random_range(0..tree.total));
        let j = j as usize;
        if rng.random::<f64>() < p_recover {
            credit(&mut occupation, &particles[i], last_change[i], time);
            last_change[i] = time;
            let before = particles[i].len() as i64;
            if before == 1 {
                let mut r = rng.random_range(0..n - 1);
                if r >= i {
                    r += 1;
                }
                particles[i] = particles[r].clone();
                if time >= t_burn {
                    resamples += 1;
                }
            } else {
                particles[i].remove(j);
                if j == 0 {
                    recanonicalize(&mut particles[i]);
                }
            }
            tree.add(i, particles[i].len() as i64 - before);
        } else {
            let dir = rng.random_range(0..2 * dim);
            let y = particles[i][j].neighbor(dir);
            if let Err(pos) = particles[i].binary_search(&y) {
                credit(&mut occupation, &particles[i], last_change[i], time);
                last_change[i] = time;
                particles[i].insert(pos, y);
                if pos == 0 {
                    recanonicalize(&mut particles[i]);
                }
                tree.add(i, 1);
            }
        }
    }
    for (p, &last) in particles.iter().zip(&last_change) {
        credit(&mut occupation, p, last, t_end);
    }
    let weights = occupation
        .into_iter()
        .map(|(sites, w)| (CanonicalConfig::from_canonical_unchecked(Configuration::from_sorted_unchecked(dim, sites)), w));
    let mut est = QsdEstimate::from_weights(weights, Method::FlemingViot, n as f64);
    let exposure = n as f64 * cfg.t_sample;
    est.alpha_hat = Some(resamples as f64 / exposure);
    est.alpha_stderr = Some((resamples as f64).sqrt() / exposure);
    Ok(est)
}

/// Empirical survival function `P(τ > t)` on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survival_prob: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicas: u64,
}

impl SurvivalCurve {
    pub fn from_tally(times: &[f64], tally: &SurvivalTally) -> Self {
        let n = tally.replicas;
        let survival_prob: Vec<f64> = tally.alive.iter().map(|&a| a as f64 / n as f64).collect();
        let stderr = survival_prob.iter().map(|&p| stats::binomial_se(p, n)).collect();
        SurvivalCurve { times: times.to_vec(), survival_prob, stderr, replicas: n }
    }
}

pub fn survival_tally(start: &StartLaw, grid: &[f64], cfg: &McConfig) -> Result<SurvivalTally> {
    cfg.check()?;
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("time grid must be positive and strictly increasing"));
    }
    let fp = cfg.fingerprint(start, &grid.iter().map(|t| t.to_bits()).collect::<Vec<_>>());
    let t_max = *grid.last().expect("non-empty");
    let (engine, lambda, seed) = (cfg.engine, cfg.lambda, cfg.seed);
    map_reduce(cfg.n_replicas, cfg.workers, || SurvivalTally::new(fp, grid.len()), |i, acc| {
        let rs = replica_seed(seed, i);
        let eta0 = start.draw(rs);
        let tau = absorption_time(engine, &eta0, lambda, t_max, rs).expect("validated parameters");
        acc.record(grid, tau);
    })
}

pub fn survival_curve(start: &StartLaw, grid: &[f64], cfg: &McConfig) -> Result<SurvivalCurve> {
    Ok(SurvivalCurve::from_tally(grid, &survival_tally(start, grid, cfg)?))
}

/// Like [`survival_curve`], but every grid point gets its own batch of
/// `cfg.n_replicas` replicas, so the point estimates are independent. Residual
/// diagnostics on a fitted tail are only meaningful on such a curve; the
/// cumulative curve has strongly correlated neighbours.
pub fn survival_curve_independent(start: &StartLaw, grid: &[f64], cfg: &McConfig) -> Result<SurvivalCurve> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("time grid must be positive and strictly increasing"));
    }
    let mut alive = Vec::with_capacity(grid.len());
    for (k, &t) in grid.iter().enumerate() {
        let point = McConfig { seed: derive_seed(cfg.seed, &[0x73, k as u64]), ..*cfg };
        alive.push(survival_tally(start, &[t], &point)?.alive[0]);
    }
    let n = cfg.n_replicas;
    let survival_prob: Vec<f64> = alive.iter().map(|&a| a as f64 / n as f64).collect();
    let stderr = survival_prob.iter().map(|&p| stats::binomial_se(p, n)).collect();
    Ok(SurvivalCurve { times: grid.to_vec(), survival_prob, stderr, replicas: n })
}

/// Log-linear fit of a survival tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub stderr: f64,
    pub ci: Interval,
    pub points_used: usize,
    pub times_used: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Runs test on the residual signs.
    pub runs_p_value: f64,
}

/// Only grid points with survival at most this value enter the fit.
pub const ALPHA_FIT_MAX_SURVIVAL: f64 = 0.5;

/// Weighted least squares of `log S(t)` against `t` over the tail `S <= 0.5`.
/// Weights are the inverse delta-method variances `S² / se²`; a curve without
/// error bars is fitted unweighted.
pub fn estimate_alpha(curve: &SurvivalCurve) -> Result<AlphaFit> {
    let pts: Vec<(f64, f64, f64)> = curve
        .times
        .iter()
        .zip(&curve.survival_prob)
        .zip(&curve.stderr)
        .filter(|((_, &s), _)| s > 0.0 && s <= ALPHA_FIT_MAX_SURVIVAL)
        .map(|((&t, &s), &se)| (t, s, se))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} grid points with 0 < S(t) <= {ALPHA_FIT_MAX_SURVIVAL}; need 3",
            pts.len()
        )));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let weighted = pts.iter().all(|p| p.2 > 0.0 && p.2.is_finite());
    let w: Vec<f64> = pts.iter().map(|p| (p.1 / p.2).powi(2)).collect();
    let fit = stats::line_fit(&x, &y, weighted.then_some(&w[..]));
    let alpha = -fit.slope;
    let se = fit.slope_se;
    Ok(AlphaFit {
        alpha,
        stderr: se,
        ci: Interval { estimate: alpha, lo: alpha - 1.96 * se, hi: alpha + 1.96 * se },
        points_used: pts.len(),
        times_used: x,
        runs_p_value: stats::runs_test(&fit.residuals),
        residuals: fit.residuals,
    })
}

/// Bootstrap distribution of the TV distance between two empirical laws.
pub fn bootstrap_tv(a: &StateCounts, b: &StateCounts, n_boot: usize, seed: u64) -> Vec<f64> {
    let keys: Vec<&CanonicalConfig> = {
        let mut k: Vec<&CanonicalConfig> = a.counts.keys().chain(b.counts.keys()).collect();
        k.sort();
        k.dedup();
        k
    };
    let ca: Vec<u64> = keys.iter().map(|k| a.counts.get(*k).copied().unwrap_or(0)).collect();
    let cb: Vec<u64> = keys.iter().map(|k| b.counts.get(*k).copied().unwrap_or(0)).collect();
    let mut rng = streams::stream(seed, &[TAG_BOOTSTRAP]);
    (0..n_boot)
        .map(|_| {
            let ra = stats::resample_counts(&ca, &mut rng);
            let rb = stats::resample_counts(&cb, &mut rng);
            tv_of_count_vectors(&ra, &rb)
        })
        .collect()
}

pub(crate) fn tv_of_count_vectors(a: &[u64], b: &[u64]) -> f64 {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    0.5 * a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 / na as f64 - y as f64 / nb as f64).abs())
        .sum::<f64>()
}

/// TV distance between the conditioned laws at time `t` from two initial
/// states, with a basic bootstrap 95% interval.
pub fn conditioned_insensitivity(
    zeta_a: &CanonicalConfig,
    zeta_b: &CanonicalConfig,
    t: f64,
    cfg: &McConfig,
    n_boot: usize,
) -> Result<Interval> {
    let a = yaglom_counts(&StartLaw::fixed(zeta_a), t, cfg)?;
    let cfg_b = McConfig { seed: derive_seed(cfg.seed, &[0x62]), ..*cfg };
    let b = yaglom_counts(&StartLaw::fixed(zeta_b), t, &cfg_b)?;
    insensitivity_from_counts(&a, &b, n_boot, cfg.seed)
}

pub fn insensitivity_from_counts(a: &StateCounts, b: &StateCounts, n_boot: usize, seed: u64) -> Result<Interval> {
    for c in [a, b] {
        if c.survivors == 0 {
            return Err(Error::Degenerate { survivors: 0, replicas: c.replicas, survival: 0.0 });
        }
    }
    let tv = stats::tv_distance(&stats::normalize_counts(&a.counts), &stats::normalize_counts(&b.counts));
    let mut boot = bootstrap_tv(a, b, n_boot, seed);
    Ok(Interval::basic_bootstrap(tv, &mut boot, 0.95, 0.0))
}

/// Runs the conditioned dynamics for time `s` from a draw of `est` and
/// returns the TV distance between the result and `est`.
pub fn quasi_stationarity_tv(est: &QsdEstimate, s: f64, cfg: &McConfig) -> Result<(f64, QsdEstimate)> {
    let evolved = yaglom_estimate(&StartLaw::from_estimate(est)?, s, cfg)?;
    Ok((evolved.tv(est), evolved))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon(s: &str) -> CanonicalConfig {
        s.parse().unwrap()
    }

    #[test]
    fn zero_rate_singleton_never_moves() {
        for t in [0.5, 2.0, 5.0] {
            let est = yaglom_estimate(&StartLaw::fixed(&canon("0")), t, &McConfig::new(0.0, 2000, 1)).unwrap();
            assert_eq!(est.pmf.len(), 1);
            assert_eq!(est.probability(&canon("0")), 1.0);
        }
    }

    #[test]
    fn zero_rate_two_clocks() {
        // both alive w.p. p^2, exactly one alive w.p. 2p(1-p); condition on >= 1 alive
        let t: f64 = 1.0;
        let p = (-t).exp();
        let n = 100_000;
        let counts = yaglom_counts(&StartLaw::fixed(&canon("0;3")), t, &McConfig::new(0.0, n, 5)).unwrap();
        let est = estimate_from_counts(&counts).unwrap();
        let both = p / (2.0 - p);
        let one = 2.0 * (1.0 - p) / (2.0 - p);
        let m = counts.survivors;
        let sd = stats::binomial_se(both, m);
        assert!((est.probability(&canon("0;3")) - both).abs() < 3.0 * sd);
        assert!((est.probability(&canon("0")) - one).abs() < 3.0 * sd);
        assert!((est.mass_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sample_is_an_error() {
        let err = yaglom_estimate(&StartLaw::fixed(&canon("0")), 30.0, &McConfig::new(0.0, 10, 1)).unwrap_err();
        assert!(matches!(err, Error::Degenerate { survivors: 0, replicas: 10, .. }));
    }

    #[test]
    fn yaglom_is_reproducible_across_workers() {
        let start = StartLaw::fixed(&canon("0;1"));
        let a = yaglom_estimate(&start, 2.0, &McConfig::new(1.0, 3000, 9)).unwrap();
        let b = yaglom_estimate(&start, 2.0, &McConfig::new(1.0, 3000, 9).with_workers(4)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn fleming_viot_zero_rate_concentrates_on_singleton() {
        let cfg = FlemingViotConfig {
            dim: 1,
            particles: 200,
            lambda: 0.0,
            t_burn: 10.0,
            t_sample: 20.0,
            seed: 3,
            initial: Some(canon("0;2")),
        };
        let est = fleming_viot_estimate(&cfg).unwrap();
        let delta: BTreeMap<_, _> = [(canon("0"), 1.0)].into();
        assert!(stats::tv_distance(&est.pmf, &delta) < 0.01);
        let alpha = est.alpha_hat.unwrap();
        assert!((alpha - 1.0).abs() < 4.0 * est.alpha_stderr.unwrap(), "{alpha}");
        assert!(fleming_viot_estimate(&FlemingViotConfig { particles: 1, ..cfg }).is_err());
    }

    #[test]
    fn size_tree_finds_owner() {
        let mut t = SizeTree::new(5);
        for (i, s) in [3u64, 1, 0, 4, 2].iter().enumerate() {
            t.add(i, *s as i64);
        }
        let owners: Vec<(usize, u64)> = (0..t.total).map(|k| t.find(k)).collect();
        assert_eq!(
            owners,
            vec![(0, 0), (0, 1), (0, 2), (1, 0), (3, 0), (3, 1), (3, 2), (3, 3), (4, 0), (4, 1)]
        );
    }

    #[test]
    fn survival_zero_rate_matches_clocks() {
        let grid = [0.25, 0.5, 1.0, 2.0];
        for n_sites in [1, 4] {
            let start = StartLaw::Fixed(Configuration::interval(0, n_sites - 1));
            let curve = survival_curve(&start, &grid, &McConfig::new(0.0, 40_000, 11)).unwrap();
            for ((t, s), se) in grid.iter().zip(&curve.survival_prob).zip(&curve.stderr) {
                let exact = 1.0 - (1.0 - (-t as f64).exp()).powi(n_sites);
                assert!((s - exact).abs() < 3.0 * se.max(1e-3), "t={t} s={s} exact={exact}");
            }
        }
    }

    #[test]
    fn alpha_from_exact_curve() {
        let times: Vec<f64> = (0..30).map(|k| k as f64 * 0.5).collect();
        let curve = SurvivalCurve {
            survival_prob: times.iter().map(|t| (-0.7 * t).exp()).collect(),
            stderr: vec![0.0; times.len()],
            times,
            replicas: 0,
        };
        let fit = estimate_alpha(&curve).unwrap();
        assert!((fit.alpha - 0.7).abs() < 1e-9);
    }

    #[test]
    fn alpha_needs_three_tail_points() {
        let curve = SurvivalCurve {
            times: vec![0.1, 0.2, 3.0, 4.0],
            survival_prob: vec![0.9, 0.8, 0.3, 0.2],
            stderr: vec![0.01; 4],
            replicas: 100,
        };
        assert!(matches!(estimate_alpha(&curve), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn alpha_zero_rate_single_site() {
        let grid: Vec<f64> = (1..=12).map(|k| k as f64 * 0.4).collect();
        let curve = survival_curve(&StartLaw::fixed(&canon("0")), &grid, &McConfig::new(0.0, 50_000, 2)).unwrap();
        let fit = estimate_alpha(&curve).unwrap();
        assert!(fit.ci.lo - 0.01 <= 1.0 && 1.0 <= fit.ci.hi + 0.01, "{fit:?}");
    }

    #[test]
    fn insensitivity_identical_starts() {
        let c = canon("0;1");
        let ci = conditioned_insensitivity(&c, &c, 1.0, &McConfig::new(0.5, 20_000, 4), 100).unwrap();
        // both are samples of one law: TV only reflects sampling noise
        assert!(ci.estimate < 0.03, "{ci:?}");
    }

    #[test]
    fn report_lumps_small_states() {
        let est = QsdEstimate::from_weights(
            [(canon("0"), 0.7), (canon("0;1"), 0.3 - 1e-8), (canon("0;2"), 1e-8)],
            Method::Eigen,
            1.0,
        );
        let r = est.report(10);
        assert_eq!(r.entries.len(), 2);
        assert!(r.support_truncated);
        assert!((r.other - 1e-8).abs() < 1e-15);
        let r1 = est.report(1);
        assert_eq!(r1.entries[0].0, canon("0"));
    }
}
