//! Diameter-truncated generator of `ζ_t` and its Perron eigenpair.
//!
//! The state space holds every canonical configuration of diameter `< W`.
//! In one dimension a state is a bitmask over `{0, …, W-1}` with bit 0 set,
//! so state `i` is the mask `(i << 1) | 1` and no configuration is stored.
//! Higher dimensions enumerate subsets of the box `[0, W)^d` and are limited
//! to tiny boxes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CanonicalConfig, Configuration, Quotient, Site, MAX_DIM};
use crate::qsd::{Method, QsdEstimate};

/// Largest one-dimensional width (`2^21` states).
pub const MAX_WIDTH_1D: u32 = 22;
/// Largest box volume `W^d` enumerated for `d >= 2`.
pub const MAX_BOX_VOLUME: u64 = 16;

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: u64 = 1_000_000;

/// What happens to an infection that would push the diameter to `W`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// The infection is suppressed.
    #[default]
    Censor,
    /// The chain is killed (the rate is added to the absorption rate).
    Kill,
}

#[derive(Clone, Debug)]
enum Storage {
    Bitmask,
    Explicit { states: Vec<CanonicalConfig>, index: HashMap<CanonicalConfig, usize> },
}

/// Canonical configurations of diameter `< W` with dense indices.
#[derive(Clone, Debug)]
pub struct TruncatedStateSpace {
    dim: usize,
    width: u32,
    storage: Storage,
}

fn mask_of_id(id: usize) -> u64 {
    ((id as u64) << 1) | 1
}

fn id_of_mask(mask: u64) -> usize {
    (mask >> 1) as usize
}

fn config_of_mask(mask: u64) -> CanonicalConfig {
    let sites = (0..64).filter(|k| mask >> k & 1 == 1).map(Site::d1).collect();
    CanonicalConfig::from_canonical_unchecked(Configuration::from_sorted_unchecked(1, sites))
}

impl TruncatedStateSpace {
    pub fn new(dim: usize, width: u32) -> Result<Self> {
        if width == 0 {
            return Err(Error::usage("width must be at least 1"));
        }
        match dim {
            1 if width <= MAX_WIDTH_1D => Ok(TruncatedStateSpace { dim, width, storage: Storage::Bitmask }),
            1 => Err(Error::Size(format!("d=1 supports W <= {MAX_WIDTH_1D}, got {width}"))),
            2..=MAX_DIM => {
                let volume = (width as u64).checked_pow(dim as u32).unwrap_or(u64::MAX);
                if volume > MAX_BOX_VOLUME {
                    return Err(Error::Size(format!(
                        "d={dim} supports W^d <= {MAX_BOX_VOLUME}, got W={width}"
                    )));
                }
                Ok(Self::enumerate(dim, width))
            }
            _ => Err(Error::usage(format!("unsupported dimension {dim}"))),
        }
    }

    /// Explicit enumeration through subsets of the box; also usable for `d = 1`
    /// to cross-check the bitmask encoding.
    pub fn enumerate(dim: usize, width: u32) -> Self {
        let w = width as i32;
        let cells: Vec<Site> = (0..w.pow(dim as u32))
            .map(|mut k| {
                let mut c = [0i32; MAX_DIM];
                for slot in c.iter_mut().take(dim) {
                    *slot = k % w;
                    k /= w;
                }
                Site::new(&c[..dim]).expect("dimension in range")
            })
            .collect();
        let mut set = BTreeSet::new();
        for subset in 1u64..(1u64 << cells.len()) {
            let c = Configuration::new(dim, (0..cells.len()).filter(|k| subset >> k & 1 == 1).map(|k| cells[k]))
                .expect("same dimension");
            if let Quotient::Alive(z) = c.canonicalize() {
                set.insert(z);
            }
        }
        let states: Vec<CanonicalConfig> = set.into_iter().collect();
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        TruncatedStateSpace { dim, width, storage: Storage::Explicit { states, index } }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn len(&self) -> usize {
        match &self.storage {
            Storage::Bitmask => 1usize << (self.width - 1),
            Storage::Explicit { states, .. } => states.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state(&self, i: usize) -> CanonicalConfig {
        match &self.storage {
            Storage::Bitmask => config_of_mask(mask_of_id(i)),
            Storage::Explicit { states, .. } => states[i].clone(),
        }
    }

    pub fn index_of(&self, c: &CanonicalConfig) -> Option<usize> {
        if c.dim() != self.dim {
            return None;
        }
        match &self.storage {
            Storage::Bitmask => {
                if c.diameter() >= self.width {
                    return None;
                }
                let mask = c.sites().iter().fold(0u64, |m, s| m | 1 << s.coords()[0]);
                Some(id_of_mask(mask))
            }
            Storage::Explicit { index, .. } => index.get(c).copied(),
        }
    }

    /// Index of the singleton `{0}`.
    pub fn singleton_index(&self) -> usize {
        self.index_of(&CanonicalConfig::singleton(self.dim)).expect("singleton is always a state")
    }
}

/// Sparse sub-Markov generator, stored by rows.
#[derive(Clone, Debug)]
pub struct TruncatedGenerator {
    space: TruncatedStateSpace,
    lambda: f64,
    truncation: Truncation,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    absorption: Vec<f64>,
    diagonal: Vec<f64>,
}

/// Builds the censored generator.
pub fn build_generator(dim: usize, width: u32, lambda: f64) -> Result<TruncatedGenerator> {
    build_generator_with(dim, width, lambda, Truncation::Censor)
}

pub fn build_generator_with(dim: usize, width: u32, lambda: f64, truncation: Truncation) -> Result<TruncatedGenerator> {
    let space = TruncatedStateSpace::new(dim, width)?;
    TruncatedGenerator::build(space, lambda, truncation)
}

impl TruncatedGenerator {
    pub fn build(space: TruncatedStateSpace, lambda: f64, truncation: Truncation) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::usage(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let n = space.len();
        let mut g = TruncatedGenerator {
            lambda,
            truncation,
            row_ptr: Vec::with_capacity(n + 1),
            cols: Vec::new(),
            rates: Vec::new(),
            absorption: Vec::with_capacity(n),
            diagonal: Vec::with_capacity(n),
            space,
        };
        g.row_ptr.push(0);
        let mut row: Vec<(u32, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            let absorption = match g.space.storage {
                Storage::Bitmask => g.bitmask_row(i, &mut row),
                Storage::Explicit { .. } => g.explicit_row(i, &mut row),
            };
            row.sort_by_key(|e| e.0);
            let mut off = 0.0;
            let mut k = 0;
            while k < row.len() {
                let (c, mut r) = row[k];
                k += 1;
                while k < row.len() && row[k].0 == c {
                    r += row[k].1;
                    k += 1;
                }
                if r > 0.0 {
                    g.cols.push(c);
                    g.rates.push(r);
                    off += r;
                }
            }
            g.row_ptr.push(g.cols.len());
            g.absorption.push(absorption);
            g.diagonal.push(-(off + absorption));
        }
        Ok(g)
    }

    /// Transitions out of a one-dimensional state; returns its absorption rate.
    fn bitmask_row(&self, i: usize, row: &mut Vec<(u32, f64)>) -> f64 {
        let w = self.space.width;
        let lambda = self.lambda;
        let kill = self.truncation == Truncation::Kill;
        let m = mask_of_id(i);
        let top = 63 - m.leading_zeros();
        let mut absorption = 0.0;
        let mut targets: Vec<(u64, f64)> = Vec::with_capacity(3 * (top as usize + 1));
        for k in 0..=top {
            if m >> k & 1 == 0 {
                continue;
            }
            let rest = m & !(1 << k);
            if rest == 0 {
                absorption += 1.0;
            } else {
                targets.push((rest >> rest.trailing_zeros(), 1.0));
            }
            // right neighbour
            if m >> (k + 1) & 1 == 0 {
                if k + 1 < w {
                    targets.push((m | 1 << (k + 1), lambda));
                } else if kill {
                    absorption += lambda;
                }
            }
            // left neighbour
            if k == 0 {
                if top + 1 < w {
                    targets.push(((m << 1) | 1, lambda));
                } else if kill {
                    absorption += lambda;
                }
            } else if m >> (k - 1) & 1 == 0 {
                targets.push((m | 1 << (k - 1), lambda));
            }
        }
        row.extend(targets.into_iter().map(|(t, r)| (id_of_mask(t) as u32, r)));
        absorption
    }

    fn explicit_row(&self, i: usize, row: &mut Vec<(u32, f64)>) -> f64 {
        let z = self.space.state(i);
        let c = z.as_config();
        let mut absorption = 0.0;
        for x in c.sites() {
            let mut rest = c.clone();
            rest.remove(x);
            match rest.canonicalize() {
                Quotient::Absorbed => absorption += 1.0,
                Quotient::Alive(t) => row.push((self.lookup(&t), 1.0)),
            }
            for dir in 0..2 * self.space.dim {
                let y = x.neighbor(dir);
                if c.contains(&y) {
                    continue;
                }
                let mut grown = c.clone();
                grown.insert(y);
                let t = grown.canonicalize().alive().expect("non-empty");
                if t.diameter() < self.space.width {
                    row.push((self.lookup(&t), self.lambda));
                } else if self.truncation == Truncation::Kill {
                    absorption += self.lambda;
                }
            }
        }
        absorption
    }

    fn lookup(&self, c: &CanonicalConfig) -> u32 {
        self.space.index_of(c).expect("target has diameter < W") as u32
    }

    pub fn space(&self) -> &TruncatedStateSpace {
        &self.space
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn n_states(&self) -> usize {
        self.absorption.len()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Off-diagonal entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().map(|&c| c as usize).zip(self.rates[r].iter().copied())
    }

    pub fn absorption_rate(&self, i: usize) -> f64 {
        self.absorption[i]
    }

    pub fn absorption_rates(&self) -> &[f64] {
        &self.absorption
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.diagonal[i]
    }

    /// `Q[i][j]` including the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    /// Row vector times generator: `out = v Q`.
    pub fn left_mul(&self, v: &[f64], out: &mut [f64]) {
        for (o, (&x, &d)) in out.iter_mut().zip(v.iter().zip(&self.diagonal)) {
            *o = x * d;
        }
        for (i, &x) in v.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k] as usize] += x * self.rates[k];
            }
        }
    }

    /// Writes `row col rate` lines (zero-based, diagonal included, absorption excluded).
    pub fn export_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# row col rate")?;
        for i in 0..self.n_states() {
            writeln!(w, "{i} {i} {:e}", self.diagonal[i])?;
            for (j, r) in self.row(i) {
                writeln!(w, "{i} {j} {r:e}")?;
            }
        }
        Ok(())
    }

    /// Writes `id config absorption_rate` lines.
    pub fn export_states<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# id config absorption_rate")?;
        for i in 0..self.n_states() {
            writeln!(w, "{i} {} {:e}", self.space.state(i), self.absorption[i])?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    pub tolerance: f64,
    pub max_iter: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tolerance: DEFAULT_TOLERANCE, max_iter: DEFAULT_MAX_ITER }
    }
}

/// Left Perron eigenpair of a truncated generator.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSolution {
    pub alpha: f64,
    /// Probability vector indexed like the state space.
    pub nu: Vec<f64>,
    /// `‖νQ + αν‖₁` at the returned iterate.
    pub residual: f64,
    pub iterations: u64,
    /// Uniformization rate.
    pub uniformization: f64,
}

impl EigenSolution {
    /// Full pmf over states with positive mass.
    pub fn estimate(&self, g: &TruncatedGenerator) -> QsdEstimate {
        let mut est = QsdEstimate::from_weights(
            self.nu.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, &p)| (g.space.state(i), p)),
            Method::Eigen,
            g.n_states() as f64,
        );
        est.alpha_hat = Some(self.alpha);
        est.alpha_stderr = Some(0.0);
        est
    }

    /// The `k` heaviest states, without materializing the whole pmf.
    pub fn top(&self, g: &TruncatedGenerator, k: usize) -> Vec<(CanonicalConfig, f64)> {
        let mut idx: Vec<usize> = (0..self.nu.len()).collect();
        let k = k.min(idx.len());
        if k == 0 {
            return Vec::new();
        }
        idx.select_nth_unstable_by(k - 1, |&a, &b| self.nu[b].total_cmp(&self.nu[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx.sort_by(|&a, &b| self.nu[b].total_cmp(&self.nu[a]).then(a.cmp(&b)));
        idx.into_iter().map(|i| (g.space.state(i), self.nu[i])).collect()
    }
}

/// Power iteration on the uniformized kernel `P = I + Q/Λ`, started from the
/// singleton. `Λ` is 5% above the largest exit rate so that `P` keeps a
/// positive diagonal even for a single state.
pub fn qsd_eigen(g: &TruncatedGenerator, options: EigenOptions) -> Result<EigenSolution> {
    if !(options.tolerance > 0.0) {
        return Err(Error::usage("tolerance must be positive"));
    }
    let n = g.n_states();
    let max_exit = g.diagonal.iter().fold(0.0f64, |m, d| m.max(-d));
    let big = 1.05 * max_exit;
    let mut nu = vec![0.0; n];
    nu[g.space.singleton_index()] = 1.0;
    let mut q_nu = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=options.max_iter {
        g.left_mul(&nu, &mut q_nu);
        // sum of νQ is -α for a probability vector ν
        let alpha = -q_nu.iter().sum::<f64>();
        residual = q_nu.iter().zip(&nu).map(|(q, p)| (q + alpha * p).abs()).sum();
        if residual < options.tolerance {
            if !(alpha > 0.0) {
                return Err(Error::Numerical { message: format!("non-positive alpha {alpha}"), residual });
            }
            return Ok(EigenSolution { alpha, nu, residual, iterations: iter - 1, uniformization: big });
        }
        let mut total = 0.0;
        for (p, q) in nu.iter_mut().zip(&q_nu) {
            *p += q / big;
            total += *p;
        }
        if !(total > 0.0) {
            return Err(Error::Numerical { message: "iterate vanished".into(), residual });
        }
        for p in nu.iter_mut() {
            *p /= total;
        }
    }
    Err(Error::Numerical {
        message: format!("power iteration did not converge in {} iterations", options.max_iter),
        residual,
    })
}

/// Total variation distance between eigenvectors of two truncations.
pub fn tv_between(a: (&TruncatedStateSpace, &[f64]), b: (&TruncatedStateSpace, &[f64])) -> f64 {
    let (sa, va) = a;
    let (sb, vb) = b;
    let mut diff = 0.0;
    let mut matched_b = 0.0;
    let both_masks = matches!((&sa.storage, &sb.storage), (Storage::Bitmask, Storage::Bitmask));
    for (i, &p) in va.iter().enumerate() {
        let j = if both_masks { (i < vb.len()).then_some(i) } else { sb.index_of(&sa.state(i)) };
        match j {
            Some(j) => {
                diff += (p - vb[j]).abs();
                matched_b += vb[j];
            }
            None => diff += p,
        }
    }
    let unmatched_b: f64 = vb.iter().sum::<f64>() - matched_b;
    0.5 * (diff + unmatched_b.max(0.0))
}

/// One line of a truncation sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub width: u32,
    pub n_states: usize,
    pub alpha: f64,
    pub residual: f64,
    pub iterations: u64,
    /// TV distance to the next width in the list.
    pub tv_next: Option<f64>,
    /// `|α_next − α|`.
    pub alpha_delta_next: Option<f64>,
    #[serde(skip)]
    pub space: Option<TruncatedStateSpace>,
    #[serde(skip)]
    pub nu: Vec<f64>,
}

impl SweepRow {
    pub fn pmf(&self) -> BTreeMap<CanonicalConfig, f64> {
        let space = self.space.as_ref().expect("sweep rows carry their state space");
        self.nu.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, &p)| (space.state(i), p)).collect()
    }
}

pub fn truncation_sweep(
    dim: usize,
    lambda: f64,
    widths: &[u32],
    truncation: Truncation,
    options: EigenOptions,
) -> Result<Vec<SweepRow>> {
    let mut rows: Vec<SweepRow> = Vec::with_capacity(widths.len());
    for &w in widths {
        let g = build_generator_with(dim, w, lambda, truncation)?;
        let sol = qsd_eigen(&g, options)?;
        rows.push(SweepRow {
            width: w,
            n_states: g.n_states(),
            alpha: sol.alpha,
            residual: sol.residual,
            iterations: sol.iterations,
            tv_next: None,
            alpha_delta_next: None,
            space: Some(g.space),
            nu: sol.nu,
        });
    }
    for k in 1..rows.len() {
        let (head, tail) = rows.split_at_mut(k);
        let (a, b) = (&mut head[k - 1], &tail[0]);
        a.tv_next = Some(tv_between(
            (a.space.as_ref().expect("set above"), &a.nu),
            (b.space.as_ref().expect("set above"), &b.nu),
        ));
        a.alpha_delta_next = Some((b.alpha - a.alpha).abs());
    }
    Ok(rows)
}
