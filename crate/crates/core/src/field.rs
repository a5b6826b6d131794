//! Graphical representation of the contact process.
//!
//! An [`EventField`] is a realization of the Poisson marks: a rate-1 stream of
//! recovery times at every site and a rate-λ stream of infection arrows on
//! every ordered nearest-neighbour pair. Streams are never stored globally.
//! Each one is cut into unit time blocks and every block is regenerated on
//! demand from `(master_seed, stream key, block)`, so the lattice is unbounded
//! and the realized marks do not depend on which parts are looked at first.
//!
//! Open paths follow the half-open convention: a vertical segment over
//! `(a, b]` is blocked by a recovery in `(a, b]`. In event order this means
//! that, at equal timestamps, recoveries are applied before arrows.

use std::cmp::{Ordering, Reverse};
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Site};
use crate::streams::{self, TAG_ARROW, TAG_RECOVERY};

/// Identifies one Poisson stream of the field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamKey {
    /// Recovery marks at a site.
    Recovery(Site),
    /// Infection arrows from `from` to `from.neighbor(dir)`.
    Arrow { from: Site, dir: u8 },
}

impl StreamKey {
    /// Arrow key for the ordered pair `(from, to)`; the sites must be nearest neighbours.
    pub fn arrow(from: Site, to: Site) -> Result<Self> {
        if from.dim() != to.dim() {
            return Err(Error::usage("arrow endpoints differ in dimension"));
        }
        (0..2 * from.dim())
            .find(|&dir| from.neighbor(dir) == to)
            .map(|dir| StreamKey::Arrow { from, dir: dir as u8 })
            .ok_or_else(|| Error::usage(format!("{from} and {to} are not nearest neighbours")))
    }

    pub fn source(&self) -> Site {
        match *self {
            StreamKey::Recovery(x) => x,
            StreamKey::Arrow { from, .. } => from,
        }
    }

    /// Target site of an arrow stream.
    pub fn target(&self) -> Option<Site> {
        match *self {
            StreamKey::Recovery(_) => None,
            StreamKey::Arrow { from, dir } => Some(from.neighbor(dir as usize)),
        }
    }

    fn words(&self, block: u64) -> [u64; 6] {
        let (tag, site, dir) = match *self {
            StreamKey::Recovery(x) => (TAG_RECOVERY, x, 0),
            StreamKey::Arrow { from, dir } => (TAG_ARROW, from, dir as u64),
        };
        let c = |k: usize| site.coords().get(k).copied().unwrap_or(0) as i64 as u64;
        [tag | ((site.dim() as u64) << 56), c(0), c(1), c(2), dir, block]
    }
}

/// A point `(x, t)` of space-time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimePoint {
    pub site: Site,
    pub time: f64,
}

impl SpaceTimePoint {
    pub fn new(site: Site, time: f64) -> Self {
        SpaceTimePoint { site, time }
    }
}

/// Result of a forward sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Evolution {
    pub config: Configuration,
    /// Time at which the infected set became empty, if it did within the sweep.
    pub extinction: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EventField {
    dim: usize,
    lambda: f64,
    horizon: f64,
    /// `None` for hand-built fields whose unlisted streams are empty.
    seed: Option<u64>,
    overrides: HashMap<StreamKey, Vec<f64>>,
}

impl EventField {
    /// Poisson field with recovery rate 1 and arrow rate `lambda` on `[0, horizon]`.
    pub fn poisson(master_seed: u64, dim: usize, lambda: f64, horizon: f64) -> Result<Self> {
        Self::check_params(dim, lambda, horizon)?;
        Ok(EventField { dim, lambda, horizon, seed: Some(master_seed), overrides: HashMap::new() })
    }

    /// Field with no marks at all; populate it with [`EventField::set_stream`]
    /// and friends. `lambda` is kept as metadata only.
    pub fn explicit(dim: usize, lambda: f64, horizon: f64) -> Result<Self> {
        Self::check_params(dim, lambda, horizon)?;
        Ok(EventField { dim, lambda, horizon, seed: None, overrides: HashMap::new() })
    }

    fn check_params(dim: usize, lambda: f64, horizon: f64) -> Result<()> {
        if !(1..=crate::lattice::MAX_DIM).contains(&dim) {
            return Err(Error::usage(format!("unsupported dimension {dim}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::usage(format!("infection rate must be finite and >= 0, got {lambda}")));
        }
        if !(horizon > 0.0 && horizon <= 1e4) {
            return Err(Error::usage(format!("horizon must lie in (0, 1e4], got {horizon}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn master_seed(&self) -> Option<u64> {
        self.seed
    }

    fn rate(&self, key: &StreamKey) -> f64 {
        match key {
            StreamKey::Recovery(_) => 1.0,
            StreamKey::Arrow { .. } => self.lambda,
        }
    }

    /// Appends the marks of `key` lying in `[block, block + 1) ∩ [0, horizon]`.
    fn stream_block(&self, key: &StreamKey, block: u64, out: &mut Vec<f64>) {
        if !self.overrides.is_empty() {
            if let Some(v) = self.overrides.get(key) {
                let lo = block as f64;
                let start = v.partition_point(|&x| x < lo);
                out.extend(v[start..].iter().take_while(|&&x| x < lo + 1.0));
                return;
            }
        }
        let Some(seed) = self.seed else { return };
        let rate = self.rate(key);
        if rate <= 0.0 {
            return;
        }
        let lo = block as f64;
        let hi = lo + 1.0;
        let mut rng = streams::stream(seed, &key.words(block));
        let mut t = lo;
        loop {
            t += streams::exponential(&mut rng, rate);
            if t >= hi || t > self.horizon {
                break;
            }
            out.push(t);
        }
    }

    fn last_block(&self) -> u64 {
        self.horizon.ceil() as u64
    }

    fn check_interval(&self, a: f64, b: f64) -> Result<()> {
        if !(0.0 <= a && a <= b && b <= self.horizon) {
            return Err(Error::usage(format!(
                "interval [{a}, {b}] is not inside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Sorted mark times of one stream inside `[a, b]`.
    pub fn events_for(&self, key: StreamKey, a: f64, b: f64) -> Result<Vec<f64>> {
        self.check_interval(a, b)?;
        if key.source().dim() != self.dim {
            return Err(Error::usage("stream key dimension differs from the field"));
        }
        let mut out = Vec::new();
        let first = a.floor() as u64;
        let last = (b.floor() as u64).min(self.last_block());
        for block in first..=last {
            self.stream_block(&key, block, &mut out);
        }
        out.retain(|&x| x >= a && x <= b);
        Ok(out)
    }

    /// Replaces a stream with explicit times. Materializes nothing else.
    pub fn set_stream(&mut self, key: StreamKey, mut times: Vec<f64>) -> Result<()> {
        if times.iter().any(|&x| !(0.0..=self.horizon).contains(&x)) {
            return Err(Error::usage("event time outside the field horizon"));
        }
        times.sort_by(f64::total_cmp);
        self.overrides.insert(key, times);
        Ok(())
    }

    fn materialize(&mut self, key: StreamKey) -> &mut Vec<f64> {
        if !self.overrides.contains_key(&key) {
            let mut all = Vec::new();
            for block in 0..=self.last_block() {
                self.stream_block(&key, block, &mut all);
            }
            self.overrides.insert(key, all);
        }
        self.overrides.get_mut(&key).expect("just inserted")
    }

    pub fn add_event(&mut self, key: StreamKey, time: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&time) {
            return Err(Error::usage("event time outside the field horizon"));
        }
        let v = self.materialize(key);
        let i = v.partition_point(|&x| x < time);
        v.insert(i, time);
        Ok(())
    }

    /// Deletes the mark of `key` at exactly `time`; returns whether one existed.
    pub fn remove_event(&mut self, key: StreamKey, time: f64) -> bool {
        let v = self.materialize(key);
        match v.iter().position(|&x| x == time) {
            Some(i) => {
                v.remove(i);
                true
            }
            None => false,
        }
    }

    pub fn with_recovery(mut self, site: Site, time: f64) -> Result<Self> {
        self.add_event(StreamKey::Recovery(site), time)?;
        Ok(self)
    }

    pub fn with_arrow(mut self, from: Site, to: Site, time: f64) -> Result<Self> {
        self.add_event(StreamKey::arrow(from, to)?, time)?;
        Ok(self)
    }

    /// All arrows `(time, from, to)` with source in the ℓ∞ ball and time in `[a, b]`,
    /// sorted by time.
    pub fn arrows_in_ball(&self, center: Site, radius: u32, a: f64, b: f64) -> Result<Vec<(f64, Site, Site)>> {
        self.check_interval(a, b)?;
        let mut out = Vec::new();
        let mut buf = Vec::new();
        let first = a.floor() as u64;
        let last = (b.floor() as u64).min(self.last_block());
        for from in crate::lattice::Region::ball(center, radius).sites() {
            for dir in 0..2 * self.dim {
                let key = StreamKey::Arrow { from, dir: dir as u8 };
                let to = from.neighbor(dir);
                buf.clear();
                for block in first..=last {
                    self.stream_block(&key, block, &mut buf);
                }
                out.extend(buf.iter().filter(|&&x| x >= a && x <= b).map(|&x| (x, from, to)));
            }
        }
        out.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
        Ok(out)
    }

    /// `C_{s,t}^A`: sites at time `t` reachable by open paths from `A × {s}`.
    ///
    /// # Panics
    /// If `[s, t]` is not inside `[0, horizon]` or `A` has the wrong dimension.
    pub fn evolve(&self, a: &Configuration, s: f64, t: f64) -> Configuration {
        self.evolve_tracked(a, s, t).config
    }

    /// Like [`EventField::evolve`], also reporting the extinction time.
    pub fn evolve_tracked(&self, a: &Configuration, s: f64, t: f64) -> Evolution {
        self.check_interval(s, t).expect("evolve interval");
        assert!(a.is_empty() || a.dim() == self.dim, "configuration dimension differs from the field");
        let mut sweep = Forward::new(self, t);
        for &x in a.sites() {
            sweep.infect(x, s);
        }
        let extinction = if a.is_empty() { None } else { sweep.run() };
        let mut sites: Vec<Site> = sweep.infected.into_keys().collect();
        sites.sort_unstable();
        Evolution { config: Configuration::from_sorted_unchecked(self.dim, sites), extinction }
    }

    /// `{y : (y, s) ⇝ (x, t) for some x in targets}`, computed backwards in time.
    /// Independent of the forward sweep and used to cross-check it.
    pub fn backward_set(&self, targets: &Configuration, t: f64, s: f64) -> Configuration {
        self.check_interval(s, t).expect("backward interval");
        let mut sweep = Backward::new(self, s);
        for &x in targets.sites() {
            sweep.enter(x, t);
        }
        sweep.run();
        let mut sites: Vec<Site> = sweep.dual.into_keys().collect();
        sites.sort_unstable();
        Configuration::from_sorted_unchecked(self.dim, sites)
    }

    /// Whether an open path joins `from` to `to`.
    pub fn reaches(&self, from: SpaceTimePoint, to: SpaceTimePoint) -> bool {
        if from.time > to.time {
            return false;
        }
        let target = Configuration::from_sorted_unchecked(self.dim, vec![to.site]);
        self.backward_set(&target, to.time, from.time).contains(&from.site)
    }
}

const RELOAD: u8 = 0;
const RECOVERY: u8 = 1;
const ARROW: u8 = 2;

#[derive(Clone, Copy, Debug)]
struct Pending {
    time: f64,
    kind: u8,
    site: Site,
    dir: u8,
    episode: u32,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.site.cmp(&other.site))
            .then(self.dir.cmp(&other.dir))
            .then(self.episode.cmp(&other.episode))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Event-driven forward sweep. Each infected site owns an episode number;
/// queued marks from an earlier episode are ignored after the site recovers.
struct Forward<'f> {
    field: &'f EventField,
    end: f64,
    heap: BinaryHeap<Reverse<Pending>>,
    infected: HashMap<Site, u32>,
    next_episode: u32,
    buf: Vec<f64>,
}

impl<'f> Forward<'f> {
    fn new(field: &'f EventField, end: f64) -> Self {
        Forward { field, end, heap: BinaryHeap::new(), infected: HashMap::new(), next_episode: 0, buf: Vec::new() }
    }

    /// Marks `x` infected at `time`. A recovery at exactly `time` does not
    /// block, arrows at exactly `time` fire.
    fn infect(&mut self, x: Site, time: f64) {
        let ep = self.next_episode;
        self.next_episode += 1;
        match self.infected.entry(x) {
            Entry::Occupied(_) => return,
            Entry::Vacant(v) => {
                v.insert(ep);
            }
        }
        self.load(x, ep, time.floor() as u64, time, true);
    }

    fn load(&mut self, x: Site, ep: u32, block: u64, from: f64, strict_recovery: bool) {
        let field = self.field;
        let end = self.end;
        self.buf.clear();
        field.stream_block(&StreamKey::Recovery(x), block, &mut self.buf);
        for &r in &self.buf {
            let after = if strict_recovery { r > from } else { r >= from };
            if after && r <= end {
                self.heap.push(Reverse(Pending { time: r, kind: RECOVERY, site: x, dir: 0, episode: ep }));
            }
        }
        for dir in 0..2 * field.dim {
            self.buf.clear();
            field.stream_block(&StreamKey::Arrow { from: x, dir: dir as u8 }, block, &mut self.buf);
            for &a in &self.buf {
                if a >= from && a <= end {
                    self.heap.push(Reverse(Pending { time: a, kind: ARROW, site: x, dir: dir as u8, episode: ep }));
                }
            }
        }
        let next = (block + 1) as f64;
        if next <= end && next <= field.horizon {
            self.heap.push(Reverse(Pending { time: next, kind: RELOAD, site: x, dir: 0, episode: ep }));
        }
    }

    fn run(&mut self) -> Option<f64> {
        while let Some(Reverse(p)) = self.heap.pop() {
            if self.infected.get(&p.site) != Some(&p.episode) {
                continue;
            }
            match p.kind {
                RELOAD => self.load(p.site, p.episode, p.time as u64, p.time, false),
                RECOVERY => {
                    self.infected.remove(&p.site);
                    if self.infected.is_empty() {
                        return Some(p.time);
                    }
                }
                _ => {
                    let y = p.site.neighbor(p.dir as usize);
                    if !self.infected.contains_key(&y) {
                        self.infect(y, p.time);
                    }
                }
            }
        }
        None
    }
}

/// Backward sweep over the dual: processes marks in decreasing time. At equal
/// timestamps arrows come first (closing the set), then recoveries, then
/// block reloads.
struct Backward<'f> {
    field: &'f EventField,
    start: f64,
    heap: BinaryHeap<(OrdTime, u8, Site, u8, u32)>,
    dual: HashMap<Site, u32>,
    next_episode: u32,
    buf: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdTime(f64);

impl Eq for OrdTime {}

impl PartialOrd for OrdTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

const B_RELOAD: u8 = 0;
const B_RECOVERY: u8 = 1;
const B_ARROW: u8 = 2;

impl<'f> Backward<'f> {
    fn new(field: &'f EventField, start: f64) -> Self {
        Backward { field, start, heap: BinaryHeap::new(), dual: HashMap::new(), next_episode: 0, buf: Vec::new() }
    }

    fn enter(&mut self, w: Site, time: f64) {
        if self.dual.contains_key(&w) {
            return;
        }
        let ep = self.next_episode;
        self.next_episode += 1;
        self.dual.insert(w, ep);
        self.load(w, ep, time.floor() as u64, time);
    }

    /// Queues the marks relevant to `w` inside `block` with time `<= upto`:
    /// its recoveries and the arrows pointing into it.
    fn load(&mut self, w: Site, ep: u32, block: u64, upto: f64) {
        let field = self.field;
        let start = self.start;
        self.buf.clear();
        field.stream_block(&StreamKey::Recovery(w), block, &mut self.buf);
        for &r in &self.buf {
            if r <= upto && r > start {
                self.heap.push((OrdTime(r), B_RECOVERY, w, 0, ep));
            }
        }
        for dir in 0..2 * field.dim {
            let from = w.neighbor(dir);
            self.buf.clear();
            let key = StreamKey::Arrow { from, dir: Site::opposite(dir) as u8 };
            field.stream_block(&key, block, &mut self.buf);
            for &a in &self.buf {
                if a <= upto && a >= start {
                    self.heap.push((OrdTime(a), B_ARROW, w, dir as u8, ep));
                }
            }
        }
        let lo = block as f64;
        if block >= 1 && lo > start {
            self.heap.push((OrdTime(lo), B_RELOAD, w, 0, ep));
        }
    }

    fn run(&mut self) {
        while let Some((OrdTime(time), kind, w, dir, ep)) = self.heap.pop() {
            if self.dual.get(&w) != Some(&ep) {
                continue;
            }
            match kind {
                B_RELOAD => self.load(w, ep, time as u64 - 1, time),
                B_RECOVERY => {
                    self.dual.remove(&w);
                    if self.dual.is_empty() {
                        return;
                    }
                }
                _ => {
                    let y = w.neighbor(dir as usize);
                    self.enter(y, time);
                }
            }
        }
    }
}
