//! Finite configurations on `Z^d` and the quotient by translations.
//!
//! A [`Configuration`] keeps its sites sorted in lexicographic order at all
//! times; that sorted vector is the only normal form, so the minimal site is
//! always the first entry and canonicalization is a single translation.
//!
//! Text form: sites separated by `;`, coordinates by `,`, e.g. `0,0;0,1;1,-2`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest lattice dimension supported by the fixed-size site representation.
pub const MAX_DIM: usize = 3;

/// A point of `Z^d`, `1 <= d <= MAX_DIM`. Unused coordinates are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Site {
    dim: u8,
    coords: [i32; MAX_DIM],
}

impl Site {
    pub fn new(coords: &[i32]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::usage(format!(
                "site dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site { dim: coords.len() as u8, coords: c })
    }

    /// Shorthand for one-dimensional sites.
    pub fn d1(x: i32) -> Self {
        Site { dim: 1, coords: [x, 0, 0] }
    }

    pub fn d2(x: i32, y: i32) -> Self {
        Site { dim: 2, coords: [x, y, 0] }
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension out of range");
        Site { dim: dim as u8, coords: [0; MAX_DIM] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn add(&self, other: &Site) -> Site {
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(other.coords.iter()) {
            *a += b;
        }
        Site { dim: self.dim, coords: c }
    }

    #[inline]
    pub fn sub(&self, other: &Site) -> Site {
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(other.coords.iter()) {
            *a -= b;
        }
        Site { dim: self.dim, coords: c }
    }

    /// Nearest neighbour in direction `dir`, `0 <= dir < 2d`: axis `dir / 2`,
    /// positive for even `dir`, negative for odd.
    #[inline]
    pub fn neighbor(&self, dir: usize) -> Site {
        debug_assert!(dir < 2 * self.dim());
        let mut c = self.coords;
        if dir % 2 == 0 {
            c[dir / 2] += 1;
        } else {
            c[dir / 2] -= 1;
        }
        Site { dim: self.dim, coords: c }
    }

    /// Direction pointing back along `dir`.
    #[inline]
    pub fn opposite(dir: usize) -> usize {
        dir ^ 1
    }

    /// ℓ∞ distance.
    #[inline]
    pub fn linf(&self, other: &Site) -> u32 {
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap_or(0)
    }
}

impl Ord for Site {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coords.cmp(&other.coords).then(self.dim.cmp(&other.dim))
    }
}

impl PartialOrd for Site {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let coords = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<i32>()
                    .map_err(|e| Error::Parse(format!("bad coordinate {p:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Site::new(&coords)
    }
}

/// Lexicographic comparison of two sites of the same dimension.
pub fn lex_compare(a: &Site, b: &Site) -> Result<Ordering> {
    if a.dim != b.dim {
        return Err(Error::usage(format!(
            "cannot compare sites of dimension {} and {}",
            a.dim, b.dim
        )));
    }
    Ok(a.coords.cmp(&b.coords))
}

/// A finite subset of `Z^d`, stored strictly increasing in lexicographic order.
/// The empty configuration is the absorbing state.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    dim: u8,
    sites: Vec<Site>,
}

impl Configuration {
    pub fn empty(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension out of range");
        Configuration { dim: dim as u8, sites: Vec::new() }
    }

    /// Builds a configuration from sites in any order; duplicates are merged.
    pub fn new(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::usage(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        let mut v: Vec<Site> = sites.into_iter().collect();
        if let Some(bad) = v.iter().find(|s| s.dim() != dim) {
            return Err(Error::usage(format!(
                "site {bad} has dimension {}, expected {dim}",
                bad.dim()
            )));
        }
        v.sort_unstable();
        v.dedup();
        Ok(Configuration { dim: dim as u8, sites: v })
    }

    /// Caller guarantees the vector is sorted, deduplicated and of dimension `dim`.
    pub(crate) fn from_sorted_unchecked(dim: usize, sites: Vec<Site>) -> Self {
        debug_assert!(sites.windows(2).all(|w| w[0] < w[1]));
        Configuration { dim: dim as u8, sites }
    }

    /// `{lo, lo+1, ..., hi}` in one dimension.
    pub fn interval(lo: i32, hi: i32) -> Self {
        Configuration { dim: 1, sites: (lo..=hi).map(Site::d1).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.sites.binary_search(x).is_ok()
    }

    /// Lexicographically smallest site.
    pub fn min_site(&self) -> Option<&Site> {
        self.sites.first()
    }

    /// Returns `true` when the site was not already present.
    pub fn insert(&mut self, x: Site) -> bool {
        match self.sites.binary_search(&x) {
            Ok(_) => false,
            Err(i) => {
                self.sites.insert(i, x);
                true
            }
        }
    }

    pub fn remove(&mut self, x: &Site) -> bool {
        match self.sites.binary_search(x) {
            Ok(i) => {
                self.sites.remove(i);
                true
            }
            Err(_) => false,
        }
    }

    pub fn union(&self, other: &Configuration) -> Configuration {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.sites.len() && j < other.sites.len() {
            match self.sites[i].cmp(&other.sites[j]) {
                Ordering::Less => {
                    out.push(self.sites[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.sites[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push(self.sites[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.sites[i..]);
        out.extend_from_slice(&other.sites[j..]);
        Configuration { dim: self.dim, sites: out }
    }

    pub fn is_subset(&self, other: &Configuration) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    /// Sites strictly below `x` in lexicographic order.
    pub fn strictly_below(&self, x: &Site) -> Configuration {
        let end = self.sites.partition_point(|s| s < x);
        Configuration { dim: self.dim, sites: self.sites[..end].to_vec() }
    }

    pub fn translate(&self, v: &Site) -> Configuration {
        Configuration { dim: self.dim, sites: self.sites.iter().map(|s| s.add(v)).collect() }
    }

    /// Projection onto the quotient by translations.
    pub fn canonicalize(&self) -> Quotient {
        match self.sites.first() {
            None => Quotient::Absorbed,
            Some(min) => {
                let min = *min;
                let sites = self.sites.iter().map(|s| s.sub(&min)).collect();
                Quotient::Alive(CanonicalConfig(Configuration { dim: self.dim, sites }))
            }
        }
    }

    /// Largest ℓ∞ distance between two sites.
    pub fn diameter(&self) -> Result<u32> {
        if self.sites.is_empty() {
            return Err(Error::usage("diameter of the empty configuration"));
        }
        Ok(self.diameter_nonempty())
    }

    pub(crate) fn diameter_nonempty(&self) -> u32 {
        let d = self.dim();
        let mut lo = [i32::MAX; MAX_DIM];
        let mut hi = [i32::MIN; MAX_DIM];
        for s in &self.sites {
            for k in 0..d {
                lo[k] = lo[k].min(s.coords[k]);
                hi[k] = hi[k].max(s.coords[k]);
            }
        }
        (0..d).map(|k| lo[k].abs_diff(hi[k])).max().unwrap_or(0)
    }

    /// Parses the text form, with an explicit dimension so that the empty
    /// string can denote the empty configuration.
    pub fn parse_with_dim(text: &str, dim: usize) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Configuration::empty(dim));
        }
        let sites = text.split(';').map(str::parse).collect::<Result<Vec<Site>>>()?;
        Configuration::new(dim, sites)
    }
}

impl FromStr for Configuration {
    type Err = Error;

    /// Infers the dimension from the first site; rejects the empty string.
    fn from_str(s: &str) -> Result<Self> {
        let first = s
            .split(';')
            .next()
            .filter(|p| !p.trim().is_empty())
            .ok_or_else(|| Error::Parse("cannot infer the dimension of an empty configuration".into()))?;
        let dim = first.split(',').count();
        Configuration::parse_with_dim(s, dim)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sites.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

/// Representative of a class in the quotient space: a non-empty
/// configuration whose lexicographically minimal site is the origin.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalConfig(Configuration);

impl CanonicalConfig {
    /// The configuration `{0}`.
    pub fn singleton(dim: usize) -> Self {
        CanonicalConfig(Configuration { dim: dim as u8, sites: vec![Site::origin(dim)] })
    }

    /// Caller guarantees the configuration is already canonical.
    pub(crate) fn from_canonical_unchecked(c: Configuration) -> Self {
        debug_assert!(c.min_site().map(|m| m.coords().iter().all(|&x| x == 0)) == Some(true));
        CanonicalConfig(c)
    }

    pub fn as_config(&self) -> &Configuration {
        &self.0
    }

    pub fn into_config(self) -> Configuration {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn sites(&self) -> &[Site] {
        &self.0.sites
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn diameter(&self) -> u32 {
        self.0.diameter_nonempty()
    }
}

impl fmt::Display for CanonicalConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for CanonicalConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl FromStr for CanonicalConfig {
    type Err = Error;

    /// Parses any non-empty configuration and canonicalizes it.
    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<Configuration>()?.canonicalize() {
            Quotient::Alive(c) => Ok(c),
            Quotient::Absorbed => Err(Error::Parse("canonical configuration must be non-empty".into())),
        }
    }
}

/// Image of a configuration in `Λ ∪ {∅}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quotient {
    Absorbed,
    Alive(CanonicalConfig),
}

impl Quotient {
    pub fn is_absorbed(&self) -> bool {
        matches!(self, Quotient::Absorbed)
    }

    pub fn alive(self) -> Option<CanonicalConfig> {
        match self {
            Quotient::Alive(c) => Some(c),
            Quotient::Absorbed => None,
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Site);
string_serde!(Configuration);
string_serde!(CanonicalConfig);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionKind {
    /// `B_r^y = {x : |x - y|_∞ <= r}`.
    Box,
    /// `D_r^y = B_r^y \ B_{r-1}^y`, `r >= 1`.
    Shell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    center: Site,
    radius: u32,
    kind: RegionKind,
}

impl Region {
    pub fn ball(center: Site, radius: u32) -> Self {
        Region { center, radius, kind: RegionKind::Box }
    }

    pub fn shell(center: Site, radius: u32) -> Result<Self> {
        if radius == 0 {
            return Err(Error::usage("shell radius must be at least 1"));
        }
        Ok(Region { center, radius, kind: RegionKind::Shell })
    }

    pub fn center(&self) -> Site {
        self.center
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn contains(&self, x: &Site) -> bool {
        let r = self.center.linf(x);
        match self.kind {
            RegionKind::Box => r <= self.radius,
            RegionKind::Shell => r == self.radius,
        }
    }

    /// All sites of the region, in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        let d = self.center.dim();
        let r = self.radius as i32;
        let side = (2 * r + 1) as usize;
        let total = side.pow(d as u32);
        let mut out = Vec::new();
        let mut offs = [0i32; MAX_DIM];
        for mut idx in 0..total {
            for k in (0..d).rev() {
                offs[k] = (idx % side) as i32 - r;
                idx /= side;
            }
            let x = self.center.add(&Site { dim: d as u8, coords: offs });
            if self.contains(&x) {
                out.push(x);
            }
        }
        out
    }
}
