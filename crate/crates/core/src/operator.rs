//! Complex linear combinations of Pauli strings with tracked finite support.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::pauli::{i_pow, Pauli, PauliString, Site};

pub const DEFAULT_DENSE_LIMIT: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Canonical sum of Pauli strings: no repeated strings, no exactly-zero coefficients.
#[derive(Clone, Default, PartialEq)]
pub struct LocalOperator {
    terms: BTreeMap<PauliString, Complex64>,
    support: Vec<Site>,
}

impl LocalOperator {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::scalar(ONE)
    }

    pub fn scalar(c: Complex64) -> Self {
        Self::from_terms([(PauliString::identity(), c)])
    }

    pub fn from_string(s: PauliString, c: Complex64) -> Self {
        Self::from_terms([(s, c)])
    }

    /// Canonicalizes an arbitrary term list by merging duplicates and dropping exact zeros.
    pub fn from_terms(terms: impl IntoIterator<Item = (PauliString, Complex64)>) -> Self {
        let mut map: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (s, c) in terms {
            *map.entry(s).or_insert(ZERO) += c;
        }
        Self::from_map(map)
    }

    fn from_map(mut terms: BTreeMap<PauliString, Complex64>) -> Self {
        terms.retain(|_, c| *c != ZERO);
        let mut support: Vec<Site> = terms.keys().flat_map(|s| s.sites()).collect();
        support.sort_unstable();
        support.dedup();
        Self { terms, support }
    }

    pub fn pauli(site: Site, p: Pauli) -> Self {
        Self::from_string(PauliString::single(site, p), ONE)
    }

    pub fn sx(site: Site) -> Self {
        Self::pauli(site, Pauli::X)
    }

    pub fn sy(site: Site) -> Self {
        Self::pauli(site, Pauli::Y)
    }

    pub fn sz(site: Site) -> Self {
        Self::pauli(site, Pauli::Z)
    }

    /// σ⁺ = (σ¹ + iσ²)/2, raising towards spin up.
    pub fn sigma_plus(site: Site) -> Self {
        Self::from_terms([
            (PauliString::single(site, Pauli::X), Complex64::new(0.5, 0.0)),
            (PauliString::single(site, Pauli::Y), Complex64::new(0.0, 0.5)),
        ])
    }

    pub fn sigma_minus(site: Site) -> Self {
        Self::sigma_plus(site).adjoint()
    }

    /// P⁺ = σ⁺σ⁻ = (1 + σ³)/2.
    pub fn proj_up(site: Site) -> Self {
        Self::from_terms([
            (PauliString::identity(), Complex64::new(0.5, 0.0)),
            (PauliString::single(site, Pauli::Z), Complex64::new(0.5, 0.0)),
        ])
    }

    pub fn proj_down(site: Site) -> Self {
        Self::from_terms([
            (PauliString::identity(), Complex64::new(0.5, 0.0)),
            (PauliString::single(site, Pauli::Z), Complex64::new(-0.5, 0.0)),
        ])
    }

    /// Total magnetization Σ σ³ over `sites`.
    pub fn magnetization(sites: impl IntoIterator<Item = Site>) -> Self {
        Self::from_terms(sites.into_iter().map(|s| (PauliString::single(s, Pauli::Z), ONE)))
    }

    pub fn terms(&self) -> impl ExactSizeIterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, s: &PauliString) -> Complex64 {
        self.terms.get(s).copied().unwrap_or(ZERO)
    }

    /// Normalized trace `tr(A)/2^|supp|`, i.e. the identity coefficient.
    pub fn normalized_trace(&self) -> Complex64 {
        self.coefficient(&PauliString::identity())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn support(&self) -> &[Site] {
        &self.support
    }

    pub fn is_scalar(&self) -> bool {
        self.support.is_empty()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_map(self.terms.iter().map(|(s, v)| (s.clone(), v * c)).collect())
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        Self { terms: self.terms.iter().map(|(s, v)| (s.clone(), v.conj())).collect(), support: self.support.clone() }
    }

    pub fn multiply(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut acc: HashMap<PauliString, Complex64> = HashMap::with_capacity(self.len() * other.len());
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let (k, s) = a.mul(b);
                *acc.entry(s).or_insert(ZERO) += i_pow(k) * ca * cb;
            }
        }
        Self::from_map(acc.into_iter().collect())
    }

    /// `AB - BA`, computed string by string so commuting pairs never produce round-off.
    pub fn commutator(&self, other: &Self) -> Self {
        let mut acc: HashMap<PauliString, Complex64> = HashMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if a.commutes_with(b) {
                    continue;
                }
                let (k, s) = a.mul(b);
                *acc.entry(s).or_insert(ZERO) += 2.0 * i_pow(k) * ca * cb;
            }
        }
        Self::from_map(acc.into_iter().collect())
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        let mut acc: HashMap<PauliString, Complex64> = HashMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if !a.commutes_with(b) {
                    continue;
                }
                let (k, s) = a.mul(b);
                *acc.entry(s).or_insert(ZERO) += 2.0 * i_pow(k) * ca * cb;
            }
        }
        Self::from_map(acc.into_iter().collect())
    }

    pub fn translate(&self, x: Site) -> Self {
        if x == 0 {
            return self.clone();
        }
        Self {
            terms: self.terms.iter().map(|(s, v)| (s.translate(x), *v)).collect(),
            support: self.support.iter().map(|s| s + x).collect(),
        }
    }

    /// Relabels sites through `f` (injective on the support), e.g. wrapping onto a ring.
    pub fn map_sites(&self, f: impl Fn(Site) -> Site) -> Self {
        Self::from_terms(self.terms.iter().map(|(s, v)| (s.map_sites(&f), *v)))
    }

    /// Drops terms with `|c| <= eps`; `eps = 0` leaves the operator unchanged.
    pub fn prune(&self, eps: f64) -> Self {
        if eps <= 0.0 {
            return self.clone();
        }
        Self::from_map(self.terms.iter().filter(|(_, v)| v.norm() > eps).map(|(s, v)| (s.clone(), *v)).collect())
    }

    /// Keeps only terms whose string satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&PauliString) -> bool) -> Self {
        Self::from_map(self.terms.iter().filter(|(s, _)| keep(s)).map(|(s, v)| (s.clone(), *v)).collect())
    }

    /// Normalized Hilbert-Schmidt norm `sqrt(tr(A†A)/2^n)`; a lower bound on the operator norm.
    pub fn hs_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Σ|c|, an upper bound on the operator norm.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// Dense matrix on `sites`, where `sites[k]` is qubit `k` (bit value 1 = spin down).
    pub fn to_dense(&self, sites: &[Site]) -> Result<DMatrix<Complex64>> {
        let pos = site_positions(sites, &self.support)?;
        let dim = 1usize << sites.len();
        let mut m = DMatrix::zeros(dim, dim);
        for (s, c) in &self.terms {
            let masks = s.masks(|x| pos[&x]);
            for col in 0..dim {
                m[(col ^ masks.flip, col)] += c * masks.phase(col);
            }
        }
        Ok(m)
    }

    /// Spectral norm of the dense matrix on the support.
    pub fn operator_norm(&self) -> Result<f64> {
        self.operator_norm_with_limit(DEFAULT_DENSE_LIMIT)
    }

    pub fn operator_norm_with_limit(&self, limit: usize) -> Result<f64> {
        let n = self.support.len();
        if n > limit {
            return Err(Error::SupportTooLarge { sites: n, limit });
        }
        if self.terms.len() == 1 {
            return Ok(self.terms.values().next().unwrap().norm());
        }
        Ok(dense::spectral_norm(&self.to_dense(&self.support)?))
    }

    /// Inverse of [`LocalOperator::to_dense`] via a Pauli transform; entries below `tol` are dropped.
    pub fn from_dense(m: &DMatrix<Complex64>, sites: &[Site], tol: f64) -> Self {
        let mut terms = BTreeMap::new();
        for (flip, sign, c) in dense::pauli_decompose(m, tol) {
            let pairs = sites.iter().enumerate().filter_map(|(k, &site)| {
                let p = match ((flip >> k) & 1, (sign >> k) & 1) {
                    (1, 0) => Pauli::X,
                    (1, 1) => Pauli::Y,
                    (0, 1) => Pauli::Z,
                    _ => return None,
                };
                Some((site, p))
            });
            terms.insert(PauliString::from_pairs(pairs).1, c);
        }
        Self::from_map(terms)
    }

    pub fn to_literals(&self) -> Vec<TermLiteral> {
        self.terms
            .iter()
            .map(|(s, c)| TermLiteral { sites: s.sites().collect(), letters: s.letters_string(), re: c.re, im: c.im })
            .collect()
    }

    pub fn from_literals(lits: &[TermLiteral]) -> Result<Self> {
        let mut terms = Vec::with_capacity(lits.len());
        for l in lits {
            let s = PauliString::parse(&l.sites, &l.letters)
                .ok_or_else(|| Error::InvalidArgument(format!("bad Pauli literal {:?} on {:?}", l.letters, l.sites)))?;
            terms.push((s, Complex64::new(l.re, l.im)));
        }
        Ok(Self::from_terms(terms))
    }
}

pub(crate) fn site_positions(sites: &[Site], support: &[Site]) -> Result<HashMap<Site, usize>> {
    let pos: HashMap<Site, usize> = sites.iter().enumerate().map(|(k, &s)| (s, k)).collect();
    if support.iter().any(|s| !pos.contains_key(s)) {
        return Err(Error::SupportOutsideWindow { support: support.to_vec() });
    }
    Ok(pos)
}

/// JSON literal form of a single term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermLiteral {
    pub sites: Vec<Site>,
    pub letters: String,
    pub re: f64,
    pub im: f64,
}

impl Serialize for LocalOperator {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_literals().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for LocalOperator {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let lits = Vec::<TermLiteral>::deserialize(de)?;
        LocalOperator::from_literals(&lits).map_err(serde::de::Error::custom)
    }
}

impl fmt::Debug for LocalOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LocalOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (s, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i)·{}", c.re, c.im, s)?;
        }
        Ok(())
    }
}

/// Support distance and diameters of a pair of operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub support_a: Vec<Site>,
    pub support_b: Vec<Site>,
    /// ℓ1 distance between supports; `+∞` when either support is empty.
    pub dist: f64,
    pub diam_a: u64,
    pub diam_b: u64,
    /// Set when either operator is a multiple of the identity.
    pub empty_support: bool,
}

pub fn diameter(support: &[Site]) -> u64 {
    match (support.first(), support.last()) {
        (Some(a), Some(b)) => (b - a) as u64,
        _ => 0,
    }
}

/// ℓ1 distance between sorted site sets; 0 on overlap, `+∞` if either is empty.
pub fn support_distance(a: &[Site], b: &[Site]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let (mut i, mut j, mut best) = (0, 0, u64::MAX);
    while i < a.len() && j < b.len() {
        best = best.min(a[i].abs_diff(b[j]));
        if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    best as f64
}

pub fn geometry(a: &LocalOperator, b: &LocalOperator) -> Geometry {
    Geometry {
        support_a: a.support.clone(),
        support_b: b.support.clone(),
        dist: support_distance(&a.support, &b.support),
        diam_a: diameter(&a.support),
        diam_b: diameter(&b.support),
        empty_support: a.support.is_empty() || b.support.is_empty(),
    }
}

impl Add for &LocalOperator {
    type Output = LocalOperator;
    fn add(self, rhs: &LocalOperator) -> LocalOperator {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &LocalOperator {
    type Output = LocalOperator;
    fn sub(self, rhs: &LocalOperator) -> LocalOperator {
        let mut map = self.terms.clone();
        for (s, c) in &rhs.terms {
            *map.entry(s.clone()).or_insert(ZERO) -= c;
        }
        LocalOperator::from_map(map)
    }
}

impl AddAssign<&LocalOperator> for LocalOperator {
    fn add_assign(&mut self, rhs: &LocalOperator) {
        let mut map = std::mem::take(&mut self.terms);
        for (s, c) in &rhs.terms {
            *map.entry(s.clone()).or_insert(ZERO) += c;
        }
        *self = LocalOperator::from_map(map);
    }
}

impl Add for LocalOperator {
    type Output = LocalOperator;
    fn add(mut self, rhs: LocalOperator) -> LocalOperator {
        self += &rhs;
        self
    }
}

impl Sub for LocalOperator {
    type Output = LocalOperator;
    fn sub(self, rhs: LocalOperator) -> LocalOperator {
        &self - &rhs
    }
}

impl Mul for &LocalOperator {
    type Output = LocalOperator;
    fn mul(self, rhs: &LocalOperator) -> LocalOperator {
        self.multiply(rhs)
    }
}

impl Mul for LocalOperator {
    type Output = LocalOperator;
    fn mul(self, rhs: LocalOperator) -> LocalOperator {
        self.multiply(&rhs)
    }
}

impl Mul<Complex64> for &LocalOperator {
    type Output = LocalOperator;
    fn mul(self, rhs: Complex64) -> LocalOperator {
        self.scale(rhs)
    }
}

impl Mul<Complex64> for LocalOperator {
    type Output = LocalOperator;
    fn mul(self, rhs: Complex64) -> LocalOperator {
        self.scale(rhs)
    }
}

impl Mul<f64> for LocalOperator {
    type Output = LocalOperator;
    fn mul(self, rhs: f64) -> LocalOperator {
        self.scale_re(rhs)
    }
}

impl Mul<f64> for &LocalOperator {
    type Output = LocalOperator;
    fn mul(self, rhs: f64) -> LocalOperator {
        self.scale_re(rhs)
    }
}

impl Neg for &LocalOperator {
    type Output = LocalOperator;
    fn neg(self) -> LocalOperator {
        self.scale_re(-1.0)
    }
}

impl Neg for LocalOperator {
    type Output = LocalOperator;
    fn neg(self) -> LocalOperator {
        self.scale_re(-1.0)
    }
}

impl std::iter::Sum for LocalOperator {
    fn sum<I: Iterator<Item = LocalOperator>>(iter: I) -> Self {
        let mut map: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for op in iter {
            for (s, c) in op.terms {
                *map.entry(s).or_insert(ZERO) += c;
            }
        }
        LocalOperator::from_map(map)
    }
}
