//! Pauli letters and finitely supported Pauli strings on the integer lattice.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Lattice site index.
pub type Site = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Flips the computational basis state (X and Y are off-diagonal).
    #[inline]
    pub fn flips(self) -> bool {
        !matches!(self, Pauli::Z)
    }

    /// Single-site product `self * other = i^k · letter`, with `None` standing for the identity.
    #[inline]
    pub fn mul(self, other: Pauli) -> (u8, Option<Pauli>) {
        use Pauli::*;
        match (self, other) {
            (X, X) | (Y, Y) | (Z, Z) => (0, None),
            (X, Y) => (1, Some(Z)),
            (Y, X) => (3, Some(Z)),
            (Y, Z) => (1, Some(X)),
            (Z, Y) => (3, Some(X)),
            (Z, X) => (1, Some(Y)),
            (X, Z) => (3, Some(Y)),
        }
    }

    /// Matrix element `<row|P|col>` for single-qubit basis bits (0 = spin up).
    #[inline]
    pub fn element(self, row: usize, col: usize) -> Complex64 {
        match self {
            Pauli::X if row != col => Complex64::new(1.0, 0.0),
            Pauli::Y if row != col => {
                if row == 1 {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, -1.0)
                }
            }
            Pauli::Z if row == col => Complex64::new(if row == 0 { 1.0 } else { -1.0 }, 0.0),
            _ => Complex64::new(0.0, 0.0),
        }
    }
}

/// Powers of i, indexed by exponent mod 4.
pub fn i_pow(k: u8) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// A tensor product of non-identity Pauli letters; sites carrying the identity are absent.
///
/// Letters are stored sorted by site. The empty string is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PauliString {
    letters: Vec<(Site, Pauli)>,
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(site: Site, p: Pauli) -> Self {
        Self { letters: vec![(site, p)] }
    }

    /// Builds a string from arbitrary `(site, letter)` pairs; repeated sites are multiplied
    /// together and the accumulated phase is returned alongside.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Site, Pauli)>) -> (u8, Self) {
        let mut v: Vec<(Site, Pauli)> = pairs.into_iter().collect();
        v.sort_by_key(|&(s, _)| s);
        let mut out: Vec<(Site, Pauli)> = Vec::with_capacity(v.len());
        let mut phase = 0u8;
        for (s, p) in v {
            match out.last_mut() {
                Some(last) if last.0 == s => {
                    let (k, r) = last.1.mul(p);
                    phase = (phase + k) % 4;
                    match r {
                        Some(q) => last.1 = q,
                        None => {
                            out.pop();
                        }
                    }
                }
                _ => out.push((s, p)),
            }
        }
        (phase, Self { letters: out })
    }

    /// Parses `letters` placed on `sites` in order; fails on length mismatch, unknown letters or
    /// repeated sites.
    pub fn parse(sites: &[Site], letters: &str) -> Option<Self> {
        let chars: Vec<char> = letters.chars().collect();
        if chars.len() != sites.len() {
            return None;
        }
        let mut pairs = Vec::with_capacity(sites.len());
        for (&s, c) in sites.iter().zip(chars) {
            if c == 'I' || c == 'i' {
                continue;
            }
            pairs.push((s, Pauli::from_char(c)?));
        }
        let mut sorted: Vec<Site> = pairs.iter().map(|p| p.0).collect();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        Some(Self::from_pairs(pairs).1)
    }

    pub fn letters(&self) -> &[(Site, Pauli)] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.letters.len()
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.letters.iter().map(|&(s, _)| s)
    }

    pub fn letter_at(&self, site: Site) -> Option<Pauli> {
        self.letters
            .binary_search_by_key(&site, |&(s, _)| s)
            .ok()
            .map(|i| self.letters[i].1)
    }

    /// `self * other = i^k · result`.
    pub fn mul(&self, other: &PauliString) -> (u8, PauliString) {
        let (a, b) = (&self.letters, &other.letters);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let mut phase = 0u8;
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    let (k, r) = a[i].1.mul(b[j].1);
                    phase += k;
                    if let Some(p) = r {
                        out.push((a[i].0, p));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        (phase % 4, PauliString { letters: out })
    }

    /// True when the two strings commute (an even number of sites carry distinct letters).
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let (a, b) = (&self.letters, &other.letters);
        let (mut i, mut j, mut anti) = (0, 0, 0usize);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    if a[i].1 != b[j].1 {
                        anti += 1;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        anti % 2 == 0
    }

    pub fn translate(&self, x: Site) -> PauliString {
        PauliString { letters: self.letters.iter().map(|&(s, p)| (s + x, p)).collect() }
    }

    /// Maps every site through `f`, which must be injective on the support.
    pub fn map_sites(&self, f: impl Fn(Site) -> Site) -> PauliString {
        PauliString::from_pairs(self.letters.iter().map(|&(s, p)| (f(s), p))).1
    }

    pub fn letters_string(&self) -> String {
        self.letters.iter().map(|&(_, p)| p.as_char()).collect()
    }

    /// Basis-state action on a window whose site `window[k]` is bit `k` (bit value 1 = spin down):
    /// returns the flip mask and, through `diag`, the phase for a given column index.
    pub fn masks(&self, position: impl Fn(Site) -> usize) -> PauliMasks {
        let mut m = PauliMasks::default();
        for &(s, p) in &self.letters {
            let bit = 1usize << position(s);
            match p {
                Pauli::X => m.flip |= bit,
                Pauli::Y => {
                    m.flip |= bit;
                    m.y |= bit;
                }
                Pauli::Z => m.z |= bit,
            }
        }
        m
    }
}

/// Bit masks describing a Pauli string on a window of qubits.
///
/// `P|c> = phase(c) |c ^ flip>` with `phase(c) = i^{ny} (-1)^{popcount(c & (y|z))}`
/// where `ny` is the number of Y letters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PauliMasks {
    pub flip: usize,
    pub y: usize,
    pub z: usize,
}

impl PauliMasks {
    #[inline]
    pub fn phase(&self, col: usize) -> Complex64 {
        let ny = self.y.count_ones() as u8;
        let sign = ((col & (self.y | self.z)).count_ones() & 1) as u8;
        i_pow(ny + 2 * sign)
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sites()
            .cmp(other.sites())
            .then_with(|| self.letters.iter().map(|l| l.1).cmp(other.letters.iter().map(|l| l.1)))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "I");
        }
        for (k, (s, p)) in self.letters.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}{}", p.as_char(), s)?;
        }
        Ok(())
    }
}
