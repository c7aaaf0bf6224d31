use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::LocalOperator;
use crate::pauli::Site;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

/// A contiguous block of sites `start..start+len`; periodic windows are rings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: Site,
    pub len: usize,
    pub boundary: Boundary,
}

impl Window {
    pub fn open(start: Site, len: usize) -> Self {
        Self { start, len, boundary: Boundary::Open }
    }

    pub fn ring(len: usize) -> Self {
        Self { start: 0, len, boundary: Boundary::Periodic }
    }

    pub fn end(&self) -> Site {
        self.start + self.len as Site
    }

    pub fn sites(&self) -> Vec<Site> {
        (self.start..self.end()).collect()
    }

    pub fn contains(&self, s: Site) -> bool {
        s >= self.start && s < self.end()
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Folds a site into the window on rings; identity on open windows.
    pub fn wrap(&self, s: Site) -> Site {
        match self.boundary {
            Boundary::Open => s,
            Boundary::Periodic => self.start + (s - self.start).rem_euclid(self.len as Site),
        }
    }

    /// Left ends of nearest-neighbour bonds.
    pub fn bond_starts(&self) -> Vec<Site> {
        match self.boundary {
            Boundary::Open => (self.start..self.end() - 1).collect(),
            Boundary::Periodic => self.sites(),
        }
    }

    /// Places a template (written around site 0) at site `x`, wrapping on rings.
    pub fn place(&self, template: &LocalOperator, x: Site) -> LocalOperator {
        match self.boundary {
            Boundary::Open => template.translate(x),
            Boundary::Periodic => template.map_sites(|s| self.wrap(s + x)),
        }
    }

    /// Lattice translation by `x` inside the window (cyclic on rings).
    pub fn translate(&self, a: &LocalOperator, x: Site) -> LocalOperator {
        self.place(a, x)
    }

    pub fn check(&self, a: &LocalOperator) -> Result<()> {
        if a.support().iter().all(|&s| self.contains(s)) {
            Ok(())
        } else {
            Err(Error::SupportOutsideWindow { support: a.support().to_vec() })
        }
    }
}
