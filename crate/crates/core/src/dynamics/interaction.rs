use crate::error::{Error, Result};
use crate::operator::LocalOperator;
use crate::pauli::Site;

use super::window::Window;

/// Nearest-neighbour interaction: a one-site term at site 0 and a two-site term on {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    one_site: LocalOperator,
    two_site: LocalOperator,
}

impl Interaction {
    pub fn new(one_site: LocalOperator, two_site: LocalOperator) -> Result<Self> {
        if one_site.support().iter().any(|&s| s != 0) || two_site.support().iter().any(|&s| s != 0 && s != 1) {
            return Err(Error::InvalidArgument("interaction templates must sit on sites {0} and {0,1}".into()));
        }
        for t in [&one_site, &two_site] {
            let residual = t.max_abs_diff(&t.adjoint());
            if residual > 1e-12 {
                return Err(Error::NotHermitian { residual });
            }
        }
        Ok(Self { one_site, two_site })
    }

    /// XXZ-type hopping `α σ⁺σ⁻ + ᾱ σ⁻σ⁺ + γ σ³σ³` plus field `β σ³`.
    pub fn hopping(alpha: num_complex::Complex64, beta: f64, gamma: f64) -> Self {
        let hop = (&LocalOperator::sigma_plus(0) * &LocalOperator::sigma_minus(1)).scale(alpha);
        let two = &(&hop + &hop.adjoint()) + &(&LocalOperator::sz(0) * &LocalOperator::sz(1)).scale_re(gamma);
        Self { one_site: LocalOperator::sz(0).scale_re(beta), two_site: two }
    }

    /// Heisenberg XYZ chain `Σ J_x σ¹σ¹ + J_y σ²σ² + J_z σ³σ³ + h σ³`.
    pub fn xyz(jx: f64, jy: f64, jz: f64, h: f64) -> Self {
        let two = (&LocalOperator::sx(0) * &LocalOperator::sx(1)).scale_re(jx)
            + (&LocalOperator::sy(0) * &LocalOperator::sy(1)).scale_re(jy)
            + (&LocalOperator::sz(0) * &LocalOperator::sz(1)).scale_re(jz);
        Self { one_site: LocalOperator::sz(0).scale_re(h), two_site: two }
    }

    pub fn one_site(&self) -> &LocalOperator {
        &self.one_site
    }

    pub fn two_site(&self) -> &LocalOperator {
        &self.two_site
    }

    /// Local terms of H on the window: one-site terms at every site, two-site terms on every bond.
    pub fn terms(&self, window: &Window) -> Vec<LocalOperator> {
        let mut out = Vec::new();
        if !self.one_site.is_zero() {
            out.extend(window.sites().into_iter().map(|x| window.place(&self.one_site, x)));
        }
        if !self.two_site.is_zero() {
            out.extend(window.bond_starts().into_iter().map(|x| window.place(&self.two_site, x)));
        }
        out
    }

    /// Energy density at `x` (one-site term plus the bond to the right).
    pub fn density(&self, x: Site) -> LocalOperator {
        &self.one_site.translate(x) + &self.two_site.translate(x)
    }
}

/// H_Λ = Σ_{X⊂Λ} Φ(X) for nearest-neighbour Φ.
pub fn hamiltonian_window(phi: &Interaction, window: &Window) -> Result<LocalOperator> {
    if window.len == 0 {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    Ok(phi.terms(window).into_iter().sum())
}

/// A translation-invariant nearest-neighbour Lindbladian: interaction plus jump templates on {0, 1}.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub interaction: Interaction,
    pub jumps: Vec<LocalOperator>,
}

impl ChainModel {
    pub fn hamiltonian(interaction: Interaction) -> Self {
        Self { interaction, jumps: Vec::new() }
    }

    pub fn generator(&self, window: Window) -> Result<super::LindbladGenerator> {
        super::LindbladGenerator::new(window, &self.interaction, &self.jumps)
    }

    /// ℒ* of the infinite chain applied to `a` (every term touching supp(A) is included).
    pub fn apply(&self, a: &LocalOperator) -> Result<LocalOperator> {
        let supp = a.support();
        let (Some(&lo), Some(&hi)) = (supp.first(), supp.last()) else {
            return Ok(LocalOperator::zero());
        };
        let window = Window::open(lo - 1, (hi - lo + 3) as usize);
        self.generator(window)?.apply(a)
    }
}
