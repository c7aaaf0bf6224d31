//! Expectation functionals: the product Gibbs state ω_μ and finite-volume thermal states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::LocalOperator;
use crate::pauli::{Pauli, PauliString, Site};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// ω_μ: the infinite-volume product state with single-site density diag(e^μ, e^{−μ})/(2cosh μ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductGibbsState {
    pub mu: f64,
}

impl ProductGibbsState {
    pub fn new(mu: f64) -> Self {
        Self { mu }
    }

    /// ω_μ(σ³) = tanh μ.
    pub fn magnetization(&self) -> f64 {
        self.mu.tanh()
    }

    /// Probability of spin up on one site.
    pub fn p_up(&self) -> f64 {
        (1.0 + self.mu.tanh()) / 2.0
    }

    fn letter(&self, p: Pauli) -> f64 {
        match p {
            Pauli::Z => self.mu.tanh(),
            _ => 0.0,
        }
    }

    fn string(&self, s: &PauliString) -> f64 {
        s.letters().iter().map(|&(_, p)| self.letter(p)).product()
    }

    pub fn expect(&self, a: &LocalOperator) -> C {
        a.terms().map(|(s, c)| c * self.string(s)).sum()
    }

    /// ω(A_1⋯A_n), factorized exactly over clusters of overlapping supports.
    pub fn expect_product(&self, ops: &[&LocalOperator]) -> C {
        if ops.is_empty() {
            return ONE;
        }
        let n = ops.len();
        // Union-find on operators by support overlap; scalars stay singleton clusters.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        for i in 0..n {
            for j in i + 1..n {
                let overlap = ops[i].support().iter().any(|s| ops[j].support().binary_search(s).is_ok());
                if overlap {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut acc = ONE;
        let mut done = vec![false; n];
        for i in 0..n {
            let root = find(&mut parent, i);
            if done[root] {
                continue;
            }
            done[root] = true;
            // Members of a cluster commute with every other cluster, so order within the cluster is preserved.
            let mut prod = LocalOperator::identity();
            for (j, op) in ops.iter().enumerate() {
                if find(&mut parent, j) == root {
                    prod = prod.multiply(op);
                }
            }
            acc *= self.expect(&prod);
        }
        acc
    }

    /// Diagonal density weights on `n` window qubits (bit value 1 = spin down).
    pub fn weights(&self, n: usize) -> Vec<f64> {
        let (up, down) = (self.p_up(), 1.0 - self.p_up());
        (0..1usize << n)
            .map(|s| {
                let k = s.count_ones() as i32;
                up.powi(n as i32 - k) * down.powi(k)
            })
            .collect()
    }
}

/// Finite-volume Gibbs state ρ ∝ exp(−βH + μM) on a window.
#[derive(Debug, Clone)]
pub struct FiniteThermalState {
    pub sites: Vec<Site>,
    pub hamiltonian: LocalOperator,
    pub beta: f64,
    pub mu: f64,
    eigvals: Vec<f64>,
    eigvecs: DMatrix<C>,
    probs: Vec<f64>,
}

impl FiniteThermalState {
    pub const DENSE_LIMIT: usize = 12;

    pub fn new(sites: Vec<Site>, hamiltonian: LocalOperator, beta: f64, mu: f64) -> Result<Self> {
        if sites.len() > Self::DENSE_LIMIT {
            return Err(Error::WindowTooLarge { sites: sites.len(), limit: Self::DENSE_LIMIT });
        }
        if !hamiltonian.is_hermitian(1e-12) {
            return Err(Error::NotHermitian { residual: hamiltonian.max_abs_diff(&hamiltonian.adjoint()) });
        }
        let m = LocalOperator::magnetization(sites.iter().copied());
        let g = &hamiltonian.scale_re(-beta) + &m.scale_re(mu);
        let eig = g.to_dense(&sites)?.symmetric_eigen();
        let eigvals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let top = eigvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = eigvals.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        let state = Self { sites, hamiltonian, beta, mu, eigvals, eigvecs: eig.eigenvectors, probs };
        let trace: f64 = state.probs.iter().sum();
        if (trace - 1.0).abs() > 1e-12 || state.probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidArgument("thermal density matrix is not a state".into()));
        }
        Ok(state)
    }

    fn in_eigenbasis(&self, a: &LocalOperator) -> Result<DMatrix<C>> {
        let d = a.to_dense(&self.sites)?;
        Ok(self.eigvecs.adjoint() * d * &self.eigvecs)
    }

    pub fn density_matrix(&self) -> DMatrix<C> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.probs.len(),
            self.probs.iter().map(|&p| C::new(p, 0.0)),
        ));
        &self.eigvecs * d * self.eigvecs.adjoint()
    }

    pub fn expect(&self, a: &LocalOperator) -> Result<C> {
        let ae = self.in_eigenbasis(a)?;
        Ok(self.probs.iter().enumerate().map(|(i, &p)| ae[(i, i)] * p).sum())
    }

    /// |ω(A τ_{iβ}B) − ω(BA)| with τ_{iβ}B = e^{G} B e^{−G}, G = −βH + μM.
    pub fn kms_residual(&self, a: &LocalOperator, b: &LocalOperator) -> Result<f64> {
        let ae = self.in_eigenbasis(a)?;
        let be = self.in_eigenbasis(b)?;
        let n = self.probs.len();
        let tb = DMatrix::from_fn(n, n, |i, j| be[(i, j)] * (self.eigvals[i] - self.eigvals[j]).exp());
        let lhs_m = &ae * tb;
        let rhs_m = &be * &ae;
        let lhs: C = (0..n).map(|i| lhs_m[(i, i)] * self.probs[i]).sum();
        let rhs: C = (0..n).map(|i| rhs_m[(i, i)] * self.probs[i]).sum();
        Ok((lhs - rhs).norm())
    }
}

/// Either kind of state behind one expectation interface.
#[derive(Debug, Clone)]
pub enum QuantumState {
    Product(ProductGibbsState),
    Thermal(Box<FiniteThermalState>),
}

/// Config descriptor for a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateDescriptor {
    ProductGibbs { mu: f64 },
    Thermal { window: Vec<Site>, beta: f64, mu: f64 },
}

impl From<ProductGibbsState> for QuantumState {
    fn from(s: ProductGibbsState) -> Self {
        QuantumState::Product(s)
    }
}

impl From<FiniteThermalState> for QuantumState {
    fn from(s: FiniteThermalState) -> Self {
        QuantumState::Thermal(Box::new(s))
    }
}

impl QuantumState {
    pub fn expect(&self, a: &LocalOperator) -> Result<C> {
        match self {
            QuantumState::Product(p) => Ok(p.expect(a)),
            QuantumState::Thermal(t) => t.expect(a),
        }
    }

    pub fn expect_product(&self, ops: &[&LocalOperator]) -> Result<C> {
        match self {
            QuantumState::Product(p) => Ok(p.expect_product(ops)),
            QuantumState::Thermal(t) => {
                let prod = ops.iter().fold(LocalOperator::identity(), |acc, o| acc.multiply(o));
                t.expect(&prod)
            }
        }
    }

    /// (A,B) = ω(A†B) − ω(A†)ω(B), conjugate-linear in `a`.
    pub fn connected(&self, a: &LocalOperator, b: &LocalOperator) -> Result<C> {
        let ad = a.adjoint();
        Ok(self.expect_product(&[&ad, b])? - self.expect(&ad)? * self.expect(b)?)
    }
}

/// Π_X(A): replaces every letter outside `x` by its single-site expectation in ω_μ.
pub fn conditional_expectation(a: &LocalOperator, x: &[Site], rho: &ProductGibbsState) -> LocalOperator {
    let inside = |s: Site| x.contains(&s);
    LocalOperator::from_terms(a.terms().map(|(s, &c)| {
        let mut coef = c;
        let mut kept = Vec::new();
        for &(site, p) in s.letters() {
            if inside(site) {
                kept.push((site, p));
            } else {
                coef *= rho.letter(p);
            }
        }
        (PauliString::from_pairs(kept).1, coef)
    }))
}

/// |⟨M, s⟩| helper: Σ_x over `sites` of (σ³_x, B) in `state`.
pub fn magnetization_overlap(state: &QuantumState, sites: impl IntoIterator<Item = Site>, b: &LocalOperator) -> Result<C> {
    let mut acc = ZERO;
    for x in sites {
        acc += state.connected(&LocalOperator::sz(x), b)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn product_state_single_site_values() {
        for mu in [0.0, 0.5, -1.3] {
            let w = ProductGibbsState::new(mu);
            assert!((w.expect(&LocalOperator::sz(0)).re - mu.tanh()).abs() < 1e-15);
            assert_eq!(w.expect(&LocalOperator::sx(4)), ZERO);
            assert_eq!(w.expect(&LocalOperator::identity()), ONE);
            let zz = &LocalOperator::sz(0) * &LocalOperator::sz(1);
            assert!((w.expect(&zz).re - mu.tanh().powi(2)).abs() < 1e-15);
        }
        assert_eq!(ProductGibbsState::new(0.0).expect(&LocalOperator::sz(0)), ZERO);
    }

    #[test]
    fn product_state_matches_dense_trace() {
        let mu = 0.7;
        let w = ProductGibbsState::new(mu);
        let a = &LocalOperator::sigma_plus(0) * &LocalOperator::sigma_minus(1) + LocalOperator::sz(0).scale(c(0.2, 0.1))
            + (&LocalOperator::sz(0) * &LocalOperator::sz(1)).scale_re(-0.4);
        let d = a.to_dense(&[0, 1]).unwrap();
        let weights = w.weights(2);
        let trace: C = (0..4).map(|i| d[(i, i)] * weights[i]).sum();
        assert!((trace - w.expect(&a)).norm() < 1e-15);
    }

    #[test]
    fn susceptibility_from_magnetization_overlap() {
        for mu in [0.0, 0.4, 1.1] {
            let st = QuantumState::Product(ProductGibbsState::new(mu));
            let chi = magnetization_overlap(&st, -5..=5, &LocalOperator::sz(0)).unwrap();
            assert!((chi.re - 1.0 / mu.cosh().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn connected_vanishes_for_disjoint_and_identity() {
        let st = QuantumState::Product(ProductGibbsState::new(0.3));
        let a = LocalOperator::sz(0) + LocalOperator::sx(1).scale(c(0.0, 0.3));
        let b = &LocalOperator::sz(3) * &LocalOperator::sz(4) + LocalOperator::sz(3).scale_re(0.77);
        assert_eq!(st.connected(&a, &b).unwrap(), ZERO);
        assert_eq!(st.connected(&a, &LocalOperator::identity()).unwrap(), ZERO);
    }

    #[test]
    fn conditional_expectation_examples() {
        let w0 = ProductGibbsState::new(0.0);
        let zz = &LocalOperator::sz(0) * &LocalOperator::sz(1);
        assert!(conditional_expectation(&zz, &[0], &w0).is_zero());
        let w = ProductGibbsState::new(0.6);
        let pi = conditional_expectation(&zz, &[0], &w);
        assert!(pi.max_abs_diff(&LocalOperator::sz(0).scale_re(0.6f64.tanh())) < 1e-15);
        assert_eq!(conditional_expectation(&zz, &[0, 1, 7], &w), zz);
        let all = conditional_expectation(&zz, &[], &w);
        assert!(all.max_abs_diff(&LocalOperator::scalar(w.expect(&zz))) < 1e-15);
    }

    #[test]
    fn kms_for_two_site_xx() {
        let h = &LocalOperator::sigma_plus(0) * &LocalOperator::sigma_minus(1);
        let h = &h + &h.adjoint();
        let st = FiniteThermalState::new(vec![0, 1], h, 0.8, 0.3).unwrap();
        let a = LocalOperator::sx(0) + (&LocalOperator::sy(0) * &LocalOperator::sz(1)).scale(c(0.1, 0.5));
        let b = LocalOperator::sigma_plus(1) + LocalOperator::sz(0).scale_re(0.3);
        assert!(st.kms_residual(&a, &b).unwrap() <= 1e-10);
        assert!(st.kms_residual(&a, &LocalOperator::identity()).unwrap() <= 1e-14);
        let inf = FiniteThermalState::new(vec![0, 1], LocalOperator::zero(), 0.0, 0.0).unwrap();
        assert!(inf.kms_residual(&a, &b).unwrap() <= 1e-14);
        assert!(matches!(st.expect(&LocalOperator::sz(5)), Err(Error::SupportOutsideWindow { .. })));
    }

    #[test]
    fn thermal_state_with_zero_beta_matches_product_state() {
        let h = &LocalOperator::sz(0) * &LocalOperator::sz(1);
        let st = FiniteThermalState::new(vec![0, 1, 2], h, 0.0, 0.45).unwrap();
        let pw = ProductGibbsState::new(0.45);
        let a = &LocalOperator::sz(0) * &LocalOperator::sz(2) + LocalOperator::sz(1);
        assert!((st.expect(&a).unwrap() - pw.expect(&a)).norm() < 1e-13);
        let rho = st.density_matrix();
        let tr: C = (0..8).map(|i| rho[(i, i)]).sum();
        assert!((tr - ONE).norm() < 1e-13);
    }

    #[test]
    fn descriptor_json_form() {
        let d: StateDescriptor = serde_json::from_str(r#"{"kind":"product_gibbs","mu":0.5}"#).unwrap();
        assert_eq!(d, StateDescriptor::ProductGibbs { mu: 0.5 });
        let d: StateDescriptor = serde_json::from_str(r#"{"kind":"thermal","window":[0,1],"beta":1.0,"mu":0.0}"#).unwrap();
        assert!(matches!(d, StateDescriptor::Thermal { .. }));
    }
}
