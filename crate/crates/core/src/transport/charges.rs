use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::ChainModel;
use crate::error::{Error, Result};
use crate::operator::LocalOperator;
use crate::pauli::{Pauli, PauliString, Site};
use crate::states::{ProductGibbsState, QuantumState};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Relative eigenvalue cutoff for Gram pseudo-inverses and orthonormalization.
pub const GRAM_CUTOFF: f64 = 1e-10;
/// Relative invariance residual a discovered charge must meet.
pub const CHARGE_TOL: f64 = 1e-8;

/// Σ_x e^{ikx} ι_x(density), truncated to |x| ≤ radius in inner products.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensiveVector {
    pub density: LocalOperator,
    pub k: f64,
    pub radius: usize,
}

impl ExtensiveVector {
    /// The radius defaults to the support span, which is exact for product states.
    pub fn new(density: LocalOperator, k: f64) -> Self {
        let radius = span(&density);
        Self { density, k, radius }
    }

    pub fn with_radius(mut self, radius: usize) -> Self {
        self.radius = radius;
        self
    }
}

fn span(a: &LocalOperator) -> usize {
    match (a.support().first(), a.support().last()) {
        (Some(lo), Some(hi)) => (hi - lo) as usize,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InnerValue {
    pub value: C,
    /// Largest |term| on the outermost shell |x| = R.
    pub tail: f64,
}

/// Largest |x| at which supp a and supp ι_x b can overlap.
fn reach(a: &LocalOperator, b: &LocalOperator) -> usize {
    match (a.support().first(), a.support().last(), b.support().first(), b.support().last()) {
        (Some(la), Some(ha), Some(lb), Some(hb)) => (la - hb).abs().max((ha - lb).abs()) as usize,
        _ => 0,
    }
}

/// ⟨A,B⟩_k = Σ_{|x|≤R} e^{ikx}(a, ι_x b), with R the larger of the two radii and never short of
/// the shifts at which the supports overlap.
pub fn extensive_inner(a: &ExtensiveVector, b: &ExtensiveVector, state: &QuantumState) -> Result<InnerValue> {
    if a.k != b.k {
        return Err(Error::WavenumberMismatch(a.k, b.k));
    }
    let r = a.radius.max(b.radius).max(reach(&a.density, &b.density)) as Site;
    let mut value = ZERO;
    let mut tail: f64 = 0.0;
    for x in -r..=r {
        let term = C::from_polar(1.0, a.k * x as f64) * state.connected(&a.density, &b.density.translate(x))?;
        value += term;
        if x.abs() == r {
            tail = tail.max(term.norm());
        }
    }
    Ok(InnerValue { value, tail })
}

/// Rewrites Σ_x e^{ikx} ι_x(op) with every Pauli string translated to start at site 0.
pub fn fold(op: &LocalOperator, k: f64) -> LocalOperator {
    LocalOperator::from_terms(op.terms().map(|(p, &c)| {
        let m = p.sites().next().unwrap_or(0);
        (p.translate(-m), c * C::from_polar(1.0, -k * m as f64))
    }))
}

/// Pauli strings with lowest site 0 and support inside [0, radius−1].
fn canonical_strings(radius: usize) -> Vec<PauliString> {
    let mut out = Vec::new();
    let rest = radius.saturating_sub(1);
    for first in Pauli::ALL {
        let mut partial = vec![vec![(0 as Site, first)]];
        for s in 1..=rest as Site {
            let mut next = Vec::with_capacity(partial.len() * 4);
            for p in &partial {
                next.push(p.clone());
                for l in Pauli::ALL {
                    let mut q = p.clone();
                    q.push((s, l));
                    next.push(q);
                }
            }
            partial = next;
        }
        out.extend(partial.into_iter().map(|p| PauliString::from_pairs(p).1));
    }
    out
}

/// Densities q with ℒ*Q = −ifQ for Q = Σ e^{ikx} ι_x q, orthonormal in ⟨·,·⟩_k.
#[derive(Debug, Clone, Serialize)]
pub struct ChargeBasis {
    pub densities: Vec<LocalOperator>,
    pub gram: DMatrix<C>,
    pub f: f64,
    pub k: f64,
    pub radius: usize,
    pub mu: f64,
    /// ‖fold(ℒ*q) + ifq‖ / ‖q‖ per density, in the Hilbert-Schmidt norm.
    pub residuals: Vec<f64>,
}

impl ChargeBasis {
    /// A basis from explicit densities, kept as given; the Gram matrix is evaluated in ω_μ.
    pub fn new(densities: Vec<LocalOperator>, k: f64, f: f64, mu: f64) -> Result<Self> {
        let radius = densities.iter().map(span).max().unwrap_or(0) + 1;
        let gram = gram_matrix(&densities, k, &ProductGibbsState::new(mu).into())?;
        Ok(Self { densities, gram, f, k, radius, mu, residuals: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn vectors(&self) -> Vec<ExtensiveVector> {
        self.densities.iter().map(|q| ExtensiveVector::new(q.clone(), self.k)).collect()
    }

    pub fn min_gram_eigenvalue(&self) -> f64 {
        if self.gram.is_empty() {
            return 0.0;
        }
        SymmetricEigen::new(self.gram.clone()).eigenvalues.min()
    }

    /// max |G − G†| entrywise.
    pub fn gram_asymmetry(&self) -> f64 {
        (&self.gram - self.gram.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn gram_matrix(densities: &[LocalOperator], k: f64, state: &QuantumState) -> Result<DMatrix<C>> {
    let vs: Vec<ExtensiveVector> = densities.iter().map(|q| ExtensiveVector::new(q.clone(), k)).collect();
    let n = vs.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = extensive_inner(&vs[i], &vs[j], state)?.value;
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    Ok(g)
}

fn invariance_residual(model: &ChainModel, q: &LocalOperator, f: f64, k: f64) -> Result<f64> {
    let lhs = fold(&model.apply(q)?, k) + q.scale(C::new(0.0, f));
    Ok(lhs.hs_norm() / q.hs_norm().max(f64::MIN_POSITIVE))
}

/// Null space of q ↦ fold(ℒ*q) + ifq over densities supported on `radius` consecutive sites,
/// orthonormalized in the ⟨·,·⟩_k metric of ω_μ.
pub fn find_conserved_charges(model: &ChainModel, f: f64, k: f64, radius: usize, mu: f64) -> Result<ChargeBasis> {
    if radius == 0 {
        return Err(Error::InvalidArgument("charge densities need radius ≥ 1".into()));
    }
    let strings = canonical_strings(radius);
    let mut rows: HashMap<PauliString, usize> = HashMap::new();
    let mut cols: Vec<Vec<(usize, C)>> = Vec::with_capacity(strings.len());
    for p in &strings {
        let q = LocalOperator::from_string(p.clone(), C::new(1.0, 0.0));
        let image = fold(&model.apply(&q)?, k) + q.scale(C::new(0.0, f));
        let mut col = Vec::new();
        for (s, &c) in image.terms() {
            let next = rows.len();
            col.push((*rows.entry(s.clone()).or_insert(next), c));
        }
        cols.push(col);
    }
    let n = strings.len();
    let mut m = DMatrix::<C>::zeros(rows.len().max(1), n);
    for (j, col) in cols.iter().enumerate() {
        for &(i, c) in col {
            m[(i, j)] += c;
        }
    }
    let normal = m.adjoint() * &m;
    let eig = SymmetricEigen::new(normal);
    let scale = eig.eigenvalues.max().max(1.0);
    let null: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-12 * scale).collect();
    let raw: Vec<LocalOperator> = null
        .iter()
        .map(|&i| {
            LocalOperator::from_terms(strings.iter().zip(eig.eigenvectors.column(i).iter()).map(|(p, &c)| (p.clone(), c)))
                .prune(1e-13)
        })
        .collect();
    let state: QuantumState = ProductGibbsState::new(mu).into();
    let g = gram_matrix(&raw, k, &state)?;
    let mut densities = Vec::new();
    if !raw.is_empty() {
        let ge = SymmetricEigen::new(g);
        let lmax = ge.eigenvalues.max();
        for (j, &lambda) in ge.eigenvalues.iter().enumerate() {
            if lambda > GRAM_CUTOFF * lmax && lambda > 0.0 {
                let w = 1.0 / lambda.sqrt();
                let q: LocalOperator = raw
                    .iter()
                    .zip(ge.eigenvectors.column(j).iter())
                    .map(|(r, &c)| r.scale(c * w))
                    .sum::<LocalOperator>()
                    .prune(1e-13);
                densities.push(q);
            }
        }
    }
    if densities.is_empty() {
        return Err(Error::NoChargesFound);
    }
    let residuals = densities.iter().map(|q| invariance_residual(model, q, f, k)).collect::<Result<Vec<_>>>()?;
    if let Some(worst) = residuals.iter().copied().find(|&r| r > CHARGE_TOL) {
        return Err(Error::InvalidArgument(format!("charge residual {worst:e} above {CHARGE_TOL:e}")));
    }
    let gram = gram_matrix(&densities, k, &state)?;
    Ok(ChargeBasis { densities, gram, f, k, radius, mu, residuals })
}

#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    /// c solving G c = (⟨q_j, a⟩)_j through the pseudo-inverse.
    pub coefficients: Vec<C>,
    pub rank: usize,
    pub dim: usize,
    pub projected: ExtensiveVector,
    /// max_j |⟨q_j, a − ℙa⟩|.
    pub orthogonality_residual: f64,
}

impl Projection {
    pub fn require_full_rank(&self) -> Result<()> {
        if self.rank < self.dim {
            Err(Error::DegenerateGram { rank: self.rank, dim: self.dim })
        } else {
            Ok(())
        }
    }
}

/// Orthogonal projection of `a` onto the span of the basis charges.
pub fn project_onto_charges(a: &ExtensiveVector, basis: &ChargeBasis, state: &QuantumState) -> Result<Projection> {
    if a.k != basis.k {
        return Err(Error::WavenumberMismatch(a.k, basis.k));
    }
    let qs = basis.vectors();
    let dim = qs.len();
    let overlaps = qs.iter().map(|q| extensive_inner(q, a, state).map(|v| v.value)).collect::<Result<Vec<_>>>()?;
    let (coefficients, rank) = if dim == 0 {
        (Vec::new(), 0)
    } else {
        let eig = SymmetricEigen::new(basis.gram.clone());
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let b = DVector::from_vec(overlaps.clone());
        let mut c = DVector::<C>::zeros(dim);
        let mut rank = 0;
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > GRAM_CUTOFF * lmax && lambda > 0.0 {
                rank += 1;
                let u = eig.eigenvectors.column(j);
                c += u * (u.dotc(&b) / lambda);
            }
        }
        (c.iter().copied().collect(), rank)
    };
    let density: LocalOperator =
        basis.densities.iter().zip(&coefficients).map(|(q, &c)| q.scale(c)).sum::<LocalOperator>().prune(1e-15);
    let projected = ExtensiveVector::new(density, a.k).with_radius(a.radius.max(basis.radius));
    let orthogonality_residual = (0..dim)
        .map(|j| {
            let g: C = (0..dim).map(|i| basis.gram[(j, i)] * coefficients[i]).sum();
            (overlaps[j] - g).norm()
        })
        .fold(0.0, f64::max);
    Ok(Projection { coefficients, rank, dim, projected, orthogonality_residual })
}
