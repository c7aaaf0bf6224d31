//! Complex dense kernels: GEMM, spectral norms, Lanczos, matrix exponential, Pauli transform.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// `c ← alpha·a·b + beta·c` for column-major matrices.
pub fn gemm(alpha: C, a: &DMatrix<C>, b: &DMatrix<C>, beta: C, c: &mut DMatrix<C>) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!(c.shape(), (m, n), "output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        *c *= beta;
        return;
    }
    // Complex64 is repr(C) {re, im}, layout-identical to [f64; 2].
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
}

pub fn matmul(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    let mut c = DMatrix::zeros(a.nrows(), b.ncols());
    gemm(ONE, a, b, ZERO, &mut c);
    c
}

pub fn frobenius(m: &DMatrix<C>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn norm1(m: &DMatrix<C>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Max |m - m†| entry relative to max |m| entry; 0 for Hermitian input.
fn hermiticity_defect(m: &DMatrix<C>, anti: bool) -> f64 {
    let n = m.nrows();
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for c in 0..n {
        for r in 0..=c {
            let a = m[(r, c)];
            let b = if anti { -m[(c, r)].conj() } else { m[(c, r)].conj() };
            defect = defect.max((a - b).norm());
            scale = scale.max(a.norm());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        defect / scale
    }
}

fn start_vector(dim: usize) -> Vec<C> {
    let mut v: Vec<C> = (0..dim)
        .map(|i| {
            let x = i as f64;
            C::new((0.7 * x * x + 0.3 * x + 0.1).cos() + 1.5, (1.1 * x + 0.2).sin())
        })
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= n);
    v
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn nrm(a: &[C]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Extreme eigenvalues `(min, max)` of a Hermitian operator given as a matvec, by Lanczos with
/// full reorthogonalization.
pub fn lanczos_extremes(dim: usize, matvec: impl Fn(&[C], &mut [C])) -> (f64, f64) {
    if dim == 0 {
        return (0.0, 0.0);
    }
    let max_iter = dim.min(300);
    let mut basis: Vec<Vec<C>> = Vec::with_capacity(max_iter);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut v = start_vector(dim);
    let mut w = vec![ZERO; dim];
    let mut last = (f64::NAN, f64::NAN);
    for it in 0..max_iter {
        matvec(&v, &mut w);
        let a = dot(&v, &w).re;
        alphas.push(a);
        basis.push(v.clone());
        // Two passes of Gram-Schmidt keep the Krylov basis orthogonal to working precision.
        for _ in 0..2 {
            for q in &basis {
                let h = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= h * y);
            }
        }
        let b = nrm(&w);
        let m = alphas.len();
        let done = b <= 1e-13 * (a.abs() + betas.last().copied().unwrap_or(0.0) + 1e-300) || it + 1 == max_iter;
        if done || m % 4 == 0 {
            let t = tridiag(&alphas, &betas);
            let eig = SymmetricEigen::new(t);
            let (imin, imax) = argminmax(eig.eigenvalues.as_slice());
            let cur = (eig.eigenvalues[imin], eig.eigenvalues[imax]);
            let scale = cur.0.abs().max(cur.1.abs()).max(1e-300);
            let rmin = (b * eig.eigenvectors[(m - 1, imin)]).abs();
            let rmax = (b * eig.eigenvectors[(m - 1, imax)]).abs();
            let settled = (cur.0 - last.0).abs() <= 1e-15 * scale && (cur.1 - last.1).abs() <= 1e-15 * scale;
            if done || (rmin <= 1e-11 * scale && rmax <= 1e-11 * scale) || settled {
                return cur;
            }
            last = cur;
        }
        betas.push(b);
        v.iter_mut().zip(&w).for_each(|(x, y)| *x = y / b);
    }
    last
}

fn tridiag(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t
}

fn argminmax(v: &[f64]) -> (usize, usize) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[imin] {
            imin = i;
        }
        if x > v[imax] {
            imax = i;
        }
    }
    (imin, imax)
}

fn dense_matvec(m: &DMatrix<C>, x: &[C], y: &mut [C]) {
    let xv = DVector::from_column_slice(x);
    let r = m * xv;
    y.copy_from_slice(r.as_slice());
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<C>) -> f64 {
    let n = m.nrows();
    if n == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if n != m.ncols() || n <= 96 {
        return m.clone().singular_values().max();
    }
    if hermiticity_defect(m, false) <= 1e-14 {
        let (lo, hi) = lanczos_extremes(n, |x, y| dense_matvec(m, x, y));
        return lo.abs().max(hi.abs());
    }
    if hermiticity_defect(m, true) <= 1e-14 {
        let (lo, hi) = lanczos_extremes(n, |x, y| {
            dense_matvec(m, x, y);
            y.iter_mut().for_each(|z| *z *= C::new(0.0, 1.0));
        });
        return lo.abs().max(hi.abs());
    }
    let mh = m.adjoint();
    let tmp = std::cell::RefCell::new(vec![ZERO; n]);
    let (_, hi) = lanczos_extremes(n, |x, y| {
        let mut t = tmp.borrow_mut();
        dense_matvec(m, x, &mut t);
        dense_matvec(&mh, &t, y);
    });
    hi.max(0.0).sqrt()
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &DMatrix<C>) -> DMatrix<C> {
    let n = a.nrows();
    let nrm = norm1(a);
    let s = if nrm > 0.5 { (nrm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / C::new(2f64.powi(s), 0.0);
    let mut sum = DMatrix::<C>::identity(n, n);
    let mut term = DMatrix::<C>::identity(n, n);
    let mut next = DMatrix::<C>::zeros(n, n);
    for k in 1..40 {
        gemm(C::new(1.0 / k as f64, 0.0), &term, &scaled, ZERO, &mut next);
        std::mem::swap(&mut term, &mut next);
        sum += &term;
        if norm1(&term) <= 1e-18 * norm1(&sum) {
            break;
        }
    }
    for _ in 0..s {
        gemm(ONE, &sum, &sum, ZERO, &mut next);
        std::mem::swap(&mut sum, &mut next);
    }
    sum
}

/// Pauli coefficients `tr(P m)/2^n` of a `2^n × 2^n` matrix above `tol`, as
/// `(flip_mask, sign_mask, coefficient)`; bit `k` of the masks refers to qubit `k`.
///
/// A string with flip mask `f` and sign mask `s` carries X on `f & !s`, Y on `f & s`, Z on `s & !f`.
pub fn pauli_decompose(m: &DMatrix<C>, tol: f64) -> Vec<(usize, usize, C)> {
    let dim = m.nrows();
    assert!(dim.is_power_of_two() && m.ncols() == dim, "not a qubit operator");
    let scale = 1.0 / dim as f64;
    let mut out = Vec::new();
    let mut v = vec![ZERO; dim];
    for f in 0..dim {
        for (r, slot) in v.iter_mut().enumerate() {
            *slot = m[(r, r ^ f)];
        }
        walsh_hadamard(&mut v);
        for (s, &w) in v.iter().enumerate() {
            let ny = (f & s).count_ones() as u8;
            let c = crate::pauli::i_pow(ny) * w * scale;
            if c.norm() > tol {
                out.push((f, s, c));
            }
        }
    }
    out
}

/// Unnormalized in-place transform `v[s] ← Σ_r (−1)^{popcount(r&s)} v[r]`.
pub fn walsh_hadamard(v: &mut [C]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, seed: u64) -> DMatrix<C> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        DMatrix::from_fn(n, n, |_, _| C::new(next(), next()))
    }

    #[test]
    fn gemm_matches_naive_product() {
        let a = random_matrix(17, 1);
        let b = random_matrix(17, 2);
        let diff = matmul(&a, &b) - &a * &b;
        assert!(frobenius(&diff) < 1e-12);
    }

    #[test]
    fn lanczos_norm_matches_svd() {
        let a = random_matrix(150, 3);
        let h = &a + a.adjoint();
        let svd = h.clone().singular_values().max();
        assert!((spectral_norm(&h) - svd).abs() < 1e-9 * svd);
        let anti = &a - a.adjoint();
        let svd = anti.clone().singular_values().max();
        assert!((spectral_norm(&anti) - svd).abs() < 1e-9 * svd);
        let svd = a.clone().singular_values().max();
        assert!((spectral_norm(&a) - svd).abs() < 1e-9 * svd);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let mut g = DMatrix::<C>::zeros(2, 2);
        g[(0, 1)] = C::new(-3.0, 0.0);
        g[(1, 0)] = C::new(3.0, 0.0);
        let e = expm(&g);
        assert!((e[(0, 0)].re - 3f64.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - 3f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn expm_group_law() {
        let a = random_matrix(8, 4) * C::new(2.0, 0.0);
        let e1 = expm(&a);
        let e2 = expm(&(&a * C::new(2.0, 0.0)));
        assert!(frobenius(&(matmul(&e1, &e1) - e2)) < 1e-10 * frobenius(&e1).powi(2));
    }

    #[test]
    fn walsh_hadamard_is_involutive_up_to_scale() {
        let mut v: Vec<C> = (0..16).map(|i| C::new(i as f64, -(i as f64) * 0.5)).collect();
        let orig = v.clone();
        walsh_hadamard(&mut v);
        walsh_hadamard(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a / 16.0 - b).norm() < 1e-13);
        }
    }
}
