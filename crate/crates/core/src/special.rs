//! Special functions and quadrature rules.

use std::f64::consts::{E, PI};

/// ζ(2) = π²/6.
pub const ZETA2: f64 = PI * PI / 6.0;

/// The constant 4eζ(2) multiplying the interaction strength in the Lieb-Robinson velocity.
pub fn lr_prefactor() -> f64 {
    4.0 * E * ZETA2
}

/// Bessel values `J_0(z), …, J_kmax(z)` for real `z`, by Miller's backward recurrence
/// normalized with `J_0 + 2Σ J_{2k} = 1`.
pub fn bessel_j_sequence(z: f64, kmax: usize) -> Vec<f64> {
    if z == 0.0 {
        let mut v = vec![0.0; kmax + 1];
        v[0] = 1.0;
        return v;
    }
    let sign = z.signum();
    let z = z.abs();
    let start = (kmax.max(z as usize) + 30 + (z.sqrt() * 10.0) as usize) | 1;
    let start = start + 1;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / z * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    let mut out: Vec<f64> = vals[..=kmax].iter().map(|v| v / norm).collect();
    if sign < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((mid - half * x, half * w));
    }
    out.reverse();
    out
}
