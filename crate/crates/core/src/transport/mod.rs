//! Ray averages, extensive inner products, conserved charges, Drude and Euler-scale
//! correlators, and Green-Kubo diffusion estimates.

mod charges;
mod hydro;
mod onsager;
mod ray;

use num_complex::Complex64;

use crate::dense::BlockOp;
use crate::states::ProductGibbsState;

pub use charges::{
    extensive_inner, find_conserved_charges, fold, project_onto_charges, ChargeBasis, ExtensiveVector, InnerValue,
    Projection,
};
pub use hydro::{drude_weight, euler_correlator, CorrelatorPlan, CorrelatorSeries, EulerReport};
pub use onsager::{diffusion_strengths, onsager_estimate, DiffusionRow, OnsagerPlan, OnsagerReport, OnsagerRow};
pub use ray::{ray_average, ray_moment, RayPlan, RaySeries};

type C = Complex64;

/// ω_μ restricted to a window: diagonal weights over basis states.
#[derive(Debug, Clone)]
pub struct WindowState {
    pub weights: Vec<f64>,
}

impl WindowState {
    pub fn gibbs(state: &ProductGibbsState, n_sites: usize) -> Self {
        Self { weights: state.weights(n_sites) }
    }

    pub fn expect(&self, o: &BlockOp) -> C {
        o.weighted_trace(&self.weights)
    }

    /// ω(AB), linear in both arguments.
    pub fn expect_product(&self, a: &BlockOp, b: &BlockOp) -> C {
        a.weighted_trace_product(b, &self.weights)
    }

    /// (A, B) = ω(A†B) − ω(A)*ω(B), antilinear in A.
    pub fn inner(&self, a: &BlockOp, b: &BlockOp) -> C {
        self.expect_product(&a.adjoint(), b) - self.expect(a).conj() * self.expect(b)
    }
}

/// Running Cesàro means (1/T_j)∫₀^{T_j} g by the trapezoid rule on uniform samples.
/// The first entry is g(0) itself.
pub(crate) fn running_mean(dt: f64, g: &[C]) -> Vec<C> {
    let mut out = Vec::with_capacity(g.len());
    let mut integral = C::new(0.0, 0.0);
    for (j, &v) in g.iter().enumerate() {
        if j == 0 {
            out.push(v);
            continue;
        }
        integral += (g[j - 1] + v) * (dt / 2.0);
        out.push(integral / (j as f64 * dt));
    }
    out
}

pub(crate) fn uniform_samples(t_max: f64, dt: f64) -> crate::Result<Vec<f64>> {
    if !(t_max > 0.0 && dt > 0.0) || !t_max.is_finite() {
        return Err(crate::Error::InvalidArgument(format!("need T_max > 0 and dt > 0, got {t_max} and {dt}")));
    }
    let steps = (t_max / dt).round() as usize;
    Ok((0..=steps).map(|j| j as f64 * dt).collect())
}

/// Minimal-image displacement on a ring of `n` sites: [−n/2, n/2) for even n, [−(n−1)/2, (n−1)/2] for odd.
pub(crate) fn minimal_image(x: i64, n: usize) -> i64 {
    let n = n as i64;
    let r = x.rem_euclid(n);
    if r >= n - n / 2 {
        r - n
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_mean_of_linear_function_is_exact() {
        let g: Vec<C> = (0..=10).map(|j| C::new(0.1 * j as f64, 0.0)).collect();
        let m = running_mean(0.1, &g);
        for (j, v) in m.iter().enumerate().skip(1) {
            assert!((v.re - 0.05 * j as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn minimal_images() {
        let got: Vec<i64> = (0..8).map(|x| minimal_image(x, 8)).collect();
        assert_eq!(got, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        let got: Vec<i64> = (0..5).map(|x| minimal_image(x, 5)).collect();
        assert_eq!(got, vec![0, 1, 2, -2, -1]);
    }
}
