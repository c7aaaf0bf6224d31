//! Commutator norms over space-time grids and light-cone fits.

use serde::Serialize;

use crate::dense::BlockOp;
use crate::dynamics::DenseEvolver;
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LineFit};
use crate::open_chain::LindbladModel;
use crate::operator::LocalOperator;
use crate::pauli::Site;

/// Norms at or below this are treated as exact zeros in fits.
pub const NORM_FLOOR: f64 = 1e-14;

/// `values[i][j] = ‖[τ_{t_j}(A), ι_{x_i}(B)]‖`, which by translation invariance of the
/// infinite chain equals ‖[τ_t(ι_{−x}A), B]‖.
#[derive(Debug, Clone, Serialize)]
pub struct LightConeGrid {
    pub displacements: Vec<Site>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// max over cells of ‖[τ_{−t}(A), ι_x B]‖ − ‖[τ_t(A), ι_x B]‖, for Hamiltonian dynamics only.
    pub reversal_asymmetry: Option<f64>,
    /// ‖A‖‖B‖, the natural scale of every value.
    pub scale: f64,
}

impl LightConeGrid {
    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Column of values at time index `j`.
    pub fn at_time(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    /// Largest relative disagreement with another grid over shared cells above `floor`.
    pub fn max_relative_difference(&self, other: &LightConeGrid, floor: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, x) in self.displacements.iter().enumerate() {
            let Some(k) = other.displacements.iter().position(|y| y == x) else { continue };
            for (j, t) in self.times.iter().enumerate() {
                let Some(l) = other.times.iter().position(|s| s == t) else { continue };
                let (a, b) = (self.values[i][j], other.values[k][l]);
                if a.max(b) > floor {
                    worst = worst.max((a - b).abs() / a.max(b));
                }
            }
        }
        worst
    }
}

fn commutator_norm(a: &BlockOp, b: &BlockOp) -> f64 {
    a.commutator(b).spectral_norm()
}

/// Evolves A once along `times` and measures the commutator with each translate of B.
/// With `check_reversal`, Hamiltonian dynamics are also run backwards and compared.
pub fn commutator_norm_grid(
    a: &LocalOperator,
    b: &LocalOperator,
    displacements: &[Site],
    times: &[f64],
    evolver: &DenseEvolver,
    check_reversal: bool,
) -> Result<LightConeGrid> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("times must be nonnegative and ascending".into()));
    }
    let bs = displacements.iter().map(|&x| evolver.embed(&b.translate(x))).collect::<Result<Vec<_>>>()?;
    let a0 = evolver.embed(a)?;
    let mut values = vec![vec![0.0; times.len()]; displacements.len()];
    evolver.trajectory(&a0, times, |j, at| {
        for (i, bx) in bs.iter().enumerate() {
            values[i][j] = commutator_norm(at, bx);
        }
    })?;
    let reversal_asymmetry = if check_reversal && evolver.is_hamiltonian() {
        let mut worst: f64 = 0.0;
        for (j, &t) in times.iter().enumerate() {
            let back = evolver.evolve_unitary(&a0, -t)?;
            for (i, bx) in bs.iter().enumerate() {
                worst = worst.max((commutator_norm(&back, bx) - values[i][j]).abs());
            }
        }
        Some(worst)
    } else {
        None
    };
    let scale = a.operator_norm()? * b.operator_norm()?;
    Ok(LightConeGrid { displacements: displacements.to_vec(), times: times.to_vec(), values, reversal_asymmetry, scale })
}

#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    pub t: f64,
    /// Log-linear interpolated displacement where the norm falls through the threshold.
    pub x: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    pub t: f64,
    pub fit: LineFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct LRVelocityEstimate {
    pub v_fit: f64,
    pub lambda_fit: f64,
    pub threshold: f64,
    pub crossings: Vec<Crossing>,
    pub velocity_fit: LineFit,
    /// ln‖[A(t), B(x)]‖ against x beyond the crossing, one fit per time.
    pub tails: Vec<TailFit>,
}

/// Fits x*(t) through threshold crossings and the exponential tail beyond them.
/// The grid's displacements must be ascending.
pub fn fit_light_cone(grid: &LightConeGrid, threshold: f64) -> Result<LRVelocityEstimate> {
    if grid.times.len() < 3 || grid.displacements.len() < 4 {
        return Err(Error::FitDegenerate(format!(
            "need at least 3 times and 4 displacements, got {} and {}",
            grid.times.len(),
            grid.displacements.len()
        )));
    }
    if grid.displacements.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("displacements must be strictly ascending".into()));
    }
    let max = grid.max_value();
    if !(threshold > 0.0 && threshold < max) {
        return Err(Error::FitDegenerate(format!("threshold {threshold:e} outside (0, {max:e})")));
    }
    let xs: Vec<f64> = grid.displacements.iter().map(|&x| x as f64).collect();
    let mut crossings = Vec::new();
    let mut tails = Vec::new();
    for (j, &t) in grid.times.iter().enumerate() {
        let col = grid.at_time(j);
        let clamp = |v: f64| if v <= NORM_FLOOR { 0.0 } else { v };
        let Some(last) = col.iter().rposition(|&v| clamp(v) >= threshold) else { continue };
        if last + 1 < col.len() {
            let (v0, v1) = (col[last], clamp(col[last + 1]));
            let x = if v1 > 0.0 {
                xs[last] + (v0.ln() - threshold.ln()) / (v0.ln() - v1.ln()) * (xs[last + 1] - xs[last])
            } else {
                xs[last]
            };
            crossings.push(Crossing { t, x });
        }
        let (tx, ty): (Vec<f64>, Vec<f64>) =
            (last + 1..col.len()).filter(|&i| clamp(col[i]) > 0.0).map(|i| (xs[i], col[i].ln())).unzip();
        if let Some(fit) = linear_fit(&tx, &ty) {
            tails.push(TailFit { t, fit });
        }
    }
    if crossings.len() < 2 {
        return Err(Error::FitDegenerate(format!("{} threshold crossings", crossings.len())));
    }
    let ct: Vec<f64> = crossings.iter().map(|c| c.t).collect();
    let cx: Vec<f64> = crossings.iter().map(|c| c.x).collect();
    let velocity_fit =
        linear_fit(&ct, &cx).ok_or_else(|| Error::FitDegenerate("crossings share a single time".into()))?;
    if tails.is_empty() {
        return Err(Error::FitDegenerate("no resolvable tail beyond the cone".into()));
    }
    let lambda_fit = -tails.iter().map(|f| f.fit.slope).sum::<f64>() / tails.len() as f64;
    Ok(LRVelocityEstimate { v_fit: velocity_fit.slope, lambda_fit, threshold, crossings, velocity_fit, tails })
}

/// 4eζ(2)Ṽ for the open-chain model family.
pub fn theoretical_velocity(model: &LindbladModel) -> f64 {
    model.lr_velocity()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{EvolverConfig, Interaction, LindbladGenerator, Window};
    use crate::open_chain::Jump;
    use num_complex::Complex64;

    fn synthetic(v: f64, lambda: f64) -> LightConeGrid {
        let displacements: Vec<Site> = (0..20).collect();
        let times = vec![1.0, 2.0, 3.0, 4.0];
        let values = displacements
            .iter()
            .map(|&x| times.iter().map(|&t| (-lambda * (x as f64 - v * t)).exp().min(1.0)).collect())
            .collect();
        LightConeGrid { displacements, times, values, reversal_asymmetry: None, scale: 1.0 }
    }

    #[test]
    fn synthetic_cone_recovered() {
        for (v, lambda) in [(2.0, 1.0), (1.3, 0.7)] {
            let est = fit_light_cone(&synthetic(v, lambda), 1e-3).unwrap();
            assert!((est.v_fit - v).abs() < 0.05 * v, "{}", est.v_fit);
            assert!((est.lambda_fit - lambda).abs() < 0.05 * lambda, "{}", est.lambda_fit);
        }
    }

    #[test]
    fn empty_grid_is_degenerate() {
        let mut g = synthetic(1.0, 1.0);
        g.values.iter_mut().flatten().for_each(|v| *v = 0.0);
        assert!(matches!(fit_light_cone(&g, 1e-3), Err(Error::FitDegenerate(_))));
    }

    #[test]
    fn theoretical_velocity_values() {
        let xx = LindbladModel::new(Complex64::new(1.0, 0.0), 0.0, 0.0, vec![]);
        assert!((theoretical_velocity(&xx) - 4.0 * crate::special::lr_prefactor()).abs() < 1e-12);
        let zero = LindbladModel::new(Complex64::new(0.0, 0.0), 0.0, 0.0, vec![Jump::real(0.0, 0.0, 0.0, 0.0, 0.0)]);
        assert_eq!(theoretical_velocity(&zero), 0.0);
    }

    #[test]
    fn xx_grid_basics() {
        let w = Window::open(0, 8);
        let gen = LindbladGenerator::hamiltonian_only(w, &Interaction::hopping(Complex64::new(1.0, 0.0), 0.0, 0.0));
        let ev = DenseEvolver::new(&gen, EvolverConfig::new(w)).unwrap();
        let s = LocalOperator::sz(0);
        let grid = commutator_norm_grid(&s, &s, &(0..8).collect::<Vec<_>>(), &[0.0, 0.3, 0.6], &ev, true).unwrap();
        assert!(grid.values.iter().all(|row| row[0] == 0.0));
        assert!(grid.reversal_asymmetry.unwrap() < 1e-10);
        let col = grid.at_time(2);
        for x in 2..7 {
            assert!(col[x + 1] <= col[x] + 1e-12);
        }
    }
}
