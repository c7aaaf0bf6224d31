use crate::error::{Error, Result};
use crate::operator::LocalOperator;

use super::generator::LindbladGenerator;

/// RK4 on Pauli-string operators; the second, independent evolution engine.
#[derive(Debug, Clone)]
pub struct SparseRk4 {
    gen: LindbladGenerator,
    pub dt: f64,
    /// Coefficients with modulus at or below this are dropped after each step (0 keeps everything).
    pub prune_eps: f64,
    /// Relative tolerance of the step-doubling local-error check.
    pub tol: f64,
    pub check_every: usize,
}

impl SparseRk4 {
    pub fn new(gen: LindbladGenerator, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        Ok(Self { gen, dt, prune_eps: 0.0, tol: 1e-6, check_every: 10 })
    }

    pub fn generator(&self) -> &LindbladGenerator {
        &self.gen
    }

    fn step(&self, y: &LocalOperator, h: f64) -> Result<LocalOperator> {
        let k1 = self.gen.apply(y)?;
        let k2 = self.gen.apply(&(y + &k1.scale_re(h / 2.0)))?;
        let k3 = self.gen.apply(&(y + &k2.scale_re(h / 2.0)))?;
        let k4 = self.gen.apply(&(y + &k3.scale_re(h)))?;
        let inc = [k1.scale_re(h / 6.0), k2.scale_re(h / 3.0), k3.scale_re(h / 3.0), k4.scale_re(h / 6.0)];
        Ok((y + &inc.into_iter().sum()).prune(self.prune_eps))
    }

    pub fn evolve(&self, a: &LocalOperator, t: f64) -> Result<LocalOperator> {
        if t < 0.0 {
            return Err(Error::InvalidArgument("semigroup evolution needs t >= 0".into()));
        }
        let steps = (t / self.dt).round() as usize;
        if steps == 0 {
            return Ok(a.clone());
        }
        let h = t / steps as f64;
        let mut cur = a.clone();
        for s in 0..steps {
            let next = self.step(&cur, h)?;
            if self.check_every > 0 && s % self.check_every == 0 {
                let half = self.step(&self.step(&cur, h / 2.0)?, h / 2.0)?;
                let estimate = (&half - &next).hs_norm() / 15.0 / half.hs_norm().max(1e-300);
                if estimate > self.tol {
                    return Err(Error::StepSizeRejected { estimate, tolerance: self.tol });
                }
            }
            cur = next;
        }
        Ok(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DenseEvolver, EvolverConfig, Interaction, Window};
    use num_complex::Complex64;

    #[test]
    fn agrees_with_dense_engine() {
        let w = Window::ring(5);
        let l = (&LocalOperator::sigma_plus(0) * &LocalOperator::sigma_minus(1)).scale_re(0.6)
            + LocalOperator::sz(1).scale(Complex64::new(0.2, 0.1));
        let gen = LindbladGenerator::new(w, &Interaction::hopping(Complex64::new(1.0, 0.0), 0.3, 0.5), &[l]).unwrap();
        let a = LocalOperator::sigma_plus(2) + LocalOperator::sz(0);
        let sparse = SparseRk4::new(gen.clone(), 0.005).unwrap().evolve(&a, 0.5).unwrap();
        let dense = DenseEvolver::new(&gen, EvolverConfig::new(w)).unwrap().evolve_local(&a, 0.5, 0.0).unwrap();
        assert!(sparse.max_abs_diff(&dense) < 1e-9);
    }
}
