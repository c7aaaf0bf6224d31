use num_complex::Complex64;
use serde::Serialize;

use crate::dense::{BlockOp, SparseEntries};
use crate::dynamics::{DenseEvolver, Functional};
use crate::error::{Error, Result};
use crate::operator::LocalOperator;
use crate::pauli::Site;
use crate::states::{ProductGibbsState, QuantumState};

use super::{project_onto_charges, running_mean, uniform_samples, ChargeBasis, ExtensiveVector, Projection, WindowState};

type C = Complex64;

/// g(t) = Σ_{|x|≤R} e^{ikx − ift} w_κ(x,t) (τ_t a, ι_{−x} b), with w_κ = e^{iκx/t}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelatorPlan {
    pub t_max: f64,
    pub dt: f64,
    pub radius: usize,
    pub f: f64,
    pub k: f64,
    pub kappa: f64,
}

impl CorrelatorPlan {
    pub fn new(t_max: f64, dt: f64, radius: usize) -> Self {
        Self { t_max, dt, radius, f: 0.0, k: 0.0, kappa: 0.0 }
    }

    pub fn oscillatory(mut self, f: f64, k: f64) -> Self {
        self.f = f;
        self.k = k;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    /// At t = 0 the fluid-cell phase e^{iκx/t} has no limit; only x = 0 is kept there when κ ≠ 0.
    fn weight(&self, x: Site, t: f64) -> C {
        let base = C::from_polar(1.0, self.k * x as f64 - self.f * t);
        if self.kappa == 0.0 {
            base
        } else if t > 0.0 {
            base * C::from_polar(1.0, self.kappa * x as f64 / t)
        } else if x == 0 {
            base
        } else {
            C::new(0.0, 0.0)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelatorSeries {
    pub times: Vec<f64>,
    pub integrand: Vec<C>,
    pub running: Vec<C>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerReport {
    pub plain: CorrelatorSeries,
    /// The same correlator with ℙa and ℙb in place of a and b.
    pub projected: CorrelatorSeries,
    /// |plain.running − projected.running| per sample.
    pub residual: Vec<f64>,
    pub projection_a: Projection,
    pub projection_b: Projection,
}

impl EulerReport {
    pub fn residual_at(&self, t: f64) -> f64 {
        let j = nearest(&self.plain.times, t);
        self.residual[j]
    }
}

impl CorrelatorSeries {
    pub fn running_at(&self, t: f64) -> C {
        self.running[nearest(&self.times, t)]
    }
}

fn nearest(times: &[f64], t: f64) -> usize {
    times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(j, _)| j)
        .unwrap_or(0)
}

fn correlator(
    a: &LocalOperator,
    b: &LocalOperator,
    plan: &CorrelatorPlan,
    state: &ProductGibbsState,
    evolver: &DenseEvolver,
) -> Result<CorrelatorSeries> {
    let times = uniform_samples(plan.t_max, plan.dt)?;
    let window = evolver.config().window;
    let r = plan.radius as Site;
    if window.is_periodic() && 2 * plan.radius >= window.len {
        return Err(Error::InvalidArgument(format!(
            "radius {} wraps around a ring of {} sites",
            plan.radius, window.len
        )));
    }
    let ws = WindowState::gibbs(state, evolver.sites().len());
    let omega_b = state.expect(b).conj();
    // φ_x(O) = (ι_{−x}b, O), linear in O; the correlator is its conjugate.
    let mut shifts: Vec<Site> = Vec::new();
    let mut functionals: Vec<Functional<'_>> = Vec::new();
    for x in -r..=r {
        let bx = if window.is_periodic() { window.place(b, -x) } else { b.translate(-x) };
        if !window.is_periodic() && window.check(&bx).is_err() {
            if bx.support().iter().any(|&s| window.contains(s)) {
                return Err(Error::SupportOutsideWindow { support: bx.support().to_vec() });
            }
            // Disjoint from the evolved operator's window: the connected part vanishes.
            continue;
        }
        let bd = SparseEntries::from_local(&bx.adjoint(), evolver.sites(), evolver.basis())?;
        let ws = &ws;
        shifts.push(x);
        functionals.push(Box::new(move |o: &BlockOp| bd.trace_before(o, &ws.weights) - omega_b * ws.expect(o)));
    }
    let values = evolver.sample(&evolver.embed(a)?, &times, &functionals)?;
    let integrand: Vec<C> = times
        .iter()
        .zip(&values)
        .map(|(&t, row)| shifts.iter().zip(row).map(|(&x, v)| plan.weight(x, t) * v.conj()).sum())
        .collect();
    Ok(CorrelatorSeries { running: running_mean(plan.dt, &integrand), times, integrand })
}

/// Running (1/T)∫₀ᵀ Σ_x e^{ikx − ift}(a(x,t), b) dt.
pub fn drude_weight(
    a: &LocalOperator,
    b: &LocalOperator,
    plan: &CorrelatorPlan,
    state: &ProductGibbsState,
    evolver: &DenseEvolver,
) -> Result<CorrelatorSeries> {
    correlator(a, b, &CorrelatorPlan { kappa: 0.0, ..*plan }, state, evolver)
}

/// The κ-weighted correlator of (a, b) and of their projections onto `basis`.
pub fn euler_correlator(
    a: &LocalOperator,
    b: &LocalOperator,
    basis: &ChargeBasis,
    plan: &CorrelatorPlan,
    state: &ProductGibbsState,
    evolver: &DenseEvolver,
) -> Result<EulerReport> {
    if basis.k != plan.k {
        return Err(Error::WavenumberMismatch(plan.k, basis.k));
    }
    let qs: QuantumState = (*state).into();
    let projection_a = project_onto_charges(&ExtensiveVector::new(a.clone(), plan.k), basis, &qs)?;
    let projection_b = project_onto_charges(&ExtensiveVector::new(b.clone(), plan.k), basis, &qs)?;
    let plain = correlator(a, b, plan, state, evolver)?;
    let projected =
        correlator(&projection_a.projected.density, &projection_b.projected.density, plan, state, evolver)?;
    let residual = plain.running.iter().zip(&projected.running).map(|(p, q)| (p - q).norm()).collect();
    Ok(EulerReport { plain, projected, residual, projection_a, projection_b })
}
