use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::dense::{BlockOp, SparseEntries};
use crate::dynamics::{DenseEvolver, Functional};
use crate::error::{Error, Result};
use crate::operator::LocalOperator;
use crate::pauli::Site;
use crate::states::ProductGibbsState;

use super::{running_mean, uniform_samples, WindowState};

type C = Complex64;

/// Samples t_j = j·dt on [0, T_max] along the ray x(t) = ⌊direction·v·t⌋, with oscillatory
/// weight e^{i(k·direction·v − f)t}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayPlan {
    pub v: f64,
    pub direction: i8,
    pub t_max: f64,
    pub dt: f64,
    pub k: f64,
    pub f: f64,
}

impl RayPlan {
    pub fn new(v: f64, t_max: f64, dt: f64) -> Self {
        Self { v, direction: 1, t_max, dt, k: 0.0, f: 0.0 }
    }

    pub fn oscillatory(mut self, k: f64, f: f64) -> Self {
        self.k = k;
        self.f = f;
        self
    }

    fn velocity(&self) -> f64 {
        f64::from(self.direction.signum()) * self.v
    }

    /// ⌊direction·v·t⌋, rounding toward −∞.
    pub fn displacement(&self, t: f64) -> Site {
        (self.velocity() * t).floor() as Site
    }

    pub fn frequency(&self) -> f64 {
        self.k * self.velocity() - self.f
    }

    fn samples(&self) -> Result<Vec<f64>> {
        if self.direction == 0 || !self.v.is_finite() {
            return Err(Error::InvalidArgument("ray needs a finite speed and direction ±1".into()));
        }
        uniform_samples(self.t_max, self.dt)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RaySeries {
    pub times: Vec<f64>,
    pub displacements: Vec<Site>,
    pub integrand: Vec<C>,
    /// (1/T)∫₀ᵀ of the integrand at every sample T.
    pub running: Vec<C>,
    /// ω(A)ω(B) for non-oscillating weights, 0 otherwise.
    pub target: C,
}

impl RaySeries {
    pub fn abs_error(&self) -> Vec<f64> {
        self.running.iter().map(|r| (r - self.target).norm()).collect()
    }

    /// |running − target| at the sample nearest to `t`.
    pub fn error_at(&self, t: f64) -> f64 {
        let j = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(j, _)| j)
            .unwrap_or(0);
        (self.running[j] - self.target).norm()
    }
}

/// Where ι_{−x}B sits relative to the evolver's window.
enum Partner {
    Inside(SparseEntries),
    Outside,
}

fn place_partner(evolver: &DenseEvolver, b: &LocalOperator, x: Site) -> Result<Partner> {
    let w = evolver.config().window;
    let sparse = |op: &LocalOperator| SparseEntries::from_local(op, evolver.sites(), evolver.basis());
    if w.is_periodic() {
        return Ok(Partner::Inside(sparse(&w.place(b, -x))?));
    }
    let shifted = b.translate(-x);
    if w.check(&shifted).is_ok() {
        Ok(Partner::Inside(sparse(&shifted)?))
    } else if shifted.support().iter().all(|&s| !w.contains(s)) {
        Ok(Partner::Outside)
    } else {
        Err(Error::SupportOutsideWindow { support: shifted.support().to_vec() })
    }
}

/// Running averages of e^{i(kv−f)t} ω(ι_{⌊vt⌋}τ_t(A) B). Translation invariance of ω_μ moves the
/// shift onto B; once ι_{−x}B leaves an open window, the window-evolved A and B factorize exactly.
pub fn ray_average(
    a: &LocalOperator,
    b: &LocalOperator,
    plan: &RayPlan,
    state: &ProductGibbsState,
    evolver: &DenseEvolver,
) -> Result<RaySeries> {
    let times = plan.samples()?;
    let displacements: Vec<Site> = times.iter().map(|&t| plan.displacement(t)).collect();
    let ws = WindowState::gibbs(state, evolver.sites().len());
    let omega_b = state.expect(b);
    let mut index: BTreeMap<Site, usize> = BTreeMap::new();
    let mut functionals: Vec<Functional<'_>> = Vec::new();
    for &x in &displacements {
        if index.contains_key(&x) {
            continue;
        }
        index.insert(x, functionals.len());
        let ws = &ws;
        functionals.push(match place_partner(evolver, b, x)? {
            Partner::Inside(bx) => Box::new(move |o: &BlockOp| bx.trace_after(o, &ws.weights)),
            Partner::Outside => Box::new(move |o: &BlockOp| ws.expect(o) * omega_b),
        });
    }
    let values = evolver.sample(&evolver.embed(a)?, &times, &functionals)?;
    let omega = plan.frequency();
    let integrand: Vec<C> = times
        .iter()
        .zip(&displacements)
        .zip(&values)
        .map(|((&t, x), row)| C::from_polar(1.0, omega * t) * row[index[x]])
        .collect();
    let target = if omega == 0.0 { state.expect(a) * omega_b } else { C::new(0.0, 0.0) };
    Ok(RaySeries { running: running_mean(plan.dt, &integrand), times, displacements, integrand, target })
}

/// T⁻ⁿ ω(Yⁿ) with Y = ∫₀ᵀ ι_{⌊vt⌋}τ_t(A) dt (trapezoid), at each checkpoint T; periodic windows only.
pub fn ray_moment(
    a: &LocalOperator,
    n: u32,
    plan: &RayPlan,
    state: &ProductGibbsState,
    evolver: &DenseEvolver,
    checkpoints: &[f64],
) -> Result<Vec<(f64, C)>> {
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidArgument(format!("moment order {n} outside 1..=4")));
    }
    if plan.k != 0.0 || plan.f != 0.0 {
        return Err(Error::InvalidArgument("ray moments use the plain, non-oscillating average".into()));
    }
    if !evolver.config().window.is_periodic() {
        return Err(Error::InvalidArgument("ray moments translate evolved operators; use a periodic window".into()));
    }
    let times = plan.samples()?;
    let mut wanted: Vec<usize> = Vec::new();
    for &c in checkpoints {
        let j = (c / plan.dt).round() as usize;
        if j == 0 || j >= times.len() || (times[j] - c).abs() > 1e-9 * plan.dt.max(1.0) {
            return Err(Error::InvalidArgument(format!("checkpoint {c} is not a positive sample time")));
        }
        wanted.push(j);
    }
    let ws = WindowState::gibbs(state, evolver.sites().len());
    let a0 = evolver.embed(a)?;
    let mut acc = a0.zeros_like();
    let mut prev: Option<BlockOp> = None;
    let mut out = Vec::new();
    evolver.trajectory(&a0, &times, |j, o| {
        let x = evolver.translate(o, plan.displacement(times[j])).expect("periodic window");
        if let Some(p) = prev.take() {
            acc.axpy(C::new(plan.dt / 2.0, 0.0), &p);
            acc.axpy(C::new(plan.dt / 2.0, 0.0), &x);
        }
        if wanted.contains(&j) {
            let t = times[j];
            let y = acc.scaled(C::new(1.0 / t, 0.0));
            let mut p = y.clone();
            for _ in 1..n.saturating_sub(1) {
                p = p.matmul(&y);
            }
            let m = if n == 1 { ws.expect(&y) } else { ws.expect_product(&p, &y) };
            out.push((t, m));
        }
        prev = Some(x);
    })?;
    Ok(out)
}
