use num_complex::Complex64;
use serde::Serialize;

use crate::dense::BlockOp;
use crate::dynamics::DenseEvolver;
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LineFit};
use crate::operator::{support_distance, LocalOperator};
use crate::pauli::Site;
use crate::states::ProductGibbsState;

use super::{classical_cumulant, free_cumulant, DenseMoments, Lattice};

/// Operators A_1..A_n evolved to `times[i]` and placed at each displacement tuple of `schedule`.
#[derive(Debug, Clone)]
pub struct ScanPlan {
    pub ops: Vec<LocalOperator>,
    pub times: Vec<f64>,
    pub schedule: Vec<Vec<Site>>,
    pub kind: Lattice,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    /// max_i min_{j≠i} dist(supp A_i(x_i), supp A_j(x_j)) of the unevolved operators.
    pub z: f64,
    pub displacements: Vec<Site>,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayTable {
    pub n: usize,
    pub rows: Vec<DecayRow>,
    /// Fit of ln|c_n| against z over rows above the 1e-14 floor.
    pub log_fit: Option<LineFit>,
}

/// Values below this are treated as exact zeros in fits.
pub const NOISE_FLOOR: f64 = 1e-14;

fn spread(ops: &[LocalOperator]) -> f64 {
    (0..ops.len())
        .map(|i| {
            (0..ops.len())
                .filter(|&j| j != i)
                .map(|j| support_distance(ops[i].support(), ops[j].support()))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Evolved placed operators kept across scans on one evolver. A miss continues from the latest
/// earlier time of the same operator, so scans at increasing times pay only the increments.
#[derive(Debug, Default)]
pub struct EvolutionCache {
    entries: Vec<(LocalOperator, f64, BlockOp)>,
}

impl EvolutionCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&mut self, evolver: &DenseEvolver, a: &LocalOperator, t: f64) -> Result<BlockOp> {
        let mut start: Option<(f64, &BlockOp)> = None;
        for (b, s, o) in &self.entries {
            if b == a && *s <= t && start.map_or(true, |(best, _)| *s > best) {
                start = Some((*s, o));
            }
        }
        let o = match start {
            Some((s, o)) if s == t => return Ok(o.clone()),
            Some((s, o)) => evolver.evolve(o, t - s)?,
            None if t == 0.0 => evolver.embed(a)?,
            None => evolver.evolve(&evolver.embed(a)?, t)?,
        };
        self.entries.push((a.clone(), t, o.clone()));
        Ok(o)
    }
}

/// |c_n(A_1(x_1, t_1), …, A_n(x_n, t_n))| in ω_μ restricted to the evolver's window.
pub fn cumulant_decay_scan(evolver: &DenseEvolver, state: &ProductGibbsState, plan: &ScanPlan) -> Result<DecayTable> {
    cumulant_decay_scan_cached(evolver, state, plan, &mut EvolutionCache::new())
}

/// As [`cumulant_decay_scan`], reusing evolutions from earlier scans on the same evolver.
pub fn cumulant_decay_scan_cached(
    evolver: &DenseEvolver,
    state: &ProductGibbsState,
    plan: &ScanPlan,
    cache: &mut EvolutionCache,
) -> Result<DecayTable> {
    let n = plan.ops.len();
    if plan.times.len() != n {
        return Err(Error::InvalidArgument(format!("{} times for {n} operators", plan.times.len())));
    }
    let weights = state.weights(evolver.sites().len());
    let mut rows = Vec::with_capacity(plan.schedule.len());
    for disp in &plan.schedule {
        if disp.len() != n {
            return Err(Error::InvalidArgument(format!("displacement tuple of length {} for {n} operators", disp.len())));
        }
        let placed: Vec<LocalOperator> = plan.ops.iter().zip(disp).map(|(a, &x)| a.translate(x)).collect();
        // Schedules revisit the same placed operators; each (operator, time) pair is evolved once.
        let evolved =
            placed.iter().zip(&plan.times).map(|(a, &t)| cache.get(evolver, a, t)).collect::<Result<Vec<_>>>()?;
        let moments = DenseMoments { ops: evolved, weights: &weights };
        let c: Complex64 = match plan.kind {
            Lattice::All => classical_cumulant(&moments)?,
            Lattice::NonCrossing => free_cumulant(&moments)?,
        };
        rows.push(DecayRow { z: spread(&placed), displacements: disp.clone(), re: c.re, im: c.im, abs: c.norm() });
    }
    let (zs, logs): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.abs > NOISE_FLOOR && r.z.is_finite()).map(|r| (r.z, r.abs.ln())).unzip();
    Ok(DecayTable { n, rows, log_fit: linear_fit(&zs, &logs) })
}
