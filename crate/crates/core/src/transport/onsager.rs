use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::Serialize;

use crate::dense::BlockOp;
use crate::dynamics::{DenseEvolver, EvolverConfig, Window};
use crate::error::{Error, Result};
use crate::open_chain::{derive_current, LindbladModel};
use crate::operator::LocalOperator;
use crate::states::{ProductGibbsState, QuantumState};

use super::{extensive_inner, find_conserved_charges, minimal_image, project_onto_charges, ChargeBasis, ExtensiveVector, WindowState};

type C = Complex64;

#[derive(Debug, Clone)]
pub struct OnsagerPlan {
    pub mu: f64,
    pub horizons: Vec<f64>,
    /// Gauss-Legendre nodes per time axis of the double integral.
    pub nodes: usize,
    /// Project the current onto magnetization only; otherwise onto `basis` or a discovered basis.
    pub chaotic: bool,
    pub basis: Option<ChargeBasis>,
}

impl OnsagerPlan {
    pub fn new(mu: f64, horizons: Vec<f64>) -> Self {
        Self { mu, horizons, nodes: 16, chaotic: true, basis: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OnsagerRow {
    pub t: f64,
    /// (1/T)∫₀ᵀ∫₀ᵀ Σ_x (τ*_t j⁻(x), τ*_{t′} j⁻(0)) dt dt′ on the ring.
    pub green_kubo: f64,
    pub l_norm: f64,
    pub l_irr: f64,
    /// |green_kubo − (l_norm − l_irr)|.
    pub gap: f64,
    /// max_d |(τ_Tτ*_T s(d), s(0)) − (τ*_T s(d), τ*_T s(0))|: the backward evolver as the ω_μ-adjoint.
    pub adjoint_gap: f64,
    /// Largest |term| of either moment sum on the antipodal shell.
    pub tail: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OnsagerReport {
    pub ring: usize,
    pub mu: f64,
    /// (M, j)/χ.
    pub v: f64,
    pub chi: f64,
    /// Σ_x (j⁻(x), j⁻(0)) in the infinite product state.
    pub static_term: f64,
    pub projected_current: LocalOperator,
    pub rows: Vec<OnsagerRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffusionRow {
    pub t: f64,
    pub l_norm: f64,
    pub l_irr: f64,
    pub tail: f64,
}

struct Engines {
    ring: Window,
    forward: DenseEvolver,
    backward: DenseEvolver,
    ws: WindowState,
}

fn engines(model: &LindbladModel, n: usize, mu: f64) -> Result<Engines> {
    model.check()?;
    if n < 4 {
        return Err(Error::InvalidArgument(format!("ring of {n} sites is too small for bond currents")));
    }
    let ring = Window::ring(n);
    let gen = model.generator(ring)?;
    let forward = DenseEvolver::new(&gen, EvolverConfig::new(ring))?;
    let backward = DenseEvolver::new(&gen.backward(), EvolverConfig::new(ring))?;
    Ok(Engines { ring, forward, backward, ws: WindowState::gibbs(&ProductGibbsState::new(mu), n) })
}

/// (1/T)Σ_d (d² − (vT)²) Re S_T0(d) and (1/2T)Σ_d d² Re S_TT(d) over minimal-image d.
fn moment_sums(e: &Engines, density: &LocalOperator, v: f64, t: f64) -> Result<(f64, f64, f64, f64)> {
    let n = e.ring.len;
    let s0 = e.forward.embed(&e.ring.place(density, 0))?;
    let fwd = e.forward.evolve(&s0, t)?;
    let back = e.backward.evolve(&fwd, t)?;
    let (mut l_norm, mut l_irr, mut adjoint_gap, mut tail) = (0.0, 0.0, 0.0f64, 0.0f64);
    for x in 0..n as i64 {
        let d = minimal_image(x, n) as f64;
        let s_t0 = e.ws.inner(&e.forward.translate(&fwd, x)?, &s0);
        let s_tt = e.ws.inner(&e.forward.translate(&back, x)?, &s0);
        let direct = e.ws.inner(&e.forward.translate(&fwd, x)?, &fwd);
        adjoint_gap = adjoint_gap.max((s_tt - direct).norm());
        l_norm += (d * d - (v * t).powi(2)) * s_t0.re;
        l_irr += d * d * s_tt.re;
        if 2 * minimal_image(x, n).unsigned_abs() as usize >= n - 1 {
            tail = tail.max(s_t0.norm()).max(s_tt.norm());
        }
    }
    Ok((l_norm / t, l_irr / (2.0 * t), adjoint_gap, tail))
}

/// The Green-Kubo double integral of the projected current on an `n`-site ring, next to the
/// second-moment decomposition built from spin autocorrelations.
pub fn onsager_estimate(model: &LindbladModel, n: usize, plan: &OnsagerPlan) -> Result<OnsagerReport> {
    if plan.horizons.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("horizons must be positive".into()));
    }
    let e = engines(model, n, plan.mu)?;
    let state: QuantumState = ProductGibbsState::new(plan.mu).into();
    let j = derive_current(model)?.j_total;
    let chi = 1.0 / plan.mu.cosh().powi(2);
    let sz = ExtensiveVector::new(LocalOperator::sz(0), 0.0);
    let jv = ExtensiveVector::new(j.clone(), 0.0);
    let v = extensive_inner(&sz, &jv, &state)?.value.re / chi;
    let basis = if plan.chaotic {
        ChargeBasis::new(vec![LocalOperator::sz(0)], 0.0, 0.0, plan.mu)?
    } else if let Some(b) = &plan.basis {
        b.clone()
    } else {
        find_conserved_charges(&model.chain(), 0.0, 0.0, 2, plan.mu)?
    };
    let proj = project_onto_charges(&jv, &basis, &state)?;
    let jm = (&j - &proj.projected.density).prune(1e-15);
    let jm_vec = ExtensiveVector::new(jm.clone(), 0.0);
    let static_term = extensive_inner(&jm_vec, &jm_vec, &state)?.value.re;

    let mut total = LocalOperator::zero();
    for x in 0..n as i64 {
        total += &e.ring.place(&jm, x);
    }
    let total = e.forward.embed(&total)?;
    let local = e.forward.embed(&e.ring.place(&jm, 0))?;
    let rule = GaussLegendre::new(plan.nodes.max(2)).map_err(|err| Error::InvalidArgument(err.to_string()))?;
    let mut rows = Vec::with_capacity(plan.horizons.len());
    for &t_max in &plan.horizons {
        let (times, weights): (Vec<f64>, Vec<f64>) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (t_max * (1.0 + x) / 2.0, t_max * w / 2.0))
            .unzip();
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
        let mut big: Vec<Option<BlockOp>> = vec![None; times.len()];
        let mut small: Vec<Option<BlockOp>> = vec![None; times.len()];
        e.forward.trajectory(&total, &sorted, |k, o| big[order[k]] = Some(o.clone()))?;
        e.forward.trajectory(&local, &sorted, |k, o| small[order[k]] = Some(o.clone()))?;
        let mut gk = C::new(0.0, 0.0);
        for (a, wa) in big.iter().zip(&weights) {
            let a = a.as_ref().expect("visited");
            for (b, wb) in small.iter().zip(&weights) {
                gk += wa * wb * e.ws.inner(a, b.as_ref().expect("visited"));
            }
        }
        let green_kubo = gk.re / t_max;
        let (l_norm, l_irr, adjoint_gap, tail) = moment_sums(&e, &LocalOperator::sz(0), v, t_max)?;
        rows.push(OnsagerRow {
            t: t_max,
            green_kubo,
            l_norm,
            l_irr,
            gap: (green_kubo - (l_norm - l_irr)).abs(),
            adjoint_gap,
            tail,
        });
    }
    Ok(OnsagerReport { ring: n, mu: plan.mu, v, chi, static_term, projected_current: jm, rows })
}

/// 𝔏_norm(t) and 𝔏_irr(t) from the autocorrelations of `density` on an `n`-site ring.
pub fn diffusion_strengths(
    model: &LindbladModel,
    density: &LocalOperator,
    mu: f64,
    times: &[f64],
    n: usize,
) -> Result<Vec<DiffusionRow>> {
    if times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("diffusion strengths need t > 0".into()));
    }
    let e = engines(model, n, mu)?;
    let v = model.drift() * mu.tanh();
    times
        .iter()
        .map(|&t| {
            let (l_norm, l_irr, _, tail) = moment_sums(&e, density, v, t)?;
            Ok(DiffusionRow { t, l_norm, l_irr, tail })
        })
        .collect()
}
