use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{expm, Basis, BlockOp, SectorSparse, SECTOR_LEAK_TOL};
use crate::error::{Error, Result};
use crate::operator::LocalOperator;
use crate::pauli::Site;
use crate::special::bessel_j_sequence;

use super::generator::LindbladGenerator;
use super::window::Window;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// exp(tℒ) of the assembled superoperator; small windows only.
    DenseExponential,
    /// Fixed-step classical Runge-Kutta.
    OdeRk4,
    /// Adaptive Taylor series of the generator.
    Taylor,
    /// Chebyshev expansion of exp(it·ad_H); Hamiltonian generators only.
    Chebyshev,
    /// Chebyshev for Hamiltonian generators, Taylor otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolverConfig {
    pub window: Window,
    pub method: Method,
    pub dt: f64,
    pub dense_limit: usize,
    /// Relative local-error tolerance of the RK4 step-doubling check.
    pub rk4_tol: f64,
}

impl EvolverConfig {
    pub const SUPEROPERATOR_LIMIT: usize = 5;

    pub fn new(window: Window) -> Self {
        Self { window, method: Method::Auto, dt: 0.01, dense_limit: 12, rk4_tol: 1e-6 }
    }

    pub fn with_method(mut self, m: Method) -> Self {
        self.method = m;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        let n = self.window.len;
        if n > self.dense_limit {
            return Err(Error::WindowTooLarge { sites: n, limit: self.dense_limit });
        }
        if self.method == Method::DenseExponential && n > Self::SUPEROPERATOR_LIMIT {
            return Err(Error::WindowTooLarge { sites: n, limit: Self::SUPEROPERATOR_LIMIT });
        }
        Ok(())
    }
}

/// Matrix-level generator on a window, acting blockwise on [`BlockOp`]s.
pub struct DenseEvolver {
    cfg: EvolverConfig,
    sites: Vec<Site>,
    basis: Arc<Basis>,
    h: SectorSparse,
    jumps: Vec<(SectorSparse, SectorSparse)>,
    k: SectorSparse,
    hermitian: bool,
    norm_bound: f64,
    width: std::sync::OnceLock<f64>,
}

/// Linear functional on window operators, used for sampled trajectories.
pub type Functional<'a> = Box<dyn Fn(&BlockOp) -> C + Sync + 'a>;

impl DenseEvolver {
    pub fn new(gen: &LindbladGenerator, cfg: EvolverConfig) -> Result<Self> {
        if gen.window() != &cfg.window {
            return Err(Error::InvalidArgument("generator and evolver windows differ".into()));
        }
        cfg.validate()?;
        let sites = cfg.window.sites();
        let n = sites.len();
        let m = LocalOperator::magnetization(sites.iter().copied());
        let commutes = |a: &LocalOperator| {
            a.commutator(&m).terms().map(|(_, c)| c.norm()).sum::<f64>()
                <= SECTOR_LEAK_TOL * a.terms().map(|(_, c)| c.norm()).sum::<f64>()
        };
        let conserving = gen.hamiltonian_terms().iter().all(commutes) && gen.jumps().iter().all(|j| commutes(&j.l));
        let basis = Arc::new(if conserving { Basis::magnetization(n) } else { Basis::full(n) });
        let h = SectorSparse::from_local(&gen.hamiltonian(), &sites, &basis)?;
        let mut jumps = Vec::new();
        for j in gen.jumps() {
            let l = SectorSparse::from_local(&j.l, &sites, &basis)?;
            let ld = l.adjoint();
            jumps.push((l, ld));
        }
        let kparts: Vec<SectorSparse> = jumps.iter().map(|(l, ld)| ld.product(l)).collect();
        let k = SectorSparse::sum(&kparts, &basis);
        Ok(Self {
            cfg,
            sites,
            basis,
            h,
            hermitian: jumps.is_empty(),
            jumps,
            k,
            norm_bound: gen.norm_bound(),
            width: std::sync::OnceLock::new(),
        })
    }

    pub fn config(&self) -> &EvolverConfig {
        &self.cfg
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn is_hamiltonian(&self) -> bool {
        self.hermitian
    }

    pub fn embed(&self, a: &LocalOperator) -> Result<BlockOp> {
        self.cfg.window.check(a)?;
        BlockOp::from_local(a, &self.sites, self.basis.clone())
    }

    pub fn to_local(&self, o: &BlockOp, tol: f64) -> LocalOperator {
        o.to_local(&self.sites, tol)
    }

    fn apply_block(&self, (r, c): (usize, usize), o: &DMatrix<C>) -> DMatrix<C> {
        let mut out = DMatrix::zeros(o.nrows(), o.ncols());
        self.h.blocks[r].left_mul_acc(I, o, &mut out);
        self.h.blocks[c].right_mul_acc(-I, o, &mut out);
        if !self.jumps.is_empty() {
            let mut tmp = DMatrix::zeros(o.nrows(), o.ncols());
            for (l, ld) in &self.jumps {
                tmp.fill(ZERO);
                l.blocks[c].right_mul_acc(ONE, o, &mut tmp);
                ld.blocks[r].left_mul_acc(ONE, &tmp, &mut out);
            }
            self.k.blocks[r].left_mul_acc(C::new(-0.5, 0.0), o, &mut out);
            self.k.blocks[c].right_mul_acc(C::new(-0.5, 0.0), o, &mut out);
        }
        out
    }

    /// Generator applied to a window operator.
    pub fn apply(&self, o: &BlockOp) -> BlockOp {
        let blocks: BTreeMap<(usize, usize), DMatrix<C>> = o
            .blocks()
            .par_iter()
            .map(|(&key, b)| (key, self.apply_block(key, b)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        BlockOp::from_blocks(self.basis.clone(), blocks)
    }

    /// Width of the spectrum of ad_H (E_max − E_min), padded by 1%.
    pub fn ad_width(&self) -> f64 {
        *self.width.get_or_init(|| {
            let (lo, hi) = self.h.spectral_range();
            (hi - lo) * 1.01 + 1e-9
        })
    }

    fn resolved(&self) -> Method {
        match self.cfg.method {
            Method::Auto if self.hermitian => Method::Chebyshev,
            Method::Auto => Method::Taylor,
            m => m,
        }
    }

    /// e^{tℒ}(O) for t ≥ 0.
    pub fn evolve(&self, o: &BlockOp, t: f64) -> Result<BlockOp> {
        if t < 0.0 {
            return Err(Error::InvalidArgument("semigroup evolution needs t >= 0".into()));
        }
        if t == 0.0 {
            return Ok(o.clone());
        }
        match self.resolved() {
            Method::Chebyshev => self.chebyshev(o, t),
            Method::Taylor => Ok(self.taylor(o, t)),
            Method::OdeRk4 => self.rk4(o, t),
            Method::DenseExponential => Ok(self.superoperator(o, t)),
            Method::Auto => unreachable!(),
        }
    }

    /// Hamiltonian evolution e^{itH} O e^{−itH} for any real t (group, not semigroup).
    pub fn evolve_unitary(&self, o: &BlockOp, t: f64) -> Result<BlockOp> {
        if !self.hermitian {
            return Err(Error::InvalidArgument("unitary evolution needs a Hamiltonian generator".into()));
        }
        if t >= 0.0 {
            return self.evolve(o, t);
        }
        // e^{−i|t| ad_H}: the Chebyshev series with conjugated phases.
        self.chebyshev_signed(o, -t, -1.0)
    }

    pub fn evolve_local(&self, a: &LocalOperator, t: f64, tol: f64) -> Result<LocalOperator> {
        let o = self.embed(a)?;
        Ok(self.to_local(&self.evolve(&o, t)?, tol))
    }

    fn chebyshev(&self, o: &BlockOp, t: f64) -> Result<BlockOp> {
        self.chebyshev_signed(o, t, 1.0)
    }

    fn chebyshev_terms(z: f64) -> usize {
        (z + 12.0 * z.cbrt() + 30.0).ceil() as usize
    }

    fn chebyshev_signed(&self, o: &BlockOp, t: f64, sign: f64) -> Result<BlockOp> {
        if !self.hermitian {
            return Err(Error::InvalidArgument("Chebyshev propagation needs a Hamiltonian generator".into()));
        }
        let w = self.ad_width();
        let z = w * t;
        let kmax = Self::chebyshev_terms(z);
        let bessel = bessel_j_sequence(z, kmax);
        let mut out = o.scaled(C::new(bessel[0], 0.0));
        let mut prev = o.clone();
        let mut cur = self.scaled_ad(o, w);
        for (k, &jk) in bessel.iter().enumerate().skip(1) {
            let phase = crate::pauli::i_pow((k % 4) as u8) * C::new(2.0 * jk, 0.0);
            let phase = if sign < 0.0 { phase.conj() } else { phase };
            out.axpy(phase, &cur);
            if k == kmax {
                break;
            }
            let mut next = self.scaled_ad(&cur, w);
            next.scale(C::new(2.0, 0.0));
            next.axpy(-ONE, &prev);
            prev = std::mem::replace(&mut cur, next);
        }
        Ok(out)
    }

    /// ad_H(O)/w, i.e. −iℒ*(O)/w for Hamiltonian generators.
    fn scaled_ad(&self, o: &BlockOp, w: f64) -> BlockOp {
        let mut r = self.apply(o);
        r.scale(C::new(0.0, -1.0 / w));
        r
    }

    fn taylor_step(&self, o: &BlockOp, h: f64) -> BlockOp {
        let mut sum = o.clone();
        let mut term = o.clone();
        for k in 1..80 {
            term = self.apply(&term);
            term.scale(C::new(h / k as f64, 0.0));
            sum.axpy(ONE, &term);
            if term.frobenius() <= 1e-17 * sum.frobenius().max(1e-300) {
                break;
            }
        }
        sum
    }

    fn taylor(&self, o: &BlockOp, t: f64) -> BlockOp {
        let rate = if self.hermitian { self.ad_width() } else { self.norm_bound.max(1e-12) };
        let steps = ((t * rate / 3.0).ceil() as usize).max(1);
        let h = t / steps as f64;
        let mut cur = o.clone();
        for _ in 0..steps {
            cur = self.taylor_step(&cur, h);
        }
        cur
    }

    fn rk4_step(&self, y: &BlockOp, h: f64) -> BlockOp {
        let k1 = self.apply(y);
        let mut y2 = y.clone();
        y2.axpy(C::new(h / 2.0, 0.0), &k1);
        let k2 = self.apply(&y2);
        let mut y3 = y.clone();
        y3.axpy(C::new(h / 2.0, 0.0), &k2);
        let k3 = self.apply(&y3);
        let mut y4 = y.clone();
        y4.axpy(C::new(h, 0.0), &k3);
        let k4 = self.apply(&y4);
        let mut out = y.clone();
        out.axpy(C::new(h / 6.0, 0.0), &k1);
        out.axpy(C::new(h / 3.0, 0.0), &k2);
        out.axpy(C::new(h / 3.0, 0.0), &k3);
        out.axpy(C::new(h / 6.0, 0.0), &k4);
        out
    }

    fn rk4(&self, o: &BlockOp, t: f64) -> Result<BlockOp> {
        let steps = ((t / self.cfg.dt).round() as usize).max(1);
        let h = t / steps as f64;
        let mut cur = o.clone();
        for s in 0..steps {
            let next = self.rk4_step(&cur, h);
            if s % 10 == 0 {
                let half = self.rk4_step(&self.rk4_step(&cur, h / 2.0), h / 2.0);
                let estimate = half.sub(&next).frobenius() / 15.0 / half.frobenius().max(1e-300);
                if estimate > self.cfg.rk4_tol {
                    return Err(Error::StepSizeRejected { estimate, tolerance: self.cfg.rk4_tol });
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    fn superoperator(&self, o: &BlockOp, t: f64) -> BlockOp {
        let mut out = BTreeMap::new();
        for (&key, b) in o.blocks() {
            let (nr, nc) = b.shape();
            let d = nr * nc;
            let mut sup = DMatrix::<C>::zeros(d, d);
            let mut unit = DMatrix::<C>::zeros(nr, nc);
            for col in 0..d {
                unit[col] = ONE;
                let img = self.apply_block(key, &unit);
                sup.column_mut(col).copy_from_slice(img.as_slice());
                unit[col] = ZERO;
            }
            let e = expm(&(sup * C::new(t, 0.0)));
            let v = e * DVector::from_column_slice(b.as_slice());
            out.insert(key, DMatrix::from_column_slice(nr, nc, v.as_slice()));
        }
        BlockOp::from_blocks(self.basis.clone(), out)
    }

    /// Visits e^{tℒ}(O) at each of the ascending, non-negative `times`.
    pub fn trajectory(&self, o: &BlockOp, times: &[f64], mut visit: impl FnMut(usize, &BlockOp)) -> Result<()> {
        let mut cur = o.clone();
        let mut t0 = 0.0;
        for (i, &t) in times.iter().enumerate() {
            if t < t0 {
                return Err(Error::InvalidArgument("sample times must be ascending and non-negative".into()));
            }
            if t > t0 {
                cur = self.evolve(&cur, t - t0)?;
                t0 = t;
            }
            visit(i, &cur);
        }
        Ok(())
    }

    /// `values[i][j] = φ_j(e^{t_i ℒ} O)`. Hamiltonian generators use Chebyshev moments
    /// `φ_j(T_k(ad_H/w) O)` once and resum them for every sample time.
    pub fn sample(&self, o: &BlockOp, times: &[f64], functionals: &[Functional<'_>]) -> Result<Vec<Vec<C>>> {
        if times.iter().any(|&t| t < 0.0) {
            return Err(Error::InvalidArgument("sample times must be non-negative".into()));
        }
        if self.resolved() == Method::Chebyshev && !times.is_empty() {
            let w = self.ad_width();
            let tmax = times.iter().copied().fold(0.0, f64::max);
            let kmax = Self::chebyshev_terms(w * tmax);
            let mut moments: Vec<Vec<C>> = Vec::with_capacity(kmax + 1);
            let eval = |x: &BlockOp| functionals.iter().map(|f| f(x)).collect::<Vec<C>>();
            let mut prev = o.clone();
            moments.push(eval(&prev));
            let mut cur = self.scaled_ad(o, w);
            for k in 1..=kmax {
                moments.push(eval(&cur));
                if k == kmax {
                    break;
                }
                let mut next = self.scaled_ad(&cur, w);
                next.scale(C::new(2.0, 0.0));
                next.axpy(-ONE, &prev);
                prev = std::mem::replace(&mut cur, next);
            }
            return Ok(times
                .iter()
                .map(|&t| {
                    let bessel = bessel_j_sequence(w * t, kmax);
                    (0..functionals.len())
                        .map(|j| {
                            let mut acc = moments[0][j] * bessel[0];
                            for k in 1..=kmax {
                                acc += crate::pauli::i_pow((k % 4) as u8) * (2.0 * bessel[k]) * moments[k][j];
                            }
                            acc
                        })
                        .collect()
                })
                .collect());
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
        let mut out = vec![Vec::new(); times.len()];
        self.trajectory(o, &sorted, |k, x| out[order[k]] = functionals.iter().map(|f| f(x)).collect())?;
        Ok(out)
    }

    /// Cyclic translation by `x` on a periodic window.
    pub fn translate(&self, o: &BlockOp, x: Site) -> Result<BlockOp> {
        if !self.cfg.window.is_periodic() {
            return Err(Error::InvalidArgument("block translation needs a periodic window".into()));
        }
        let n = self.sites.len();
        let shift = x.rem_euclid(n as Site) as usize;
        if shift == 0 {
            return Ok(o.clone());
        }
        let mask = (1usize << n) - 1;
        let perm: Vec<usize> = (0..1usize << n).map(|s| ((s << shift) | (s >> (n - shift))) & mask).collect();
        Ok(o.permute(&perm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::interaction::Interaction;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn hop_generator(w: Window, dephase: f64) -> LindbladGenerator {
        let jumps = if dephase > 0.0 { vec![LocalOperator::sz(0).scale_re(dephase)] } else { vec![] };
        LindbladGenerator::new(w, &Interaction::hopping(c(1.0, 0.3), 0.4, 0.7), &jumps).unwrap()
    }

    #[test]
    fn methods_agree_on_small_window() {
        let w = Window::open(0, 4);
        let a = LocalOperator::sx(1) + &LocalOperator::sz(0) * &LocalOperator::sy(2);
        for dephase in [0.0, 0.5] {
            let gen = hop_generator(w, dephase);
            let reference = DenseEvolver::new(&gen, EvolverConfig::new(w).with_method(Method::DenseExponential)).unwrap();
            let o = reference.embed(&a).unwrap();
            let exact = reference.evolve(&o, 0.7).unwrap();
            let mut methods = vec![Method::Taylor, Method::OdeRk4, Method::Auto];
            if dephase == 0.0 {
                methods.push(Method::Chebyshev);
            }
            for m in methods {
                let ev = DenseEvolver::new(&gen, EvolverConfig::new(w).with_method(m).with_dt(0.001)).unwrap();
                let got = ev.evolve(&o, 0.7).unwrap();
                let err = got.sub(&exact).frobenius() / exact.frobenius();
                let tol = if m == Method::OdeRk4 { 1e-9 } else { 1e-12 };
                assert!(err < tol, "{m:?} dephase {dephase}: {err}");
            }
        }
    }

    #[test]
    fn rk4_step_check_rejects_coarse_steps() {
        let w = Window::open(0, 4);
        let ev = DenseEvolver::new(&hop_generator(w, 0.0), EvolverConfig::new(w).with_method(Method::OdeRk4).with_dt(0.5))
            .unwrap();
        let o = ev.embed(&LocalOperator::sx(0)).unwrap();
        assert!(matches!(ev.evolve(&o, 1.0), Err(Error::StepSizeRejected { .. })));
    }

    #[test]
    fn chebyshev_sampling_matches_direct_evolution() {
        let w = Window::ring(5);
        let ev = DenseEvolver::new(&hop_generator(w, 0.0), EvolverConfig::new(w)).unwrap();
        let o = ev.embed(&LocalOperator::sz(0)).unwrap();
        let b = ev.embed(&(LocalOperator::sz(2) + LocalOperator::sx(1))).unwrap();
        let weights = crate::states::ProductGibbsState::new(0.3).weights(5);
        let f: Functional = Box::new(|x: &BlockOp| x.weighted_trace_product(&b, &weights));
        let times = [0.0, 0.4, 1.3, 2.0];
        let vals = ev.sample(&o, &times, &[f]).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let direct = ev.evolve(&o, t).unwrap().weighted_trace_product(&b, &weights);
            assert!((direct - vals[i][0]).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_evolution_preserves_norm_and_energy() {
        let w = Window::open(0, 5);
        let gen = hop_generator(w, 0.0);
        let ev = DenseEvolver::new(&gen, EvolverConfig::new(w)).unwrap();
        let a = ev.embed(&LocalOperator::sx(2)).unwrap();
        let at = ev.evolve(&a, 1.5).unwrap();
        assert!((at.spectral_norm() - 1.0).abs() < 1e-10);
        let h = ev.embed(&gen.hamiltonian()).unwrap();
        assert!(ev.evolve(&h, 2.0).unwrap().sub(&h).max_abs() < 1e-10);
        let back = ev.evolve_unitary(&at, -1.5).unwrap();
        assert!(back.sub(&a).max_abs() < 1e-10);
    }

    #[test]
    fn ring_translation_commutes_with_evolution() {
        let w = Window::ring(6);
        let ev = DenseEvolver::new(&hop_generator(w, 0.3), EvolverConfig::new(w)).unwrap();
        let a = ev.embed(&(&LocalOperator::sigma_plus(0) * &LocalOperator::sz(1))).unwrap();
        let lhs = ev.translate(&ev.evolve(&a, 0.6).unwrap(), 2).unwrap();
        let rhs = ev.evolve(&ev.translate(&a, 2).unwrap(), 0.6).unwrap();
        assert!(lhs.sub(&rhs).max_abs() < 1e-10);
        let shifted = ev.embed(&(&LocalOperator::sigma_plus(2) * &LocalOperator::sz(3))).unwrap();
        assert!(ev.translate(&a, 2).unwrap().sub(&shifted).max_abs() == 0.0);
    }
}
