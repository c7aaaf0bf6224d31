//! Translation-invariant nearest-neighbour open spin chains with strong magnetization conservation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ChainModel, Interaction, LindbladGenerator, Window};
use crate::error::{Error, Result};
use crate::operator::LocalOperator;
use crate::pauli::{Pauli, PauliString};
use crate::special::lr_prefactor;
use crate::states::ProductGibbsState;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

/// Models whose local detailed-balance residual exceeds this are rejected.
pub const CONDITION_TOL: f64 = 1e-9;

/// Coefficients of `a σ⁺σ⁻ + b σ⁻σ⁺ + c σ³⊗1 + d 1⊗σ³ + e σ³σ³` on a bond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
    pub e: C,
}

impl Jump {
    pub fn new(a: C, b: C, c: C, d: C, e: C) -> Self {
        Self { a, b, c, d, e }
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64, e: f64) -> Self {
        let r = |x| C::new(x, 0.0);
        Self::new(r(a), r(b), r(c), r(d), r(e))
    }

    /// The jump operator placed on sites {0, 1}.
    pub fn template(&self) -> LocalOperator {
        let pm = &LocalOperator::sigma_plus(0) * &LocalOperator::sigma_minus(1);
        let mp = &LocalOperator::sigma_minus(0) * &LocalOperator::sigma_plus(1);
        let zz = &LocalOperator::sz(0) * &LocalOperator::sz(1);
        pm.scale(self.a)
            + mp.scale(self.b)
            + LocalOperator::sz(0).scale(self.c)
            + LocalOperator::sz(1).scale(self.d)
            + zz.scale(self.e)
    }

    fn parts(&self) -> [C; 5] {
        [self.a, self.b, self.c, self.d, self.e]
    }

    /// |a|² − |b|²: the incoherent drift carried by this process.
    pub fn drift(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }
}

/// h = α σ⁺σ⁻ + ᾱ σ⁻σ⁺ + β σ³ + γ σ³σ³, plus jumps; serialized as
/// `{alpha: [re, im], beta, gamma, jumps: [[aRe, aIm, ..., eIm], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct LindbladModel {
    pub alpha: C,
    pub beta: f64,
    pub gamma: f64,
    pub jumps: Vec<Jump>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    alpha: [f64; 2],
    beta: f64,
    gamma: f64,
    #[serde(default)]
    jumps: Vec<Vec<f64>>,
}

impl TryFrom<ModelFile> for LindbladModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let jumps = f
            .jumps
            .iter()
            .enumerate()
            .map(|(i, j)| {
                if j.len() != 10 {
                    return Err(Error::ModelInvalid(format!("jump {i} has {} numbers, expected 10", j.len())));
                }
                let z = |k: usize| C::new(j[2 * k], j[2 * k + 1]);
                Ok(Jump::new(z(0), z(1), z(2), z(3), z(4)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { alpha: C::new(f.alpha[0], f.alpha[1]), beta: f.beta, gamma: f.gamma, jumps })
    }
}

impl From<LindbladModel> for ModelFile {
    fn from(m: LindbladModel) -> Self {
        Self {
            alpha: [m.alpha.re, m.alpha.im],
            beta: m.beta,
            gamma: m.gamma,
            jumps: m.jumps.iter().map(|j| j.parts().iter().flat_map(|z| [z.re, z.im]).collect()).collect(),
        }
    }
}

impl LindbladModel {
    pub fn new(alpha: C, beta: f64, gamma: f64, jumps: Vec<Jump>) -> Self {
        Self { alpha, beta, gamma, jumps }
    }

    pub fn interaction(&self) -> Interaction {
        Interaction::hopping(self.alpha, self.beta, self.gamma)
    }

    /// h(0) on sites {0, 1}.
    pub fn hamiltonian_density(&self) -> LocalOperator {
        self.interaction().density(0)
    }

    pub fn jump_templates(&self) -> Vec<LocalOperator> {
        self.jumps.iter().map(Jump::template).collect()
    }

    pub fn is_hamiltonian(&self) -> bool {
        self.jumps.iter().all(|j| j.parts().iter().all(|z| *z == ZERO))
    }

    pub fn chain(&self) -> ChainModel {
        ChainModel { interaction: self.interaction(), jumps: self.jump_templates() }
    }

    pub fn generator(&self, window: Window) -> Result<LindbladGenerator> {
        LindbladGenerator::new(window, &self.interaction(), &self.jump_templates())
    }

    /// Σ a(d̄ − c̄) − Σ b̄(d − c); zero iff local detailed balance holds.
    pub fn condition_residual(&self) -> C {
        self.jumps.iter().map(|j| j.a * (j.d - j.c).conj() - j.b.conj() * (j.d - j.c)).sum()
    }

    /// Σ (|a|² − |b|²).
    pub fn drift(&self) -> f64 {
        self.jumps.iter().map(Jump::drift).sum()
    }

    /// 1 + |α| + |β| + |γ| + Σ |jump parameters|²: the size of ℒ*(σ³) terms, for relative tolerances.
    pub fn scale(&self) -> f64 {
        1.0 + self.alpha.norm()
            + self.beta.abs()
            + self.gamma.abs()
            + self.jumps.iter().flat_map(|j| j.parts()).map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Ṽ = 2(2|α| + |β| + |γ|) + 2 Σ (|a| + |b| + |c| + |d| + |e|).
    pub fn v_tilde(&self) -> f64 {
        2.0 * (2.0 * self.alpha.norm() + self.beta.abs() + self.gamma.abs())
            + 2.0 * self.jumps.iter().flat_map(|j| j.parts()).map(|z| z.norm()).sum::<f64>()
    }

    pub fn lr_velocity(&self) -> f64 {
        lr_prefactor() * self.v_tilde()
    }

    fn is_finite(&self) -> bool {
        let z = |c: &C| c.re.is_finite() && c.im.is_finite();
        z(&self.alpha)
            && self.beta.is_finite()
            && self.gamma.is_finite()
            && self.jumps.iter().all(|j| j.parts().iter().all(z))
    }

    /// Rejects non-finite parameters and models violating local detailed balance.
    pub fn check(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::ModelInvalid("non-finite parameter".into()));
        }
        let r = self.condition_residual().norm();
        if r >= CONDITION_TOL {
            return Err(Error::ModelInvalid(format!("detailed-balance residual {r:e}")));
        }
        Ok(())
    }

    /// Adjusts `d` of the first jump so that the detailed-balance condition holds exactly.
    pub fn enforce_detailed_balance(&mut self) -> Result<()> {
        let Some((first, rest)) = self.jumps.split_first() else {
            return Ok(());
        };
        let r: C = -rest.iter().map(|j| j.a * (j.d - j.c).conj() - j.b.conj() * (j.d - j.c)).sum::<C>();
        // a ū − b̄ u = r with u = x + iy is a real 2×2 system.
        let p = first.a - first.b.conj();
        let q = C::new(0.0, -1.0) * (first.a + first.b.conj());
        let det = p.re * q.im - q.re * p.im;
        if det.abs() < 1e-12 {
            return Err(Error::InvalidArgument("first jump cannot absorb the detailed-balance residual".into()));
        }
        let x = (r.re * q.im - q.re * r.im) / det;
        let y = (p.re * r.im - r.re * p.im) / det;
        self.jumps[0].d = first.c + C::new(x, y);
        Ok(())
    }
}

/// Strong-conservation and detailed-balance diagnostics; failures are carried, not raised.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// ‖[σ³₀ + σ³₁, h(0)]‖.
    pub hamiltonian_commutator: f64,
    /// ‖[σ³₀ + σ³₁, L_i(0)]‖ per jump.
    pub jump_commutators: Vec<f64>,
    pub condition_residual: f64,
    /// Least-squares residual of Σ[L,L†] = o(1) − o(0).
    pub telescope_residual: f64,
    #[serde(skip)]
    pub o: Option<LocalOperator>,
}

impl ValidationReport {
    pub fn strongly_conserving(&self, tol: f64) -> bool {
        self.hamiltonian_commutator <= tol && self.jump_commutators.iter().all(|&c| c <= tol)
    }

    pub fn detailed_balance(&self) -> bool {
        self.o.is_some()
    }

    /// The detailed-balance current o(0), or the failed solve.
    pub fn telescope(&self) -> Result<&LocalOperator> {
        self.o.as_ref().ok_or(Error::UnsolvableTelescope(self.telescope_residual))
    }
}

pub fn validate_model(m: &LindbladModel) -> Result<ValidationReport> {
    if !m.is_finite() {
        return Err(Error::ModelInvalid("non-finite parameter".into()));
    }
    let mb = LocalOperator::magnetization([0, 1]);
    let hamiltonian_commutator = mb.commutator(&m.hamiltonian_density()).operator_norm()?;
    let templates = m.jump_templates();
    let jump_commutators = templates.iter().map(|l| mb.commutator(l).operator_norm()).collect::<Result<Vec<_>>>()?;
    let t: LocalOperator = templates.iter().map(|l| l.commutator(&l.adjoint())).sum();
    let (o, telescope_residual) = solve_telescope(&t);
    let scale = t.hs_norm().max(1.0);
    Ok(ValidationReport {
        hamiltonian_commutator,
        jump_commutators,
        condition_residual: m.condition_residual().norm(),
        telescope_residual,
        o: (telescope_residual <= 1e-10 * scale).then_some(o),
    })
}

/// Least-squares o on {0, 1} with ι₁(o) − o = t; returns (o, coefficient residual).
fn solve_telescope(t: &LocalOperator) -> (LocalOperator, f64) {
    let mut unknowns = Vec::new();
    for p0 in [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)] {
        for p1 in [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)] {
            let pairs: Vec<_> = [(0, p0), (1, p1)].into_iter().filter_map(|(s, p)| p.map(|p| (s, p))).collect();
            if pairs.is_empty() || (p0.is_none() && p1.is_some()) {
                continue;
            }
            unknowns.push(PauliString::from_pairs(pairs).1);
        }
    }
    let columns: Vec<LocalOperator> = unknowns
        .iter()
        .map(|p| {
            let o = LocalOperator::from_string(p.clone(), C::new(1.0, 0.0));
            &o.translate(1) - &o
        })
        .collect();
    let mut rows: Vec<PauliString> =
        columns.iter().flat_map(|c| c.terms().map(|(s, _)| s.clone())).chain(t.terms().map(|(s, _)| s.clone())).collect();
    rows.sort();
    rows.dedup();
    let a = DMatrix::from_fn(rows.len(), columns.len(), |r, k| columns[k].coefficient(&rows[r]));
    let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|s| t.coefficient(s)));
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&rhs, 1e-12).expect("both factors requested");
    let residual = (&a * &x - &rhs).norm();
    let o = LocalOperator::from_terms(unknowns.into_iter().zip(x.iter().copied()));
    (o.prune(1e-14), residual)
}

/// The spin current j(0) on bond {0, 1}, split into coherent and incoherent parts.
#[derive(Debug, Clone, Serialize)]
pub struct CurrentPair {
    pub j_total: LocalOperator,
    pub j_hamiltonian: LocalOperator,
    pub j_lindblad: LocalOperator,
}

/// Splits ℒ*(σ³₀) into the divergence j(−1) − j(0), with j(0) = ℒ*_{bond 0}(σ³₁).
pub fn derive_current(m: &LindbladModel) -> Result<CurrentPair> {
    if !m.is_finite() {
        return Err(Error::ModelInvalid("non-finite parameter".into()));
    }
    let bond = Window::open(0, 2);
    let ham = m.interaction().terms(&bond);
    let jumps: Vec<LocalOperator> = m.jump_templates();
    let coherent = LindbladGenerator::from_terms(bond, ham, vec![])?;
    let incoherent = LindbladGenerator::from_terms(bond, vec![], jumps)?;
    let s0 = LocalOperator::sz(0);
    let s1 = LocalOperator::sz(1);
    // Strong conservation makes the bond generator annihilate σ³₀ + σ³₁.
    let leak = coherent.apply(&(&s0 + &s1))? + incoherent.apply(&(&s0 + &s1))?;
    let leak_norm = leak.hs_norm();
    if leak_norm > 1e-12 * m.scale() {
        return Err(Error::DivergenceSplitFailed(leak_norm));
    }
    let j_hamiltonian = coherent.apply(&s1)?;
    let j_lindblad = incoherent.apply(&s1)?;
    Ok(CurrentPair { j_total: &j_hamiltonian + &j_lindblad, j_hamiltonian, j_lindblad })
}

/// ‖ℒ*(σ³₀) + j(0) − j(−1)‖ with ℒ* on the infinite chain.
pub fn conservation_residual(m: &LindbladModel, pair: &CurrentPair) -> Result<f64> {
    let gen = m.generator(Window::open(-1, 3))?;
    let div = gen.apply(&LocalOperator::sz(0))? + pair.j_total.clone() - pair.j_total.translate(-1);
    div.operator_norm()
}

/// Σ 2|b|² P⁺P⁻ − 2|a|² P⁻P⁺ + (2a(d̄−c̄) + ēa − eb̄) σ⁺σ⁻ + (2ā(d−c) + eā − ēb) σ⁻σ⁺.
pub fn closed_form_lindblad_current(m: &LindbladModel) -> LocalOperator {
    let pud = &LocalOperator::proj_up(0) * &LocalOperator::proj_down(1);
    let pdu = &LocalOperator::proj_down(0) * &LocalOperator::proj_up(1);
    let pm = &LocalOperator::sigma_plus(0) * &LocalOperator::sigma_minus(1);
    let mp = &LocalOperator::sigma_minus(0) * &LocalOperator::sigma_plus(1);
    m.jumps
        .iter()
        .map(|j| {
            let u = j.d - j.c;
            pud.scale_re(2.0 * j.b.norm_sqr())
                + pdu.scale_re(-2.0 * j.a.norm_sqr())
                + pm.scale(2.0 * j.a * u.conj() + j.e.conj() * j.a - j.e * j.b.conj())
                + mp.scale(2.0 * j.a.conj() * u + j.e * j.a.conj() - j.e.conj() * j.b)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub mu: f64,
    /// 𝗌 = tanh μ.
    pub s: f64,
    /// 𝗃(𝗌) = Σ(|b|² − |a|²)(1 − 𝗌²)/2.
    pub j_avg: f64,
    /// ω_μ(j(0)) by direct evaluation, the oracle for `j_avg`.
    pub j_trace: f64,
    pub v: f64,
    pub v_prime: f64,
    pub chi: f64,
    pub v_tilde: f64,
    pub v_lr: f64,
    #[serde(rename = "L_lower")]
    pub l_lower: f64,
}

pub fn equilibrium_report(m: &LindbladModel, mu: f64) -> Result<EquilibriumReport> {
    m.check()?;
    if !mu.is_finite() {
        return Err(Error::ModelInvalid(format!("chemical potential {mu}")));
    }
    let s = mu.tanh();
    let drift = m.drift();
    let j_avg = -drift * (1.0 - s * s) / 2.0;
    let pair = derive_current(m)?;
    let j_trace = ProductGibbsState::new(mu).expect(&pair.j_total);
    let chi = 1.0 / mu.cosh().powi(2);
    let tol = 1e-12 * m.scale();
    if (j_trace.re - j_avg).abs() > tol || j_trace.im.abs() > tol {
        return Err(Error::ModelInvalid(format!("ω(j) = {j_trace} disagrees with 𝗃 = {j_avg}")));
    }
    // 𝗃'' = Σ(|a|² − |b|²) = v′.
    let v_prime = drift;
    let v_lr = m.lr_velocity();
    let l_lower = if v_lr > 0.0 { (chi * v_prime).powi(2) / (8.0 * v_lr) } else { 0.0 };
    Ok(EquilibriumReport {
        mu,
        s,
        j_avg,
        j_trace: j_trace.re,
        v: drift * s,
        v_prime,
        chi,
        v_tilde: m.v_tilde(),
        v_lr,
        l_lower,
    })
}

/// Trace norm of ℒ_Schr(e^{μM}/Z) on a periodic ring of `n` sites.
pub fn gibbs_stationarity_residual(m: &LindbladModel, mu: f64, n: usize) -> Result<f64> {
    let limit = crate::dynamics::SchrodingerGenerator::LIMIT;
    if n > limit {
        return Err(Error::RingTooLarge { sites: n, limit });
    }
    if n < 2 {
        return Err(Error::InvalidArgument("ring needs at least two sites".into()));
    }
    let schr = m.generator(Window::ring(n))?.schrodinger()?;
    let weights = ProductGibbsState::new(mu).weights(n);
    let rho = DMatrix::from_diagonal(&DVector::from_iterator(weights.len(), weights.iter().map(|&w| C::new(w, 0.0))));
    let out = schr.apply(&rho);
    Ok(out.singular_values().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn sample() -> LindbladModel {
        let mut m = LindbladModel::new(
            c(0.7, -0.4),
            0.3,
            -0.5,
            vec![
                Jump::new(c(0.9, 0.1), c(0.2, -0.3), c(0.1, 0.4), c(0.0, 0.0), c(-0.2, 0.1)),
                Jump::new(c(0.1, 0.0), c(0.5, 0.5), c(0.3, 0.0), c(-0.1, 0.2), c(0.0, 0.3)),
            ],
        );
        m.enforce_detailed_balance().unwrap();
        m
    }

    #[test]
    fn json_round_trip() {
        let m = sample();
        let text = serde_json::to_string(&m).unwrap();
        let back: LindbladModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"alpha":[1,0],"beta":0,"gamma":0,"jumps":[[1,0,0]]}"#;
        assert!(serde_json::from_str::<LindbladModel>(bad).is_err());
    }

    #[test]
    fn enforced_condition_vanishes() {
        let m = sample();
        assert!(m.condition_residual().norm() < 1e-15);
        let r = validate_model(&m).unwrap();
        assert!(r.strongly_conserving(1e-12));
        let o = r.telescope().unwrap();
        let t: LocalOperator = m.jump_templates().iter().map(|l| l.commutator(&l.adjoint())).sum();
        assert!((&o.translate(1) - o).max_abs_diff(&t) < 1e-12);
    }

    #[test]
    fn pure_hopping_jump_is_balanced() {
        let m = LindbladModel::new(c(0.0, 0.0), 0.0, 0.0, vec![Jump::real(1.0, 0.0, 0.0, 0.0, 0.0)]);
        let r = validate_model(&m).unwrap();
        assert_eq!(r.condition_residual, 0.0);
        assert!(r.detailed_balance());
    }

    #[test]
    fn violating_model_has_no_telescope() {
        let m = LindbladModel::new(c(0.0, 0.0), 0.0, 0.0, vec![Jump::real(1.0, 0.0, 0.5, 0.0, 0.0)]);
        let r = validate_model(&m).unwrap();
        assert!(r.condition_residual > 0.1);
        assert!(matches!(r.telescope(), Err(Error::UnsolvableTelescope(_))));
        assert!(matches!(equilibrium_report(&m, 0.0), Err(Error::ModelInvalid(_))));
    }

    #[test]
    fn currents_satisfy_conservation_and_closed_form() {
        let m = sample();
        let pair = derive_current(&m).unwrap();
        assert!(conservation_residual(&m, &pair).unwrap() < 1e-12);
        assert!(pair.j_lindblad.max_abs_diff(&closed_form_lindblad_current(&m)) < 1e-12);
    }

    #[test]
    fn closed_form_current_needs_detailed_balance() {
        let mut m = sample();
        m.jumps[0].d += c(0.3, -0.2);
        let pair = derive_current(&m).unwrap();
        let cf = closed_form_lindblad_current(&m);
        let alt = CurrentPair { j_total: &pair.j_hamiltonian + &cf, j_hamiltonian: pair.j_hamiltonian.clone(), j_lindblad: cf };
        assert!(conservation_residual(&m, &pair).unwrap() < 1e-12);
        assert!(conservation_residual(&m, &alt).unwrap() > 1e-3);
    }

    #[test]
    fn hopping_jump_current_has_single_term() {
        let m = LindbladModel::new(c(0.0, 0.0), 0.0, 0.0, vec![Jump::real(1.0, 0.0, 0.0, 0.0, 0.0)]);
        let j = derive_current(&m).unwrap().j_lindblad;
        let expect = (&LocalOperator::proj_down(0) * &LocalOperator::proj_up(1)).scale_re(-2.0);
        assert!(j.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn hamiltonian_current_vanishes_in_equilibrium() {
        let m = LindbladModel::new(c(0.8, 0.3), 0.4, 1.1, vec![]);
        let pair = derive_current(&m).unwrap();
        for mu in [0.0, 0.7, -1.3] {
            assert!(ProductGibbsState::new(mu).expect(&pair.j_total).norm() < 1e-15);
        }
    }

    #[test]
    fn lower_bound_for_hopping_jump() {
        let m = LindbladModel::new(c(0.0, 0.0), 0.0, 0.0, vec![Jump::real(1.0, 0.0, 0.0, 0.0, 0.0)]);
        let r = equilibrium_report(&m, 0.0).unwrap();
        let expect = 1.0 / (64.0 * std::f64::consts::E * crate::special::ZETA2);
        assert!((r.l_lower - expect).abs() < 1e-15);
        assert!((r.l_lower - 3.4945e-3).abs() < 1e-7);
        assert_eq!((r.s, r.chi, r.v), (0.0, 1.0, 0.0));
    }

    #[test]
    fn stationarity_on_small_ring() {
        let m = sample();
        for mu in [0.0, 0.5, 1.0] {
            assert!(gibbs_stationarity_residual(&m, mu, 4).unwrap() < 1e-10);
        }
        assert!(matches!(gibbs_stationarity_residual(&m, 0.5, 8), Err(Error::RingTooLarge { .. })));
    }
}
