use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::LocalOperator;
use crate::pauli::{Pauli, PauliString, Site};

use super::interaction::Interaction;
use super::window::Window;

type C = Complex64;
const I: C = C::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// ℒ*(A) = i[H,A] + Σ L†AL − ½{L†L, A}
    Forward,
    /// ℒ(A) = −i[H,A] + Σ LAL† − ½{LL†, A}
    Backward,
}

#[derive(Debug, Clone)]
pub struct PlacedJump {
    pub l: LocalOperator,
    pub l_dag: LocalOperator,
    pub l_dag_l: LocalOperator,
}

impl PlacedJump {
    fn new(l: LocalOperator) -> Self {
        let l_dag = l.adjoint();
        let l_dag_l = l_dag.multiply(&l);
        Self { l, l_dag, l_dag_l }
    }
}

/// Heisenberg-picture Lindbladian on a finite window, built from local terms.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    window: Window,
    ham: Vec<LocalOperator>,
    jumps: Vec<PlacedJump>,
    direction: Direction,
    tables: OnceLock<ActionTables>,
}

/// Generator terms grouped by support, with the image of every Pauli string on that support.
#[derive(Debug, Clone, Default)]
struct ActionTables {
    groups: Vec<(Vec<Site>, Vec<LocalOperator>)>,
    by_site: HashMap<Site, Vec<usize>>,
}

fn strings_on(support: &[Site]) -> Vec<PauliString> {
    let mut out = vec![PauliString::identity()];
    for &s in support {
        let mut next = Vec::with_capacity(out.len() * 4);
        for p in &out {
            next.push(p.clone());
            for l in Pauli::ALL {
                next.push(p.mul(&PauliString::single(s, l)).1);
            }
        }
        out = next;
    }
    out
}

fn letter_code(p: Option<Pauli>) -> usize {
    match p {
        None => 0,
        Some(Pauli::X) => 1,
        Some(Pauli::Y) => 2,
        Some(Pauli::Z) => 3,
    }
}

fn touches(a: &[i64], b: &[i64]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

impl LindbladGenerator {
    /// Forward generator from a nearest-neighbour interaction and two-site jump templates on {0,1}.
    pub fn new(window: Window, interaction: &Interaction, jump_templates: &[LocalOperator]) -> Result<Self> {
        if window.len < 2 && !jump_templates.is_empty() {
            return Err(Error::InvalidArgument("two-site jumps need a window of at least two sites".into()));
        }
        let ham = interaction.terms(&window);
        let mut jumps = Vec::new();
        for t in jump_templates {
            if t.is_zero() {
                continue;
            }
            for x in window.bond_starts() {
                jumps.push(PlacedJump::new(window.place(t, x)));
            }
        }
        Ok(Self { window, ham, jumps, direction: Direction::Forward, tables: OnceLock::new() })
    }

    /// Generator with explicitly placed terms (every support must lie in the window).
    pub fn from_terms(window: Window, ham: Vec<LocalOperator>, jumps: Vec<LocalOperator>) -> Result<Self> {
        for t in ham.iter().chain(&jumps) {
            window.check(t)?;
        }
        for h in &ham {
            let residual = h.max_abs_diff(&h.adjoint());
            if residual > 1e-12 {
                return Err(Error::NotHermitian { residual });
            }
        }
        Ok(Self {
            window,
            ham,
            jumps: jumps.into_iter().filter(|l| !l.is_zero()).map(PlacedJump::new).collect(),
            direction: Direction::Forward,
            tables: OnceLock::new(),
        })
    }

    pub fn hamiltonian_only(window: Window, interaction: &Interaction) -> Self {
        Self {
            window,
            ham: interaction.terms(&window),
            jumps: Vec::new(),
            direction: Direction::Forward,
            tables: OnceLock::new(),
        }
    }

    /// The backward generator ℒ: H → −H and L → L†, built as a generator of its own.
    pub fn backward(&self) -> Self {
        Self {
            window: self.window,
            ham: self.ham.iter().map(|h| -h).collect(),
            jumps: self.jumps.iter().map(|j| PlacedJump::new(j.l_dag.clone())).collect(),
            direction: match self.direction {
                Direction::Forward => Direction::Backward,
                Direction::Backward => Direction::Forward,
            },
            tables: OnceLock::new(),
        }
    }

    pub fn with_direction(&self, d: Direction) -> Self {
        if d == self.direction {
            self.clone()
        } else {
            self.backward()
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Hamiltonian terms as used by this generator (sign-flipped for the backward direction).
    pub fn hamiltonian_terms(&self) -> &[LocalOperator] {
        &self.ham
    }

    pub fn jumps(&self) -> &[PlacedJump] {
        &self.jumps
    }

    pub fn hamiltonian(&self) -> LocalOperator {
        self.ham.iter().cloned().sum()
    }

    pub fn is_hamiltonian(&self) -> bool {
        self.jumps.is_empty()
    }

    fn tables(&self) -> &ActionTables {
        self.tables.get_or_init(|| {
            let mut grouped: BTreeMap<Vec<Site>, (Vec<&LocalOperator>, Vec<&PlacedJump>)> = BTreeMap::new();
            for h in &self.ham {
                grouped.entry(h.support().to_vec()).or_default().0.push(h);
            }
            for j in &self.jumps {
                let mut supp: Vec<Site> = j.l.support().iter().chain(j.l_dag_l.support()).copied().collect();
                supp.sort_unstable();
                supp.dedup();
                grouped.entry(supp).or_default().1.push(j);
            }
            let mut t = ActionTables::default();
            for (supp, (hs, js)) in grouped {
                if supp.is_empty() {
                    continue;
                }
                let images = strings_on(&supp)
                    .into_iter()
                    .map(|p| {
                        let a = LocalOperator::from_string(p, C::new(1.0, 0.0));
                        let mut parts: Vec<LocalOperator> = hs.iter().map(|h| h.commutator(&a).scale(I)).collect();
                        for j in &js {
                            parts.push(j.l_dag.multiply(&a).multiply(&j.l));
                            parts.push(j.l_dag_l.anticommutator(&a).scale_re(-0.5));
                        }
                        parts.into_iter().sum()
                    })
                    .collect();
                let idx = t.groups.len();
                for &s in &supp {
                    t.by_site.entry(s).or_default().push(idx);
                }
                t.groups.push((supp, images));
            }
            t
        })
    }

    /// Applies the generator; only terms overlapping supp(A) contribute.
    pub fn apply(&self, a: &LocalOperator) -> Result<LocalOperator> {
        self.window.check(a)?;
        let tables = self.tables();
        let mut acc: HashMap<PauliString, C> = HashMap::new();
        let mut touched: Vec<usize> = Vec::new();
        for (p, &c) in a.terms() {
            touched.clear();
            for s in p.sites() {
                if let Some(g) = tables.by_site.get(&s) {
                    touched.extend_from_slice(g);
                }
            }
            touched.sort_unstable();
            touched.dedup();
            for &g in &touched {
                let (supp, images) = &tables.groups[g];
                let code = supp.iter().fold(0usize, |acc, &s| acc * 4 + letter_code(p.letter_at(s)));
                let rest: Vec<(Site, Pauli)> =
                    p.letters().iter().copied().filter(|(s, _)| supp.binary_search(s).is_err()).collect();
                for (q, &v) in images[code].terms() {
                    let (_, out) = PauliString::from_pairs(rest.iter().copied().chain(q.letters().iter().copied()));
                    *acc.entry(out).or_insert(C::new(0.0, 0.0)) += c * v;
                }
            }
        }
        Ok(LocalOperator::from_terms(acc))
    }

    /// Term-by-term evaluation of the generator without lookup tables.
    pub fn apply_direct(&self, a: &LocalOperator) -> Result<LocalOperator> {
        self.window.check(a)?;
        let supp = a.support();
        let mut parts = Vec::new();
        for h in &self.ham {
            if touches(h.support(), supp) {
                parts.push(h.commutator(a).scale(I));
            }
        }
        for j in &self.jumps {
            if touches(j.l.support(), supp) {
                parts.push(j.l_dag.multiply(a).multiply(&j.l));
                parts.push(j.l_dag_l.anticommutator(a).scale_re(-0.5));
            }
        }
        Ok(parts.into_iter().sum())
    }

    /// Upper bound on the generator norm: 2Σ‖h‖ + 2Σ‖L‖², with ‖·‖ bounded by coefficient ℓ1 norms.
    pub fn norm_bound(&self) -> f64 {
        2.0 * self.ham.iter().map(LocalOperator::l1_norm).sum::<f64>()
            + 2.0 * self.jumps.iter().map(|j| j.l.l1_norm().powi(2)).sum::<f64>()
    }

    /// Dense Schrödinger-picture generator, assembled independently from full matrices.
    pub fn schrodinger(&self) -> Result<SchrodingerGenerator> {
        let sites = self.window.sites();
        if sites.len() > SchrodingerGenerator::LIMIT {
            return Err(Error::RingTooLarge { sites: sites.len(), limit: SchrodingerGenerator::LIMIT });
        }
        let forward = self.with_direction(Direction::Forward);
        let h = forward.hamiltonian().to_dense(&sites)?;
        let ls = forward.jumps.iter().map(|j| j.l.to_dense(&sites)).collect::<Result<Vec<_>>>()?;
        Ok(SchrodingerGenerator { h, ls })
    }
}

/// ℒ_Schr(ρ) = −i[H,ρ] + Σ LρL† − ½{L†L, ρ} on full matrices.
#[derive(Debug, Clone)]
pub struct SchrodingerGenerator {
    pub h: DMatrix<C>,
    pub ls: Vec<DMatrix<C>>,
}

impl SchrodingerGenerator {
    pub const LIMIT: usize = 7;

    pub fn apply(&self, rho: &DMatrix<C>) -> DMatrix<C> {
        let mut out = (&self.h * rho - rho * &self.h) * (-I);
        for l in &self.ls {
            let ld = l.adjoint();
            let ldl = &ld * l;
            out += l * rho * &ld - (&ldl * rho + rho * &ldl) * C::new(0.5, 0.0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn dephasing(c0: C) -> LindbladGenerator {
        LindbladGenerator::from_terms(Window::open(0, 1), vec![], vec![LocalOperator::sz(0).scale(c0)]).unwrap()
    }

    #[test]
    fn dephasing_damps_sigma_plus() {
        let c0 = c(0.6, -0.3);
        let g = dephasing(c0);
        let out = g.apply(&LocalOperator::sigma_plus(0)).unwrap();
        let expect = LocalOperator::sigma_plus(0).scale_re(-2.0 * c0.norm_sqr());
        assert!(out.max_abs_diff(&expect) < 1e-15);
        assert!(g.apply(&LocalOperator::sz(0)).unwrap().is_zero());
    }

    #[test]
    fn generator_is_unital_both_directions() {
        let w = Window::ring(4);
        let l = (&LocalOperator::sigma_plus(0) * &LocalOperator::sigma_minus(1)).scale(c(0.4, 0.2))
            + LocalOperator::sz(1).scale(c(0.1, 0.0));
        let g = LindbladGenerator::new(w, &Interaction::hopping(c(1.0, 0.5), 0.2, 0.3), &[l]).unwrap();
        assert!(g.apply(&LocalOperator::identity()).unwrap().l1_norm() < 1e-12);
        assert!(g.backward().apply(&LocalOperator::identity()).unwrap().l1_norm() < 1e-12);
        assert!(g.apply(&LocalOperator::magnetization(0..4)).unwrap().l1_norm() < 1e-12);
    }

    #[test]
    fn support_outside_window_is_rejected() {
        let g = dephasing(c(1.0, 0.0));
        assert!(matches!(g.apply(&LocalOperator::sz(3)), Err(Error::SupportOutsideWindow { .. })));
    }

    #[test]
    fn table_action_matches_direct_action() {
        let w = Window::ring(5);
        let l1 = (&LocalOperator::sigma_plus(0) * &LocalOperator::sigma_minus(1)).scale(c(0.4, 0.2))
            + (&LocalOperator::sz(0) * &LocalOperator::sz(1)).scale(c(0.0, 0.3));
        let l2 = LocalOperator::sz(1).scale(c(0.7, 0.0));
        let g = LindbladGenerator::new(w, &Interaction::hopping(c(0.3, 0.8), 0.5, -0.2), &[l1, l2]).unwrap();
        let a = &(&LocalOperator::sx(0) * &LocalOperator::sy(2)) * &LocalOperator::sigma_plus(4)
            + LocalOperator::sz(3).scale(c(0.1, 0.9))
            + LocalOperator::identity();
        for gen in [g.clone(), g.backward()] {
            let fast = gen.apply(&a).unwrap();
            let slow = gen.apply_direct(&a).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-14);
        }
    }

    #[test]
    fn backward_of_backward_is_forward() {
        let w = Window::open(0, 3);
        let l = (&LocalOperator::sigma_plus(0) * &LocalOperator::sigma_minus(1)).scale(c(0.4, 0.2));
        let g = LindbladGenerator::new(w, &Interaction::hopping(c(0.3, 0.1), 0.0, 0.0), &[l]).unwrap();
        let a = &LocalOperator::sx(1) * &LocalOperator::sz(2);
        let once = g.apply(&a).unwrap();
        let twice = g.backward().backward().apply(&a).unwrap();
        assert!(once.max_abs_diff(&twice) < 1e-15);
        assert_eq!(g.backward().direction(), Direction::Backward);
    }
}
