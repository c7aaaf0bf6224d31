//! Set partitions, classical and free cumulants, and cumulant clustering scans.

mod partition;
mod scan;

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dense::BlockOp;
use crate::error::{Error, Result};
use crate::operator::LocalOperator;
use crate::states::QuantumState;

pub use partition::{check_arity, enumerate, mobius_to_top, Lattice, Partition, MAX_ARITY};
pub use scan::{
    cumulant_decay_scan, cumulant_decay_scan_cached, DecayRow, DecayTable, EvolutionCache, ScanPlan, NOISE_FLOOR,
};

type C = Complex64;
const ONE: C = C::new(1.0, 0.0);
const ZERO: C = C::new(0.0, 0.0);

/// Joint moments ω(A_{i_1} ⋯ A_{i_k}) of an ordered tuple, restricted order-preservingly.
pub trait MomentFunctional: Sync {
    fn arity(&self) -> usize;
    /// `slots` are strictly increasing 0-based positions.
    fn moment(&self, slots: &[usize]) -> Result<C>;
}

fn slots_of(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

/// Values indexed by subsets of {0..n-1} (bitmasks); missing entries are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTable {
    n: usize,
    values: Vec<Option<C>>,
}

impl SubsetTable {
    pub fn empty(n: usize) -> Result<Self> {
        check_arity(n)?;
        let mut values = vec![None; 1 << n];
        values[0] = Some(ONE);
        Ok(Self { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(&[usize]) -> C) -> Result<Self> {
        let mut t = Self::empty(n)?;
        for mask in 1..1u32 << n {
            t.values[mask as usize] = Some(f(&slots_of(mask)));
        }
        Ok(t)
    }

    /// Every moment of `m`, evaluated in parallel.
    pub fn from_functional(m: &dyn MomentFunctional) -> Result<Self> {
        let n = m.arity();
        let mut t = Self::empty(n)?;
        let vals: Vec<C> =
            (1..1u32 << n).into_par_iter().map(|mask| m.moment(&slots_of(mask))).collect::<Result<_>>()?;
        for (mask, v) in (1..).zip(vals) {
            t.values[mask] = Some(v);
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn full_mask(&self) -> u32 {
        (1u32 << self.n) - 1
    }

    pub fn get(&self, mask: u32) -> Option<C> {
        self.values.get(mask as usize).copied().flatten()
    }

    pub fn set(&mut self, mask: u32, v: C) {
        self.values[mask as usize] = Some(v);
    }

    /// Value on the whole tuple.
    pub fn top(&self) -> Option<C> {
        self.get(self.full_mask())
    }

    fn require(&self, mask: u32) -> Result<C> {
        self.get(mask).ok_or(Error::IncompleteTable(mask.count_ones() as usize))
    }
}

impl MomentFunctional for SubsetTable {
    fn arity(&self) -> usize {
        self.n
    }

    fn moment(&self, slots: &[usize]) -> Result<C> {
        self.require(slots.iter().fold(0, |m, &s| m | 1 << s))
    }
}

/// Partitions of every size up to `n`, memoized.
struct Lattices {
    kind: Lattice,
    by_size: HashMap<usize, Vec<Partition>>,
}

impl Lattices {
    fn new(kind: Lattice) -> Self {
        Self { kind, by_size: HashMap::new() }
    }

    fn get(&mut self, m: usize) -> Result<&[Partition]> {
        if !self.by_size.contains_key(&m) {
            self.by_size.insert(m, enumerate(m, self.kind)?);
        }
        Ok(&self.by_size[&m])
    }
}

/// Block masks of `pi` relabelled onto the slots of `mask`.
fn embed_blocks(pi: &Partition, mask: u32) -> Vec<u32> {
    let slots = slots_of(mask);
    pi.blocks().iter().map(|b| b.iter().fold(0u32, |m, &e| m | 1 << slots[e - 1])).collect()
}

/// Cumulants on every subset by κ(V) = ω(V) − Σ_{π ≠ 1̂} Π_B κ(B).
pub fn cumulant_table(moments: &SubsetTable, kind: Lattice) -> Result<SubsetTable> {
    let n = moments.n();
    let mut lat = Lattices::new(kind);
    let mut out = SubsetTable::empty(n)?;
    let mut masks: Vec<u32> = (1..1u32 << n).collect();
    masks.sort_by_key(|m| m.count_ones());
    for mask in masks {
        let mut acc = moments.require(mask)?;
        for pi in lat.get(mask.count_ones() as usize)? {
            if pi.len() < 2 {
                continue;
            }
            let prod: C = embed_blocks(pi, mask).iter().map(|&b| out.get(b).expect("smaller subsets first")).product();
            acc -= prod;
        }
        out.set(mask, acc);
    }
    Ok(out)
}

/// Classical cumulant c_n = Σ_{π∈P(n)} μ(π, 1̂) Π_B ω(B).
pub fn classical_cumulant(m: &dyn MomentFunctional) -> Result<C> {
    let n = m.arity();
    check_arity(n)?;
    let table = SubsetTable::from_functional(m)?;
    let mut acc = ZERO;
    for pi in enumerate(n, Lattice::All)? {
        let prod: C = (0..pi.len()).map(|i| table.get(pi.block_mask(i)).expect("complete")).product();
        acc += prod * mobius_to_top(&pi) as f64;
    }
    Ok(acc)
}

/// Free cumulant κ_n, solved from ω_n = Σ_{π∈NC(n)} κ_π.
pub fn free_cumulant(m: &dyn MomentFunctional) -> Result<C> {
    check_arity(m.arity())?;
    let table = SubsetTable::from_functional(m)?;
    Ok(cumulant_table(&table, Lattice::NonCrossing)?.top().expect("complete"))
}

/// ω_n = Σ_π Π_B κ(B) over the chosen lattice.
pub fn cumulants_to_moments(kappa: &SubsetTable, kind: Lattice) -> Result<C> {
    let n = kappa.n();
    let mut acc = ZERO;
    for pi in enumerate(n, kind)? {
        let mut prod = ONE;
        for i in 0..pi.len() {
            prod *= kappa.require(pi.block_mask(i))?;
        }
        acc += prod;
    }
    Ok(acc)
}

/// Moments ω(A_{i_1}⋯A_{i_k}) of local operators in a state.
pub struct StateMoments<'a> {
    pub state: &'a QuantumState,
    pub ops: Vec<LocalOperator>,
}

impl MomentFunctional for StateMoments<'_> {
    fn arity(&self) -> usize {
        self.ops.len()
    }

    fn moment(&self, slots: &[usize]) -> Result<C> {
        let ops: Vec<&LocalOperator> = slots.iter().map(|&s| &self.ops[s]).collect();
        self.state.expect_product(&ops)
    }
}

/// Moments Σ_s w_s ⟨s|O_{i_1}⋯O_{i_k}|s⟩ of window operators in a diagonal state.
pub struct DenseMoments<'a> {
    pub ops: Vec<BlockOp>,
    pub weights: &'a [f64],
}

impl MomentFunctional for DenseMoments<'_> {
    fn arity(&self) -> usize {
        self.ops.len()
    }

    fn moment(&self, slots: &[usize]) -> Result<C> {
        Ok(match slots {
            [] => self.weights.iter().sum::<f64>().into(),
            [a] => self.ops[*a].weighted_trace(self.weights),
            [a, b] => self.ops[*a].weighted_trace_product(&self.ops[*b], self.weights),
            [first, mid @ .., last] => {
                let mut p = self.ops[*first].clone();
                for &s in mid {
                    p = p.matmul(&self.ops[s]);
                }
                p.weighted_trace_product(&self.ops[*last], self.weights)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::ProductGibbsState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_table(n: usize, rng: &mut ChaCha8Rng) -> SubsetTable {
        SubsetTable::from_fn(n, |_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap()
    }

    // Moments from cumulants by double summation: ω(V) = Σ_{π of V} Π κ(B).
    fn moments_of(kappa: &SubsetTable, kind: Lattice) -> SubsetTable {
        SubsetTable::from_fn(kappa.n(), |slots| {
            let mask = slots.iter().fold(0u32, |m, &s| m | 1 << s);
            enumerate(slots.len(), kind)
                .unwrap()
                .iter()
                .map(|pi| embed_blocks(pi, mask).iter().map(|&b| kappa.get(b).unwrap()).product::<C>())
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn round_trip_both_lattices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=6 {
            for kind in [Lattice::All, Lattice::NonCrossing] {
                let w = random_table(n, &mut rng);
                let kappa = cumulant_table(&w, kind).unwrap();
                let back = moments_of(&kappa, kind);
                for mask in 1..1u32 << n {
                    assert!((back.get(mask).unwrap() - w.get(mask).unwrap()).norm() < 1e-12);
                }
                assert!((cumulants_to_moments(&kappa, kind).unwrap() - w.top().unwrap()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mobius_route_matches_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=6 {
            let w = random_table(n, &mut rng);
            let rec = cumulant_table(&w, Lattice::All).unwrap().top().unwrap();
            assert!((classical_cumulant(&w).unwrap() - rec).norm() < 1e-12);
        }
    }

    #[test]
    fn low_orders_agree_and_fourth_differs_by_crossing_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=3 {
            let w = random_table(n, &mut rng);
            assert!((classical_cumulant(&w).unwrap() - free_cumulant(&w).unwrap()).norm() < 1e-12);
        }
        let w = random_table(4, &mut rng);
        let c = cumulant_table(&w, Lattice::All).unwrap();
        let k = free_cumulant(&w).unwrap();
        // Lower cumulants coincide, so κ₄ − c₄ is the crossing term c₂(1,3)c₂(2,4).
        let crossing = c.get(0b0101).unwrap() * c.get(0b1010).unwrap();
        assert!((k - c.top().unwrap() - crossing).norm() < 1e-12);
    }

    #[test]
    fn explicit_low_order_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_table(3, &mut rng);
        let m = |s: &[usize]| w.moment(s).unwrap();
        let c2 = m(&[0, 1]) - m(&[0]) * m(&[1]);
        let sub = SubsetTable::from_fn(2, |s| m(s)).unwrap();
        assert!((classical_cumulant(&sub).unwrap() - c2).norm() < 1e-14);
        let c3 = m(&[0, 1, 2]) - m(&[0]) * m(&[1, 2]) - m(&[1]) * m(&[0, 2]) - m(&[2]) * m(&[0, 1])
            + m(&[0]) * m(&[1]) * m(&[2]) * 2.0;
        assert!((classical_cumulant(&w).unwrap() - c3).norm() < 1e-14);
        let kappa = SubsetTable::from_fn(4, |s| if s.len() == 1 { C::new(0.7, 0.0) } else { ZERO }).unwrap();
        assert!((cumulants_to_moments(&kappa, Lattice::All).unwrap() - 0.7f64.powi(4)).norm() < 1e-15);
        let mut partial = SubsetTable::empty(2).unwrap();
        partial.set(1, ONE);
        assert!(matches!(cumulants_to_moments(&partial, Lattice::All), Err(Error::IncompleteTable(1))));
    }

    #[test]
    fn disjoint_operators_have_vanishing_mixed_cumulants() {
        let state = QuantumState::from(ProductGibbsState::new(0.4));
        let a = &LocalOperator::sx(0) + &(&LocalOperator::sz(0) * &LocalOperator::sz(1));
        let b = LocalOperator::sigma_plus(1) + LocalOperator::sz(0);
        let far = LocalOperator::sz(5) + LocalOperator::sx(6).scale_re(0.3);
        let m = StateMoments { state: &state, ops: vec![a.clone(), far.clone(), b.clone(), a.adjoint()] };
        assert!(classical_cumulant(&m).unwrap().norm() < 1e-12);
        let with_identity = StateMoments { state: &state, ops: vec![a, LocalOperator::identity(), b] };
        assert!(classical_cumulant(&with_identity).unwrap().norm() < 1e-15);
    }
}
