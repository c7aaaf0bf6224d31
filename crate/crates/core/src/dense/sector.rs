//! Block-sparse operators on a qubit window, organised by a sector decomposition of the
//! computational basis (either a single sector or fixed magnetization).

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::linalg::{self, gemm};
use crate::error::{Error, Result};
use crate::operator::{site_positions, LocalOperator};
use crate::pauli::Site;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Partition of the `2^n` basis states into sectors with a local index inside each.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    n: usize,
    sector_of: Vec<u32>,
    local: Vec<u32>,
    states: Vec<Vec<usize>>,
    by_magnetization: bool,
}

impl Basis {
    /// One sector holding every basis state in natural order.
    pub fn full(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            n,
            sector_of: vec![0; dim],
            local: (0..dim as u32).collect(),
            states: vec![(0..dim).collect()],
            by_magnetization: false,
        }
    }

    /// Sectors of fixed down-spin count (popcount), states ascending within each.
    pub fn magnetization(n: usize) -> Self {
        let dim = 1usize << n;
        let mut states = vec![Vec::new(); n + 1];
        let mut sector_of = vec![0; dim];
        let mut local = vec![0; dim];
        for s in 0..dim {
            let k = s.count_ones() as usize;
            sector_of[s] = k as u32;
            local[s] = states[k].len() as u32;
            states[k].push(s);
        }
        Self { n, sector_of, local, states, by_magnetization: true }
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn n_sectors(&self) -> usize {
        self.states.len()
    }

    pub fn sector_dim(&self, s: usize) -> usize {
        self.states[s].len()
    }

    pub fn states(&self, s: usize) -> &[usize] {
        &self.states[s]
    }

    pub fn is_magnetization(&self) -> bool {
        self.by_magnetization
    }

    #[inline]
    pub fn locate(&self, state: usize) -> (usize, usize) {
        (self.sector_of[state] as usize, self.local[state] as usize)
    }
}

/// Block-diagonal sparse matrix (one CSR block per sector).
#[derive(Debug, Clone)]
pub struct SectorSparse {
    pub blocks: Vec<Csr>,
}

/// Square CSR matrix; `diag` is set when every stored entry sits on the diagonal.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<C>,
    pub diag: Option<Vec<C>>,
}

impl Csr {
    fn from_triplets(n: usize, mut t: Vec<(usize, usize, C)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<C> = Vec::with_capacity(t.len());
        let mut rows = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            if let (Some(&lr), Some(&lc)) = (rows.last(), indices.last()) {
                if lr == r && lc == c {
                    *data.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            indices.push(c);
            data.push(v);
        }
        // Drop entries that cancelled exactly.
        let keep: Vec<usize> = (0..data.len()).filter(|&i| data[i] != ZERO).collect();
        let rows: Vec<usize> = keep.iter().map(|&i| rows[i]).collect();
        let indices: Vec<usize> = keep.iter().map(|&i| indices[i]).collect();
        let data: Vec<C> = keep.iter().map(|&i| data[i]).collect();
        for &r in &rows {
            indptr[r + 1] += 1;
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        let is_diag = rows.iter().zip(&indices).all(|(r, c)| r == c);
        let diag = is_diag.then(|| {
            let mut d = vec![ZERO; n];
            for (&r, &v) in rows.iter().zip(&data) {
                d[r] = v;
            }
            d
        });
        Self { n, indptr, indices, data, diag }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn adjoint(&self) -> Csr {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                t.push((self.indices[k], r, self.data[k].conj()));
            }
        }
        Csr::from_triplets(self.n, t)
    }

    pub fn to_dense(&self) -> DMatrix<C> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                m[(r, self.indices[k])] += self.data[k];
            }
        }
        m
    }

    /// `y = S x`.
    pub fn matvec(&self, x: &[C], y: &mut [C]) {
        for r in 0..self.n {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    /// `out += alpha · S · o`.
    pub fn left_mul_acc(&self, alpha: C, o: &DMatrix<C>, out: &mut DMatrix<C>) {
        let ncols = o.ncols();
        if let Some(d) = &self.diag {
            for c in 0..ncols {
                let src = o.column(c);
                let mut dst = out.column_mut(c);
                for r in 0..self.n {
                    dst[r] += alpha * d[r] * src[r];
                }
            }
            return;
        }
        for c in 0..ncols {
            let src = o.column(c);
            let src = src.as_slice();
            let mut dst = out.column_mut(c);
            for r in 0..self.n {
                let mut acc = ZERO;
                for k in self.indptr[r]..self.indptr[r + 1] {
                    acc += self.data[k] * src[self.indices[k]];
                }
                dst[r] += alpha * acc;
            }
        }
    }

    /// `out += alpha · o · S`.
    pub fn right_mul_acc(&self, alpha: C, o: &DMatrix<C>, out: &mut DMatrix<C>) {
        let nrows = o.nrows();
        if let Some(d) = &self.diag {
            for c in 0..self.n {
                let f = alpha * d[c];
                if f == ZERO {
                    continue;
                }
                let src = o.column(c);
                let mut dst = out.column_mut(c);
                for r in 0..nrows {
                    dst[r] += f * src[r];
                }
            }
            return;
        }
        for k in 0..self.n {
            for idx in self.indptr[k]..self.indptr[k + 1] {
                let c = self.indices[idx];
                let f = alpha * self.data[idx];
                let (src, mut dst) = (o.column(k), out.column_mut(c));
                for r in 0..nrows {
                    dst[r] += f * src[r];
                }
            }
        }
    }
}

/// A local operator stored as its nonzero basis entries, for cheap traces against dense blocks.
#[derive(Debug, Clone)]
pub struct SparseEntries {
    /// (row state, column state, (row sector, row index), (column sector, column index), value).
    entries: Vec<(usize, usize, (usize, usize), (usize, usize), C)>,
}

impl SparseEntries {
    pub fn from_local(op: &LocalOperator, sites: &[Site], basis: &Basis) -> Result<Self> {
        let pos = site_positions(sites, op.support())?;
        let mut acc: BTreeMap<(usize, usize), C> = BTreeMap::new();
        for (s, coef) in op.terms() {
            let m = s.masks(|x| pos[&x]);
            for col in 0..basis.dim() {
                *acc.entry((col ^ m.flip, col)).or_insert(ZERO) += coef * m.phase(col);
            }
        }
        let entries = acc
            .into_iter()
            .filter(|&(_, v)| v != ZERO)
            .map(|((r, c), v)| (r, c, basis.locate(r), basis.locate(c), v))
            .collect();
        Ok(Self { entries })
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    fn entry(o: &BlockOp, row: (usize, usize), col: (usize, usize)) -> C {
        o.blocks.get(&(row.0, col.0)).map_or(ZERO, |b| b[(row.1, col.1)])
    }

    /// `Σ_s w[s] ⟨s|S O|s⟩`.
    pub fn trace_before(&self, o: &BlockOp, weights: &[f64]) -> C {
        self.entries.iter().map(|&(r, _, rl, cl, v)| v * Self::entry(o, cl, rl) * weights[r]).sum()
    }

    /// `Σ_s w[s] ⟨s|O S|s⟩`.
    pub fn trace_after(&self, o: &BlockOp, weights: &[f64]) -> C {
        self.entries.iter().map(|&(_, c, rl, cl, v)| v * Self::entry(o, cl, rl) * weights[c]).sum()
    }
}

/// Relative size below which a sector-changing matrix element counts as rounding.
pub const SECTOR_LEAK_TOL: f64 = 1e-13;

impl SectorSparse {
    /// Embeds a local operator that preserves every sector of `basis`.
    pub fn from_local(op: &LocalOperator, sites: &[Site], basis: &Basis) -> Result<Self> {
        let pos = site_positions(sites, op.support())?;
        let mut entries: BTreeMap<(usize, usize), C> = BTreeMap::new();
        for (s, coef) in op.terms() {
            let m = s.masks(|x| pos[&x]);
            for col in 0..basis.dim() {
                *entries.entry((col ^ m.flip, col)).or_insert(ZERO) += coef * m.phase(col);
            }
        }
        // Cross-sector entries that cancel up to rounding are dropped, larger ones are an error.
        let floor = SECTOR_LEAK_TOL * op.terms().map(|(_, c)| c.norm()).sum::<f64>();
        let mut trip: Vec<Vec<(usize, usize, C)>> = vec![Vec::new(); basis.n_sectors()];
        for ((row, col), v) in entries {
            if v == ZERO {
                continue;
            }
            let (sc, ic) = basis.locate(col);
            let (sr, ir) = basis.locate(row);
            if sr != sc {
                if v.norm() <= floor {
                    continue;
                }
                return Err(Error::InvalidArgument("operator does not preserve the sector structure".into()));
            }
            trip[sc].push((ir, ic, v));
        }
        let blocks = trip.into_iter().enumerate().map(|(k, t)| Csr::from_triplets(basis.sector_dim(k), t)).collect();
        Ok(Self { blocks })
    }

    pub fn adjoint(&self) -> Self {
        Self { blocks: self.blocks.iter().map(Csr::adjoint).collect() }
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(Csr::nnz).sum()
    }

    /// Sparse product `self · other` (sector by sector).
    pub fn product(&self, other: &SectorSparse) -> SectorSparse {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                let mut t = Vec::new();
                for r in 0..a.n {
                    for ka in a.indptr[r]..a.indptr[r + 1] {
                        let mid = a.indices[ka];
                        for kb in b.indptr[mid]..b.indptr[mid + 1] {
                            t.push((r, b.indices[kb], a.data[ka] * b.data[kb]));
                        }
                    }
                }
                Csr::from_triplets(a.n, t)
            })
            .collect();
        SectorSparse { blocks }
    }

    pub fn sum(items: &[SectorSparse], basis: &Basis) -> SectorSparse {
        let blocks = (0..basis.n_sectors())
            .map(|k| {
                let mut t = Vec::new();
                for it in items {
                    let b = &it.blocks[k];
                    for r in 0..b.n {
                        for idx in b.indptr[r]..b.indptr[r + 1] {
                            t.push((r, b.indices[idx], b.data[idx]));
                        }
                    }
                }
                Csr::from_triplets(basis.sector_dim(k), t)
            })
            .collect();
        SectorSparse { blocks }
    }

    /// Extreme eigenvalues over all sectors of a Hermitian block-diagonal matrix.
    pub fn spectral_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for b in &self.blocks {
            if b.n == 0 {
                continue;
            }
            let (l, h) = if b.n <= 64 {
                let e = b.to_dense().symmetric_eigenvalues();
                (e.min(), e.max())
            } else {
                linalg::lanczos_extremes(b.n, |x, y| b.matvec(x, y))
            };
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi)
    }
}

/// Operator on a window stored as dense blocks between sectors; absent blocks are zero.
#[derive(Debug, Clone)]
pub struct BlockOp {
    basis: Arc<Basis>,
    blocks: BTreeMap<(usize, usize), DMatrix<C>>,
}

impl BlockOp {
    pub fn zero(basis: Arc<Basis>) -> Self {
        Self { basis, blocks: BTreeMap::new() }
    }

    pub fn identity(basis: Arc<Basis>) -> Self {
        let blocks = (0..basis.n_sectors())
            .map(|s| ((s, s), DMatrix::identity(basis.sector_dim(s), basis.sector_dim(s))))
            .collect();
        Self { basis, blocks }
    }

    /// Embeds `op` with `sites[k]` as qubit `k`.
    pub fn from_local(op: &LocalOperator, sites: &[Site], basis: Arc<Basis>) -> Result<Self> {
        if sites.len() != basis.n_sites() {
            return Err(Error::InvalidArgument("site list does not match the basis".into()));
        }
        let pos = site_positions(sites, op.support())?;
        let mut out = Self::zero(basis.clone());
        for (s, coef) in op.terms() {
            let m = s.masks(|x| pos[&x]);
            for col in 0..basis.dim() {
                let row = col ^ m.flip;
                let (sc, ic) = basis.locate(col);
                let (sr, ir) = basis.locate(row);
                let blk = out
                    .blocks
                    .entry((sr, sc))
                    .or_insert_with(|| DMatrix::zeros(basis.sector_dim(sr), basis.sector_dim(sc)));
                blk[(ir, ic)] += coef * m.phase(col);
            }
        }
        Ok(out)
    }

    /// Wraps a full `2^n` matrix.
    pub fn from_full(m: &DMatrix<C>, basis: Arc<Basis>) -> Self {
        let mut out = Self::zero(basis.clone());
        for col in 0..basis.dim() {
            for row in 0..basis.dim() {
                let v = m[(row, col)];
                if v == ZERO {
                    continue;
                }
                let (sc, ic) = basis.locate(col);
                let (sr, ir) = basis.locate(row);
                out.blocks
                    .entry((sr, sc))
                    .or_insert_with(|| DMatrix::zeros(basis.sector_dim(sr), basis.sector_dim(sc)))[(ir, ic)] = v;
            }
        }
        out
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn blocks(&self) -> &BTreeMap<(usize, usize), DMatrix<C>> {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut BTreeMap<(usize, usize), DMatrix<C>> {
        &mut self.blocks
    }

    pub fn pattern(&self) -> Vec<(usize, usize)> {
        self.blocks.keys().copied().collect()
    }

    /// Zero operator with the same block pattern.
    pub fn zeros_like(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            blocks: self.blocks.iter().map(|(&k, b)| (k, DMatrix::zeros(b.nrows(), b.ncols()))).collect(),
        }
    }

    pub fn to_full(&self) -> DMatrix<C> {
        let dim = self.basis.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (&(sr, sc), b) in &self.blocks {
            let rows = self.basis.states(sr);
            let cols = self.basis.states(sc);
            for (j, &c) in cols.iter().enumerate() {
                for (i, &r) in rows.iter().enumerate() {
                    m[(r, c)] = b[(i, j)];
                }
            }
        }
        m
    }

    /// Pauli expansion on `sites`; coefficients with modulus `<= tol` are dropped.
    pub fn to_local(&self, sites: &[Site], tol: f64) -> LocalOperator {
        LocalOperator::from_dense(&self.to_full(), sites, tol)
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: C, other: &BlockOp) {
        for (k, b) in &other.blocks {
            match self.blocks.get_mut(k) {
                Some(a) => a.zip_apply(b, |x, y| *x += alpha * y),
                None => {
                    self.blocks.insert(*k, b * alpha);
                }
            }
        }
    }

    pub fn scale(&mut self, alpha: C) {
        for b in self.blocks.values_mut() {
            *b *= alpha;
        }
    }

    pub fn scaled(&self, alpha: C) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn sub(&self, other: &BlockOp) -> Self {
        let mut out = self.clone();
        out.axpy(-ONE, other);
        out
    }

    pub fn adjoint(&self) -> Self {
        Self { basis: self.basis.clone(), blocks: self.blocks.iter().map(|(&(r, c), b)| ((c, r), b.adjoint())).collect() }
    }

    pub fn matmul(&self, other: &BlockOp) -> Self {
        let mut out = Self::zero(self.basis.clone());
        for (&(ra, ca), a) in &self.blocks {
            for (&(rb, cb), b) in other.blocks.range((ca, 0)..(ca + 1, 0)) {
                debug_assert_eq!(rb, ca);
                let dst = out.blocks.entry((ra, cb)).or_insert_with(|| DMatrix::zeros(a.nrows(), b.ncols()));
                gemm(ONE, a, b, ONE, dst);
            }
        }
        out
    }

    pub fn commutator(&self, other: &BlockOp) -> Self {
        let mut out = self.matmul(other);
        out.axpy(-ONE, &other.matmul(self));
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.blocks.values().map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.values().flat_map(|b| b.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `Σ_s w[s] ⟨s|O|s⟩` for a diagonal weight indexed by basis state.
    pub fn weighted_trace(&self, weights: &[f64]) -> C {
        let mut acc = ZERO;
        for s in 0..self.basis.n_sectors() {
            if let Some(b) = self.blocks.get(&(s, s)) {
                for (i, &st) in self.basis.states(s).iter().enumerate() {
                    acc += b[(i, i)] * weights[st];
                }
            }
        }
        acc
    }

    /// `Σ_s w[s] ⟨s|A B|s⟩` without forming the product.
    pub fn weighted_trace_product(&self, other: &BlockOp, weights: &[f64]) -> C {
        let mut acc = ZERO;
        for (&(ra, ca), a) in &self.blocks {
            if let Some(b) = other.blocks.get(&(ca, ra)) {
                let states = self.basis.states(ra);
                for i in 0..a.nrows() {
                    let w = weights[states[i]];
                    if w == 0.0 {
                        continue;
                    }
                    let mut s = ZERO;
                    for k in 0..a.ncols() {
                        s += a[(i, k)] * b[(k, i)];
                    }
                    acc += s * w;
                }
            }
        }
        acc
    }

    /// Relabels basis states: the result satisfies `⟨perm[r]|O'|perm[c]⟩ = ⟨r|O|c⟩`.
    /// `perm` must map every sector onto itself.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let basis = &self.basis;
        let mut blocks = BTreeMap::new();
        for (&(sr, sc), b) in &self.blocks {
            let rmap: Vec<usize> = basis.states(sr).iter().map(|&s| basis.locate(perm[s]).1).collect();
            let cmap: Vec<usize> = basis.states(sc).iter().map(|&s| basis.locate(perm[s]).1).collect();
            let mut nb = DMatrix::zeros(b.nrows(), b.ncols());
            for (j, &cj) in cmap.iter().enumerate() {
                for (i, &ri) in rmap.iter().enumerate() {
                    nb[(ri, cj)] = b[(i, j)];
                }
            }
            blocks.insert((sr, sc), nb);
        }
        Self { basis: self.basis.clone(), blocks }
    }

    /// Spectral norm. Exact block maximum when each block row/column sector occurs once,
    /// otherwise Lanczos on `O†O` with blockwise matvecs.
    pub fn spectral_norm(&self) -> f64 {
        let keys = self.pattern();
        let mut rows: Vec<usize> = keys.iter().map(|k| k.0).collect();
        let mut cols: Vec<usize> = keys.iter().map(|k| k.1).collect();
        rows.sort_unstable();
        cols.sort_unstable();
        let partial_perm = rows.windows(2).all(|w| w[0] != w[1]) && cols.windows(2).all(|w| w[0] != w[1]);
        if partial_perm {
            return self.blocks.values().map(linalg::spectral_norm).fold(0.0, f64::max);
        }
        let full = self.to_full();
        linalg::spectral_norm(&full)
    }

    /// Moves all blocks out, leaving an empty operator.
    pub fn take_blocks(&mut self) -> BTreeMap<(usize, usize), DMatrix<C>> {
        std::mem::take(&mut self.blocks)
    }

    pub fn from_blocks(basis: Arc<Basis>, blocks: BTreeMap<(usize, usize), DMatrix<C>>) -> Self {
        Self { basis, blocks }
    }
}
