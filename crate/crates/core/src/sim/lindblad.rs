//! Sparse Lindblad superoperators restricted to the reachable part of ρ.
//!
//! Starting from the initial density-matrix elements, the set of elements
//! that the generator can ever make nonzero is closed under the Hamiltonian,
//! the non-Hermitian decay terms and the jump terms. Everything outside that
//! set stays exactly zero, so the superoperator is assembled only on it.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::CMat;
use crate::ode::{Dop853, OdeSystem, Tolerances};
use crate::{Result, C64};

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Sparse square matrix with row and column access.
#[derive(Debug, Clone)]
pub struct SparseMat {
    rows: Vec<Vec<(usize, C64)>>,
    cols: Vec<Vec<(usize, C64)>>,
}

impl SparseMat {
    pub fn from_dense(m: &CMat) -> Self {
        let n = m.dim();
        let mut rows = vec![Vec::new(); n];
        let mut cols = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != ZERO {
                    rows[i].push((j, v));
                    cols[j].push((i, v));
                }
            }
        }
        SparseMat { rows, cols }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// One bilinear building block of a superoperator.
#[derive(Debug, Clone)]
pub enum SuperTerm {
    /// ρ ↦ c M ρ
    Left(SparseMat, C64),
    /// ρ ↦ c ρ M
    Right(SparseMat, C64),
    /// ρ ↦ L ρ L†
    Sandwich(SparseMat),
}

impl SuperTerm {
    /// Calls `emit(i, j, v)` for every contribution v·ρ_kl to (dρ)_ij.
    fn for_each(&self, k: usize, l: usize, mut emit: impl FnMut(usize, usize, C64)) {
        match self {
            SuperTerm::Left(m, c) => {
                for &(i, v) in &m.cols[k] {
                    emit(i, l, c * v);
                }
            }
            SuperTerm::Right(m, c) => {
                for &(j, v) in &m.rows[l] {
                    emit(k, j, c * v);
                }
            }
            SuperTerm::Sandwich(m) => {
                for &(i, a) in &m.cols[k] {
                    for &(j, b) in &m.cols[l] {
                        emit(i, j, a * b.conj());
                    }
                }
            }
        }
    }
}

/// Commutator superoperator −i[M, ·] split into left and right parts.
fn commutator(m: &CMat) -> [SuperTerm; 2] {
    let s = SparseMat::from_dense(m);
    [SuperTerm::Left(s.clone(), -I), SuperTerm::Right(s, I)]
}

/// A jump operator; with `recycle = false` only its loss (anticommutator) part acts.
#[derive(Debug, Clone)]
pub struct Jump {
    pub op: CMat,
    pub recycle: bool,
}

/// H(t) ∋ e^{−iνt} A + e^{iνt} A†.
#[derive(Debug, Clone)]
pub struct OscillatingTerm {
    pub op: CMat,
    pub freq: f64,
}

/// Master equation dρ/dt = −i[H(t), ρ] + Σ (LρL† − ½{L†L, ρ}).
#[derive(Debug, Clone)]
pub struct LindbladProblem {
    pub h_static: CMat,
    pub oscillating: Vec<OscillatingTerm>,
    pub jumps: Vec<Jump>,
}

impl LindbladProblem {
    pub fn dim(&self) -> usize {
        self.h_static.dim()
    }

    fn static_terms(&self) -> Vec<SuperTerm> {
        let n = self.dim();
        let mut decay = CMat::zeros(n);
        for j in &self.jumps {
            decay = decay.add(&j.op.adjoint().mul(&j.op));
        }
        // H_eff = H − (i/2) Σ L†L; dρ = −i(H_eff ρ − ρ H_eff†) + Σ LρL†.
        let heff = self.h_static.sub(&decay.scale(C64::new(0.0, 0.5)));
        let mut terms = vec![
            SuperTerm::Left(SparseMat::from_dense(&heff), -I),
            SuperTerm::Right(SparseMat::from_dense(&heff.adjoint()), I),
        ];
        terms.extend(self.jumps.iter().filter(|j| j.recycle).map(|j| SuperTerm::Sandwich(SparseMat::from_dense(&j.op))));
        terms
    }

    /// Restricts the generator to the elements reachable from `seeds`.
    pub fn build(&self, seeds: &[(usize, usize)]) -> Liouvillian {
        let n = self.dim();
        let static_terms = self.static_terms();
        let osc: Vec<(f64, [SuperTerm; 2], [SuperTerm; 2])> =
            self.oscillating.iter().map(|o| (o.freq, commutator(&o.op), commutator(&o.op.adjoint()))).collect();
        // Loss-only jumps still shape reachability through H_eff, which is already included.
        let mut lookup = vec![u32::MAX; n * n];
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut queue = VecDeque::new();
        let mut visit = |i: usize, j: usize, pairs: &mut Vec<(usize, usize)>, queue: &mut VecDeque<(usize, usize)>| {
            for (a, b) in [(i, j), (j, i)] {
                if lookup[a * n + b] == u32::MAX {
                    lookup[a * n + b] = pairs.len() as u32;
                    pairs.push((a, b));
                    queue.push_back((a, b));
                }
            }
        };
        for &(i, j) in seeds {
            visit(i, j, &mut pairs, &mut queue);
        }
        let all_terms: Vec<&SuperTerm> =
            static_terms.iter().chain(osc.iter().flat_map(|(_, a, b)| a.iter().chain(b.iter()))).collect();
        while let Some((k, l)) = queue.pop_front() {
            let mut found = Vec::new();
            for term in &all_terms {
                term.for_each(k, l, |i, j, v| {
                    if v != ZERO {
                        found.push((i, j));
                    }
                });
            }
            for (i, j) in found {
                visit(i, j, &mut pairs, &mut queue);
            }
        }
        // Canonical ordering keeps the layout independent of traversal order.
        pairs.sort_unstable();
        for (idx, &(i, j)) in pairs.iter().enumerate() {
            lookup[i * n + j] = idx as u32;
        }
        let support = Support { dim: n, pairs, lookup };
        let assemble = |terms: &[&SuperTerm]| Csr::assemble(&support, terms);
        let s0 = assemble(&static_terms.iter().collect::<Vec<_>>());
        let drives = osc
            .iter()
            .map(|(f, a, b)| (*f, assemble(&a.iter().collect::<Vec<_>>()), assemble(&b.iter().collect::<Vec<_>>())))
            .collect();
        Liouvillian { support, s0, drives }
    }
}

/// The set of tracked density-matrix elements.
#[derive(Debug, Clone)]
pub struct Support {
    dim: usize,
    pairs: Vec<(usize, usize)>,
    lookup: Vec<u32>,
}

impl Support {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        match self.lookup[i * self.dim + j] {
            u32::MAX => None,
            k => Some(k as usize),
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Indices of the tracked diagonal elements, by basis state.
    pub fn diagonal(&self) -> Vec<(usize, usize)> {
        (0..self.dim).filter_map(|i| self.index(i, i).map(|k| (i, k))).collect()
    }

    pub fn vectorize(&self, rho: &CMat) -> Vec<C64> {
        self.pairs.iter().map(|&(i, j)| rho[(i, j)]).collect()
    }

    pub fn to_matrix(&self, y: &[C64]) -> CMat {
        let mut m = CMat::zeros(self.dim);
        for (&(i, j), &v) in self.pairs.iter().zip(y) {
            m[(i, j)] = v;
        }
        m
    }

    /// Groups of basis states coupled by tracked coherences; ρ is block diagonal over them.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.dim).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut c = x;
            while p[c] != r {
                let next = p[c];
                p[c] = r;
                c = next;
            }
            r
        }
        let mut tracked = vec![false; self.dim];
        for &(i, j) in &self.pairs {
            tracked[i] = true;
            tracked[j] = true;
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_of = vec![usize::MAX; self.dim];
        for s in (0..self.dim).filter(|&s| tracked[s]) {
            let r = find(&mut parent, s);
            if root_of[r] == usize::MAX {
                root_of[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[root_of[r]].push(s);
        }
        groups
    }
}

/// Compressed sparse rows over support indices.
#[derive(Debug, Clone)]
pub struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
}

impl Csr {
    fn assemble(support: &Support, terms: &[&SuperTerm]) -> Csr {
        let mut trip: Vec<(u32, u32, C64)> = Vec::new();
        for (src, &(k, l)) in support.pairs.iter().enumerate() {
            for term in terms {
                term.for_each(k, l, |i, j, v| {
                    let dst = support.index(i, j).expect("support is closed under the generator");
                    trip.push((dst as u32, src as u32, v));
                });
            }
        }
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let n = support.len();
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            cols.push(c);
            vals.push(v);
            row_ptr[r as usize + 1] = cols.len();
        }
        for r in 0..n {
            row_ptr[r + 1] = row_ptr[r + 1].max(row_ptr[r]);
        }
        Csr { row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y += c · A x
    #[inline]
    fn matvec_add(&self, c: C64, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p] as usize];
            }
            *yr += c * acc;
        }
    }

    fn to_dense(&self, n: usize) -> CMat {
        let mut m = CMat::zeros(n);
        for r in 0..n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[p] as usize)] += self.vals[p];
            }
        }
        m
    }
}

/// Generator restricted to a support: L(t) = S₀ + Σ (e^{−iνt} S_A + e^{iνt} S_{A†}).
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub support: Support,
    s0: Csr,
    drives: Vec<(f64, Csr, Csr)>,
}

impl Liouvillian {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn is_time_dependent(&self) -> bool {
        !self.drives.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.s0.nnz() + self.drives.iter().map(|(_, a, b)| a.nnz() + b.nnz()).sum::<usize>()
    }

    /// Common period of all oscillating terms, if there is exactly one frequency.
    pub fn period(&self) -> Option<f64> {
        let f = self.drives.first()?.0;
        if self.drives.iter().all(|d| d.0 == f) && f != 0.0 {
            Some(2.0 * core::f64::consts::PI / f.abs())
        } else {
            None
        }
    }

    /// y = L(t) x
    pub fn apply(&self, t: f64, x: &[C64], y: &mut [C64]) {
        y.fill(ZERO);
        self.s0.matvec_add(C64::new(1.0, 0.0), x, y);
        for (f, a, b) in &self.drives {
            let c = C64::new(0.0, -f * t).exp();
            a.matvec_add(c, x, y);
            b.matvec_add(c.conj(), x, y);
        }
    }

    /// Dense matrix of the static part S₀.
    pub fn static_dense(&self) -> CMat {
        self.s0.to_dense(self.len())
    }
}

impl OdeSystem for Liouvillian {
    fn dim(&self) -> usize {
        self.len()
    }
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.apply(t, y, dy);
    }
}

/// dU/dt = L(t) U with U stored column by column.
struct PropagatorRhs<'a>(&'a Liouvillian);

impl OdeSystem for PropagatorRhs<'_> {
    fn dim(&self) -> usize {
        self.0.len() * self.0.len()
    }
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.0.len();
        for (x, out) in y.chunks_exact(n).zip(dy.chunks_exact_mut(n)) {
            self.0.apply(t, x, out);
        }
    }
}

/// Propagator from `t0` to `t1` by direct integration of all basis vectors.
pub fn propagator_rk(l: &Liouvillian, t0: f64, t1: f64, tol: Tolerances) -> Result<CMat> {
    let n = l.len();
    let mut u = vec![ZERO; n * n];
    for c in 0..n {
        u[c * n + c] = C64::new(1.0, 0.0);
    }
    let mut ode = Dop853::new(tol);
    ode.integrate(&PropagatorRhs(l), t0, t1, &mut u)?;
    // Column-major to row-major.
    Ok(CMat::from_fn(n, |i, j| u[j * n + i]))
}

/// U^k by binary powering.
pub fn matrix_power(u: &CMat, mut k: u64) -> CMat {
    let mut result = CMat::identity(u.dim());
    let mut base = u.clone();
    let mut first = true;
    while k > 0 {
        if k & 1 == 1 {
            result = if first { base.clone() } else { result.mul(&base) };
            first = false;
        }
        k >>= 1;
        if k > 0 {
            base = base.mul(&base);
        }
    }
    result
}

/// Propagator of a time-independent generator over `dt`: integrate a short
/// step of at most `h_base` and square up.
pub fn static_propagator(l: &Liouvillian, dt: f64, h_base: f64, tol: Tolerances) -> Result<CMat> {
    let mut s = 0u32;
    while dt / (1u64 << s) as f64 > h_base && s < 40 {
        s += 1;
    }
    let h0 = dt / (1u64 << s) as f64;
    let mut u = propagator_rk(l, 0.0, h0, tol)?;
    for _ in 0..s {
        u = u.mul(&u);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm;

    /// Driven, damped two-level system.
    fn qubit(omega: f64, gamma: f64, delta: f64) -> LindbladProblem {
        let mut h = CMat::zeros(2);
        h[(1, 1)] = C64::new(delta, 0.0);
        h[(0, 1)] = C64::new(omega / 2.0, 0.0);
        h[(1, 0)] = C64::new(omega / 2.0, 0.0);
        let mut l = CMat::zeros(2);
        l[(0, 1)] = C64::new(gamma.sqrt(), 0.0);
        LindbladProblem { h_static: h, oscillating: Vec::new(), jumps: vec![Jump { op: l, recycle: true }] }
    }

    #[test]
    fn full_support_for_driven_qubit() {
        let l = qubit(1.0, 0.5, 0.2).build(&[(0, 0)]);
        assert_eq!(l.len(), 4);
        assert_eq!(l.support.blocks(), vec![vec![0, 1]]);
    }

    #[test]
    fn support_without_drive_stays_diagonal() {
        let l = qubit(0.0, 0.5, 0.2).build(&[(1, 1)]);
        assert_eq!(l.len(), 2);
        assert!(l.support.index(0, 1).is_none());
    }

    #[test]
    fn trace_is_conserved_by_generator() {
        let l = qubit(1.3, 0.5, 0.2).build(&[(0, 0)]);
        let d = l.static_dense();
        let diag = l.support.diagonal();
        for c in 0..l.len() {
            let s: C64 = diag.iter().map(|&(_, k)| d[(k, c)]).sum();
            assert!(s.norm() < 1e-14);
        }
    }

    #[test]
    fn rk_propagator_matches_expm() {
        let l = qubit(1.3, 0.5, 0.2).build(&[(0, 0)]);
        let u_rk = static_propagator(&l, 3.0, 0.25, Tolerances { rtol: 1e-11, atol: 1e-13, ..Default::default() }).unwrap();
        let u_ex = expm(&l.static_dense().scale(C64::new(3.0, 0.0)));
        assert!(u_rk.max_abs_diff(&u_ex) < 1e-9);
    }

    #[test]
    fn binary_power() {
        let l = qubit(1.0, 0.3, 0.0).build(&[(0, 0)]);
        let u = expm(&l.static_dense().scale(C64::new(0.1, 0.0)));
        let p = matrix_power(&u, 13);
        let direct = expm(&l.static_dense().scale(C64::new(1.3, 0.0)));
        assert!(p.max_abs_diff(&direct) < 1e-12);
        assert_eq!(matrix_power(&u, 0), CMat::identity(u.dim()));
    }
}
