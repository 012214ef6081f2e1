//! Small dense complex linear algebra.
//!
//! Sizes here are at most a few hundred, so plain row-major storage and
//! textbook algorithms are sufficient: cyclic Jacobi for Hermitian
//! eigenproblems, Cholesky for positivity tests, and Taylor scaling and
//! squaring for the matrix exponential.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[allow(unused_imports)]
use num_traits::Float;

use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CMat { n, data }
    }

    pub fn from_rows(n: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), n * n, "row data has the wrong length");
        CMat { n, data }
    }

    /// |ψ⟩⟨ψ|.
    pub fn outer(psi: &[C64]) -> Self {
        Self::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let orow = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        let n = self.n;
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = ZERO;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *yi = acc;
        }
    }

    pub fn add(&self, other: &CMat) -> CMat {
        CMat { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        CMat { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat { n: self.n, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].iter().map(|a| a.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut e: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                e = e.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        e
    }

    /// (A + A†)/2.
    pub fn hermitian_part(&self) -> CMat {
        Self::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// Tr(A B) without forming the product.
    pub fn trace_product(&self, other: &CMat) -> C64 {
        let n = self.n;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    /// ⟨ψ|A|ψ⟩.
    pub fn expectation(&self, psi: &[C64]) -> C64 {
        let mut tmp = vec![ZERO; self.n];
        self.matvec(psi, &mut tmp);
        psi.iter().zip(&tmp).map(|(a, b)| a.conj() * b).sum()
    }

    /// Principal submatrix on the given indices.
    pub fn submatrix(&self, idx: &[usize]) -> CMat {
        Self::from_fn(idx.len(), |i, j| self[(idx[i], idx[j])])
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns, matching `values`.
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.n).map(|i| self.vectors[(i, k)]).collect()
    }

    /// V diag(f(λ)) V†.
    pub fn reconstruct_with(&self, mut f: impl FnMut(f64) -> f64) -> CMat {
        let n = self.vectors.n;
        let w: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        CMat::from_fn(n, |i, j| (0..n).map(|k| self.vectors[(i, k)] * self.vectors[(j, k)].conj() * w[k]).sum())
    }
}

/// Cyclic complex Jacobi diagonalisation. Only the Hermitian part of `a` is used.
pub fn hermitian_eigen(a: &CMat) -> HermitianEigen {
    let n = a.n;
    let mut m = a.hermitian_part();
    let mut v = CMat::identity(n);
    let scale = m.norm_fro().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].norm_sqr()).sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J = [[c, s], [−s e^{−iφ}, c e^{−iφ}]] on the (p, q) plane.
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                for i in 0..n {
                    let (mip, miq) = (m[(i, p)], m[(i, q)]);
                    m[(i, p)] = mip * c + miq * jqp;
                    m[(i, q)] = mip * s + miq * jqq;
                }
                for j in 0..n {
                    let (mpj, mqj) = (m[(p, j)], m[(q, j)]);
                    m[(p, j)] = mpj * c + mqj * jqp.conj();
                    m[(q, j)] = mpj * s + mqj * jqq.conj();
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                for i in 0..n {
                    let (vip, viq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = vip * c + viq * jqp;
                    v[(i, q)] = vip * s + viq * jqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re));
    let values = order.iter().map(|&k| m[(k, k)].re).collect();
    let vectors = CMat::from_fn(n, |i, j| v[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Attempts a Cholesky factorisation of the Hermitian matrix `a + shift·I`.
pub fn cholesky_succeeds(a: &CMat, shift: f64) -> bool {
    let n = a.n;
    let mut l = CMat::zeros(n);
    for j in 0..n {
        let mut d = a[(j, j)].re + shift;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    true
}

/// Matrix exponential by Taylor series with scaling and squaring.
pub fn expm(a: &CMat) -> CMat {
    let n = a.n;
    let norm = a.norm_inf();
    let mut s = 0u32;
    while norm / (1u64 << s) as f64 > 0.5 {
        s += 1;
    }
    let scaled = a.scale(C64::new(1.0 / (1u64 << s) as f64, 0.0));
    let mut result = CMat::identity(n);
    let mut term = CMat::identity(n);
    for k in 1..=30 {
        term = term.mul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
        result = result.add(&term);
        if term.norm_inf() < 1e-18 * result.norm_inf() {
            break;
        }
    }
    for _ in 0..s {
        result = result.mul(&result);
    }
    result
}

/// Projects a Hermitian matrix onto the unit-trace positive cone by
/// eigenvalue clipping with a common shift (Euclidean projection onto the simplex).
pub fn project_to_density(a: &CMat) -> CMat {
    let eig = hermitian_eigen(a);
    let lam = project_simplex(&eig.values);
    let n = a.n;
    CMat::from_fn(n, |i, j| (0..n).map(|k| eig.vectors[(i, k)] * eig.vectors[(j, k)].conj() * lam[k]).sum())
}

/// Euclidean projection of a vector onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}
