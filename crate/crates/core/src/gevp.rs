//! Dense symmetric-definite generalized eigensolver for `A x = lambda B x`.
//!
//! Pipeline: Cholesky `B = G G^T`, reduction to `C = G^{-1} A G^{-T}`,
//! Householder tridiagonalization of `C`, implicit-shift QL for the
//! eigenvalues, inverse iteration on the tridiagonal for the requested
//! eigenvectors, then back-transformation through the reflectors and `G^{-T}`.
//!
//! The Cholesky factor and the triangular solves follow the row profile of
//! `B`, so banded inputs (the cap discretization produces a tridiagonal `B`)
//! reduce in `O(N^2)`; tridiagonalization is the only cubic step.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GevpError {
    #[error("matrix B is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("QL iteration did not converge for eigenvalue {index} within {max_iter} sweeps")]
    NoConvergence { index: usize, max_iter: usize },
    #[error("dimension mismatch: A is {a}x{a}, B is {b}x{b}, {count} eigenpairs requested")]
    DimensionMismatch { a: usize, b: usize, count: usize },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst: f64 = 0.0;
        let mut size: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                size = size.max(self[(i, j)].abs());
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        if size == 0.0 {
            0.0
        } else {
            worst / size
        }
    }

    /// `P^T M P` for the permutation `perm` (new index `i` takes old index `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert!(self.is_square() && perm.len() == self.rows);
        Self::from_fn(self.rows, self.cols, |i, j| self[(perm[i], perm[j])])
    }

    /// `x^T M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower Cholesky factor stored densely with a per-row profile.
#[derive(Debug, Clone)]
pub struct Cholesky {
    factor: DenseMatrix,
    /// First structurally nonzero column of each row.
    first: Vec<usize>,
}

impl Cholesky {
    pub fn new(b: &DenseMatrix) -> Result<Self, GevpError> {
        let n = b.rows();
        let first: Vec<usize> = (0..n)
            .map(|i| (0..=i).find(|&j| b[(i, j)] != 0.0).unwrap_or(i))
            .collect();
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in first[i]..=i {
                let start = first[i].max(first[j]);
                let mut s = b[(i, j)];
                for k in start..j {
                    s -= g[(i, k)] * g[(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(GevpError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    g[(i, i)] = s.sqrt();
                } else {
                    g[(i, j)] = s / g[(j, j)];
                }
            }
        }
        Ok(Self { factor: g, first })
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.factor
    }

    /// Solves `G X = M` in place, row by row.
    fn forward_rows(&self, m: &mut DenseMatrix) {
        let n = self.factor.rows();
        let cols = m.cols();
        let mut acc = vec![0.0; cols];
        for i in 0..n {
            acc.copy_from_slice(m.row(i));
            for j in self.first[i]..i {
                let gij = self.factor[(i, j)];
                if gij != 0.0 {
                    let rj = m.row(j);
                    for (a, r) in acc.iter_mut().zip(rj) {
                        *a -= gij * r;
                    }
                }
            }
            let inv = 1.0 / self.factor[(i, i)];
            for (dst, a) in m.row_mut(i).iter_mut().zip(&acc) {
                *dst = a * inv;
            }
        }
    }

    /// Solves `G^T x = z` in place.
    fn backward(&self, z: &mut [f64]) {
        let n = self.factor.rows();
        for i in (0..n).rev() {
            let xi = z[i] / self.factor[(i, i)];
            z[i] = xi;
            for j in self.first[i]..i {
                z[j] -= self.factor[(i, j)] * xi;
            }
        }
    }

    /// `C = G^{-1} A G^{-T}`, symmetrized.
    fn reduce(&self, a: &DenseMatrix) -> DenseMatrix {
        let mut x = a.clone();
        self.forward_rows(&mut x);
        let mut c = x.transpose();
        self.forward_rows(&mut c);
        let n = c.rows();
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (c[(i, j)] + c[(j, i)]);
                c[(i, j)] = s;
                c[(j, i)] = s;
            }
        }
        c
    }
}

/// Householder reduction `T = Q^T C Q` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[i] = T[i][i+1]`; the last entry is zero.
    pub off: Vec<f64>,
    /// Reflector `k` acts on indices `k+1..n`: `H = I - beta v v^T`.
    reflectors: Vec<(f64, Vec<f64>)>,
}

impl Tridiagonal {
    pub fn new(mut c: DenseMatrix) -> Self {
        let n = c.rows();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        let mut p = vec![0.0; n];
        for k in 0..n.saturating_sub(2) {
            let len = n - k - 1;
            let x = &c.row(k)[k + 1..];
            let sigma = norm2(x);
            diag[k] = c[(k, k)];
            if sigma == 0.0 {
                off[k] = 0.0;
                reflectors.push((0.0, vec![0.0; len]));
                continue;
            }
            let alpha = if x[0] >= 0.0 { -sigma } else { sigma };
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vtv = dot(&v, &v);
            let beta = 2.0 / vtv;
            off[k] = alpha;

            // p = beta S v, w = p - (beta p.v / 2) v on the trailing block S
            let p = &mut p[..len];
            for (i, pi) in p.iter_mut().enumerate() {
                *pi = beta * dot(&c.row(k + 1 + i)[k + 1..], &v);
            }
            let kappa = 0.5 * beta * dot(p, &v);
            for (pi, vi) in p.iter_mut().zip(&v) {
                *pi -= kappa * vi;
            }
            for i in 0..len {
                let (vi, wi) = (v[i], p[i]);
                let row = &mut c.row_mut(k + 1 + i)[k + 1..];
                for ((r, vj), wj) in row.iter_mut().zip(&v).zip(p.iter()) {
                    *r -= vi * wj + wi * vj;
                }
            }
            reflectors.push((beta, v));
        }
        if n >= 2 {
            diag[n - 2] = c[(n - 2, n - 2)];
            diag[n - 1] = c[(n - 1, n - 1)];
            off[n - 2] = c[(n - 1, n - 2)];
        } else if n == 1 {
            diag[0] = c[(0, 0)];
        }
        Self {
            diag,
            off,
            reflectors,
        }
    }

    /// `z <- Q z`.
    pub fn apply_q(&self, z: &mut [f64]) {
        for (k, (beta, v)) in self.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let tail = &mut z[k + 1..];
            let s = beta * dot(v, tail);
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }
}

/// Sweep cap per eigenvalue in the QL iteration.
pub const QL_MAX_ITER: usize = 50;

/// All eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL,
/// sorted ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>, GevpError> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.resize(n, 0.0);
    if n > 0 {
        e[n - 1] = 0.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter == QL_MAX_ITER {
                return Err(GevpError::NoConvergence {
                    index: l,
                    max_iter: QL_MAX_ITER,
                });
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvectors of a symmetric tridiagonal matrix for the given (ascending)
/// eigenvalues by inverse iteration, orthogonalized within clusters.
pub fn tridiagonal_eigenvectors(diag: &[f64], off: &[f64], values: &[f64]) -> Vec<Vec<f64>> {
    let n = diag.len();
    let norm = (0..n)
        .map(|i| {
            diag[i].abs()
                + if i > 0 { off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { off[i].abs() } else { 0.0 }
        })
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let cluster = 1e-3 * norm;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    let mut shift_bump = 0.0;
    for (idx, &lambda) in values.iter().enumerate() {
        // separate coincident shifts so each solve sees a distinct matrix
        if idx > 0 && (lambda - values[idx - 1]).abs() <= 10.0 * f64::EPSILON * norm {
            shift_bump += 10.0 * f64::EPSILON * norm;
        } else {
            shift_bump = 0.0;
        }
        let sigma = lambda + shift_bump;
        let lu = TridiagonalLu::new(diag, off, sigma, norm);
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_75).fract() - 0.5))
            .collect();
        let mut previous = x.clone();
        for _ in 0..5 {
            lu.solve(&mut x);
            for (j, v) in vectors.iter().enumerate() {
                if (values[j] - lambda).abs() <= cluster {
                    let proj = dot(v, &x);
                    for (xi, vi) in x.iter_mut().zip(v) {
                        *xi -= proj * vi;
                    }
                }
            }
            let nrm = norm2(&x);
            for xi in x.iter_mut() {
                *xi /= nrm;
            }
            let change = x
                .iter()
                .zip(&previous)
                .map(|(a, b)| (a.abs() - b.abs()).abs())
                .fold(0.0, f64::max);
            if change < 1e-14 {
                break;
            }
            previous.copy_from_slice(&x);
        }
        vectors.push(x);
    }
    vectors
}

/// LU with partial pivoting of `T - sigma I`; `U` has two superdiagonals.
struct TridiagonalLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn new(diag: &[f64], off: &[f64], sigma: f64, norm: f64) -> Self {
        let n = diag.len();
        let tiny = f64::EPSILON * norm;
        let mut u0: Vec<f64> = diag.iter().map(|d| d - sigma).collect();
        let mut u1: Vec<f64> = (0..n)
            .map(|i| if i + 1 < n { off[i] } else { 0.0 })
            .collect();
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        for i in 0..n.saturating_sub(1) {
            // row i+1 currently holds (sub = off[i], diag = d[i+1]-sigma, super = off[i+1])
            let sub = off[i];
            let mut next_diag = diag[i + 1] - sigma;
            let mut next_super = if i + 2 < n { off[i + 1] } else { 0.0 };
            if sub.abs() > u0[i].abs() {
                // swap rows i and i+1
                swapped[i] = true;
                let m = u0[i] / sub;
                mult[i] = m;
                let (a0, a1, a2) = (sub, next_diag, next_super);
                let (b1, b2) = (u1[i], 0.0);
                u0[i] = a0;
                u1[i] = a1;
                u2[i] = a2;
                next_diag = b1 - m * a1;
                next_super = b2 - m * a2;
            } else {
                if u0[i] == 0.0 {
                    u0[i] = tiny;
                }
                let m = sub / u0[i];
                mult[i] = m;
                next_diag -= m * u1[i];
                u2[i] = 0.0;
            }
            u0[i + 1] = next_diag;
            if i + 1 < n - 1 {
                u1[i + 1] = next_super;
            }
        }
        if n > 0 && u0[n - 1] == 0.0 {
            u0[n - 1] = tiny;
        }
        for v in u0.iter_mut() {
            if v.abs() < tiny {
                *v = tiny.copysign(*v);
            }
        }
        Self {
            u0,
            u1,
            u2,
            mult,
            swapped,
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.mult[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
    }
}

/// One generalized eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct GevpPair {
    pub value: f64,
    /// `B`-normalized: `x^T B x = 1`; largest-magnitude component positive.
    pub vector: Vec<f64>,
    /// `||A x - value B x|| / ||A x||`.
    pub residual: f64,
}

/// The `count` smallest eigenpairs of `A x = lambda B x`, ascending.
pub fn solve_gevp(
    a: &DenseMatrix,
    b: &DenseMatrix,
    count: usize,
) -> Result<Vec<GevpPair>, GevpError> {
    let n = a.rows();
    if !a.is_square() || !b.is_square() || b.rows() != n || count > n {
        return Err(GevpError::DimensionMismatch {
            a: a.rows(),
            b: b.rows(),
            count,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let chol = Cholesky::new(b)?;
    let c = chol.reduce(a);
    let tri = Tridiagonal::new(c);
    let values = tridiagonal_eigenvalues(&tri.diag, &tri.off)?;
    let wanted = &values[..count];
    let vectors = tridiagonal_eigenvectors(&tri.diag, &tri.off, wanted);

    let mut pairs = Vec::with_capacity(count);
    for (&value, mut z) in wanted.iter().zip(vectors) {
        tri.apply_q(&mut z);
        chol.backward(&mut z);
        let bx = b.mul_vec(&z);
        let scale = dot(&z, &bx).sqrt();
        let big = z
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if big < 0.0 { -1.0 } else { 1.0 };
        let factor = sign / scale;
        let x: Vec<f64> = z.iter().map(|v| v * factor).collect();
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = ax
            .iter()
            .zip(&bx)
            .map(|(p, q)| p - value * q * factor)
            .collect();
        let ax_norm = norm2(&ax);
        let residual = if ax_norm > 0.0 {
            norm2(&r) / ax_norm
        } else {
            norm2(&r)
        };
        pairs.push(GevpPair {
            value,
            vector: x,
            residual,
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_examples() {
        let a = DenseMatrix::from_diagonal(&[2.0, 8.0]);
        let b = DenseMatrix::identity(2);
        let pairs = solve_gevp(&a, &b, 2).unwrap();
        assert!((pairs[0].value - 2.0).abs() < 1e-14);
        assert!((pairs[1].value - 8.0).abs() < 1e-14);

        let a = DenseMatrix::from_diagonal(&[2.0, 2.0]);
        let b = DenseMatrix::from_diagonal(&[2.0, 1.0]);
        let pairs = solve_gevp(&a, &b, 2).unwrap();
        assert!((pairs[0].value - 1.0).abs() < 1e-14);
        assert!((pairs[1].value - 2.0).abs() < 1e-14);
        assert!((pairs[0].vector[0].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn indefinite_b_is_rejected() {
        let a = DenseMatrix::identity(2);
        let b = DenseMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            solve_gevp(&a, &b, 1),
            Err(GevpError::NotPositiveDefinite { row: 1, .. })
        ));
        assert!(matches!(
            solve_gevp(&a, &DenseMatrix::identity(3), 1),
            Err(GevpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ql_on_known_tridiagonal() {
        // second-difference matrix: eigenvalues 2 - 2 cos(j pi / (n+1))
        let n = 40;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n];
        let ev = tridiagonal_eigenvalues(&diag, &off).unwrap();
        for (j, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13, "{j}: {v} vs {exact}");
        }
        let vecs = tridiagonal_eigenvectors(&diag, &off, &ev[..3]);
        for (v, lambda) in vecs.iter().zip(&ev) {
            for i in 0..n {
                let mut tv = 2.0 * v[i];
                if i > 0 {
                    tv -= v[i - 1];
                }
                if i + 1 < n {
                    tv -= v[i + 1];
                }
                assert!((tv - lambda * v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn repeated_eigenvalues_get_orthogonal_vectors() {
        let a = DenseMatrix::from_diagonal(&[3.0, 1.0, 3.0, 3.0, 5.0]);
        let b = DenseMatrix::identity(5);
        let pairs = solve_gevp(&a, &b, 4).unwrap();
        let vals: Vec<f64> = pairs.iter().map(|p| p.value).collect();
        for (v, e) in vals.iter().zip([1.0, 3.0, 3.0, 3.0]) {
            assert!((v - e).abs() < 1e-13);
        }
        for i in 0..4 {
            for j in 0..4 {
                let d = dot(&pairs[i].vector, &pairs[j].vector);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10, "{i},{j}: {d}");
            }
        }
    }

    #[test]
    fn banded_profile_cholesky_matches_product() {
        let n = 12;
        let b = DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 4.0 + i as f64,
            1 => -1.0,
            _ => 0.0,
        });
        let chol = Cholesky::new(&b).unwrap();
        let g = chol.factor();
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| g[(i, k)] * g[(j, k)]).sum();
                assert!((s - b[(i, j)]).abs() < 1e-13);
            }
        }
    }
}
