//! Reference values computed independently of the library.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spherebuckle::gevp::DenseMatrix;

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `J_nu(x)` up to the positive factor `1 / Gamma(nu + 1)`, from the power series.
pub fn bessel_j_scaled(nu: f64, x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = (x / 2.0).powf(nu);
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// First positive zero of `J_1`, 3.8317059702...
pub fn j1_first_zero() -> f64 {
    bisect(3.0, 4.5, |x| bessel_j_scaled(1.0, x))
}

/// First positive root of `tan x = x`, which is the first zero of `J_{3/2}`.
pub fn tan_x_equals_x_root() -> f64 {
    bisect(4.0, 4.7, |x| x.sin() - x * x.cos())
}

/// `det(A - lambda B)` by Gaussian elimination with partial pivoting.
pub fn char_poly(a: &DenseMatrix, b: &DenseMatrix, lambda: f64) -> f64 {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)] - lambda * b[(i, j)]).collect())
        .collect();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))
            .unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for j in c..n {
                m[r][j] -= f * m[c][j];
            }
        }
    }
    det
}

/// All roots of `det(A - lambda B)` on `[0, upper]`, located by a fine scan for
/// sign changes and refined by bisection.
pub fn char_poly_roots(a: &DenseMatrix, b: &DenseMatrix, upper: f64, scan: usize) -> Vec<f64> {
    let f = |x: f64| char_poly(a, b, x);
    let mut roots = Vec::new();
    let mut x0 = 0.0;
    let mut f0 = f(x0);
    for i in 1..=scan {
        let x1 = upper * i as f64 / scan as f64;
        let f1 = f(x1);
        if f1 == 0.0 || f0 * f1 < 0.0 {
            roots.push(bisect(x0, x1, f));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// `A = X^T X + 0.1 I`, `B = Y^T Y + I` with entries of `X`, `Y` uniform in [-1, 1].
pub fn random_spd_pair(seed: u64, n: usize) -> (DenseMatrix, DenseMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gram = |shift: f64| {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        DenseMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|r| x[r][i] * x[r][j]).sum::<f64>() + if i == j { shift } else { 0.0 }
        })
    };
    let a = gram(0.1);
    let b = gram(1.0);
    (a, b)
}

/// Upper bound on the generalized eigenvalues: `||A||_F / lambda_min(B)` with
/// `lambda_min(B) >= 1` by construction.
pub fn eigen_upper(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    s.sqrt() * 1.01
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
