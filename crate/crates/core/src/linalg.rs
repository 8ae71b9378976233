//! Small dense complex linear algebra helpers shared across modules.
//!
//! Everything operates on [`CMat`], an owned `ndarray` matrix of `Complex64`.
//! Matrix products go through BLAS; eigendecompositions through LAPACK's
//! Hermitian solver.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Array2<Complex64>;

pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

pub fn zeros(n: usize) -> CMat {
    Array2::zeros((n, n))
}

/// Hermitian part `(a + a*)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut out = a.clone();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = (a[[i, j]] + a[[j, i]].conj()) * 0.5;
        }
    }
    out
}

/// In-place symmetrization `a <- (a + a*)/2`.
pub fn hermitize_inplace(a: &mut CMat) {
    let n = a.nrows();
    for i in 0..n {
        let d = a[[i, i]];
        a[[i, i]] = Complex64::new(d.re, 0.0);
        for j in (i + 1)..n {
            let v = (a[[i, j]] + a[[j, i]].conj()) * 0.5;
            a[[i, j]] = v;
            a[[j, i]] = v.conj();
        }
    }
}

/// Largest entrywise deviation of `a` from its own adjoint.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    dev
}

/// Normalized trace `tr(a) / n`.
pub fn trace_n(a: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        s += a[[i, i]];
    }
    s / n as f64
}

/// `tr(a b) / n` computed by index pairing, without forming the product.
pub fn pair_trace_n(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    debug_assert_eq!(b.nrows(), n);
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[[i, j]] * b[[j, i]];
        }
    }
    s / n as f64
}

/// Real `L^2` inner product `Re tr(a* b) / n`.
pub fn inner_n(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        s += x.re * y.re + x.im * y.im;
    }
    s / n as f64
}

/// `L^2` norm `sqrt(tr(a* a) / n)`.
pub fn l2_norm(a: &CMat) -> f64 {
    inner_n(a, a).sqrt()
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix, with
/// eigenvectors as columns (`a = q diag(vals) q*`).
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let (vals, vecs) = a
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Eigen(e.to_string()))?;
    // ndarray-linalg's Hermitian solver hands back conjugated eigenvector
    // columns for row-major complex input; undo that so columns satisfy
    // a v = lambda v (pinned by a unit test below).
    Ok((vals.to_vec(), vecs.mapv(|z| z.conj())))
}

/// Applies a real scalar function to a Hermitian matrix by functional calculus.
pub fn hermitian_map(a: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let (vals, q) = eigh(a)?;
    Ok(scaled_reconstruct(&q, &vals.iter().map(|&v| Complex64::new(f(v), 0.0)).collect::<Vec<_>>()))
}

/// `e^{i s h}` for Hermitian `h`; the result is unitary.
pub fn expm_i_hermitian(h: &CMat, s: f64) -> Result<CMat> {
    let (vals, q) = eigh(h)?;
    let phases: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(0.0, s * v).exp()).collect();
    Ok(scaled_reconstruct(&q, &phases))
}

// q * diag(w) * q^*
fn scaled_reconstruct(q: &CMat, w: &[Complex64]) -> CMat {
    let n = q.nrows();
    let mut scaled = q.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[[i, j]] *= w[j];
        }
    }
    let qh = conj_transpose(q);
    scaled.dot(&qh)
}

pub fn conj_transpose(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// `u x u*` conjugation.
pub fn conjugate(u: &CMat, x: &CMat) -> CMat {
    u.dot(x).dot(&conj_transpose(u))
}

/// Pairwise (cascade) summation; order-stable and less lossy than a left fold.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_01(k: usize) -> Vec<(f64, f64)> {
    // Newton iteration on P_k over [-1, 1], then affine map to [0, 1].
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(k, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(k, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((x + 1.0) * 0.5, w * 0.5));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre_and_derivative(k: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return (1.0, 0.0);
    }
    for m in 2..=k {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    let dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Cubic Hermite interpolation of `y(t)` on `[t0, t1]` from endpoint values
/// and derivatives.
pub fn hermite_interp(t0: f64, t1: f64, y0: f64, y1: f64, dy0: f64, dy1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * dy0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * dy1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn sample_matrix() -> CMat {
        let mut a = zeros(3);
        a[[0, 0]] = Complex64::new(1.0, 0.0);
        a[[0, 1]] = Complex64::new(0.5, 0.25);
        a[[1, 0]] = Complex64::new(0.5, -0.25);
        a[[1, 1]] = Complex64::new(-2.0, 0.0);
        a[[2, 2]] = Complex64::new(0.5, 0.0);
        a[[0, 2]] = Complex64::new(0.0, 1.0);
        a[[2, 0]] = Complex64::new(0.0, -1.0);
        a
    }

    #[test]
    fn eigh_columns_are_eigenvectors() {
        let a = sample_matrix();
        let (vals, q) = eigh(&a).unwrap();
        // a q = q diag(vals), and q diag(vals) q* reconstructs a.
        let rec = scaled_reconstruct(&q, &vals.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
        for (x, y) in rec.iter().zip(a.iter()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-12);
        }
        for j in 0..3 {
            for i in 0..3 {
                let av: Complex64 = (0..3).map(|k| a[[i, k]] * q[[k, j]]).sum();
                assert_abs_diff_eq!((av - q[[i, j]] * vals[j]).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pair_trace_matches_product_trace() {
        let a = sample_matrix();
        let b = hermitian_part(&sample_matrix().dot(&sample_matrix()));
        let direct = trace_n(&a.dot(&b));
        let paired = pair_trace_n(&a, &b);
        assert_abs_diff_eq!(direct.re, paired.re, epsilon = 1e-13);
        assert_abs_diff_eq!(direct.im, paired.im, epsilon = 1e-13);
    }

    #[test]
    fn expm_is_unitary_and_diagonalizes() {
        let h = sample_matrix();
        let u = expm_i_hermitian(&h, 0.7).unwrap();
        let id = u.dot(&conj_transpose(&u));
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(id[[i, j]].re, expect, epsilon = 1e-12);
                assert_abs_diff_eq!(id[[i, j]].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // 5-point rule is exact through degree 9.
        let rule = gauss_legendre_01(5);
        for p in 0..=9u32 {
            let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(p as i32)).sum();
            assert_abs_diff_eq!(got, 1.0 / (p as f64 + 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn gauss_legendre_64_point_rule_is_accurate() {
        let rule = gauss_legendre_01(64);
        let got: f64 = rule.iter().map(|&(x, w)| w / (1.0 + x * x)).sum();
        assert_abs_diff_eq!(got, std::f64::consts::FRAC_PI_4, epsilon = 1e-14);
    }

    #[test]
    fn hermite_interp_reproduces_cubics() {
        let f = |t: f64| 2.0 * t * t * t - t * t + 3.0 * t - 5.0;
        let df = |t: f64| 6.0 * t * t - 2.0 * t + 3.0;
        let (t0, t1) = (0.25, 0.75);
        for k in 0..=10 {
            let t = t0 + (t1 - t0) * k as f64 / 10.0;
            let got = hermite_interp(t0, t1, f(t0), f(t1), df(t0), df(t1), t);
            assert_abs_diff_eq!(got, f(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn pairwise_sum_matches_exact_rationals() {
        let xs: Vec<f64> = (1..=1000).map(|k| 1.0 / k as f64).collect();
        let expected: f64 = xs.iter().rev().sum();
        assert_abs_diff_eq!(pairwise_sum(&xs), expected, epsilon = 1e-12);
    }
}
