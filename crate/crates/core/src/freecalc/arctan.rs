//! Matrix arctan and its directional derivative.
//!
//! `arctan(X)` uses eigendecomposition functional calculus. The directional
//! derivative integrates the resolvent representation
//! `d arctan(X)[A] = int_0^1 (1/2)[(1+itX)^{-1} A (1+itX)^{-1} + c.c.] dt`
//! by 64-point Gauss-Legendre quadrature; for Hermitian `X` the integrand is
//! analytic on the whole interval.

use std::sync::OnceLock;

use ndarray_linalg::Inverse;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();

/// `arctan` applied to a Hermitian matrix through its spectrum.
pub fn arctan_apply(x: &CMat) -> Result<CMat> {
    linalg::hermitian_map(x, f64::atan)
}

/// Directional derivative of `arctan` at Hermitian `x` in direction `a`.
pub fn arctan_diff_apply(x: &CMat, a: &CMat) -> Result<CMat> {
    let n = x.nrows();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch("direction must match the base matrix".into()));
    }
    let rule = RULE.get_or_init(|| linalg::gauss_legendre_01(64));
    let mut out = linalg::zeros(n);
    for &(t, w) in rule.iter() {
        // resolvent (1 + i t X)^{-1}
        let mut m = linalg::identity(n);
        m.zip_mut_with(x, |mm, xx| *mm += Complex64::new(0.0, t) * xx);
        let inv = m.inv().map_err(|e| Error::Eigen(format!("resolvent inversion failed: {e}")))?;
        let term = inv.dot(a).dot(&inv);
        // The conjugate branch is the adjoint, so the pair sums to twice the
        // Hermitian part.
        let herm = linalg::hermitian_part(&term);
        out.zip_mut_with(&herm, |o, v| *o += v * w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randmat::{stream, MatrixTuple};
    use approx::assert_abs_diff_eq;

    #[test]
    fn arctan_at_zero() {
        let x = linalg::zeros(4);
        let y = arctan_apply(&x).unwrap();
        for v in y.iter() {
            assert_abs_diff_eq!(v.norm(), 0.0);
        }
        // Derivative at zero is the identity map.
        let mut rng = stream::derive(21, 0, stream::TAG_TEST);
        let a = MatrixTuple::random_hermitian(4, 1, 1.0, &mut rng).into_mats().remove(0);
        let d = arctan_diff_apply(&x, &a).unwrap();
        for (u, v) in d.iter().zip(a.iter()) {
            assert_abs_diff_eq!((u - v).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_matches_eigenbasis_difference_quotients() {
        // In the eigenbasis of X the derivative acts entrywise by
        // (arctan(l_i) - arctan(l_j)) / (l_i - l_j).
        let diag = vec![0.7, -1.3, 2.4, 0.1];
        let x = MatrixTuple::from_real_diagonals(&[diag.clone()]).unwrap().into_mats().remove(0);
        let mut rng = stream::derive(22, 0, stream::TAG_TEST);
        let a = MatrixTuple::random_hermitian(4, 1, 1.0, &mut rng).into_mats().remove(0);
        let d = arctan_diff_apply(&x, &a).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j {
                    1.0 / (1.0 + diag[i] * diag[i])
                } else {
                    (diag[i].atan() - diag[j].atan()) / (diag[i] - diag[j])
                };
                let got = d[[i, j]] / a[[i, j]];
                assert_abs_diff_eq!(got.re, expected, epsilon = 1e-8);
                assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn commuting_direction_uses_scalar_chain_rule() {
        // For A = p(X) the derivative is (1 + X^2)^{-1} A.
        let mut rng = stream::derive(23, 0, stream::TAG_TEST);
        let x = MatrixTuple::random_hermitian(5, 1, 1.0, &mut rng).into_mats().remove(0);
        let a = x.dot(&x); // p(X) = X^2
        let d = arctan_diff_apply(&x, &a).unwrap();
        let expected = linalg::hermitian_map(&x, |l| l * l / (1.0 + l * l)).unwrap();
        for (u, v) in d.iter().zip(expected.iter()) {
            assert_abs_diff_eq!((u - v).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn finite_difference_cross_check() {
        let mut rng = stream::derive(24, 0, stream::TAG_TEST);
        let x = MatrixTuple::random_hermitian(6, 1, 1.0, &mut rng).into_mats().remove(0);
        let a = MatrixTuple::random_hermitian(6, 1, 1.0, &mut rng).into_mats().remove(0);
        let h = 1e-5;
        let mut xp = x.clone();
        xp.zip_mut_with(&a, |v, w| *v += w * h);
        let mut xm = x.clone();
        xm.zip_mut_with(&a, |v, w| *v -= w * h);
        let fd = (arctan_apply(&xp).unwrap() - arctan_apply(&xm).unwrap()).mapv(|z| z / (2.0 * h));
        let d = arctan_diff_apply(&x, &a).unwrap();
        for (u, v) in d.iter().zip(fd.iter()) {
            assert_abs_diff_eq!((u - v).norm(), 0.0, epsilon = 1e-6);
        }
    }
}
