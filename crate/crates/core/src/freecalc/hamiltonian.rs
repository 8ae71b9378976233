//! Closed-form Hamiltonians for the worked control problems, together with
//! their defining Legendre pairings, analytic maximizers, and admissible
//! control samplers used by the sup-consistency checks.
//!
//! Constant running costs shift a Hamiltonian by a constant; they stay in
//! the problem definition, so each kind here is the supremum of its pairing
//! over the admissible controls and is attained by the stated maximizer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::freecalc::CylinderFunction;
use crate::linalg;
use crate::randmat::MatrixTuple;

#[derive(Clone, Debug)]
pub enum HamiltonianSpec {
    /// `H(X, P) = |P|^2 / 2 - phi(X)`, from the drift `b = alpha` and the
    /// running cost `|alpha|^2 / 2 + phi(X)`.
    Quadratic { potential: Option<CylinderFunction> },
    /// `H(P) = |P|` over the constraint `|alpha| <= 1` in `L^2`.
    EikonalL2,
    /// `H(P) = sum_j tr_n |P^j|` over the constraint `|alpha|_inf <= 1`.
    EikonalL1,
    /// `H(X, P) = sum_j |[P^j, X^j]|^2 / 2`, from the commutator drift
    /// `b = i[X, alpha]` and the running cost `|alpha|^2 / 2`.
    CommutatorQuadratic,
}

impl HamiltonianSpec {
    pub fn quadratic() -> Self {
        HamiltonianSpec::Quadratic { potential: None }
    }

    /// Closed-form value.
    pub fn eval(&self, x: &MatrixTuple, p: &MatrixTuple) -> Result<f64> {
        check_pair(x, p)?;
        match self {
            HamiltonianSpec::Quadratic { potential } => {
                let pot = match potential {
                    Some(phi) => phi.value(x)?,
                    None => 0.0,
                };
                let nrm = p.l2_norm();
                Ok(0.5 * nrm * nrm - pot)
            }
            HamiltonianSpec::EikonalL2 => Ok(p.l2_norm()),
            HamiltonianSpec::EikonalL1 => {
                let mut total = 0.0;
                for m in p.mats() {
                    let (vals, _) = linalg::eigh(m)?;
                    total += vals.iter().map(|v| v.abs()).sum::<f64>() / m.nrows() as f64;
                }
                Ok(total)
            }
            HamiltonianSpec::CommutatorQuadratic => {
                let mut total = 0.0;
                for (pm, xm) in p.mats().iter().zip(x.mats()) {
                    let c = pm.dot(xm) - xm.dot(pm);
                    total += linalg::inner_n(&c, &c);
                }
                Ok(0.5 * total)
            }
        }
    }

    /// The drift this kind pairs against: `alpha` itself, or the elementwise
    /// commutator `i[X^j, alpha^j]`.
    pub fn drift(&self, x: &MatrixTuple, alpha: &MatrixTuple) -> Result<MatrixTuple> {
        check_pair(x, alpha)?;
        match self {
            HamiltonianSpec::CommutatorQuadratic => Ok(commutator_drift(x, alpha)),
            _ => Ok(alpha.clone()),
        }
    }

    /// `<b(X, alpha), P> - L(X, alpha)`, excluding constant running costs.
    pub fn legendre_pairing(&self, x: &MatrixTuple, p: &MatrixTuple, alpha: &MatrixTuple) -> Result<f64> {
        check_pair(x, p)?;
        check_pair(x, alpha)?;
        match self {
            HamiltonianSpec::Quadratic { potential } => {
                let pot = match potential {
                    Some(phi) => phi.value(x)?,
                    None => 0.0,
                };
                let nrm = alpha.l2_norm();
                Ok(alpha.inner(p)? - 0.5 * nrm * nrm - pot)
            }
            HamiltonianSpec::EikonalL2 | HamiltonianSpec::EikonalL1 => alpha.inner(p),
            HamiltonianSpec::CommutatorQuadratic => {
                let b = commutator_drift(x, alpha);
                let nrm = alpha.l2_norm();
                Ok(b.inner(p)? - 0.5 * nrm * nrm)
            }
        }
    }

    /// The control attaining the supremum of the pairing.
    pub fn maximizer(&self, x: &MatrixTuple, p: &MatrixTuple) -> Result<MatrixTuple> {
        check_pair(x, p)?;
        match self {
            HamiltonianSpec::Quadratic { .. } => Ok(p.clone()),
            HamiltonianSpec::EikonalL2 => {
                let nrm = p.l2_norm();
                if nrm == 0.0 {
                    Ok(MatrixTuple::zeros(p.size(), p.dims()))
                } else {
                    Ok(p.scale(1.0 / nrm))
                }
            }
            HamiltonianSpec::EikonalL1 => {
                let mats = p
                    .mats()
                    .iter()
                    .map(|m| linalg::hermitian_map(m, f64::signum))
                    .collect::<Result<Vec<_>>>()?;
                Ok(MatrixTuple::from_parts(mats, p.size()))
            }
            HamiltonianSpec::CommutatorQuadratic => {
                // alpha* = i [P, X] componentwise.
                let mats = p
                    .mats()
                    .iter()
                    .zip(x.mats())
                    .map(|(pm, xm)| {
                        let c = pm.dot(xm) - xm.dot(pm);
                        let mut m = c.mapv(|z| z * num_complex::Complex64::new(0.0, 1.0));
                        linalg::hermitize_inplace(&mut m);
                        m
                    })
                    .collect();
                Ok(MatrixTuple::from_parts(mats, p.size()))
            }
        }
    }

    /// A random admissible control for the sup-consistency sampling; drawn
    /// inside the kind's constraint set.
    pub fn sample_admissible(&self, x: &MatrixTuple, scale: f64, rng: &mut impl Rng) -> Result<MatrixTuple> {
        let h = MatrixTuple::random_hermitian(x.size(), x.dims(), 1.0, rng);
        match self {
            HamiltonianSpec::Quadratic { .. } | HamiltonianSpec::CommutatorQuadratic => {
                Ok(h.scale(scale * rng.gen_range(0.0..1.0)))
            }
            HamiltonianSpec::EikonalL2 => {
                let nrm = h.l2_norm().max(1e-12);
                Ok(h.scale(rng.gen_range(0.0..1.0) / nrm))
            }
            HamiltonianSpec::EikonalL1 => {
                let nrm = h.op_norm()?.max(1e-12);
                Ok(h.scale(rng.gen_range(0.0..1.0) / nrm))
            }
        }
    }
}

/// Elementwise `i [X^j, A^j]`; Hermitian for Hermitian inputs.
pub fn commutator_drift(x: &MatrixTuple, alpha: &MatrixTuple) -> MatrixTuple {
    let mats = x
        .mats()
        .iter()
        .zip(alpha.mats())
        .map(|(xm, am)| {
            let c = xm.dot(am) - am.dot(xm);
            let mut m = c.mapv(|z| z * num_complex::Complex64::new(0.0, 1.0));
            linalg::hermitize_inplace(&mut m);
            m
        })
        .collect();
    MatrixTuple::from_parts(mats, x.size())
}

fn check_pair(x: &MatrixTuple, p: &MatrixTuple) -> Result<()> {
    if x.size() != p.size() || x.dims() != p.dims() {
        return Err(Error::DimensionMismatch(format!(
            "tuples ({}, d={}) vs ({}, d={})",
            x.size(),
            x.dims(),
            p.size(),
            p.dims()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randmat::stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_basics() {
        let h = HamiltonianSpec::quadratic();
        let x = MatrixTuple::zeros(3, 1);
        let p = MatrixTuple::zeros(3, 1);
        assert_abs_diff_eq!(h.eval(&x, &p).unwrap(), 0.0);
        let p = MatrixTuple::ones(3, 1);
        assert_abs_diff_eq!(h.eval(&x, &p).unwrap(), 0.5);
    }

    #[test]
    fn eikonal_l2_on_unit_momentum() {
        let h = HamiltonianSpec::EikonalL2;
        let x = MatrixTuple::zeros(2, 1);
        let p = MatrixTuple::ones(2, 1); // |P| = 1
        assert_abs_diff_eq!(h.eval(&x, &p).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eikonal_l1_sums_absolute_eigenvalues() {
        let h = HamiltonianSpec::EikonalL1;
        let x = MatrixTuple::zeros(2, 1);
        let p = MatrixTuple::from_real_diagonals(&[vec![2.0, -1.0]]).unwrap();
        assert_abs_diff_eq!(h.eval(&x, &p).unwrap(), 1.5, epsilon = 1e-14);
    }

    #[test]
    fn commutator_vanishes_on_commuting_pair() {
        let h = HamiltonianSpec::CommutatorQuadratic;
        let x = MatrixTuple::from_real_diagonals(&[vec![1.0, 2.0]]).unwrap();
        let p = MatrixTuple::from_real_diagonals(&[vec![-3.0, 0.5]]).unwrap();
        assert_abs_diff_eq!(h.eval(&x, &p).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn maximizer_attains_each_kind() {
        let mut rng = stream::derive(31, 0, stream::TAG_TEST);
        let kinds = [
            HamiltonianSpec::quadratic(),
            HamiltonianSpec::EikonalL2,
            HamiltonianSpec::EikonalL1,
            HamiltonianSpec::CommutatorQuadratic,
        ];
        for kind in kinds {
            for _ in 0..5 {
                let x = MatrixTuple::random_hermitian(6, 2, 1.0, &mut rng);
                let p = MatrixTuple::random_hermitian(6, 2, 1.0, &mut rng);
                let closed = kind.eval(&x, &p).unwrap();
                let star = kind.maximizer(&x, &p).unwrap();
                let attained = kind.legendre_pairing(&x, &p, &star).unwrap();
                assert_abs_diff_eq!(closed, attained, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn sampled_controls_never_beat_the_closed_form() {
        let mut rng = stream::derive(32, 0, stream::TAG_TEST);
        let kinds = [
            HamiltonianSpec::quadratic(),
            HamiltonianSpec::EikonalL2,
            HamiltonianSpec::EikonalL1,
            HamiltonianSpec::CommutatorQuadratic,
        ];
        for kind in kinds {
            let x = MatrixTuple::random_hermitian(5, 2, 1.0, &mut rng);
            let p = MatrixTuple::random_hermitian(5, 2, 1.0, &mut rng);
            let closed = kind.eval(&x, &p).unwrap();
            for _ in 0..500 {
                let alpha = kind.sample_admissible(&x, 3.0, &mut rng).unwrap();
                let pairing = kind.legendre_pairing(&x, &p, &alpha).unwrap();
                assert!(
                    pairing <= closed + 1e-8,
                    "pairing {pairing} exceeded H = {closed}"
                );
            }
        }
    }
}
