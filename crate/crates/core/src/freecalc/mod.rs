//! Cylindrical test functions `U(X) = g(tr_n f_1(X), ..., tr_n f_m(X))` and
//! their calculus: gradient, Hessian bilinear form, the common-noise
//! Laplacian `Hess U[1, 1]`, and the free-individual-noise Laplacian, both
//! as an exact combinatorial formula and as a GUE Monte Carlo estimate.
//!
//! Inner polynomials must be self-adjoint so the traced values are real.
//! An optional `arctan` composition applies `arctan` to every matrix
//! argument before the polynomials; it is supported for values and first
//! derivatives only.

mod arctan;
mod hamiltonian;

pub use arctan::{arctan_apply, arctan_diff_apply};
pub use hamiltonian::HamiltonianSpec;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::ncpoly::{EvalCache, NcPolynomial, PolyTerm, TensorPolynomial, Word};
use crate::randmat::{self, MatrixTuple};

/// Outer function `g: R^m -> R` with analytic gradient and Hessian.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OuterFn {
    /// `g(v) = c + sum_o w_o v_o`
    Linear { constant: f64, weights: Vec<f64> },
    /// `g(v) = c + l . v + v . Q v` with `Q` symmetric.
    Quadratic { constant: f64, linear: Vec<f64>, quad: Vec<Vec<f64>> },
    /// Polynomial in `m` variables given as (exponent vector, coefficient).
    Polynomial { vars: usize, terms: Vec<OuterTerm> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OuterTerm {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

impl OuterFn {
    pub fn linear_single() -> Self {
        OuterFn::Linear { constant: 0.0, weights: vec![1.0] }
    }

    pub fn zero(arity: usize) -> Self {
        OuterFn::Linear { constant: 0.0, weights: vec![0.0; arity] }
    }

    pub fn arity(&self) -> usize {
        match self {
            OuterFn::Linear { weights, .. } => weights.len(),
            OuterFn::Quadratic { linear, .. } => linear.len(),
            OuterFn::Polynomial { vars, .. } => *vars,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OuterFn::Linear { .. } => Ok(()),
            OuterFn::Quadratic { linear, quad, .. } => {
                let m = linear.len();
                if quad.len() != m || quad.iter().any(|row| row.len() != m) {
                    return Err(Error::InvalidConfig("quadratic form must be m x m".into()));
                }
                for i in 0..m {
                    for j in 0..m {
                        if (quad[i][j] - quad[j][i]).abs() > 1e-12 {
                            return Err(Error::InvalidConfig("quadratic form must be symmetric".into()));
                        }
                    }
                }
                Ok(())
            }
            OuterFn::Polynomial { vars, terms } => {
                if terms.iter().any(|t| t.exponents.len() != *vars) {
                    return Err(Error::InvalidConfig("exponent vectors must have length vars".into()));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        match self {
            OuterFn::Linear { constant, weights } => {
                constant + weights.iter().zip(v).map(|(w, x)| w * x).sum::<f64>()
            }
            OuterFn::Quadratic { constant, linear, quad } => {
                let mut out = *constant;
                for (l, x) in linear.iter().zip(v) {
                    out += l * x;
                }
                for (row, x) in quad.iter().zip(v) {
                    for (q, y) in row.iter().zip(v) {
                        out += q * x * y;
                    }
                }
                out
            }
            OuterFn::Polynomial { terms, .. } => terms
                .iter()
                .map(|t| {
                    t.coeff
                        * t.exponents
                            .iter()
                            .zip(v)
                            .map(|(&e, x)| x.powi(e as i32))
                            .product::<f64>()
                })
                .sum(),
        }
    }

    pub fn grad(&self, v: &[f64]) -> Vec<f64> {
        match self {
            OuterFn::Linear { weights, .. } => weights.clone(),
            OuterFn::Quadratic { linear, quad, .. } => {
                let m = linear.len();
                let mut out = linear.clone();
                for o in 0..m {
                    for q in 0..m {
                        out[o] += 2.0 * quad[o][q] * v[q];
                    }
                }
                out
            }
            OuterFn::Polynomial { vars, terms } => {
                let mut out = vec![0.0; *vars];
                for t in terms {
                    for o in 0..*vars {
                        if t.exponents[o] == 0 {
                            continue;
                        }
                        let mut term = t.coeff * t.exponents[o] as f64;
                        for (k, &e) in t.exponents.iter().enumerate() {
                            let e = if k == o { e - 1 } else { e };
                            term *= v[k].powi(e as i32);
                        }
                        out[o] += term;
                    }
                }
                out
            }
        }
    }

    pub fn hess(&self, v: &[f64]) -> Vec<Vec<f64>> {
        let m = self.arity();
        match self {
            OuterFn::Linear { .. } => vec![vec![0.0; m]; m],
            OuterFn::Quadratic { quad, .. } => {
                quad.iter().map(|row| row.iter().map(|q| 2.0 * q).collect()).collect()
            }
            OuterFn::Polynomial { vars, terms } => {
                let mut out = vec![vec![0.0; *vars]; *vars];
                for t in terms {
                    for o in 0..*vars {
                        for q in 0..*vars {
                            let (eo, eq) = (t.exponents[o], t.exponents[q]);
                            let factor = if o == q {
                                if eo < 2 {
                                    continue;
                                }
                                (eo * (eo - 1)) as f64
                            } else {
                                if eo == 0 || eq == 0 {
                                    continue;
                                }
                                (eo * eq) as f64
                            };
                            let mut term = t.coeff * factor;
                            for (k, &e) in t.exponents.iter().enumerate() {
                                let mut e = e;
                                if k == o {
                                    e -= 1;
                                }
                                if k == q {
                                    e -= 1;
                                }
                                term *= v[k].powi(e as i32);
                            }
                            out[o][q] += term;
                        }
                    }
                }
                out
            }
        }
    }

    /// Coefficient-wise cubic Hermite interpolation between two nodes of the
    /// same family, with the matching nodes of the time derivative providing
    /// the endpoint slopes.
    fn hermite_between(
        t0: f64,
        t1: f64,
        y0: &OuterFn,
        y1: &OuterFn,
        dy0: &OuterFn,
        dy1: &OuterFn,
        t: f64,
    ) -> Result<OuterFn> {
        let h = |a: f64, b: f64, da: f64, db: f64| linalg::hermite_interp(t0, t1, a, b, da, db, t);
        match (y0, y1, dy0, dy1) {
            (
                OuterFn::Linear { constant: c0, weights: w0 },
                OuterFn::Linear { constant: c1, weights: w1 },
                OuterFn::Linear { constant: dc0, weights: dw0 },
                OuterFn::Linear { constant: dc1, weights: dw1 },
            ) => Ok(OuterFn::Linear {
                constant: h(*c0, *c1, *dc0, *dc1),
                weights: (0..w0.len()).map(|k| h(w0[k], w1[k], dw0[k], dw1[k])).collect(),
            }),
            (
                OuterFn::Quadratic { constant: c0, linear: l0, quad: q0 },
                OuterFn::Quadratic { constant: c1, linear: l1, quad: q1 },
                OuterFn::Quadratic { constant: dc0, linear: dl0, quad: dq0 },
                OuterFn::Quadratic { constant: dc1, linear: dl1, quad: dq1 },
            ) => Ok(OuterFn::Quadratic {
                constant: h(*c0, *c1, *dc0, *dc1),
                linear: (0..l0.len()).map(|k| h(l0[k], l1[k], dl0[k], dl1[k])).collect(),
                quad: (0..q0.len())
                    .map(|i| (0..q0.len()).map(|j| h(q0[i][j], q1[i][j], dq0[i][j], dq1[i][j])).collect())
                    .collect(),
            }),
            _ => Err(Error::Unsupported(
                "time interpolation requires matching outer families (linear or quadratic)".into(),
            )),
        }
    }
}

/// Immutable inner data of a cylinder function together with the symbolic
/// derivatives every evaluation reuses.
#[derive(Debug)]
pub struct InnerParts {
    dims: usize,
    polys: Vec<NcPolynomial>,
    compose_arctan: bool,
    /// `grads[o][j-1] = D°_{x_j} f_o`
    grads: Vec<Vec<NcPolynomial>>,
    /// `second[o][i-1][j-1] = d_{x_i} D°_{x_j} f_o`
    second: Vec<Vec<Vec<TensorPolynomial>>>,
}

impl InnerParts {
    fn new(dims: usize, polys: Vec<NcPolynomial>, compose_arctan: bool) -> Result<Self> {
        for (o, p) in polys.iter().enumerate() {
            crate::ncpoly::check_same_dims(p.dims(), dims)?;
            if !p.is_self_adjoint() {
                return Err(Error::InvalidConfig(format!("inner polynomial {o} is not self-adjoint")));
            }
        }
        let mut grads = Vec::with_capacity(polys.len());
        let mut second = Vec::with_capacity(polys.len());
        for p in &polys {
            let g: Vec<NcPolynomial> =
                (1..=dims as u8).map(|j| p.cyclic_diff(j)).collect::<Result<_>>()?;
            let s: Vec<Vec<TensorPolynomial>> = (1..=dims as u8)
                .map(|i| g.iter().map(|gj| gj.free_diff(i)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            grads.push(g);
            second.push(s);
        }
        Ok(InnerParts { dims, polys, compose_arctan, grads, second })
    }
}

/// Test function `U(X) = g(tr_n f_1(psi(X)), ..., tr_n f_m(psi(X)))` with
/// `psi = id` or `psi = arctan` applied componentwise.
#[derive(Clone, Debug)]
pub struct CylinderFunction {
    inner: Arc<InnerParts>,
    outer: OuterFn,
}

impl CylinderFunction {
    pub fn new(dims: usize, inner: Vec<NcPolynomial>, outer: OuterFn) -> Result<Self> {
        Self::build(dims, inner, outer, false)
    }

    /// Same, with `arctan` applied to every matrix argument first.
    pub fn new_arctan(dims: usize, inner: Vec<NcPolynomial>, outer: OuterFn) -> Result<Self> {
        Self::build(dims, inner, outer, true)
    }

    fn build(dims: usize, inner: Vec<NcPolynomial>, outer: OuterFn, compose_arctan: bool) -> Result<Self> {
        outer.validate()?;
        if outer.arity() != inner.len() {
            return Err(Error::DimensionMismatch(format!(
                "outer function takes {} slots but {} inner polynomials given",
                outer.arity(),
                inner.len()
            )));
        }
        Ok(CylinderFunction { inner: Arc::new(InnerParts::new(dims, inner, compose_arctan)?), outer })
    }

    fn with_outer(inner: Arc<InnerParts>, outer: OuterFn) -> Result<Self> {
        outer.validate()?;
        if outer.arity() != inner.polys.len() {
            return Err(Error::DimensionMismatch("outer arity vs inner slot count".into()));
        }
        Ok(CylinderFunction { inner, outer })
    }

    /// `tr_n(x_j^k)`.
    pub fn trace_power(dims: usize, j: u8, k: usize) -> Result<Self> {
        Self::new(dims, vec![NcPolynomial::power(dims, j, k)?], OuterFn::linear_single())
    }

    /// `tr_n(p(X))` for self-adjoint `p`.
    pub fn trace_poly(p: NcPolynomial) -> Result<Self> {
        let dims = p.dims();
        Self::new(dims, vec![p], OuterFn::linear_single())
    }

    /// `tr_n(x_j)^2`.
    pub fn trace_squared(dims: usize, j: u8) -> Result<Self> {
        Self::new(
            dims,
            vec![NcPolynomial::letter(dims, j)?],
            OuterFn::Quadratic { constant: 0.0, linear: vec![0.0], quad: vec![vec![1.0]] },
        )
    }

    /// `tr_n` of the symmetrized word `(w + w*)/2`; equals `Re tr_n(w(X))`.
    pub fn trace_symmetrized_word(dims: usize, word: Word) -> Result<Self> {
        let p = NcPolynomial::monomial(dims, word.clone(), num_complex::Complex64::new(0.5, 0.0))?;
        let sym = p.add(&p.adjoint())?;
        Self::new(dims, vec![sym], OuterFn::linear_single())
    }

    pub fn dims(&self) -> usize {
        self.inner.dims
    }

    pub fn outer(&self) -> &OuterFn {
        &self.outer
    }

    pub fn inner_polys(&self) -> &[NcPolynomial] {
        &self.inner.polys
    }

    pub fn composes_arctan(&self) -> bool {
        self.inner.compose_arctan
    }

    fn require_polynomial(&self, what: &str) -> Result<()> {
        if self.inner.compose_arctan {
            return Err(Error::Unsupported(format!(
                "{what} is not available for arctan-composed inner functions"
            )));
        }
        Ok(())
    }

    /// The tuple the polynomials are evaluated at: `X` itself, or the
    /// componentwise arctan.
    fn argument(&self, x: &MatrixTuple) -> Result<MatrixTuple> {
        if self.inner.compose_arctan {
            let mats = x.mats().iter().map(arctan_apply).collect::<Result<Vec<_>>>()?;
            MatrixTuple::new(mats)
        } else {
            Ok(x.clone())
        }
    }

    /// Traced inner values `v_o = tr_n f_o(psi(X))`.
    pub fn inner_values(&self, x: &MatrixTuple) -> Result<Vec<f64>> {
        let y = self.argument(x)?;
        let mut cache = EvalCache::new(&y);
        self.inner_values_cached(&mut cache)
    }

    fn inner_values_cached(&self, cache: &mut EvalCache) -> Result<Vec<f64>> {
        self.inner.polys.iter().map(|p| Ok(p.trace_eval_cached(cache)?.re)).collect()
    }

    pub fn value(&self, x: &MatrixTuple) -> Result<f64> {
        Ok(self.outer.value(&self.inner_values(x)?))
    }

    /// Value reusing a caller-provided cache over the plain argument; only
    /// valid without the arctan composition.
    pub fn value_cached(&self, cache: &mut EvalCache) -> Result<f64> {
        self.require_polynomial("cached evaluation")?;
        Ok(self.outer.value(&self.inner_values_cached(cache)?))
    }

    /// Gradient tuple: component `j` is `sum_o g_o D°_{x_j}(f_o ∘ psi)(X)`.
    pub fn grad(&self, x: &MatrixTuple) -> Result<MatrixTuple> {
        let y = self.argument(x)?;
        let mut cache = EvalCache::new(&y);
        let v = self.inner_values_cached(&mut cache)?;
        let g = self.outer.grad(&v);
        let n = x.size();
        let d = self.inner.dims;
        let mut parts = vec![linalg::zeros(n); d];
        for (o, go) in g.iter().enumerate() {
            if *go == 0.0 {
                continue;
            }
            for j in 0..d {
                let m = self.inner.grads[o][j].evaluate_cached(&mut cache)?;
                parts[j].zip_mut_with(&m, |acc, val| *acc += val * *go);
            }
        }
        if self.inner.compose_arctan {
            // Chain rule through psi: the derivative of arctan at X_j is a
            // symmetric operator, so it moves onto the gradient factor.
            for (j, part) in parts.iter_mut().enumerate() {
                *part = arctan_diff_apply(&x.mats()[j], part)?;
            }
        }
        for p in &mut parts {
            linalg::hermitize_inplace(p);
        }
        Ok(MatrixTuple::from_parts(parts, n))
    }

    pub fn grad_cached(&self, cache: &mut EvalCache) -> Result<MatrixTuple> {
        self.require_polynomial("cached gradient")?;
        let v = self.inner_values_cached(cache)?;
        let g = self.outer.grad(&v);
        let n = cache.tuple().size();
        let d = self.inner.dims;
        let mut parts = vec![linalg::zeros(n); d];
        for (o, go) in g.iter().enumerate() {
            if *go == 0.0 {
                continue;
            }
            for j in 0..d {
                let m = self.inner.grads[o][j].evaluate_cached(cache)?;
                parts[j].zip_mut_with(&m, |acc, val| *acc += val * *go);
            }
        }
        Ok(MatrixTuple::from_parts(parts, n))
    }

    /// Common-noise Laplacian `Hess U[1, 1]`, evaluated through word traces.
    pub fn common_laplacian_cached(&self, cache: &mut EvalCache) -> Result<f64> {
        self.require_polynomial("common-noise Laplacian")?;
        let v = self.inner_values_cached(cache)?;
        let g1 = self.outer.grad(&v);
        let g2 = self.outer.hess(&v);
        let d = self.inner.dims;
        let m = self.inner.polys.len();

        // Outer part: sum_{oq} g_oq (sum_i tr D_i f_o)(sum_j tr D_j f_q).
        let mut grad_trace = vec![0.0; m];
        for o in 0..m {
            for j in 0..d {
                grad_trace[o] += self.inner.grads[o][j].trace_eval_cached(cache)?.re;
            }
        }
        let mut out = 0.0;
        for o in 0..m {
            for q in 0..m {
                if g2[o][q] != 0.0 {
                    out += g2[o][q] * grad_trace[o] * grad_trace[q];
                }
            }
        }
        // Inner part: sum_o g_o sum_{ij} <(d_i D_j f_o) # 1, 1> where each
        // elementary tensor (l, r) contributes tr_n(l r).
        for o in 0..m {
            if g1[o] == 0.0 {
                continue;
            }
            for i in 0..d {
                for j in 0..d {
                    for ((l, r), c) in self.inner.second[o][i][j].terms() {
                        out += g1[o] * (c * cache.trace(&l.concat(r))?).re;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Free-individual-noise Laplacian on polynomial cylinder functions:
    /// `sum_i (tr (x) tr)(d_{x_i} (grad U)^i)`. The outer-Hessian tensor
    /// term is omitted: paired against a freely independent semicircular it
    /// evaluates to zero.
    pub fn free_laplacian_cached(&self, cache: &mut EvalCache) -> Result<f64> {
        self.require_polynomial("free Laplacian")?;
        let v = self.inner_values_cached(cache)?;
        let g1 = self.outer.grad(&v);
        let d = self.inner.dims;
        let mut out = 0.0;
        for (o, go) in g1.iter().enumerate() {
            if *go == 0.0 {
                continue;
            }
            for i in 0..d {
                out += go * self.inner.second[o][i][i].tensor_trace_cached(cache)?.re;
            }
        }
        Ok(out)
    }
}

/// Gradient of a cylinder function at a matrix tuple.
pub fn grad(u: &CylinderFunction, x: &MatrixTuple) -> Result<MatrixTuple> {
    u.grad(x)
}

/// Hessian bilinear form at `x` applied to tuple directions `(a, b)`.
pub fn hess_apply(u: &CylinderFunction, x: &MatrixTuple, a: &MatrixTuple, b: &MatrixTuple) -> Result<f64> {
    HessOperator::new(u, x)?.apply(a, b)
}

/// Common-noise Laplacian `Hess U[1, 1]`.
pub fn common_laplacian(u: &CylinderFunction, x: &MatrixTuple) -> Result<f64> {
    u.require_polynomial("common-noise Laplacian")?;
    let mut cache = EvalCache::new(x);
    u.common_laplacian_cached(&mut cache)
}

/// Exact free-individual-noise Laplacian on polynomial cylinder functions.
pub fn free_laplacian(u: &CylinderFunction, x: &MatrixTuple) -> Result<f64> {
    u.require_polynomial("free Laplacian")?;
    let mut cache = EvalCache::new(x);
    u.free_laplacian_cached(&mut cache)
}

/// Monte Carlo estimate of the free Laplacian as
/// `sum_l Hess U[S^l e^l, S^l e^l]` over fresh GUE proxies `S`.
/// Returns the sample mean and its standard error.
pub fn free_laplacian_mc(
    u: &CylinderFunction,
    x: &MatrixTuple,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    let op = HessOperator::new(u, x)?;
    let d = x.dims();
    let n = x.size();
    let mut vals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut total = 0.0;
        for l in 0..d {
            let s = randmat::gue_increment(n, 1.0, rng);
            total += op.apply_component(l, &s)?;
        }
        vals.push(total);
    }
    Ok(linalg::mean_and_se(&vals))
}

/// Hessian of a cylinder function prepared at a fixed base point, for
/// repeated application to varying directions.
pub struct HessOperator {
    dims: usize,
    /// Outer Hessian `g_oq` at the base point.
    g2: Vec<Vec<f64>>,
    /// Evaluated gradients `D_j f_o (X)`, indexed `[o][j]`.
    grad_mats: Vec<Vec<CMat>>,
    /// Evaluated elementary tensors of `sum_o g_o d_{x_i} D_{x_j} f_o`,
    /// indexed `[i][j] -> [(left, right, coeff)]`.
    pairs: Vec<Vec<Vec<(CMat, CMat, num_complex::Complex64)>>>,
}

impl HessOperator {
    pub fn new(u: &CylinderFunction, x: &MatrixTuple) -> Result<Self> {
        u.require_polynomial("Hessian")?;
        let mut cache = EvalCache::new(x);
        let v = u.inner_values_cached(&mut cache)?;
        let g1 = u.outer.grad(&v);
        let g2 = u.outer.hess(&v);
        let d = u.inner.dims;
        let m = u.inner.polys.len();

        let mut grad_mats = Vec::with_capacity(m);
        for o in 0..m {
            let mut per_j = Vec::with_capacity(d);
            for j in 0..d {
                per_j.push(u.inner.grads[o][j].evaluate_cached(&mut cache)?);
            }
            grad_mats.push(per_j);
        }

        let mut pairs = Vec::with_capacity(d);
        for i in 0..d {
            let mut row = Vec::with_capacity(d);
            for j in 0..d {
                let mut combined = TensorPolynomial::zero(d);
                for o in 0..m {
                    if g1[o] != 0.0 {
                        combined = combined
                            .add(&u.inner.second[o][i][j].scale(num_complex::Complex64::new(g1[o], 0.0)))?;
                    }
                }
                row.push(combined.eval_pairs(&mut cache)?);
            }
            pairs.push(row);
        }
        Ok(HessOperator { dims: d, g2, grad_mats, pairs })
    }

    /// `Hess U(X)[A, B]`.
    pub fn apply(&self, a: &MatrixTuple, b: &MatrixTuple) -> Result<f64> {
        if a.dims() != self.dims || b.dims() != self.dims {
            return Err(Error::DimensionMismatch("direction tuples must match the base point".into()));
        }
        let m = self.grad_mats.len();
        // Outer second-derivative term factorizes through tuple pairings.
        let mut ga = vec![0.0; m];
        let mut gb = vec![0.0; m];
        for o in 0..m {
            for j in 0..self.dims {
                ga[o] += linalg::inner_n(&self.grad_mats[o][j], &a.mats()[j]);
                gb[o] += linalg::inner_n(&self.grad_mats[o][j], &b.mats()[j]);
            }
        }
        let mut out = 0.0;
        for o in 0..m {
            for q in 0..m {
                if self.g2[o][q] != 0.0 {
                    out += self.g2[o][q] * ga[o] * gb[q];
                }
            }
        }
        // Inner term: sum_{ij} <T_{ij} # A^i, B^j>.
        for i in 0..self.dims {
            for j in 0..self.dims {
                for (l, r, c) in &self.pairs[i][j] {
                    let la = l.dot(&a.mats()[i]);
                    let rb = r.dot(&b.mats()[j]);
                    out += (c * linalg::pair_trace_n(&la, &rb)).re;
                }
            }
        }
        Ok(out)
    }

    /// `Hess U(X)[S e^l, S e^l]` for a single Hermitian matrix direction in
    /// component `l` (0-based).
    pub fn apply_component(&self, l: usize, s: &CMat) -> Result<f64> {
        if l >= self.dims {
            return Err(Error::DimensionMismatch(format!("component {l} out of range")));
        }
        let m = self.grad_mats.len();
        let mut out = 0.0;
        for o in 0..m {
            for q in 0..m {
                if self.g2[o][q] != 0.0 {
                    out += self.g2[o][q]
                        * linalg::inner_n(&self.grad_mats[o][l], s)
                        * linalg::inner_n(&self.grad_mats[q][l], s);
                }
            }
        }
        for (left, right, c) in &self.pairs[l][l] {
            let ls = left.dot(s);
            let rs = right.dot(s);
            out += (c * linalg::pair_trace_n(&ls, &rs)).re;
        }
        Ok(out)
    }
}

/// Time-dependent cylinder function: fixed inner polynomials with outer
/// coefficients given on a time grid along with analytic time-derivative
/// data at each node.
#[derive(Clone, Debug)]
pub enum TimeCylinderFn {
    /// Constant in time; the time derivative is identically zero.
    Static(CylinderFunction),
    Grid {
        inner: Arc<InnerParts>,
        grid: Vec<f64>,
        outers: Vec<OuterFn>,
        outers_dt: Vec<OuterFn>,
    },
}

impl TimeCylinderFn {
    pub fn constant(u: CylinderFunction) -> Self {
        TimeCylinderFn::Static(u)
    }

    pub fn on_grid(
        template: &CylinderFunction,
        grid: Vec<f64>,
        outers: Vec<OuterFn>,
        outers_dt: Vec<OuterFn>,
    ) -> Result<Self> {
        if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("time grid must be strictly increasing with >= 2 nodes".into()));
        }
        if outers.len() != grid.len() || outers_dt.len() != grid.len() {
            return Err(Error::InvalidConfig("need one outer and one d/dt outer per grid node".into()));
        }
        for o in outers.iter().chain(&outers_dt) {
            o.validate()?;
            if o.arity() != template.inner.polys.len() {
                return Err(Error::DimensionMismatch("outer arity vs inner slot count".into()));
            }
        }
        Ok(TimeCylinderFn::Grid { inner: template.inner.clone(), grid, outers, outers_dt })
    }

    pub fn dims(&self) -> usize {
        match self {
            TimeCylinderFn::Static(u) => u.dims(),
            TimeCylinderFn::Grid { inner, .. } => inner.dims,
        }
    }

    /// The cylinder function at time `t`.
    pub fn at(&self, t: f64) -> Result<CylinderFunction> {
        match self {
            TimeCylinderFn::Static(u) => Ok(u.clone()),
            TimeCylinderFn::Grid { inner, grid, outers, outers_dt } => {
                let k = locate(grid, t)?;
                if t == grid[k] || k + 1 == grid.len() {
                    return CylinderFunction::with_outer(inner.clone(), outers[k].clone());
                }
                let outer = OuterFn::hermite_between(
                    grid[k],
                    grid[k + 1],
                    &outers[k],
                    &outers[k + 1],
                    &outers_dt[k],
                    &outers_dt[k + 1],
                    t,
                )?;
                CylinderFunction::with_outer(inner.clone(), outer)
            }
        }
    }

    /// The time derivative at time `t`, as a cylinder function with the same
    /// inner polynomials.
    pub fn dt_at(&self, t: f64) -> Result<CylinderFunction> {
        match self {
            TimeCylinderFn::Static(u) => {
                CylinderFunction::with_outer(u.inner.clone(), OuterFn::zero(u.inner.polys.len()))
            }
            TimeCylinderFn::Grid { inner, grid, outers_dt, .. } => {
                let k = locate(grid, t)?;
                if t == grid[k] || k + 1 == grid.len() {
                    return CylinderFunction::with_outer(inner.clone(), outers_dt[k].clone());
                }
                // Linear interpolation of the per-node derivative data.
                let s = (t - grid[k]) / (grid[k + 1] - grid[k]);
                let blended = lerp_outer(&outers_dt[k], &outers_dt[k + 1], s)?;
                CylinderFunction::with_outer(inner.clone(), blended)
            }
        }
    }
}

fn lerp_outer(a: &OuterFn, b: &OuterFn, s: f64) -> Result<OuterFn> {
    let u = 1.0 - s;
    match (a, b) {
        (
            OuterFn::Linear { constant: c0, weights: w0 },
            OuterFn::Linear { constant: c1, weights: w1 },
        ) => Ok(OuterFn::Linear {
            constant: u * c0 + s * c1,
            weights: w0.iter().zip(w1).map(|(x, y)| u * x + s * y).collect(),
        }),
        (
            OuterFn::Quadratic { constant: c0, linear: l0, quad: q0 },
            OuterFn::Quadratic { constant: c1, linear: l1, quad: q1 },
        ) => Ok(OuterFn::Quadratic {
            constant: u * c0 + s * c1,
            linear: l0.iter().zip(l1).map(|(x, y)| u * x + s * y).collect(),
            quad: q0
                .iter()
                .zip(q1)
                .map(|(r0, r1)| r0.iter().zip(r1).map(|(x, y)| u * x + s * y).collect())
                .collect(),
        }),
        _ => Err(Error::Unsupported(
            "time interpolation requires matching outer families (linear or quadratic)".into(),
        )),
    }
}

fn locate(grid: &[f64], t: f64) -> Result<usize> {
    let lo = grid[0];
    let hi = grid[grid.len() - 1];
    if t < lo - 1e-12 || t > hi + 1e-12 {
        return Err(Error::TimeOutOfRange { t, lo, hi });
    }
    if t >= hi {
        return Ok(grid.len() - 1);
    }
    let mut k = match grid.binary_search_by(|g| g.total_cmp(&t)) {
        Ok(k) => k,
        Err(k) => k.saturating_sub(1),
    };
    if k >= grid.len() - 1 {
        k = grid.len() - 2;
    }
    Ok(k)
}

/// JSON schema for a cylinder function: inner polynomial term lists plus a
/// named outer family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderFunctionJson {
    pub dims: usize,
    #[serde(default)]
    pub arctan: bool,
    pub inner: Vec<Vec<PolyTerm>>,
    pub outer: OuterFn,
}

impl CylinderFunctionJson {
    pub fn to_function(&self) -> Result<CylinderFunction> {
        let inner = self
            .inner
            .iter()
            .map(|terms| NcPolynomial::from_terms(self.dims, terms))
            .collect::<Result<Vec<_>>>()?;
        if self.arctan {
            CylinderFunction::new_arctan(self.dims, inner, self.outer.clone())
        } else {
            CylinderFunction::new(self.dims, inner, self.outer.clone())
        }
    }

    pub fn from_function(u: &CylinderFunction) -> Self {
        CylinderFunctionJson {
            dims: u.dims(),
            arctan: u.composes_arctan(),
            inner: u.inner_polys().iter().map(|p| p.to_terms()).collect(),
            outer: u.outer().clone(),
        }
    }
}
