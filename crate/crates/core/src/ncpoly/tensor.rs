//! Sums of elementary tensors of two polynomials, the codomain of the free
//! difference quotient.
//!
//! The product follows `(X (x) Y)(W (x) Z) = (XW) (x) (ZY)`, and two
//! contractions are provided: `#` against a matrix (`(X (x) Y) # A = X A Y`)
//! and the tensor trace `tr (x) tr`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::{self, CMat};
use crate::randmat::MatrixTuple;

use super::{check_same_dims, is_zero, EvalCache, NcPolynomial, Word};

/// Canonical form: coefficients keyed by (left word, right word).
#[derive(Clone, PartialEq)]
pub struct TensorPolynomial {
    terms: BTreeMap<(Word, Word), Complex64>,
    dims: usize,
}

impl TensorPolynomial {
    pub fn zero(dims: usize) -> Self {
        TensorPolynomial { terms: BTreeMap::new(), dims }
    }

    /// Expands `left (x) right` into canonical word-pair form.
    pub fn elementary(left: &NcPolynomial, right: &NcPolynomial) -> Result<Self> {
        check_same_dims(left.dims(), right.dims())?;
        let mut out = Self::zero(left.dims());
        for (wl, cl) in left.terms() {
            for (wr, cr) in right.terms() {
                out.insert(wl.clone(), wr.clone(), cl * cr);
            }
        }
        Ok(out)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Word, Word), &Complex64)> {
        self.terms.iter()
    }

    pub(crate) fn insert(&mut self, left: Word, right: Word, c: Complex64) {
        if is_zero(c) {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry((left, right)) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if is_zero(v) {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        check_same_dims(self.dims, rhs.dims)?;
        let mut out = self.clone();
        for ((l, r), c) in &rhs.terms {
            out.insert(l.clone(), r.clone(), *c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.dims);
        for ((l, r), c0) in &self.terms {
            out.insert(l.clone(), r.clone(), c0 * c);
        }
        out
    }

    /// Tensor-algebra product: `(X (x) Y)(W (x) Z) = (XW) (x) (ZY)`.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        check_same_dims(self.dims, rhs.dims)?;
        let mut out = Self::zero(self.dims);
        for ((l1, r1), c1) in &self.terms {
            for ((l2, r2), c2) in &rhs.terms {
                out.insert(l1.concat(l2), r2.concat(r1), c1 * c2);
            }
        }
        Ok(out)
    }

    /// `(X (x) Y)* = X* (x) Y*` with conjugated coefficients.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.dims);
        for ((l, r), c) in &self.terms {
            out.insert(l.reversed(), r.reversed(), c.conj());
        }
        out
    }

    /// The flip-and-multiply map `X (x) Y -> YX`; composing it with the free
    /// difference quotient yields the cyclic derivative.
    pub fn flip_multiply(&self) -> NcPolynomial {
        let mut out = NcPolynomial::zero(self.dims);
        for ((l, r), c) in &self.terms {
            out.insert(r.concat(l), *c);
        }
        out
    }

    /// Contraction `T # A = sum c_k p_k(X) A q_k(X)`.
    pub fn contract(&self, x: &MatrixTuple, a: &CMat) -> Result<CMat> {
        let mut cache = EvalCache::new(x);
        self.contract_cached(&mut cache, a)
    }

    pub fn contract_cached(&self, cache: &mut EvalCache, a: &CMat) -> Result<CMat> {
        check_same_dims(self.dims, cache.tuple().dims())?;
        let n = cache.tuple().size();
        let mut out = linalg::zeros(n);
        // Group by left word so each distinct left factor costs one product.
        let mut by_left: BTreeMap<&Word, Vec<(&Word, Complex64)>> = BTreeMap::new();
        for ((l, r), c) in &self.terms {
            by_left.entry(l).or_default().push((r, *c));
        }
        for (l, rights) in by_left {
            let mut right_sum = linalg::zeros(n);
            for (r, c) in rights {
                let rm = cache.product(r)?;
                right_sum.zip_mut_with(rm, |o, v| *o += c * v);
            }
            let lm = cache.product(l)?.clone();
            out = out + lm.dot(a).dot(&right_sum);
        }
        Ok(out)
    }

    /// `(tr (x) tr)(T) = sum c_k tr_n(p_k(X)) tr_n(q_k(X))`.
    pub fn tensor_trace(&self, x: &MatrixTuple) -> Result<Complex64> {
        let mut cache = EvalCache::new(x);
        self.tensor_trace_cached(&mut cache)
    }

    pub fn tensor_trace_cached(&self, cache: &mut EvalCache) -> Result<Complex64> {
        check_same_dims(self.dims, cache.tuple().dims())?;
        let mut out = Complex64::new(0.0, 0.0);
        for ((l, r), c) in &self.terms {
            out += c * cache.trace(l)? * cache.trace(r)?;
        }
        Ok(out)
    }

    /// Evaluates each side to matrices at `x`, for callers that apply the
    /// tensor repeatedly against varying middle factors.
    pub fn eval_pairs(&self, cache: &mut EvalCache) -> Result<Vec<(CMat, CMat, Complex64)>> {
        check_same_dims(self.dims, cache.tuple().dims())?;
        let mut out = Vec::with_capacity(self.terms.len());
        for ((l, r), c) in &self.terms {
            let lm = cache.product(l)?.clone();
            let rm = cache.product(r)?.clone();
            out.push((lm, rm, *c));
        }
        Ok(out)
    }

    /// For `dims == 1`, maps `x^a (x) x^b` to the two-letter monomial
    /// `x_1^a x_2^b`; this realizes the isomorphism onto polynomials in two
    /// commuting variables used by difference-quotient identities.
    pub fn flatten_two_letters(&self) -> Result<NcPolynomial> {
        check_same_dims(self.dims, 1)?;
        let mut out = NcPolynomial::zero(2);
        for ((l, r), c) in &self.terms {
            let mut word = vec![1u8; l.len()];
            word.extend(std::iter::repeat(2u8).take(r.len()));
            out.insert(Word::new(word), *c);
        }
        Ok(out)
    }
}

impl fmt::Debug for TensorPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((l, r), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({:.4}{:+.4}i)*{l}(x){r}", c.re, c.im)?;
            first = false;
        }
        Ok(())
    }
}
