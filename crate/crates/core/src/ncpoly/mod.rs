//! Non-commutative polynomial algebra in `d` self-adjoint letters.
//!
//! Polynomials are sparse maps from words (sequences of letter indices) to
//! complex coefficients, with exact coefficient arithmetic and no
//! simplification beyond term merging. Letters are numbered `1..=d`.
//!
//! The module provides the ring operations, the adjoint, the free
//! difference quotient (valued in [`TensorPolynomial`]), the cyclic
//! derivative, evaluation on Hermitian matrix tuples, and an exact
//! semicircular moment oracle based on counting color-matched non-crossing
//! pair partitions.

mod tensor;

pub use tensor::TensorPolynomial;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::randmat::MatrixTuple;

/// 1-based letter index into `x_1, ..., x_d`.
pub type Letter = u8;

/// A monomial word; the empty word is the algebra unit.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn new(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.0.clone();
        v.reverse();
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Self {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    fn max_letter(&self) -> Letter {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for &l in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            write!(f, "x{l}")?;
            first = false;
        }
        Ok(())
    }
}

/// Sparse non-commutative polynomial over `d` self-adjoint letters.
#[derive(Clone, PartialEq)]
pub struct NcPolynomial {
    terms: BTreeMap<Word, Complex64>,
    dims: usize,
}

fn is_zero(c: Complex64) -> bool {
    c.re == 0.0 && c.im == 0.0
}

impl NcPolynomial {
    pub fn zero(dims: usize) -> Self {
        NcPolynomial { terms: BTreeMap::new(), dims }
    }

    pub fn one(dims: usize) -> Self {
        Self::constant(dims, Complex64::new(1.0, 0.0))
    }

    pub fn constant(dims: usize, c: Complex64) -> Self {
        let mut terms = BTreeMap::new();
        if !is_zero(c) {
            terms.insert(Word::empty(), c);
        }
        NcPolynomial { terms, dims }
    }

    /// The generator `x_j`.
    pub fn letter(dims: usize, j: Letter) -> Result<Self> {
        check_letter(j, dims)?;
        let mut terms = BTreeMap::new();
        terms.insert(Word::new(vec![j]), Complex64::new(1.0, 0.0));
        Ok(NcPolynomial { terms, dims })
    }

    /// `c * x_{w_1} ... x_{w_m}`.
    pub fn monomial(dims: usize, word: Word, c: Complex64) -> Result<Self> {
        if word.max_letter() as usize > dims {
            return Err(Error::LetterOutOfRange { letter: word.max_letter(), dims });
        }
        let mut terms = BTreeMap::new();
        if !is_zero(c) {
            terms.insert(word, c);
        }
        Ok(NcPolynomial { terms, dims })
    }

    /// `x_j^k`.
    pub fn power(dims: usize, j: Letter, k: usize) -> Result<Self> {
        check_letter(j, dims)?;
        Self::monomial(dims, Word::new(vec![j; k]), Complex64::new(1.0, 0.0))
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, w: &Word) -> Complex64 {
        self.terms.get(w).copied().unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    fn insert(&mut self, w: Word, c: Complex64) {
        if is_zero(c) {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(w) {
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
        for (w, c) in &rhs.terms {
            out.insert(w.clone(), *c);
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.add(&rhs.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        check_same_dims(self.dims, rhs.dims)?;
        let mut out = Self::zero(self.dims);
        for (w1, c1) in &self.terms {
            for (w2, c2) in &rhs.terms {
                out.insert(w1.concat(w2), c1 * c2);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.dims);
        for (w, c0) in &self.terms {
            out.insert(w.clone(), c0 * c);
        }
        out
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Adjoint: reverses every word and conjugates coefficients.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.dims);
        for (w, c) in &self.terms {
            out.insert(w.reversed(), c.conj());
        }
        out
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.adjoint() == *self
    }

    /// Substitutes `gs[j-1]` for letter `j`; `gs` must have `self.dims()`
    /// entries sharing a common letter count.
    pub fn compose(&self, gs: &[NcPolynomial]) -> Result<Self> {
        if gs.len() != self.dims {
            return Err(Error::DimensionMismatch(format!(
                "composition needs {} inner polynomials, got {}",
                self.dims,
                gs.len()
            )));
        }
        let inner_dims = gs.first().map(|g| g.dims).unwrap_or(0);
        for g in gs {
            check_same_dims(inner_dims, g.dims)?;
        }
        let mut out = Self::zero(inner_dims);
        for (w, c) in &self.terms {
            let mut prod = Self::constant(inner_dims, *c);
            for &l in w.letters() {
                prod = prod.mul(&gs[(l - 1) as usize])?;
            }
            out = out.add(&prod)?;
        }
        Ok(out)
    }

    /// Free difference quotient with respect to letter `j`: each monomial is
    /// split at every occurrence of `x_j` into a left and a right factor.
    pub fn free_diff(&self, j: Letter) -> Result<TensorPolynomial> {
        check_letter(j, self.dims)?;
        let mut out = TensorPolynomial::zero(self.dims);
        for (w, c) in &self.terms {
            let letters = w.letters();
            for k in 0..letters.len() {
                if letters[k] == j {
                    out.insert(
                        Word::new(letters[..k].to_vec()),
                        Word::new(letters[k + 1..].to_vec()),
                        *c,
                    );
                }
            }
        }
        Ok(out)
    }

    /// Cyclic derivative: the free difference quotient followed by
    /// `X (x) Y -> Y X`.
    pub fn cyclic_diff(&self, j: Letter) -> Result<Self> {
        check_letter(j, self.dims)?;
        let mut out = Self::zero(self.dims);
        for (w, c) in &self.terms {
            let letters = w.letters();
            for k in 0..letters.len() {
                if letters[k] == j {
                    let mut v = Vec::with_capacity(letters.len() - 1);
                    v.extend_from_slice(&letters[k + 1..]);
                    v.extend_from_slice(&letters[..k]);
                    out.insert(Word::new(v), *c);
                }
            }
        }
        Ok(out)
    }

    /// Evaluates the polynomial at a matrix tuple.
    pub fn evaluate(&self, x: &MatrixTuple) -> Result<CMat> {
        let mut cache = EvalCache::new(x);
        self.evaluate_cached(&mut cache)
    }

    pub fn evaluate_cached(&self, cache: &mut EvalCache) -> Result<CMat> {
        check_same_dims(self.dims, cache.x.dims())?;
        let n = cache.x.size();
        let mut out = linalg::zeros(n);
        for (w, c) in &self.terms {
            let m = cache.product(w)?;
            out.zip_mut_with(m, |o, v| *o += c * v);
        }
        Ok(out)
    }

    /// Normalized trace of the evaluation, `tr_n(p(X))`.
    pub fn trace_eval(&self, x: &MatrixTuple) -> Result<Complex64> {
        let mut cache = EvalCache::new(x);
        self.trace_eval_cached(&mut cache)
    }

    pub fn trace_eval_cached(&self, cache: &mut EvalCache) -> Result<Complex64> {
        check_same_dims(self.dims, cache.x.dims())?;
        let mut out = Complex64::new(0.0, 0.0);
        for (w, c) in &self.terms {
            out += c * cache.trace(w)?;
        }
        Ok(out)
    }

    /// JSON-facing term list.
    pub fn to_terms(&self) -> Vec<PolyTerm> {
        self.terms
            .iter()
            .map(|(w, c)| PolyTerm { word: w.letters().to_vec(), re: c.re, im: c.im })
            .collect()
    }

    pub fn from_terms(dims: usize, terms: &[PolyTerm]) -> Result<Self> {
        let mut out = Self::zero(dims);
        for t in terms {
            let w = Word::new(t.word.clone());
            if w.max_letter() as usize > dims {
                return Err(Error::LetterOutOfRange { letter: w.max_letter(), dims });
            }
            out.insert(w, Complex64::new(t.re, t.im));
        }
        Ok(out)
    }
}

impl fmt::Debug for NcPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (w, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({:.4}{:+.4}i)*{w}", c.re, c.im)?;
            first = false;
        }
        Ok(())
    }
}

/// One serialized polynomial term: a word and a complex coefficient.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub word: Vec<u8>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

pub(crate) fn check_letter(j: Letter, dims: usize) -> Result<()> {
    if j == 0 || j as usize > dims {
        return Err(Error::LetterOutOfRange { letter: j, dims });
    }
    Ok(())
}

pub(crate) fn check_same_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("letter counts differ: {a} vs {b}")));
    }
    Ok(())
}

/// Memoizing evaluator for word products and normalized word traces at a
/// fixed matrix tuple. Products are built by extending a cached prefix by
/// one letter; traces of long words pair two cached half-products so the
/// final length-doubling multiplication is never formed.
pub struct EvalCache<'a> {
    x: &'a MatrixTuple,
    products: HashMap<Word, CMat>,
    traces: HashMap<Word, Complex64>,
}

impl<'a> EvalCache<'a> {
    pub fn new(x: &'a MatrixTuple) -> Self {
        EvalCache { x, products: HashMap::new(), traces: HashMap::new() }
    }

    pub fn tuple(&self) -> &MatrixTuple {
        self.x
    }

    pub fn product(&mut self, w: &Word) -> Result<&CMat> {
        if !self.products.contains_key(w) {
            let m = if w.is_empty() {
                linalg::identity(self.x.size())
            } else if w.len() == 1 {
                self.x.letter(w.letters()[0])?.clone()
            } else {
                let prefix = Word::new(w.letters()[..w.len() - 1].to_vec());
                let last = w.letters()[w.len() - 1];
                let p = self.product(&prefix)?.clone();
                p.dot(self.x.letter(last)?)
            };
            self.products.insert(w.clone(), m);
        }
        Ok(self.products.get(w).unwrap())
    }

    pub fn trace(&mut self, w: &Word) -> Result<Complex64> {
        if let Some(&t) = self.traces.get(w) {
            return Ok(t);
        }
        let t = if w.is_empty() {
            Complex64::new(1.0, 0.0)
        } else {
            let mid = w.len() / 2;
            let left = Word::new(w.letters()[..mid].to_vec());
            let right = Word::new(w.letters()[mid..].to_vec());
            self.product(&left)?;
            self.product(&right)?;
            let l = self.products.get(&left).unwrap();
            let r = self.products.get(&right).unwrap();
            linalg::pair_trace_n(l, r)
        };
        self.traces.insert(w.clone(), t);
        Ok(t)
    }
}

/// Mixed moment of a standard free semicircular family: the number of
/// non-crossing pair partitions of the positions in which every pair joins
/// equal colors. Odd lengths have no pairings and return zero.
pub fn semicircle_moment(colors: &[Letter]) -> u64 {
    let mut memo: HashMap<Vec<Letter>, u64> = HashMap::new();
    count_pairings(colors, &mut memo)
}

fn count_pairings(colors: &[Letter], memo: &mut HashMap<Vec<Letter>, u64>) -> u64 {
    if colors.is_empty() {
        return 1;
    }
    if colors.len() % 2 == 1 {
        return 0;
    }
    if let Some(&v) = memo.get(colors) {
        return v;
    }
    // Pair position 0 with an odd position of the same color; non-crossing
    // pairings then split into the enclosed and the remaining segment.
    let mut total = 0u64;
    for k in (1..colors.len()).step_by(2) {
        if colors[k] == colors[0] {
            total += count_pairings(&colors[1..k], memo) * count_pairings(&colors[k + 1..], memo);
        }
    }
    memo.insert(colors.to_vec(), total);
    total
}
