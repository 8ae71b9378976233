//! Finite-size matrix representations of non-commutative laws.
//!
//! A [`MatrixTuple`] is a `d`-tuple of `n x n` Hermitian matrices — the
//! state of the simulated dynamics. The module covers GUE increment
//! sampling (normalized so the spectral law of `t^{-1/2} W_t` approaches
//! the semicircle on `[-2, 2]`), empirical spectral measures, word-moment
//! vectors, the `d = 1` quantile Wasserstein distance, and seed-derived
//! noise streams that make parallel path sampling reproducible.

pub mod stream {
    //! Counter-derived RNG streams: one stream per (master seed, path,
    //! source tag), so paths can be sampled in any order or in parallel and
    //! replayed bitwise.

    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub const TAG_COMMON: u64 = 1;
    pub const TAG_GUE: u64 = 2;
    pub const TAG_DYSON: u64 = 3;
    pub const TAG_PROXY: u64 = 4;
    pub const TAG_OPTIMIZER: u64 = 5;
    pub const TAG_TEST: u64 = 6;

    /// Derives an independent stream from `(master, path, tag)`. The triple
    /// is packed injectively into the 32-byte seed; ChaCha provides the
    /// mixing.
    pub fn derive(master: u64, path: u64, tag: u64) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&master.to_le_bytes());
        seed[8..16].copy_from_slice(&path.to_le_bytes());
        seed[16..24].copy_from_slice(&tag.to_le_bytes());
        seed[24..32].copy_from_slice(&0x4652_4545_484a_4221u64.to_le_bytes());
        ChaCha8Rng::from_seed(seed)
    }
}

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::ncpoly::{EvalCache, Letter, Word};

const HERMITIAN_TOL: f64 = 1e-12;

/// A `d`-tuple of `n x n` Hermitian complex matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    mats: Vec<CMat>,
    n: usize,
}

impl MatrixTuple {
    /// Validates squareness, matching sizes, and Hermitian symmetry of each
    /// component (within `1e-12` relative to the entry scale).
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::DimensionMismatch("matrix tuple needs at least one component".into()));
        }
        let n = mats[0].nrows();
        for (idx, m) in mats.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "component {idx} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let scale = m.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            let dev = linalg::hermitian_deviation(m);
            if dev > HERMITIAN_TOL * (1.0 + scale) {
                return Err(Error::NotHermitian { index: idx, deviation: dev });
            }
        }
        Ok(MatrixTuple { mats, n })
    }

    /// Builds a tuple without the Hermitian check; callers must guarantee
    /// symmetry (used on hot paths that symmetrize explicitly).
    pub(crate) fn from_parts(mats: Vec<CMat>, n: usize) -> Self {
        MatrixTuple { mats, n }
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        MatrixTuple { mats: vec![linalg::zeros(n); d], n }
    }

    /// The tuple with the identity in every component.
    pub fn ones(n: usize, d: usize) -> Self {
        MatrixTuple { mats: vec![linalg::identity(n); d], n }
    }

    /// Zero tuple with `m` placed in component `l` (1-based).
    pub fn embed_component(n: usize, d: usize, l: Letter, m: CMat) -> Result<Self> {
        crate::ncpoly::check_letter(l, d)?;
        let mut t = Self::zeros(n, d);
        t.mats[(l - 1) as usize] = m;
        Ok(t)
    }

    pub fn from_real_diagonals(diags: &[Vec<f64>]) -> Result<Self> {
        if diags.is_empty() {
            return Err(Error::DimensionMismatch("need at least one diagonal".into()));
        }
        let n = diags[0].len();
        let mats = diags
            .iter()
            .map(|diag| {
                let mut m = linalg::zeros(n);
                for (i, &v) in diag.iter().enumerate() {
                    m[[i, i]] = Complex64::new(v, 0.0);
                }
                m
            })
            .collect();
        Self::new(mats)
    }

    /// A tuple of independent scaled GUE samples; entry variance
    /// `scale^2 / n`, so operator norms concentrate near `2 * scale`.
    pub fn random_hermitian(n: usize, d: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mats = (0..d).map(|_| gue_increment(n, scale * scale, rng)).collect();
        MatrixTuple { mats, n }
    }

    pub fn dims(&self) -> usize {
        self.mats.len()
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Component for letter `j` (1-based).
    pub fn letter(&self, j: Letter) -> Result<&CMat> {
        crate::ncpoly::check_letter(j, self.mats.len())?;
        Ok(&self.mats[(j - 1) as usize])
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }

    pub fn mats_mut(&mut self) -> &mut [CMat] {
        &mut self.mats
    }

    pub fn into_mats(self) -> Vec<CMat> {
        self.mats
    }

    /// `L^2` norm of the tuple: `sqrt(sum_j tr_n((X^j)^2))`.
    pub fn l2_norm(&self) -> f64 {
        self.mats.iter().map(|m| linalg::inner_n(m, m)).sum::<f64>().sqrt()
    }

    /// Real `L^2` inner product `sum_j Re tr_n((X^j)* Y^j)`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.mats.iter().zip(&other.mats).map(|(a, b)| linalg::inner_n(a, b)).sum())
    }

    /// Operator-norm bound: the largest spectral radius over components.
    pub fn op_norm(&self) -> Result<f64> {
        let mut out = 0.0f64;
        for m in &self.mats {
            let (vals, _) = linalg::eigh(m)?;
            for v in vals {
                out = out.max(v.abs());
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mats = self.mats.iter().zip(&other.mats).map(|(a, b)| a + b).collect();
        Ok(MatrixTuple { mats, n: self.n })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mats = self.mats.iter().zip(&other.mats).map(|(a, b)| a - b).collect();
        Ok(MatrixTuple { mats, n: self.n })
    }

    pub fn scale(&self, c: f64) -> Self {
        let mats = self.mats.iter().map(|m| m.mapv(|z| z * c)).collect();
        MatrixTuple { mats, n: self.n }
    }

    /// `self += c * other`, in place.
    pub fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.mats.iter_mut().zip(&other.mats) {
            a.zip_mut_with(b, |x, y| *x += y * c);
        }
        Ok(())
    }

    pub fn symmetrize_inplace(&mut self) {
        for m in &mut self.mats {
            linalg::hermitize_inplace(m);
        }
    }

    /// Conjugates every component by the same unitary.
    pub fn conjugate(&self, u: &CMat) -> Self {
        let mats = self.mats.iter().map(|m| linalg::conjugate(u, m)).collect();
        MatrixTuple { mats, n: self.n }
    }

    pub fn has_nan(&self) -> bool {
        self.mats.iter().any(|m| m.iter().any(|z| z.re.is_nan() || z.im.is_nan()))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.mats.len() != other.mats.len() {
            return Err(Error::DimensionMismatch(format!(
                "tuples ({}, d={}) vs ({}, d={})",
                self.n,
                self.mats.len(),
                other.n,
                other.mats.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> MatrixTupleJson {
        MatrixTupleJson {
            n: self.n,
            d: self.mats.len(),
            components: self
                .mats
                .iter()
                .map(|m| ComponentJson {
                    re: m.iter().map(|z| z.re).collect(),
                    im: m.iter().map(|z| z.im).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &MatrixTupleJson) -> Result<Self> {
        let mut mats = Vec::with_capacity(j.d);
        for c in &j.components {
            if c.re.len() != j.n * j.n || c.im.len() != j.n * j.n {
                return Err(Error::InvalidConfig("component length must be n*n".into()));
            }
            let data: Vec<Complex64> =
                c.re.iter().zip(&c.im).map(|(&re, &im)| Complex64::new(re, im)).collect();
            let m = Array2::from_shape_vec((j.n, j.n), data)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            mats.push(m);
        }
        if mats.len() != j.d {
            return Err(Error::InvalidConfig("component count must equal d".into()));
        }
        Self::new(mats)
    }
}

/// Row-major re/im serialization of a matrix tuple.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixTupleJson {
    pub n: usize,
    pub d: usize,
    pub components: Vec<ComponentJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentJson {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Empirical spectral measure: sorted eigenvalues with uniform weight.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure {
    points: Vec<f64>,
}

impl SpectralMeasure {
    pub fn from_points(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        points.sort_by(f64::total_cmp);
        Ok(SpectralMeasure { points })
    }

    pub fn from_matrix(m: &CMat) -> Result<Self> {
        let dev = linalg::hermitian_deviation(m);
        let scale = m.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        if dev > HERMITIAN_TOL * (1.0 + scale) {
            return Err(Error::NotHermitian { index: 0, deviation: dev });
        }
        let (vals, _) = linalg::eigh(m)?;
        Self::from_points(vals)
    }

    pub fn dirac(x: f64, n: usize) -> Result<Self> {
        Self::from_points(vec![x; n.max(1)])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean(&self) -> f64 {
        linalg::pairwise_sum(&self.points) / self.points.len() as f64
    }

    pub fn second_moment(&self) -> f64 {
        let sq: Vec<f64> = self.points.iter().map(|x| x * x).collect();
        linalg::pairwise_sum(&sq) / sq.len() as f64
    }

    /// Mass strictly below `x` minus mass strictly above `x`.
    pub fn signed_mass_split(&self, x: f64) -> f64 {
        let below = self.points.iter().filter(|&&p| p < x).count() as f64;
        let above = self.points.iter().filter(|&&p| p > x).count() as f64;
        (below - above) / self.points.len() as f64
    }

    pub fn mean_abs_deviation(&self, x: f64) -> f64 {
        let devs: Vec<f64> = self.points.iter().map(|p| (x - p).abs()).collect();
        linalg::pairwise_sum(&devs) / devs.len() as f64
    }
}

/// Quadratic Wasserstein distance between empirical measures via the
/// quantile coupling. Unequal sizes are handled on the common refinement of
/// the two quantile grids.
pub fn wasserstein2_1d(mu: &SpectralMeasure, nu: &SpectralMeasure) -> f64 {
    let a = mu.points();
    let b = nu.points();
    if a.len() == b.len() {
        let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
        return (linalg::pairwise_sum(&sq) / a.len() as f64).max(0.0).sqrt();
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let mut total = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0f64;
    while i < a.len() && j < b.len() {
        let next_a = (i + 1) as f64 / na;
        let next_b = (j + 1) as f64 / nb;
        let next = next_a.min(next_b);
        let diff = a[i] - b[j];
        total += diff * diff * (next - u);
        u = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    total.max(0.0).sqrt()
}

/// Hermitian Gaussian increment with `E[tr_n(dW)^2] = dt`: real diagonal of
/// variance `dt/n`, independent complex off-diagonal entries of total
/// variance `dt/n`. At `dt = 1` this is the GUE normalization whose
/// spectral law approaches the semicircle on `[-2, 2]`.
pub fn gue_increment(n: usize, dt: f64, rng: &mut impl Rng) -> CMat {
    let mut m = linalg::zeros(n);
    gue_increment_into(&mut m, dt, rng);
    m
}

/// Overwrites `buf` with a fresh GUE increment; `buf` must be `n x n`.
pub fn gue_increment_into(buf: &mut CMat, dt: f64, rng: &mut impl Rng) {
    let n = buf.nrows();
    let sd_diag = (dt / n as f64).sqrt();
    let sd_off = (dt / (2.0 * n as f64)).sqrt();
    for i in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        buf[[i, i]] = Complex64::new(sd_diag * g, 0.0);
        for j in (i + 1)..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(sd_off * re, sd_off * im);
            buf[[i, j]] = z;
            buf[[j, i]] = z.conj();
        }
    }
}

/// Adds `coeff` times a fresh GUE increment to `buf` without materializing
/// the increment.
pub fn add_gue_increment(buf: &mut CMat, dt: f64, coeff: f64, rng: &mut impl Rng) {
    let n = buf.nrows();
    let sd_diag = coeff * (dt / n as f64).sqrt();
    let sd_off = coeff * (dt / (2.0 * n as f64)).sqrt();
    for i in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        buf[[i, i]] += Complex64::new(sd_diag * g, 0.0);
        for j in (i + 1)..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(sd_off * re, sd_off * im);
            buf[[i, j]] += z;
            buf[[j, i]] += z.conj();
        }
    }
}

/// `d` fresh standard GUE(n) samples matching the size of `x`; the finite-n
/// proxy for a semicircular family freely independent of `x`.
pub fn sample_free_semicircular_proxy(x: &MatrixTuple, rng: &mut impl Rng) -> MatrixTuple {
    MatrixTuple::random_hermitian(x.size(), x.dims(), 1.0, rng)
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the standard
/// phase correction.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    let mut g = linalg::zeros(n);
    for v in g.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v = Complex64::new(re, im);
    }
    // Gram-Schmidt QR; n stays small where this is used.
    let mut q = linalg::zeros(n);
    for j in 0..n {
        let mut col: Vec<Complex64> = (0..n).map(|i| g[[i, j]]).collect();
        for k in 0..j {
            let mut proj = Complex64::new(0.0, 0.0);
            for i in 0..n {
                proj += q[[i, k]].conj() * col[i];
            }
            for i in 0..n {
                col[i] -= proj * q[[i, k]];
            }
        }
        let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // Phase fix: make the leading entry's phase deterministic so the
        // distribution is exactly Haar.
        let phase = if col[j].norm() > 0.0 { col[j] / col[j].norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[[i, j]] = col[i] / (norm * phase);
        }
    }
    q
}

/// Word moments `tr_n(X_{i_1} ... X_{i_k})` up to a degree cap.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    map: BTreeMap<Word, Complex64>,
    degree_cap: usize,
    dims: usize,
}

impl MomentVector {
    pub fn get(&self, w: &Word) -> Option<Complex64> {
        self.map.get(w).copied()
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.map.iter()
    }

    /// Euclidean distance between moment vectors on the common word set.
    /// This is a heuristic ranking only; it is not the Wasserstein metric.
    pub fn euclidean_distance(&self, other: &Self) -> f64 {
        let mut total = 0.0;
        for (w, c) in &self.map {
            let o = other.get(w).unwrap_or(Complex64::new(0.0, 0.0));
            total += (c - o).norm_sqr();
        }
        for (w, o) in &other.map {
            if !self.map.contains_key(w) {
                total += o.norm_sqr();
            }
        }
        total.sqrt()
    }
}

/// All word moments of `x` up to `degree_cap`, sharing partial products
/// through the evaluation cache.
pub fn moments(x: &MatrixTuple, degree_cap: usize) -> Result<MomentVector> {
    let d = x.dims();
    let mut cache = EvalCache::new(x);
    let mut map = BTreeMap::new();
    let mut frontier = vec![Word::empty()];
    map.insert(Word::empty(), Complex64::new(1.0, 0.0));
    for _len in 1..=degree_cap {
        let mut next = Vec::with_capacity(frontier.len() * d);
        for w in &frontier {
            for j in 1..=d as u8 {
                let mut letters = w.letters().to_vec();
                letters.push(j);
                let nw = Word::new(letters);
                let t = cache.trace(&nw)?;
                map.insert(nw.clone(), t);
                next.push(nw);
            }
        }
        frontier = next;
    }
    Ok(MomentVector { map, degree_cap, dims: d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::NcPolynomial;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tuple_rejects_non_hermitian() {
        let mut m = linalg::zeros(2);
        m[[0, 1]] = Complex64::new(1.0, 0.0);
        assert!(matches!(MatrixTuple::new(vec![m]), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn tuple_rejects_size_mismatch() {
        let a = linalg::identity(2);
        let b = linalg::identity(3);
        assert!(MatrixTuple::new(vec![a, b]).is_err());
    }

    #[test]
    fn gue_increment_trace_variance() {
        let mut rng = stream::derive(11, 0, stream::TAG_TEST);
        let n = 50;
        let samples = 10_000;
        let mut vals = Vec::with_capacity(samples);
        let mut means = Vec::with_capacity(samples);
        for _ in 0..samples {
            let w = gue_increment(n, 1.0, &mut rng);
            let t2 = linalg::pair_trace_n(&w, &w).re;
            vals.push(t2);
            means.push(linalg::trace_n(&w).re);
        }
        let (mean, se) = linalg::mean_and_se(&vals);
        assert!((mean - 1.0).abs() <= 3.0 * se, "E tr_n(dW)^2 = {mean} +- {se}");
        let (m1, se1) = linalg::mean_and_se(&means);
        assert!(m1.abs() <= 3.0 * se1 + 1e-12, "E tr_n(dW) = {m1} +- {se1}");
    }

    #[test]
    fn gue_fourth_moment_near_catalan() {
        let mut rng = stream::derive(12, 0, stream::TAG_TEST);
        let n = 200;
        let samples = 300;
        let mut vals = Vec::with_capacity(samples);
        for _ in 0..samples {
            let w = gue_increment(n, 1.0, &mut rng);
            let w2 = w.dot(&w);
            vals.push(linalg::pair_trace_n(&w2, &w2).re);
        }
        let (mean, se) = linalg::mean_and_se(&vals);
        // Fourth moment of the semicircle is C_2 = 2, with O(1/n^2) bias.
        assert!((mean - 2.0).abs() <= 3.0 * se + 10.0 / (n * n) as f64, "mean {mean} se {se}");
    }

    #[test]
    fn spectral_measure_basics() {
        let m = linalg::identity(3);
        let s = SpectralMeasure::from_matrix(&m).unwrap();
        assert_eq!(s.points(), &[1.0, 1.0, 1.0]);

        let d = MatrixTuple::from_real_diagonals(&[vec![0.0, 1.0, -1.0]]).unwrap();
        let s = SpectralMeasure::from_matrix(d.letter(1).unwrap()).unwrap();
        assert_eq!(s.points(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn spectral_second_moment_matches_trace() {
        let mut rng = stream::derive(13, 0, stream::TAG_TEST);
        for _ in 0..10 {
            let x = MatrixTuple::random_hermitian(20, 1, 1.0, &mut rng);
            let m = x.letter(1).unwrap();
            let s = SpectralMeasure::from_matrix(m).unwrap();
            let tr2 = linalg::pair_trace_n(m, m).re;
            assert_abs_diff_eq!(s.second_moment(), tr2, epsilon = 1e-10);
        }
    }

    #[test]
    fn wasserstein_point_masses() {
        let a = SpectralMeasure::dirac(0.0, 1).unwrap();
        let b = SpectralMeasure::dirac(2.5, 1).unwrap();
        assert_abs_diff_eq!(wasserstein2_1d(&a, &b), 2.5);
        assert_abs_diff_eq!(wasserstein2_1d(&a, &a), 0.0);
    }

    #[test]
    fn wasserstein_two_atom_shift() {
        let a = SpectralMeasure::from_points(vec![-1.0, 1.0]).unwrap();
        let b = SpectralMeasure::from_points(vec![0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(wasserstein2_1d(&a, &b), 1.0);
    }

    #[test]
    fn wasserstein_unequal_sizes_refines_quantiles() {
        // {0, 1} vs {0, 0, 1, 1} represent the same measure.
        let a = SpectralMeasure::from_points(vec![0.0, 1.0]).unwrap();
        let b = SpectralMeasure::from_points(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(wasserstein2_1d(&a, &b), 0.0);
        // Dirac at 0 vs uniform {-1, 1}: monotone coupling moves mass 1/2
        // a distance 1 each way.
        let c = SpectralMeasure::dirac(0.0, 1).unwrap();
        let d = SpectralMeasure::from_points(vec![-1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(wasserstein2_1d(&c, &d), 1.0);
    }

    #[test]
    fn wasserstein_is_a_metric_on_random_triples() {
        let mut rng = stream::derive(14, 0, stream::TAG_TEST);
        for _ in 0..100 {
            let n = rng.gen_range(2..=12);
            let mk = |rng: &mut ChaCha8Rng| {
                SpectralMeasure::from_points((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect())
                    .unwrap()
            };
            let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let dab = wasserstein2_1d(&a, &b);
            let dba = wasserstein2_1d(&b, &a);
            let dac = wasserstein2_1d(&a, &c);
            let dcb = wasserstein2_1d(&c, &b);
            assert_abs_diff_eq!(dab, dba, epsilon = 1e-12);
            assert_abs_diff_eq!(wasserstein2_1d(&a, &a), 0.0, epsilon = 1e-12);
            assert!(dab <= dac + dcb + 1e-12);
        }
    }

    #[test]
    fn moments_unitary_invariance() {
        let mut rng = stream::derive(15, 0, stream::TAG_TEST);
        let x = MatrixTuple::random_hermitian(10, 2, 1.0, &mut rng);
        let u = haar_unitary(10, &mut rng);
        let y = x.conjugate(&u);
        let mx = moments(&x, 4).unwrap();
        let my = moments(&y, 4).unwrap();
        for (w, c) in mx.iter() {
            let o = my.get(w).unwrap();
            assert_abs_diff_eq!(c.re, o.re, epsilon = 1e-10);
            assert_abs_diff_eq!(c.im, o.im, epsilon = 1e-10);
        }
    }

    #[test]
    fn moments_empty_word_and_centering() {
        let x = MatrixTuple::from_real_diagonals(&[vec![1.0, -1.0]]).unwrap();
        let m = moments(&x, 3).unwrap();
        assert_abs_diff_eq!(m.get(&Word::empty()).unwrap().re, 1.0);
        assert_abs_diff_eq!(m.get(&Word::new(vec![1])).unwrap().re, 0.0);
        assert_abs_diff_eq!(m.get(&Word::new(vec![1, 1])).unwrap().re, 1.0);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = stream::derive(16, 0, stream::TAG_TEST);
        let u = haar_unitary(6, &mut rng);
        let id = u.dot(&linalg::conj_transpose(&u));
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(id[[i, j]].re, expect, epsilon = 1e-10);
                assert_abs_diff_eq!(id[[i, j]].im, 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn proxy_samples_are_nearly_free_of_the_state()
    {
        // tr_n(S X) for centered X averages to zero, and tr_n(X S X S) for
        // an identity X equals tr_n(S^2) which concentrates at 1.
        let mut rng = stream::derive(17, 0, stream::TAG_TEST);
        let n = 200;
        let id = MatrixTuple::ones(n, 1);
        let s = sample_free_semicircular_proxy(&id, &mut rng);
        let sm = s.letter(1).unwrap();
        let t2 = linalg::pair_trace_n(sm, sm).re;
        assert!((t2 - 1.0).abs() < 0.1, "tr_n S^2 = {t2}");

        let x = MatrixTuple::from_real_diagonals(&[
            (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect::<Vec<_>>(),
        ])
        .unwrap();
        let mut dots = Vec::new();
        let mut alt = Vec::new();
        for _ in 0..200 {
            let s = sample_free_semicircular_proxy(&x, &mut rng);
            let sm = s.letter(1).unwrap();
            dots.push(linalg::pair_trace_n(sm, x.letter(1).unwrap()).re);
            let sx = sm.dot(x.letter(1).unwrap());
            alt.push(linalg::pair_trace_n(&sx, &sx).re);
        }
        let (mean, se) = linalg::mean_and_se(&dots);
        assert!(mean.abs() <= 3.0 * se, "tr_n(S X) = {mean} +- {se}");
        // Alternating centered word: the free value is 0, finite-n bias O(1/n).
        let (amean, ase) = linalg::mean_and_se(&alt);
        assert!(amean.abs() <= 3.0 * ase + 5.0 / n as f64, "tr_n(SXSX) = {amean} +- {ase}");
    }

    #[test]
    fn stream_separation() {
        let mut a = stream::derive(1, 0, stream::TAG_COMMON);
        let mut b = stream::derive(1, 1, stream::TAG_COMMON);
        let mut c = stream::derive(1, 0, stream::TAG_GUE);
        let mut a2 = stream::derive(1, 0, stream::TAG_COMMON);
        let xa: u64 = a.gen();
        assert_ne!(xa, b.gen::<u64>());
        assert_ne!(xa, c.gen::<u64>());
        assert_eq!(xa, a2.gen::<u64>());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = stream::derive(18, 0, stream::TAG_TEST);
        let x = MatrixTuple::random_hermitian(4, 2, 1.0, &mut rng);
        let j = x.to_json();
        let back = MatrixTuple::from_json(&j).unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn tuple_evaluation_respects_letters() {
        let x = MatrixTuple::from_real_diagonals(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let p = NcPolynomial::letter(2, 2).unwrap();
        let m = p.evaluate(&x).unwrap();
        assert_abs_diff_eq!(m[[0, 0]].re, 3.0);
        assert_abs_diff_eq!(m[[1, 1]].re, 4.0);
    }
}
