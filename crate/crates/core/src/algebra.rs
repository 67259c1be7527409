//! Finite-dimensional C*-algebras as direct sums of complex matrix blocks,
//! their elements, and the metric machinery on top (operator norm, subspace
//! distance, seeded unit-ball sampling).
//!
//! Every finite-dimensional C*-algebra is a direct sum of full matrix
//! algebras, so a block-size list is a complete description. Elements are
//! immutable; all operations return fresh values, which makes sharing across
//! threads trivial.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{derive_seed, OptConfig};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_least_squares, CMat};
use crate::optimize::pattern_search;

#[derive(Debug)]
struct AlgebraInner {
    blocks: Vec<usize>,
    dim: usize,
}

/// A = M_{k(1)} ⊕ ... ⊕ M_{k(n)}. Cheap to clone (shared descriptor);
/// equality is structural on the block list.
#[derive(Debug, Clone)]
pub struct FiniteDimAlgebra {
    inner: Arc<AlgebraInner>,
}

impl PartialEq for FiniteDimAlgebra {
    fn eq(&self, other: &Self) -> bool {
        self.inner.blocks == other.inner.blocks
    }
}
impl Eq for FiniteDimAlgebra {}

impl FiniteDimAlgebra {
    pub fn new(blocks: &[usize]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidAlgebra("block list must be nonempty".into()));
        }
        if blocks.iter().any(|&k| k == 0) {
            return Err(Error::InvalidAlgebra("block sizes must be >= 1".into()));
        }
        let dim = blocks.iter().map(|&k| k * k).sum();
        Ok(FiniteDimAlgebra { inner: Arc::new(AlgebraInner { blocks: blocks.to_vec(), dim }) })
    }

    pub fn blocks(&self) -> &[usize] {
        &self.inner.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.inner.blocks.len()
    }

    /// Complex dimension sum k(l)^2.
    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn zero(&self) -> Element {
        let blocks = self.blocks().iter().map(|&k| CMat::zeros(k)).collect();
        Element { algebra: self.clone(), blocks }
    }

    pub fn unit(&self) -> Element {
        let blocks = self.blocks().iter().map(|&k| CMat::identity(k)).collect();
        Element { algebra: self.clone(), blocks }
    }

    /// Canonical basis element: e_{ij} in block `l` (0-based everywhere).
    pub fn matrix_unit(&self, l: usize, i: usize, j: usize) -> Element {
        let mut e = self.zero();
        e.blocks[l][(i, j)] = Complex64::new(1.0, 0.0);
        e
    }

    pub fn element_from_blocks(&self, blocks: Vec<CMat>) -> Result<Element> {
        if blocks.len() != self.n_blocks()
            || blocks.iter().zip(self.blocks()).any(|(m, &k)| m.dim() != k)
        {
            return Err(Error::AlgebraMismatch("block shapes do not match the algebra".into()));
        }
        Ok(Element { algebra: self.clone(), blocks })
    }

    /// Deterministic unit-ball sample: entries are iid standard complex
    /// Gaussians (re and im both N(0, 1/2)), then the element is retracted by
    /// x -> x * min(1, radius/||x||).
    pub fn random_ball_element(&self, radius: f64, seed: u64) -> Element {
        assert!(radius > 0.0, "radius must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut el = self.zero();
        for b in &mut el.blocks {
            for z in b.data_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *z = Complex64::new(re / std::f64::consts::SQRT_2, im / std::f64::consts::SQRT_2);
            }
        }
        el.retract(radius)
    }
}

/// Member of a [`FiniteDimAlgebra`]: one complex matrix per block.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    algebra: FiniteDimAlgebra,
    blocks: Vec<CMat>,
}

impl Element {
    pub fn algebra(&self) -> &FiniteDimAlgebra {
        &self.algebra
    }

    pub fn block(&self, l: usize) -> &CMat {
        &self.blocks[l]
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [CMat] {
        &mut self.blocks
    }

    fn check_parent(&self, rhs: &Element, op: &str) -> Result<()> {
        if self.algebra != rhs.algebra {
            return Err(Error::AlgebraMismatch(format!("{op} on elements of different algebras")));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &Element) -> Result<Element> {
        self.check_parent(rhs, "add")?;
        let blocks = self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a.add(b)).collect();
        Ok(Element { algebra: self.algebra.clone(), blocks })
    }

    pub fn sub(&self, rhs: &Element) -> Result<Element> {
        self.check_parent(rhs, "sub")?;
        let blocks = self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a.sub(b)).collect();
        Ok(Element { algebra: self.algebra.clone(), blocks })
    }

    pub fn mul(&self, rhs: &Element) -> Result<Element> {
        self.check_parent(rhs, "mul")?;
        let blocks = self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a.mul(b)).collect();
        Ok(Element { algebra: self.algebra.clone(), blocks })
    }

    /// Conjugate transpose, blockwise.
    pub fn adjoint(&self) -> Element {
        let blocks = self.blocks.iter().map(|b| b.adjoint()).collect();
        Element { algebra: self.algebra.clone(), blocks }
    }

    pub fn scale(&self, lambda: Complex64) -> Element {
        let blocks = self.blocks.iter().map(|b| b.scale(lambda)).collect();
        Element { algebra: self.algebra.clone(), blocks }
    }

    /// Operator norm: the largest singular value over all blocks.
    pub fn norm(&self) -> Result<f64> {
        let mut best = 0.0f64;
        for b in &self.blocks {
            best = best.max(b.operator_norm()?);
        }
        Ok(best)
    }

    /// Norm with non-finite inputs mapped to +inf (for optimizer objectives).
    pub fn norm_or_inf(&self) -> f64 {
        self.norm().unwrap_or(f64::INFINITY)
    }

    pub fn dist(&self, rhs: &Element) -> Result<f64> {
        self.sub(rhs)?.norm()
    }

    /// x * min(1, radius/||x||): 1-Lipschitz retraction onto the radius-ball.
    pub fn retract(&self, radius: f64) -> Element {
        let n = self.norm_or_inf();
        if n <= radius || n == 0.0 {
            self.clone()
        } else {
            self.scale(Complex64::new(radius / n, 0.0))
        }
    }

    /// Pack into real coordinates: blocks in order, row-major, re then im.
    pub fn to_coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.algebra.dim());
        for b in &self.blocks {
            for z in b.data() {
                out.push(z.re);
                out.push(z.im);
            }
        }
        out
    }

    pub fn from_coords(algebra: &FiniteDimAlgebra, coords: &[f64]) -> Element {
        assert_eq!(coords.len(), 2 * algebra.dim());
        let mut el = algebra.zero();
        let mut idx = 0;
        for b in &mut el.blocks {
            for z in b.data_mut() {
                *z = Complex64::new(coords[idx], coords[idx + 1]);
                idx += 2;
            }
        }
        el
    }
}

/// Span of a finite list of elements (no independence required).
#[derive(Debug, Clone)]
pub struct Subspace {
    algebra: FiniteDimAlgebra,
    span: Vec<Element>,
}

impl Subspace {
    pub fn new(algebra: FiniteDimAlgebra, span: Vec<Element>) -> Result<Self> {
        for s in &span {
            if s.algebra() != &algebra {
                return Err(Error::AlgebraMismatch("spanning element outside the parent algebra".into()));
            }
        }
        Ok(Subspace { algebra, span })
    }

    pub fn algebra(&self) -> &FiniteDimAlgebra {
        &self.algebra
    }

    pub fn span(&self) -> &[Element] {
        &self.span
    }

    /// Combination sum_j lambda_j s_j.
    pub fn combination(&self, coeffs: &[Complex64]) -> Element {
        let mut acc = self.algebra.zero();
        for (s, &c) in self.span.iter().zip(coeffs) {
            acc = acc.add(&s.scale(c)).expect("span elements share the parent");
        }
        acc
    }
}

/// Best-found value of inf over complex coefficients of ||a - sum lambda_j s_j||.
///
/// The objective is convex in the coefficients, so a Frobenius least-squares
/// warm start followed by multi-start pattern search on the operator norm
/// lands on the global value; restarts only guard against step-size stalls.
/// The result is an upper bound on the true distance.
pub fn dist_to_subspace(a: &Element, s: &Subspace, cfg: &OptConfig) -> Result<f64> {
    cfg.validate()?;
    if a.algebra() != s.algebra() {
        return Err(Error::AlgebraMismatch("element and subspace have different parents".into()));
    }
    if s.span().is_empty() {
        return a.norm();
    }
    let warm = span_least_squares(a, s.span())?;
    Ok(refine_span_distance(a, s.span(), &warm, cfg))
}

/// Frobenius-optimal coefficients for approximating `a` in the span.
pub fn span_least_squares(a: &Element, span: &[Element]) -> Result<Vec<Complex64>> {
    let basis: Vec<Vec<&CMat>> = span.iter().map(|s| s.blocks().iter().collect()).collect();
    let targets: Vec<&CMat> = a.blocks().iter().collect();
    frobenius_least_squares(&basis, &targets)
}

/// Operator-norm polish of a coefficient vector; returns the best value found.
pub fn refine_span_distance(
    a: &Element,
    span: &[Element],
    warm: &[Complex64],
    cfg: &OptConfig,
) -> f64 {
    let d = span.len();
    let objective = |coords: &[f64]| -> f64 {
        let coeffs: Vec<Complex64> =
            (0..d).map(|j| Complex64::new(coords[2 * j], coords[2 * j + 1])).collect();
        let mut acc = a.clone();
        for (s, &c) in span.iter().zip(&coeffs) {
            acc = acc.sub(&s.scale(c)).expect("span elements share the parent");
        }
        acc.norm_or_inf()
    };
    let mut x0 = Vec::with_capacity(2 * d);
    for c in warm {
        x0.push(c.re);
        x0.push(c.im);
    }
    let scale = 1.0 + x0.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let results = crate::parallel::indexed_map(cfg.restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0x5d15, r as u64]));
        let start: Vec<f64> = if r == 0 {
            x0.clone()
        } else {
            x0.iter()
                .map(|v| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    v + 0.3 * scale * g
                })
                .collect()
        };
        let out = pattern_search(
            objective,
            &start,
            scale,
            cfg.max_iters,
            cfg.tolerance.min(1e-10),
            cfg.step_schedule,
            |_x: &mut [f64]| {},
            &mut rng,
        );
        out.value
    });
    results.into_iter().fold(f64::INFINITY, f64::min)
}
