//! Realization margins for the matricial (t) and finite-dimensional (s)
//! omission-type families, built on an independent subalgebra-copy distance
//! search.
//!
//! Copies of F inside A are enumerated up to unitary conjugacy by their
//! multiplicity matrices; the continuous part of the search runs over the
//! unitary group of A, parameterized as exponentials of skew-adjoint
//! elements. Distances are therefore upper bounds. `omits` verdicts only
//! need upper bounds and are always certified; `realizes` needs lower bounds
//! on an infimum, which multi-start search cannot provide, so it is issued
//! only when the copy enumeration is exactly empty at every size (NoCopy
//! everywhere, margin +inf) with no truncation. Everything else is reported
//! as `unknown` with the best margin found.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::algebra::{refine_span_distance, Element, FiniteDimAlgebra};
use crate::config::{derive_seed, OptConfig};
use crate::copies::{admissible_multiplicities, canonical_copy_units, Multiplicity};
use crate::error::{Error, Result};
use crate::formula::{Condition, Rational, TypeSchema};
use crate::optimize::pattern_search;
use crate::stable::copy_span_distance;

/// Fixed Frobenius-orthogonal span with a precomputed Gram inverse;
/// `op_dist` returns the operator-norm residual at the Frobenius-optimal
/// coefficients (an upper bound on the true span distance).
struct SpanSolver {
    basis: Vec<Element>,
    inv_sq_norms: Vec<f64>,
}

impl SpanSolver {
    fn new(basis: Vec<Element>) -> Self {
        let inv_sq_norms = basis
            .iter()
            .map(|e| {
                let n: f64 = e.blocks().iter().map(|b| b.frobenius_norm().powi(2)).sum();
                if n > 0.0 {
                    1.0 / n
                } else {
                    0.0
                }
            })
            .collect();
        SpanSolver { basis, inv_sq_norms }
    }

    fn coeffs(&self, target: &Element) -> Vec<Complex64> {
        self.basis
            .iter()
            .zip(&self.inv_sq_norms)
            .map(|(e, &inv)| {
                let mut ip = Complex64::new(0.0, 0.0);
                for (eb, tb) in e.blocks().iter().zip(target.blocks()) {
                    ip += eb.frobenius_inner(tb);
                }
                ip * inv
            })
            .collect()
    }

    fn op_dist(&self, target: &Element) -> Result<f64> {
        let coeffs = self.coeffs(target);
        let mut acc = target.clone();
        for (e, c) in self.basis.iter().zip(coeffs) {
            acc = acc.sub(&e.scale(c))?;
        }
        acc.norm()
    }
}

/// Skew-adjoint element from unconstrained real coordinates: per block, the
/// diagonal carries i*t and the upper triangle arbitrary complex entries
/// mirrored with a sign flip.
fn skew_dim(a: &FiniteDimAlgebra) -> usize {
    a.blocks().iter().map(|&k| k * k).sum()
}

fn skew_from_coords(a: &FiniteDimAlgebra, coords: &[f64]) -> Element {
    let mut el = a.zero();
    let mut idx = 0usize;
    for (bi, &k) in a.blocks().iter().enumerate() {
        let b = &mut el.blocks_mut()[bi];
        for i in 0..k {
            b[(i, i)] = Complex64::new(0.0, coords[idx]);
            idx += 1;
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let z = Complex64::new(coords[idx], coords[idx + 1]);
                idx += 2;
                b[(i, j)] = z;
                b[(j, i)] = -z.conj();
            }
        }
    }
    el
}

fn unitary_from_coords(a: &FiniteDimAlgebra, coords: &[f64]) -> Result<Element> {
    let skew = skew_from_coords(a, coords);
    let blocks = skew.blocks().iter().map(|b| b.exp_skew()).collect::<Result<Vec<_>>>()?;
    a.element_from_blocks(blocks)
}

/// Distance to the best copy with a fixed multiplicity pattern.
#[derive(Debug, Clone)]
pub struct CopyDistance {
    pub value: f64,
    pub multiplicity: Multiplicity,
    /// Matrix units of the best copy found (unitary conjugates of the
    /// canonical ones); handy as evaluation warm starts.
    pub units: Vec<Element>,
}

/// Result of a copy search: either no admissible multiplicity exists at all,
/// or the best distance found.
#[derive(Debug, Clone)]
pub enum CopySearch {
    NoCopy,
    Found(CopyDistance),
}

impl CopySearch {
    pub fn distance(&self) -> Option<f64> {
        match self {
            CopySearch::NoCopy => None,
            CopySearch::Found(c) => Some(c.value),
        }
    }
}

/// Best-found value of min over copies C of F (enumerated by multiplicity,
/// optimized over unitaries) of max_i dist(a_i, C).
pub fn dist_to_fd_copy(
    a: &FiniteDimAlgebra,
    tuple: &[Element],
    f_blocks: &[usize],
    unital: bool,
    cfg: &OptConfig,
) -> Result<CopySearch> {
    cfg.validate()?;
    if tuple.is_empty() {
        return Err(Error::InvalidArg("tuple must be nonempty".into()));
    }
    for t in tuple {
        if t.algebra() != a {
            return Err(Error::AlgebraMismatch("tuple element outside the algebra".into()));
        }
    }
    let mus = admissible_multiplicities(a, f_blocks, unital);
    if mus.is_empty() {
        return Ok(CopySearch::NoCopy);
    }
    let dim_u = skew_dim(a);
    let per_mu: Vec<Result<CopyDistance>> = crate::parallel::slice_map(&mus, |mu| {
        let units = canonical_copy_units(a, f_blocks, mu)?;
        let solver = SpanSolver::new(units.clone());
        let objective = |coords: &[f64]| -> f64 {
            let Ok(u) = unitary_from_coords(a, coords) else {
                return f64::INFINITY;
            };
            let uh = u.adjoint();
            let mut worst = 0.0f64;
            for t in tuple {
                let conj = match uh.mul(t).and_then(|x| x.mul(&u)) {
                    Ok(c) => c,
                    Err(_) => return f64::INFINITY,
                };
                match solver.op_dist(&conj) {
                    Ok(d) => worst = worst.max(d),
                    Err(_) => return f64::INFINITY,
                }
            }
            worst
        };
        let step_tol = (cfg.tolerance * 0.1).clamp(1e-14, 1e-10);
        // The identity unitary covers tuples already sitting in the
        // canonical copy; when it is exact there is nothing to optimize.
        let at_identity = objective(&vec![0.0; dim_u]);
        let best = if at_identity <= cfg.tolerance {
            crate::optimize::SearchOutcome {
                point: vec![0.0; dim_u],
                value: at_identity,
                converged: true,
                evals: 1,
            }
        } else {
            crate::parallel::indexed_map(cfg.restarts, |slot| {
                let seed = derive_seed(cfg.seed, &[0xc0b7, slot as u64]);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let start: Vec<f64> = if slot == 0 {
                    vec![0.0; dim_u]
                } else {
                    (0..dim_u)
                        .map(|_| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            0.7 * g
                        })
                        .collect()
                };
                pattern_search(
                    &objective,
                    &start,
                    std::f64::consts::PI,
                    cfg.max_iters,
                    step_tol,
                    cfg.step_schedule,
                    |_x: &mut [f64]| {},
                    &mut rng,
                )
            })
            .into_iter()
            .enumerate()
            .min_by(|(i, x), (j, y)| x.value.partial_cmp(&y.value).unwrap().then(i.cmp(j)))
            .map(|(_, s)| s)
            .expect("restarts >= 1")
        };

        // Polish the value at the winning unitary with the full operator-norm
        // distance (least-squares warm start plus pattern refinement).
        let u = unitary_from_coords(a, &best.point)?;
        let uh = u.adjoint();
        let mut value = 0.0f64;
        for t in tuple {
            let conj = uh.mul(t)?.mul(&u)?;
            let warm = solver.coeffs(&conj);
            let mut inner_cfg = cfg.nested();
            inner_cfg.restarts = 1;
            let d = refine_span_distance(&conj, &units, &warm, &inner_cfg);
            value = value.max(d);
        }
        let conj_units = units
            .iter()
            .map(|e| u.mul(e)?.mul(&uh))
            .collect::<Result<Vec<_>>>()?;
        Ok(CopyDistance { value, multiplicity: mu.clone(), units: conj_units })
    });

    let mut best: Option<CopyDistance> = None;
    for r in per_mu {
        let r = r?;
        if best.as_ref().map_or(true, |b| r.value < b.value) {
            best = Some(r);
        }
    }
    Ok(CopySearch::Found(best.expect("at least one multiplicity")))
}

/// Single-block case: copies of M_k.
pub fn dist_to_matrix_copy(
    a: &FiniteDimAlgebra,
    tuple: &[Element],
    k: usize,
    unital: bool,
    cfg: &OptConfig,
) -> Result<CopySearch> {
    dist_to_fd_copy(a, tuple, &[k], unital, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaKind {
    /// t-family: distances to full matrix algebra copies, k >= 2.
    Matricial,
    /// s-family: distances to all finite-dimensional algebras.
    FiniteDim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmissionVerdict {
    Realizes,
    Omits,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertifiedSide {
    /// Every row is an exactly-empty copy enumeration; the margin is +inf.
    ExactNoCopy,
    /// Distances are optimizer upper bounds only.
    UpperBoundsOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginRow {
    /// Block sizes of the candidate subalgebra (single entry for the t-family).
    pub f_blocks: Vec<usize>,
    /// None = no admissible copy (contributes +inf to the margin).
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmissionReport {
    pub schema: SchemaKind,
    pub m: u32,
    pub n: u32,
    pub unital: bool,
    pub rows: Vec<MarginRow>,
    /// min over rows; +inf when every row is NoCopy.
    pub margin: f64,
    pub verdict: OmissionVerdict,
    pub certified_side: CertifiedSide,
    /// The row list was cut off before covering every possible subalgebra.
    pub truncated: bool,
}

fn margin_report(
    schema: SchemaKind,
    m: u32,
    n: u32,
    unital: bool,
    rows: Vec<MarginRow>,
    truncated: bool,
    tol: f64,
) -> OmissionReport {
    let margin = rows
        .iter()
        .filter_map(|r| r.distance)
        .fold(f64::INFINITY, f64::min);
    let threshold = 1.0 / m as f64;
    let all_nocopy = rows.iter().all(|r| r.distance.is_none());
    let (verdict, certified_side) = if rows.iter().any(|r| r.distance.map_or(false, |d| d < threshold - tol)) {
        // Upper bounds below the threshold certify a violated condition.
        (OmissionVerdict::Omits, CertifiedSide::UpperBoundsOnly)
    } else if all_nocopy && !truncated {
        (OmissionVerdict::Realizes, CertifiedSide::ExactNoCopy)
    } else {
        (OmissionVerdict::Unknown, CertifiedSide::UpperBoundsOnly)
    };
    OmissionReport { schema, m, n, unital, rows, margin, verdict, certified_side, truncated }
}

/// Margin of an n-tuple against the t_{m,n} conditions, scanning copies of
/// M_k for 2 <= k <= k_max. Copies need k at most the largest block of A, so
/// a k_max at least that large covers every k.
pub fn lm_margin(
    a: &FiniteDimAlgebra,
    tuple: &[Element],
    m: u32,
    k_max: usize,
    unital: bool,
    cfg: &OptConfig,
) -> Result<OmissionReport> {
    if m == 0 {
        return Err(Error::InvalidArg("m must be >= 1".into()));
    }
    check_tuple(a, tuple)?;
    let max_block = a.blocks().iter().copied().max().unwrap();
    let mut rows = Vec::new();
    for k in 2..=k_max.max(2) {
        let search = if k > max_block {
            CopySearch::NoCopy
        } else {
            dist_to_matrix_copy(a, tuple, k, unital, cfg)?
        };
        rows.push(MarginRow { f_blocks: vec![k], distance: search.distance() });
    }
    let truncated = k_max < max_block;
    Ok(margin_report(
        SchemaKind::Matricial,
        m,
        tuple.len() as u32,
        unital,
        rows,
        truncated,
        cfg.tolerance.max(1e-9),
    ))
}

/// All block-size multisets (nondecreasing) with total dimension <= dim_max.
pub fn block_multisets(dim_max: usize) -> Vec<Vec<usize>> {
    fn go(min_k: usize, remaining: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        let mut k = min_k;
        while k * k <= remaining {
            cur.push(k);
            go(k, remaining - k * k, cur, out);
            cur.pop();
            k += 1;
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::new();
    go(1, dim_max, &mut cur, &mut out);
    out.sort();
    out.dedup();
    out
}

/// Margin of an n-tuple against the s_{m,n} conditions, scanning all
/// finite-dimensional algebras of dimension at most dim_max. Any subalgebra
/// of A has dimension at most dim(A), so dim_max >= dim(A) covers everything.
pub fn lf_margin(
    a: &FiniteDimAlgebra,
    tuple: &[Element],
    m: u32,
    dim_max: usize,
    unital: bool,
    cfg: &OptConfig,
) -> Result<OmissionReport> {
    if m == 0 {
        return Err(Error::InvalidArg("m must be >= 1".into()));
    }
    check_tuple(a, tuple)?;
    let mut rows = Vec::new();
    for blocks in block_multisets(dim_max) {
        let search = dist_to_fd_copy(a, tuple, &blocks, unital, cfg)?;
        rows.push(MarginRow { f_blocks: blocks, distance: search.distance() });
    }
    let truncated = dim_max < a.dim();
    Ok(margin_report(
        SchemaKind::FiniteDim,
        m,
        tuple.len() as u32,
        unital,
        rows,
        truncated,
        cfg.tolerance.max(1e-9),
    ))
}

fn check_tuple(a: &FiniteDimAlgebra, tuple: &[Element]) -> Result<()> {
    if tuple.is_empty() {
        return Err(Error::BindingError("tuple must be nonempty".into()));
    }
    for t in tuple {
        if t.algebra() != a {
            return Err(Error::AlgebraMismatch("tuple element outside the algebra".into()));
        }
        if t.norm()? > 1.0 + 1e-9 {
            return Err(Error::BallViolation("tuple must lie in the unit ball".into()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub schema: SchemaKind,
    pub m: u32,
    pub n: u32,
    pub samples: usize,
    pub realizes: usize,
    pub omits: usize,
    pub unknown: usize,
    /// Largest margin over the sampled tuples (+inf if some sample realizes
    /// with empty copy enumeration).
    pub max_margin: f64,
    /// Sample index attaining the max margin.
    pub worst_sample: usize,
}

/// Sample unit-ball n-tuples and aggregate their margins.
pub fn omission_scan(
    a: &FiniteDimAlgebra,
    schema: SchemaKind,
    m: u32,
    n: u32,
    samples: usize,
    unital: bool,
    cfg: &OptConfig,
) -> Result<ScanReport> {
    if n == 0 || samples == 0 {
        return Err(Error::InvalidArg("need n >= 1 and at least one sample".into()));
    }
    let reports: Vec<Result<OmissionReport>> = crate::parallel::indexed_map(samples, |si| {
        let tuple: Vec<Element> = (0..n)
            .map(|i| a.random_ball_element(1.0, derive_seed(cfg.seed, &[0x5ca9, si as u64, i as u64])))
            .collect();
        match schema {
            SchemaKind::Matricial => {
                let k_max = a.blocks().iter().copied().max().unwrap();
                lm_margin(a, &tuple, m, k_max.max(2), unital, cfg)
            }
            SchemaKind::FiniteDim => lf_margin(a, &tuple, m, a.dim(), unital, cfg),
        }
    });
    let mut out = ScanReport {
        schema,
        m,
        n,
        samples,
        realizes: 0,
        omits: 0,
        unknown: 0,
        max_margin: f64::NEG_INFINITY,
        worst_sample: 0,
    };
    for (si, r) in reports.into_iter().enumerate() {
        let r = r?;
        match r.verdict {
            OmissionVerdict::Realizes => out.realizes += 1,
            OmissionVerdict::Omits => out.omits += 1,
            OmissionVerdict::Unknown => out.unknown += 1,
        }
        if r.margin > out.max_margin {
            out.max_margin = r.margin;
            out.worst_sample = si;
        }
    }
    Ok(out)
}

/// The t_{m,n} schema, materialized up to k_max: conditions
/// "copy-span distance to M_k >= 1/m" for 2 <= k <= k_max plus the unit-ball
/// conditions.
pub fn matricial_type_schema(m: u32, n: u32, k_max: usize, unital: bool) -> Result<TypeSchema> {
    if m == 0 || n == 0 || k_max < 2 {
        return Err(Error::InvalidArg("need m, n >= 1 and k_max >= 2".into()));
    }
    let mut conds = Vec::new();
    for k in 2..=k_max {
        conds.push(Condition::ge(
            copy_span_distance(&[k], n as usize, unital)?,
            Rational::new(1, m as i64),
        )?);
    }
    TypeSchema::new(format!("t_{m}_{n}"), n, conds)
}

/// The s_{m,n} schema, materialized up to dim_max.
pub fn fd_type_schema(m: u32, n: u32, dim_max: usize, unital: bool) -> Result<TypeSchema> {
    if m == 0 || n == 0 || dim_max < 1 {
        return Err(Error::InvalidArg("need m, n, dim_max >= 1".into()));
    }
    let mut conds = Vec::new();
    for blocks in block_multisets(dim_max) {
        conds.push(Condition::ge(
            copy_span_distance(&blocks, n as usize, unital)?,
            Rational::new(1, m as i64),
        )?);
    }
    TypeSchema::new(format!("s_{m}_{n}"), n, conds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg(seed: u64) -> OptConfig {
        OptConfig { restarts: 2, max_iters: 60, tolerance: 1e-9, seed, ..Default::default() }
    }

    #[test]
    fn identity_copy_has_distance_zero() {
        let a = FiniteDimAlgebra::new(&[2]).unwrap();
        let e11 = a.matrix_unit(0, 0, 0);
        let s = dist_to_matrix_copy(&a, &[e11], 2, true, &quick_cfg(1)).unwrap();
        match s {
            CopySearch::Found(c) => assert!(c.value <= 1e-9, "got {}", c.value),
            CopySearch::NoCopy => panic!("M_2 is its own copy"),
        }
    }

    #[test]
    fn divisibility_yields_nocopy() {
        let a = FiniteDimAlgebra::new(&[2, 3]).unwrap();
        let z = a.unit();
        let s = dist_to_matrix_copy(&a, &[z], 2, true, &quick_cfg(2)).unwrap();
        assert!(matches!(s, CopySearch::NoCopy));
        // M_3 cannot embed unitally either: 3mu = 2 fails in the first block.
        let s = dist_to_matrix_copy(&a, &[a.unit()], 3, true, &quick_cfg(2)).unwrap();
        assert!(matches!(s, CopySearch::NoCopy));
        // F = [2,2] has no unital copy in M_3.
        let m3 = FiniteDimAlgebra::new(&[3]).unwrap();
        let s = dist_to_fd_copy(&m3, &[m3.unit()], &[2, 2], true, &quick_cfg(2)).unwrap();
        assert!(matches!(s, CopySearch::NoCopy));
    }

    #[test]
    fn conjugated_element_found_inside_copy() {
        // diag(1,1,-1,-1) lies in M_2 tensor 1_2 inside M_4.
        let a = FiniteDimAlgebra::new(&[4]).unwrap();
        let mut d = a.zero();
        for (i, v) in [1.0, 1.0, -1.0, -1.0].iter().enumerate() {
            d.blocks_mut()[0][(i, i)] = Complex64::new(*v, 0.0);
        }
        let cfg = OptConfig { restarts: 2, max_iters: 120, tolerance: 1e-9, seed: 3, ..Default::default() };
        let s = dist_to_matrix_copy(&a, &[d], 2, true, &cfg).unwrap();
        match s {
            CopySearch::Found(c) => assert!(c.value <= 1e-6, "got {}", c.value),
            CopySearch::NoCopy => panic!("unital M_2 copies exist in M_4"),
        }
    }

    #[test]
    fn fd_copy_with_scalar_block() {
        // F = [1] non-unital: C*e_11 contains e_11.
        let a = FiniteDimAlgebra::new(&[2]).unwrap();
        let s = dist_to_fd_copy(&a, &[a.matrix_unit(0, 0, 0)], &[1], false, &quick_cfg(4))
            .unwrap();
        match s {
            CopySearch::Found(c) => assert!(c.value <= 1e-9, "got {}", c.value),
            CopySearch::NoCopy => panic!("rank-one projections span M_1 copies"),
        }
    }

    #[test]
    fn lm_margin_verdicts() {
        // Commutative algebra: no M_k copies for k >= 2, margin +inf,
        // certified realizes.
        let cc = FiniteDimAlgebra::new(&[1, 1]).unwrap();
        let mut z = cc.zero();
        z.blocks_mut()[0][(0, 0)] = Complex64::new(1.0, 0.0);
        let rep = lm_margin(&cc, &[z], 4, 4, false, &quick_cfg(5)).unwrap();
        assert_eq!(rep.verdict, OmissionVerdict::Realizes);
        assert_eq!(rep.certified_side, CertifiedSide::ExactNoCopy);
        assert!(rep.margin.is_infinite());
        assert!(!rep.truncated);

        // M_3 omits every t_{m,1}: the k=3 row is the algebra itself.
        let m3 = FiniteDimAlgebra::new(&[3]).unwrap();
        let x = m3.random_ball_element(1.0, 9);
        let rep = lm_margin(&m3, &[x], 4, 3, false, &quick_cfg(6)).unwrap();
        assert_eq!(rep.verdict, OmissionVerdict::Omits);
        assert!(rep.rows[1].distance.unwrap() <= 1e-6);

        // Central projection in M_2 ⊕ M_3, unital variant: all rows NoCopy.
        let a = FiniteDimAlgebra::new(&[2, 3]).unwrap();
        let mut z = a.zero();
        z.blocks_mut()[0][(0, 0)] = Complex64::new(1.0, 0.0);
        z.blocks_mut()[0][(1, 1)] = Complex64::new(1.0, 0.0);
        let rep = lm_margin(&a, &[z.clone()], 4, 3, true, &quick_cfg(7)).unwrap();
        assert_eq!(rep.verdict, OmissionVerdict::Realizes);
        assert!(rep.margin >= 0.25);
        // The non-unital reading sees z inside the M_2 corner copy: omits.
        let rep = lm_margin(&a, &[z], 4, 3, false, &quick_cfg(7)).unwrap();
        assert_eq!(rep.verdict, OmissionVerdict::Omits);
        assert!(rep.rows[0].distance.unwrap() <= 1e-6);
    }

    #[test]
    fn lf_margin_self_copy_omits() {
        let a = FiniteDimAlgebra::new(&[2, 3]).unwrap();
        let z = a.random_ball_element(1.0, 11);
        let rep = lf_margin(&a, &[z.clone()], 4, 13, true, &quick_cfg(8)).unwrap();
        assert_eq!(rep.verdict, OmissionVerdict::Omits);
        assert!(!rep.truncated);
        // Truncated scan cannot certify realization.
        let rep = lf_margin(&a, &[z], 4, 4, true, &quick_cfg(8)).unwrap();
        assert!(rep.truncated);
        assert_ne!(rep.verdict, OmissionVerdict::Realizes);
    }

    #[test]
    fn block_multiset_enumeration() {
        let sets = block_multisets(4);
        assert!(sets.contains(&vec![1]));
        assert!(sets.contains(&vec![1, 1, 1, 1]));
        assert!(sets.contains(&vec![2]));
        assert!(sets.contains(&vec![1, 1]));
        assert!(!sets.iter().any(|s| s.iter().map(|k| k * k).sum::<usize>() > 4));
    }

    #[test]
    fn schema_builders() {
        let t = matricial_type_schema(4, 1, 3, false).unwrap();
        // k = 2, 3 conditions plus one ball condition.
        assert_eq!(t.conditions.len(), 3);
        assert_eq!(t.arity, 1);
        let s = fd_type_schema(2, 1, 2, false).unwrap();
        assert!(s.conditions.len() > 2);
    }
}
