//! Builders for the stable formulas of the workbench (projection defect,
//! matrix-unit defect, finite-dimensional unit defect, copy-span distance,
//! anchored embedding defect), the correction algorithms that witness their
//! stability, and an empirical delta–epsilon prober.
//!
//! Variable layout conventions shared with the canonical-copy machinery:
//! matrix-unit variables are row-major per F-block, F-blocks in order. The
//! copy-span and embedding formulas put their m free variables first
//! (x_1..x_m) and quantify the unit variables right after (x_{m+1}..).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{Element, FiniteDimAlgebra};
use crate::config::{derive_seed, OptConfig};
use crate::copies::{admissible_multiplicities, canonical_copy_units};
use crate::error::{Error, Result};
use crate::formula::ast::{ratio_from_f64_lossy, ComplexRational, Rational};
use crate::formula::{Formula, PiecewiseLinear, Term};

/// Correction routines are guaranteed for defects up to this threshold.
pub const CORRECTION_DELTA0: f64 = 0.01;

/// Target constant for the matrix-unit correction: output units stay within
/// `MATRIX_UNIT_C * defect` of the input.
pub const MATRIX_UNIT_C: f64 = 50.0;

fn one() -> Term {
    Term::one()
}

/// rho_p(x1) = ||x1 - x1^*|| + ||x1^2 - x1||; its zero set is the set of
/// projections.
pub fn projection_defect() -> Formula {
    let x = Term::var(1);
    Formula::Atomic(x.clone().sub(x.clone().adjoint()))
        .add(Formula::Atomic(x.clone().mul(x.clone()).sub(x)))
}

/// rho_p applied to an arbitrary term.
fn projection_defect_of(t: Term) -> Formula {
    Formula::Atomic(t.clone().sub(t.clone().adjoint()))
        .add(Formula::Atomic(t.clone().mul(t.clone()).sub(t)))
}

/// The matrix-unit clauses over an arbitrary variable assignment
/// (i, j) -> variable index, 0-based i, j < k.
fn matrix_unit_clauses(k: usize, var: &dyn Fn(usize, usize) -> u32) -> Vec<Formula> {
    let x = |i: usize, j: usize| Term::var(var(i, j));
    let normalization = Formula::Atomic(x(0, 0)).absdiff(Formula::Atomic(one()));
    let mut clauses = Vec::with_capacity(k * k * k * k);
    for i in 0..k {
        for j in 0..k {
            let sym = Formula::Atomic(x(i, j).sub(x(j, i).adjoint()));
            for kk in 0..k {
                for ll in 0..k {
                    let prod = x(i, kk).mul(x(ll, j));
                    let rel = if kk == ll { x(i, j).sub(prod) } else { prod };
                    let clause = Formula::Atomic(rel)
                        .add(sym.clone())
                        .add(normalization.clone());
                    clauses.push(clause);
                }
            }
        }
    }
    clauses
}

/// Matrix-unit defect in k^2 variables x_{(i,j)} (row-major, 1-based):
/// max over i,j,k,l of ||delta_kl x_ij - x_ik x_lj|| + ||x_ij - x_ji^*|| +
/// | ||x_11|| - 1 |. The unital variant adds max(..., ||1 - sum x_ii||).
/// The zero set consists of matrix units of (unital) copies of M_k.
pub fn matrix_unit_defect(k: usize, unital: bool) -> Result<Formula> {
    if k < 1 {
        return Err(Error::InvalidArg("matrix size must be >= 1".into()));
    }
    let var = move |i: usize, j: usize| (i * k + j + 1) as u32;
    let alpha = Formula::max_of(matrix_unit_clauses(k, &var));
    if !unital {
        return Ok(alpha);
    }
    let mut sum = Term::var(var(0, 0));
    for i in 1..k {
        sum = sum.add(Term::var(var(i, i)));
    }
    Ok(alpha.max(Formula::Atomic(one().sub(sum))))
}

fn block_offsets(blocks: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(blocks.len());
    let mut acc = 0usize;
    for &k in blocks {
        off.push(acc);
        acc += k * k;
    }
    off
}

fn fd_unit_defect_with_offset(blocks: &[usize], var_offset: u32, unital: bool) -> Result<Formula> {
    if blocks.is_empty() || blocks.iter().any(|&k| k == 0) {
        return Err(Error::InvalidArg("invalid block list".into()));
    }
    let offs = block_offsets(blocks);
    let mut clauses = Vec::new();
    for (l, &k) in blocks.iter().enumerate() {
        let base = var_offset + offs[l] as u32;
        let var = move |i: usize, j: usize| base + (i * k + j + 1) as u32;
        clauses.extend(matrix_unit_clauses(k, &var));
    }
    let alpha_max = Formula::max_of(clauses);
    // Sum of all diagonal units across blocks.
    let mut diag_terms = Vec::new();
    for (l, &k) in blocks.iter().enumerate() {
        let base = var_offset + offs[l] as u32;
        for i in 0..k {
            diag_terms.push(Term::var(base + (i * k + i + 1) as u32));
        }
    }
    let mut sum = diag_terms[0].clone();
    for t in &diag_terms[1..] {
        sum = sum.add(t.clone());
    }
    let f = alpha_max.add(projection_defect_of(sum.clone()));
    if unital {
        Ok(f.max(Formula::Atomic(one().sub(sum))))
    } else {
        Ok(f)
    }
}

/// Unit defect for F = ⊕_l M_{k(l)}: max over blocks of the matrix-unit
/// defect plus the projection defect of the summed diagonal, with the unital
/// variant adding ||1 - sum||. Zero set: matrix units of (unital) copies of F.
pub fn fd_unit_defect(blocks: &[usize], unital: bool) -> Result<Formula> {
    fd_unit_defect_with_offset(blocks, 0, unital)
}

/// Copy-span distance formula in m free variables:
/// inf over unit tuples x of [ unit-defect(x) + inf over disk scalars of
/// max_t ||y_t - sum_s z_{t,s} x_s|| ].
/// Its value vanishes exactly when some (unital) copy of F contains points
/// arbitrarily close to the tuple.
pub fn copy_span_distance(blocks: &[usize], m: usize, unital: bool) -> Result<Formula> {
    if m < 1 {
        return Err(Error::InvalidArg("tuple arity must be >= 1".into()));
    }
    let t_units: usize = blocks.iter().map(|&k| k * k).sum();
    let defect = fd_unit_defect_with_offset(blocks, m as u32, unital)?;
    let unit_var = |s: usize| (m + 1 + s) as u32;
    let cvar = |t: usize, s: usize| (t * t_units + s + 1) as u32;

    let mut rows = Vec::with_capacity(m);
    for t in 0..m {
        let mut approx: Option<Term> = None;
        for s in 0..t_units {
            let piece = Term::cvar(cvar(t, s)).mul(Term::var(unit_var(s)));
            approx = Some(match approx {
                None => piece,
                Some(acc) => acc.add(piece),
            });
        }
        rows.push(Formula::Atomic(Term::var(t as u32 + 1).sub(approx.unwrap())));
    }
    let mut inner: Formula = defect.add({
        let mut body = Formula::max_of(rows);
        for t in (0..m).rev() {
            for s in (0..t_units).rev() {
                body = Formula::inf_scalar(cvar(t, s), Rational::from_integer(1), body);
            }
        }
        body
    });
    for s in (0..t_units).rev() {
        inner = Formula::inf(unit_var(s), Rational::from_integer(1), inner);
    }
    Ok(inner)
}

/// Anchored embedding defect: given an m-tuple b in the unit ball of
/// F = ⊕ M_{k(l)}, returns the m-ary formula
/// inf over unit tuples x of [ unit-defect(x) + sum_t ||y_t - sum_s c_{t,s} x_s|| ]
/// with the coordinates c of b embedded as exact literals. Its zero set is
/// the set of images of b under (unital) embeddings of F.
pub fn embedding_image_defect(
    blocks: &[usize],
    anchors: &[Element],
    unital: bool,
) -> Result<Formula> {
    let f_alg = FiniteDimAlgebra::new(blocks)?;
    if anchors.is_empty() {
        return Err(Error::InvalidArg("anchor tuple must be nonempty".into()));
    }
    for b in anchors {
        if b.algebra() != &f_alg {
            return Err(Error::InvalidArg("anchor tuple must lie in the given algebra".into()));
        }
        if b.norm()? > 1.0 + 1e-9 {
            return Err(Error::InvalidArg("anchor tuple must lie in the unit ball".into()));
        }
    }
    let m = anchors.len();
    let t_units: usize = blocks.iter().map(|&k| k * k).sum();
    let defect = fd_unit_defect_with_offset(blocks, m as u32, unital)?;
    let unit_var = |s: usize| (m + 1 + s) as u32;

    let mut rows = Vec::with_capacity(m);
    for (t, b) in anchors.iter().enumerate() {
        // Coordinates of b in the canonical basis, block-major row-major.
        let mut approx: Option<Term> = None;
        let mut s = 0usize;
        for (l, &k) in blocks.iter().enumerate() {
            for i in 0..k {
                for j in 0..k {
                    let z = b.block(l)[(i, j)];
                    if z.re != 0.0 || z.im != 0.0 {
                        let lit = Term::lit(ComplexRational::from_f64_lossy(z.re, z.im));
                        let piece = lit.mul(Term::var(unit_var(s)));
                        approx = Some(match approx {
                            None => piece,
                            Some(acc) => acc.add(piece),
                        });
                    }
                    s += 1;
                }
            }
        }
        let target = Term::var(t as u32 + 1);
        let diff = match approx {
            Some(acc) => target.sub(acc),
            None => target,
        };
        rows.push(Formula::Atomic(diff));
    }
    let mut inner = defect.add(Formula::sum_of(rows));
    for s in (0..t_units).rev() {
        inner = Formula::inf(unit_var(s), Rational::from_integer(1), inner);
    }
    Ok(inner)
}

// ---------------------------------------------------------------------------
// Direct numeric defect values (no AST overhead; used by corrections, the
// prober, and the copy-distance search).
// ---------------------------------------------------------------------------

pub fn projection_defect_value(x: &Element) -> Result<f64> {
    let sym = x.sub(&x.adjoint())?.norm()?;
    let idem = x.mul(x)?.sub(x)?.norm()?;
    Ok(sym + idem)
}

/// Numeric matrix-unit defect of a k^2-tuple (row-major).
pub fn matrix_unit_defect_value(xs: &[Element], unital: bool) -> Result<f64> {
    let k2 = xs.len();
    let k = (k2 as f64).sqrt().round() as usize;
    if k * k != k2 || k == 0 {
        return Err(Error::InvalidArg("tuple length must be a perfect square".into()));
    }
    let x = |i: usize, j: usize| &xs[i * k + j];
    let normalization = (x(0, 0).norm()? - 1.0).abs();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let sym = x(i, j).sub(&x(j, i).adjoint())?.norm()?;
            for kk in 0..k {
                for ll in 0..k {
                    let prod = x(i, kk).mul(x(ll, j))?;
                    let rel = if kk == ll { x(i, j).sub(&prod)?.norm()? } else { prod.norm()? };
                    worst = worst.max(rel + sym + normalization);
                }
            }
        }
    }
    if unital {
        let algebra = xs[0].algebra();
        let mut sum = algebra.zero();
        for i in 0..k {
            sum = sum.add(x(i, i))?;
        }
        worst = worst.max(algebra.unit().sub(&sum)?.norm()?);
    }
    Ok(worst)
}

/// Numeric unit defect for F = ⊕ M_{k(l)} at a dim(F)-tuple in block-major
/// row-major layout.
pub fn fd_unit_defect_value(blocks: &[usize], xs: &[Element], unital: bool) -> Result<f64> {
    let total: usize = blocks.iter().map(|&k| k * k).sum();
    if xs.len() != total {
        return Err(Error::InvalidArg("tuple length does not match the block list".into()));
    }
    let offs = block_offsets(blocks);
    let mut worst = 0.0f64;
    for (l, &k) in blocks.iter().enumerate() {
        let slice = &xs[offs[l]..offs[l] + k * k];
        worst = worst.max(matrix_unit_defect_value(slice, false)?);
    }
    let algebra = xs[0].algebra();
    let mut diag = algebra.zero();
    for (l, &k) in blocks.iter().enumerate() {
        for i in 0..k {
            diag = diag.add(&xs[offs[l] + i * k + i])?;
        }
    }
    let mut value = worst + projection_defect_value(&diag)?;
    if unital {
        value = value.max(algebra.unit().sub(&diag)?.norm()?);
    }
    Ok(value)
}

// ---------------------------------------------------------------------------
// Corrections
// ---------------------------------------------------------------------------

fn trace_re(e: &Element) -> f64 {
    e.blocks().iter().map(|b| (0..b.dim()).map(|i| b[(i, i)].re).sum::<f64>()).sum()
}

/// Spectral-cut correction to the nearest projection: h = (x + x^*)/2, then
/// eigenvalues above 1/2 are rounded to 1 and the rest to 0. Requires the
/// spectrum of h to stay 0.05 away from the cut; guarantees
/// ||p - x|| <= 4 rho_p(x) for defects below 0.1.
pub fn correct_projection(x: &Element) -> Result<Element> {
    let defect = projection_defect_value(x)?;
    if defect <= 3e-14 {
        return Ok(x.clone());
    }
    let h = x.add(&x.adjoint())?.scale(Complex64::new(0.5, 0.0));
    let mut blocks = Vec::with_capacity(h.blocks().len());
    for b in h.blocks() {
        let (vals, _) = b.eigh()?;
        if vals.iter().any(|l| (l - 0.5).abs() < 0.05) {
            return Err(Error::NoSpectralGap(format!(
                "eigenvalue {:?} too close to 1/2",
                vals.iter().cloned().fold(f64::NAN, |acc, l| {
                    if (l - 0.5).abs() < 0.05 {
                        l
                    } else {
                        acc
                    }
                })
            )));
        }
        blocks.push(b.spectral_map(|l| if l > 0.5 { 1.0 } else { 0.0 })?);
    }
    x.algebra().element_from_blocks(blocks)
}

fn polar_isometry(w: &Element) -> Result<Element> {
    let mut blocks = Vec::with_capacity(w.blocks().len());
    for b in w.blocks() {
        let h = b.adjoint().mul(b);
        let f = h.spectral_map(|t| if t > 0.25 { 1.0 / t.sqrt() } else { 0.0 })?;
        blocks.push(b.mul(&f));
    }
    w.algebra().element_from_blocks(blocks)
}

/// Correct an almost-matrix-unit tuple to exact matrix units.
///
/// Method: correct x_11 to a projection p, then build the column isometries
/// one row at a time — w_i = (1 - Q) x_i1 p with Q the span of the rows fixed
/// so far, polar-decomposed to a partial isometry u_i with u_i^* u_i = p and
/// range orthogonal to Q — and regenerate e_ij = u_i u_j^*. Inputs must have
/// defect at most [`CORRECTION_DELTA0`]; outputs have defect <= 1e-9 and stay
/// within [`MATRIX_UNIT_C`] times the input defect.
pub fn correct_matrix_units(xs: &[Element], unital: bool) -> Result<Vec<Element>> {
    let k2 = xs.len();
    let k = (k2 as f64).sqrt().round() as usize;
    if k * k != k2 || k == 0 {
        return Err(Error::InvalidArg("tuple length must be a perfect square".into()));
    }
    let defect = matrix_unit_defect_value(xs, unital)?;
    if defect <= 3e-14 {
        return Ok(xs.to_vec());
    }
    if defect > CORRECTION_DELTA0 + 1e-12 {
        return Err(Error::CorrectionFailed(format!(
            "defect {defect:.3e} above the correction threshold {CORRECTION_DELTA0}"
        )));
    }
    let algebra = xs[0].algebra().clone();
    let p = correct_projection(&xs[0]).map_err(|e| match e {
        Error::NoSpectralGap(m) => Error::CorrectionFailed(format!("corner projection: {m}")),
        other => other,
    })?;
    let rank = trace_re(&p);
    let mut us: Vec<Element> = vec![p.clone()];
    let mut q = p.clone();
    for i in 1..k {
        let complement = algebra.unit().sub(&q)?;
        let w = complement.mul(&xs[i * k])?.mul(&p)?;
        let u = polar_isometry(&w)?;
        let support = u.adjoint().mul(&u)?;
        if (trace_re(&support) - rank).abs() > 0.1 {
            return Err(Error::CorrectionFailed(format!(
                "polar step degenerate in row {i}: support rank {} vs {}",
                trace_re(&support),
                rank
            )));
        }
        q = q.add(&u.mul(&u.adjoint())?)?;
        us.push(u);
    }
    let mut out = Vec::with_capacity(k2);
    for i in 0..k {
        for j in 0..k {
            out.push(us[i].mul(&us[j].adjoint())?);
        }
    }
    let out_defect = matrix_unit_defect_value(&out, unital)?;
    if out_defect > 1e-9 {
        return Err(Error::CorrectionFailed(format!(
            "corrected defect {out_defect:.3e} still above 1e-9"
        )));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Stability probe
// ---------------------------------------------------------------------------

/// Formulas with a registered zero-set sampler and correction routine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeTarget {
    ProjectionDefect,
    MatrixUnits { k: usize },
}

/// Structural lookup of the registered probe targets.
pub fn probe_target_for(f: &Formula) -> Option<ProbeTarget> {
    if *f == projection_defect() {
        return Some(ProbeTarget::ProjectionDefect);
    }
    for k in 1..=6 {
        if let Ok(alpha) = matrix_unit_defect(k, false) {
            if *f == alpha {
                return Some(ProbeTarget::MatrixUnits { k });
            }
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct ProbeRow {
    pub delta: f64,
    /// Worst correction distance seen at this defect level (running maximum
    /// over the grid, so the column is a valid modulus).
    pub worst_eps: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub formula: String,
    pub rows: Vec<ProbeRow>,
    /// Monotone piecewise-linear fit delta -> worst epsilon.
    pub modulus: PiecewiseLinear,
}

/// Random unitary of A: exp of a random skew-adjoint element.
pub fn random_unitary(a: &FiniteDimAlgebra, seed: u64) -> Result<Element> {
    let g = a.random_ball_element(1.0, seed);
    let skew = g.sub(&g.adjoint())?.scale(Complex64::new(0.5, 0.0));
    let blocks = skew.blocks().iter().map(|b| b.exp_skew()).collect::<Result<Vec<_>>>()?;
    a.element_from_blocks(blocks)
}

fn sample_zero_set(
    target: ProbeTarget,
    a: &FiniteDimAlgebra,
    seed: u64,
) -> Result<Vec<Element>> {
    let u = random_unitary(a, derive_seed(seed, &[1]))?;
    match target {
        ProbeTarget::ProjectionDefect => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2]));
            let mut p0 = a.zero();
            for (bi, &k) in a.blocks().iter().enumerate() {
                let rank = rng.gen_range(0..=k);
                for i in 0..rank {
                    p0.blocks_mut()[bi][(i, i)] = Complex64::new(1.0, 0.0);
                }
            }
            Ok(vec![u.mul(&p0)?.mul(&u.adjoint())?])
        }
        ProbeTarget::MatrixUnits { k } => {
            let mus = admissible_multiplicities(a, &[k], false);
            if mus.is_empty() {
                return Err(Error::NotProbeable(format!("no copies of M_{k} in the algebra")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3]));
            let mu = &mus[rng.gen_range(0..mus.len())];
            let units = canonical_copy_units(a, &[k], mu)?;
            units.iter().map(|e| u.mul(e)?.mul(&u.adjoint())).collect()
        }
    }
}

fn defect_of(target: ProbeTarget, xs: &[Element]) -> Result<f64> {
    match target {
        ProbeTarget::ProjectionDefect => projection_defect_value(&xs[0]),
        ProbeTarget::MatrixUnits { .. } => matrix_unit_defect_value(xs, false),
    }
}

fn correct(target: ProbeTarget, xs: &[Element]) -> Result<Vec<Element>> {
    match target {
        ProbeTarget::ProjectionDefect => Ok(vec![correct_projection(&xs[0])?]),
        ProbeTarget::MatrixUnits { .. } => correct_matrix_units(xs, false),
    }
}

/// Probe the stability of a registered formula: for each defect level delta,
/// perturb zero-set points until the defect reaches (at most) delta, run the
/// correction, and record the worst correction distance.
pub fn stability_probe(
    f: &Formula,
    a: &FiniteDimAlgebra,
    n_samples: usize,
    delta_grid: &[f64],
    cfg: &OptConfig,
) -> Result<StabilityReport> {
    cfg.validate()?;
    let target = probe_target_for(f)
        .ok_or_else(|| Error::NotProbeable("no registered correction routine".into()))?;
    if delta_grid.is_empty() || n_samples == 0 {
        return Err(Error::InvalidArg("need at least one delta and one sample".into()));
    }
    let mut grid: Vec<f64> = delta_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if grid[0] < 0.0 {
        return Err(Error::InvalidArg("defect levels must be nonnegative".into()));
    }
    if *grid.last().unwrap() > CORRECTION_DELTA0 {
        return Err(Error::InvalidArg(format!(
            "defect levels above {CORRECTION_DELTA0} are outside the correction contract"
        )));
    }

    let mut rows: Vec<ProbeRow> = Vec::with_capacity(grid.len());
    let mut running_worst = 0.0f64;
    for (gi, &delta) in grid.iter().enumerate() {
        let eps: Vec<Result<f64>> = crate::parallel::indexed_map(n_samples, |si| {
            let seed = derive_seed(cfg.seed, &[0x9e0b, gi as u64, si as u64]);
            let zs = sample_zero_set(target, a, seed)?;
            let sample = if delta == 0.0 {
                zs.clone()
            } else {
                // Direction of perturbation, then bisect the amplitude until
                // the defect is at most delta (and not hopelessly below it).
                let noise: Vec<Element> = (0..zs.len())
                    .map(|i| a.random_ball_element(1.0, derive_seed(seed, &[4, i as u64])))
                    .collect();
                let perturbed = |t: f64| -> Result<Vec<Element>> {
                    zs.iter()
                        .zip(&noise)
                        .map(|(z, n)| z.add(&n.scale(Complex64::new(t, 0.0))))
                        .collect()
                };
                let mut lo = 0.0f64;
                let mut hi = delta.min(1.0);
                for _ in 0..30 {
                    let mid = 0.5 * (lo + hi);
                    if defect_of(target, &perturbed(mid)?)? <= delta {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                perturbed(lo)?
            };
            let fixed = correct(target, &sample)?;
            let mut worst = 0.0f64;
            for (s, c) in sample.iter().zip(&fixed) {
                worst = worst.max(s.dist(c)?);
            }
            Ok(worst)
        });
        let mut worst = 0.0f64;
        for e in eps {
            worst = worst.max(e?);
        }
        running_worst = running_worst.max(worst);
        rows.push(ProbeRow { delta, worst_eps: running_worst, samples: n_samples });
    }

    // Fit the monotone piecewise-linear modulus through (0,0) and the rows.
    let mut pts: Vec<(Rational, Rational)> = vec![(Rational::from_integer(0), Rational::from_integer(0))];
    for row in &rows {
        let x = ratio_from_f64_lossy(row.delta);
        let y = ratio_from_f64_lossy(row.worst_eps);
        if let Some(last) = pts.last() {
            if x <= last.0 {
                continue;
            }
        }
        let y = pts.last().map(|(_, py)| y.max(*py)).unwrap_or(y);
        pts.push((x, y));
    }
    let modulus = PiecewiseLinear::new(pts)?;
    Ok(StabilityReport { formula: crate::formula::print_formula(f), rows, modulus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::eval_qf;
    use num_rational::Ratio;

    fn m2() -> FiniteDimAlgebra {
        FiniteDimAlgebra::new(&[2]).unwrap()
    }

    #[test]
    fn projection_defect_examples() {
        let alg = m2();
        let rho = projection_defect();
        let e11 = alg.matrix_unit(0, 0, 0);
        assert_eq!(eval_qf(&rho, &alg, &[e11]).unwrap(), 0.0);
        let half_unit = alg.unit().scale(Complex64::new(0.5, 0.0));
        let v = eval_qf(&rho, &alg, &[half_unit]).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
        // On a self-adjoint contraction the first summand vanishes.
        let g = alg.random_ball_element(1.0, 17);
        let h = g.add(&g.adjoint()).unwrap().scale(Complex64::new(0.5, 0.0)).retract(1.0);
        let v = eval_qf(&rho, &alg, &[h.clone()]).unwrap();
        let expect = h.mul(&h).unwrap().sub(&h).unwrap().norm().unwrap();
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn matrix_unit_defect_examples() {
        let alg = m2();
        let alpha2 = matrix_unit_defect(2, false).unwrap();
        assert_eq!(alpha2.free_vars().len(), 4);
        let units: Vec<Element> = vec![
            alg.matrix_unit(0, 0, 0),
            alg.matrix_unit(0, 0, 1),
            alg.matrix_unit(0, 1, 0),
            alg.matrix_unit(0, 1, 1),
        ];
        assert_eq!(eval_qf(&alpha2, &alg, &units).unwrap(), 0.0);
        assert_eq!(matrix_unit_defect_value(&units, false).unwrap(), 0.0);

        // All-zero input: the normalization clause forces value >= 1.
        let zeros = vec![alg.zero(), alg.zero(), alg.zero(), alg.zero()];
        assert!(eval_qf(&alpha2, &alg, &zeros).unwrap() >= 1.0);

        // Inside M_2 ⊕ M_3, the M_2-corner units are a non-unital copy:
        // alpha_2 vanishes but the unital variant sees ||1 - sum|| = 1.
        let big = FiniteDimAlgebra::new(&[2, 3]).unwrap();
        let mu = vec![vec![1], vec![0]];
        let corner = canonical_copy_units(&big, &[2], &mu).unwrap();
        assert!(matrix_unit_defect_value(&corner, false).unwrap() <= 1e-15);
        let alpha2u = matrix_unit_defect(2, true).unwrap();
        let v = eval_qf(&alpha2u, &big, &corner).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn fd_unit_defect_examples() {
        let alg = FiniteDimAlgebra::new(&[2, 3]).unwrap();
        let f = fd_unit_defect(&[2, 3], true).unwrap();
        assert_eq!(f.free_vars().len(), 13);
        let mu = vec![vec![1, 0], vec![0, 1]];
        let units = canonical_copy_units(&alg, &[2, 3], &mu).unwrap();
        assert!(eval_qf(&f, &alg, &units).unwrap() <= 1e-14);
        assert!(fd_unit_defect_value(&[2, 3], &units, true).unwrap() <= 1e-14);

        // F = [1]: zero set is norm-one projections.
        let f1 = fd_unit_defect(&[1], false).unwrap();
        let m2 = m2();
        let v = eval_qf(&f1, &m2, &[m2.matrix_unit(0, 0, 0)]).unwrap();
        assert_eq!(v, 0.0);
        let half = m2.matrix_unit(0, 0, 0).scale(Complex64::new(0.5, 0.0));
        assert!(eval_qf(&f1, &m2, &[half]).unwrap() > 0.2);
    }

    #[test]
    fn correct_projection_contract() {
        let alg = FiniteDimAlgebra::new(&[3]).unwrap();
        // Exact input returns unchanged.
        let p = alg.matrix_unit(0, 0, 0).add(&alg.matrix_unit(0, 1, 1)).unwrap();
        assert_eq!(correct_projection(&p).unwrap(), p);

        // Perturbed projection: contract ||p - x|| <= 4 rho_p(x).
        let e = alg.matrix_unit(0, 0, 0);
        let noise = alg.random_ball_element(1.0, 5).scale(Complex64::new(0.01, 0.0));
        let x = e.add(&noise).unwrap();
        let defect = projection_defect_value(&x).unwrap();
        assert!(defect <= 0.1);
        let fixed = correct_projection(&x).unwrap();
        assert!(projection_defect_value(&fixed).unwrap() <= 1e-12);
        assert!(fixed.dist(&x).unwrap() <= 4.0 * defect);

        // Spectrum at 1/2: no gap.
        let half = alg.unit().scale(Complex64::new(0.5, 0.0));
        assert!(matches!(correct_projection(&half), Err(Error::NoSpectralGap(_))));
    }

    #[test]
    fn correct_matrix_units_contract() {
        let alg = FiniteDimAlgebra::new(&[4]).unwrap();
        let units = canonical_copy_units(&alg, &[2], &vec![vec![2]]).unwrap();
        // Exact units pass through unchanged.
        assert_eq!(correct_matrix_units(&units, true).unwrap(), units);

        // Entrywise perturbation by 1e-3.
        let mut rng_seed = 100u64;
        for trial in 0..5 {
            rng_seed += trial;
            let noisy: Vec<Element> = units
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let n = alg.random_ball_element(1.0, rng_seed + i as u64 * 13);
                    e.add(&n.scale(Complex64::new(1e-3, 0.0))).unwrap()
                })
                .collect();
            let defect = matrix_unit_defect_value(&noisy, false).unwrap();
            assert!(defect <= CORRECTION_DELTA0, "defect {defect}");
            let fixed = correct_matrix_units(&noisy, false).unwrap();
            assert!(matrix_unit_defect_value(&fixed, false).unwrap() <= 1e-9);
            let mut dist = 0.0f64;
            for (f, x) in fixed.iter().zip(&noisy) {
                dist = dist.max(f.dist(x).unwrap());
            }
            assert!(dist <= 5e-2, "distance {dist}");
            assert!(dist <= MATRIX_UNIT_C * defect, "distance {dist} vs C*defect");
        }

        // Zero input fails the precondition.
        let zeros = vec![alg.zero(); 4];
        assert!(matches!(correct_matrix_units(&zeros, false), Err(Error::CorrectionFailed(_))));
    }

    #[test]
    fn probe_registration_and_zero_delta() {
        let alg = FiniteDimAlgebra::new(&[3]).unwrap();
        let cfg = OptConfig::with_seed(7);
        let report =
            stability_probe(&projection_defect(), &alg, 10, &[0.0, 0.005, 0.01], &cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.rows[0].worst_eps, 0.0);
        // Monotone column.
        for w in report.rows.windows(2) {
            assert!(w[0].worst_eps <= w[1].worst_eps + 1e-15);
            assert!(w[0].delta <= w[1].delta);
        }
        // 4-delta contract at the top of the grid.
        assert!(report.rows[2].worst_eps <= 0.04);

        let unknown = Formula::Atomic(Term::var(1));
        assert!(matches!(
            stability_probe(&unknown, &alg, 5, &[0.0], &cfg),
            Err(Error::NotProbeable(_))
        ));
    }

    #[test]
    fn gamma_zero_at_identity_image() {
        // The anchored formula itself evaluates to ~0 at the canonical units
        // substituted for its quantified variables (checked without the
        // optimizer by a direct quantifier-free reading).
        let alg = m2();
        let b = vec![alg.matrix_unit(0, 0, 0)];
        let gamma = embedding_image_defect(&[2], &b, true).unwrap();
        assert_eq!(gamma.free_vars().len(), 1);
        // Strip the quantifiers and bind both tuple and units directly.
        let mut args = vec![alg.matrix_unit(0, 0, 0)];
        args.extend(canonical_copy_units(&alg, &[2], &vec![vec![1]]).unwrap());
        let mut body = &gamma;
        while let Formula::Inf { body: inner, .. } = body {
            body = inner;
        }
        let v = eval_qf(body, &alg, &args).unwrap();
        assert!(v <= 1e-12, "got {v}");
    }

    #[test]
    fn beta0_shape() {
        let beta = copy_span_distance(&[2], 1, false).unwrap();
        assert_eq!(beta.free_vars().into_iter().collect::<Vec<_>>(), vec![1]);
        assert!(beta.free_cvars().is_empty());
        // Round-trips through the printer.
        let text = crate::formula::print_formula(&beta);
        assert_eq!(crate::formula::parse(&text).unwrap(), beta);
    }

    #[test]
    fn truncation_is_expressible() {
        let pl = PiecewiseLinear::truncation(Ratio::new(1, 2)).unwrap();
        assert_eq!(pl.eval(0.3), 0.3);
        assert_eq!(pl.eval(0.9), 0.5);
    }
}
