//! Canonical copies of a finite-dimensional algebra F inside another one.
//!
//! Up to unitary conjugation, an embedding of F = ⊕_l M_{k(l)} into
//! A = ⊕_j M_{v(j)} is described by a multiplicity matrix mu[j][l]: block j
//! of A receives mu[j][l] diagonal copies of the l-th block of F, padded with
//! zeros. Unital embeddings fill each block exactly; injectivity requires
//! every F-block to land somewhere. This module enumerates the admissible
//! multiplicity matrices and materializes the canonical matrix units of each
//! copy (ordered F-block-major, then row-major, matching the formula
//! builders' variable layout).

use crate::algebra::{Element, FiniteDimAlgebra};
use crate::error::{Error, Result};

pub type Multiplicity = Vec<Vec<usize>>;

/// All admissible multiplicity matrices for embedding `f_blocks` into `a`.
pub fn admissible_multiplicities(
    a: &FiniteDimAlgebra,
    f_blocks: &[usize],
    unital: bool,
) -> Vec<Multiplicity> {
    let n = f_blocks.len();
    let mut per_block: Vec<Vec<Vec<usize>>> = Vec::new();
    for &v in a.blocks() {
        let mut rows: Vec<Vec<usize>> = Vec::new();
        let mut cur = vec![0usize; n];
        enumerate_rows(f_blocks, v, unital, 0, 0, &mut cur, &mut rows);
        if rows.is_empty() {
            return Vec::new();
        }
        per_block.push(rows);
    }
    let mut out = Vec::new();
    let mut choice = vec![0usize; per_block.len()];
    'outer: loop {
        let mu: Multiplicity =
            choice.iter().enumerate().map(|(j, &c)| per_block[j][c].clone()).collect();
        // Injectivity: every F-block embeds at least once.
        if (0..n).all(|l| mu.iter().map(|row| row[l]).sum::<usize>() >= 1) {
            out.push(mu);
        }
        for j in 0..choice.len() {
            choice[j] += 1;
            if choice[j] < per_block[j].len() {
                continue 'outer;
            }
            choice[j] = 0;
        }
        break;
    }
    out
}

fn enumerate_rows(
    f_blocks: &[usize],
    capacity: usize,
    unital: bool,
    l: usize,
    used: usize,
    cur: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if l == f_blocks.len() {
        if !unital || used == capacity {
            out.push(cur.clone());
        }
        return;
    }
    let k = f_blocks[l];
    let max_copies = (capacity - used) / k;
    for c in 0..=max_copies {
        cur[l] = c;
        enumerate_rows(f_blocks, capacity, unital, l + 1, used + c * k, cur, out);
    }
    cur[l] = 0;
}

/// Canonical matrix units of the copy described by `mu`, in the layout used
/// by the unit-defect formulas: for each F-block l, the units e^{(l)}_{ij}
/// row-major.
pub fn canonical_copy_units(
    a: &FiniteDimAlgebra,
    f_blocks: &[usize],
    mu: &Multiplicity,
) -> Result<Vec<Element>> {
    if mu.len() != a.n_blocks() || mu.iter().any(|row| row.len() != f_blocks.len()) {
        return Err(Error::InvalidArg("multiplicity shape mismatch".into()));
    }
    for (j, row) in mu.iter().enumerate() {
        let need: usize = row.iter().zip(f_blocks).map(|(&m, &k)| m * k).sum();
        if need > a.blocks()[j] {
            return Err(Error::InvalidArg(format!("multiplicities overflow block {j}")));
        }
    }
    let mut units = Vec::new();
    for (l, &k) in f_blocks.iter().enumerate() {
        for i in 0..k {
            for jj in 0..k {
                let mut e = a.zero();
                for (ab, row) in mu.iter().enumerate() {
                    // Offset of the first copy of F-block l inside A-block ab.
                    let mut off: usize = f_blocks[..l]
                        .iter()
                        .zip(&row[..l])
                        .map(|(&kk, &m)| kk * m)
                        .sum();
                    for _ in 0..row[l] {
                        e.blocks_mut()[ab][(off + i, off + jj)] = num_complex::Complex64::new(1.0, 0.0);
                        off += k;
                    }
                }
                units.push(e);
            }
        }
    }
    Ok(units)
}

/// Matrix units of the interleaved copy a -> a ⊗ 1_mu of M_k: inside A-block
/// j the unit e_ij occupies positions (i*mu + t, j*mu + t) for t < mu[j],
/// zero-padded past k*mu[j]. A permutation conjugate of the consecutive
/// layout, but a distinct warm start.
pub fn interleaved_matrix_units(
    a: &FiniteDimAlgebra,
    k: usize,
    mu: &[usize],
) -> Result<Vec<Element>> {
    if mu.len() != a.n_blocks() {
        return Err(Error::InvalidArg("multiplicity shape mismatch".into()));
    }
    for (j, &m) in mu.iter().enumerate() {
        if m * k > a.blocks()[j] {
            return Err(Error::InvalidArg(format!("multiplicities overflow block {j}")));
        }
    }
    let mut units = Vec::with_capacity(k * k);
    for i in 0..k {
        for jj in 0..k {
            let mut e = a.zero();
            for (ab, &m) in mu.iter().enumerate() {
                for t in 0..m {
                    e.blocks_mut()[ab][(i * m + t, jj * m + t)] =
                        num_complex::Complex64::new(1.0, 0.0);
                }
            }
            units.push(e);
        }
    }
    Ok(units)
}

/// Canonical units for every admissible copy; the standard warm-start set
/// for copy-distance evaluations. For single-block F with multiplicity >= 2
/// somewhere, the interleaved layout is included as well.
pub fn canonical_copy_starts(
    a: &FiniteDimAlgebra,
    f_blocks: &[usize],
    unital: bool,
) -> Result<Vec<Vec<Element>>> {
    let mus = admissible_multiplicities(a, f_blocks, unital);
    let mut out = Vec::with_capacity(mus.len());
    for mu in &mus {
        out.push(canonical_copy_units(a, f_blocks, mu)?);
        if let [k] = f_blocks {
            let flat: Vec<usize> = mu.iter().map(|row| row[0]).collect();
            if flat.iter().any(|&m| m >= 2) {
                out.push(interleaved_matrix_units(a, *k, &flat)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unital_divisibility() {
        let a = FiniteDimAlgebra::new(&[2, 3]).unwrap();
        // No unital copy of M_2: 2mu = 3 has no solution in the second block.
        assert!(admissible_multiplicities(&a, &[2], true).is_empty());
        // Non-unital copies exist: (1,0), (0,1), (1,1).
        let mus = admissible_multiplicities(&a, &[2], false);
        assert_eq!(mus.len(), 3);
        // F = A embeds unitally exactly one way.
        let mus = admissible_multiplicities(&a, &[2, 3], true);
        assert_eq!(mus, vec![vec![vec![1, 0], vec![0, 1]]]);
    }

    #[test]
    fn m2_in_m4_copies() {
        let a = FiniteDimAlgebra::new(&[4]).unwrap();
        let unital: Vec<_> = admissible_multiplicities(&a, &[2], true);
        assert_eq!(unital, vec![vec![vec![2]]]);
        let any = admissible_multiplicities(&a, &[2], false);
        assert_eq!(any.len(), 2); // multiplicity 1 or 2
    }

    #[test]
    fn canonical_units_satisfy_relations() {
        let a = FiniteDimAlgebra::new(&[4]).unwrap();
        let units = canonical_copy_units(&a, &[2], &vec![vec![2]]).unwrap();
        assert_eq!(units.len(), 4);
        let e = |i: usize, j: usize| &units[i * 2 + j];
        // e_01 * e_10 = e_00, e_01^* = e_10, sum of diagonals = 1 (unital copy).
        assert_eq!(e(0, 1).mul(e(1, 0)).unwrap(), *e(0, 0));
        assert_eq!(e(0, 1).adjoint(), *e(1, 0));
        let sum = e(0, 0).add(e(1, 1)).unwrap();
        assert_eq!(sum, a.unit());
    }

    #[test]
    fn multi_block_copy_layout() {
        // F = M_1 ⊕ M_2 into A = M_3, one copy of each: diag(s, b) layout.
        let a = FiniteDimAlgebra::new(&[3]).unwrap();
        let mu = vec![vec![1, 1]];
        let units = canonical_copy_units(&a, &[1, 2], &mu).unwrap();
        assert_eq!(units.len(), 1 + 4);
        // The M_1 unit sits at (0,0), the M_2 units in the lower 2x2 corner.
        assert_eq!(units[0], a.matrix_unit(0, 0, 0));
        assert_eq!(units[1], a.matrix_unit(0, 1, 1));
        assert_eq!(units[2], a.matrix_unit(0, 1, 2));
    }
}
