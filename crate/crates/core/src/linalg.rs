//! Small dense complex matrices and the iterative spectral routines used
//! everywhere else: one-sided Jacobi SVD for singular values / operator norms,
//! two-sided Jacobi for Hermitian eigendecompositions, and the spectral
//! functions built on top (projections, inverse square roots, unitary
//! exponentials).
//!
//! Blocks in this workbench are tiny (n ≲ 16), so Jacobi iterations are both
//! fast and very accurate; the routines target ~1e-14 relative accuracy and
//! the public norm contract is 1e-12.

use num_complex::Complex64;

use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 60;

/// Square complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Matrix unit e_{ij} (1-based indices are the caller's business; these are 0-based).
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = CMat::zeros(n);
        m[(i, j)] = Complex64::new(1.0, 0.0);
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "rows must form a square matrix");
        CMat { n, data: rows.iter().flatten().copied().collect() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        CMat { n: self.n, data }
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        CMat { n: self.n, data }
    }

    pub fn scale(&self, lambda: Complex64) -> CMat {
        CMat { n: self.n, data: self.data.iter().map(|a| a * lambda).collect() }
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius inner product tr(self^* rhs).
    pub fn frobenius_inner(&self, rhs: &CMat) -> Complex64 {
        assert_eq!(self.n, rhs.n);
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Singular values in nonincreasing order, by one-sided Jacobi on columns.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        if !self.is_finite() {
            return Err(Error::NumericError("non-finite matrix entry".into()));
        }
        let n = self.n;
        if n == 0 {
            return Ok(vec![]);
        }
        // Work on columns of a copy; rotations orthogonalize column pairs.
        let mut cols: Vec<Vec<Complex64>> = (0..n)
            .map(|j| (0..n).map(|i| self.data[i * n + j]).collect())
            .collect();
        let scale = self.frobenius_norm();
        if scale == 0.0 {
            return Ok(vec![0.0; n]);
        }
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let app: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                    let aqq: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                    let apq: Complex64 =
                        cols[p].iter().zip(&cols[q]).map(|(a, b)| a.conj() * b).sum();
                    let g = apq.norm();
                    if g <= JACOBI_TOL * (app * aqq).sqrt().max(JACOBI_TOL * scale * scale) {
                        continue;
                    }
                    rotated = true;
                    let phase = apq / g; // e^{i phi}
                    let theta = if (app - aqq).abs() < 1e-300 {
                        std::f64::consts::FRAC_PI_4
                    } else {
                        0.5 * (2.0 * g).atan2(app - aqq)
                    };
                    let (s, c) = theta.sin_cos();
                    for i in 0..n {
                        let vp = cols[p][i];
                        let vq = cols[q][i] * phase.conj(); // absorb the phase
                        cols[p][i] = vp * c + vq * s;
                        cols[q][i] = -vp * s + vq * c;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(sv)
    }

    /// Operator (spectral) norm: largest singular value.
    pub fn operator_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.first().copied().unwrap_or(0.0))
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi.
    ///
    /// Returns eigenvalues in nondecreasing order and a unitary whose columns
    /// are the matching eigenvectors. The input is symmetrized first, so tiny
    /// Hermiticity defects are tolerated.
    pub fn eigh(&self) -> Result<(Vec<f64>, CMat)> {
        if !self.is_finite() {
            return Err(Error::NumericError("non-finite matrix entry".into()));
        }
        let n = self.n;
        let mut a = {
            // (A + A^*)/2
            let adj = self.adjoint();
            self.add(&adj).scale(Complex64::new(0.5, 0.0))
        };
        let mut v = CMat::identity(n);
        let scale = a.frobenius_norm().max(1e-300);
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a[(p, q)].norm());
                }
            }
            if off <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let g = apq.norm();
                    if g <= JACOBI_TOL * scale {
                        continue;
                    }
                    let alpha = a[(p, p)].re;
                    let beta = a[(q, q)].re;
                    let phase = apq / g; // e^{i phi}
                    let theta = if (alpha - beta).abs() < 1e-300 {
                        std::f64::consts::FRAC_PI_4
                    } else {
                        0.5 * (2.0 * g).atan2(alpha - beta)
                    };
                    let (s, c) = theta.sin_cos();
                    let sp = phase.conj() * s; // s e^{-i phi}
                    // Right update: columns p,q of A and V.
                    for i in 0..n {
                        let ap = a[(i, p)];
                        let aq = a[(i, q)];
                        a[(i, p)] = ap * c + aq * sp;
                        a[(i, q)] = -ap * s + aq * c * phase.conj();
                        let vp = v[(i, p)];
                        let vq = v[(i, q)];
                        v[(i, p)] = vp * c + vq * sp;
                        v[(i, q)] = -vp * s + vq * c * phase.conj();
                    }
                    // Left update: rows p,q of A.
                    let sp_l = phase * s; // s e^{i phi}
                    for j in 0..n {
                        let ap = a[(p, j)];
                        let aq = a[(q, j)];
                        a[(p, j)] = ap * c + aq * sp_l;
                        a[(q, j)] = -ap * s + aq * c * phase;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
        let eigvals: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
        let mut vecs = CMat::zeros(n);
        for (newj, &oldj) in order.iter().enumerate() {
            for i in 0..n {
                vecs[(i, newj)] = v[(i, oldj)];
            }
        }
        Ok((eigvals, vecs))
    }

    /// V f(D) V^* for Hermitian input.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Result<CMat> {
        let (vals, vecs) = self.eigh()?;
        let n = self.n;
        let mut out = CMat::zeros(n);
        for (k, &lam) in vals.iter().enumerate() {
            let flam = f(lam);
            if flam == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = vecs[(i, k)];
                for j in 0..n {
                    out[(i, j)] += vi * vecs[(j, k)].conj() * flam;
                }
            }
        }
        Ok(out)
    }

    /// exp(S) for skew-Hermitian S, via the Hermitian eigendecomposition of -iS.
    pub fn exp_skew(&self) -> Result<CMat> {
        let n = self.n;
        let h = self.scale(Complex64::new(0.0, -1.0)); // -iS is Hermitian
        let (vals, vecs) = h.eigh()?;
        let mut out = CMat::zeros(n);
        for (k, &lam) in vals.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, lam); // e^{i lam}
            for i in 0..n {
                let vi = vecs[(i, k)];
                for j in 0..n {
                    out[(i, j)] += vi * vecs[(j, k)].conj() * phase;
                }
            }
        }
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Least-squares solve of min_x sum_a ||B_a - sum_j x_j A_{a,j}||_F^2 via the
/// normal equations, pseudo-inverted through the Hermitian eigendecomposition
/// so rank-deficient spans are fine.
pub fn frobenius_least_squares(basis: &[Vec<&CMat>], targets: &[&CMat]) -> Result<Vec<Complex64>> {
    let d = basis.len();
    if d == 0 {
        return Ok(vec![]);
    }
    let mut gram = CMat::zeros(d);
    let mut rhs = vec![Complex64::new(0.0, 0.0); d];
    for j in 0..d {
        for k in 0..d {
            let mut g = Complex64::new(0.0, 0.0);
            for a in 0..targets.len() {
                g += basis[j][a].frobenius_inner(basis[k][a]);
            }
            gram[(j, k)] = g;
        }
        let mut b = Complex64::new(0.0, 0.0);
        for a in 0..targets.len() {
            b += basis[j][a].frobenius_inner(targets[a]);
        }
        rhs[j] = b;
    }
    let (vals, vecs) = gram.eigh()?;
    let cutoff = vals.iter().cloned().fold(0.0, f64::max) * 1e-12;
    let mut x = vec![Complex64::new(0.0, 0.0); d];
    for k in 0..d {
        if vals[k] <= cutoff {
            continue;
        }
        let mut proj = Complex64::new(0.0, 0.0);
        for i in 0..d {
            proj += vecs[(i, k)].conj() * rhs[i];
        }
        let coef = proj / vals[k];
        for i in 0..d {
            x[i] += vecs[(i, k)] * coef;
        }
    }
    Ok(x)
}
