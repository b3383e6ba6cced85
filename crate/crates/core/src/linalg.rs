//! Dense kernels shared by the solvers: a pivoted LU that also solves with the
//! transpose and adjoint, eigenvalues of small real matrices, and exact 2-norms
//! of low-rank products.

use nalgebra::{ComplexField, DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// LU factorization with partial pivoting, `P M = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T> Lu<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    /// Factors `m`. Fails when a pivot falls below `n * eps * max|m_ij|`.
    pub fn new(m: &DMatrix<T>) -> Option<Self> {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "LU of a non-square matrix");
        let mut lu: Vec<T> = m.as_slice().to_vec();
        let scale = lu.iter().fold(0.0f64, |acc, v| acc.max(v.modulus()));
        let threshold = (n as f64) * f64::EPSILON * scale;
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let col = &lu[k * n..(k + 1) * n];
            let (mut p, mut best) = (k, col[k].modulus());
            for (i, v) in col.iter().enumerate().skip(k + 1) {
                let a = v.modulus();
                if a > best {
                    best = a;
                    p = i;
                }
            }
            if best <= threshold || best == 0.0 {
                return None;
            }
            if p != k {
                perm.swap(k, p);
                for j in 0..n {
                    lu.swap(k + j * n, p + j * n);
                }
            }
            let pivot = lu[k + k * n];
            for i in k + 1..n {
                lu[i + k * n] /= pivot;
            }
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let lcol = &head[k * n..(k + 1) * n];
            for colj in tail.chunks_exact_mut(n) {
                let akj = colj[k];
                if akj.is_zero() {
                    continue;
                }
                for i in k + 1..n {
                    colj[i] -= lcol[i] * akj;
                }
            }
        }
        Some(Lu { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        // column-oriented forward substitution, unit lower factor
        for j in 0..n {
            let xj = x[j];
            if xj.is_zero() {
                continue;
            }
            let col = &self.lu[j * n..(j + 1) * n];
            for i in j + 1..n {
                x[i] -= col[i] * xj;
            }
        }
        for j in (0..n).rev() {
            let col = &self.lu[j * n..(j + 1) * n];
            x[j] /= col[j];
            let xj = x[j];
            for i in 0..j {
                x[i] -= col[i] * xj;
            }
        }
        DVector::from_vec(x)
    }

    /// Solves `M^H x = b` (`M^T x = b` when `conjugate` is false).
    fn solve_transposed(&self, b: &DVector<T>, conjugate: bool) -> DVector<T> {
        let n = self.n;
        let c = |v: T| if conjugate { v.conjugate() } else { v };
        let mut w: Vec<T> = b.iter().copied().collect();
        // U^H w = b, forward: row oriented on the columns of U
        for j in 0..n {
            let col = &self.lu[j * n..(j + 1) * n];
            let mut s = w[j];
            for i in 0..j {
                s -= c(col[i]) * w[i];
            }
            w[j] = s / c(col[j]);
        }
        // L^H v = w, backward
        for j in (0..n).rev() {
            let col = &self.lu[j * n..(j + 1) * n];
            let mut s = w[j];
            for i in j + 1..n {
                s -= c(col[i]) * w[i];
            }
            w[j] = s;
        }
        let mut x = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = w[k];
        }
        DVector::from_vec(x)
    }

    pub fn solve_adjoint(&self, b: &DVector<T>) -> DVector<T> {
        self.solve_transposed(b, true)
    }

    pub fn solve_transpose(&self, b: &DVector<T>) -> DVector<T> {
        self.solve_transposed(b, false)
    }

    /// Solves `M X = B` column by column.
    pub fn solve_matrix(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            out.set_column(j, &self.solve(&b.column(j).into_owned()));
        }
        out
    }

    /// Computes `B M^{-1}`, i.e. solves `X M = B`.
    pub fn right_solve_matrix(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for i in 0..b.nrows() {
            let row = b.row(i).transpose();
            out.set_row(i, &self.solve_transpose(&row).transpose());
        }
        out
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

pub fn to_complex_vec(v: &DVector<f64>) -> DVector<C64> {
    v.map(|x| C64::new(x, 0.0))
}

/// Eigenvalues of a small real matrix. Conjugate pairs come back exact.
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![C64::new(m[(0, 0)], 0.0)]);
    }
    let iters = 200 * n.max(10);
    let schur = Schur::try_new(m.clone(), f64::EPSILON, iters)
        .ok_or_else(|| Error::NoConvergence(format!("real Schur form of a {n}x{n} matrix")))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Sort key used for matching eigenvalues against shifts: lexicographic (Re, Im).
pub fn sort_lexicographic(values: &mut [C64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Largest pairwise distance after sorting both lists on (Re, Im).
/// Lists of different lengths are infinitely far apart.
pub fn sorted_match_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    sort_lexicographic(&mut a);
    sort_lexicographic(&mut b);
    a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn norm2(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Thin QR returning only the triangular factor (`min(n, k) x k`).
pub fn thin_r(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(0, m.ncols());
    }
    m.clone().qr().r()
}

/// Exact 2-norm of `F G^T` computed from the triangular factors of thin QRs.
pub fn lowrank_norm2(f: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    assert_eq!(f.ncols(), g.ncols());
    if f.ncols() == 0 {
        return 0.0;
    }
    let rf = thin_r(f);
    let rg = thin_r(g);
    norm2(&(rf * rg.transpose()))
}

/// `||Q^T Q - I||_F`.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let k = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(k, k)).norm()
}

/// Orthogonal projector onto the column span of `q` (assumed orthonormal).
pub fn projector(q: &DMatrix<f64>) -> DMatrix<f64> {
    q * q.transpose()
}

pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![(lo * hi).sqrt()],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}
