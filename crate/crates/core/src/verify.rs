//! Reference solutions and the measurements that check the ADI/RKPM theory:
//! residual norms, residual orthogonality, the mirror condition, the
//! ADI-versus-RKPM gap, and the SVD error floor.

use nalgebra::{DMatrix, DVector};

use crate::adi::{adi_lowrank, LowRankApproximation};
use crate::error::{Error, Result};
use crate::galerkin::{rkpm_solve, solve_small_sylvester, ProjectedEquation};
use crate::krylov::{OrthonormalBasis, ShiftSet};
use crate::linalg::{lowrank_norm2, norm2, real_eigenvalues, sorted_match_distance, Lu};
use crate::operator::LinearOperator;
use crate::problem::{LyapunovProblem, SylvesterProblem, DENSE_CHECK_LIMIT};
use crate::shifts::projected_operator;

/// Largest `n * m` for the Kronecker oracle. The system matrix is `(n m)^2` doubles,
/// so 4096 already means 128 MiB.
pub const DEFAULT_ORACLE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub residual_2norm: f64,
    /// `||R||_2 / ||b||^2`.
    pub residual_rel: f64,
    /// `||Q^T R||_2`.
    pub subspace_orth: f64,
    /// `||Q^T R||_2 / ||R||_2`, zero when `R` vanishes to working precision.
    pub subspace_orth_rel: f64,
}

/// Solves `(I (x) A + B^T (x) I) vec(X) = -vec(b c^T)` with a dense LU.
pub fn dense_sylvester_oracle(p: &SylvesterProblem, cap: usize) -> Result<DMatrix<f64>> {
    let (n, m) = (p.n(), p.m());
    let size = n * m;
    if size > cap {
        return Err(Error::OracleTooLarge { size, cap });
    }
    let mut k = DMatrix::zeros(size, size);
    for j in 0..m {
        for i in 0..n {
            for l in 0..n {
                k[(j * n + i, j * n + l)] += p.a[(i, l)];
            }
        }
    }
    for j in 0..m {
        for l in 0..m {
            let v = p.b[(l, j)];
            if v != 0.0 {
                for i in 0..n {
                    k[(j * n + i, l * n + i)] += v;
                }
            }
        }
    }
    let rhs = DVector::from_fn(size, |idx, _| -p.b_vec[idx % n] * p.c_vec[idx / n]);
    let lu = Lu::new(&k).ok_or_else(|| Error::Unsolvable("Kronecker system is singular".into()))?;
    let x = lu.solve(&rhs);
    Ok(DMatrix::from_column_slice(n, m, x.as_slice()))
}

/// Dense Bartels-Stewart solve of the full equation.
pub fn dense_bartels_stewart(p: &SylvesterProblem) -> Result<DMatrix<f64>> {
    let eq = ProjectedEquation { a_r: p.a.clone(), b_r: p.b.clone(), b_vec: p.b_vec.clone(), c_vec: p.c_vec.clone() };
    let sol = solve_small_sylvester(&eq)?;
    if sol.near_singular {
        return Err(Error::Unsolvable(format!("spectral separation {:e}", sol.min_separation)));
    }
    Ok(sol.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Kronecker,
    BartelsStewart,
}

/// Best available dense reference: the Kronecker oracle within `cap`, otherwise
/// Bartels-Stewart while both dimensions stay within [`DENSE_CHECK_LIMIT`].
pub fn reference_solution(p: &SylvesterProblem, cap: usize) -> Result<(DMatrix<f64>, ReferenceKind)> {
    match dense_sylvester_oracle(p, cap) {
        Ok(x) => Ok((x, ReferenceKind::Kronecker)),
        Err(Error::OracleTooLarge { size, cap }) => {
            if p.n().max(p.m()) > DENSE_CHECK_LIMIT {
                return Err(Error::OracleTooLarge { size, cap });
            }
            Ok((dense_bartels_stewart(p)?, ReferenceKind::BartelsStewart))
        }
        Err(e) => Err(e),
    }
}

/// `||A X + X B + b c^T||_F` for a dense `X`.
pub fn dense_residual(p: &SylvesterProblem, x: &DMatrix<f64>) -> f64 {
    (&p.a * x + x * &p.b + &p.b_vec * p.c_vec.transpose()).norm()
}

/// `R = F G^T` with `F = [A L, L, b]`, `G = [M, B^T M, c]`.
pub fn residual_factors(p: &SylvesterProblem, x: &LowRankApproximation) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m, k) = (p.n(), p.m(), x.l.ncols());
    let mut f = DMatrix::zeros(n, 2 * k + 1);
    let mut g = DMatrix::zeros(m, 2 * k + 1);
    f.columns_mut(0, k).copy_from(&p.a.apply_block(&x.l));
    f.columns_mut(k, k).copy_from(&x.l);
    f.set_column(2 * k, &p.b_vec);
    g.columns_mut(0, k).copy_from(&x.m);
    g.columns_mut(k, k).copy_from(&p.b.tr_mul(&x.m));
    g.set_column(2 * k, &p.c_vec);
    (f, g)
}

/// `||F G^T||_2` through thin QRs of the compound factors. Its rounding floor is
/// about `eps ||F|| ||G||`, which [`sylvester_residual`] avoids.
pub fn compound_residual_norm(p: &SylvesterProblem, x: &LowRankApproximation) -> f64 {
    let (f, g) = residual_factors(p, x);
    lowrank_norm2(&f, &g)
}

/// Orthonormal columns spanning `base` (kept as the leading columns) plus `extra`.
/// Remainders are kept down to exact zero so nothing of `extra` is dropped.
fn extend_frame(base: &DMatrix<f64>, extra: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = base.nrows();
    let mut cols: Vec<DVector<f64>> = base.column_iter().map(|c| c.into_owned()).collect();
    for m in extra {
        for c in m.column_iter() {
            if cols.len() == n {
                break;
            }
            let mut v = c.into_owned();
            if v.norm() == 0.0 {
                continue;
            }
            let mut accepted = false;
            for _ in 0..3 {
                for q in &cols {
                    let h = q.dot(&v);
                    v.axpy(-h, q, 1.0);
                }
                let norm = v.norm();
                if norm == 0.0 || !norm.is_finite() {
                    break;
                }
                v /= norm;
                if cols.iter().all(|q| q.dot(&v).abs() <= 1e-14) {
                    accepted = true;
                    break;
                }
            }
            if accepted {
                cols.push(v);
            }
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn tail(frame: &DMatrix<f64>, skip: usize) -> DMatrix<f64> {
    frame.columns(skip, frame.ncols() - skip).into_owned()
}

/// `v - V V^T v`, two passes.
fn reject(v: &DMatrix<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = v.clone();
    for _ in 0..2 {
        out -= basis * basis.tr_mul(&out);
    }
    out
}

fn block(rows: &[&[&DMatrix<f64>]]) -> DMatrix<f64> {
    let heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
    let widths: Vec<usize> = rows[0].iter().map(|m| m.ncols()).collect();
    let mut out = DMatrix::zeros(heights.iter().sum(), widths.iter().sum());
    let mut i0 = 0;
    for (r, h) in rows.iter().zip(&heights) {
        let mut j0 = 0;
        for (m, w) in r.iter().zip(&widths) {
            out.view_mut((i0, j0), (*h, *w)).copy_from(*m);
            j0 += w;
        }
        i0 += h;
    }
    out
}

/// Residual `R = A X + X B + b c^T` of a factored approximation together with
/// `||Q^T R||_2`.
///
/// `R` is written exactly in orthonormal frames `[V, W]` and `[U, W']`, where `V`
/// starts with `Q` and contains `L`, `U` contains `M`, and `W`, `W'` pick up the
/// parts of `A V`, `b` and `B^T U`, `c` outside them. Only the small core matrix is
/// formed, so large and nearly cancelling terms never meet in long sums.
pub fn sylvester_residual(p: &SylvesterProblem, x: &LowRankApproximation, q: &DMatrix<f64>) -> Result<ResidualReport> {
    if x.l.nrows() != p.n() {
        return Err(Error::DimensionMismatch { context: "rows of L", expected: p.n(), found: x.l.nrows() });
    }
    if x.m.nrows() != p.m() {
        return Err(Error::DimensionMismatch { context: "rows of M", expected: p.m(), found: x.m.nrows() });
    }
    if q.nrows() != p.n() {
        return Err(Error::DimensionMismatch { context: "rows of Q", expected: p.n(), found: q.nrows() });
    }
    let r = q.ncols();
    let v = extend_frame(q, &[&x.l]);
    let u = extend_frame(&DMatrix::zeros(p.m(), 0), &[&x.m]);
    let y = v.tr_mul(&x.l) * u.tr_mul(&x.m).transpose();

    let av = p.a.apply_block(&v);
    let a_hat = v.tr_mul(&av);
    let pa = reject(&av, &v);
    let b_v = DMatrix::from_column_slice(v.ncols(), 1, v.tr_mul(&p.b_vec).as_slice());
    let b_perp = reject(&DMatrix::from_column_slice(p.n(), 1, p.b_vec.as_slice()), &v);

    let btu = p.b.tr_mul(&u);
    let b_hat = u.tr_mul(&btu);
    let pb = reject(&btu, &u);
    let c_u = DMatrix::from_column_slice(u.ncols(), 1, u.tr_mul(&p.c_vec).as_slice());
    let c_perp = reject(&DMatrix::from_column_slice(p.m(), 1, p.c_vec.as_slice()), &u);

    let w = tail(&extend_frame(&v, &[&pa, &b_perp]), v.ncols());
    let w2 = tail(&extend_frame(&u, &[&pb, &c_perp]), u.ncols());
    let (pa_w, b_w) = (w.tr_mul(&pa), w.tr_mul(&b_perp));
    let (pb_w, c_w) = (w2.tr_mul(&pb), w2.tr_mul(&c_perp));

    let top_left = &a_hat * &y + &y * b_hat.transpose() + &b_v * c_u.transpose();
    let top_right = &y * pb_w.transpose() + &b_v * c_w.transpose();
    let bottom_left = &pa_w * &y + &b_w * c_u.transpose();
    let bottom_right = &b_w * c_w.transpose();
    let core = block(&[&[&top_left, &top_right], &[&bottom_left, &bottom_right]]);

    let residual = norm2(&core);
    let orth = norm2(&core.rows(0, r).into_owned());
    let scale = p.b_vec.norm() * p.c_vec.norm();
    // rounding level of the core itself; a residual below it is zero in working precision
    let noise = (core.nrows() + core.ncols()) as f64 * f64::EPSILON * ((av.norm() + btu.norm()) * y.norm() + scale);
    Ok(ResidualReport {
        residual_2norm: residual,
        residual_rel: if scale > 0.0 { residual / scale } else { residual },
        subspace_orth: orth,
        subspace_orth_rel: if residual > noise { orth / residual } else { 0.0 },
    })
}

/// Residual of `A X + X A^T + b b^T` and its orthogonality against `Q`.
pub fn lyapunov_residual(p: &LyapunovProblem, x: &LowRankApproximation, q: &OrthonormalBasis) -> Result<ResidualReport> {
    sylvester_residual(&p.to_sylvester(), x, &q.q)
}

/// Largest distance between `lambda(Q^T A Q)` and `-sigma` after sorting both on (Re, Im).
pub fn check_mirror_condition(a: &(impl LinearOperator + ?Sized), q: &OrthonormalBasis, sigma: &ShiftSet) -> Result<f64> {
    let eig = real_eigenvalues(&projected_operator(a, &q.q))?;
    let mirrored: Vec<_> = sigma.iter().map(|s| -s).collect();
    Ok(sorted_match_distance(&eig, &mirrored))
}

/// `||X_ADI - X_RKPM||_2 / ||X_RKPM||_2` with the same shifts on both sides.
pub fn check_equivalence(p: &SylvesterProblem, sigma: &ShiftSet) -> Result<f64> {
    let adi = adi_lowrank(p, sigma, sigma)?;
    let rk = rkpm_solve(p, sigma)?;
    Ok(lowrank_gap(&adi, &rk))
}

/// `||X - Y||_2 / ||Y||_2` for two factored matrices.
pub fn lowrank_gap(x: &LowRankApproximation, y: &LowRankApproximation) -> f64 {
    let f = concat(&x.l, &(-&y.l));
    let g = concat(&x.m, &y.m);
    lowrank_norm2(&f, &g) / lowrank_norm2(&y.l, &y.m).max(f64::MIN_POSITIVE)
}

fn concat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// `pi_{r+1} / pi_1`, the best relative 2-norm error of a rank-`r` approximation.
/// Singular values below `max(n, m) eps pi_1` count as zero.
pub fn svd_error_floor(x: &DMatrix<f64>, r: usize) -> f64 {
    let mut sv: Vec<f64> = x.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv.is_empty() || sv[0] == 0.0 || r >= sv.len() {
        return 0.0;
    }
    let cutoff = x.nrows().max(x.ncols()) as f64 * f64::EPSILON * sv[0];
    if sv[r] <= cutoff {
        0.0
    } else {
        sv[r] / sv[0]
    }
}

/// `||X - L M^T||_2 / ||X||_2`.
pub fn relative_error(x: &DMatrix<f64>, approx: &LowRankApproximation) -> f64 {
    norm2(&(x - approx.to_dense())) / norm2(x).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adi::adi_lyapunov;
    use crate::krylov::rational_krylov_basis;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(d))
    }

    fn ones(n: usize) -> DVector<f64> {
        DVector::from_element(n, 1.0)
    }

    #[test]
    fn oracle_examples() {
        let p = SylvesterProblem::new(diag(&[-1.0]), diag(&[-1.0]), ones(1), ones(1)).unwrap();
        assert!((dense_sylvester_oracle(&p, 16).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
        let p = SylvesterProblem::new(diag(&[-1.0, -2.0]), diag(&[-3.0, -4.0]), ones(2), ones(2)).unwrap();
        let x = dense_sylvester_oracle(&p, 16).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.25, 0.2, 0.2, 1.0 / 6.0]);
        assert!((x - want).norm() < 1e-15);
        let l = LyapunovProblem::new(diag(&[-1.0, -2.0]), ones(2)).unwrap();
        let x = dense_sylvester_oracle(&l.to_sylvester(), 16).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25]);
        assert!((x - want).norm() < 1e-15);
        assert!(matches!(dense_sylvester_oracle(&p, 3), Err(Error::OracleTooLarge { size: 4, cap: 3 })));
    }

    #[test]
    fn oracle_rejects_singular_system() {
        let p = SylvesterProblem::new(diag(&[1.0]), diag(&[-1.0]), ones(1), ones(1)).unwrap();
        assert!(matches!(dense_sylvester_oracle(&p, 16), Err(Error::Unsolvable(_))));
    }

    #[test]
    fn oracle_handles_nonsymmetric_b() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 0.0, -3.0, 1.0, 0.5, 0.0, -1.5]);
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -0.5, -2.0]);
        let p = SylvesterProblem::new(a, b, DVector::from_vec(vec![1.0, -1.0, 2.0]), DVector::from_vec(vec![0.5, 1.0]))
            .unwrap();
        let x = dense_sylvester_oracle(&p, 16).unwrap();
        assert!(dense_residual(&p, &x) < 1e-14);
        assert!((dense_bartels_stewart(&p).unwrap() - &x).norm() < 1e-14);
    }

    #[test]
    fn residual_of_zero_and_exact() {
        let l = LyapunovProblem::new(diag(&[-1.0, -3.0]), DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let q = rational_krylov_basis(&l.a, &l.b_vec, &ShiftSet::real(&[1.0]).unwrap()).unwrap();
        let r0 = lyapunov_residual(&l, &LowRankApproximation::zero(2, 2), &q).unwrap();
        let b2 = l.b_vec.norm_squared();
        assert!((r0.residual_2norm - b2).abs() < 1e-13);
        let qtb = q.q.tr_mul(&l.b_vec).norm();
        assert!((r0.subspace_orth - qtb * l.b_vec.norm()).abs() < 1e-13);

        let x = dense_sylvester_oracle(&l.to_sylvester(), 16).unwrap();
        let svd = x.clone().svd(true, true);
        let exact = LowRankApproximation { l: svd.u.unwrap() * DMatrix::from_diagonal(&svd.singular_values), m: svd.v_t.unwrap().transpose() };
        let r = lyapunov_residual(&l, &exact, &q).unwrap();
        assert!(r.residual_2norm <= 1e-10 * b2);
        assert!(r.subspace_orth <= r.residual_2norm + 1e-15);
    }

    #[test]
    fn frame_residual_matches_dense_and_compound() {
        let a = DMatrix::from_row_slice(4, 4, &[-3.0, 1.0, 0.0, 0.2, 0.5, -2.0, 1.0, 0.0, 0.0, -0.3, -4.0, 1.0, 0.1, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(3, 3, &[-1.0, 0.5, 0.0, -0.5, -2.0, 0.3, 0.0, 0.0, -1.5]);
        let p = SylvesterProblem::new(a, b, DVector::from_vec(vec![1.0, -1.0, 0.5, 2.0]), DVector::from_vec(vec![0.3, 1.0, -1.0]))
            .unwrap();
        let x = LowRankApproximation {
            l: DMatrix::from_row_slice(4, 2, &[0.1, 0.2, -0.3, 0.0, 0.5, 0.1, 0.0, 0.4]),
            m: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.2, -0.5, 0.3, 0.3]),
        };
        let q = rational_krylov_basis(&p.a, &p.b_vec, &ShiftSet::real(&[1.0, 3.0]).unwrap()).unwrap();
        let rep = sylvester_residual(&p, &x, &q.q).unwrap();
        let rd = &p.a * x.to_dense() + x.to_dense() * &p.b + &p.b_vec * p.c_vec.transpose();
        assert!((rep.residual_2norm - norm2(&rd)).abs() < 1e-13);
        assert!((rep.residual_2norm - compound_residual_norm(&p, &x)).abs() < 1e-13);
        assert!((rep.subspace_orth - norm2(&q.q.tr_mul(&rd))).abs() < 1e-13);
    }

    #[test]
    fn mirror_condition_examples() {
        let a = diag(&[-2.0]);
        let q = OrthonormalBasis { q: DMatrix::identity(1, 1), shifts: ShiftSet::real(&[2.0]).unwrap(), requested: 1 };
        assert_eq!(check_mirror_condition(&a, &q, &q.shifts).unwrap(), 0.0);
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]);
        let rot = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let q = OrthonormalBasis { q: rot, shifts: ShiftSet::real(&[]).unwrap(), requested: 2 };
        let s = crate::shifts::mirrored_spectrum_shifts(&a).unwrap();
        assert!(check_mirror_condition(&a, &q, &s).unwrap() < 1e-10);
    }

    #[test]
    fn equivalence_at_full_mirrored_spectrum() {
        let l = LyapunovProblem::new(diag(&[-1.0, -2.0, -5.0]), ones(3)).unwrap();
        let s = ShiftSet::real(&[1.0, 2.0, 5.0]).unwrap();
        assert!(check_equivalence(&l.to_sylvester(), &s).unwrap() < 1e-9);
        let x = adi_lyapunov(&l, &s).unwrap();
        let exact = dense_sylvester_oracle(&l.to_sylvester(), 64).unwrap();
        assert!(relative_error(&exact, &x) < 1e-10);
    }

    #[test]
    fn floor_examples() {
        assert_eq!(svd_error_floor(&diag(&[4.0, 2.0, 1.0]), 1), 0.5);
        let rank1 = DVector::from_vec(vec![1.0, 2.0, 3.0]) * DVector::from_vec(vec![1.0, -1.0]).transpose();
        assert_eq!(svd_error_floor(&rank1, 1), 0.0);
        assert_eq!(svd_error_floor(&diag(&[4.0, 2.0]), 2), 0.0);
    }
}
