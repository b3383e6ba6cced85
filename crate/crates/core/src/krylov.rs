//! Orthonormal bases of rational and extended Krylov subspaces.
//!
//! Bases are always real. A conjugate pair `{s, conj(s)}` contributes the real
//! and imaginary parts of the single solve `(s I - A)^{-1} b` with `Im s > 0`,
//! which span the same real subspace as the two complex directions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::operator::LinearOperator;

/// Relative norm below which an orthogonalized candidate is treated as dependent.
pub const DEFLATION_TOL: f64 = 1e-12;

/// Relative tolerance when pairing a complex shift with its conjugate.
const CONJUGATE_TOL: f64 = 1e-10;

/// Shifts in the open right half-plane, closed under conjugation.
///
/// Construction stores each conjugate pair adjacently, positive imaginary part first,
/// and snaps the partner to the exact conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSet {
    shifts: Vec<C64>,
}

impl ShiftSet {
    pub fn new(shifts: impl IntoIterator<Item = C64>) -> Result<Self> {
        let input: Vec<C64> = shifts.into_iter().collect();
        if let Some(s) = input.iter().find(|s| !(s.re > 0.0) || !s.im.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "shift {s} does not have a positive real part"
            )));
        }
        let mut used = vec![false; input.len()];
        let mut shifts = Vec::with_capacity(input.len());
        for i in 0..input.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let s = input[i];
            if s.im == 0.0 {
                shifts.push(s);
                continue;
            }
            let target = s.conj();
            let partner = (i + 1..input.len())
                .filter(|&j| !used[j])
                .min_by(|&a, &b| (input[a] - target).norm().total_cmp(&(input[b] - target).norm()))
                .filter(|&j| (input[j] - target).norm() <= CONJUGATE_TOL * s.norm());
            let Some(j) = partner else {
                return Err(Error::InvalidArgument(format!(
                    "shift set is not closed under conjugation: {s} has no partner"
                )));
            };
            used[j] = true;
            let upper = if s.im > 0.0 { s } else { target };
            shifts.push(upper);
            shifts.push(upper.conj());
        }
        Ok(ShiftSet { shifts })
    }

    pub fn real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| C64::new(v, 0.0)))
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.shifts
    }

    pub fn iter(&self) -> impl Iterator<Item = &C64> {
        self.shifts.iter()
    }

    pub fn is_real(&self) -> bool {
        self.shifts.iter().all(|s| s.im == 0.0)
    }

    /// The elementwise conjugate `conj(sigma)`; as a set it equals `self`.
    pub fn conj(&self) -> ShiftSet {
        let mut shifts: Vec<C64> = self.shifts.iter().map(|s| s.conj()).collect();
        // keep the positive-imaginary-first layout
        for k in 0..shifts.len().saturating_sub(1) {
            if shifts[k].im < 0.0 && shifts[k + 1] == shifts[k].conj() {
                shifts.swap(k, k + 1);
            }
        }
        ShiftSet { shifts }
    }

    /// `-sigma`, the points whose mirror images the shifts are.
    pub fn mirrored(&self) -> Vec<C64> {
        self.shifts.iter().map(|s| -s).collect()
    }

    /// Conjugate pairs stay together; `order` indexes the blocks (real shifts or pairs).
    pub fn permuted_blocks(&self, order: &[usize]) -> ShiftSet {
        let blocks = self.blocks();
        assert_eq!(order.len(), blocks.len());
        let shifts = order.iter().flat_map(|&k| blocks[k].iter().copied()).collect();
        ShiftSet { shifts }
    }

    /// Real shifts and conjugate pairs, in storage order.
    pub fn blocks(&self) -> Vec<&[C64]> {
        let mut out = Vec::new();
        let mut k = 0;
        while k < self.shifts.len() {
            let w = if self.shifts[k].im == 0.0 { 1 } else { 2 };
            out.push(&self.shifts[k..k + w]);
            k += w;
        }
        out
    }
}

/// Real `n x r'` basis with orthonormal columns and the shifts that produced it.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    pub q: DMatrix<f64>,
    pub shifts: ShiftSet,
    /// Number of directions requested; `dim()` is smaller after deflation.
    pub requested: usize,
}

impl OrthonormalBasis {
    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.requested
    }
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Returns the normalized
/// remainder, or `None` when it is below [`DEFLATION_TOL`] relative to `v`.
pub(crate) fn orthonormalize_against(columns: &[DVector<f64>], mut v: DVector<f64>) -> Option<DVector<f64>> {
    let initial = v.norm();
    if initial == 0.0 || !initial.is_finite() {
        return None;
    }
    for _ in 0..2 {
        for q in columns {
            let h = q.dot(&v);
            v.axpy(-h, q, 1.0);
        }
    }
    let norm = v.norm();
    if norm <= DEFLATION_TOL * initial {
        return None;
    }
    Some(v / norm)
}

fn stack(columns: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    if columns.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(columns)
    }
}

/// Orthonormal basis of `span{(s_i I - A)^{-1} b}`.
///
/// After the first block each solve is applied to the last accepted basis vector
/// instead of `b`. For a shift distinct from all earlier ones this spans the same
/// space (partial fractions) while keeping the candidates well separated from the
/// current span. A repeated shift is applied to `b` and therefore deflates.
pub fn rational_krylov_basis(
    a: &(impl LinearOperator + ?Sized),
    b: &DVector<f64>,
    shifts: &ShiftSet,
) -> Result<OrthonormalBasis> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { context: "rational Krylov vector", expected: n, found: b.len() });
    }
    if b.norm() == 0.0 {
        return Err(Error::DegenerateSubspace);
    }
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(shifts.len());
    let mut seen: Vec<C64> = Vec::with_capacity(shifts.len());
    for block in shifts.blocks() {
        let shift = block[0];
        let repeated = seen.iter().any(|&s| s == shift || s == shift.conj());
        seen.push(shift);
        let start = match columns.last() {
            Some(q) if !repeated => q,
            _ => b,
        };
        let w = a.shifted(shift)?.solve_real(start);
        let mut candidates = vec![w.map(|z| z.re)];
        if block.len() == 2 {
            candidates.push(w.map(|z| z.im));
        }
        for v in candidates {
            if let Some(q) = orthonormalize_against(&columns, v) {
                columns.push(q);
            }
        }
    }
    Ok(OrthonormalBasis { q: stack(&columns, n), shifts: shifts.clone(), requested: shifts.len() })
}

/// Extended Krylov basis for `span{A^{-1} b, b, A^{-2} b, A b, ...}` with `r` directions,
/// alternating inverse and forward steps. Each chain continues from its last accepted
/// orthonormal vector and stops once it produces a dependent direction.
pub fn extended_krylov_basis(
    a: &(impl LinearOperator + ?Sized),
    b: &DVector<f64>,
    r: usize,
) -> Result<OrthonormalBasis> {
    let n = a.dim();
    if r == 0 || !r.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("extended Krylov dimension must be even and positive, got {r}")));
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { context: "extended Krylov vector", expected: n, found: b.len() });
    }
    if b.norm() == 0.0 {
        return Err(Error::DegenerateSubspace);
    }
    let zero = C64::new(0.0, 0.0);
    // (0 I - A)^{-1} = -A^{-1}
    let inverse = a.shifted(zero).map_err(|_| Error::SingularOperator("A is singular".into()))?;
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut inv_seed: Option<DVector<f64>> = Some(b.clone());
    let mut fwd_seed: Option<DVector<f64>> = None;
    let mut fwd_started = false;
    for step in 0..r {
        if step % 2 == 0 {
            if let Some(seed) = inv_seed.take() {
                let v = -inverse.solve_real(&seed).map(|z| z.re);
                inv_seed = orthonormalize_against(&columns, v).inspect(|q| columns.push(q.clone()));
            }
        } else {
            let v = match (&fwd_seed, fwd_started) {
                (_, false) => Some(b.clone()),
                (Some(seed), true) => Some(a.apply(seed)),
                (None, true) => None,
            };
            fwd_started = true;
            fwd_seed = v
                .and_then(|v| orthonormalize_against(&columns, v))
                .inspect(|q| columns.push(q.clone()));
        }
    }
    // extended Krylov shifts are 0 and infinity; no finite shift list describes them
    Ok(OrthonormalBasis { q: stack(&columns, n), shifts: ShiftSet { shifts: Vec::new() }, requested: r })
}

/// `||v - Q Q^T v|| <= tol ||v||`.
pub fn subspace_contains(basis: &OrthonormalBasis, v: &DVector<f64>, tol: f64) -> bool {
    let norm = v.norm();
    if norm == 0.0 {
        return true;
    }
    membership_defect(&basis.q, v) <= tol
}

/// Relative distance `||v - Q Q^T v|| / ||v||` from the span of `q`.
pub fn membership_defect(q: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let coeffs = q.tr_mul(v);
    (v - q * coeffs).norm() / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_defect, projector};

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(d))
    }

    #[test]
    fn shift_set_validation() {
        assert!(ShiftSet::real(&[1.0, 2.0]).is_ok());
        assert!(ShiftSet::real(&[0.0]).is_err());
        assert!(ShiftSet::real(&[-1.0]).is_err());
        assert!(ShiftSet::new([C64::new(1.0, 2.0)]).is_err());
        let s = ShiftSet::new([C64::new(1.0, -2.0), C64::new(3.0, 0.0), C64::new(1.0, 2.0)]).unwrap();
        assert_eq!(s.as_slice(), &[C64::new(1.0, 2.0), C64::new(1.0, -2.0), C64::new(3.0, 0.0)]);
        assert_eq!(s.blocks().len(), 2);
        assert_eq!(s.conj(), s);
    }

    #[test]
    fn scalar_basis() {
        let a = diag(&[-1.0]);
        let basis = rational_krylov_basis(&a, &DVector::from_element(1, 1.0), &ShiftSet::real(&[1.0]).unwrap()).unwrap();
        assert_eq!(basis.dim(), 1);
        assert!((basis.q[(0, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_shift_direction() {
        let a = diag(&[-1.0, -2.0]);
        let b = DVector::from_element(2, 1.0);
        let basis = rational_krylov_basis(&a, &b, &ShiftSet::real(&[1.0]).unwrap()).unwrap();
        let expected = DVector::from_vec(vec![0.5, 1.0 / 3.0]).normalize();
        let q = basis.q.column(0).into_owned();
        assert!((q.dot(&expected).abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_shift_span_matches_explicit_solves() {
        let a = diag(&[-1.0, -2.0]);
        let b = DVector::from_element(2, 1.0);
        let basis = rational_krylov_basis(&a, &b, &ShiftSet::real(&[1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(basis.dim(), 2);
        assert!(orthonormality_defect(&basis.q) <= 2e-12);
        // independent route: explicit solves then Householder QR
        let v = DMatrix::from_row_slice(2, 2, &[0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25]);
        let q_ref = v.qr().q();
        assert!((projector(&basis.q) - projector(&q_ref)).norm() <= 1e-12);
    }

    #[test]
    fn repeated_shift_deflates() {
        let a = diag(&[-1.0, -2.0, -3.0]);
        let b = DVector::from_element(3, 1.0);
        let basis = rational_krylov_basis(&a, &b, &ShiftSet::real(&[2.0, 2.0]).unwrap()).unwrap();
        assert_eq!(basis.dim(), 1);
        assert!(!basis.is_full());
    }

    #[test]
    fn close_shifts_keep_full_span() {
        // explicit generators for these shifts are nearly parallel
        let a = diag(&[-1.0, -1.5, -2.0, -3.0, -5.0, -8.0]);
        let b = DVector::from_element(6, 1.0);
        let shifts = [1.0, 1.01, 1.02, 1.03];
        let basis = rational_krylov_basis(&a, &b, &ShiftSet::real(&shifts).unwrap()).unwrap();
        assert_eq!(basis.dim(), 4);
        assert!(orthonormality_defect(&basis.q) <= 4e-12);
        for s in shifts {
            let v = a.shifted(C64::new(s, 0.0)).unwrap().solve_real(&b).map(|z| z.re);
            assert!(membership_defect(&basis.q, &v) < 1e-12);
        }
    }

    #[test]
    fn zero_vector_is_degenerate() {
        let a = diag(&[-1.0, -2.0]);
        let r = rational_krylov_basis(&a, &DVector::zeros(2), &ShiftSet::real(&[1.0]).unwrap());
        assert!(matches!(r, Err(Error::DegenerateSubspace)));
    }

    #[test]
    fn collision_names_shift() {
        let a = diag(&[1.0, -2.0]);
        let r = rational_krylov_basis(&a, &DVector::from_element(2, 1.0), &ShiftSet::real(&[1.0]).unwrap());
        assert!(matches!(r, Err(Error::ShiftCollision { shift }) if shift == C64::new(1.0, 0.0)));
    }

    #[test]
    fn conjugate_pair_gives_two_real_columns() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -2.0, -1.0, 0.0, 0.0, 0.0, -3.0]);
        let b = DVector::from_element(3, 1.0);
        let s = ShiftSet::new([C64::new(1.0, 1.0), C64::new(1.0, -1.0)]).unwrap();
        let basis = rational_krylov_basis(&a, &b, &s).unwrap();
        assert_eq!(basis.dim(), 2);
        let w = a.shifted(C64::new(1.0, -1.0)).unwrap().solve_real(&b);
        assert!(subspace_contains(&basis, &w.map(|z| z.re), 1e-12));
        assert!(subspace_contains(&basis, &w.map(|z| z.im), 1e-12));
    }

    #[test]
    fn generator_lies_in_its_span() {
        let a = diag(&[-1.0, -2.0, -5.0]);
        let b = DVector::from_vec(vec![1.0, -1.0, 2.0]);
        let basis = rational_krylov_basis(&a, &b, &ShiftSet::real(&[3.0]).unwrap()).unwrap();
        let v = a.shifted(C64::new(3.0, 0.0)).unwrap().solve_real(&b).map(|z| z.re);
        assert!(subspace_contains(&basis, &v, 1e-12));
    }

    #[test]
    fn membership_of_coordinate_vectors() {
        let basis = OrthonormalBasis {
            q: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            shifts: ShiftSet::real(&[]).unwrap(),
            requested: 1,
        };
        assert!(subspace_contains(&basis, &DVector::from_vec(vec![1.0, 0.0]), 1e-12));
        assert!(!subspace_contains(&basis, &DVector::from_vec(vec![0.0, 1.0]), 1e-12));
        assert!(subspace_contains(&basis, &DVector::zeros(2), 0.0));
    }

    #[test]
    fn extended_examples() {
        let a = diag(&[-1.0, -2.0]);
        let b = DVector::from_element(2, 1.0);
        let basis = extended_krylov_basis(&a, &b, 2).unwrap();
        assert_eq!(basis.dim(), 2);
        assert!(subspace_contains(&basis, &DVector::from_vec(vec![-1.0, -0.5]), 1e-12));

        let basis = extended_krylov_basis(&diag(&[-1.0]), &DVector::from_element(1, 1.0), 2).unwrap();
        assert_eq!(basis.dim(), 1);
        assert_eq!(basis.requested, 2);

        let basis = extended_krylov_basis(&diag(&[-1.0, -2.0, -3.0]), &DVector::from_element(3, 1.0), 4).unwrap();
        assert_eq!(basis.dim(), 3);
    }

    #[test]
    fn extended_rejects_odd_and_singular() {
        let b = DVector::from_element(2, 1.0);
        assert!(matches!(extended_krylov_basis(&diag(&[-1.0, -2.0]), &b, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(extended_krylov_basis(&diag(&[0.0, -2.0]), &b, 2), Err(Error::SingularOperator(_))));
    }
}
