//! Shift selection: the pseudo-H2 fixed point, Penzl's heuristic and mirrored spectra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::krylov::{rational_krylov_basis, ShiftSet};
use crate::linalg::{logspace, real_eigenvalues, sort_lexicographic, C64};
use crate::operator::LinearOperator;

pub const DEFAULT_H2_TOL: f64 = 1e-8;
pub const DEFAULT_H2_MAX_SWEEPS: usize = 100;

/// Arnoldi steps used for the default initial shifts.
const INIT_ARNOLDI_STEPS: usize = 10;

#[derive(Debug, Clone)]
pub struct PseudoH2Result {
    pub shifts: ShiftSet,
    /// Sweeps performed.
    pub iterations: usize,
    /// Matched shift change per sweep, each entry scaled by `max(1, |sigma_old|)`.
    pub history: Vec<f64>,
    pub converged: bool,
    /// True when some sweep had to push a mirrored Ritz value back into the right half-plane.
    pub stabilized: bool,
}

/// `Q^T A Q` using one operator application per column.
pub fn projected_operator(a: &(impl LinearOperator + ?Sized), q: &DMatrix<f64>) -> DMatrix<f64> {
    q.tr_mul(&a.apply_block(q))
}

/// Largest matched distance between two shift lists, each pair divided by
/// `max(1, |old|)`. Lists are matched after sorting on `(Re, Im)`.
fn matched_change(old: &[C64], new: &[C64]) -> f64 {
    if old.len() != new.len() {
        return f64::INFINITY;
    }
    let (mut x, mut y) = (old.to_vec(), new.to_vec());
    sort_lexicographic(&mut x);
    sort_lexicographic(&mut y);
    x.iter().zip(&y).map(|(o, n)| (o - n).norm() / o.norm().max(1.0)).fold(0.0, f64::max)
}

/// Iterates `sigma <- -lambda(Q^T A Q)` with `Q` the rational Krylov basis of the
/// current shifts, until the matched change drops to `tol` or `max_sweeps` runs out.
///
/// A mirrored value with `Re <= 0` gets `Re := |Re| + tol`. The result only counts
/// as converged when the final sweep needed no such correction and the basis kept
/// full dimension.
pub fn pseudo_h2_shifts(
    a: &(impl LinearOperator + ?Sized),
    b: &DVector<f64>,
    r: usize,
    sigma0: &ShiftSet,
    tol: f64,
    max_sweeps: usize,
) -> Result<PseudoH2Result> {
    let n = a.dim();
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("pseudo-H2 order must satisfy 1 <= r <= n = {n}, got {r}")));
    }
    if sigma0.len() != r {
        return Err(Error::InvalidArgument(format!("initial shift set has {} shifts, expected {r}", sigma0.len())));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut sigma = sigma0.clone();
    let mut history = Vec::new();
    let mut stabilized = false;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_sweeps {
        iterations += 1;
        let q = rational_krylov_basis(a, b, &sigma)?;
        if !q.is_full() {
            // the subspace lost dimension; there is no r-point fixed point to chase
            log::warn!("pseudo-H2 basis deflated to {} of {r} directions", q.dim());
            break;
        }
        let mut candidates = real_eigenvalues(&projected_operator(a, &q.q))?;
        let mut corrected = false;
        for z in candidates.iter_mut() {
            *z = -*z;
            if z.re <= 0.0 {
                z.re = z.re.abs() + tol;
                corrected = true;
            }
        }
        stabilized |= corrected;
        let next = ShiftSet::new(candidates)?;
        let change = matched_change(sigma.as_slice(), next.as_slice());
        history.push(change);
        sigma = next;
        if change <= tol && !corrected {
            converged = true;
            break;
        }
    }
    Ok(PseudoH2Result { shifts: sigma, iterations, history, converged, stabilized })
}

/// Log-spaced real shifts between the smallest and largest Ritz magnitudes of a
/// short Arnoldi run on `(A, b)`.
pub fn default_initial_shifts(a: &(impl LinearOperator + ?Sized), b: &DVector<f64>, r: usize) -> Result<ShiftSet> {
    if r == 0 {
        return Err(Error::InvalidArgument("need at least one shift".into()));
    }
    let ritz = arnoldi_ritz(|v| a.apply(v), b, INIT_ARNOLDI_STEPS.min(a.dim()))?;
    let mags: Vec<f64> = ritz.iter().map(|z| z.norm()).filter(|m| *m > 0.0).collect();
    if mags.is_empty() {
        return Err(Error::DegenerateSubspace);
    }
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(0.0, f64::max);
    // a single Ritz magnitude gives no spread to interpolate
    let (lo, hi) = if r > 1 && hi <= lo * (1.0 + 1e-12) { (lo / 2.0, hi * 2.0) } else { (lo, hi) };
    ShiftSet::real(&logspace(lo, hi, r))
}

/// Ritz values of a `k`-step Arnoldi process for the map `apply` started at `b`.
/// Stops early when the Krylov space is exhausted.
pub fn arnoldi_ritz(apply: impl Fn(&DVector<f64>) -> DVector<f64>, b: &DVector<f64>, k: usize) -> Result<Vec<C64>> {
    let h = arnoldi_hessenberg(apply, b, k)?;
    real_eigenvalues(&h)
}

fn arnoldi_hessenberg(apply: impl Fn(&DVector<f64>) -> DVector<f64>, b: &DVector<f64>, k: usize) -> Result<DMatrix<f64>> {
    if b.norm() == 0.0 {
        return Err(Error::DegenerateSubspace);
    }
    let mut v: Vec<DVector<f64>> = vec![b / b.norm()];
    let mut h = DMatrix::zeros(k + 1, k);
    let mut steps = 0;
    for j in 0..k {
        let mut w = apply(&v[j]);
        let initial = w.norm();
        // modified Gram-Schmidt, two passes, coefficients accumulated
        for _ in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c = vi.dot(&w);
                h[(i, j)] += c;
                w.axpy(-c, vi, 1.0);
            }
        }
        steps = j + 1;
        let beta = w.norm();
        if j + 1 == k || beta <= crate::krylov::DEFLATION_TOL * initial.max(f64::MIN_POSITIVE) {
            break;
        }
        h[(j + 1, j)] = beta;
        v.push(w / beta);
    }
    Ok(h.view((0, 0), (steps, steps)).into_owned())
}

/// Shifts from Penzl's heuristic together with the candidate pool they came from.
#[derive(Debug, Clone)]
pub struct PenzlShifts {
    pub shifts: ShiftSet,
    /// Mirrored Ritz values the greedy choice was made from.
    pub candidates: Vec<C64>,
    /// Some Ritz value had a nonnegative real part and was reflected.
    pub reflected: bool,
}

/// `max_x |prod_s (x - s)/(x + s)|` over the pool.
fn rational_max(pool: &[C64], chosen: &[C64]) -> (usize, f64) {
    pool.iter()
        .map(|&x| chosen.iter().fold(1.0, |acc, &s| acc * ((x - s) / (x + s)).norm()))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

fn with_conjugate(s: C64) -> Vec<C64> {
    if s.im == 0.0 {
        vec![s]
    } else {
        vec![s, s.conj()]
    }
}

/// Penzl's heuristic: `k_plus` Ritz values of `A` and `k_minus` of `A^{-1}`
/// (reciprocated), mirrored into the right half-plane, then a greedy minimax
/// selection over that finite pool. A complex pick brings its conjugate, so the
/// result may hold `r + 1` shifts.
pub fn penzl_shifts(
    a: &(impl LinearOperator + ?Sized),
    b: &DVector<f64>,
    k_plus: usize,
    k_minus: usize,
    r: usize,
) -> Result<PenzlShifts> {
    let n = a.dim();
    if r == 0 || k_plus + k_minus < r {
        return Err(Error::InvalidArgument(format!(
            "Penzl shifts need 1 <= r <= k_plus + k_minus, got r = {r}, k_plus = {k_plus}, k_minus = {k_minus}"
        )));
    }
    let mut ritz = Vec::new();
    if k_plus > 0 {
        ritz.extend(arnoldi_ritz(|v| a.apply(v), b, k_plus.min(n))?);
    }
    if k_minus > 0 {
        // (0 I - A)^{-1} = -A^{-1}
        let inv = a.shifted(C64::new(0.0, 0.0)).map_err(|_| Error::SingularOperator("A is singular".into()))?;
        let theta = arnoldi_ritz(|v| -inv.solve_real(v).map(|z| z.re), b, k_minus.min(n))?;
        ritz.extend(theta.into_iter().filter(|t| t.norm() > 0.0).map(|t| t.inv()));
    }
    let mut reflected = false;
    let mut pool: Vec<C64> = Vec::new();
    for z in ritz {
        let mut z = z;
        if z.re >= 0.0 {
            reflected = true;
            z.re = -z.re.abs();
        }
        let x = -z;
        if x.re > 0.0 && !pool.iter().any(|p| (p - x).norm() <= 1e-14 * x.norm()) {
            pool.push(x);
        }
    }
    if reflected {
        log::warn!("Penzl heuristic: reflected Ritz values with nonnegative real part");
    }
    if pool.is_empty() {
        return Err(Error::DegenerateSubspace);
    }
    sort_lexicographic(&mut pool);

    // first pick minimizes the worst value of its own rational function
    let first = (0..pool.len())
        .map(|i| (i, rational_max(&pool, &with_conjugate(pool[i])).1))
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
        .0;
    let mut chosen = with_conjugate(pool[first]);
    while chosen.len() < r {
        let (i, value) = rational_max(&pool, &chosen);
        if value <= 0.0 {
            // every candidate is already a root; nothing left to improve
            break;
        }
        chosen.extend(with_conjugate(pool[i]));
    }
    Ok(PenzlShifts { shifts: ShiftSet::new(chosen)?, candidates: pool, reflected })
}

/// `{-lambda_i(A)}` for a dense stable `A`.
pub fn mirrored_spectrum_shifts(a: &DMatrix<f64>) -> Result<ShiftSet> {
    let eig = real_eigenvalues(a)?;
    ShiftSet::new(eig.into_iter().map(|z| -z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(d))
    }

    #[test]
    fn scalar_fixed_point_in_one_sweep() {
        let a = diag(&[-2.0]);
        let b = DVector::from_element(1, 1.0);
        let one = pseudo_h2_shifts(&a, &b, 1, &ShiftSet::real(&[7.0]).unwrap(), 1e-12, 1).unwrap();
        assert_eq!(one.shifts.as_slice(), &[C64::new(2.0, 0.0)]);
        let res = pseudo_h2_shifts(&a, &b, 1, &ShiftSet::real(&[7.0]).unwrap(), 1e-12, 10).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 2);
    }

    #[test]
    fn full_order_recovers_mirrored_spectrum() {
        let a = DMatrix::from_row_slice(3, 3, &[-3.0, 1.0, 0.0, 1.0, -2.0, 0.5, 0.0, 0.5, -1.0]);
        let b = DVector::from_element(3, 1.0);
        let sigma0 = default_initial_shifts(&a, &b, 3).unwrap();
        let res = pseudo_h2_shifts(&a, &b, 3, &sigma0, 1e-10, 50).unwrap();
        assert!(res.converged);
        let exact = mirrored_spectrum_shifts(&a).unwrap();
        assert!(crate::linalg::sorted_match_distance(res.shifts.as_slice(), exact.as_slice()) < 1e-8);
    }

    #[test]
    fn bad_order_is_rejected() {
        let a = diag(&[-1.0, -2.0]);
        let b = DVector::from_element(2, 1.0);
        let s = ShiftSet::real(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(pseudo_h2_shifts(&a, &b, 3, &s, 1e-8, 10), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn arnoldi_is_exact_at_full_dimension() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]);
        let mut ritz = arnoldi_ritz(|v| &a * v, &DVector::from_vec(vec![1.0, 0.0]), 2).unwrap();
        sort_lexicographic(&mut ritz);
        assert!((ritz[0] - C64::new(-1.0, -2.0)).norm() < 1e-13);
        assert!((ritz[1] - C64::new(-1.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn arnoldi_stops_on_invariant_subspace() {
        let a = diag(&[-1.0, -2.0, -3.0]);
        let ritz = arnoldi_ritz(|v| &a * v, &DVector::from_vec(vec![1.0, 0.0, 0.0]), 3).unwrap();
        assert_eq!(ritz.len(), 1);
        assert!((ritz[0] + 1.0).norm() < 1e-15);
    }

    #[test]
    fn penzl_full_arnoldi_picks_mirrored_eigenvalues() {
        let a = diag(&[-1.0, -2.0]);
        let p = penzl_shifts(&a, &DVector::from_element(2, 1.0), 2, 0, 2).unwrap();
        let got: Vec<f64> = p.shifts.iter().map(|s| s.re).collect();
        assert!((got[0] - 1.0).abs() < 1e-12 && (got[1] - 2.0).abs() < 1e-12, "{got:?}");
        assert!(!p.reflected);
    }

    #[test]
    fn penzl_complex_pick_brings_conjugate() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 5.0, -5.0, -1.0]);
        let p = penzl_shifts(&a, &DVector::from_vec(vec![1.0, 0.0]), 2, 0, 1).unwrap();
        assert_eq!(p.shifts.len(), 2);
        assert!(!p.shifts.is_real());
    }

    #[test]
    fn mirrored_spectrum_examples() {
        let s = mirrored_spectrum_shifts(&diag(&[-1.0, -2.0])).unwrap();
        let mut v = s.as_slice().to_vec();
        sort_lexicographic(&mut v);
        assert_eq!(v, vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
        assert_eq!(mirrored_spectrum_shifts(&diag(&[-1.0])).unwrap().as_slice(), &[C64::new(1.0, 0.0)]);
        let rot = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]);
        let s = mirrored_spectrum_shifts(&rot).unwrap();
        assert!((s.as_slice()[0] - C64::new(1.0, 2.0)).norm() < 1e-13);
        assert_eq!(s.as_slice()[1], s.as_slice()[0].conj());
        assert!(mirrored_spectrum_shifts(&diag(&[1.0, -1.0])).is_err());
    }
}
