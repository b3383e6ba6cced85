//! Browser bindings. Every export takes plain numbers and returns a JSON string
//! so the page needs no generated TypeScript types.

use adirk::adi::adi_lyapunov;
use adirk::galerkin::{rkpm_solve_full, rkpm_with_bases};
use adirk::shifts::{default_initial_shifts, penzl_shifts, pseudo_h2_shifts};
use adirk::verify::{check_mirror_condition, dense_sylvester_oracle, lowrank_gap, lyapunov_residual, relative_error, svd_error_floor};
use adirk::{extended_krylov_basis, synth_stable_system, LyapunovProblem, ShiftSet, SynthKind};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest dimension the page may request; keeps the dense reference instant.
pub const MAX_N: usize = 60;

#[derive(Debug, Serialize)]
pub struct Shift {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Serialize)]
pub struct Trajectory {
    /// Shifts after every sweep, starting with the initial guess.
    pub sweeps: Vec<Vec<Shift>>,
    pub history: Vec<f64>,
    pub converged: bool,
    pub spectrum: Vec<Shift>,
}

#[derive(Debug, Serialize)]
pub struct ErrorCurves {
    pub ranks: Vec<usize>,
    pub floor: Vec<f64>,
    /// `None` (JSON null) where a method has no value, e.g. odd ranks for the extended space.
    pub extended: Vec<Option<f64>>,
    pub pseudo_h2: Vec<Option<f64>>,
    pub penzl_adi: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
pub struct OrthogonalityProbe {
    pub perturbation: f64,
    pub orth_rel: f64,
    pub mirror_defect: f64,
    pub equivalence_gap: f64,
}

fn shifts_of(s: &ShiftSet) -> Vec<Shift> {
    s.iter().map(|z| Shift { re: z.re, im: z.im }).collect()
}

fn problem(kind: &str, n: usize, seed: u64) -> Result<LyapunovProblem, String> {
    if n == 0 || n > MAX_N {
        return Err(format!("n must be between 1 and {MAX_N}"));
    }
    let kind: SynthKind = kind.parse().map_err(|e: adirk::Error| e.to_string())?;
    Ok(synth_stable_system(n, kind, seed).map_err(|e| e.to_string())?.controllability())
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Pseudo-H2 iterates one sweep at a time, so the page can animate them.
pub fn trajectory(kind: &str, n: usize, seed: u64, r: usize, max_sweeps: usize) -> Result<String, String> {
    let l = problem(kind, n, seed)?;
    let err = |e: adirk::Error| e.to_string();
    let mut current = default_initial_shifts(&l.a, &l.b_vec, r).map_err(err)?;
    let mut sweeps = vec![shifts_of(&current)];
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_sweeps {
        let step = pseudo_h2_shifts(&l.a, &l.b_vec, r, &current, 1e-10, 1).map_err(err)?;
        history.extend(step.history.iter().copied());
        current = step.shifts;
        sweeps.push(shifts_of(&current));
        if step.converged {
            converged = true;
            break;
        }
    }
    let spectrum = adirk::linalg::real_eigenvalues(&l.a).map_err(err)?;
    let spectrum = spectrum.iter().map(|z| Shift { re: z.re, im: z.im }).collect();
    json(&Trajectory { sweeps, history, converged, spectrum })
}

/// Relative 2-norm errors of the three methods for ranks `1..=r_max`.
pub fn error_curves(kind: &str, n: usize, seed: u64, r_max: usize) -> Result<String, String> {
    let l = problem(kind, n, seed)?;
    let p = l.to_sylvester();
    let x = dense_sylvester_oracle(&p, MAX_N * MAX_N).map_err(|e| e.to_string())?;
    let r_max = r_max.clamp(1, n);
    let mut out = ErrorCurves {
        ranks: (1..=r_max).collect(),
        floor: Vec::new(),
        extended: Vec::new(),
        pseudo_h2: Vec::new(),
        penzl_adi: Vec::new(),
    };
    for r in 1..=r_max {
        out.floor.push(svd_error_floor(&x, r));
        let ext = (r % 2 == 0)
            .then(|| extended_krylov_basis(&l.a, &l.b_vec, r).ok())
            .flatten()
            .and_then(|q| rkpm_with_bases(&p, q.clone(), q).ok())
            .map(|s| relative_error(&x, &s.x));
        out.extended.push(ext);
        let h2 = default_initial_shifts(&l.a, &l.b_vec, r)
            .and_then(|s0| pseudo_h2_shifts(&l.a, &l.b_vec, r, &s0, 1e-10, 200))
            .and_then(|h| rkpm_solve_full(&p, &h.shifts))
            .ok()
            .map(|s| relative_error(&x, &s.x));
        out.pseudo_h2.push(h2);
        let penzl = penzl_shifts(&l.a, &l.b_vec, n.min(20), n.min(10), r)
            .and_then(|s| adi_lyapunov(&l, &s.shifts))
            .ok()
            .map(|s| relative_error(&x, &s));
        out.penzl_adi.push(penzl);
    }
    json(&out)
}

/// Orthogonality and mirror defects at pseudo-H2 shifts scaled by `1 + perturbation`.
pub fn orthogonality(kind: &str, n: usize, seed: u64, r: usize, perturbation: f64) -> Result<String, String> {
    let l = problem(kind, n, seed)?;
    let err = |e: adirk::Error| e.to_string();
    let s0 = default_initial_shifts(&l.a, &l.b_vec, r).map_err(err)?;
    let h2 = pseudo_h2_shifts(&l.a, &l.b_vec, r, &s0, 1e-12, 500).map_err(err)?;
    let shifts = ShiftSet::new(h2.shifts.iter().map(|s| s * (1.0 + perturbation))).map_err(err)?;
    let sol = rkpm_solve_full(&l.to_sylvester(), &shifts).map_err(err)?;
    let adi = adi_lyapunov(&l, &shifts).map_err(err)?;
    let res = lyapunov_residual(&l, &sol.x, &sol.q).map_err(err)?;
    json(&OrthogonalityProbe {
        perturbation,
        orth_rel: res.subspace_orth_rel,
        mirror_defect: check_mirror_condition(&l.a, &sol.q, &shifts).map_err(err)?,
        equivalence_gap: lowrank_gap(&adi, &sol.x),
    })
}

#[wasm_bindgen(js_name = shiftTrajectory)]
pub fn shift_trajectory_js(kind: &str, n: usize, seed: u32, r: usize, max_sweeps: usize) -> Result<String, JsValue> {
    trajectory(kind, n, seed as u64, r, max_sweeps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = errorCurves)]
pub fn error_curves_js(kind: &str, n: usize, seed: u32, r_max: usize) -> Result<String, JsValue> {
    error_curves(kind, n, seed as u64, r_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = orthogonalityProbe)]
pub fn orthogonality_js(kind: &str, n: usize, seed: u32, r: usize, perturbation: f64) -> Result<String, JsValue> {
    orthogonality(kind, n, seed as u64, r, perturbation).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn trajectory_converges_on_small_system() {
        let v: Value = serde_json::from_str(&trajectory("random-stable", 8, 1, 3, 100).unwrap()).unwrap();
        assert_eq!(v["converged"], true);
        let sweeps = v["sweeps"].as_array().unwrap();
        assert!(sweeps.len() >= 2);
        assert!(sweeps.iter().all(|s| s.as_array().unwrap().len() == 3));
        assert_eq!(v["spectrum"].as_array().unwrap().len(), 8);
    }

    #[test]
    fn curves_respect_the_floor() {
        let v: Value = serde_json::from_str(&error_curves("tridiagonal", 20, 0, 8).unwrap()).unwrap();
        let floor = v["floor"].as_array().unwrap();
        assert_eq!(floor.len(), 8);
        assert!(v["extended"][0].is_null());
        for key in ["pseudo_h2", "extended"] {
            for (e, f) in v[key].as_array().unwrap().iter().zip(floor) {
                if let Some(e) = e.as_f64() {
                    assert!(e >= f.as_f64().unwrap() - 1e-12);
                }
            }
        }
    }

    #[test]
    fn perturbation_breaks_orthogonality() {
        let at = |eps| -> Value { serde_json::from_str(&orthogonality("random-stable", 6, 3, 2, eps).unwrap()).unwrap() };
        let exact = at(0.0);
        let bumped = at(1e-2);
        assert!(exact["orth_rel"].as_f64().unwrap() <= 1e-9);
        assert!(bumped["orth_rel"].as_f64().unwrap() > 1e-6);
        assert!(bumped["equivalence_gap"].as_f64().unwrap() > exact["equivalence_gap"].as_f64().unwrap());
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(trajectory("cubic", 4, 0, 1, 5).is_err());
        assert!(error_curves("diagonal", MAX_N + 1, 0, 2).is_err());
        assert!(orthogonality("diagonal", 4, 0, 9, 0.0).is_err());
    }
}
