use std::fmt::Write as _;
use std::time::Instant;

use adirk::adi::adi_lyapunov;
use adirk::galerkin::{rkpm_solve_full, rkpm_with_bases};
use adirk::shifts::{default_initial_shifts, penzl_shifts, pseudo_h2_shifts, PseudoH2Result};
use adirk::verify::{lowrank_gap, lyapunov_residual, reference_solution, relative_error, svd_error_floor, sylvester_residual, ReferenceKind};
use adirk::{extended_krylov_basis, validate_problem, LowRankApproximation, LtiSystem, LyapunovProblem, ShiftSet};
use nalgebra::DMatrix;

use crate::config::{BenchConfig, Method};
use crate::BenchError;

/// One rank of the sweep. Cells of methods that were not requested are `None`;
/// failures are `Some(NaN)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub r: usize,
    /// `pi_{r+1} / pi_1`; NaN without a dense reference.
    pub floor: f64,
    /// Relative 2-norm error, or the relative residual in residual mode.
    pub err: [Option<f64>; 3],
    pub time: [Option<f64>; 3],
    pub equiv_gap: Option<f64>,
    pub orth_rel: Option<f64>,
    pub h2_converged: Option<bool>,
    /// Rank actually produced by each method (Penzl may return `r + 1` shifts).
    pub rank: [Option<usize>; 3],
    /// `pi_{k+1} / pi_1` at each method's actual rank `k`.
    pub floor_at_rank: [Option<f64>; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    Reference(ReferenceKind),
    /// No dense solution; error columns hold `||R||_2 / ||b||^2`.
    Residual,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub problem: String,
    pub n: usize,
    pub mode: ErrorMode,
    pub rows: Vec<BenchRow>,
}

struct MethodOutcome {
    x: LowRankApproximation,
    basis: DMatrix<f64>,
    h2: Option<(PseudoH2Result, f64, f64)>,
}

/// Lyapunov problem of the system. Rejects an unstable `A` whenever a dense
/// eigenvalue check is affordable.
pub fn controllability_checked(sys: &LtiSystem) -> Result<LyapunovProblem, BenchError> {
    let l = sys.controllability();
    let report = validate_problem(&l.to_sylvester())?;
    if !report.stable() {
        return Err(BenchError::Config("A is not asymptotically stable".into()));
    }
    Ok(l)
}

pub fn initial_shifts(cfg: &BenchConfig, l: &LyapunovProblem, r: usize) -> adirk::Result<ShiftSet> {
    match &cfg.pseudo_h2.sigma0 {
        Some(s0) => ShiftSet::real(&s0[..r]),
        None => default_initial_shifts(&l.a, &l.b_vec, r),
    }
}

pub fn pseudo_h2_for(cfg: &BenchConfig, l: &LyapunovProblem, r: usize) -> adirk::Result<PseudoH2Result> {
    let s0 = initial_shifts(cfg, l, r)?;
    pseudo_h2_shifts(&l.a, &l.b_vec, r, &s0, cfg.pseudo_h2.tol, cfg.pseudo_h2.max_sweeps)
}

pub fn penzl_for(cfg: &BenchConfig, l: &LyapunovProblem, r: usize) -> adirk::Result<ShiftSet> {
    let n = l.n();
    let kp = cfg.penzl.k_plus.min(n);
    let km = cfg.penzl.k_minus.min(n);
    Ok(penzl_shifts(&l.a, &l.b_vec, kp, km, r)?.shifts)
}

fn run_method(cfg: &BenchConfig, l: &LyapunovProblem, method: Method, r: usize) -> adirk::Result<MethodOutcome> {
    let p = l.to_sylvester();
    match method {
        Method::Extended => {
            let q = extended_krylov_basis(&l.a, &l.b_vec, r)?;
            let basis = q.q.clone();
            let sol = rkpm_with_bases(&p, q.clone(), q)?;
            Ok(MethodOutcome { x: sol.x, basis, h2: None })
        }
        Method::PseudoH2 => {
            let h2 = pseudo_h2_for(cfg, l, r)?;
            if !h2.converged {
                log::warn!("pseudo-H2 did not converge at r = {r} after {} sweeps", h2.iterations);
            }
            let sol = rkpm_solve_full(&p, &h2.shifts)?;
            let adi = adi_lyapunov(l, &h2.shifts)?;
            let gap = lowrank_gap(&adi, &sol.x);
            let orth = lyapunov_residual(l, &sol.x, &sol.q)?.subspace_orth_rel;
            Ok(MethodOutcome { x: sol.x, basis: sol.q.q, h2: Some((h2, gap, orth)) })
        }
        Method::PenzlAdi => {
            let shifts = penzl_for(cfg, l, r)?;
            let x = adi_lyapunov(l, &shifts)?;
            let basis = x.l.clone().qr().q();
            Ok(MethodOutcome { x, basis, h2: None })
        }
    }
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    let sys = cfg.load_system()?;
    let l = controllability_checked(&sys)?;
    let p = l.to_sylvester();
    let (reference, mode) = match reference_solution(&p, cfg.oracle_cap) {
        Ok((x, kind)) => (Some(x), ErrorMode::Reference(kind)),
        Err(adirk::Error::OracleTooLarge { .. }) => {
            log::warn!("no dense reference for n = {}; reporting residuals", l.n());
            (None, ErrorMode::Residual)
        }
        Err(e) => return Err(e.into()),
    };
    let floor = |k: usize| reference.as_ref().map_or(f64::NAN, |x| svd_error_floor(x, k));

    let mut rows = Vec::with_capacity(cfg.ranks.len());
    for &r in &cfg.ranks {
        let mut row = BenchRow {
            r,
            floor: floor(r),
            err: [None; 3],
            time: [None; 3],
            equiv_gap: None,
            orth_rel: None,
            h2_converged: None,
            rank: [None; 3],
            floor_at_rank: [None; 3],
        };
        let mut methods = cfg.methods.clone();
        methods.sort();
        methods.dedup();
        for method in methods {
            let k = method.slot();
            let start = Instant::now();
            let outcome = run_method(cfg, &l, method, r);
            row.time[k] = Some(start.elapsed().as_secs_f64());
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) => {
                    log::error!("{method} failed at r = {r}: {e}");
                    row.err[k] = Some(f64::NAN);
                    if method == Method::PseudoH2 {
                        row.equiv_gap = Some(f64::NAN);
                        row.orth_rel = Some(f64::NAN);
                    }
                    continue;
                }
            };
            let rank = outcome.x.rank_bound();
            row.rank[k] = Some(rank);
            row.floor_at_rank[k] = Some(floor(rank));
            row.err[k] = Some(match &reference {
                Some(x) => relative_error(x, &outcome.x),
                None => match sylvester_residual(&p, &outcome.x, &outcome.basis) {
                    Ok(rep) => rep.residual_rel,
                    Err(e) => {
                        log::error!("{method} residual failed at r = {r}: {e}");
                        f64::NAN
                    }
                },
            });
            if let Some((h2, gap, orth)) = outcome.h2 {
                row.h2_converged = Some(h2.converged);
                row.equiv_gap = Some(gap);
                row.orth_rel = Some(orth);
            }
        }
        rows.push(row);
    }
    Ok(BenchReport { problem: cfg.problem.to_string(), n: l.n(), mode, rows })
}

/// 17 significant digits, `NaN` for failures, empty for cells not computed.
pub fn fmt_float(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) if v.is_nan() => "NaN".into(),
        Some(v) => format!("{v:.16e}"),
    }
}

pub const CSV_HEADER: &str = "r,floor,err_method1,err_method2,err_method3,equiv_gap,orth_rel,\
time_method1,time_method2,time_method3,h2_converged,rank_method1,rank_method2,rank_method3";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# problem {} n {}", self.problem, self.n);
        match self.mode {
            ErrorMode::Reference(ReferenceKind::Kronecker) => s.push_str("# reference kronecker\n"),
            ErrorMode::Reference(ReferenceKind::BartelsStewart) => s.push_str("# reference bartels-stewart\n"),
            ErrorMode::Residual => {
                s.push_str("# no dense reference: err_method columns hold ||R||_2/||b||^2 and floor is NaN\n")
            }
        }
        s.push_str(CSV_HEADER);
        s.push('\n');
        for row in &self.rows {
            let mut cells = vec![row.r.to_string(), fmt_float(Some(row.floor))];
            cells.extend(row.err.iter().map(|e| fmt_float(*e)));
            cells.push(fmt_float(row.equiv_gap));
            cells.push(fmt_float(row.orth_rel));
            cells.extend(row.time.iter().map(|t| fmt_float(*t)));
            cells.push(row.h2_converged.map(|c| c.to_string()).unwrap_or_default());
            cells.extend(row.rank.iter().map(|k| k.map(|k| k.to_string()).unwrap_or_default()));
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Rows where some method's error falls below the floor at its rank by more than `slack`.
    pub fn floor_violations(&self, slack: f64) -> Vec<(usize, Method, f64, f64)> {
        let mut out = Vec::new();
        if self.mode == ErrorMode::Residual {
            return out;
        }
        for row in &self.rows {
            for m in Method::ALL {
                let k = m.slot();
                if let (Some(e), Some(f)) = (row.err[k], row.floor_at_rank[k]) {
                    if !e.is_nan() && e < f - slack {
                        out.push((row.r, m, e, f));
                    }
                }
            }
        }
        out
    }
}

/// Shift sets per rank and method, as CSV `method,r,index,re,im`.
/// The extended sequence is written as alternating `0` and `inf`.
pub fn emit_shifts(cfg: &BenchConfig) -> Result<String, BenchError> {
    cfg.validate()?;
    let sys = cfg.load_system()?;
    let l = controllability_checked(&sys)?;
    let mut s = String::from("method,r,index,re,im\n");
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    for method in methods {
        for &r in &cfg.ranks {
            let shifts: Vec<(String, String)> = match method {
                Method::Extended => (0..r).map(|k| (if k % 2 == 0 { "0" } else { "inf" }.to_string(), "0".into())).collect(),
                Method::PseudoH2 => {
                    let h2 = pseudo_h2_for(cfg, &l, r)?;
                    let _ = writeln!(s, "# pseudo-h2 r {r} converged {} sweeps {}", h2.converged, h2.iterations);
                    h2.shifts.iter().map(|z| (fmt_float(Some(z.re)), fmt_float(Some(z.im)))).collect()
                }
                Method::PenzlAdi => penzl_for(cfg, &l, r)?
                    .iter()
                    .map(|z| (fmt_float(Some(z.re)), fmt_float(Some(z.im))))
                    .collect(),
            };
            for (i, (re, im)) in shifts.into_iter().enumerate() {
                let _ = writeln!(s, "{method},{r},{i},{re},{im}");
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemSource;

    fn cfg(problem: &str, ranks: Vec<usize>) -> BenchConfig {
        BenchConfig::new(problem.parse::<ProblemSource>().unwrap(), ranks)
    }

    #[test]
    fn diagonal_two_is_exact_at_full_rank() {
        let report = run_benchmark(&cfg("synth:diagonal:2", vec![1, 2])).unwrap();
        let x: DMatrix<f64> = DMatrix::from_row_slice(2, 2, &[0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25]);
        let sv = x.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        assert!((report.rows[0].floor - lo / hi).abs() < 1e-14);
        assert_eq!(report.rows[1].floor, 0.0);
        assert!(report.rows[1].err[1].unwrap() <= 1e-9);
        // r = 1 has no extended basis (odd rank)
        assert!(report.rows[0].err[0].unwrap().is_nan());
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_float(Some(0.1)), "1.0000000000000001e-1");
        assert_eq!(fmt_float(Some(f64::NAN)), "NaN");
        assert_eq!(fmt_float(None), "");
    }

    #[test]
    fn unstable_system_is_rejected() {
        let sys = LtiSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]),
            nalgebra::DVector::from_element(2, 1.0),
            nalgebra::DVector::from_element(2, 1.0),
        )
        .unwrap();
        assert!(matches!(controllability_checked(&sys), Err(BenchError::Config(_))));
    }

    #[test]
    fn bartels_stewart_beyond_cap() {
        let mut c = cfg("synth:tridiagonal:30", vec![2, 4]);
        c.oracle_cap = 16;
        let report = run_benchmark(&c).unwrap();
        assert_eq!(report.mode, ErrorMode::Reference(ReferenceKind::BartelsStewart));
        assert!(report.floor_violations(1e-12).is_empty());
        assert!(report.to_csv().contains("# reference bartels-stewart\n"));
    }

    #[test]
    fn residual_mode_header_note() {
        let mut report = run_benchmark(&cfg("synth:diagonal:4", vec![2])).unwrap();
        report.mode = ErrorMode::Residual;
        let csv = report.to_csv();
        assert!(csv.lines().nth(1).unwrap().starts_with("# no dense reference"));
        assert!(report.floor_violations(0.0).is_empty());
    }

    #[test]
    fn shift_listing_has_every_rank() {
        let out = emit_shifts(&cfg("synth:random-stable:8", vec![2, 4])).unwrap();
        assert!(out.starts_with("method,r,index,re,im\n"));
        assert_eq!(out.lines().filter(|l| l.starts_with("extended,4,")).count(), 4);
        assert_eq!(out.lines().filter(|l| l.starts_with("pseudo-h2,2,")).count(), 2);
        assert!(out.lines().any(|l| l.starts_with("penzl-adi,4,")));
    }
}
