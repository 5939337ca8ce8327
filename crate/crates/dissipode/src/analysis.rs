// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Headline quantities: normalized state errors, post-selection success
//! probability, padding optimization, query-cost reports, and sweep
//! experiments.
//!
//! The query counts are a deterministic cost model: a linear-system solve
//! costs κ·ln(1/ε′) queries (unit constant), multiplied by the number of
//! amplitude-amplification rounds for final-state preparation. The model
//! preserves the ratios the sweeps assert; it does not simulate a solver.

use std::sync::Arc;

use serde::Serialize;

use crate::block_system::{assemble, SolutionBundle};
use crate::error::{Error, Result};
use crate::linalg::{creal, sigma_min, spectral_norm, CVec};
use crate::ode_model::DissipativeOdeProblem;
use crate::reference_oracle;
use crate::schemes::{
    select_step, step_operators, SchemeKind, StepSelection, Task,
};

/// Grid size used to estimate max_t ‖u(t)‖ from the oracle.
pub const DECAY_GRID_POINTS: usize = 64;

/// ℓ₂ distance between the normalized concatenated history vectors of two
/// bundles (first M+1 blocks; padding excluded).
pub fn state_error_history(solution: &SolutionBundle, reference: &SolutionBundle) -> Result<f64> {
    if solution.m() != reference.m() {
        return Err(Error::ShapeMismatch(format!(
            "history comparison needs equal step counts, got {} vs {}",
            solution.m(),
            reference.m()
        )));
    }
    if (solution.h() - reference.h()).abs() > 1e-9 * solution.h().max(1e-300) {
        return Err(Error::ShapeMismatch(format!(
            "history comparison needs equal step sizes, got {} vs {}",
            solution.h(),
            reference.h()
        )));
    }
    let dim = solution.blocks()[0].len();
    if dim != reference.blocks()[0].len() {
        return Err(Error::ShapeMismatch(format!(
            "block dimensions differ: {dim} vs {}",
            reference.blocks()[0].len()
        )));
    }
    let concat = |bundle: &SolutionBundle| -> CVec {
        let m = bundle.m();
        let mut v = CVec::zeros((m + 1) * dim);
        for (k, b) in bundle.history().iter().enumerate() {
            v.rows_mut(k * dim, dim).copy_from(b);
        }
        v
    };
    let a = concat(solution);
    let b = concat(reference);
    let (na, nb) = (a.norm(), b.norm());
    if na < 1e-300 || nb < 1e-300 {
        return Err(Error::ZeroFinalState { norm: na.min(nb) });
    }
    Ok((a / creal(na) - b / creal(nb)).norm())
}

/// ‖u_M/‖u_M‖ − u(T)/‖u(T)‖‖ between the two final blocks.
pub fn state_error_final(solution: &SolutionBundle, reference: &SolutionBundle) -> Result<f64> {
    let a = solution.final_block();
    let b = reference.final_block();
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "final blocks differ in dimension: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    normalized_distance(a, b)
}

fn normalized_distance(a: &CVec, b: &CVec) -> Result<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na < 1e-300 {
        return Err(Error::ZeroFinalState { norm: na });
    }
    if nb < 1e-300 {
        return Err(Error::ZeroFinalState { norm: nb });
    }
    Ok((a / creal(na) - b / creal(nb)).norm())
}

/// Post-selection probability of landing in a final-state copy:
/// p = Σ_{k≥M} ‖u_k‖² / Σ_k ‖u_k‖².
pub fn success_probability(solution: &SolutionBundle, m: usize, mp: usize) -> f64 {
    debug_assert_eq!(solution.blocks().len(), m + mp);
    let total: f64 = solution.norms().iter().map(|n| n * n).sum();
    let tail: f64 = solution.norms()[m.min(solution.norms().len())..]
        .iter()
        .map(|n| n * n)
        .sum();
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

/// The padding rule and the continuous minimizer of
/// f(x) = √((M+x)/x)·(M/(ηT) + x).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PaddingChoice {
    /// ⌈M/(ηT)⌉.
    pub mp_rule: usize,
    /// 2M / (ηT·(1 + √(1 + 8/(ηT)))).
    pub mp_continuous: f64,
}

pub fn optimal_padding(m: usize, eta: f64, t_final: f64) -> Result<PaddingChoice> {
    let eta_t = eta * t_final;
    if !(eta_t > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "optimal padding needs eta*T > 0, got {eta_t}"
        )));
    }
    let mp_rule = ((m as f64 / eta_t).ceil() as usize).max(1);
    let mp_continuous = 2.0 * m as f64 / (eta_t * (1.0 + (1.0 + 8.0 / eta_t).sqrt()));
    Ok(PaddingChoice {
        mp_rule,
        mp_continuous,
    })
}

/// The amplitude-amplification profile f(x) = √((M+x)/x)·(M/(ηT)+x) whose
/// integer argmin the padding rule tracks.
pub fn padding_profile(m: usize, eta_t: f64, x: f64) -> f64 {
    ((m as f64 + x) / x).sqrt() * (m as f64 / eta_t + x)
}

/// Derived cost report for one (problem, scheme, task, eps) choice.
#[derive(Clone, Debug, Serialize)]
pub struct ComplexityReport {
    pub task: Task,
    pub scheme: String,
    pub h: f64,
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub mp: usize,
    pub kappa_bound: f64,
    /// Queries to the block-encoding of the system matrix.
    pub queries_oa: f64,
    /// Queries to the right-hand-side state-preparation oracle.
    pub queries_state_prep: f64,
    pub aa_rounds: f64,
    pub success_prob_lower: f64,
    /// g = max_t ‖u(t)‖ / ‖u(T)‖.
    pub decay_ratio: f64,
}

/// Reusable pieces of the cost model, exposing the query count as a pure
/// function of Mp so padding sweeps do not re-run the oracle.
#[derive(Clone, Debug)]
pub struct CostBase {
    pub scheme: SchemeKind,
    pub task: Task,
    pub eps: f64,
    pub selection: StepSelection,
    pub eta: f64,
    pub t_final: f64,
    /// max_j ‖L_j‖ including the leading identity row.
    pub max_l: f64,
    /// max_j ‖R_j‖ over the evolution rows only; padding identities are
    /// folded in by `kappa_bound` when Mp ≥ 2.
    pub max_r_evolution: f64,
    /// max_j ‖L_j⁻¹‖ including the leading identity row.
    pub max_l_inv: f64,
    pub decay_ratio: f64,
    pub oa_per_row: usize,
}

impl CostBase {
    pub fn kappa_bound(&self, mp: usize) -> f64 {
        let m = self.selection.m as f64;
        let max_r = if mp >= 2 {
            self.max_r_evolution.max(1.0)
        } else {
            self.max_r_evolution
        };
        let prefactor = (2.0 + self.max_l + max_r) * (1.0 + self.max_l_inv);
        (2.0 * std::f64::consts::E * m / (self.eta * self.t_final) + mp as f64) * prefactor
    }

    pub fn solver_eps(&self, mp: usize) -> f64 {
        match self.task {
            Task::History | Task::HistoryHomogeneous => self.eps,
            Task::Final => {
                let m = self.selection.m as f64;
                self.eps / (8.0 * (m + mp as f64).sqrt() * self.decay_ratio)
            }
        }
    }

    pub fn aa_rounds(&self, mp: usize) -> f64 {
        match self.task {
            Task::History | Task::HistoryHomogeneous => 1.0,
            Task::Final => {
                let m = self.selection.m as f64;
                (4.0 * self.decay_ratio * ((m + mp as f64) / mp as f64).sqrt())
                    .ceil()
                    .max(1.0)
            }
        }
    }

    /// Modeled queries to the system block-encoding at padding Mp.
    pub fn queries_oa(&self, mp: usize) -> f64 {
        let per_run =
            (self.oa_per_row as f64 * self.kappa_bound(mp) * (1.0 / self.solver_eps(mp)).ln())
                .ceil();
        (per_run * self.aa_rounds(mp)).max(1.0)
    }

    pub fn queries_state_prep(&self, mp: usize) -> f64 {
        let per_run = (self.kappa_bound(mp) * (1.0 / self.solver_eps(mp)).ln()).ceil();
        (per_run * self.aa_rounds(mp)).max(1.0)
    }
}

/// Scan the evolution steps for the block norms entering the κ bound and
/// verify the condition-number hypothesis e_prop ≤ ½ηh·e^{−ηh} by
/// measurement. Constant-coefficient problems are scanned at one step.
/// Returns (max‖L‖, max‖R‖ over evolution rows, max‖L⁻¹‖).
fn scan_block_factors(
    problem: &DissipativeOdeProblem,
    scheme: SchemeKind,
    sel: &StepSelection,
) -> Result<(f64, f64, f64)> {
    let eta_h = problem.eta() * sel.h;
    let threshold = 0.5 * eta_h * (-eta_h).exp();
    let oracle_tol = (threshold / 200.0).min(1e-10);
    if oracle_tol < reference_oracle::ORACLE_TOL_FLOOR {
        return Err(Error::OracleToleranceTooCoarse {
            oracle_tol: reference_oracle::ORACLE_TOL_FLOOR,
            threshold,
        });
    }
    let steps: Vec<usize> = if problem.is_time_independent() {
        vec![0]
    } else {
        (0..sel.m).collect()
    };
    let mut max_l: f64 = 1.0;
    let mut max_r: f64 = 0.0;
    let mut max_l_inv: f64 = 1.0;
    for j in steps {
        let ops = step_operators(problem, scheme, j, sel.h)?;
        let prop = reference_oracle::propagator(
            problem,
            j as f64 * sel.h,
            (j + 1) as f64 * sel.h,
            oracle_tol,
        )?;
        let l_inv_r = crate::linalg::lu_solve(&ops.l, &ops.r, j + 1)?;
        let measured = spectral_norm(&(l_inv_r - prop.matrix)) + prop.error_estimate;
        if measured > threshold {
            return Err(Error::HypothesisViolated {
                step: j,
                measured,
                threshold,
            });
        }
        max_l = max_l.max(spectral_norm(&ops.l));
        max_r = max_r.max(spectral_norm(&ops.r));
        max_l_inv = max_l_inv.max(1.0 / sigma_min(&ops.l));
    }
    Ok((max_l, max_r, max_l_inv))
}

/// Estimate g = max_t ‖u(t)‖ / ‖u(T)‖ on a uniform oracle grid.
pub fn decay_ratio(problem: &DissipativeOdeProblem, tol: f64) -> Result<(f64, f64, f64)> {
    let m = DECAY_GRID_POINTS;
    let h = problem.t_final() / m as f64;
    let hist = reference_oracle::exact_history(problem, m, h, tol)?;
    let max_u = hist.norms().iter().cloned().fold(0.0, f64::max);
    let final_u = *hist.norms().last().unwrap();
    if final_u < 1e-300 {
        return Err(Error::ZeroFinalState { norm: final_u });
    }
    Ok((max_u / final_u, max_u, final_u))
}

/// Build the reusable cost base: step selection, hypothesis-checked block
/// factors, and the decay ratio.
pub fn cost_base(
    problem: &DissipativeOdeProblem,
    scheme: SchemeKind,
    task: Task,
    eps: f64,
) -> Result<CostBase> {
    let selection = select_step(problem, scheme, eps, task)?;
    cost_base_for_selection(problem, scheme, task, eps, selection)
}

/// [`cost_base`] with an externally fixed step selection (padding studies
/// hold M constant while the rule varies).
pub fn cost_base_for_selection(
    problem: &DissipativeOdeProblem,
    scheme: SchemeKind,
    task: Task,
    eps: f64,
    selection: StepSelection,
) -> Result<CostBase> {
    let effective = scheme.with_order(selection.k);
    let (max_l, max_r_evolution, max_l_inv) =
        scan_block_factors(problem, effective, &selection)?;
    let (g, _, _) = decay_ratio(problem, (eps / 100.0).max(1e-10).min(1e-6))?;
    let oa_per_row = effective.oa_queries();
    Ok(CostBase {
        scheme: effective,
        task,
        eps,
        selection,
        eta: problem.eta(),
        t_final: problem.t_final(),
        max_l,
        max_r_evolution,
        max_l_inv,
        decay_ratio: g,
        oa_per_row,
    })
}

/// Full cost model for one task. Padding follows the optimal rule
/// Mp = ⌈M/(ηT)⌉ for final states and Mp = 1 for history states.
pub fn cost_model(
    problem: &DissipativeOdeProblem,
    scheme: SchemeKind,
    task: Task,
    eps: f64,
) -> Result<ComplexityReport> {
    let base = cost_base(problem, scheme, task, eps)?;
    let mp = match task {
        Task::Final => optimal_padding(base.selection.m, base.eta, base.t_final)?.mp_rule,
        _ => 1,
    };
    Ok(report_for_mp(&base, mp))
}

/// Evaluate the cost model at an explicit padding count.
pub fn report_for_mp(base: &CostBase, mp: usize) -> ComplexityReport {
    let m = base.selection.m;
    let g = base.decay_ratio;
    ComplexityReport {
        task: base.task,
        scheme: base.scheme.to_string(),
        h: base.selection.h,
        m,
        k: base.selection.k,
        mp,
        kappa_bound: base.kappa_bound(mp),
        queries_oa: base.queries_oa(mp),
        queries_state_prep: base.queries_state_prep(mp),
        aa_rounds: base.aa_rounds(mp),
        success_prob_lower: mp as f64 / (16.0 * (m + mp) as f64 * g * g),
        decay_ratio: g,
    }
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    THorizon,
    Eps,
    Scheme,
    Mp,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "t" | "horizon" => Ok(SweepAxis::THorizon),
            "eps" | "epsilon" => Ok(SweepAxis::Eps),
            "scheme" => Ok(SweepAxis::Scheme),
            "mp" | "padding" => Ok(SweepAxis::Mp),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep axis '{other}' (expected t | eps | scheme | mp)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum SweepValue {
    Real(f64),
    Int(usize),
    Scheme(SchemeKind),
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Real(x) => write!(f, "{x}"),
            SweepValue::Int(x) => write!(f, "{x}"),
            SweepValue::Scheme(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<SweepValue>,
    pub scheme: SchemeKind,
    pub task: Task,
    pub eps: f64,
    /// Fixed padding for non-Mp axes; `None` means the task rule.
    pub mp: Option<usize>,
}

/// One CSV row per sweep point; failures carry an error column instead of
/// aborting the sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub scheme: String,
    pub task: String,
    pub eps: f64,
    pub t_final: f64,
    pub h: Option<f64>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub mp: Option<usize>,
    pub kappa_bound: Option<f64>,
    pub kappa_exact: Option<f64>,
    pub err_history: Option<f64>,
    pub err_final: Option<f64>,
    pub success_prob: Option<f64>,
    pub queries_oa: Option<f64>,
    pub queries_state_prep: Option<f64>,
    pub aa_rounds: Option<f64>,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: [&str; 19] = [
    "axis",
    "value",
    "scheme",
    "task",
    "eps",
    "t_final",
    "h",
    "m",
    "k",
    "mp",
    "kappa_bound",
    "kappa_exact",
    "err_history",
    "err_final",
    "success_prob",
    "queries_oa",
    "queries_state_prep",
    "aa_rounds",
    "error",
];

fn fmt_opt_f(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.12e}")).unwrap_or_default()
}

fn fmt_opt_u(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Render rows as RFC-4180-style CSV with the fixed header ordering.
/// Output is deterministic for a fixed configuration.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(&SWEEP_HEADER.join(","));
    out.push('\n');
    for r in rows {
        let cells = [
            r.axis.clone(),
            r.value.clone(),
            r.scheme.clone(),
            r.task.clone(),
            format!("{:.12e}", r.eps),
            format!("{:.12e}", r.t_final),
            fmt_opt_f(r.h),
            fmt_opt_u(r.m),
            fmt_opt_u(r.k),
            fmt_opt_u(r.mp),
            fmt_opt_f(r.kappa_bound),
            fmt_opt_f(r.kappa_exact),
            fmt_opt_f(r.err_history),
            fmt_opt_f(r.err_final),
            fmt_opt_f(r.success_prob),
            fmt_opt_f(r.queries_oa),
            fmt_opt_f(r.queries_state_prep),
            fmt_opt_f(r.aa_rounds),
            r.error
                .as_deref()
                .map(|e| format!("\"{}\"", e.replace('"', "\"\"")))
                .unwrap_or_default(),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Full pipeline for one sweep point: select, assemble, solve, compare to
/// the oracle, and attach bounds and modeled costs.
pub fn run_point(
    problem: &Arc<DissipativeOdeProblem>,
    scheme: SchemeKind,
    task: Task,
    eps: f64,
    mp_override: Option<usize>,
) -> Result<(StepSelection, usize, SweepRow)> {
    let base = cost_base(problem, scheme, task, eps)?;
    let sel = base.selection;
    let mp = match mp_override {
        Some(v) => v.max(1),
        None => match task {
            Task::Final => optimal_padding(sel.m, problem.eta(), problem.t_final())?.mp_rule,
            _ => 1,
        },
    };
    let report = report_for_mp(&base, mp);

    let system = assemble(problem, base.scheme, sel.m, mp, sel.h)?;
    let solution = system.forward_solve()?;
    let oracle_tol = (eps / 100.0).max(1e-10).min(1e-8);
    let reference = reference_oracle::exact_history(problem, sel.m, sel.h, oracle_tol)?;
    let err_history = state_error_history(&solution, &reference)?;
    let err_final = state_error_final(&solution, &reference)?;
    let success = success_probability(&solution, sel.m, mp);
    let kappa_exact = match system.kappa_exact() {
        Ok(v) => Some(v),
        Err(Error::DimensionGuardExceeded { .. }) => None,
        Err(e) => return Err(e),
    };

    let row = SweepRow {
        axis: String::new(),
        value: String::new(),
        scheme: scheme.to_string(),
        task: task.to_string(),
        eps,
        t_final: problem.t_final(),
        h: Some(sel.h),
        m: Some(sel.m),
        k: sel.k,
        mp: Some(mp),
        kappa_bound: Some(report.kappa_bound),
        kappa_exact,
        err_history: Some(err_history),
        err_final: Some(err_final),
        success_prob: Some(success),
        queries_oa: Some(report.queries_oa),
        queries_state_prep: Some(report.queries_state_prep),
        aa_rounds: Some(report.aa_rounds),
        error: None,
    };
    Ok((sel, mp, row))
}

/// Run a sweep. `factory(t)` must build the problem at horizon `t`; for
/// non-horizon axes it is called with each spec's base horizon.
pub fn run_sweep(
    factory: &(dyn Fn(Option<f64>) -> Result<Arc<DissipativeOdeProblem>> + Sync),
    config: &SweepConfig,
) -> Vec<SweepRow> {
    use rayon::prelude::*;
    let points: Vec<(usize, SweepValue)> =
        config.values.iter().cloned().enumerate().collect();
    let mut rows: Vec<(usize, SweepRow)> = points
        .par_iter()
        .map(|(idx, value)| {
            let row = sweep_point(factory, config, value);
            (*idx, row)
        })
        .collect();
    rows.sort_by_key(|(idx, _)| *idx);
    rows.into_iter().map(|(_, r)| r).collect()
}

fn sweep_point(
    factory: &dyn Fn(Option<f64>) -> Result<Arc<DissipativeOdeProblem>>,
    config: &SweepConfig,
    value: &SweepValue,
) -> SweepRow {
    let axis_name = match config.axis {
        SweepAxis::THorizon => "t",
        SweepAxis::Eps => "eps",
        SweepAxis::Scheme => "scheme",
        SweepAxis::Mp => "mp",
    };
    let mut scheme = config.scheme;
    let mut eps = config.eps;
    let mut mp = config.mp;
    let mut horizon = None;
    match (config.axis, value) {
        (SweepAxis::THorizon, SweepValue::Real(t)) => horizon = Some(*t),
        (SweepAxis::Eps, SweepValue::Real(e)) => eps = *e,
        (SweepAxis::Scheme, SweepValue::Scheme(s)) => scheme = *s,
        (SweepAxis::Mp, SweepValue::Int(v)) => mp = Some(*v),
        _ => {
            return error_row(axis_name, value, config, "value does not match axis".into());
        }
    }
    let problem = match factory(horizon) {
        Ok(p) => p,
        Err(e) => return error_row(axis_name, value, config, e.to_string()),
    };
    match run_point(&problem, scheme, config.task, eps, mp) {
        Ok((_, _, mut row)) => {
            row.axis = axis_name.to_string();
            row.value = value.to_string();
            row
        }
        Err(e) => {
            let mut row = error_row(axis_name, value, config, e.to_string());
            row.scheme = scheme.to_string();
            row.eps = eps;
            row.t_final = problem.t_final();
            row
        }
    }
}

fn error_row(
    axis: &str,
    value: &SweepValue,
    config: &SweepConfig,
    message: String,
) -> SweepRow {
    SweepRow {
        axis: axis.to_string(),
        value: value.to_string(),
        scheme: config.scheme.to_string(),
        task: config.task.to_string(),
        eps: config.eps,
        t_final: f64::NAN,
        h: None,
        m: None,
        k: None,
        mp: None,
        kappa_bound: None,
        kappa_exact: None,
        err_history: None,
        err_final: None,
        success_prob: None,
        queries_oa: None,
        queries_state_prep: None,
        aa_rounds: None,
        error: Some(message),
    }
}
