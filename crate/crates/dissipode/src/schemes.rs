// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Single-step time discretizations L_j u_{j+1} = R_j u_j + v_j for the
//! forward Euler method, the trapezoidal rule, and the truncated Dyson
//! series, together with measured local errors, the per-task tolerance
//! budgets, and step selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{creal, identity, sigma_min, spectral_norm, CMat, CVec};
use crate::ode_model::DissipativeOdeProblem;
use crate::reference_oracle;

/// Default number of quadrature nodes per axis for Dyson simplex integrals.
pub const DEFAULT_QUAD_NODES: usize = 16;

/// Hard cap on the Dyson truncation order search.
pub const MAX_DYSON_ORDER: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum SchemeKind {
    Euler,
    Trapezoidal,
    Dyson { order: usize, quad_nodes: usize },
}

impl SchemeKind {
    pub fn dyson(order: usize) -> Self {
        SchemeKind::Dyson {
            order,
            quad_nodes: DEFAULT_QUAD_NODES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SchemeKind::Dyson { order, quad_nodes } = self {
            if *order < 1 || *quad_nodes < 2 {
                return Err(Error::InvalidConfig(
                    "Dyson scheme requires order K ≥ 1 and q ≥ 2 quadrature nodes".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::Trapezoidal => "trap",
            SchemeKind::Dyson { .. } => "dyson",
        }
    }

    /// Replace the Dyson truncation order (no-op for other schemes); used
    /// to propagate the order found by `select_step` into assembly.
    pub fn with_order(self, k: Option<usize>) -> SchemeKind {
        match (self, k) {
            (SchemeKind::Dyson { quad_nodes, .. }, Some(order)) => {
                SchemeKind::Dyson { order, quad_nodes }
            }
            (s, _) => s,
        }
    }

    /// Queries to the A(t) input oracle per block-encoding construction:
    /// 1 for Euler, 2 for trapezoid, K for the order-K Dyson series.
    pub fn oa_queries(&self) -> usize {
        match self {
            SchemeKind::Euler => 1,
            SchemeKind::Trapezoidal => 2,
            SchemeKind::Dyson { order, .. } => *order,
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchemeKind::Dyson { order, quad_nodes } => {
                write!(f, "dyson(K={order},q={quad_nodes})")
            }
            other => write!(f, "{}", other.name()),
        }
    }
}

/// One step of a single-step scheme: L u_{j+1} = R u_j + v.
#[derive(Clone, Debug)]
pub struct StepOperators {
    pub l: CMat,
    pub r: CMat,
    pub v: CVec,
    pub step_index: usize,
    pub step_size: f64,
}

/// Build (L_j, R_j, v_j) for step j of size h.
///
/// Euler: L = I, R = I + hA(jh), v = h·b(jh).
/// Trapezoid: L = I − (h/2)A((j+1)h), R = I + (h/2)A(jh),
///            v = (h/2)(b(jh) + b((j+1)h)).
/// Dyson: L = I; R and v are the order-K truncations of the time-ordered
/// series, with every k-fold simplex integral evaluated by a composite
/// rectangle rule on the ordered restriction of a tensor grid of q uniform
/// (midpoint) nodes; coincident nodes carry the factorial cell weights, so
/// the rule is exact for time-independent A.
pub fn step_operators(
    problem: &DissipativeOdeProblem,
    scheme: SchemeKind,
    j: usize,
    h: f64,
) -> Result<StepOperators> {
    scheme.validate()?;
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("step size {h} must be positive")));
    }
    let n = problem.dim();
    let t0 = j as f64 * h;
    let t1 = (j + 1) as f64 * h;
    let homogeneous = problem.is_homogeneous();

    let ops = match scheme {
        SchemeKind::Euler => {
            let r = identity(n) + problem.a(t0) * creal(h);
            let v = if homogeneous {
                CVec::zeros(n)
            } else {
                problem.b(t0) * creal(h)
            };
            StepOperators {
                l: identity(n),
                r,
                v,
                step_index: j,
                step_size: h,
            }
        }
        SchemeKind::Trapezoidal => {
            let h_alpha = h * problem.alpha_a();
            if h_alpha >= 2.0 {
                return Err(Error::SingularL { h_alpha });
            }
            let l = identity(n) - problem.a(t1) * creal(0.5 * h);
            let r = identity(n) + problem.a(t0) * creal(0.5 * h);
            let v = if homogeneous {
                CVec::zeros(n)
            } else {
                (problem.b(t0) + problem.b(t1)) * creal(0.5 * h)
            };
            StepOperators {
                l,
                r,
                v,
                step_index: j,
                step_size: h,
            }
        }
        SchemeKind::Dyson { order, quad_nodes } => {
            if h * problem.alpha_a() > 0.5 + 1e-12 {
                return Err(Error::StepTooLarge {
                    h,
                    scheme: "dyson",
                    requirement: "h * alpha_A <= 1/2",
                });
            }
            let (r, v) = dyson_series(problem, t0, h, order, quad_nodes);
            StepOperators {
                l: identity(n),
                r,
                v,
                step_index: j,
                step_size: h,
            }
        }
    };

    if sigma_min(&ops.l) <= 1e-12 {
        return Err(Error::SingularL {
            h_alpha: h * problem.alpha_a(),
        });
    }
    Ok(ops)
}

/// Truncated Dyson series over [t0, t0+h].
///
/// Midpoint nodes s_i = t0 + (i − ½)h/q processed in increasing time. The
/// running arrays hold the weighted ordered products of total degree k,
/// with ties between same-node factors weighted 1/m!; appending node i
/// multiplies on the left, which realizes the time ordering
/// A(t_1)A(t_2)…A(t_k), t_1 ≥ … ≥ t_k. The source enters at the earliest
/// time of each tuple with cell weight 1/(m+1)!, making the rule exact for
/// constant A and b.
fn dyson_series(
    problem: &DissipativeOdeProblem,
    t0: f64,
    h: f64,
    order: usize,
    quad_nodes: usize,
) -> (CMat, CVec) {
    let n = problem.dim();
    let q = quad_nodes;
    let dt = h / q as f64;
    let homogeneous = problem.is_homogeneous();

    // prop[k] = degree-k weighted sums for R; duh[k] for v (b plus k−1 A's).
    let mut prop: Vec<CMat> = Vec::with_capacity(order + 1);
    prop.push(identity(n));
    for _ in 0..order {
        prop.push(CMat::zeros(n, n));
    }
    let mut duh: Vec<CVec> = vec![CVec::zeros(n); order + 1];

    let mut bpow: Vec<CMat> = Vec::with_capacity(order + 1);
    for i in 1..=q {
        let s = t0 + (i as f64 - 0.5) * dt;
        let b_node = problem.a(s) * creal(dt);
        // bpow[m] = B^m / m!
        bpow.clear();
        bpow.push(identity(n));
        for m in 1..=order {
            let next = (&b_node * &bpow[m - 1]) * creal(1.0 / m as f64);
            bpow.push(next);
        }

        // Left-insert A factors at this node onto lower-degree sums.
        for k in (1..=order).rev() {
            let mut acc = prop[k].clone();
            for m in 1..=k {
                acc += &bpow[m] * &prop[k - m];
            }
            prop[k] = acc;
            if !homogeneous {
                let mut vacc = duh[k].clone();
                for m in 1..k {
                    vacc += &bpow[m] * &duh[k - m];
                }
                duh[k] = vacc;
            }
        }
        // Insert b at this node, with m = k−1 same-node A factors at weight
        // 1/k! = (1/k)·(1/(k−1)!).
        if !homogeneous {
            let b_val = problem.b(s) * creal(dt);
            for k in 1..=order {
                duh[k] += (&bpow[k - 1] * &b_val) * creal(1.0 / k as f64);
            }
        }
    }

    let mut r = CMat::zeros(n, n);
    for term in &prop {
        r += term;
    }
    let mut v = CVec::zeros(n);
    for term in duh.iter().skip(1) {
        v += term;
    }
    (r, v)
}

/// Measured local truncation errors of one step against the oracle.
#[derive(Clone, Copy, Debug)]
pub struct LocalErrors {
    /// ‖L⁻¹R − 𝒯exp(∫_{jh}^{(j+1)h} A)‖ in spectral norm.
    pub e_prop: f64,
    /// ‖L⁻¹v − ∫ 𝒯exp(∫_s^{(j+1)h} A) b(s) ds‖.
    pub e_inhom: f64,
}

pub fn local_errors(
    problem: &DissipativeOdeProblem,
    scheme: SchemeKind,
    j: usize,
    h: f64,
    oracle_tol: f64,
) -> Result<LocalErrors> {
    let ops = step_operators(problem, scheme, j, h)?;
    local_errors_of_ops(problem, &ops, oracle_tol)
}

/// Same as [`local_errors`] but reusing already-built step operators.
pub fn local_errors_of_ops(
    problem: &DissipativeOdeProblem,
    ops: &StepOperators,
    oracle_tol: f64,
) -> Result<LocalErrors> {
    let j = ops.step_index;
    let h = ops.step_size;
    let prop = reference_oracle::propagator(problem, j as f64 * h, (j + 1) as f64 * h, oracle_tol)?;
    let l_inv_r = crate::linalg::lu_solve(&ops.l, &ops.r, j + 1)?;
    let e_prop = spectral_norm(&(&l_inv_r - &prop.matrix)) + prop.error_estimate;
    let e_inhom = if problem.is_homogeneous() {
        0.0
    } else {
        let w = reference_oracle::duhamel_integral(problem, j, h, oracle_tol)?;
        let l_inv_v = crate::linalg::lu_solve_vec(&ops.l, &ops.v, j + 1)?;
        (l_inv_v - w).norm() + oracle_tol
    };
    Ok(LocalErrors { e_prop, e_inhom })
}

/// Which state the downstream algorithm prepares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    History,
    Final,
    HistoryHomogeneous,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Task::History => "history",
            Task::Final => "final",
            Task::HistoryHomogeneous => "history-homogeneous",
        };
        write!(f, "{s}")
    }
}

/// Per-step local-error budget (ε₁, ε₂) sufficient for an ε-accurate state.
#[derive(Clone, Copy, Debug)]
pub struct ToleranceBudget {
    /// Bound required of ‖L⁻¹R − 𝒯exp(∫A)‖ at every step.
    pub tol_propagator: f64,
    /// Bound required of the per-step inhomogeneous error; `INFINITY` when
    /// the homogeneous budget does not constrain it.
    pub tol_inhom: f64,
    pub task: Task,
}

/// Evaluate the per-step budget for target accuracy `eps` at step size `h`.
///
/// History: ε₁ = min{ ½ηh·e^{−ηh},
///   η^{3/2}hε / (144√2 · √(1 + T·α_b²/(η‖u0‖²)) · √(α_A + α_b/‖u0‖)) },
///   ε₂ = ‖u0‖ηhε / (72√2 · √T · √(α_A + α_b/‖u0‖)).
/// Final: ε₁ = min{ ½ηh·e^{−ηh}, (‖u(T)‖/(‖u0‖ + α_b/η)) · ηhε/128 },
///   ε₂ = ‖u(T)‖ηhε/32, with ‖u(T)‖ taken from the reference oracle.
/// HistoryHomogeneous: ε₁ = min{ ½ηh·e^{−ηh}, η^{3/2}hε/(32√α_A) }.
pub fn tolerance_budget(
    problem: &DissipativeOdeProblem,
    eps: f64,
    h: f64,
    task: Task,
) -> Result<ToleranceBudget> {
    tolerance_budget_with(problem, eps, h, task, None)
}

/// [`tolerance_budget`] with an optional precomputed lower bound on ‖u(T)‖
/// (the Final budget otherwise queries the oracle on every call).
pub fn tolerance_budget_with(
    problem: &DissipativeOdeProblem,
    eps: f64,
    h: f64,
    task: Task,
    final_norm_lb: Option<f64>,
) -> Result<ToleranceBudget> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEps { eps });
    }
    let eta = problem.eta();
    if !(eta > 0.0) {
        return Err(Error::InvalidProblem(
            "tolerance budgets require a dissipative problem (eta > 0)".into(),
        ));
    }
    let eta_h = eta * h;
    if eta_h > 1.0 {
        return Err(Error::StepConditionViolated { eta_h });
    }
    let alpha_a = problem.alpha_a();
    let alpha_b = problem.alpha_b();
    let u0 = problem.u0().norm();
    let t_final = problem.t_final();
    let contract_cap = 0.5 * eta_h * (-eta_h).exp();
    let sqrt2 = std::f64::consts::SQRT_2;

    let budget = match task {
        Task::History => {
            let mix = (alpha_a + alpha_b / u0).sqrt();
            let load = (1.0 + t_final * alpha_b * alpha_b / (eta * u0 * u0)).sqrt();
            let tol1 = eta.powf(1.5) * h * eps / (144.0 * sqrt2 * load * mix);
            let tol2 = u0 * eta_h * eps / (72.0 * sqrt2 * t_final.sqrt() * mix);
            ToleranceBudget {
                tol_propagator: contract_cap.min(tol1),
                tol_inhom: tol2,
                task,
            }
        }
        Task::Final => {
            let u_t = match final_norm_lb {
                Some(v) => v,
                None => {
                    let (state, est) = reference_oracle::exact_state(
                        problem,
                        t_final,
                        (eps / 10.0).max(reference_oracle::ORACLE_TOL_FLOOR).min(1e-8),
                    )?;
                    (state.norm() - est).max(0.0)
                }
            };
            if u_t <= 0.0 {
                return Err(Error::ZeroFinalState { norm: u_t });
            }
            let tol1 = u_t / (u0 + alpha_b / eta) * eta_h * eps / 128.0;
            let tol2 = u_t * eta_h * eps / 32.0;
            ToleranceBudget {
                tol_propagator: contract_cap.min(tol1),
                tol_inhom: tol2,
                task,
            }
        }
        Task::HistoryHomogeneous => {
            if !problem.is_homogeneous() {
                return Err(Error::InvalidConfig(
                    "the homogeneous history budget requires b ≡ 0".into(),
                ));
            }
            let tol1 = eta.powf(1.5) * h * eps / (32.0 * alpha_a.sqrt());
            ToleranceBudget {
                tol_propagator: contract_cap.min(tol1),
                tol_inhom: f64::INFINITY,
                task,
            }
        }
    };
    Ok(budget)
}

/// Outcome of `select_step`.
#[derive(Clone, Copy, Debug)]
pub struct StepSelection {
    pub h: f64,
    pub m: usize,
    /// Dyson truncation order; `None` for the lower-order schemes.
    pub k: Option<usize>,
}

const BISECTION_BUDGET: usize = 60;

/// Choose the step size (and Dyson order) meeting the task budget at
/// accuracy `eps`.
///
/// Dyson: M = ⌈2α_A T⌉ so that α_A h ≤ 1/2, then the smallest K with
/// (α_A h)^{K+1}/(K+1)! ≤ ε₁ and α_b·h·(α_A h)^K/(K+1)! ≤ ε₂.
/// Euler and trapezoid: bisection on h, accepting h only when measured
/// local errors on a probe set of steps meet the budget evaluated at the
/// rounded step count M = ⌈T/h⌉.
pub fn select_step(
    problem: &DissipativeOdeProblem,
    scheme: SchemeKind,
    eps: f64,
    task: Task,
) -> Result<StepSelection> {
    scheme.validate()?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEps { eps });
    }
    let t_final = problem.t_final();
    let final_norm = if task == Task::Final {
        let (state, est) = reference_oracle::exact_state(
            problem,
            t_final,
            (eps / 10.0).max(reference_oracle::ORACLE_TOL_FLOOR).min(1e-8),
        )?;
        Some((state.norm() - est).max(0.0))
    } else {
        None
    };

    if let SchemeKind::Dyson { .. } = scheme {
        let m = (2.0 * problem.alpha_a() * t_final).ceil().max(1.0) as usize;
        let h = t_final / m as f64;
        let budget = tolerance_budget_with(problem, eps, h, task, final_norm)?;
        let x = problem.alpha_a() * h;
        let mut k = 1usize;
        loop {
            let fact = factorial(k + 1);
            let e_prop_bound = x.powi(k as i32 + 1) / fact;
            let e_inhom_bound = problem.alpha_b() * h * x.powi(k as i32) / fact;
            if e_prop_bound <= budget.tol_propagator && e_inhom_bound <= budget.tol_inhom {
                break;
            }
            k += 1;
            if k > MAX_DYSON_ORDER {
                return Err(Error::NoFeasibleStep {
                    iterations: MAX_DYSON_ORDER,
                });
            }
        }
        return Ok(StepSelection {
            h,
            m,
            k: Some(k.max(dyson_declared_order(scheme))),
        });
    }

    // Lower-order schemes: measured bisection.
    let mut iterations = 0usize;
    let feasible = |h: f64| -> Result<Option<StepSelection>> {
        let m = (t_final / h).ceil().max(1.0) as usize;
        let h_adj = t_final / m as f64;
        if problem.eta() * h_adj > 1.0 {
            return Ok(None);
        }
        let budget = match tolerance_budget_with(problem, eps, h_adj, task, final_norm) {
            Ok(b) => b,
            Err(Error::StepConditionViolated { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let oracle_tol = probe_oracle_tol(&budget)?;
        let probes = probe_steps(problem, m);
        for j in probes {
            let errs = match local_errors(problem, scheme, j, h_adj, oracle_tol) {
                Ok(e) => e,
                Err(Error::SingularL { .. }) | Err(Error::StepTooLarge { .. }) => {
                    return Ok(None)
                }
                Err(e) => return Err(e),
            };
            if errs.e_prop > budget.tol_propagator || errs.e_inhom > budget.tol_inhom {
                return Ok(None);
            }
        }
        Ok(Some(StepSelection {
            h: h_adj,
            m,
            k: None,
        }))
    };

    let h_max = t_final.min(1.0 / problem.eta());
    if let Some(sel) = feasible(h_max)? {
        return Ok(sel);
    }
    // Find a feasible lower bracket by repeated halving.
    let mut lo = h_max;
    let mut lo_sel = None;
    while lo_sel.is_none() {
        iterations += 1;
        if iterations > BISECTION_BUDGET {
            return Err(Error::NoFeasibleStep {
                iterations: BISECTION_BUDGET,
            });
        }
        lo /= 2.0;
        lo_sel = feasible(lo)?;
    }
    let mut hi = lo * 2.0;
    let mut best = lo_sel.unwrap();
    // Sharpen toward the largest feasible step with the leftover budget.
    while iterations < BISECTION_BUDGET {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match feasible(mid)? {
            Some(sel) => {
                best = sel;
                lo = mid;
            }
            None => hi = mid,
        }
        if (hi - lo) / lo < 0.05 {
            break;
        }
    }
    Ok(best)
}

fn dyson_declared_order(scheme: SchemeKind) -> usize {
    match scheme {
        SchemeKind::Dyson { order, .. } => order,
        _ => 0,
    }
}

fn probe_oracle_tol(budget: &ToleranceBudget) -> Result<f64> {
    let scale = budget.tol_propagator.min(budget.tol_inhom);
    let tol = (scale / 200.0).min(1e-10);
    if tol < reference_oracle::ORACLE_TOL_FLOOR {
        return Err(Error::OracleToleranceTooCoarse {
            oracle_tol: reference_oracle::ORACLE_TOL_FLOOR,
            threshold: scale,
        });
    }
    Ok(tol)
}

/// Steps at which local errors are measured during selection. Constant
/// problems need one probe; otherwise sample across the horizon.
fn probe_steps(problem: &DissipativeOdeProblem, m: usize) -> Vec<usize> {
    if problem.is_time_independent() && problem.has_constant_source() {
        return vec![0];
    }
    let mut js = vec![0, m / 4, m / 2, (3 * m) / 4, m.saturating_sub(1)];
    js.sort_unstable();
    js.dedup();
    js
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product::<f64>().max(1.0)
}

/// Verify that every evolution step of a selection meets the budget.
/// Constant problems with constant sources are checked at one step.
pub fn verify_budget_all_steps(
    problem: &DissipativeOdeProblem,
    scheme: SchemeKind,
    sel: &StepSelection,
    budget: &ToleranceBudget,
) -> Result<()> {
    let oracle_tol = probe_oracle_tol(budget)?;
    let steps: Vec<usize> =
        if problem.is_time_independent() && problem.has_constant_source() {
            vec![0]
        } else {
            (0..sel.m).collect()
        };
    for j in steps {
        let errs = local_errors(problem, scheme, j, sel.h, oracle_tol)?;
        if errs.e_prop > budget.tol_propagator {
            return Err(Error::HypothesisViolated {
                step: j,
                measured: errs.e_prop,
                threshold: budget.tol_propagator,
            });
        }
        if errs.e_inhom > budget.tol_inhom {
            return Err(Error::HypothesisViolated {
                step: j,
                measured: errs.e_inhom,
                threshold: budget.tol_inhom,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(a: f64, b: Option<f64>, t_final: f64) -> DissipativeOdeProblem {
        DissipativeOdeProblem::from_constant(
            CMat::from_element(1, 1, creal(a)),
            b.map(|x| CVec::from_element(1, creal(x))),
            CVec::from_element(1, creal(1.0)),
            t_final,
        )
        .unwrap()
    }

    #[test]
    fn euler_scalar_step() {
        let p = scalar(-1.0, None, 1.0);
        let ops = step_operators(&p, SchemeKind::Euler, 0, 0.5).unwrap();
        assert_relative_eq!(ops.l[(0, 0)].re, 1.0);
        assert_relative_eq!(ops.r[(0, 0)].re, 0.5);
        assert_eq!(ops.v[0].re, 0.0);
    }

    #[test]
    fn trapezoid_scalar_step() {
        let p = scalar(-1.0, None, 1.0);
        let ops = step_operators(&p, SchemeKind::Trapezoidal, 0, 0.5).unwrap();
        assert_relative_eq!(ops.l[(0, 0)].re, 1.25);
        assert_relative_eq!(ops.r[(0, 0)].re, 0.75);
        let ratio = ops.r[(0, 0)].re / ops.l[(0, 0)].re;
        assert_relative_eq!(ratio, 0.6, max_relative = 1e-12);
    }

    #[test]
    fn dyson_scalar_truncation() {
        // K = 2, A ≡ −1, h = 0.5: R → 1 − 0.5 + 0.125 = 0.625 (exact for
        // constant A under the factorial-weighted rule).
        let p = scalar(-1.0, None, 1.0);
        let ops = step_operators(
            &p,
            SchemeKind::Dyson {
                order: 2,
                quad_nodes: 16,
            },
            0,
            0.5,
        )
        .unwrap();
        assert_relative_eq!(ops.r[(0, 0)].re, 0.625, max_relative = 1e-12);
        let err = (ops.r[(0, 0)].re - (-0.5f64).exp()).abs();
        assert!(err <= 0.5f64.powi(3) / 6.0);
    }

    #[test]
    fn dyson_inhomogeneous_constant_is_exact_truncation() {
        // Constant A = −1, b = 1: v should be Σ_{k≤K} h^k A^{k−1} b / k!.
        let p = scalar(-1.0, Some(1.0), 1.0);
        let h = 0.5;
        for order in 1..=4usize {
            let ops = step_operators(
                &p,
                SchemeKind::Dyson {
                    order,
                    quad_nodes: 9,
                },
                0,
                h,
            )
            .unwrap();
            let mut expect = 0.0;
            for k in 1..=order {
                expect += h.powi(k as i32) * (-1.0f64).powi(k as i32 - 1) / factorial(k);
            }
            assert_relative_eq!(ops.v[0].re, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn dyson_rejects_large_step() {
        let p = scalar(-1.0, None, 2.0);
        let err = step_operators(&p, SchemeKind::dyson(2), 0, 0.75).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn trapezoid_rejects_singular_step() {
        let p = scalar(-1.0, None, 4.0);
        let err = step_operators(&p, SchemeKind::Trapezoidal, 0, 2.0).unwrap_err();
        assert!(matches!(err, Error::SingularL { .. }));
    }

    #[test]
    fn local_error_euler_scalar() {
        let p = scalar(-1.0, None, 1.0);
        let errs = local_errors(&p, SchemeKind::Euler, 0, 0.1, 1e-12).unwrap();
        assert_relative_eq!(
            errs.e_prop,
            ((-0.1f64).exp() - 0.9).abs(),
            max_relative = 1e-6
        );
        assert_eq!(errs.e_inhom, 0.0);
    }

    #[test]
    fn local_error_trapezoid_scalar() {
        let p = scalar(-1.0, None, 1.0);
        let errs = local_errors(&p, SchemeKind::Trapezoidal, 0, 0.1, 1e-12).unwrap();
        assert_relative_eq!(
            errs.e_prop,
            ((-0.1f64).exp() - 0.95 / 1.05).abs(),
            max_relative = 1e-4
        );
    }

    #[test]
    fn homogeneous_budget_example() {
        // η = 1, h = 0.1, α_A = 1, ε = 0.1:
        // ε₁ = min{0.05·e^{−0.1}, 0.1·0.1/32} = 3.125e−4.
        let p = scalar(-1.0, None, 1.0);
        let b = tolerance_budget(&p, 0.1, 0.1, Task::HistoryHomogeneous).unwrap();
        assert_relative_eq!(b.tol_propagator, 3.125e-4, max_relative = 1e-12);
        assert!(b.tol_inhom.is_infinite());
    }

    #[test]
    fn budget_rejects_bad_inputs() {
        let p = scalar(-1.0, None, 1.0);
        assert!(matches!(
            tolerance_budget(&p, 1.5, 0.1, Task::History),
            Err(Error::InvalidEps { .. })
        ));
        assert!(matches!(
            tolerance_budget(&p, 0.1, 1.5, Task::History),
            Err(Error::StepConditionViolated { .. })
        ));
    }

    #[test]
    fn final_budget_vanishes_with_final_norm() {
        // A decayed-away final state makes the final-task budgets collapse,
        // the signature of exponentially expensive homogeneous final states.
        let p = scalar(-1.0, Some(0.1), 1.0);
        let big = tolerance_budget_with(&p, 0.1, 0.1, Task::Final, Some(1.0)).unwrap();
        let tiny = tolerance_budget_with(&p, 0.1, 0.1, Task::Final, Some(1e-9)).unwrap();
        assert!(tiny.tol_propagator < 1e-8 * big.tol_propagator);
        assert!(tiny.tol_inhom < 1e-8 * big.tol_inhom);
        assert!(matches!(
            tolerance_budget_with(&p, 0.1, 0.1, Task::Final, Some(0.0)),
            Err(Error::ZeroFinalState { .. })
        ));
    }

    #[test]
    fn history_budget_homogeneous_reduction() {
        // b ≡ 0 in the History formula keeps the 144√2 constant and a finite
        // but never-binding ε₂.
        let p = scalar(-1.0, None, 1.0);
        let b = tolerance_budget(&p, 0.1, 0.1, Task::History).unwrap();
        let expect = 0.1 * 0.1 / (144.0 * std::f64::consts::SQRT_2);
        assert_relative_eq!(b.tol_propagator, expect, max_relative = 1e-12);
        assert!(b.tol_inhom.is_finite());
    }

    #[test]
    fn dyson_selection_is_t_scaled() {
        let p = scalar(-1.0, None, 8.0);
        let sel = select_step(&p, SchemeKind::dyson(1), 0.1, Task::HistoryHomogeneous).unwrap();
        assert_eq!(sel.m, 16);
        assert_relative_eq!(sel.h, 0.5, max_relative = 1e-12);
        assert!(sel.k.is_some());
    }

    #[test]
    fn euler_selection_halves_with_eps() {
        let p = scalar(-1.0, None, 1.0);
        let s1 = select_step(&p, SchemeKind::Euler, 0.1, Task::History).unwrap();
        let s2 = select_step(&p, SchemeKind::Euler, 0.05, Task::History).unwrap();
        let ratio = s1.h / s2.h;
        assert!((1.6..=2.5).contains(&ratio), "first-order ratio {ratio}");
    }

    #[test]
    fn trapezoid_selection_scales_sqrt2() {
        let p = scalar(-1.0, None, 1.0);
        let s1 = select_step(&p, SchemeKind::Trapezoidal, 0.1, Task::History).unwrap();
        let s2 = select_step(&p, SchemeKind::Trapezoidal, 0.05, Task::History).unwrap();
        let ratio = s1.h / s2.h;
        assert!(
            (1.15..=1.8).contains(&ratio),
            "second-order ratio {ratio} (expected ≈ √2)"
        );
    }

    #[test]
    fn contractivity_transfer() {
        // Whenever e_prop ≤ ½ηh·e^{−ηh}, ‖L⁻¹R‖ ≤ e^{−ηh/2}.
        let p = scalar(-1.0, None, 1.0);
        for h in [0.05f64, 0.1, 0.2, 0.4] {
            let budget_cap = 0.5 * h * (-h).exp();
            for scheme in [SchemeKind::Euler, SchemeKind::Trapezoidal, SchemeKind::dyson(2)] {
                let ops = step_operators(&p, scheme, 0, h).unwrap();
                let errs = local_errors_of_ops(&p, &ops, 1e-12).unwrap();
                if errs.e_prop <= budget_cap {
                    let lr = crate::linalg::lu_solve(&ops.l, &ops.r, 0).unwrap();
                    assert!(spectral_norm(&lr) <= (-h / 2.0).exp() + 1e-12);
                }
            }
        }
    }
}
