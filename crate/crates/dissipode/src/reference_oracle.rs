// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! High-accuracy classical ground truth: time-ordered propagators, Duhamel
//! integrals, and exact solution histories.
//!
//! The propagator 𝒯exp(∫ A) is integrated with classical fourth-order
//! Runge-Kutta under step halving; refinement stops once the operator-norm
//! difference between successive levels drops below `tol/4`, and the returned
//! error estimate is the Richardson a-posteriori value with a safety factor.
//! Piecewise-defined problems are split at their declared breakpoints so the
//! integrator never steps across a jump.

use crate::block_system::SolutionBundle;
use crate::error::{Error, Result};
use crate::linalg::{creal, identity, spectral_norm, CMat, CVec};
use crate::ode_model::DissipativeOdeProblem;

/// Hard floor on requested oracle tolerances.
pub const ORACLE_TOL_FLOOR: f64 = 1e-13;

const MAX_DOUBLINGS: usize = 26;

/// A propagator approximation together with an a-posteriori error estimate.
#[derive(Clone, Debug)]
pub struct PropagatorEstimate {
    pub matrix: CMat,
    pub error_estimate: f64,
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol >= ORACLE_TOL_FLOOR) {
        return Err(Error::InvalidConfig(format!(
            "oracle tolerance {tol:.3e} below floor {ORACLE_TOL_FLOOR:.0e}"
        )));
    }
    Ok(())
}

/// Split [t0, t1] at the problem's interior breakpoints.
fn smooth_pieces(problem: &DissipativeOdeProblem, t0: f64, t1: f64) -> Vec<(f64, f64)> {
    let mut edges = vec![t0];
    for &b in problem.breakpoints() {
        if b > t0 && b < t1 {
            edges.push(b);
        }
    }
    edges.push(t1);
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

/// One RK4 sweep of U' = A(t)U over [t0, t1], U(t0) = I.
fn rk4_matrix(problem: &DissipativeOdeProblem, t0: f64, t1: f64, steps: usize) -> CMat {
    let n = problem.dim();
    let h = (t1 - t0) / steps as f64;
    let mut u = identity(n);
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let a0 = problem.a(t);
        let am = problem.a(t + 0.5 * h);
        let a1 = problem.a(t + h);
        let k1 = &a0 * &u;
        let k2 = &am * (&u + &k1 * creal(0.5 * h));
        let k3 = &am * (&u + &k2 * creal(0.5 * h));
        let k4 = &a1 * (&u + &k3 * creal(h));
        u += (k1 + k2 * creal(2.0) + k3 * creal(2.0) + k4) * creal(h / 6.0);
    }
    u
}

/// One RK4 sweep of the pair U' = A(t)U, w' = A(t)w + b(t) with U(t0) = I,
/// w(t0) = 0. The pair yields both the propagator and the local Duhamel
/// term in a single integration.
fn rk4_pair(problem: &DissipativeOdeProblem, t0: f64, t1: f64, steps: usize) -> (CMat, CVec) {
    let n = problem.dim();
    let h = (t1 - t0) / steps as f64;
    let mut u = identity(n);
    let mut w = CVec::zeros(n);
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let a0 = problem.a(t);
        let am = problem.a(t + 0.5 * h);
        let a1 = problem.a(t + h);
        let b0 = problem.b(t);
        let bm = problem.b(t + 0.5 * h);
        let b1 = problem.b(t + h);

        let k1 = &a0 * &u;
        let k2 = &am * (&u + &k1 * creal(0.5 * h));
        let k3 = &am * (&u + &k2 * creal(0.5 * h));
        let k4 = &a1 * (&u + &k3 * creal(h));

        let l1 = &a0 * &w + &b0;
        let l2 = &am * (&w + &l1 * creal(0.5 * h)) + &bm;
        let l3 = &am * (&w + &l2 * creal(0.5 * h)) + &bm;
        let l4 = &a1 * (&w + &l3 * creal(h)) + &b1;

        u += (k1 + k2 * creal(2.0) + k3 * creal(2.0) + k4) * creal(h / 6.0);
        w += (l1 + l2 * creal(2.0) + l3 * creal(2.0) + l4) * creal(h / 6.0);
    }
    (u, w)
}

fn initial_steps(problem: &DissipativeOdeProblem, len: f64) -> usize {
    ((len * problem.alpha_a().max(1.0) / 0.5).ceil() as usize).max(1)
}

fn refine_matrix(
    problem: &DissipativeOdeProblem,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<(CMat, f64)> {
    let mut steps = initial_steps(problem, t1 - t0);
    let mut prev = rk4_matrix(problem, t0, t1, steps);
    let mut diff = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        steps *= 2;
        let cur = rk4_matrix(problem, t0, t1, steps);
        diff = spectral_norm(&(&cur - &prev));
        if diff <= tol / 4.0 {
            // Richardson: the finer sweep's error is ≈ diff/15; keep a 2x margin.
            return Ok((cur, diff / 7.5));
        }
        prev = cur;
    }
    Err(Error::ToleranceUnreachable { tol, reached: diff })
}

fn refine_pair(
    problem: &DissipativeOdeProblem,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<(CMat, CVec, f64)> {
    if problem.is_homogeneous() {
        let (u, est) = refine_matrix(problem, t0, t1, tol)?;
        return Ok((u, CVec::zeros(problem.dim()), est));
    }
    let mut steps = initial_steps(problem, t1 - t0);
    let (mut pu, mut pw) = rk4_pair(problem, t0, t1, steps);
    let mut diff = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        steps *= 2;
        let (u, w) = rk4_pair(problem, t0, t1, steps);
        diff = spectral_norm(&(&u - &pu)) + (&w - &pw).norm();
        if diff <= tol / 4.0 {
            return Ok((u, w, diff / 7.5));
        }
        pu = u;
        pw = w;
    }
    Err(Error::ToleranceUnreachable { tol, reached: diff })
}

/// The time-ordered propagator 𝒯exp(∫_{t0}^{t1} A(s) ds) to accuracy `tol`.
pub fn propagator(
    problem: &DissipativeOdeProblem,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<PropagatorEstimate> {
    check_tol(tol)?;
    if t1 < t0 {
        return Err(Error::InvalidConfig(format!("t0 = {t0} exceeds t1 = {t1}")));
    }
    if t1 == t0 {
        return Ok(PropagatorEstimate {
            matrix: identity(problem.dim()),
            error_estimate: 0.0,
        });
    }
    let pieces = smooth_pieces(problem, t0, t1);
    let piece_tol = tol / pieces.len() as f64;
    let mut acc = identity(problem.dim());
    let mut est = 0.0;
    for (a, b) in pieces {
        let (u, e) = refine_matrix(problem, a, b, piece_tol)?;
        acc = &u * acc;
        est += e;
    }
    Ok(PropagatorEstimate {
        matrix: acc,
        error_estimate: est,
    })
}

/// Propagator and local Duhamel term over one smooth-capable span:
/// returns (𝒯exp(∫ A), ∫ 𝒯exp(∫_s^{t1} A) b(s) ds, error estimate).
pub fn propagator_pair(
    problem: &DissipativeOdeProblem,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<(CMat, CVec, f64)> {
    check_tol(tol)?;
    if t1 <= t0 {
        return Ok((identity(problem.dim()), CVec::zeros(problem.dim()), 0.0));
    }
    let pieces = smooth_pieces(problem, t0, t1);
    let piece_tol = tol / pieces.len() as f64;
    let mut acc_u = identity(problem.dim());
    let mut acc_w = CVec::zeros(problem.dim());
    let mut est = 0.0;
    for (a, b) in pieces {
        let (u, w, e) = refine_pair(problem, a, b, piece_tol)?;
        acc_w = &u * acc_w + w;
        acc_u = &u * acc_u;
        est += e;
    }
    Ok((acc_u, acc_w, est))
}

/// ∫_{jh}^{(j+1)h} 𝒯exp(∫_s^{(j+1)h} A) b(s) ds by adaptive Simpson
/// quadrature, with internal propagator calls at tol/10.
pub fn duhamel_integral(
    problem: &DissipativeOdeProblem,
    j: usize,
    h: f64,
    tol: f64,
) -> Result<CVec> {
    check_tol(tol)?;
    let n = problem.dim();
    if problem.is_homogeneous() {
        return Ok(CVec::zeros(n));
    }
    let t_start = j as f64 * h;
    let t_end = (j + 1) as f64 * h;
    let eval = |s: f64| -> Result<CVec> {
        let p = propagator(problem, s, t_end, tol / 10.0)?;
        Ok(&p.matrix * problem.b(s))
    };
    let pieces = smooth_pieces(problem, t_start, t_end);
    let total_len = t_end - t_start;
    let mut acc = CVec::zeros(n);
    for (a, b) in pieces {
        let piece_tol = tol * (b - a) / total_len;
        let fa = eval(a)?;
        let fm = eval(0.5 * (a + b))?;
        let fb = eval(b)?;
        acc += simpson_adaptive(&eval, a, b, &fa, &fm, &fb, piece_tol, 0)?;
    }
    Ok(acc)
}

fn simpson_rule(a: f64, b: f64, fa: &CVec, fm: &CVec, fb: &CVec) -> CVec {
    (fa + fm * creal(4.0) + fb) * creal((b - a) / 6.0)
}

fn simpson_adaptive(
    eval: &dyn Fn(f64) -> Result<CVec>,
    a: f64,
    b: f64,
    fa: &CVec,
    fm: &CVec,
    fb: &CVec,
    tol: f64,
    depth: usize,
) -> Result<CVec> {
    let m = 0.5 * (a + b);
    let fl = eval(0.5 * (a + m))?;
    let fr = eval(0.5 * (m + b))?;
    let whole = simpson_rule(a, b, fa, fm, fb);
    let left = simpson_rule(a, m, fa, &fl, fm);
    let right = simpson_rule(m, b, fm, &fr, fb);
    let fine = &left + &right;
    let err = (&fine - &whole).norm() / 15.0;
    if err <= tol || (b - a) < 1e-14 {
        let correction = (&fine - &whole) * creal(1.0 / 15.0);
        return Ok(fine + correction);
    }
    if depth >= 24 {
        return Err(Error::ToleranceUnreachable { tol, reached: err });
    }
    let lsum = simpson_adaptive(eval, a, m, fa, &fl, fm, tol / 2.0, depth + 1)?;
    let rsum = simpson_adaptive(eval, m, b, fm, &fr, fb, tol / 2.0, depth + 1)?;
    Ok(lsum + rsum)
}

/// Exact history bundle [u(0), u(h), …, u(Mh)] with per-step error ≤ tol.
///
/// Each step chains the propagator with the local Duhamel term; both come
/// from one step-halved RK4 integration of the variation-of-constants pair,
/// which is what `propagator` + `duhamel_integral` compute separately.
pub fn exact_history(
    problem: &DissipativeOdeProblem,
    m: usize,
    h: f64,
    tol: f64,
) -> Result<SolutionBundle> {
    check_tol(tol)?;
    let mh = m as f64 * h;
    if (mh - problem.t_final()).abs() > 1e-12 * problem.t_final().max(1.0) {
        return Err(Error::StepCountMismatch {
            mh,
            t_final: problem.t_final(),
        });
    }
    let mut blocks = Vec::with_capacity(m + 1);
    blocks.push(problem.u0().clone());
    for k in 0..m {
        let (u, w, _) = propagator_pair(problem, k as f64 * h, (k + 1) as f64 * h, tol)?;
        let next = &u * &blocks[k] + w;
        blocks.push(next);
    }
    Ok(SolutionBundle::from_blocks(blocks, h, m, 1, None))
}

/// Exact solution u(t) with error estimate, via one pair integration.
pub fn exact_state(problem: &DissipativeOdeProblem, t: f64, tol: f64) -> Result<(CVec, f64)> {
    let (u, w, est) = propagator_pair(problem, 0.0, t, tol)?;
    let state = &u * problem.u0() + w;
    Ok((state, est * (problem.u0().norm() + 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cmat_from_real, sigma_min};
    use crate::ode_model::{Generator, Source};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn scalar(a: f64, t_final: f64) -> DissipativeOdeProblem {
        DissipativeOdeProblem::from_constant(
            CMat::from_element(1, 1, creal(a)),
            None,
            CVec::from_element(1, creal(1.0)),
            t_final,
        )
        .unwrap()
    }

    #[test]
    fn constant_identity_decay() {
        let p = DissipativeOdeProblem::from_constant(
            CMat::identity(2, 2) * creal(-1.0),
            None,
            CVec::from_element(2, creal(1.0)),
            1.0,
        )
        .unwrap();
        let prop = propagator(&p, 0.0, 1.0, 1e-12).unwrap();
        let expect = identity(2) * creal((-1.0f64).exp());
        assert!(spectral_norm(&(prop.matrix - expect)) < 1e-11);
    }

    #[test]
    fn time_dependent_scalar_integral() {
        // A(t) = −(1+t)·I over [0,1]: propagator is e^{−3/2}·I.
        let gen = Generator::Varying(Arc::new(|t| CMat::from_element(1, 1, creal(-(1.0 + t)))));
        let p = DissipativeOdeProblem::new(
            1,
            gen,
            Source::Zero,
            CVec::from_element(1, creal(1.0)),
            1.0,
            1.0,
            2.0,
            0.0,
        )
        .unwrap();
        let prop = propagator(&p, 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(prop.matrix[(0, 0)].re, (-1.5f64).exp(), max_relative = 1e-10);
        assert!(prop.matrix[(0, 0)].im.abs() < 1e-12);
    }

    #[test]
    fn commuting_split_closed_form() {
        // A = −iσ_x − I: propagator at t = 1 is e^{−1}(cos 1 · I − i sin 1 · σ_x).
        let sx = cmat_from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let a = &sx * C64::new(0.0, -1.0) - identity(2);
        let p = DissipativeOdeProblem::from_constant(
            a,
            None,
            CVec::from_element(2, creal(1.0)),
            1.0,
        )
        .unwrap();
        let prop = propagator(&p, 0.0, 1.0, 1e-12).unwrap();
        let decay = (-1.0f64).exp();
        let expect = identity(2) * creal(decay * 1.0f64.cos())
            + &sx * C64::new(0.0, -decay * 1.0f64.sin());
        assert!(spectral_norm(&(prop.matrix - expect)) < 1e-10);
    }

    use crate::linalg::C64;

    #[test]
    fn duhamel_constant_source() {
        let p = DissipativeOdeProblem::from_constant(
            CMat::from_element(1, 1, creal(-1.0)),
            Some(CVec::from_element(1, creal(1.0))),
            CVec::from_element(1, creal(1.0)),
            1.0,
        )
        .unwrap();
        for h in [0.25, 0.5, 1.0] {
            let v = duhamel_integral(&p, 0, h, 1e-11).unwrap();
            assert_relative_eq!(v[0].re, 1.0 - (-h).exp(), max_relative = 1e-9);
        }
    }

    #[test]
    fn duhamel_linear_source_by_parts() {
        // A ≡ −1, b(s) = s on [0,1]: ∫ e^{−(1−s)} s ds = e^{−1} ∫ s e^s ds = e^{−1}.
        let p = DissipativeOdeProblem::new(
            1,
            Generator::Constant(CMat::from_element(1, 1, creal(-1.0))),
            Source::Varying(Arc::new(|s| CVec::from_element(1, creal(s)))),
            CVec::from_element(1, creal(1.0)),
            1.0,
            1.0,
            1.0,
            1.0,
        )
        .unwrap();
        let v = duhamel_integral(&p, 0, 1.0, 1e-11).unwrap();
        assert_relative_eq!(v[0].re, (-1.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn history_matches_scalar_exponential() {
        let p = scalar(-1.0, 1.0);
        let hist = exact_history(&p, 2, 0.5, 1e-12).unwrap();
        let expect = [1.0, (-0.5f64).exp(), (-1.0f64).exp()];
        for (b, e) in hist.blocks().iter().zip(expect) {
            assert_relative_eq!(b[0].re, e, max_relative = 1e-10);
        }
    }

    #[test]
    fn steady_state_history_is_constant() {
        // A = −ηI, b = η·u0: u(t) ≡ u0.
        let eta = 2.0;
        let u0 = CVec::from_fn(2, |i, _| creal(if i == 0 { 0.6 } else { 0.8 }));
        let p = DissipativeOdeProblem::from_constant(
            identity(2) * creal(-eta),
            Some(&u0 * creal(eta)),
            u0.clone(),
            2.0,
        )
        .unwrap();
        let hist = exact_history(&p, 4, 0.5, 1e-11).unwrap();
        for b in hist.blocks() {
            assert!((b - &u0).norm() < 1e-9);
        }
    }

    #[test]
    fn semigroup_property() {
        let gen = Generator::Varying(Arc::new(|t| {
            cmat_from_real(&[&[-1.0 - 0.3 * (t as f64).sin(), 0.2], &[-0.2, -1.5]])
        }));
        let p = DissipativeOdeProblem::new(
            2,
            gen,
            Source::Zero,
            CVec::from_element(2, creal(1.0)),
            2.0,
            0.5,
            2.5,
            0.0,
        )
        .unwrap();
        let tol = 1e-11;
        let p02 = propagator(&p, 0.0, 2.0, tol).unwrap().matrix;
        let p01 = propagator(&p, 0.0, 0.7, tol).unwrap().matrix;
        let p12 = propagator(&p, 0.7, 2.0, tol).unwrap().matrix;
        assert!(spectral_norm(&(&p12 * &p01 - p02)) < 10.0 * tol * 100.0);
    }

    #[test]
    fn decay_and_nondegeneracy_bounds() {
        let p = scalar(-1.0, 4.0);
        for (t0, t1) in [(0.0, 1.0), (0.5, 3.5), (2.0, 4.0)] {
            let prop = propagator(&p, t0, t1, 1e-11).unwrap();
            let norm = spectral_norm(&prop.matrix);
            assert!(norm <= (-(t1 - t0)).exp() + 1e-9);
            assert!(sigma_min(&prop.matrix) >= (-(t1 - t0) * p.alpha_a()).exp() - 1e-9);
        }
    }

    #[test]
    fn tolerance_floor_enforced() {
        let p = scalar(-1.0, 1.0);
        assert!(propagator(&p, 0.0, 1.0, 1e-14).is_err());
    }

    #[test]
    fn homogeneous_norms_are_nonincreasing() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let opts = crate::synth::SynthOptions {
            dim: 3,
            t_final: 2.0,
            source_scale: 0.0,
            ..Default::default()
        };
        let p = crate::synth::random_problem(&mut rng, &opts);
        let hist = exact_history(&p, 16, 2.0 / 16.0, 1e-10).unwrap();
        for w in hist.norms().windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "norms must not increase: {w:?}");
        }
    }
}
