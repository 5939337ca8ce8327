// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Randomized certified problem instances for the verification suites.
//!
//! Dissipativity is guaranteed by construction rather than sampling:
//! A(t) = −i·H(t) + L(t) with Hermitian H(t) = H0 + sin(ωt)·H1 and
//! L(t) = −ηI − W0†W0 − sin²(νt)·W1†W1 ≤ −ηI, so A + A† = 2L ≤ −2ηI for
//! every t, and the declared margin η is exact. All entries are smooth in
//! t, so the instances qualify for the C³ convergence-order checks.

use std::sync::Arc;

use rand::Rng;

use crate::linalg::{creal, spectral_norm, C64, CMat, CVec};
use crate::ode_model::{DissipativeOdeProblem, Generator, Source};

#[derive(Clone, Copy, Debug)]
pub struct SynthOptions {
    pub dim: usize,
    pub t_final: f64,
    /// Declared dissipation margin η.
    pub eta: f64,
    /// Scale of the Hermitian drive H0, H1.
    pub hermitian_scale: f64,
    /// Scale of the extra damping factors W0, W1.
    pub damping_scale: f64,
    /// Whether A(t) actually varies in time (otherwise H1 = W1 = 0).
    pub time_dependent: bool,
    /// Norm scale of the source b(t); zero means homogeneous.
    pub source_scale: f64,
    /// Whether a nonzero source varies in time.
    pub source_time_dependent: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            dim: 2,
            t_final: 1.0,
            eta: 0.8,
            hermitian_scale: 0.5,
            damping_scale: 0.4,
            time_dependent: true,
            source_scale: 0.0,
            source_time_dependent: true,
        }
    }
}

fn random_matrix(rng: &mut impl Rng, n: usize, scale: f64) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        C64::new(
            scale * (rng.gen::<f64>() * 2.0 - 1.0),
            scale * (rng.gen::<f64>() * 2.0 - 1.0),
        )
    })
}

fn random_hermitian(rng: &mut impl Rng, n: usize, scale: f64) -> CMat {
    let m = random_matrix(rng, n, scale);
    (&m + m.adjoint()) * creal(0.5)
}

fn random_unit_vector(rng: &mut impl Rng, n: usize) -> CVec {
    loop {
        let v = CVec::from_fn(n, |_, _| {
            C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        });
        let norm = v.norm();
        if norm > 1e-3 {
            return v / creal(norm);
        }
    }
}

/// Draw one certified problem according to `opts`.
pub fn random_problem(rng: &mut impl Rng, opts: &SynthOptions) -> DissipativeOdeProblem {
    let n = opts.dim;
    let h0 = random_hermitian(rng, n, opts.hermitian_scale);
    let w0 = random_matrix(rng, n, opts.damping_scale);
    let gram0 = w0.adjoint() * &w0;
    let (h1, gram1, omega, nu) = if opts.time_dependent {
        let h1 = random_hermitian(rng, n, opts.hermitian_scale * 0.6);
        let w1 = random_matrix(rng, n, opts.damping_scale * 0.7);
        let gram1 = w1.adjoint() * &w1;
        (
            h1,
            gram1,
            0.5 + rng.gen::<f64>(),
            0.5 + rng.gen::<f64>(),
        )
    } else {
        (CMat::zeros(n, n), CMat::zeros(n, n), 0.0, 0.0)
    };

    // Rigorous norm cap: ‖A(t)‖ ≤ ‖H0‖ + ‖H1‖ + η + ‖W0†W0‖ + ‖W1†W1‖.
    let alpha_a = spectral_norm(&h0)
        + spectral_norm(&h1)
        + opts.eta
        + spectral_norm(&gram0)
        + spectral_norm(&gram1);

    let eta = opts.eta;
    let generator = if opts.time_dependent {
        let (h0c, h1c, g0c, g1c) = (h0, h1, gram0, gram1);
        Generator::Varying(Arc::new(move |t: f64| {
            let h = &h0c + &h1c * creal((omega * t).sin());
            let l = &g0c * creal(-1.0) - &g1c * creal((nu * t).sin().powi(2));
            let damp = l - CMat::identity(h0c.nrows(), h0c.nrows()) * creal(eta);
            damp - h * C64::i()
        }))
    } else {
        let l = CMat::identity(n, n) * creal(-eta) - gram0;
        Generator::Constant(l - h0 * C64::i())
    };

    let (source, alpha_b) = if opts.source_scale > 0.0 {
        let b0 = random_unit_vector(rng, n) * creal(opts.source_scale);
        if opts.source_time_dependent {
            let b1 = random_unit_vector(rng, n) * creal(opts.source_scale * 0.5);
            let mu = 0.5 + rng.gen::<f64>();
            let alpha_b = b0.norm() + b1.norm();
            let (b0c, b1c) = (b0, b1);
            (
                Source::Varying(Arc::new(move |t: f64| &b0c + &b1c * creal((mu * t).cos()))),
                alpha_b,
            )
        } else {
            let alpha_b = b0.norm();
            (Source::Constant(b0), alpha_b)
        }
    } else {
        (Source::Zero, 0.0)
    };

    let u0 = random_unit_vector(rng, n);
    DissipativeOdeProblem::new(n, generator, source, u0, opts.t_final, eta, alpha_a, alpha_b)
        .expect("synthetic problems are valid by construction")
}

/// A steady-state scalar instance: A ≡ −η, b ≡ η·u0, so u(t) ≡ u0 and the
/// decay ratio max‖u‖/‖u(T)‖ equals 1. Used by the cost-model scaling
/// checks, which need a final state that does not decay with T.
pub fn steady_scalar(eta: f64, t_final: f64) -> DissipativeOdeProblem {
    DissipativeOdeProblem::from_constant(
        CMat::from_element(1, 1, creal(-eta)),
        Some(CVec::from_element(1, creal(eta))),
        CVec::from_element(1, creal(1.0)),
        t_final,
    )
    .expect("steady scalar problem is valid")
}

/// Scalar homogeneous decay A ≡ −1.
pub fn scalar_decay(t_final: f64) -> DissipativeOdeProblem {
    DissipativeOdeProblem::from_constant(
        CMat::from_element(1, 1, creal(-1.0)),
        None,
        CVec::from_element(1, creal(1.0)),
        t_final,
    )
    .expect("scalar decay problem is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode_model::{certify_dissipativity, default_certification_grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_problems_certify() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 1..=4 {
            let opts = SynthOptions {
                dim,
                source_scale: if dim % 2 == 0 { 0.3 } else { 0.0 },
                ..SynthOptions::default()
            };
            let p = random_problem(&mut rng, &opts);
            let grid = default_certification_grid(&p);
            let rep = certify_dissipativity(&p, &grid).unwrap();
            assert!(rep.pass, "dim {dim}: measured eta {}", rep.measured_eta);
            // The declared alpha_A must cap the grid norms.
            for &t in grid.times() {
                assert!(spectral_norm(&p.a(t)) <= p.alpha_a() + 1e-9);
            }
        }
    }

    #[test]
    fn steady_scalar_is_steady() {
        let p = steady_scalar(2.0, 4.0);
        let (u, _) = crate::reference_oracle::exact_state(&p, 4.0, 1e-10).unwrap();
        assert!((u[0].re - 1.0).abs() < 1e-8);
    }
}
