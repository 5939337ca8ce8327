// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! dissipode: a desk-scale classical toolkit for the all-at-once
//! linear-system formulation of dissipative linear ODEs
//! u' = A(t)u + b(t) with A(t) + A(t)† ≤ −2η < 0.
//!
//! The crate builds single-step schemes (forward Euler, trapezoidal rule,
//! truncated Dyson series), assembles the padded block lower-bidiagonal
//! all-at-once system, solves it exactly, certifies the condition-number
//! bounds that make the formulation fast-forwardable, models the resulting
//! query costs, and constructs the prepare/select block-encodings of the
//! system matrix as explicit unitaries at tiny scale.
//!
//! Start with the [`guide`] module (the rendered mdbook lives in `book/`),
//! or with [`ode_model::DissipativeOdeProblem`] and [`schemes::SchemeKind`].

pub mod analysis;
pub mod block_encoding;
pub mod block_system;
pub mod error;
pub mod guide;
pub mod linalg;
pub mod mm;
pub mod ode_model;
pub mod reference_oracle;
pub mod schemes;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
