// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("generator returned a {got_rows}x{got_cols} matrix at t = {t}, expected {dim}x{dim}")]
    DimensionMismatch {
        dim: usize,
        got_rows: usize,
        got_cols: usize,
        t: f64,
    },

    #[error("Hermitian eigensolve did not converge")]
    NonHermitianEigenFailure,

    #[error("dense dimension {dim} exceeds guard {guard}")]
    DimensionGuardExceeded { dim: usize, guard: usize },

    #[error("potential must be nonpositive: c({t}, {point:?}) = {value}")]
    NonpositivityViolation {
        t: f64,
        point: Vec<f64>,
        value: f64,
    },

    #[error("damping matrix not negative definite at t = {t}: lambda_max = {lambda_max}, required <= -{eta}")]
    NotNegativeDefinite { t: f64, lambda_max: f64, eta: f64 },

    #[error("step size {h} too large for {scheme}: requires {requirement}")]
    StepTooLarge {
        h: f64,
        scheme: &'static str,
        requirement: &'static str,
    },

    #[error("trapezoidal diagonal block is singular (h * alpha_A = {h_alpha})")]
    SingularL { h_alpha: f64 },

    #[error("oracle tolerance {oracle_tol} too coarse to certify errors against threshold {threshold}")]
    OracleToleranceTooCoarse { oracle_tol: f64, threshold: f64 },

    #[error("eps must lie in (0, 1), got {eps}")]
    InvalidEps { eps: f64 },

    #[error("step condition violated: eta * h = {eta_h} > 1")]
    StepConditionViolated { eta_h: f64 },

    #[error("no feasible step after {iterations} bisection iterations")]
    NoFeasibleStep { iterations: usize },

    #[error("M * h = {mh} does not match T = {t_final}")]
    StepCountMismatch { mh: f64, t_final: f64 },

    #[error("singular diagonal block at block row {row}")]
    SingularBlock { row: usize },

    #[error("block index ({i}, {j}) out of range for {rows} block rows")]
    IndexOutOfRange { i: usize, j: usize, rows: usize },

    #[error("condition-number hypothesis violated at step {step}: local error {measured:.3e} > {threshold:.3e}")]
    HypothesisViolated {
        step: usize,
        measured: f64,
        threshold: f64,
    },

    #[error("tolerance {tol:.3e} unreachable: refinement floor hit at {reached:.3e}")]
    ToleranceUnreachable { tol: f64, reached: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("final block norm {norm:.3e} too small to normalize")]
    ZeroFinalState { norm: f64 },

    #[error("matrix norm {norm} exceeds block-encoding factor {alpha}")]
    NormExceedsAlpha { norm: f64, alpha: f64 },

    #[error("constructed oracle is not unitary: residual {residual:.3e}")]
    UnitarityViolated { residual: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code: 1 for usage and IO errors, 2 for violations of a
    /// mathematical hypothesis or guard that the run depended on.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) | Error::InvalidConfig(_) => 1,
            _ => 2,
        }
    }
}
