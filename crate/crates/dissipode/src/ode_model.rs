// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dissipative ODE problems: u'(t) = A(t) u(t) + b(t) on [0, T] with a
//! uniformly negative logarithmic norm, i.e. A(t) + A(t)† ≤ −2η < 0.
//!
//! The module defines the problem type, sample grids, dissipativity
//! certification, and generators for the two application families
//! (semi-discretized heat equation, non-Hermitian quantum dynamics),
//! plus JSON loading for user-supplied problems.

use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{
    creal, hermitian_part, identity, is_hermitian, lambda_max_hermitian, spectral_norm, C64, CMat,
    CVec,
};

pub type MatClosure = Arc<dyn Fn(f64) -> CMat + Send + Sync>;
pub type VecClosure = Arc<dyn Fn(f64) -> CVec + Send + Sync>;

/// Number of uniform sample times used when a certification grid is not
/// supplied explicitly.
pub const DEFAULT_CERT_POINTS: usize = 129;

/// Dense-storage guard on the state dimension of generated problems.
pub const DENSE_DIM_GUARD: usize = 4096;

/// The generator map t ↦ A(t).
#[derive(Clone)]
pub enum Generator {
    Constant(CMat),
    Varying(MatClosure),
}

impl Generator {
    pub fn eval(&self, t: f64) -> CMat {
        match self {
            Generator::Constant(m) => m.clone(),
            Generator::Varying(f) => f(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Generator::Constant(_))
    }
}

/// The source map t ↦ b(t). `Zero` is kept distinct so homogeneous paths
/// can short-circuit (the inhomogeneous local error is exactly zero).
#[derive(Clone)]
pub enum Source {
    Zero,
    Constant(CVec),
    Varying(VecClosure),
}

impl Source {
    pub fn eval(&self, t: f64, dim: usize) -> CVec {
        match self {
            Source::Zero => CVec::zeros(dim),
            Source::Constant(v) => v.clone(),
            Source::Varying(f) => f(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Source::Zero)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Source::Zero | Source::Constant(_))
    }
}

/// A linear ODE u' = A(t)u + b(t), u(0) = u0, declared dissipative with
/// margin `eta` and norm caps `alpha_a ≥ sup‖A(t)‖`, `alpha_b ≥ sup‖b(t)‖`.
///
/// Immutable after construction; all evaluations are pure.
#[derive(Clone)]
pub struct DissipativeOdeProblem {
    dim: usize,
    generator: Generator,
    source: Source,
    u0: CVec,
    t_final: f64,
    eta: f64,
    alpha_a: f64,
    alpha_b: f64,
    /// Interior times where A or b may jump (piecewise-constant problems);
    /// the reference oracle splits integration at these points.
    breakpoints: Vec<f64>,
    /// η = 0 contrast mode: not dissipative, accepted only for condition
    /// number diagnostics. Budgets and bounds refuse such problems.
    diagnostic: bool,
}

impl std::fmt::Debug for DissipativeOdeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DissipativeOdeProblem")
            .field("dim", &self.dim)
            .field("t_final", &self.t_final)
            .field("eta", &self.eta)
            .field("alpha_a", &self.alpha_a)
            .field("alpha_b", &self.alpha_b)
            .field("homogeneous", &self.source.is_zero())
            .field("time_independent", &self.generator.is_constant())
            .field("diagnostic", &self.diagnostic)
            .finish()
    }
}

impl DissipativeOdeProblem {
    pub fn new(
        dim: usize,
        generator: Generator,
        source: Source,
        u0: CVec,
        t_final: f64,
        eta: f64,
        alpha_a: f64,
        alpha_b: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidProblem("dimension must be positive".into()));
        }
        if u0.len() != dim {
            return Err(Error::InvalidProblem(format!(
                "u0 has length {}, expected {dim}",
                u0.len()
            )));
        }
        if u0.norm() == 0.0 {
            return Err(Error::InvalidProblem("u0 must be nonzero".into()));
        }
        if !(t_final > 0.0) {
            return Err(Error::InvalidProblem("T must be positive".into()));
        }
        if !(eta > 0.0) {
            return Err(Error::InvalidProblem(
                "eta must be positive (use diagnostic_zero for the η = 0 contrast mode)".into(),
            ));
        }
        if !(alpha_a > 0.0) || alpha_b < 0.0 {
            return Err(Error::InvalidProblem(
                "alpha_A must be positive and alpha_b nonnegative".into(),
            ));
        }
        let a0 = generator.eval(0.0);
        if a0.nrows() != dim || a0.ncols() != dim {
            return Err(Error::DimensionMismatch {
                dim,
                got_rows: a0.nrows(),
                got_cols: a0.ncols(),
                t: 0.0,
            });
        }
        Ok(Self {
            dim,
            generator,
            source,
            u0,
            t_final,
            eta,
            alpha_a,
            alpha_b,
            breakpoints: Vec::new(),
            diagnostic: false,
        })
    }

    /// Constant-coefficient problem with η, α_A, α_b auto-computed from the
    /// matrices: η = −λ_max((A + A†)/2), α_A = ‖A‖, α_b = ‖b‖.
    pub fn from_constant(a: CMat, b: Option<CVec>, u0: CVec, t_final: f64) -> Result<Self> {
        let dim = a.nrows();
        let eta = -lambda_max_hermitian(&hermitian_part(&a))?;
        if !(eta > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "matrix is not dissipative: lambda_max((A+A†)/2) = {:.3e}",
                -eta
            )));
        }
        let alpha_a = spectral_norm(&a);
        let (source, alpha_b) = match b {
            None => (Source::Zero, 0.0),
            Some(v) => {
                let n = v.norm();
                if n == 0.0 {
                    (Source::Zero, 0.0)
                } else {
                    (Source::Constant(v), n)
                }
            }
        };
        Self::new(
            dim,
            Generator::Constant(a),
            source,
            u0,
            t_final,
            eta,
            alpha_a,
            alpha_b,
        )
    }

    /// The η = 0 contrast problem A ≡ 0, b ≡ 0: stable but not dissipative.
    /// Only condition-number diagnostics accept it.
    pub fn diagnostic_zero(dim: usize, t_final: f64) -> Self {
        Self {
            dim,
            generator: Generator::Constant(CMat::zeros(dim, dim)),
            source: Source::Zero,
            u0: CVec::from_element(dim, creal(1.0) / creal((dim as f64).sqrt())),
            t_final,
            eta: 0.0,
            alpha_a: 1.0,
            alpha_b: 0.0,
            breakpoints: Vec::new(),
            diagnostic: true,
        }
    }

    pub fn with_breakpoints(mut self, mut breakpoints: Vec<f64>) -> Self {
        breakpoints.retain(|&t| t > 0.0 && t < self.t_final);
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        self.breakpoints = breakpoints;
        self
    }

    /// Evaluate A(t) without revalidation (dimension checked at construction
    /// and by `a_checked` on certification grids).
    pub fn a(&self, t: f64) -> CMat {
        self.generator.eval(t)
    }

    /// Evaluate A(t) and verify its shape.
    pub fn a_checked(&self, t: f64) -> Result<CMat> {
        let m = self.generator.eval(t);
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                dim: self.dim,
                got_rows: m.nrows(),
                got_cols: m.ncols(),
                t,
            });
        }
        Ok(m)
    }

    pub fn b(&self, t: f64) -> CVec {
        self.source.eval(t, self.dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn u0(&self) -> &CVec {
        &self.u0
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn alpha_a(&self) -> f64 {
        self.alpha_a
    }

    pub fn alpha_b(&self) -> f64 {
        self.alpha_b
    }

    pub fn is_homogeneous(&self) -> bool {
        self.source.is_zero()
    }

    /// True when A(t) is a constant matrix; step operators and local errors
    /// are then identical across steps, which diagnostics exploit.
    pub fn is_time_independent(&self) -> bool {
        self.generator.is_constant()
    }

    pub fn has_constant_source(&self) -> bool {
        self.source.is_constant()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn is_diagnostic(&self) -> bool {
        self.diagnostic
    }

    /// Rebuild the same dynamics over a different horizon.
    pub fn with_horizon(&self, t_final: f64) -> Result<Self> {
        if !(t_final > 0.0) {
            return Err(Error::InvalidProblem("T must be positive".into()));
        }
        let mut p = self.clone();
        p.t_final = t_final;
        p.breakpoints.retain(|&t| t < t_final);
        Ok(p)
    }
}

/// Purpose tag for a sample grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridPurpose {
    Certification,
    Quadrature,
}

/// A strictly increasing list of sample times in [0, T].
#[derive(Clone, Debug)]
pub struct SampleGrid {
    times: Vec<f64>,
    purpose: GridPurpose,
}

impl SampleGrid {
    pub fn new(times: Vec<f64>, purpose: GridPurpose) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidConfig("sample grid must be nonempty".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "sample grid times must be strictly increasing".into(),
            ));
        }
        Ok(Self { times, purpose })
    }

    /// Uniform grid over [0, T] with `n` points (n ≥ 2 includes both ends).
    pub fn uniform(n: usize, t_final: f64, purpose: GridPurpose) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig("need at least 2 grid points".into()));
        }
        let times = (0..n)
            .map(|i| t_final * i as f64 / (n - 1) as f64)
            .collect();
        Self::new(times, purpose)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn purpose(&self) -> GridPurpose {
        self.purpose
    }
}

/// Outcome of a dissipativity certification run.
#[derive(Clone, Copy, Debug)]
pub struct CertificateReport {
    /// min over the grid of −λ_max((A(t) + A(t)†)/2).
    pub measured_eta: f64,
    /// Grid time attaining the minimum.
    pub worst_time: f64,
    /// measured_eta ≥ declared η, within 1e−10·α_A.
    pub pass: bool,
}

/// Certify A(t) + A(t)† ≤ −2η on a finite sample grid.
pub fn certify_dissipativity(
    problem: &DissipativeOdeProblem,
    grid: &SampleGrid,
) -> Result<CertificateReport> {
    if grid.purpose() == GridPurpose::Certification {
        let first = *grid.times().first().unwrap();
        let last = *grid.times().last().unwrap();
        if first.abs() > 1e-12 || (last - problem.t_final()).abs() > 1e-12 * problem.t_final() {
            return Err(Error::InvalidConfig(
                "certification grids must include both endpoints 0 and T".into(),
            ));
        }
    }
    let mut measured_eta = f64::INFINITY;
    let mut worst_time = 0.0;
    for &t in grid.times() {
        let a = problem.a_checked(t)?;
        let lam = lambda_max_hermitian(&hermitian_part(&a))?;
        if -lam < measured_eta {
            measured_eta = -lam;
            worst_time = t;
        }
    }
    let tol = 1e-10 * problem.alpha_a();
    Ok(CertificateReport {
        measured_eta,
        worst_time,
        pass: measured_eta >= problem.eta() - tol,
    })
}

pub fn default_certification_grid(problem: &DissipativeOdeProblem) -> SampleGrid {
    SampleGrid::uniform(
        DEFAULT_CERT_POINTS,
        problem.t_final(),
        GridPurpose::Certification,
    )
    .expect("default grid is valid")
}

// ---------------------------------------------------------------------------
// Heat equation generator
// ---------------------------------------------------------------------------

pub type StaticField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type TimeField = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Potential term c(t, x) ≤ 0 of the generalized heat equation.
#[derive(Clone)]
pub enum Potential {
    Zero,
    Static(StaticField),
    TimeVarying(TimeField),
}

/// Source term f(t, x) of the generalized heat equation.
#[derive(Clone)]
pub enum HeatSource {
    Zero,
    Static(StaticField),
    TimeVarying(TimeField),
}

fn second_difference(n_x: usize) -> CMat {
    let n = n_x + 1;
    let scale = (n_x * n_x) as f64;
    CMat::from_fn(n, n, |i, j| {
        if i == j {
            creal(-2.0 * scale)
        } else if i.abs_diff(j) == 1 {
            creal(scale)
        } else {
            creal(0.0)
        }
    })
}

fn centered_difference(n_x: usize) -> CMat {
    let n = n_x + 1;
    let scale = n_x as f64 / 2.0;
    CMat::from_fn(n, n, |i, j| {
        if j == i + 1 {
            creal(scale)
        } else if i == j + 1 {
            creal(-scale)
        } else {
            creal(0.0)
        }
    })
}

/// Kronecker sum Σ_j I ⊗ … ⊗ m ⊗ … ⊗ I over `d` factors.
fn kron_sum(m: &CMat, d: usize) -> CMat {
    let n = m.nrows();
    let total = n.pow(d as u32);
    let mut acc = CMat::zeros(total, total);
    for j in 0..d {
        let left = identity(n.pow(j as u32));
        let right = identity(n.pow((d - 1 - j) as u32));
        acc += left.kronecker(m).kronecker(&right);
    }
    acc
}

/// Grid points x = (j_1/n_x, …, j_d/n_x) in the index order induced by the
/// Kronecker-sum layout (first axis most significant).
fn grid_points(n_x: usize, d: usize) -> Vec<Vec<f64>> {
    let per_axis = n_x + 1;
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut coords = vec![0.0; d];
            for axis in (0..d).rev() {
                coords[axis] = (idx % per_axis) as f64 / n_x as f64;
                idx /= per_axis;
            }
            coords
        })
        .collect()
}

/// Semi-discretized generalized heat equation on the unit cube `[0,1]^d`
/// with homogeneous Dirichlet boundary:
///
///   u' = a·L u + b_vel·D u + C(t) u + f(t),
///
/// where L and D are Kronecker sums of the 1-D second-difference stencil
/// (factor n_x²) and the centered first difference (factor n_x/2), and C(t)
/// is the diagonal of the potential samples.
///
/// Grid convention: (n_x + 1) points j/n_x per axis, j = 0..n_x, exactly as
/// the stencils are printed, so the per-axis matrix size is n_x + 1 and the
/// second-difference eigenvalues are −4n_x² sin²(jπ/(2(n_x+2))) for
/// j = 1..n_x+1. The boundary rows are *not* eliminated from the unknown
/// vector; the Dirichlet data enters only by the stencil truncation at the
/// first and last rows. Observe the resulting off-by-one: the matrix has
/// n_x + 1 rows per axis, not n_x − 1 interior rows.
///
/// The declared margin is η = 4·a·d·n_x²/(n_x+2)², half the bound on
/// A + A† that the eigenvalue inequality sin(πx/2) ≥ x yields.
pub fn make_heat_problem(
    diffusivity: f64,
    velocity: f64,
    d: usize,
    n_x: usize,
    potential: Potential,
    source: HeatSource,
    t_final: f64,
) -> Result<DissipativeOdeProblem> {
    if diffusivity <= 0.0 || d == 0 || n_x == 0 {
        return Err(Error::InvalidProblem(
            "heat problem needs a > 0, d ≥ 1, n_x ≥ 1".into(),
        ));
    }
    let dim = (n_x + 1).pow(d as u32);
    if dim > DENSE_DIM_GUARD {
        return Err(Error::DimensionGuardExceeded {
            dim,
            guard: DENSE_DIM_GUARD,
        });
    }

    let l1 = second_difference(n_x);
    let d1 = centered_difference(n_x);
    let lap = kron_sum(&l1, d);
    let div = kron_sum(&d1, d);
    let base = &lap * creal(diffusivity) + &div * creal(velocity);
    let points = grid_points(n_x, d);

    // Nonpositivity of c sampled on the default certification times.
    let cert_times: Vec<f64> = (0..DEFAULT_CERT_POINTS)
        .map(|i| t_final * i as f64 / (DEFAULT_CERT_POINTS - 1) as f64)
        .collect();
    let mut c_sup: f64 = 0.0;
    match &potential {
        Potential::Zero => {}
        Potential::Static(c) => {
            for p in &points {
                let v = c(p);
                if v > 0.0 {
                    return Err(Error::NonpositivityViolation {
                        t: 0.0,
                        point: p.clone(),
                        value: v,
                    });
                }
                c_sup = c_sup.max(v.abs());
            }
        }
        Potential::TimeVarying(c) => {
            for &t in &cert_times {
                for p in &points {
                    let v = c(t, p);
                    if v > 0.0 {
                        return Err(Error::NonpositivityViolation {
                            t,
                            point: p.clone(),
                            value: v,
                        });
                    }
                    c_sup = c_sup.max(v.abs());
                }
            }
        }
    }

    let generator = match &potential {
        Potential::Zero => Generator::Constant(base),
        Potential::Static(c) => {
            let mut m = base;
            for (i, p) in points.iter().enumerate() {
                m[(i, i)] += creal(c(p));
            }
            Generator::Constant(m)
        }
        Potential::TimeVarying(c) => {
            let c = c.clone();
            let points = points.clone();
            Generator::Varying(Arc::new(move |t| {
                let mut m = base.clone();
                for (i, p) in points.iter().enumerate() {
                    m[(i, i)] += creal(c(t, p));
                }
                m
            }))
        }
    };

    let sample_source = |f: &TimeField, t: f64, pts: &[Vec<f64>]| -> CVec {
        CVec::from_fn(pts.len(), |i, _| creal(f(t, &pts[i])))
    };
    let (src, alpha_b) = match &source {
        HeatSource::Zero => (Source::Zero, 0.0),
        HeatSource::Static(f) => {
            let v = CVec::from_fn(points.len(), |i, _| creal(f(&points[i])));
            let n = v.norm();
            if n == 0.0 {
                (Source::Zero, 0.0)
            } else {
                (Source::Constant(v), n)
            }
        }
        HeatSource::TimeVarying(f) => {
            let alpha_b = cert_times
                .iter()
                .map(|&t| sample_source(f, t, &points).norm())
                .fold(0.0, f64::max);
            let f = f.clone();
            let points = points.clone();
            (
                Source::Varying(Arc::new(move |t| sample_source(&f, t, &points))),
                alpha_b,
            )
        }
    };

    let eta = 4.0 * diffusivity * d as f64 * (n_x * n_x) as f64 / ((n_x + 2) * (n_x + 2)) as f64;
    let alpha_a = diffusivity * d as f64 * spectral_norm(&l1)
        + velocity.abs() * d as f64 * spectral_norm(&d1)
        + c_sup;

    let u0 = CVec::from_fn(dim, |i, _| {
        // Product of sin(π x_k) bumps: positive in the interior, zero on the
        // boundary, normalized below.
        creal(points[i].iter().map(|&x| (std::f64::consts::PI * x).sin()).product())
    });
    let norm = u0.norm();
    let u0 = if norm > 0.0 {
        u0 / creal(norm)
    } else {
        CVec::from_element(dim, creal(1.0) / creal((dim as f64).sqrt()))
    };

    DissipativeOdeProblem::new(dim, generator, src, u0, t_final, eta, alpha_a, alpha_b)
}

// ---------------------------------------------------------------------------
// Non-Hermitian dynamics generator
// ---------------------------------------------------------------------------

/// Dissipative quantum dynamics i u' = (H(t) + i L(t)) u, i.e.
/// u' = (−i·H(t) + L(t)) u, with H, L Hermitian and L(t) ≤ −η < 0.
///
/// When `declared_eta` is `None`, η is auto-computed as the minimum of
/// −λ_max(L(t)) over a default certification grid; α_A is likewise the grid
/// maximum of ‖−iH(t) + L(t)‖ (exact for constant inputs).
pub fn make_non_hermitian_problem(
    hamiltonian: Generator,
    damping: Generator,
    u0: CVec,
    t_final: f64,
    declared_eta: Option<f64>,
) -> Result<DissipativeOdeProblem> {
    let dim = u0.len();
    let times: Vec<f64> = if hamiltonian.is_constant() && damping.is_constant() {
        vec![0.0]
    } else {
        (0..DEFAULT_CERT_POINTS)
            .map(|i| t_final * i as f64 / (DEFAULT_CERT_POINTS - 1) as f64)
            .collect()
    };

    let mut eta_auto = f64::INFINITY;
    let mut alpha_a: f64 = 0.0;
    for &t in &times {
        let h = hamiltonian.eval(t);
        let l = damping.eval(t);
        if h.nrows() != dim || l.nrows() != dim {
            return Err(Error::DimensionMismatch {
                dim,
                got_rows: h.nrows().max(l.nrows()),
                got_cols: h.ncols().max(l.ncols()),
                t,
            });
        }
        if !is_hermitian(&h, 1e-10) || !is_hermitian(&l, 1e-10) {
            return Err(Error::InvalidProblem(format!(
                "H(t) and L(t) must be Hermitian (violated at t = {t})"
            )));
        }
        let lam = lambda_max_hermitian(&l)?;
        if let Some(eta) = declared_eta {
            if lam > -eta + 1e-10 * (1.0 + spectral_norm(&l)) {
                return Err(Error::NotNegativeDefinite {
                    t,
                    lambda_max: lam,
                    eta,
                });
            }
        }
        eta_auto = eta_auto.min(-lam);
        let a = &l - (&h * C64::i());
        alpha_a = alpha_a.max(spectral_norm(&a));
    }
    let eta = match declared_eta {
        Some(e) => e,
        None => {
            if eta_auto <= 0.0 {
                return Err(Error::NotNegativeDefinite {
                    t: 0.0,
                    lambda_max: -eta_auto,
                    eta: 0.0,
                });
            }
            eta_auto
        }
    };

    let generator = match (&hamiltonian, &damping) {
        (Generator::Constant(h), Generator::Constant(l)) => {
            Generator::Constant(l - h * C64::i())
        }
        _ => {
            let h = hamiltonian.clone();
            let l = damping.clone();
            Generator::Varying(Arc::new(move |t| l.eval(t) - h.eval(t) * C64::i()))
        }
    };

    DissipativeOdeProblem::new(dim, generator, Source::Zero, u0, t_final, eta, alpha_a, 0.0)
}

// ---------------------------------------------------------------------------
// JSON problem definitions
// ---------------------------------------------------------------------------

/// A complex entry in JSON: either a plain number or a `[re, im]` pair.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn as_c64(self) -> C64 {
        match self {
            Entry::Real(x) => creal(x),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

fn vec_from_entries(v: &[Entry]) -> CVec {
    CVec::from_fn(v.len(), |i, _| v[i].as_c64())
}

fn mat_from_entries(m: &[Vec<Entry>]) -> Result<CMat> {
    let rows: Vec<Vec<C64>> = m
        .iter()
        .map(|r| r.iter().map(|e| e.as_c64()).collect())
        .collect();
    crate::linalg::cmat_from_rows(&rows)
}

/// Declarative problem description; see the README for the schema.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Generalized heat equation with constant potential and source.
    Heat {
        a: f64,
        #[serde(default)]
        b_vel: f64,
        d: usize,
        n_x: usize,
        t_final: f64,
        #[serde(default)]
        c_const: f64,
        #[serde(default)]
        f_const: f64,
    },
    /// Constant non-Hermitian Hamiltonian dynamics.
    NonHermitian {
        h: Vec<Vec<Entry>>,
        l: Vec<Vec<Entry>>,
        u0: Vec<Entry>,
        t_final: f64,
        #[serde(default)]
        eta: Option<f64>,
    },
    /// Piecewise-constant A(t) (and optionally b(t)) over a declared time
    /// grid: `a_blocks[k]` holds on `[times[k], times[k+1])`.
    CustomMatrixList {
        times: Vec<f64>,
        a_blocks: Vec<Vec<Vec<Entry>>>,
        #[serde(default)]
        b_blocks: Option<Vec<Vec<Entry>>>,
        u0: Vec<Entry>,
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        alpha_a: Option<f64>,
        #[serde(default)]
        alpha_b: Option<f64>,
    },
}

impl ProblemSpec {
    pub fn parse(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Same dynamics, different horizon (used by horizon sweeps).
    pub fn with_t_final(&self, t_final: f64) -> Result<Self> {
        let mut spec = self.clone();
        match &mut spec {
            ProblemSpec::Heat { t_final: t, .. } => *t = t_final,
            ProblemSpec::NonHermitian { t_final: t, .. } => *t = t_final,
            ProblemSpec::CustomMatrixList { times, .. } => {
                if times.len() != 2 {
                    return Err(Error::InvalidConfig(
                        "horizon sweeps need a single-segment custom problem".into(),
                    ));
                }
                times[1] = t_final;
            }
        }
        Ok(spec)
    }

    pub fn build(&self) -> Result<DissipativeOdeProblem> {
        match self {
            ProblemSpec::Heat {
                a,
                b_vel,
                d,
                n_x,
                t_final,
                c_const,
                f_const,
            } => {
                let potential = if *c_const == 0.0 {
                    Potential::Zero
                } else {
                    let c = *c_const;
                    Potential::Static(Arc::new(move |_x: &[f64]| c))
                };
                let source = if *f_const == 0.0 {
                    HeatSource::Zero
                } else {
                    let f = *f_const;
                    HeatSource::Static(Arc::new(move |_x: &[f64]| f))
                };
                make_heat_problem(*a, *b_vel, *d, *n_x, potential, source, *t_final)
            }
            ProblemSpec::NonHermitian {
                h,
                l,
                u0,
                t_final,
                eta,
            } => make_non_hermitian_problem(
                Generator::Constant(mat_from_entries(h)?),
                Generator::Constant(mat_from_entries(l)?),
                vec_from_entries(u0),
                *t_final,
                *eta,
            ),
            ProblemSpec::CustomMatrixList {
                times,
                a_blocks,
                b_blocks,
                u0,
                eta,
                alpha_a,
                alpha_b,
            } => build_custom(times, a_blocks, b_blocks.as_deref(), u0, *eta, *alpha_a, *alpha_b),
        }
    }
}

fn build_custom(
    times: &[f64],
    a_blocks: &[Vec<Vec<Entry>>],
    b_blocks: Option<&[Vec<Entry>]>,
    u0: &[Entry],
    eta: Option<f64>,
    alpha_a: Option<f64>,
    alpha_b: Option<f64>,
) -> Result<DissipativeOdeProblem> {
    if times.len() < 2 || times[0] != 0.0 {
        return Err(Error::InvalidConfig(
            "custom problems need times = [0, …, T] with at least two entries".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("times must be strictly increasing".into()));
    }
    let segments = times.len() - 1;
    if a_blocks.len() != segments {
        return Err(Error::ShapeMismatch(format!(
            "{} A blocks for {segments} segments",
            a_blocks.len()
        )));
    }
    let mats: Vec<CMat> = a_blocks
        .iter()
        .map(|b| mat_from_entries(b))
        .collect::<Result<_>>()?;
    let dim = mats[0].nrows();
    if mats.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
        return Err(Error::ShapeMismatch("A blocks must share one square shape".into()));
    }
    let srcs: Option<Vec<CVec>> = match b_blocks {
        None => None,
        Some(bs) => {
            if bs.len() != segments {
                return Err(Error::ShapeMismatch(format!(
                    "{} b blocks for {segments} segments",
                    bs.len()
                )));
            }
            Some(bs.iter().map(|v| vec_from_entries(v)).collect())
        }
    };

    // Piecewise-constant data admits exact margins: per-block eigensolves.
    let mut eta_auto = f64::INFINITY;
    let mut alpha_a_auto: f64 = 0.0;
    for m in &mats {
        eta_auto = eta_auto.min(-lambda_max_hermitian(&hermitian_part(m))?);
        alpha_a_auto = alpha_a_auto.max(spectral_norm(m));
    }
    let eta = match eta {
        Some(e) => {
            if eta_auto < e - 1e-10 * alpha_a_auto {
                return Err(Error::InvalidProblem(format!(
                    "declared eta = {e} not supported by the blocks (measured {eta_auto:.6})"
                )));
            }
            e
        }
        None => {
            if eta_auto <= 0.0 {
                return Err(Error::InvalidProblem(format!(
                    "blocks are not dissipative: measured eta = {eta_auto:.3e}"
                )));
            }
            eta_auto
        }
    };
    let alpha_a = alpha_a.unwrap_or(alpha_a_auto);
    let alpha_b_auto = srcs
        .as_ref()
        .map(|s| s.iter().map(|v| v.norm()).fold(0.0, f64::max))
        .unwrap_or(0.0);
    let alpha_b = alpha_b.unwrap_or(alpha_b_auto);

    let t_final = *times.last().unwrap();
    let segment_of = {
        let times = times.to_vec();
        move |t: f64| -> usize {
            let k = times.partition_point(|&edge| edge <= t);
            k.saturating_sub(1).min(times.len() - 2)
        }
    };

    let generator = if mats.len() == 1 {
        Generator::Constant(mats[0].clone())
    } else {
        let mats = mats.clone();
        let seg = segment_of.clone();
        Generator::Varying(Arc::new(move |t| mats[seg(t)].clone()))
    };
    let source = match srcs {
        None => Source::Zero,
        Some(s) if s.len() == 1 => {
            if s[0].norm() == 0.0 {
                Source::Zero
            } else {
                Source::Constant(s[0].clone())
            }
        }
        Some(s) => {
            let seg = segment_of;
            Source::Varying(Arc::new(move |t| s[seg(t)].clone()))
        }
    };

    let interior = times[1..times.len() - 1].to_vec();
    Ok(DissipativeOdeProblem::new(
        dim,
        generator,
        source,
        vec_from_entries(u0),
        t_final,
        eta,
        alpha_a,
        alpha_b,
    )?
    .with_breakpoints(interior))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_decay() -> DissipativeOdeProblem {
        DissipativeOdeProblem::from_constant(
            CMat::from_element(1, 1, creal(-1.0)),
            None,
            CVec::from_element(1, creal(1.0)),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn certify_minus_identity() {
        // A = −I in dimension 2 with declared eta = 1.
        let a = CMat::identity(2, 2) * creal(-1.0);
        let p = DissipativeOdeProblem::from_constant(
            a,
            None,
            CVec::from_element(2, creal(0.5)),
            2.0,
        )
        .unwrap();
        let grid = default_certification_grid(&p);
        let rep = certify_dissipativity(&p, &grid).unwrap();
        assert_relative_eq!(rep.measured_eta, 1.0, max_relative = 1e-12);
        assert!(rep.pass);
    }

    #[test]
    fn certify_rejects_sheared_matrix() {
        // (A + A†)/2 for [[-1, 5], [0, -1]] has lambda_max = 1.5 > −1.
        let a = crate::linalg::cmat_from_real(&[&[-1.0, 5.0], &[0.0, -1.0]]);
        let p = DissipativeOdeProblem::new(
            2,
            Generator::Constant(a),
            Source::Zero,
            CVec::from_element(2, creal(1.0)),
            1.0,
            1.0,
            6.0,
            0.0,
        )
        .unwrap();
        let grid = default_certification_grid(&p);
        let rep = certify_dissipativity(&p, &grid).unwrap();
        assert_relative_eq!(rep.measured_eta, -1.5, max_relative = 1e-12);
        assert!(!rep.pass);
    }

    #[test]
    fn heat_1d_margin() {
        let p = make_heat_problem(1.0, 0.0, 1, 4, Potential::Zero, HeatSource::Zero, 1.0).unwrap();
        assert_eq!(p.dim(), 5);
        let grid = default_certification_grid(&p);
        let rep = certify_dissipativity(&p, &grid).unwrap();
        // Sharp value 4·16·sin²(π/12) ≈ 4.287, above both the declared margin
        // and the 8·16/36 ≈ 3.556 bound on A + A†.
        let sharp = 64.0 * (std::f64::consts::PI / 12.0).sin().powi(2);
        assert_relative_eq!(rep.measured_eta, sharp, max_relative = 1e-10);
        assert!(rep.measured_eta >= 8.0 * 16.0 / 36.0);
        assert!(rep.pass);
    }

    #[test]
    fn heat_2d_is_kronecker_sum() {
        let p = make_heat_problem(1.0, 0.0, 2, 2, Potential::Zero, HeatSource::Zero, 1.0).unwrap();
        assert_eq!(p.dim(), 9);
        let l1 = second_difference(2);
        let expect = l1.kronecker(&identity(3)) + identity(3).kronecker(&l1);
        assert!(spectral_norm(&(p.a(0.0) - expect)) < 1e-12);
    }

    #[test]
    fn advection_does_not_change_margin() {
        let base = make_heat_problem(1.0, 0.0, 1, 4, Potential::Zero, HeatSource::Zero, 1.0).unwrap();
        let adv = make_heat_problem(1.0, 1.0, 1, 4, Potential::Zero, HeatSource::Zero, 1.0).unwrap();
        let g = default_certification_grid(&base);
        let e0 = certify_dissipativity(&base, &g).unwrap().measured_eta;
        let e1 = certify_dissipativity(&adv, &g).unwrap().measured_eta;
        // D is anti-Hermitian, so A + A† is unchanged.
        assert_relative_eq!(e0, e1, max_relative = 1e-12);
    }

    #[test]
    fn heat_rejects_positive_potential() {
        let err = make_heat_problem(
            1.0,
            0.0,
            1,
            4,
            Potential::Static(Arc::new(|_x| 0.5)),
            HeatSource::Zero,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonpositivityViolation { .. }));
    }

    #[test]
    fn non_hermitian_margin_from_damping() {
        // H = σ_x, L = −I: A + A† = −2I exactly.
        let sx = crate::linalg::cmat_from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let l = CMat::identity(2, 2) * creal(-1.0);
        let u0 = CVec::from_fn(2, |i, _| creal(if i == 0 { 1.0 } else { 0.0 }));
        let p = make_non_hermitian_problem(
            Generator::Constant(sx),
            Generator::Constant(l),
            u0,
            1.0,
            None,
        )
        .unwrap();
        assert_relative_eq!(p.eta(), 1.0, max_relative = 1e-12);
        let two_l = p.a(0.0) + p.a(0.0).adjoint();
        assert!(spectral_norm(&(two_l + identity(2) * creal(2.0))) < 1e-12);
    }

    #[test]
    fn non_hermitian_rejects_indefinite_damping() {
        let h = CMat::zeros(2, 2);
        let l = crate::linalg::cmat_from_real(&[&[-1.0, 0.0], &[0.0, 0.5]]);
        let err = make_non_hermitian_problem(
            Generator::Constant(h),
            Generator::Constant(l),
            CVec::from_element(2, creal(1.0)),
            1.0,
            Some(0.5),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotNegativeDefinite { .. }));
    }

    #[test]
    fn json_custom_round_trip() {
        let spec = ProblemSpec::parse(
            r#"{
                "kind": "custom_matrix_list",
                "times": [0.0, 0.5, 1.0],
                "a_blocks": [[[-1.0]], [[[-2.0, 0.5]]]],
                "b_blocks": [[1.0], [[0.0, 1.0]]],
                "u0": [1.0]
            }"#,
        )
        .unwrap();
        let p = spec.build().unwrap();
        assert_eq!(p.dim(), 1);
        assert_relative_eq!(p.eta(), 1.0, max_relative = 1e-12);
        assert_eq!(p.breakpoints(), &[0.5]);
        assert_eq!(p.a(0.75)[(0, 0)], C64::new(-2.0, 0.5));
        assert_eq!(p.b(0.75)[0], C64::new(0.0, 1.0));
    }

    #[test]
    fn json_rejects_undissipative_blocks() {
        let spec = ProblemSpec::parse(
            r#"{"kind": "custom_matrix_list", "times": [0.0, 1.0],
                "a_blocks": [[[0.0]]], "u0": [1.0]}"#,
        )
        .unwrap();
        assert!(spec.build().is_err());
    }

    #[test]
    fn scalar_helper_is_homogeneous() {
        let p = scalar_decay();
        assert!(p.is_homogeneous());
        assert!(p.is_time_independent());
        assert_relative_eq!(p.alpha_a(), 1.0, max_relative = 1e-12);
    }
}
