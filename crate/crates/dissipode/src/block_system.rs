// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! The padded all-at-once system: block lower-bidiagonal assembly, exact
//! forward elimination, inverse blocks, and the norm / condition-number
//! bounds that drive the cost model.
//!
//! Block layout for M evolution steps and Mp final-state copies
//! (Mp = 1 means no padding): block row 0 is the identity row carrying u0,
//! rows 1..=M carry (−R_{j}, L_{j}) and v_j, and the last Mp−1 rows carry
//! (−I, I) with zero right-hand side, so the solution ends in Mp copies of
//! the final state.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{creal, identity, sigma_min, spectral_norm, try_inverse, CMat, CVec};
use crate::ode_model::DissipativeOdeProblem;
use crate::reference_oracle;
use crate::schemes::{step_operators, SchemeKind};

/// Dense-diagnostics guard on the total dimension (M+Mp)·N.
pub const DENSE_GUARD: usize = 4096;

/// Per-step solution blocks of an all-at-once solve (or of the reference
/// oracle), with padding blocks equal to the final state.
#[derive(Clone, Debug)]
pub struct SolutionBundle {
    blocks: Vec<CVec>,
    norms: Vec<f64>,
    h: f64,
    m: usize,
    mp: usize,
    residual: Option<f64>,
}

impl SolutionBundle {
    pub fn from_blocks(
        blocks: Vec<CVec>,
        h: f64,
        m: usize,
        mp: usize,
        residual: Option<f64>,
    ) -> Self {
        let norms = blocks.iter().map(|b| b.norm()).collect();
        Self {
            blocks,
            norms,
            h,
            m,
            mp,
            residual,
        }
    }

    pub fn blocks(&self) -> &[CVec] {
        &self.blocks
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// First M+1 blocks: the history view u_0..u_M.
    pub fn history(&self) -> &[CVec] {
        &self.blocks[..=self.m]
    }

    /// Block index M: the final-state view.
    pub fn final_block(&self) -> &CVec {
        &self.blocks[self.m]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mp(&self) -> usize {
        self.mp
    }

    pub fn residual(&self) -> Option<f64> {
        self.residual
    }
}

/// The block lower-bidiagonal system A_{M,Mp−1} u = b_{M,Mp−1}.
#[derive(Clone)]
pub struct AllAtOnceSystem {
    problem: Arc<DissipativeOdeProblem>,
    scheme: SchemeKind,
    m: usize,
    mp: usize,
    dim: usize,
    h: f64,
    /// L-blocks, length M+Mp; entry 0 is the identity row (L_{−1} = I).
    diag_blocks: Vec<CMat>,
    /// R-blocks, length M+Mp−1; the dense form carries −R on the
    /// sub-diagonal. The trailing Mp−1 entries are identities.
    sub_blocks: Vec<CMat>,
    /// Right-hand side [u0, v_0, …, v_{M−1}, 0, …, 0], length M+Mp.
    rhs_blocks: Vec<CVec>,
}

/// Assemble the padded all-at-once system with M evolution rows and Mp−1
/// padding rows from the scheme's step operators.
pub fn assemble(
    problem: &Arc<DissipativeOdeProblem>,
    scheme: SchemeKind,
    m: usize,
    mp: usize,
    h: f64,
) -> Result<AllAtOnceSystem> {
    if m < 1 || mp < 1 {
        return Err(Error::InvalidConfig("need M ≥ 1 and Mp ≥ 1".into()));
    }
    let mh = m as f64 * h;
    let t = problem.t_final();
    if (mh - t).abs() > 1e-12 * t.max(1.0) {
        return Err(Error::StepCountMismatch { mh, t_final: t });
    }
    let n = problem.dim();
    let rows = m + mp;
    let mut diag_blocks = Vec::with_capacity(rows);
    let mut sub_blocks = Vec::with_capacity(rows - 1);
    let mut rhs_blocks = Vec::with_capacity(rows);

    diag_blocks.push(identity(n));
    rhs_blocks.push(problem.u0().clone());
    for j in 0..m {
        let ops = step_operators(problem, scheme, j, h)?;
        diag_blocks.push(ops.l);
        sub_blocks.push(ops.r);
        rhs_blocks.push(ops.v);
    }
    for _ in 0..mp - 1 {
        diag_blocks.push(identity(n));
        sub_blocks.push(identity(n));
        rhs_blocks.push(CVec::zeros(n));
    }

    Ok(AllAtOnceSystem {
        problem: Arc::clone(problem),
        scheme,
        m,
        mp,
        dim: n,
        h,
        diag_blocks,
        sub_blocks,
        rhs_blocks,
    })
}

/// Spectral-norm bound for a block matrix from the grid of its block norms:
/// √((max column sum) · (max row sum)).
pub fn block_norm_bound(norm_grid: &DMatrix<f64>) -> Result<f64> {
    if norm_grid.nrows() != norm_grid.ncols() || norm_grid.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "block norm grid must be square and nonempty, got {}x{}",
            norm_grid.nrows(),
            norm_grid.ncols()
        )));
    }
    if norm_grid.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidConfig(
            "block norm grid entries must be finite and nonnegative".into(),
        ));
    }
    let max_row = (0..norm_grid.nrows())
        .map(|i| norm_grid.row(i).iter().sum::<f64>())
        .fold(0.0, f64::max);
    let max_col = (0..norm_grid.ncols())
        .map(|j| norm_grid.column(j).iter().sum::<f64>())
        .fold(0.0, f64::max);
    Ok((max_row * max_col).sqrt())
}

/// Norm and condition-number bounds from the condition-number lemma.
#[derive(Clone, Copy, Debug)]
pub struct KappaBound {
    /// 2 + max_j ‖L_j‖ + max_j ‖R_j‖.
    pub norm_bound: f64,
    /// (2eM/(ηT) + Mp) · (1 + max_j ‖L_j⁻¹‖).
    pub inv_bound: f64,
    /// Product of the two.
    pub kappa: f64,
}

impl AllAtOnceSystem {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mp(&self) -> usize {
        self.mp
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn problem(&self) -> &Arc<DissipativeOdeProblem> {
        &self.problem
    }

    pub fn block_rows(&self) -> usize {
        self.m + self.mp
    }

    pub fn total_dim(&self) -> usize {
        self.block_rows() * self.dim
    }

    pub fn diag_block(&self, i: usize) -> &CMat {
        &self.diag_blocks[i]
    }

    pub fn sub_block(&self, i: usize) -> &CMat {
        &self.sub_blocks[i]
    }

    pub fn rhs_block(&self, i: usize) -> &CVec {
        &self.rhs_blocks[i]
    }

    /// Dense realization (diagnostics only, guarded at 4096).
    pub fn to_dense(&self) -> Result<CMat> {
        let total = self.total_dim();
        if total > DENSE_GUARD {
            return Err(Error::DimensionGuardExceeded {
                dim: total,
                guard: DENSE_GUARD,
            });
        }
        let n = self.dim;
        let mut dense = CMat::zeros(total, total);
        for (row, l) in self.diag_blocks.iter().enumerate() {
            dense.view_mut((row * n, row * n), (n, n)).copy_from(l);
        }
        for (row, r) in self.sub_blocks.iter().enumerate() {
            dense
                .view_mut(((row + 1) * n, row * n), (n, n))
                .copy_from(&(r * creal(-1.0)));
        }
        Ok(dense)
    }

    pub fn dense_rhs(&self) -> CVec {
        let n = self.dim;
        let mut rhs = CVec::zeros(self.total_dim());
        for (row, b) in self.rhs_blocks.iter().enumerate() {
            rhs.rows_mut(row * n, n).copy_from(b);
        }
        rhs
    }

    /// Exact block forward elimination: u_0 = u0, u_{j+1} = L_j⁻¹(R_j u_j + v_j),
    /// padding rows copy the final state.
    pub fn forward_solve(&self) -> Result<SolutionBundle> {
        let rows = self.block_rows();
        let mut blocks: Vec<CVec> = Vec::with_capacity(rows);
        blocks.push(self.rhs_blocks[0].clone());
        for row in 1..=self.m {
            let rhs = &self.sub_blocks[row - 1] * &blocks[row - 1] + &self.rhs_blocks[row];
            let next = crate::linalg::lu_solve_vec(&self.diag_blocks[row], &rhs, row)?;
            blocks.push(next);
        }
        for _ in 0..self.mp - 1 {
            blocks.push(blocks[self.m].clone());
        }

        // Blockwise residual ‖A x − b‖ relative to ‖b‖.
        let mut res_sq = (&self.diag_blocks[0] * &blocks[0] - &self.rhs_blocks[0]).norm_squared();
        for row in 1..rows {
            let r = &self.diag_blocks[row] * &blocks[row]
                - &self.sub_blocks[row - 1] * &blocks[row - 1]
                - &self.rhs_blocks[row];
            res_sq += r.norm_squared();
        }
        let residual = res_sq.sqrt();

        Ok(SolutionBundle::from_blocks(
            blocks,
            self.h,
            self.m,
            self.mp,
            Some(residual),
        ))
    }

    /// Block (i, j) of the inverse from the Gaussian-elimination formula
    /// B_{i,j} = 1_{i≥j} (∏_{l=j}^{i−1} L_l⁻¹ R_l) L_{j−1}⁻¹ with L_{−1} = I
    /// (larger l leftmost in the product).
    pub fn inverse_block(&self, i: usize, j: usize) -> Result<CMat> {
        let rows = self.block_rows();
        if i >= rows || j >= rows {
            return Err(Error::IndexOutOfRange { i, j, rows });
        }
        let n = self.dim;
        if i < j {
            return Ok(CMat::zeros(n, n));
        }
        // L_{j−1} is diag_blocks[j]; L_l is diag_blocks[l+1], R_l sub_blocks[l].
        let mut acc = try_inverse(&self.diag_blocks[j], j)?;
        for l in j..i {
            let step = crate::linalg::lu_solve(&self.diag_blocks[l + 1], &self.sub_blocks[l], l + 1)?;
            acc = step * acc;
        }
        Ok(acc)
    }

    /// Exact condition number σ_max/σ_min of the dense realization.
    pub fn kappa_exact(&self) -> Result<f64> {
        let dense = self.to_dense()?;
        let (max, min) = crate::linalg::sigma_extremes(&dense)?;
        Ok(if min > 0.0 { max / min } else { f64::INFINITY })
    }

    /// The condition-number lemma bounds. The hypothesis
    /// e_prop(j) ≤ ½ηh·e^{−ηh} is verified by measurement at every evolution
    /// step before any bound is emitted (one step suffices for constant A).
    pub fn kappa_bound(&self, eta: f64, t_final: f64) -> Result<KappaBound> {
        if !(eta > 0.0) {
            return Err(Error::HypothesisViolated {
                step: 0,
                measured: f64::INFINITY,
                threshold: 0.0,
            });
        }
        let h = self.h;
        let eta_h = eta * h;
        if eta_h > 1.0 {
            return Err(Error::StepConditionViolated { eta_h });
        }
        let threshold = 0.5 * eta_h * (-eta_h).exp();
        let oracle_tol = (threshold / 200.0).min(1e-10);
        if oracle_tol < reference_oracle::ORACLE_TOL_FLOOR {
            return Err(Error::OracleToleranceTooCoarse {
                oracle_tol: reference_oracle::ORACLE_TOL_FLOOR,
                threshold,
            });
        }
        let steps: Vec<usize> = if self.problem.is_time_independent() {
            vec![0]
        } else {
            (0..self.m).collect()
        };
        for j in steps {
            let prop = reference_oracle::propagator(
                &self.problem,
                j as f64 * h,
                (j + 1) as f64 * h,
                oracle_tol,
            )?;
            let l_inv_r =
                crate::linalg::lu_solve(&self.diag_blocks[j + 1], &self.sub_blocks[j], j + 1)?;
            let measured = spectral_norm(&(l_inv_r - prop.matrix)) + prop.error_estimate;
            if measured > threshold {
                return Err(Error::HypothesisViolated {
                    step: j,
                    measured,
                    threshold,
                });
            }
        }

        Ok(self.kappa_bound_unchecked(eta, t_final))
    }

    /// The lemma's arithmetic without the hypothesis measurement; callers
    /// must have verified the hypothesis themselves.
    pub fn kappa_bound_unchecked(&self, eta: f64, t_final: f64) -> KappaBound {
        let max_l = self
            .diag_blocks
            .iter()
            .map(spectral_norm)
            .fold(0.0, f64::max);
        let max_r = self
            .sub_blocks
            .iter()
            .map(spectral_norm)
            .fold(0.0, f64::max);
        let max_l_inv = self
            .diag_blocks
            .iter()
            .map(|l| 1.0 / sigma_min(l))
            .fold(0.0, f64::max);
        let norm_bound = 2.0 + max_l + max_r;
        let inv_bound = (2.0 * std::f64::consts::E * self.m as f64 / (eta * t_final)
            + self.mp as f64)
            * (1.0 + max_l_inv);
        KappaBound {
            norm_bound,
            inv_bound,
            kappa: norm_bound * inv_bound,
        }
    }

    /// Diagnostic fault injection used by the verify suite: perturb one
    /// padding sub-block so the padding-copy invariant must fail.
    pub fn inject_padding_fault(&mut self, magnitude: f64) -> Result<()> {
        if self.mp < 2 {
            return Err(Error::InvalidConfig(
                "fault injection needs at least one padding row (Mp ≥ 2)".into(),
            ));
        }
        let idx = self.sub_blocks.len() - 1;
        self.sub_blocks[idx][(0, 0)] += creal(magnitude);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_problem(t_final: f64) -> Arc<DissipativeOdeProblem> {
        Arc::new(
            DissipativeOdeProblem::from_constant(
                CMat::from_element(1, 1, creal(-1.0)),
                None,
                CVec::from_element(1, creal(1.0)),
                t_final,
            )
            .unwrap(),
        )
    }

    #[test]
    fn euler_dense_form() {
        let p = scalar_problem(1.0);
        let sys = assemble(&p, SchemeKind::Euler, 2, 1, 0.5).unwrap();
        let dense = sys.to_dense().unwrap();
        let expect = crate::linalg::cmat_from_real(&[
            &[1.0, 0.0, 0.0],
            &[-0.5, 1.0, 0.0],
            &[0.0, -0.5, 1.0],
        ]);
        assert!(spectral_norm(&(dense - expect)) < 1e-14);
        let rhs = sys.dense_rhs();
        assert_eq!(rhs[0].re, 1.0);
        assert_eq!(rhs[1].re, 0.0);
    }

    #[test]
    fn padding_rows_are_identity_pairs() {
        let p = scalar_problem(1.0);
        let sys = assemble(&p, SchemeKind::Euler, 2, 3, 0.5).unwrap();
        assert_eq!(sys.block_rows(), 5);
        for row in 3..5 {
            assert_eq!(sys.diag_block(row)[(0, 0)].re, 1.0);
            assert_eq!(sys.sub_block(row - 1)[(0, 0)].re, 1.0);
            assert_eq!(sys.rhs_block(row)[0].re, 0.0);
        }
    }

    #[test]
    fn assemble_rejects_step_mismatch() {
        let p = scalar_problem(1.0);
        assert!(matches!(
            assemble(&p, SchemeKind::Euler, 3, 1, 0.5),
            Err(Error::StepCountMismatch { .. })
        ));
    }

    #[test]
    fn forward_solve_scalar_recurrence() {
        let p = scalar_problem(1.0);
        let sys = assemble(&p, SchemeKind::Euler, 2, 1, 0.5).unwrap();
        let sol = sys.forward_solve().unwrap();
        let expect = [1.0, 0.5, 0.25];
        for (b, e) in sol.blocks().iter().zip(expect) {
            assert_relative_eq!(b[0].re, e, max_relative = 1e-14);
        }
        assert!(sol.residual().unwrap() <= 1e-10 * sys.dense_rhs().norm() * 3.0);
    }

    #[test]
    fn forward_solve_copies_padding() {
        let p = scalar_problem(1.0);
        let sys = assemble(&p, SchemeKind::Euler, 2, 2, 0.5).unwrap();
        let sol = sys.forward_solve().unwrap();
        assert_eq!(sol.blocks().len(), 4);
        assert_eq!(sol.blocks()[3], sol.blocks()[2]);
        assert_relative_eq!(sol.final_block()[0].re, 0.25, max_relative = 1e-14);
    }

    #[test]
    fn trapezoid_single_step() {
        let p = scalar_problem(0.5);
        let sys = assemble(&p, SchemeKind::Trapezoidal, 1, 1, 0.5).unwrap();
        let sol = sys.forward_solve().unwrap();
        assert_relative_eq!(sol.final_block()[0].re, 0.6, max_relative = 1e-14);
    }

    #[test]
    fn inverse_block_cases() {
        let p = scalar_problem(1.0);
        let sys = assemble(&p, SchemeKind::Euler, 2, 1, 0.5).unwrap();
        // i < j: zero; i = j: L_{j−1}⁻¹ = I; chain: 0.5·0.5·1 = 0.25.
        assert_eq!(sys.inverse_block(0, 2).unwrap()[(0, 0)].re, 0.0);
        assert_eq!(sys.inverse_block(1, 1).unwrap()[(0, 0)].re, 1.0);
        assert_relative_eq!(
            sys.inverse_block(2, 0).unwrap()[(0, 0)].re,
            0.25,
            max_relative = 1e-14
        );
        assert!(matches!(
            sys.inverse_block(5, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn inverse_blocks_match_dense_inverse() {
        let p = scalar_problem(1.0);
        let sys = assemble(&p, SchemeKind::Trapezoidal, 4, 2, 0.25).unwrap();
        let dense = sys.to_dense().unwrap();
        let inv = dense.try_inverse().unwrap();
        let n = sys.dim();
        for i in 0..sys.block_rows() {
            for j in 0..sys.block_rows() {
                let block = sys.inverse_block(i, j).unwrap();
                let view = inv.view((i * n, j * n), (n, n)).clone_owned();
                assert!(spectral_norm(&(block - view)) < 1e-9);
            }
        }
    }

    #[test]
    fn block_norm_bound_examples() {
        let single = DMatrix::from_element(1, 1, 3.0);
        assert_relative_eq!(block_norm_bound(&single).unwrap(), 3.0);
        // Stacked unit blocks [I; I], padded square with zeros: bound √2.
        let stacked = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert_relative_eq!(
            block_norm_bound(&stacked).unwrap(),
            2.0f64.sqrt(),
            max_relative = 1e-14
        );
        let bad = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(block_norm_bound(&bad).is_err());
    }

    #[test]
    fn kappa_bound_scalar_example() {
        let p = scalar_problem(1.0);
        let sys = assemble(&p, SchemeKind::Euler, 2, 1, 0.5).unwrap();
        let kb = sys.kappa_bound(1.0, 1.0).unwrap();
        assert_relative_eq!(kb.norm_bound, 3.5, max_relative = 1e-12);
        let expect_inv = (4.0 * std::f64::consts::E + 1.0) * 2.0;
        assert_relative_eq!(kb.inv_bound, expect_inv, max_relative = 1e-12);
        let exact = sys.kappa_exact().unwrap();
        assert!(exact <= kb.kappa);
        assert!((2.0..2.1).contains(&exact), "kappa_exact = {exact}");
    }

    #[test]
    fn kappa_bound_padding_growth_is_affine() {
        let p = scalar_problem(1.0);
        let sys1 = assemble(&p, SchemeKind::Euler, 2, 2, 0.5).unwrap();
        let sys2 = assemble(&p, SchemeKind::Euler, 2, 4, 0.5).unwrap();
        let k1 = sys1.kappa_bound(1.0, 1.0).unwrap();
        let k2 = sys2.kappa_bound(1.0, 1.0).unwrap();
        let max_l_inv = 1.0;
        let delta = (k2.inv_bound - k1.inv_bound) / (1.0 + max_l_inv);
        assert_relative_eq!(delta, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn kappa_bound_rejects_coarse_steps() {
        // h = 1 on the scalar problem: e_prop = |e^{−1} − 0| far above
        // ½·e^{−1}... actually R = 1 + 1·(−1) = 0, so e_prop = e^{−1} = 0.3679
        // against threshold 0.5·e^{−1} = 0.1839.
        let p = scalar_problem(2.0);
        let sys = assemble(&p, SchemeKind::Euler, 2, 1, 1.0).unwrap();
        assert!(matches!(
            sys.kappa_bound(1.0, 2.0),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn identity_system_kappa_is_one() {
        // Pure-identity block matrix: M = 1 trivial step with R = 0 is not
        // expressible through a scheme, so build the padding-only shape via
        // the diagnostic zero problem and Mp = 1... the Euler step at h with
        // A ≡ 0 gives R = I; instead check the 1x1 identity row directly.
        let p = scalar_problem(1.0);
        let sys = assemble(&p, SchemeKind::Euler, 1, 1, 1.0).unwrap();
        let dense = sys.to_dense().unwrap();
        // R_0 = 1 + 1·(−1) = 0 exactly: the dense matrix is I_2.
        assert!(spectral_norm(&(dense - identity(2))) < 1e-14);
        assert_relative_eq!(sys.kappa_exact().unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn eta_zero_diagnostic_grows_linearly() {
        let diag = Arc::new(DissipativeOdeProblem::diagnostic_zero(1, 1.0));
        let kappas: Vec<f64> = [10usize, 20, 40]
            .iter()
            .map(|&m| {
                let sys = assemble(&diag, SchemeKind::Euler, m, 1, 1.0 / m as f64).unwrap();
                sys.kappa_exact().unwrap()
            })
            .collect();
        assert!(kappas[1] / kappas[0] > 1.7);
        assert!(kappas[2] / kappas[1] > 1.7);
    }
}
