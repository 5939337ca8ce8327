// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! Property tests for the norm bound, the Matrix Market codec, and the
//! post-selection probability.

use dissipode::block_system::block_norm_bound;
use dissipode::linalg::{creal, spectral_norm, C64, CMat, CVec};
use dissipode::mm::{read_matrix_market, write_matrix_market};
use proptest::prelude::*;

fn complex_entry() -> impl Strategy<Value = C64> {
    (any::<i16>(), any::<i16>()).prop_map(|(re, im)| C64::new(re as f64 / 256.0, im as f64 / 256.0))
}

fn block_grid() -> impl Strategy<Value = (usize, usize, Vec<C64>)> {
    (1usize..=4, 1usize..=3).prop_flat_map(|(n, d)| {
        let len = n * n * d * d;
        (
            Just(n),
            Just(d),
            proptest::collection::vec(complex_entry(), len),
        )
    })
}

proptest! {
    /// The block 2-norm bound dominates the exact spectral norm of the
    /// assembled matrix, for any block pattern.
    #[test]
    fn block_norm_bound_dominates((n, d, entries) in block_grid()) {
        let block = |i: usize, j: usize| -> CMat {
            CMat::from_fn(d, d, |r, c| entries[((i * n + j) * d + r) * d + c])
        };
        let grid = nalgebra::DMatrix::from_fn(n, n, |i, j| spectral_norm(&block(i, j)));
        let bound = block_norm_bound(&grid).unwrap();
        let mut dense = CMat::zeros(n * d, n * d);
        for i in 0..n {
            for j in 0..n {
                dense.view_mut((i * d, j * d), (d, d)).copy_from(&block(i, j));
            }
        }
        let exact = spectral_norm(&dense);
        prop_assert!(bound >= exact - 1e-9 * (1.0 + exact),
            "bound {bound} < exact {exact}");
    }

    /// Matrix Market write/read is the identity on dense complex matrices.
    #[test]
    fn matrix_market_round_trip(
        rows in 1usize..6,
        cols in 1usize..6,
        entries in proptest::collection::vec(complex_entry(), 36),
    ) {
        let m = CMat::from_fn(rows, cols, |i, j| entries[i * 6 + j]);
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        let back = read_matrix_market(std::io::Cursor::new(buf)).unwrap();
        prop_assert_eq!(m, back);
    }

    /// Post-selection probability lies in [0, 1] and is 1/(M+1) when all
    /// block norms are equal and Mp = 1.
    #[test]
    fn success_probability_in_unit_interval(
        norms in proptest::collection::vec(0.0f64..4.0, 2..12),
        mp in 1usize..4,
    ) {
        prop_assume!(norms.iter().any(|&x| x > 0.0));
        let m = norms.len();
        let mut blocks: Vec<CVec> = norms
            .iter()
            .map(|&x| CVec::from_element(1, creal(x)))
            .collect();
        for _ in 0..mp - 1 {
            blocks.push(blocks[m - 1].clone());
        }
        let bundle = dissipode::block_system::SolutionBundle::from_blocks(
            blocks, 0.1, m - 1, mp, None,
        );
        let p = dissipode::analysis::success_probability(&bundle, m - 1, mp);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
    }
}

#[test]
fn uniform_norms_give_uniform_probability() {
    let blocks: Vec<CVec> = (0..5).map(|_| CVec::from_element(1, creal(0.7))).collect();
    let bundle = dissipode::block_system::SolutionBundle::from_blocks(blocks, 0.1, 4, 1, None);
    let p = dissipode::analysis::success_probability(&bundle, 4, 1);
    assert!((p - 0.2).abs() < 1e-12);
}
