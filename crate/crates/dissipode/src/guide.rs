// Copyright 2026 Dissipode Contributors
// SPDX-License-Identifier: Apache-2.0

//! The user guide, compiled from the mdbook sources in `book/`.
//!
//! Each chapter is included as a module doc so its code blocks run as
//! doc-tests; `cargo test --doc` therefore keeps the book and the library
//! in lockstep. Render the standalone book with `mdbook build book/`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/dissipative-odes.md")]
pub mod dissipative_odes {}

#[doc = include_str!("../../../book/src/schemes.md")]
pub mod schemes {}

#[doc = include_str!("../../../book/src/all-at-once.md")]
pub mod all_at_once {}

#[doc = include_str!("../../../book/src/cost-model.md")]
pub mod cost_model {}

#[doc = include_str!("../../../book/src/block-encodings.md")]
pub mod block_encodings {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
