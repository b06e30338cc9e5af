//! Compiles every code sample in the guide under `book/src` and in the README as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/images.md")]
pub mod images {}

#[doc = include_str!("../../../book/src/inpainting.md")]
pub mod inpainting {}

#[doc = include_str!("../../../book/src/analytic-masks.md")]
pub mod analytic_masks {}

#[doc = include_str!("../../../book/src/sparsification.md")]
pub mod sparsification {}

#[doc = include_str!("../../../book/src/coarse-to-fine.md")]
pub mod coarse_to_fine {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
