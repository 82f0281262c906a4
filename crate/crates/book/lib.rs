//! The guide's chapters as modules, so `cargo test` runs every listing.

#[doc = include_str!("../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../book/src/losses.md")]
pub mod losses {}
#[doc = include_str!("../../book/src/certification.md")]
pub mod certification {}
#[doc = include_str!("../../book/src/ranking.md")]
pub mod ranking {}
#[doc = include_str!("../../book/src/bounds.md")]
pub mod bounds {}
#[doc = include_str!("../../book/src/low_noise.md")]
pub mod low_noise {}
#[doc = include_str!("../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../README.md")]
pub mod readme {}
