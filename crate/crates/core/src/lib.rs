//! Model-based deformable registration of paired inflated/deflated lobe
//! models and analysis of the resulting deformation fields.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line
//! live in the `pneumoreg` companion crate.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod distance;
pub mod error;
pub mod geometry;
pub mod phantom;
pub mod registration;

pub use error::{Error, Result};
