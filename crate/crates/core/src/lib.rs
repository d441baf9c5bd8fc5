//! Conformal deformations of the round sphere as a test bed for Yamabe constants,
//! Yamabe-Sobolev and logarithmic Sobolev inequalities, and diameter bounds driven by
//! integrals of positive scalar curvature.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod covering;
pub mod error;
pub mod harness;
pub mod sphere;
pub mod yamabe;

pub use error::{LabError, Result};
