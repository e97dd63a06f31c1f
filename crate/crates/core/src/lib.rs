//! Synthesis of internally stabilizing, optionally decentralized, dynamic
//! output-feedback controllers for discrete-time LTI plants.
//!
//! The pipeline runs pole placement, a doubly-coprime factorization, a
//! right H∞ filtering LMI for the Bezout residual, a built-in
//! interior-point SDP solve, and recovery of the controller `K = Y X⁻¹`
//! with closed-loop certificates.

// `!(a < b)` is used on purpose so that NaN takes the failing branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod coprime;
pub mod linalg;
pub mod lmi;
pub mod rng;
pub mod sdp;
pub mod statespace;
pub mod synthesis;

pub use linalg::{CMatrix, Matrix};
pub use statespace::{StateSpace, SystemError};
