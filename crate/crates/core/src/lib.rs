//! Viscoelastic thin beams: a one-dimensional minimizing-movement gradient
//! flow, the quadratic forms that feed it, and numerical checks linking it to
//! the scaled three-dimensional energy and dissipation.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam1d;
pub mod dimred;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod material;
pub mod quadforms;
pub mod quadrature;

pub use error::{Error, Result};
pub use linalg::{Matrix3, Tensor333, Tensor4};
pub use material::{DissipationLaw, ElasticLaw, MaterialModel, PowerPenalty};
pub use quadforms::{Channel, QuadForm3, QuadFormReduced, QuadFormSet, QuadFormSummary};
