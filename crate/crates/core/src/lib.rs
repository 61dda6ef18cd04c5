//! Gaussian-state simulation toolkit for microwave quantum radar.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod criteria;
pub mod eom;
pub mod error;
pub mod gaussian;
pub mod jpa;
pub mod langevin;
pub mod oe;
pub mod receiver;

pub use error::{Error, Result};
pub use gaussian::{
    GaussianChannel, GaussianState, PhaseSpaceGrid, Sampler, SymplecticForm, WignerField,
};
