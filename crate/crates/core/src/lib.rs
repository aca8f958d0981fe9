//! Rule induction (FOIL, RIPPER, CART) and an explainable voting ensemble that
//! consults a black-box decider only when the rule learners disagree.

pub mod data;
pub mod decider;
pub mod error;
pub mod experiment;
pub mod foil;
pub mod gbt;
pub mod metrics;
pub mod preprocess;
pub mod ripper;
pub mod rules;
pub mod scalar;
pub mod search;
pub mod tree;
pub mod voting;

pub use error::{Error, Result};
pub use scalar::{Fraction, Number, Scalar};

pub type Gbt = gbt::GbtModel<f64>;
pub type GbtF32 = gbt::GbtModel<f32>;
