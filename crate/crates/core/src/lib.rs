//! Prediction and explanation of visitation flows between business clusters
//! and residential neighborhoods.
//!
//! The pipeline: detect clusters from POIs (`clustering`), build multimodal
//! travel-cost matrices (`transport`), calibrate gravity/Huff baselines
//! (`classic`), train a cost-modified graph-attention flow model on a Poisson
//! objective (`model` on top of `autodiff`), and attribute its predictions to
//! input features (`xai`). `synthcity` generates ground-truth scenarios for
//! validation.

pub mod autodiff;
pub mod classic;
pub mod clustering;
pub mod domain;
pub mod simgat;
pub mod synthcity;
pub mod transport;
pub mod xai;

#[cfg(test)]
pub(crate) mod testutil;

pub use autodiff::{Tape, Tensor, Var};
