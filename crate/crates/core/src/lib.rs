//! Locally orderless networks (LON): single-layer networks whose activations
//! are soft histogram bins of a filtered image, together with the matched
//! sigmoid/ReLU convolutional baseline, a small fixed-architecture gradient
//! engine, synthetic datasets and the closed-form estimators built on local
//! histograms.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod datasets;
mod error;
pub mod image;
pub mod layers;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use image::{BoundaryMode, Image, Kernel};
