use rand::Rng;

use crate::analysis::gradient_magnitude_squared;
use crate::error::Result;
use crate::image::Image;
use crate::rng::{stream_rng, Stream};

/// Scale of the Gaussian derivative kernels that define the target.
pub const GRAD_SIGMA: f64 = 1.0;
pub const MIN_SCALE: f64 = 0.5;
pub const MAX_SCALE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub input: Image,
    pub target: Image,
    pub scale_factor: f64,
}

/// `(I * Kx)^2 + (I * Ky)^2` with Gaussian derivative kernels at
/// [`GRAD_SIGMA`] (radius `3 sigma`, reflected borders).
pub fn grad2_target(img: &Image) -> Result<Image> {
    gradient_magnitude_squared(img, GRAD_SIGMA)
}

/// Scales image `i` by `u ~ U(0.5, 2)` drawn from its own substream and pairs
/// it with its gradient-magnitude-squared target.
pub fn make_grad_samples(images: &[Image], seed: u64) -> Result<Vec<GradSample>> {
    images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let u = stream_rng(seed, Stream::Scale, i as u64).gen_range(MIN_SCALE..MAX_SCALE);
            let input = img.scale(u);
            let target = grad2_target(&input)?;
            Ok(GradSample { input, target, scale_factor: u })
        })
        .collect()
}
