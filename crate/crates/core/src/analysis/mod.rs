//! Closed-form locally orderless estimators, local-histogram probes and
//! input-gradient saliency.

mod estimators;
mod grad2;
mod histogram;
mod saliency;

pub use estimators::{
    area_estimator, calibrate, circumference_estimator, raw_area, raw_circumference, Calibration, EstimatorKind,
    CALIBRATION_RADII, DEFAULT_K_SCALE, DEFAULT_TONAL_SIGMA,
};
pub use grad2::{
    grad2_estimator, gradient_magnitude_squared, relative_rmse, Grad2Estimate, Grad2Params, OUTSIDE_WARNING_FRACTION,
};
pub use histogram::{local_histogram, lus_expectation, HistogramProbe, HistogramStack, Normalization};
pub use saliency::{boundary_band, boundary_mass_ratio, saliency, SaliencyMap, BOUNDARY_BAND};

use crate::error::Result;
use crate::image::{gaussian_kernel, BoundaryMode, Image, Kernel};

/// Truncation radius used for Gaussian kernels at scale `sigma`.
pub fn gaussian_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil().max(1.0) as usize
}

/// Normalised Gaussian aggregation kernel, or `None` for the delta at scale 0.
fn aggregation_kernel(scale: f64) -> Result<Option<Kernel>> {
    if scale == 0.0 {
        Ok(None)
    } else {
        gaussian_kernel(scale, gaussian_radius(scale)).map(Some)
    }
}

fn aggregate(img: Image, w: &Option<Kernel>) -> Result<Image> {
    match w {
        None => Ok(img),
        Some(k) => crate::image::convolve(&img, k, BoundaryMode::Reflect),
    }
}
