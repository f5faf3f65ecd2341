use super::{gaussian_radius, local_histogram, lus_expectation, Normalization};
use crate::error::{argument, dimension, Result};
use crate::image::{convolve, gaussian_derivative_kernel, semigroup_scale, Axis, BoundaryMode, Image};

/// Share of derivative responses outside the bias grid that raises
/// [`Grad2Estimate::warning`].
pub const OUTSIDE_WARNING_FRACTION: f64 = 0.01;

/// Settings of the locally orderless gradient-magnitude-squared estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grad2Params {
    /// Scale of the derivative kernels.
    pub sigma_d: f64,
    /// Scale of the aggregation kernel `W`.
    pub gamma: f64,
    pub bins: usize,
    /// Bias spacing; by default a third of the largest absolute response, so
    /// the grid `b_i = (i - bins / 2) db` covers every response with a bin at 0.
    pub delta_b: Option<f64>,
    /// Tonal scale of the bell; by default `db / 3`.
    pub tonal_sigma: Option<f64>,
}

impl Default for Grad2Params {
    fn default() -> Self {
        Self { sigma_d: 3.0, gamma: 0.75, bins: 8, delta_b: None, tonal_sigma: None }
    }
}

impl Grad2Params {
    /// Scale at which the estimate is compared with the direct formula.
    pub fn matched_scale(&self) -> Result<f64> {
        semigroup_scale(self.gamma, self.sigma_d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grad2Estimate {
    pub image: Image,
    pub grid: Vec<f64>,
    pub tonal_sigma: f64,
    /// Fraction of derivative responses outside `[b_0, b_{N-1}]`.
    pub outside_fraction: f64,
    pub warning: bool,
}

fn derivative_responses(img: &Image, sigma: f64) -> Result<[Image; 2]> {
    let r = gaussian_radius(sigma);
    let kx = gaussian_derivative_kernel(sigma, Axis::X, r)?;
    let ky = gaussian_derivative_kernel(sigma, Axis::Y, r)?;
    Ok([convolve(img, &kx, BoundaryMode::Reflect)?, convolve(img, &ky, BoundaryMode::Reflect)?])
}

/// Direct `(I * Kx)^2 + (I * Ky)^2` with Gaussian derivative kernels at `sigma`.
pub fn gradient_magnitude_squared(img: &Image, sigma: f64) -> Result<Image> {
    let [gx, gy] = derivative_responses(img, sigma)?;
    gx.zip_map(&gy, |a, b| a * a + b * b)
}

/// `sum_k sum_i b_i^2 h_k(x, b_i)` over column-normalised local histograms of
/// the two derivative responses.
pub fn grad2_estimator(img: &Image, params: &Grad2Params) -> Result<Grad2Estimate> {
    if params.bins < 2 {
        return Err(argument("the bias grid needs at least 2 bins"));
    }
    let [gx, gy] = derivative_responses(img, params.sigma_d)?;
    let reach = gx.data().iter().chain(gy.data()).fold(0.0f64, |m, v| m.max(v.abs()));
    let db = match params.delta_b {
        Some(db) if db > 0.0 => db,
        Some(db) => return Err(argument(format!("bias spacing must be positive, got {db}"))),
        None if reach > 1e-12 * img.data().iter().fold(0.0f64, |m, v| m.max(v.abs())) => reach / 3.0,
        None => 1.0,
    };
    let tonal_sigma = params.tonal_sigma.unwrap_or(db / 3.0);
    let half = (params.bins / 2) as f64;
    let grid: Vec<f64> = (0..params.bins).map(|i| (i as f64 - half) * db).collect();
    let xi: Vec<f64> = grid.iter().map(|b| b * b).collect();
    let (lo, hi) = (grid[0], grid[params.bins - 1]);
    let outside = gx.data().iter().chain(gy.data()).filter(|&&v| v < lo || v > hi).count();
    let outside_fraction = outside as f64 / (2 * gx.len()) as f64;

    let r = gaussian_radius(params.sigma_d);
    let mut total: Option<Image> = None;
    for axis in [Axis::X, Axis::Y] {
        let k = gaussian_derivative_kernel(params.sigma_d, axis, r)?;
        let stack = local_histogram(img, &k, params.gamma, &grid, tonal_sigma)?;
        let part = lus_expectation(&stack, &xi, Normalization::Column)?;
        total = Some(match total {
            None => part,
            Some(t) => t.zip_map(&part, |a, b| a + b)?,
        });
    }
    Ok(Grad2Estimate {
        image: total.expect("two axes"),
        grid,
        tonal_sigma,
        outside_fraction,
        warning: outside_fraction >= OUTSIDE_WARNING_FRACTION,
    })
}

/// `||estimate - reference|| / ||reference||` over all pixels.
pub fn relative_rmse(estimate: &Image, reference: &Image) -> Result<f64> {
    if !estimate.same_shape(reference) {
        return Err(dimension("estimate and reference shapes differ"));
    }
    let err: f64 = estimate.data().iter().zip(reference.data()).map(|(a, b)| (a - b).powi(2)).sum();
    let norm: f64 = reference.data().iter().map(|b| b * b).sum();
    Ok((err / norm).sqrt())
}
