use super::{aggregate, aggregation_kernel};
use crate::error::{argument, dimension, Result};
use crate::image::{convolve, BoundaryMode, Image, Kernel};
use crate::layers::Activation;

/// Soft local histogram `h(x, b_i) = (W * f(b_i - I * K))(x)` with the bell
/// `f` of tonal scale `sigma` and a normalised Gaussian `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramStack {
    pub grid: Vec<f64>,
    pub sigma: f64,
    /// Spatial scale of `W`; 0 is the delta.
    pub w_scale: f64,
    /// One map per bias.
    pub maps: Vec<Image>,
}

/// The histogram at a single pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramProbe {
    pub position: (usize, usize),
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub w_scale: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Divide each pixel's bins by their sum, giving a probability mass.
    Column,
    None,
}

impl HistogramStack {
    pub fn probe(&self, x: usize, y: usize) -> HistogramProbe {
        HistogramProbe {
            position: (x, y),
            grid: self.grid.clone(),
            values: self.maps.iter().map(|m| m.get(x, y)).collect(),
            w_scale: self.w_scale,
            sigma: self.sigma,
        }
    }

    /// Per-pixel sum over bins times the grid spacing (uniform grids).
    pub fn mass(&self) -> Result<Image> {
        let db = match self.grid.as_slice() {
            [a, b, ..] => b - a,
            _ => 1.0,
        };
        let mut total = self.maps[0].scale(db);
        for m in &self.maps[1..] {
            total = total.zip_map(m, |t, v| t + v * db)?;
        }
        Ok(total)
    }
}

pub fn local_histogram(img: &Image, k: &Kernel, w_scale: f64, grid: &[f64], sigma: f64) -> Result<HistogramStack> {
    if grid.is_empty() {
        return Err(argument("bias grid is empty"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(argument(format!("tonal scale must be positive, got {sigma}")));
    }
    if !(w_scale >= 0.0) {
        return Err(argument(format!("spatial scale must be non-negative, got {w_scale}")));
    }
    let response = convolve(img, k, BoundaryMode::Reflect)?;
    let w = aggregation_kernel(w_scale)?;
    let maps = grid
        .iter()
        .map(|&b| aggregate(response.map(|r| Activation::GaussBell.eval(b - r, sigma)), &w))
        .collect::<Result<Vec<_>>>()?;
    Ok(HistogramStack { grid: grid.to_vec(), sigma, w_scale, maps })
}

/// `sum_i xi(b_i) h(x, b_i)`, with `h` optionally normalised to unit mass per
/// pixel. Pixels whose histogram is empty yield 0.
pub fn lus_expectation(stack: &HistogramStack, xi: &[f64], norm: Normalization) -> Result<Image> {
    if xi.len() != stack.grid.len() || stack.maps.len() != xi.len() {
        return Err(dimension(format!("{} weights for {} bins", xi.len(), stack.grid.len())));
    }
    let first = &stack.maps[0];
    let mut weighted = vec![0.0; first.len()];
    let mut mass = vec![0.0; first.len()];
    for (m, &w) in stack.maps.iter().zip(xi) {
        for ((acc, tot), &h) in weighted.iter_mut().zip(mass.iter_mut()).zip(m.data()) {
            *acc += w * h;
            *tot += h;
        }
    }
    if norm == Normalization::Column {
        for (acc, &tot) in weighted.iter_mut().zip(&mass) {
            *acc = if tot > 0.0 { *acc / tot } else { 0.0 };
        }
    }
    Image::from_vec(first.width(), first.height(), weighted)
}
