//! Dense single-channel rasters, kernels and convolution.

pub(crate) mod convolve;
pub mod io;
mod kernel;

pub use convolve::{convolve, convolve_adjoint, convolve_separable, gaussian_blur, kernel_gradient, BoundaryMode};
pub use kernel::{gaussian_derivative_kernel, gaussian_kernel, gaussian_taps, semigroup_scale, Axis, Kernel};

use crate::error::{argument, dimension, Result};

/// Row-major 2-D image of `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// All-zero image. Both sides must be positive.
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(argument(format!("image sides must be positive, got {width}x{height}")));
        }
        Ok(Self { width, height, data: vec![value; width * height] })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(argument(format!("image sides must be positive, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(dimension(format!("{} samples for a {width}x{height} image", data.len())));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut img = Self::zeros(width, height)?;
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(x, y);
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two images of equal shape.
    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Result<Image> {
        if !self.same_shape(other) {
            return Err(dimension(format!("{}x{} vs {}x{}", self.width, self.height, other.width, other.height)));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Image { width: self.width, height: self.height, data })
    }

    pub fn scale(&self, factor: f64) -> Image {
        self.map(|v| v * factor)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Image {
        let mut out = vec![0.0; self.data.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                out[x * self.height + y] = self.data[y * self.width + x];
            }
        }
        Image { width: self.height, height: self.width, data: out }
    }

    /// Rotation by 90 degrees: output(x', y') = input(y', W-1-x').
    pub fn rotate90(&self) -> Image {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0.0; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                // (x, y) lands at (h-1-y, x) in an h-wide image
                let nx = h - 1 - y;
                let ny = x;
                out[ny * h + nx] = self.data[y * w + x];
            }
        }
        Image { width: h, height: w, data: out }
    }

    /// Translates the content by (dx, dy), filling uncovered pixels with zero.
    pub fn shift(&self, dx: isize, dy: isize) -> Image {
        let mut out = vec![0.0; self.data.len()];
        for y in 0..self.height as isize {
            for x in 0..self.width as isize {
                let (sx, sy) = (x - dx, y - dy);
                if sx >= 0 && sy >= 0 && (sx as usize) < self.width && (sy as usize) < self.height {
                    out[y as usize * self.width + x as usize] = self.data[sy as usize * self.width + sx as usize];
                }
            }
        }
        Image { width: self.width, height: self.height, data: out }
    }
}
