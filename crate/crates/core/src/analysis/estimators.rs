use std::f64::consts::PI;

use super::gaussian_radius;
use crate::datasets::{rasterize_ellipse, SHAPE_SIDE};
use crate::error::{argument, Result};
use crate::image::{gaussian_blur, BoundaryMode, Image};
use crate::layers::{normal_cdf, Activation};

/// Isophote level of a unit-contrast region.
const LEVEL: f64 = 0.5;
pub const DEFAULT_K_SCALE: f64 = 2.0;
pub const DEFAULT_TONAL_SIGMA: f64 = 0.1;
/// Disk radii used to fit the calibration constants.
pub const CALIBRATION_RADII: [f64; 3] = [20.0, 30.0, 40.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Circumference,
    Area,
}

/// Multiplicative constant mapping a raw sum to pixels or pixels^2, fitted
/// by least squares on analytic disks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub kind: EstimatorKind,
    pub k_scale: f64,
    pub sigma: f64,
    pub constant: f64,
}

fn smoothed(img: &Image, k_scale: f64) -> Result<Image> {
    if !(k_scale > 0.0) {
        return Err(argument(format!("kernel scale must be positive, got {k_scale}")));
    }
    gaussian_blur(img, k_scale, gaussian_radius(k_scale), BoundaryMode::ZeroPad)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(argument(format!("tonal scale must be positive, got {sigma}")))
    }
}

/// `sum_x f(0.5 - (I * K)(x))` with the bell `f`: a soft count of pixels on
/// the 0.5 isophote.
pub fn raw_circumference(img: &Image, k_scale: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let s = smoothed(img, k_scale)?;
    Ok(s.data().iter().map(|&v| Activation::GaussBell.eval(LEVEL - v, sigma)).sum())
}

/// `sum_x Phi(((I * K)(x) - 0.5) / sigma)`: a soft count of pixels above the
/// 0.5 threshold.
pub fn raw_area(img: &Image, k_scale: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let s = smoothed(img, k_scale)?;
    Ok(s.data().iter().map(|&v| normal_cdf((v - LEVEL) / sigma)).sum())
}

fn raw(kind: EstimatorKind, img: &Image, k_scale: f64, sigma: f64) -> Result<f64> {
    match kind {
        EstimatorKind::Circumference => raw_circumference(img, k_scale, sigma),
        EstimatorKind::Area => raw_area(img, k_scale, sigma),
    }
}

/// Fits `truth ~ c * raw` over centred disks of [`CALIBRATION_RADII`].
pub fn calibrate(kind: EstimatorKind, k_scale: f64, sigma: f64) -> Result<Calibration> {
    let centre = (SHAPE_SIDE as f64 - 1.0) / 2.0;
    let (mut num, mut den) = (0.0, 0.0);
    for r in CALIBRATION_RADII {
        let disk = rasterize_ellipse(SHAPE_SIDE, centre, centre, r, r, 0.0)?;
        let truth = match kind {
            EstimatorKind::Circumference => 2.0 * PI * r,
            EstimatorKind::Area => PI * r * r,
        };
        let x = raw(kind, &disk, k_scale, sigma)?;
        num += truth * x;
        den += x * x;
    }
    if den == 0.0 {
        return Err(argument("calibration disks produced no response"));
    }
    Ok(Calibration { kind, k_scale, sigma, constant: num / den })
}

pub fn circumference_estimator(img: &Image, cal: &Calibration) -> Result<f64> {
    if cal.kind != EstimatorKind::Circumference {
        return Err(argument("calibration is not for the circumference estimator"));
    }
    Ok(cal.constant * raw_circumference(img, cal.k_scale, cal.sigma)?)
}

pub fn area_estimator(img: &Image, cal: &Calibration) -> Result<f64> {
    if cal.kind != EstimatorKind::Area {
        return Err(argument("calibration is not for the area estimator"));
    }
    Ok(cal.constant * raw_area(img, cal.k_scale, cal.sigma)?)
}
