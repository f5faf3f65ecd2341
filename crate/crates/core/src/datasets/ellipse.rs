use std::f64::consts::PI;

use rand::Rng;

use super::ShapeSample;
use crate::error::{argument, Result};
use crate::image::Image;
use crate::rng::{stream_rng, Stream};

/// Side of generated images.
pub const SHAPE_SIDE: usize = 128;
/// Largest semi-axis that keeps a 4 px empty margin, allowing for centre jitter.
pub const MAX_SEMI_AXIS: f64 = (SHAPE_SIDE / 2 - 5) as f64;
/// Smallest axis ratio `b / a` drawn.
pub const MIN_AXIS_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EllipseConstraint {
    ConstantArea(f64),
    ConstantPerimeter(f64),
}

/// Exact perimeter of an ellipse with semi-axes `a`, `b`, via the
/// Gauss-Kummer AGM evaluation of the complete elliptic integral.
pub fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    if b == a {
        return 2.0 * PI * a;
    }
    let (mut x, mut y) = (a, b);
    let mut sum = 0.5 * (a * a - b * b);
    let mut pow = 0.5;
    for _ in 0..64 {
        let c = 0.5 * (x - y);
        pow *= 2.0;
        sum += pow * c * c;
        (x, y) = (0.5 * (x + y), (x * y).sqrt());
        if c.abs() <= 1e-16 * a {
            break;
        }
    }
    // x has converged to the arithmetic-geometric mean of a and b
    2.0 * PI / x * (a * a - sum)
}

/// Semi-axes `(a, b)` with `a >= b` meeting both an area and a perimeter.
/// Equality in the isoperimetric bound `P^2 >= 4 pi A` gives a circle.
pub fn axes_for_area_and_perimeter(area: f64, perimeter: f64) -> Result<(f64, f64)> {
    if !(area > 0.0) || !(perimeter > 0.0) {
        return Err(argument("area and perimeter must be positive"));
    }
    let circle = 2.0 * (PI * area).sqrt();
    if perimeter < circle * (1.0 - 1e-12) {
        return Err(argument(format!("perimeter {perimeter} is below the isoperimetric bound {circle}")));
    }
    if perimeter <= circle * (1.0 + 1e-12) {
        let r = (area / PI).sqrt();
        return Ok((r, r));
    }
    // perimeter at fixed area decreases as the ratio q = b/a grows to 1
    let p_of = |q: f64| {
        let a = (area / (PI * q)).sqrt();
        ellipse_perimeter(a, q * a)
    };
    let (mut lo, mut hi) = (1e-12, 1.0);
    if p_of(lo) < perimeter {
        return Err(argument("perimeter too large for this area"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p_of(mid) > perimeter {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    let a = (area / (PI * q)).sqrt();
    Ok((a, q * a))
}

/// Smallest axis ratio for which `constraint` keeps `a <= MAX_SEMI_AXIS`.
fn min_ratio(constraint: EllipseConstraint) -> Result<f64> {
    let q = match constraint {
        EllipseConstraint::ConstantArea(area) => {
            if !(area > 0.0) {
                return Err(argument(format!("area must be positive, got {area}")));
            }
            area / (PI * MAX_SEMI_AXIS * MAX_SEMI_AXIS)
        }
        EllipseConstraint::ConstantPerimeter(p) => {
            if !(p > 0.0) {
                return Err(argument(format!("perimeter must be positive, got {p}")));
            }
            // perimeter of the unit-major ellipse grows with q from 4 to 2 pi
            let need = p / MAX_SEMI_AXIS;
            if need > 2.0 * PI {
                return Err(argument(format!("perimeter {p} does not fit in a {SHAPE_SIDE} px image")));
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if ellipse_perimeter(1.0, mid) < need {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    };
    if q > 1.0 {
        return Err(argument(format!("{constraint:?} does not fit in a {SHAPE_SIDE} px image")));
    }
    Ok(q.max(MIN_AXIS_RATIO))
}

/// Binary mask of an ellipse centred at `(cx, cy)` in pixel-centre
/// coordinates, rotated by `theta`.
pub fn rasterize_ellipse(side: usize, cx: f64, cy: f64, a: f64, b: f64, theta: f64) -> Result<Image> {
    let (s, c) = theta.sin_cos();
    Image::from_fn(side, side, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
            1.0
        } else {
            0.0
        }
    })
}

/// Randomly oriented ellipses meeting `constraint`. The axis ratio is uniform
/// over the feasible range above [`MIN_AXIS_RATIO`] and the centre is jittered
/// by up to half a pixel. Labels are the analytic area and perimeter.
pub fn generate_ellipses(seed: u64, count: usize, constraint: EllipseConstraint) -> Result<Vec<ShapeSample>> {
    let q_lo = min_ratio(constraint)?;
    let centre = (SHAPE_SIDE as f64 - 1.0) / 2.0;
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, Stream::Data, i as u64);
            let theta = rng.gen_range(0.0..PI);
            let q = if q_lo < 1.0 { rng.gen_range(q_lo..=1.0) } else { 1.0 };
            let a = match constraint {
                EllipseConstraint::ConstantArea(area) => (area / (PI * q)).sqrt(),
                EllipseConstraint::ConstantPerimeter(p) => p / ellipse_perimeter(1.0, q),
            };
            let b = q * a;
            let cx = centre + rng.gen_range(-0.5..0.5);
            let cy = centre + rng.gen_range(-0.5..0.5);
            let image = rasterize_ellipse(SHAPE_SIDE, cx, cy, a, b, theta)?;
            let (area, perimeter) = match constraint {
                EllipseConstraint::ConstantArea(area) => (area, ellipse_perimeter(a, b)),
                EllipseConstraint::ConstantPerimeter(p) => (PI * a * b, p),
            };
            Ok(ShapeSample { image, area, perimeter, class_label: None, noise_sigma: 0.0 })
        })
        .collect()
}
