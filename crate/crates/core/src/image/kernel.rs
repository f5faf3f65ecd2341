use crate::error::{argument, Result};

/// Square, odd-sided filter with its origin at the centre tap.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    taps: Vec<f64>,
}

/// Image axis. `X` runs along rows (columns index), `Y` down the columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Kernel {
    pub fn new(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(argument(format!("kernel side must be odd, got {size}")));
        }
        if taps.len() != size * size {
            return Err(argument(format!("{} taps for a {size}x{size} kernel", taps.len())));
        }
        Ok(Self { size, taps })
    }

    /// The discrete delta: one centre tap equal to 1.
    pub fn identity(size: usize) -> Result<Self> {
        let mut taps = vec![0.0; size * size];
        if size % 2 == 1 {
            taps[size * size / 2] = 1.0;
        }
        Self::new(size, taps)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [f64] {
        &mut self.taps
    }

    /// Tap at offset (dx, dy) from the origin.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius() as isize;
        self.taps[((dy + r) as usize) * self.size + (dx + r) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    pub fn transpose(&self) -> Kernel {
        let n = self.size;
        let mut taps = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                taps[x * n + y] = self.taps[y * n + x];
            }
        }
        Kernel { size: n, taps }
    }
}

/// Normalised 1-D Gaussian taps on `[-radius, radius]`.
pub fn gaussian_taps(sigma: f64, radius: usize) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(argument(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let r = radius as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| {
            let x = i as f64;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    Ok(taps)
}

/// 2-D Gaussian smoothing kernel, renormalised to unit sum after truncation.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Kernel> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(argument(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let size = 2 * radius + 1;
    let r = radius as isize;
    let mut taps = Vec::with_capacity(size * size);
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = (dx * dx + dy * dy) as f64;
            taps.push((-d2 / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    Kernel::new(size, taps)
}

/// First derivative of a 2-D Gaussian along `axis`.
///
/// Taps are `-u * G(u, v)` where `u` is the offset along the axis, scaled so
/// the first moment along the axis is exactly -1. Convolving a unit ramp
/// along `axis` then returns 1, and the antisymmetry makes the taps sum to 0.
pub fn gaussian_derivative_kernel(sigma: f64, axis: Axis, radius: usize) -> Result<Kernel> {
    let g = gaussian_kernel(sigma, radius)?;
    let r = radius as isize;
    let size = g.size();
    let mut taps = vec![0.0; size * size];
    // summed in an axis-independent order so the X and Y kernels are exact transposes
    let mut second_moment = 0.0;
    for a in -r..=r {
        for b in -r..=r {
            second_moment += (a * a) as f64 * g.at(a, b);
        }
    }
    for dy in -r..=r {
        for dx in -r..=r {
            let u = match axis {
                Axis::X => dx,
                Axis::Y => dy,
            } as f64;
            taps[((dy + r) as usize) * size + (dx + r) as usize] = -u * g.at(dx, dy);
        }
    }
    if second_moment <= 0.0 {
        return Err(argument("derivative kernel radius must be at least 1"));
    }
    for t in &mut taps {
        *t /= second_moment;
    }
    Kernel::new(size, taps)
}

/// Standard deviation of the Gaussian equal to `G_gamma * G_sigma`.
pub fn semigroup_scale(gamma: f64, sigma: f64) -> Result<f64> {
    if gamma < 0.0 || sigma < 0.0 || !gamma.is_finite() || !sigma.is_finite() {
        return Err(argument(format!("scales must be non-negative, got {gamma}, {sigma}")));
    }
    Ok(gamma.hypot(sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_side_is_rejected() {
        assert!(Kernel::new(2, vec![0.0; 4]).is_err());
        assert!(Kernel::identity(4).is_err());
    }

    #[test]
    fn gaussian_sums_to_one() {
        let k = gaussian_kernel(10.0, 30).unwrap();
        assert!((k.sum() - 1.0).abs() < 1e-12);
        assert!(gaussian_kernel(0.0, 3).is_err());
        assert!(gaussian_kernel(-1.0, 3).is_err());
    }

    #[test]
    fn gaussian_central_tap_matches_direct_sum() {
        // brute-force normalisation over the 7x7 support
        let mut total = 0.0;
        for dy in -3i32..=3 {
            for dx in -3i32..=3 {
                total += (-((dx * dx + dy * dy) as f64) / 2.0).exp();
            }
        }
        let k = gaussian_kernel(1.0, 3).unwrap();
        assert!((k.at(0, 0) - 1.0 / total).abs() < 1e-15);
        assert!((k.at(0, 0) - 0.15924112569070242).abs() < 1e-12);
    }

    #[test]
    fn tiny_sigma_approaches_identity() {
        let k = gaussian_kernel(1e-3, 1).unwrap();
        let id = Kernel::identity(3).unwrap();
        for (a, b) in k.taps().iter().zip(id.taps()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_kernel_moments() {
        for &sigma in &[0.7, 1.0, 2.5] {
            let radius = (3.0_f64 * sigma).ceil() as usize;
            let k = gaussian_derivative_kernel(sigma, Axis::X, radius).unwrap();
            assert!(k.sum().abs() < 1e-12);
            let r = radius as isize;
            let mut m1 = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    m1 += dx as f64 * k.at(dx, dy);
                }
            }
            assert!((m1 + 1.0).abs() < 1e-6, "first moment {m1}");
        }
        assert!(gaussian_derivative_kernel(0.0, Axis::Y, 3).is_err());
    }

    #[test]
    fn y_derivative_is_transpose_of_x() {
        let kx = gaussian_derivative_kernel(1.3, Axis::X, 4).unwrap();
        let ky = gaussian_derivative_kernel(1.3, Axis::Y, 4).unwrap();
        assert_eq!(kx.transpose(), ky);
    }

    #[test]
    fn semigroup_scale_values() {
        assert_eq!(semigroup_scale(0.0, 2.5).unwrap(), 2.5);
        assert_eq!(semigroup_scale(3.0, 4.0).unwrap(), 5.0);
        assert!(semigroup_scale(-1.0, 1.0).is_err());
    }
}
