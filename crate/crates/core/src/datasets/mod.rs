//! Synthetic shapes with area, perimeter and class labels, IDX ingestion,
//! digit-like fallback images and gradient-magnitude regression targets.

mod blobs;
mod digits;
mod ellipse;
mod grad;
mod idx;
mod manifest;
pub mod shape;

use std::f64::consts::PI;
use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};

pub use blobs::{binarized_field, generate_blobs, FIELD_SIDE, MAX_BLOB_AREA, MIN_BLOB_AREA};
pub use digits::{synthetic_digits, DIGIT_SIDE};
pub use ellipse::{
    axes_for_area_and_perimeter, ellipse_perimeter, generate_ellipses, rasterize_ellipse, EllipseConstraint,
    MAX_SEMI_AXIS, MIN_AXIS_RATIO, SHAPE_SIDE,
};
pub use grad::{grad2_target, make_grad_samples, GradSample, GRAD_SIGMA, MAX_SCALE, MIN_SCALE};
pub use idx::{
    load_idx, read_idx_images, read_idx_labels, save_idx, write_idx_images, write_idx_labels, IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
};
pub use manifest::{read_manifest, write_manifest, ManifestRow};
pub use shape::{connected_components, contour_length, label_shapes, Component};

use crate::error::{argument, Result};
use crate::image::Image;

/// Default noise level for noisy shape variants, relative to unit contrast.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSample {
    pub image: Image,
    pub area: f64,
    pub perimeter: f64,
    pub class_label: Option<usize>,
    pub noise_sigma: f64,
}

impl ShapeSample {
    /// `P^2 >= 0.9 * 4 pi A`, the isoperimetric inequality with slack for
    /// pixelation.
    pub fn is_isoperimetric(&self) -> bool {
        self.area > 0.0 && self.perimeter > 0.0 && self.perimeter.powi(2) >= 0.9 * 4.0 * PI * self.area
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKey {
    Area,
    Perimeter,
}

impl ClassKey {
    pub fn of(self, s: &ShapeSample) -> f64 {
        match self {
            ClassKey::Area => s.area,
            ClassKey::Perimeter => s.perimeter,
        }
    }
}

/// Tertile class of each key: `floor(3 rank / n)` where rank orders keys
/// ascending with ties broken by index.
pub fn tertile_classes(keys: &[f64]) -> Result<Vec<usize>> {
    let n = keys.len();
    if n < 3 {
        return Err(argument(format!("tertile split needs at least 3 samples, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    let mut classes = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        classes[i] = rank * 3 / n;
    }
    Ok(classes)
}

/// Labels samples small, medium and large (0, 1, 2) by tertile of `key`.
pub fn assign_classes(samples: &mut [ShapeSample], key: ClassKey) -> Result<()> {
    let keys: Vec<f64> = samples.iter().map(|s| key.of(s)).collect();
    for (s, c) in samples.iter_mut().zip(tertile_classes(&keys)?) {
        s.class_label = Some(c);
    }
    Ok(())
}

/// Adds iid zero-mean Gaussian noise of standard deviation `sigma`.
pub fn add_noise<R: Rng>(sample: &ShapeSample, sigma: f64, rng: &mut R) -> Result<ShapeSample> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(argument(format!("noise sigma must be non-negative, got {sigma}")));
    }
    let mut out = sample.clone();
    out.noise_sigma = sigma;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| argument(e.to_string()))?;
        for v in out.image.data_mut() {
            *v += normal.sample(rng);
        }
    }
    Ok(out)
}

/// Contiguous 80/10/10 train/validation/test ranges over `n` samples.
pub fn split_80_10_10(n: usize) -> (Range<usize>, Range<usize>, Range<usize>) {
    let train = n * 8 / 10;
    let val = n / 10;
    (0..train, train..train + val, train + val..n)
}
