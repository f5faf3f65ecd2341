use rand_distr::{Distribution, StandardNormal};

use super::shape::{connected_components, label_shapes};
use super::{ShapeSample, SHAPE_SIDE};
use crate::error::{argument, Result};
use crate::image::{gaussian_blur, BoundaryMode, Image};
use crate::rng::{stream_rng, Stream};

pub const FIELD_SIDE: usize = 512;
pub const FIELD_BLUR_SIGMA: f64 = 10.0;
pub const FIELD_QUANTILE: f64 = 0.75;
pub const MIN_BLOB_AREA: usize = 300;
pub const MAX_BLOB_AREA: usize = 8000;
/// Largest bounding-box side kept, so the crop leaves a 4 px margin.
pub const MAX_BLOB_EXTENT: usize = SHAPE_SIDE - 8;

/// Smoothed noise field `index` and its foreground mask: pixels strictly
/// above the 75th percentile.
pub fn binarized_field(seed: u64, index: u64) -> Result<(Image, Vec<bool>)> {
    let mut rng = stream_rng(seed, Stream::Noise, index);
    let noise = Image::from_fn(FIELD_SIDE, FIELD_SIDE, |_, _| StandardNormal.sample(&mut rng))?;
    let radius = (3.0 * FIELD_BLUR_SIGMA).ceil() as usize;
    let field = gaussian_blur(&noise, FIELD_BLUR_SIGMA, radius, BoundaryMode::Reflect)?;
    let mut sorted = field.data().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let threshold = sorted[(FIELD_QUANTILE * sorted.len() as f64).ceil() as usize - 1];
    let mask = field.data().iter().map(|&v| v > threshold).collect();
    Ok((field, mask))
}

/// Random blobs: connected foreground regions of thresholded smooth noise
/// that avoid the field border, have area in `[300, 8000]` px and fit the
/// crop, each centred by its bounding box in a 128x128 binary image.
/// Noise fields are drawn until `count` blobs are found.
pub fn generate_blobs(seed: u64, count: usize) -> Result<Vec<ShapeSample>> {
    if count == 0 {
        return Err(argument("blob count must be at least 1"));
    }
    let mut out = Vec::with_capacity(count);
    let mut field = 0u64;
    while out.len() < count {
        let (_, mask) = binarized_field(seed, field)?;
        field += 1;
        for c in connected_components(&mask, FIELD_SIDE, FIELD_SIDE) {
            if c.touches_border(FIELD_SIDE, FIELD_SIDE)
                || !(MIN_BLOB_AREA..=MAX_BLOB_AREA).contains(&c.area())
                || c.bbox_width() > MAX_BLOB_EXTENT
                || c.bbox_height() > MAX_BLOB_EXTENT
            {
                continue;
            }
            let ox = (SHAPE_SIDE - c.bbox_width()) / 2;
            let oy = (SHAPE_SIDE - c.bbox_height()) / 2;
            let mut image = Image::zeros(SHAPE_SIDE, SHAPE_SIDE)?;
            for &p in &c.pixels {
                let (x, y) = (p % FIELD_SIDE - c.min_x + ox, p / FIELD_SIDE - c.min_y + oy);
                image.set(x, y, 1.0);
            }
            let (area, perimeter) = label_shapes(&image)?;
            out.push(ShapeSample { image, area, perimeter, class_label: None, noise_sigma: 0.0 });
            if out.len() == count {
                break;
            }
        }
    }
    Ok(out)
}
