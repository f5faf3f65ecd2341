use crate::error::{dimension, Result};
use crate::image::Image;
use crate::layers::Layer;
use crate::train::{argmax, loss, Label, LossKind};

/// Distance from the contour, in pixels, that counts as boundary.
pub const BOUNDARY_BAND: f64 = 2.0;

/// `|dE/dI|` for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub map: Image,
    pub loss: f64,
    pub predicted_class: Option<usize>,
    pub true_class: Option<usize>,
}

pub fn saliency(layer: &Layer, img: &Image, label: &Label, kind: LossKind) -> Result<SaliencyMap> {
    let (out, tape) = layer.forward(img)?;
    let (value, upstream) = loss(kind, out.values(), label.target())?;
    let (_, d_input) = layer.gradients(&tape, &upstream)?;
    let classify = kind.is_classification();
    Ok(SaliencyMap {
        map: d_input.map(f64::abs),
        loss: value,
        predicted_class: classify.then(|| argmax(out.values())),
        true_class: match label {
            Label::Class(c) => Some(*c),
            _ => None,
        },
    })
}

/// Pixels whose centre lies within `band` of the 0.5 contour of `mask`: those
/// with a pixel of the other phase within `band + 0.5`. Outside the image
/// counts as background.
pub fn boundary_band(mask: &Image, band: f64) -> Vec<bool> {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let inside = |x: isize, y: isize| x >= 0 && y >= 0 && x < w && y < h && mask.get(x as usize, y as usize) > 0.5;
    let reach = band + 0.5;
    let r = reach.floor() as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) <= reach * reach)
        .collect();
    let mut out = Vec::with_capacity(mask.len());
    for y in 0..h {
        for x in 0..w {
            let here = inside(x, y);
            out.push(offsets.iter().any(|&(dx, dy)| inside(x + dx, y + dy) != here));
        }
    }
    out
}

/// Share of saliency mass within [`BOUNDARY_BAND`] px of the shape contour;
/// 0 for an all-zero map.
pub fn boundary_mass_ratio(map: &Image, mask: &Image) -> Result<f64> {
    if !map.same_shape(mask) {
        return Err(dimension("saliency map and mask shapes differ"));
    }
    let band = boundary_band(mask, BOUNDARY_BAND);
    let total: f64 = map.data().iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let near: f64 = map.data().iter().zip(&band).filter(|(_, &b)| b).map(|(v, _)| v.abs()).sum();
    Ok(near / total)
}
