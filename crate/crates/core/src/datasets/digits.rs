//! Digit-like stroke images for running the gradient-regression task without
//! MNIST files: seven-segment glyphs with random size, slant, stroke width
//! and endpoint jitter, drawn with one-pixel anti-aliased edges.

use rand::Rng;

use crate::error::Result;
use crate::image::Image;
use crate::rng::{stream_rng, Stream};

pub const DIGIT_SIDE: usize = 28;

type Segment = ((f64, f64), (f64, f64));

// unit glyph box, y pointing down
const SEGMENTS: [Segment; 7] = [
    ((0.0, 0.0), (1.0, 0.0)),
    ((1.0, 0.0), (1.0, 0.5)),
    ((1.0, 0.5), (1.0, 1.0)),
    ((0.0, 1.0), (1.0, 1.0)),
    ((0.0, 0.5), (0.0, 1.0)),
    ((0.0, 0.0), (0.0, 0.5)),
    ((0.0, 0.5), (1.0, 0.5)),
];

const GLYPHS: [&[usize]; 10] = [
    &[0, 1, 2, 3, 4, 5],
    &[1, 2],
    &[0, 1, 6, 4, 3],
    &[0, 1, 6, 2, 3],
    &[5, 6, 1, 2],
    &[0, 5, 6, 2, 3],
    &[0, 5, 4, 3, 2, 6],
    &[0, 1, 2],
    &[0, 1, 2, 3, 4, 5, 6],
    &[6, 5, 0, 1, 2, 3],
];

fn segment_distance(px: f64, py: f64, (a, b): Segment) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (px - a.0 - t * dx).hypot(py - a.1 - t * dy)
}

/// `count` 28x28 images in `[0, 1]` with their digit labels (`i % 10`).
pub fn synthetic_digits(seed: u64, count: usize) -> Result<(Vec<Image>, Vec<u8>)> {
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = stream_rng(seed, Stream::Data, i as u64);
        let digit = i % 10;
        let w = rng.gen_range(8.0..13.0);
        let h = rng.gen_range(14.0..19.0);
        let slant = rng.gen_range(-0.3..0.3);
        let half_width = rng.gen_range(0.8..1.6);
        let cx = 13.5 + rng.gen_range(-1.5..1.5);
        let cy = 13.5 + rng.gen_range(-1.5..1.5);
        let mut place = |(u, v): (f64, f64)| {
            let y = cy + (v - 0.5) * h + rng.gen_range(-0.8..0.8);
            let x = cx + (u - 0.5) * w - slant * (y - cy) + rng.gen_range(-0.8..0.8);
            (x, y)
        };
        let strokes: Vec<Segment> = GLYPHS[digit]
            .iter()
            .map(|&s| {
                let (a, b) = SEGMENTS[s];
                (place(a), place(b))
            })
            .collect();
        let img = Image::from_fn(DIGIT_SIDE, DIGIT_SIDE, |x, y| {
            let d = strokes.iter().map(|&s| segment_distance(x as f64, y as f64, s)).fold(f64::INFINITY, f64::min);
            (half_width + 0.5 - d).clamp(0.0, 1.0)
        })?;
        images.push(img);
        labels.push(digit as u8);
    }
    Ok((images, labels))
}
