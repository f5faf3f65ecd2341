use std::collections::VecDeque;

use crate::error::{argument, Result};
use crate::image::Image;

/// One 8-connected foreground region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Row-major pixel indices in discovery order.
    pub pixels: Vec<usize>,
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn bbox_width(&self) -> usize {
        self.max_x - self.min_x + 1
    }

    pub fn bbox_height(&self) -> usize {
        self.max_y - self.min_y + 1
    }

    pub fn touches_border(&self, width: usize, height: usize) -> bool {
        self.min_x == 0 || self.min_y == 0 || self.max_x + 1 == width || self.max_y + 1 == height
    }
}

/// 8-connected components of `mask`, ordered by their first pixel in raster
/// order.
pub fn connected_components(mask: &[bool], width: usize, height: usize) -> Vec<Component> {
    assert_eq!(mask.len(), width * height);
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (sx, sy) = (start % width, start / width);
        let mut c = Component { pixels: Vec::new(), min_x: sx, min_y: sy, max_x: sx, max_y: sy };
        while let Some(p) = queue.pop_front() {
            let (x, y) = (p % width, p / width);
            c.pixels.push(p);
            c.min_x = c.min_x.min(x);
            c.max_x = c.max_x.max(x);
            c.min_y = c.min_y.min(y);
            c.max_y = c.max_y.max(y);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                        continue;
                    }
                    let q = ny as usize * width + nx as usize;
                    if mask[q] && !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        out.push(c);
    }
    out
}

/// Length of the `level` iso-contour by marching squares, with the image
/// zero-padded by one pixel so boundary regions close.
///
/// Crossings are linearly interpolated along cell edges. Saddle cells
/// contribute two segments; for binary masks both resolutions have equal
/// length.
pub fn contour_length(img: &Image, level: f64) -> f64 {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            img.get(x as usize, y as usize)
        }
    };
    let cross = |a: f64, b: f64| -> f64 { (level - a) / (b - a) };
    let mut total = 0.0;
    for y in -1..h {
        for x in -1..w {
            // corners: tl, tr, br, bl
            let v = [at(x, y), at(x + 1, y), at(x + 1, y + 1), at(x, y + 1)];
            let inside: Vec<bool> = v.iter().map(|&c| c > level).collect();
            // edge crossing points in local cell coordinates
            let mut pts: Vec<(f64, f64)> = Vec::with_capacity(4);
            if inside[0] != inside[1] {
                pts.push((cross(v[0], v[1]), 0.0));
            }
            if inside[1] != inside[2] {
                pts.push((1.0, cross(v[1], v[2])));
            }
            if inside[3] != inside[2] {
                pts.push((cross(v[3], v[2]), 1.0));
            }
            if inside[0] != inside[3] {
                pts.push((0.0, cross(v[0], v[3])));
            }
            let seg = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            match pts.len() {
                2 => total += seg(pts[0], pts[1]),
                4 => {
                    // saddle: pair each crossing with its neighbour around the cell,
                    // separating the corners that are inside
                    if inside[0] {
                        total += seg(pts[0], pts[3]) + seg(pts[1], pts[2]);
                    } else {
                        total += seg(pts[0], pts[1]) + seg(pts[2], pts[3]);
                    }
                }
                _ => {}
            }
        }
    }
    total
}

/// Area (foreground pixel count) and marching-squares perimeter of a binary
/// mask.
pub fn label_shapes(mask: &Image) -> Result<(f64, f64)> {
    let area = mask.data().iter().filter(|&&v| v > 0.5).count();
    if area == 0 {
        return Err(argument("mask has no foreground"));
    }
    Ok((area as f64, contour_length(mask, 0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn disk(r: f64, side: usize) -> Image {
        let c = (side as f64 - 1.0) / 2.0;
        Image::from_fn(side, side, |x, y| {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            if dx * dx + dy * dy <= r * r {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn eight_connectivity_joins_diagonals() {
        #[rustfmt::skip]
        let mask = [
            true,  false, false, false,
            false, true,  false, true,
            false, false, false, true,
        ];
        let cs = connected_components(&mask, 4, 3);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].pixels, vec![0, 5]);
        assert_eq!(cs[1].area(), 2);
        assert!(cs[0].touches_border(4, 3));
        assert_eq!((cs[1].bbox_width(), cs[1].bbox_height()), (1, 2));
    }

    #[test]
    fn square_labels() {
        let img = Image::from_fn(14, 14, |x, y| if (2..12).contains(&x) && (2..12).contains(&y) { 1.0 } else { 0.0 })
            .unwrap();
        let (a, p) = label_shapes(&img).unwrap();
        assert_eq!(a, 100.0);
        // straight runs of 9 between edge midpoints plus four corner cuts
        assert!((p - (36.0 + 4.0 * FRAC_1_SQRT_2)).abs() < 1e-12);
        assert!((p - 40.0).abs() <= 2.0);
    }

    #[test]
    fn single_pixel_is_a_diamond() {
        let mut img = Image::zeros(3, 3).unwrap();
        img.set(1, 1, 1.0);
        let (a, p) = label_shapes(&img).unwrap();
        assert_eq!(a, 1.0);
        assert!((p - 4.0 * 0.5 * 2f64.sqrt()).abs() < 1e-12);
        // padding closes regions on the image edge too
        let corner = Image::from_vec(1, 1, vec![1.0]).unwrap();
        assert!((label_shapes(&corner).unwrap().1 - p).abs() < 1e-12);
    }

    #[test]
    fn saddle_cells_count_two_segments() {
        let img = Image::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        // two diamonds sharing one saddle cell
        assert!((contour_length(&img, 0.5) - 8.0 * 0.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_is_an_error() {
        assert!(label_shapes(&Image::zeros(4, 4).unwrap()).is_err());
    }

    #[test]
    fn disk_area_and_perimeter() {
        let (a, p) = label_shapes(&disk(30.0, 80)).unwrap();
        assert!((a / (PI * 900.0) - 1.0).abs() < 0.01, "area {a}");
        // Midpoint contours of a pixelated circle follow 0/45/90 degree
        // moves and overshoot the true length by about 5.5% on average.
        let ratio = p / (60.0 * PI);
        assert!(ratio > 1.0 && ratio < 1.08, "perimeter ratio {ratio}");
    }
}
