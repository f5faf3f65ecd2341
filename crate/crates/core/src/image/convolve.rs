use super::{gaussian_taps, Image, Kernel};
use crate::error::{argument, dimension, Result};

/// How samples outside the image are synthesised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryMode {
    /// Outside samples are zero.
    ZeroPad,
    /// Mirror about the edge sample without repeating it: `-1 -> 1`, `n -> n-2`.
    Reflect,
}

#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - j;
    }
    j as usize
}

/// Source index for a padded coordinate, `None` when the mode yields zero.
#[inline]
fn source(i: isize, n: usize, mode: BoundaryMode) -> Option<usize> {
    if i >= 0 && (i as usize) < n {
        return Some(i as usize);
    }
    match mode {
        BoundaryMode::ZeroPad => None,
        BoundaryMode::Reflect => Some(mirror(i, n)),
    }
}

/// Dot product with four interleaved accumulators, so the reduction can be
/// pipelined. Deterministic for a given length.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Image padded by `radius` on every side.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Padded {
    pub radius: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Padded {
    pub fn new(img: &Image, radius: usize, mode: BoundaryMode) -> Self {
        let (w, h) = (img.width(), img.height());
        let pw = w + 2 * radius;
        let ph = h + 2 * radius;
        let r = radius as isize;
        let xs: Vec<Option<usize>> = (0..pw as isize).map(|x| source(x - r, w, mode)).collect();
        let mut data = vec![0.0; pw * ph];
        for py in 0..ph {
            let Some(sy) = source(py as isize - r, h, mode) else { continue };
            let row = &img.data()[sy * w..(sy + 1) * w];
            let dst = &mut data[py * pw..(py + 1) * pw];
            for (d, sx) in dst.iter_mut().zip(&xs) {
                if let Some(sx) = sx {
                    *d = row[*sx];
                }
            }
        }
        Self { radius, width: pw, height: ph, data }
    }

    /// `out(x) = sum_u K(u) P(x - u)` over the unpadded extent.
    pub fn convolve_into(&self, k: &Kernel, out: &mut [f64]) {
        let r = self.radius;
        let n = k.size();
        debug_assert_eq!(k.radius(), r);
        let w = self.width - 2 * r;
        let h = self.height - 2 * r;
        debug_assert_eq!(out.len(), w * h);
        out.iter_mut().for_each(|v| *v = 0.0);
        let taps = k.taps();
        // K(dx, dy) multiplies P(x - dx + r, y - dy + r); with ky = dy + r the
        // padded row is y + 2r - ky.
        for ky in 0..n {
            for kx in 0..n {
                let t = taps[ky * n + kx];
                if t == 0.0 {
                    continue;
                }
                for y in 0..h {
                    let src = &self.data[(y + 2 * r - ky) * self.width + (2 * r - kx)..];
                    let dst = &mut out[y * w..(y + 1) * w];
                    for (d, s) in dst.iter_mut().zip(&src[..w]) {
                        *d += t * s;
                    }
                }
            }
        }
    }

    /// Gradient of `sum(G * conv(I, K))` with respect to the taps of `K`.
    pub fn kernel_gradient_into(&self, grad_out: &[f64], size: usize, dk: &mut [f64]) {
        let r = self.radius;
        let w = self.width - 2 * r;
        let h = self.height - 2 * r;
        for ky in 0..size {
            for kx in 0..size {
                let mut acc = 0.0;
                for y in 0..h {
                    let src = &self.data[(y + 2 * r - ky) * self.width + (2 * r - kx)..];
                    let g = &grad_out[y * w..(y + 1) * w];
                    acc += dot(g, &src[..w]);
                }
                dk[ky * size + kx] += acc;
            }
        }
    }
}

/// Scatters `grad_out` through the taps into a padded buffer, then folds the
/// padding back onto the image according to `mode`.
pub(crate) fn adjoint_into(grad_out: &[f64], w: usize, h: usize, k: &Kernel, mode: BoundaryMode, out: &mut [f64]) {
    let r = k.radius();
    let n = k.size();
    let pw = w + 2 * r;
    let ph = h + 2 * r;
    let mut padded = vec![0.0; pw * ph];
    let taps = k.taps();
    for ky in 0..n {
        for kx in 0..n {
            let t = taps[ky * n + kx];
            if t == 0.0 {
                continue;
            }
            for y in 0..h {
                let dst = &mut padded[(y + 2 * r - ky) * pw + (2 * r - kx)..];
                let g = &grad_out[y * w..(y + 1) * w];
                for (d, gv) in dst[..w].iter_mut().zip(g) {
                    *d += t * gv;
                }
            }
        }
    }
    let ri = r as isize;
    for py in 0..ph {
        let Some(sy) = source(py as isize - ri, h, mode) else { continue };
        for px in 0..pw {
            let v = padded[py * pw + px];
            if v == 0.0 {
                continue;
            }
            if let Some(sx) = source(px as isize - ri, w, mode) {
                out[sy * w + sx] += v;
            }
        }
    }
}

fn check_fits(img: &Image, k: &Kernel) -> Result<()> {
    if k.size() > img.width().min(img.height()) {
        return Err(dimension(format!("kernel side {} exceeds image {}x{}", k.size(), img.width(), img.height())));
    }
    Ok(())
}

/// "Same"-size discrete convolution (the kernel is flipped).
pub fn convolve(img: &Image, k: &Kernel, mode: BoundaryMode) -> Result<Image> {
    check_fits(img, k)?;
    let padded = Padded::new(img, k.radius(), mode);
    let mut out = vec![0.0; img.len()];
    padded.convolve_into(k, &mut out);
    Image::from_vec(img.width(), img.height(), out)
}

/// Adjoint of `I -> convolve(I, k, mode)` applied to `grad_out`.
pub fn convolve_adjoint(grad_out: &Image, k: &Kernel, mode: BoundaryMode) -> Result<Image> {
    check_fits(grad_out, k)?;
    let mut out = vec![0.0; grad_out.len()];
    adjoint_into(grad_out.data(), grad_out.width(), grad_out.height(), k, mode, &mut out);
    Image::from_vec(grad_out.width(), grad_out.height(), out)
}

/// Gradient of `<grad_out, convolve(img, K, mode)>` with respect to the taps of a
/// `size`-sided kernel `K`.
pub fn kernel_gradient(img: &Image, grad_out: &Image, size: usize, mode: BoundaryMode) -> Result<Kernel> {
    if !img.same_shape(grad_out) {
        return Err(dimension("gradient and input shapes differ"));
    }
    if size.is_multiple_of(2) || size > img.width().min(img.height()) {
        return Err(dimension(format!("kernel side {size} invalid for this image")));
    }
    let padded = Padded::new(img, size / 2, mode);
    let mut dk = vec![0.0; size * size];
    padded.kernel_gradient_into(grad_out.data(), size, &mut dk);
    Kernel::new(size, dk)
}

fn convolve_rows(data: &[f64], w: usize, h: usize, taps: &[f64], mode: BoundaryMode) -> Vec<f64> {
    let r = taps.len() / 2;
    let ri = r as isize;
    let mut out = vec![0.0; w * h];
    let mut line = vec![0.0; w + 2 * r];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for (p, l) in line.iter_mut().enumerate() {
            *l = source(p as isize - ri, w, mode).map_or(0.0, |s| row[s]);
        }
        let dst = &mut out[y * w..(y + 1) * w];
        for (x, d) in dst.iter_mut().enumerate() {
            // taps[u + r] multiplies I(x - u) = line[x - u + r]
            let mut acc = 0.0;
            for (t, &tap) in taps.iter().enumerate() {
                acc += tap * line[x + 2 * r - t];
            }
            *d = acc;
        }
    }
    out
}

fn transpose_buf(data: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = data[y * w + x];
        }
    }
    out
}

/// Convolution with the separable kernel `K(dx, dy) = col[dy] * row[dx]`.
pub fn convolve_separable(img: &Image, row: &[f64], col: &[f64], mode: BoundaryMode) -> Result<Image> {
    let (w, h) = (img.width(), img.height());
    if row.len().is_multiple_of(2) || col.len().is_multiple_of(2) {
        return Err(argument("separable taps must have odd length"));
    }
    if row.len() > w || col.len() > h {
        return Err(dimension(format!("separable kernel {}x{} exceeds image {w}x{h}", row.len(), col.len())));
    }
    let pass1 = convolve_rows(img.data(), w, h, row, mode);
    let t = transpose_buf(&pass1, w, h);
    let pass2 = convolve_rows(&t, h, w, col, mode);
    Image::from_vec(w, h, transpose_buf(&pass2, h, w))
}

/// Separable Gaussian smoothing; equal to `convolve` with `gaussian_kernel`.
pub fn gaussian_blur(img: &Image, sigma: f64, radius: usize, mode: BoundaryMode) -> Result<Image> {
    let taps = gaussian_taps(sigma, radius)?;
    convolve_separable(img, &taps, &taps, mode)
}
