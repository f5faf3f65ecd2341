use super::{Activation, Layer};
use crate::error::{argument, Result};
use crate::image::Image;

fn grid_spacing(layer: &Layer, j: usize) -> Result<f64> {
    let n = layer.spec().bins;
    if n < 2 {
        return Err(argument("a single bin has no grid spacing; pass it explicitly"));
    }
    let step = layer.bias(j, 1) - layer.bias(j, 0);
    for i in 1..n {
        let d = layer.bias(j, i) - layer.bias(j, i - 1);
        if (d - step).abs() > 1e-9 * step.abs().max(1.0) {
            return Err(argument(format!("bias grid of kernel {j} is not regular")));
        }
    }
    Ok(step)
}

/// Running sums `Δb * sum_{i <= n} h_i` over the bin index, per kernel.
///
/// `result[j][n]` is the cumulative channel up to bin `n`. With bell
/// activations each sum is a Riemann sum of the bell's integral, so the last
/// entry approximates an integrated-bell channel biased at the upper edge of
/// the grid. `delta_b` defaults to the grid spacing.
pub fn cumulative_bins(layer: &Layer, img: &Image, delta_b: Option<f64>) -> Result<Vec<Vec<Image>>> {
    let s = layer.spec();
    if s.activation != Activation::GaussBell {
        return Err(argument("cumulative bins need a bell-activated layer"));
    }
    let (_, tape) = layer.forward(img)?;
    (0..s.kernels)
        .map(|j| {
            let db = match delta_b {
                Some(d) => d,
                None => grid_spacing(layer, j)?,
            };
            let mut acc = vec![0.0; img.len()];
            (0..s.bins)
                .map(|i| {
                    for (a, h) in acc.iter_mut().zip(tape.channel(j * s.bins + i)) {
                        *a += db * h;
                    }
                    Image::from_vec(img.width(), img.height(), acc.clone())
                })
                .collect()
        })
        .collect()
}

/// The top cumulative channel of every kernel: the LON's stand-in for an
/// integrated-bell CNN channel.
pub fn emulate_cnn_from_lon(layer: &Layer, img: &Image, delta_b: Option<f64>) -> Result<Vec<Image>> {
    Ok(cumulative_bins(layer, img, delta_b)?.into_iter().map(|mut c| c.pop().expect("at least one bin")).collect())
}

/// Worst disagreement between a bell layer's cumulative bins and the
/// integrated-bell channels they emulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmulationError {
    pub max_abs: f64,
    /// Span of the emulated channel values over all bins and pixels.
    pub range: f64,
}

impl EmulationError {
    pub fn relative(&self) -> f64 {
        self.max_abs / self.range
    }
}

/// Compares every cumulative bin `n` with `g(b_n + Δb/2 - I*K)`: the Riemann
/// sum over bins integrates each bell cell up to its upper edge. All bins of
/// a kernel must share one width.
pub fn emulation_error(layer: &Layer, img: &Image) -> Result<EmulationError> {
    let s = layer.spec();
    let stacks = cumulative_bins(layer, img, None)?;
    let (_, tape) = layer.forward(img)?;
    let (mut max_abs, mut lo, mut hi) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for (j, stack) in stacks.iter().enumerate() {
        let sigma = layer.sigma(j, 0);
        if (0..s.bins).any(|i| (layer.sigma(j, i) - sigma).abs() > 1e-12 * sigma) {
            return Err(argument(format!("bins of kernel {j} have different widths")));
        }
        let db = grid_spacing(layer, j)?;
        for (i, cum) in stack.iter().enumerate() {
            let edge = layer.bias(j, i) + 0.5 * db;
            for (c, r) in cum.data().iter().zip(tape.response(j)) {
                let g = Activation::IntegratedBell.eval(edge - r, sigma);
                max_abs = max_abs.max((c - g).abs());
                lo = lo.min(g);
                hi = hi.max(g);
            }
        }
    }
    Ok(EmulationError { max_abs, range: hi - lo })
}
