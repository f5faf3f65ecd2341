//! Binary layer checkpoints.
//!
//! Little-endian throughout:
//!
//! ```text
//! "LONC"  u32 version
//! u32 activation   0 bell, 1 logistic, 2 integrated bell, 3 relu
//! u32 kernels M, u32 bins N, u32 kernel side
//! u32 boundary     0 zero pad, 1 reflect
//! u32 sigma learnable (0/1)
//! u32 head         0 dense, 1 1x1, 2 1x1 pooled
//! u32 outputs, u32 width, u32 height   (zero for 1x1 heads)
//! u32 smoother     0 delta, 1 gaussian;  f64 sigma;  u32 radius
//! f64 kernel taps      M * side^2, kernel-major, row-major taps
//! f64 biases           M * N, index j * N + i
//! f64 log widths       M * N
//! f64 head weights     dense: [o][c][pixel]; 1x1: [c]
//! f64 head biases      one per output
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, Head, HeadSpec, Layer, LayerSpec, Smoother};
use crate::error::{Error, Result};
use crate::image::{BoundaryMode, Kernel};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LONC";
pub const CHECKPOINT_VERSION: u32 = 1;

fn activation_tag(a: Activation) -> u32 {
    match a {
        Activation::GaussBell => 0,
        Activation::LogisticSigmoid => 1,
        Activation::IntegratedBell => 2,
        Activation::Relu => 3,
    }
}

pub fn write_checkpoint<W: Write>(mut out: W, layer: &Layer) -> Result<()> {
    let s = layer.spec();
    let u = |v: u32, out: &mut W| out.write_all(&v.to_le_bytes());
    out.write_all(CHECKPOINT_MAGIC)?;
    u(CHECKPOINT_VERSION, &mut out)?;
    u(activation_tag(s.activation), &mut out)?;
    u(s.kernels as u32, &mut out)?;
    u(s.bins as u32, &mut out)?;
    u(s.kernel_side as u32, &mut out)?;
    u(matches!(s.boundary, BoundaryMode::Reflect) as u32, &mut out)?;
    u(s.sigma_learnable as u32, &mut out)?;
    let (kind, outputs, width, height) = match s.head {
        HeadSpec::Dense { outputs, width, height } => (0, outputs, width, height),
        HeadSpec::OneByOne { pooled: false } => (1, 1, 0, 0),
        HeadSpec::OneByOne { pooled: true } => (2, 1, 0, 0),
    };
    u(kind, &mut out)?;
    u(outputs as u32, &mut out)?;
    u(width as u32, &mut out)?;
    u(height as u32, &mut out)?;
    let (tag, sigma, radius) = match s.smoother {
        Smoother::Delta => (0, 0.0, 0),
        Smoother::Gaussian { sigma, radius } => (1, sigma, radius),
    };
    u(tag, &mut out)?;
    out.write_all(&sigma.to_le_bytes())?;
    u(radius as u32, &mut out)?;
    let values = layer
        .kernels()
        .iter()
        .flat_map(|k| k.taps().iter())
        .chain(&layer.bias)
        .chain(layer.log_sigma_raw())
        .chain(&layer.head().weights)
        .chain(&layer.head().bias);
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        let mut filled = 0;
        while filled < N {
            match self.inner.read(&mut buf[filled..])? {
                0 => return Err(self.error("unexpected end of checkpoint")),
                n => filled += n,
            }
        }
        self.offset += N as u64;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        self.bytes::<4>().map(u32::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.bytes::<8>().map(f64::from_le_bytes)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse { offset: self.offset, message: message.into() }
    }
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Layer> {
    let mut cur = Cursor { inner: input, offset: 0 };
    if &cur.bytes::<4>()? != CHECKPOINT_MAGIC {
        return Err(Error::Parse { offset: 0, message: "bad checkpoint magic".into() });
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(cur.error(format!("unsupported checkpoint version {version}")));
    }
    let activation = match cur.u32()? {
        0 => Activation::GaussBell,
        1 => Activation::LogisticSigmoid,
        2 => Activation::IntegratedBell,
        3 => Activation::Relu,
        t => return Err(cur.error(format!("unknown activation tag {t}"))),
    };
    let kernels = cur.u32()? as usize;
    let bins = cur.u32()? as usize;
    let kernel_side = cur.u32()? as usize;
    let boundary = match cur.u32()? {
        0 => BoundaryMode::ZeroPad,
        1 => BoundaryMode::Reflect,
        t => return Err(cur.error(format!("unknown boundary tag {t}"))),
    };
    let sigma_learnable = cur.u32()? != 0;
    let kind = cur.u32()?;
    let outputs = cur.u32()? as usize;
    let width = cur.u32()? as usize;
    let height = cur.u32()? as usize;
    let head = match kind {
        0 => HeadSpec::Dense { outputs, width, height },
        1 => HeadSpec::OneByOne { pooled: false },
        2 => HeadSpec::OneByOne { pooled: true },
        t => return Err(cur.error(format!("unknown head tag {t}"))),
    };
    let smoother = match cur.u32()? {
        0 => {
            cur.f64()?;
            cur.u32()?;
            Smoother::Delta
        }
        1 => {
            let sigma = cur.f64()?;
            let radius = cur.u32()? as usize;
            Smoother::Gaussian { sigma, radius }
        }
        t => return Err(cur.error(format!("unknown smoother tag {t}"))),
    };
    let spec = LayerSpec { activation, kernels, bins, kernel_side, head, boundary, sigma_learnable, smoother };
    let template = Layer::zeroed(spec).map_err(|e| cur.error(e.to_string()))?;
    let per = kernel_side * kernel_side;
    let kernel_list = (0..kernels).map(|_| Kernel::new(kernel_side, cur.f64s(per)?)).collect::<Result<Vec<_>>>()?;
    let c = spec.channels();
    let bias = cur.f64s(c)?;
    let log_sigma = cur.f64s(c)?;
    let weights = cur.f64s(template.head().weights.len())?;
    let head_bias = cur.f64s(template.head().bias.len())?;
    Layer::from_raw(spec, kernel_list, bias, log_sigma, Head { spec: head, weights, bias: head_bias })
}

pub fn save_checkpoint(path: impl AsRef<Path>, layer: &Layer) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, layer)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Layer> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
