//! IDX files as used by MNIST: big-endian magic, dimensions, then `u8`
//! samples. Images (`0x00000803`) are scaled to `[0, 1]` by `/ 255`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{argument, Error, Result};
use crate::image::Image;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse { offset: offset as u64, message: message.into() }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| parse_err(bytes.len(), "truncated IDX header"))
}

pub fn read_idx_images<R: Read>(mut input: R) -> Result<Vec<Image>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let magic = be_u32(&bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(parse_err(0, format!("expected image magic 0x803, found {magic:#x}")));
    }
    let n = be_u32(&bytes, 4)? as usize;
    let rows = be_u32(&bytes, 8)? as usize;
    let cols = be_u32(&bytes, 12)? as usize;
    let per = rows * cols;
    let need = 16 + n * per;
    if bytes.len() < need {
        return Err(parse_err(bytes.len(), format!("truncated IDX data: need {need} bytes")));
    }
    bytes[16..need]
        .chunks_exact(per.max(1))
        .take(n)
        .map(|px| Image::from_vec(cols, rows, px.iter().map(|&b| b as f64 / 255.0).collect()))
        .collect()
}

pub fn read_idx_labels<R: Read>(mut input: R) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let magic = be_u32(&bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(parse_err(0, format!("expected label magic 0x801, found {magic:#x}")));
    }
    let n = be_u32(&bytes, 4)? as usize;
    if bytes.len() < 8 + n {
        return Err(parse_err(bytes.len(), "truncated IDX labels"));
    }
    Ok(bytes[8..8 + n].to_vec())
}

/// Writes images quantised to `u8` (`round(255 v)`, clamped).
pub fn write_idx_images<W: Write>(mut out: W, images: &[Image]) -> Result<()> {
    let (w, h) = images.first().map_or((0, 0), |i| (i.width(), i.height()));
    if images.iter().any(|i| i.width() != w || i.height() != h) {
        return Err(argument("IDX images must share one size"));
    }
    out.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    for d in [images.len(), h, w] {
        out.write_all(&(d as u32).to_be_bytes())?;
    }
    for img in images {
        let px: Vec<u8> = img.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        out.write_all(&px)?;
    }
    Ok(())
}

pub fn write_idx_labels<W: Write>(mut out: W, labels: &[u8]) -> Result<()> {
    out.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    out.write_all(&(labels.len() as u32).to_be_bytes())?;
    out.write_all(labels)?;
    Ok(())
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<Vec<Image>> {
    read_idx_images(BufReader::new(File::open(path)?))
}

pub fn save_idx(path: impl AsRef<Path>, images: &[Image]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_idx_images(&mut w, images)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2];
        b.extend_from_slice(&[0, 128, 255, 64]);
        b
    }

    #[test]
    fn reads_hand_built_fixture() {
        let imgs = read_idx_images(&fixture()[..]).unwrap();
        assert_eq!(imgs.len(), 1);
        assert_eq!(imgs[0].data(), &[0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0]);
    }

    #[test]
    fn truncation_and_magic_errors() {
        assert!(matches!(read_idx_images(&fixture()[..10]), Err(Error::Parse { .. })));
        match read_idx_images(&fixture()[..18]) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 18),
            other => panic!("{other:?}"),
        }
        let mut bad = fixture();
        bad[3] = 1;
        assert!(read_idx_images(&bad[..]).is_err());
        assert!(read_idx_labels(&fixture()[..]).is_err());
    }

    #[test]
    fn write_then_read_is_identical() {
        let imgs = read_idx_images(&fixture()[..]).unwrap();
        let mut buf = Vec::new();
        write_idx_images(&mut buf, &imgs).unwrap();
        assert_eq!(buf, fixture());
        let mut lb = Vec::new();
        write_idx_labels(&mut lb, &[3, 1, 4]).unwrap();
        assert_eq!(read_idx_labels(&lb[..]).unwrap(), vec![3, 1, 4]);
    }
}
