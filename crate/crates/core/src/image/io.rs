//! Raster file formats.
//!
//! * LONR: 16-byte header (`b"LONR"`, `u32` width, `u32` height, `u32`
//!   reserved = 0, all little-endian) followed by `width * height`
//!   little-endian `f64` samples in row-major order. Lossless.
//! * PGM (binary `P5`), 8- or 16-bit. Writing maps `[0, 1]` to
//!   `[0, maxval]` (clamped, rounded to nearest); reading divides by `maxval`.
//!   16-bit samples are big-endian as the format requires.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Image;
use crate::error::{argument, Error, Result};

pub const RASTER_MAGIC: &[u8; 4] = b"LONR";

fn parse_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Parse { offset, message: message.into() }
}

pub fn write_raster<W: Write>(mut out: W, img: &Image) -> Result<()> {
    out.write_all(RASTER_MAGIC)?;
    out.write_all(&(img.width() as u32).to_le_bytes())?;
    out.write_all(&(img.height() as u32).to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    for v in img.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_raster<R: Read>(mut input: R) -> Result<Image> {
    let mut header = [0u8; 16];
    read_exact_at(&mut input, &mut header, 0)?;
    if &header[..4] != RASTER_MAGIC {
        return Err(parse_err(0, "bad raster magic"));
    }
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    if width == 0 || height == 0 {
        return Err(parse_err(4, format!("empty raster {width}x{height}")));
    }
    let mut body = vec![0u8; width * height * 8];
    read_exact_at(&mut input, &mut body, 16)?;
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Image::from_vec(width, height, data)
}

fn read_exact_at<R: Read>(input: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..])? {
            0 => return Err(parse_err(offset + filled as u64, "unexpected end of data")),
            n => filled += n,
        }
    }
    Ok(())
}

pub fn save_raster(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_raster(&mut w, img)?;
    w.flush()?;
    Ok(())
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<Image> {
    read_raster(BufReader::new(File::open(path)?))
}

/// Writes a binary PGM; `maxval` must be 255 or 65535.
pub fn write_pgm<W: Write>(mut out: W, img: &Image, maxval: u16) -> Result<()> {
    if maxval != 255 && maxval != u16::MAX {
        return Err(argument(format!("unsupported PGM maxval {maxval}")));
    }
    write!(out, "P5\n{} {}\n{}\n", img.width(), img.height(), maxval)?;
    let m = maxval as f64;
    for &v in img.data() {
        let q = (v.clamp(0.0, 1.0) * m).round() as u16;
        if maxval == 255 {
            out.write_all(&[q as u8])?;
        } else {
            out.write_all(&q.to_be_bytes())?;
        }
    }
    Ok(())
}

/// Min-max normalised 8-bit preview. Returns the `(min, max)` used.
pub fn write_pgm_preview<W: Write>(out: W, img: &Image) -> Result<(f64, f64)> {
    let (lo, hi) = (img.min(), img.max());
    let span = hi - lo;
    let norm = if span > 0.0 { img.map(|v| (v - lo) / span) } else { img.map(|_| 0.0) };
    write_pgm(out, &norm, 255)?;
    Ok((lo, hi))
}

pub fn read_pgm<R: Read>(input: R) -> Result<Image> {
    let mut bytes = Vec::new();
    BufReader::new(input).read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let token = |bytes: &[u8], pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(parse_err(start as u64, "truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&bytes, &mut pos)?;
    if magic != "P5" {
        return Err(parse_err(0, format!("expected P5, found {magic:?}")));
    }
    let number = |bytes: &[u8], pos: &mut usize| -> Result<usize> {
        let at = *pos as u64;
        token(bytes, pos)?.parse::<usize>().map_err(|e| parse_err(at, e.to_string()))
    };
    let width = number(&bytes, &mut pos)?;
    let height = number(&bytes, &mut pos)?;
    let maxval = number(&bytes, &mut pos)?;
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(pos as u64, format!("invalid maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let depth = if maxval < 256 { 1 } else { 2 };
    let need = width * height * depth;
    if bytes.len() < pos + need {
        return Err(parse_err(bytes.len() as u64, "truncated PGM data"));
    }
    let body = &bytes[pos..pos + need];
    let m = maxval as f64;
    let data = if depth == 1 {
        body.iter().map(|&b| b as f64 / m).collect()
    } else {
        body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / m).collect()
    };
    Image::from_vec(width, height, data)
}

pub fn save_pgm(path: impl AsRef<Path>, img: &Image, maxval: u16) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pgm(&mut w, img, maxval)?;
    w.flush()?;
    Ok(())
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    read_pgm(File::open(path)?)
}

/// Loads either format, chosen by the leading magic bytes.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(RASTER_MAGIC) {
        read_raster(&bytes[..])
    } else {
        read_pgm(&bytes[..])
    }
}
