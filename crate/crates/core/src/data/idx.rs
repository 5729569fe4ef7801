//! IDX files (the MNIST container format), optionally gzip-compressed.
//!
//! Layout: big-endian magic `0x0000_08TT` where `TT` is the number of
//! dimensions, one u32 big-endian size per dimension, then row-major
//! unsigned bytes. Images use magic `0x803` (3 dims), labels `0x801`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Decoded IDX payload of unsigned bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset,
        message: message.into(),
    })
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => parse_err(offset, format!("truncated header: need 4 bytes, {} left", bytes.len().saturating_sub(offset))),
    }
}

/// Parses an in-memory IDX buffer and checks the magic number.
pub fn parse_idx(bytes: &[u8], expected_magic: u32) -> Result<IdxArray> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected_magic {
        return parse_err(0, format!("bad magic number 0x{magic:08x}, expected 0x{expected_magic:08x}"));
    }
    let ndims = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(ndims);
    for i in 0..ndims {
        dims.push(read_u32(bytes, 4 + 4 * i)? as usize);
    }
    let header = 4 + 4 * ndims;
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Parse {
            offset: 4,
            message: "dimension product overflows".into(),
        })?;
    let available = bytes.len() - header;
    if available < len {
        return parse_err(bytes.len(), format!("truncated payload: expected {len} bytes after header, found {available}"));
    }
    if available > len {
        return parse_err(header + len, format!("{} trailing bytes after payload", available - len));
    }
    Ok(IdxArray {
        dims,
        data: bytes[header..].to_vec(),
    })
}

/// Reads a file, transparently gunzipping when it starts with the gzip magic.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn read_idx(path: &Path, expected_magic: u32) -> Result<IdxArray> {
    parse_idx(&read_maybe_gz(path)?, expected_magic)
}

pub fn encode_idx(magic: u32, dims: &[usize], data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + data.len());
    out.extend_from_slice(&magic.to_be_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let gz = path.extension().is_some_and(|e| e == "gz");
    if gz {
        let mut enc = GzEncoder::new(fs::File::create(path)?, Compression::default());
        enc.write_all(bytes)?;
        enc.finish()?;
    } else {
        fs::write(path, bytes)?;
    }
    Ok(())
}

/// Writes `count` images of `rows x cols` bytes (row-major, concatenated).
pub fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    if rows * cols == 0 || pixels.len() % (rows * cols) != 0 {
        return Err(Error::Argument(format!(
            "pixel buffer of {} bytes is not a whole number of {rows}x{cols} images",
            pixels.len()
        )));
    }
    let count = pixels.len() / (rows * cols);
    write_bytes(path, &encode_idx(IMAGES_MAGIC, &[count, rows, cols], pixels))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    write_bytes(path, &encode_idx(LABELS_MAGIC, &[labels.len()], labels))
}

/// Bilinear resampling of a grayscale image (pixel-center alignment).
pub fn resize_bilinear(src: &[f64], rows: usize, cols: usize, out_rows: usize, out_cols: usize) -> Vec<f64> {
    if rows == out_rows && cols == out_cols {
        return src.to_vec();
    }
    let sy = rows as f64 / out_rows as f64;
    let sx = cols as f64 / out_cols as f64;
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for r in 0..out_rows {
        let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (rows - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(rows - 1);
        let wy = fy - y0 as f64;
        for c in 0..out_cols {
            let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (cols - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(cols - 1);
            let wx = fx - x0 as f64;
            let top = src[y0 * cols + x0] * (1.0 - wx) + src[y0 * cols + x1] * wx;
            let bot = src[y1 * cols + x0] * (1.0 - wx) + src[y1 * cols + x1] * wx;
            out.push(top * (1.0 - wy) + bot * wy);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let good = encode_idx(LABELS_MAGIC, &[3], &[1, 2, 3]);
        assert_eq!(parse_idx(&good, LABELS_MAGIC).unwrap().data, vec![1, 2, 3]);

        match parse_idx(&good, IMAGES_MAGIC) {
            Err(Error::Parse { offset: 0, .. }) => {}
            other => panic!("expected magic error, got {other:?}"),
        }
        match parse_idx(&good[..good.len() - 1], LABELS_MAGIC) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, good.len() - 1),
            other => panic!("expected truncation error, got {other:?}"),
        }
        match parse_idx(&good[..6], LABELS_MAGIC) {
            Err(Error::Parse { offset: 4, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
        assert!(parse_idx(&[], LABELS_MAGIC).is_err());
    }

    #[test]
    fn constant_image_resizes_to_constant() {
        let src = vec![0.25; 28 * 28];
        let out = resize_bilinear(&src, 28, 28, 32, 32);
        assert_eq!(out.len(), 1024);
        assert!(out.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn resize_preserves_linear_ramp_in_interior() {
        let src: Vec<f64> = (0..16).map(|i| (i % 4) as f64).collect();
        let out = resize_bilinear(&src, 4, 4, 8, 8);
        // each output row is a clamped ramp, identical across rows
        for r in 1..8 {
            assert_eq!(out[r * 8..r * 8 + 8], out[0..8]);
        }
        assert!(out[0..8].windows(2).all(|w| w[1] >= w[0]));
    }
}
