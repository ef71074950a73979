//! File formats: a little-endian, C-order subset of NPY v1.0 for tensors,
//! masks and matrices, plus binary PGM export of masks.

mod npy;
mod pgm;

pub use npy::{Dtype, NpyArray};
pub use pgm::{read_pgm, write_pgm};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, LabelMask};

/// Reads an `(H, W, C)` float32/float64 NPY file, widening to f64.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let bytes = fs::read(path)?;
    let arr = NpyArray::parse(&bytes)?;
    if arr.shape.len() != 3 {
        return Err(Error::UnsupportedLayout(format!(
            "feature tensor must be rank 3, got shape {:?}",
            arr.shape
        )));
    }
    let data = arr.to_f64()?;
    FeatureMap::new(arr.shape[0], arr.shape[1], arr.shape[2], data)
}

/// Writes `fm` as `<f8`, C order, shape `(H, W, C)`.
pub fn save_tensor(fm: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let shape = [fm.height(), fm.width(), fm.channels()];
    write_file(path, &npy::encode_f64(&shape, fm.data()))
}

/// Reads a rank-2 unsigned 8- or 32-bit integer NPY mask.
pub fn load_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    let bytes = fs::read(path)?;
    let arr = NpyArray::parse(&bytes)?;
    if arr.shape.len() != 2 {
        return Err(Error::UnsupportedLayout(format!(
            "mask must be rank 2, got shape {:?}",
            arr.shape
        )));
    }
    let labels = arr.to_u32()?;
    LabelMask::new(arr.shape[0], arr.shape[1], labels)
}

/// Writes a mask as `|u1` when every label fits in a byte, `<u4` otherwise.
pub fn save_mask(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    write_file(path, &encode_mask(mask))
}

pub(crate) fn encode_mask(mask: &LabelMask) -> Vec<u8> {
    let shape = [mask.height(), mask.width()];
    if mask.max_label() <= u32::from(u8::MAX) {
        let bytes: Vec<u8> = mask.labels().iter().map(|&l| l as u8).collect();
        npy::encode_u8(&shape, &bytes)
    } else {
        npy::encode_u32(&shape, mask.labels())
    }
}

/// Writes a mask as a binary PGM (P5, maxval 255), labels written verbatim.
pub fn save_mask_pgm(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_pgm(&mut buf, mask)?;
    write_file(path, &buf)
}

/// Writes a row-major `rows x cols` f64 matrix (affinity export).
pub fn save_matrix(rows: usize, cols: usize, values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    if values.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{} values cannot fill a {rows}x{cols} matrix",
            values.len()
        )));
    }
    write_file(path, &npy::encode_f64(&[rows, cols], values))
}

/// Reads a rank-2 float NPY matrix as `(rows, cols, values)`.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let arr = NpyArray::parse(&bytes)?;
    if arr.shape.len() != 2 {
        return Err(Error::UnsupportedLayout(format!(
            "matrix must be rank 2, got shape {:?}",
            arr.shape
        )));
    }
    let values = arr.to_f64()?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidValue(format!("non-finite value at flat index {i}")));
    }
    Ok((arr.shape[0], arr.shape[1], values))
}

fn write_file(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}
