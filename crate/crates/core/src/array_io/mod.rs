//! `.npy` (format 1.0) reading, writing and batch streaming.
//!
//! Feature files store one vector per row, shape `(n_vectors, m)`. In memory
//! the same data is an `m × n` column-major [`Matrix`], so a C-order feature
//! file and the matrix buffer have identical element order.

mod header;
mod stream;

pub use header::{encode_header, header_len, parse_header, Dtype, NpyHeader, MAGIC};
pub use stream::BatchStream;

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Precision};

/// Header of a 2-D feature file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayHeader {
    pub dtype: Dtype,
    pub n_vectors: usize,
    pub m: usize,
    pub data_offset: usize,
}

impl ArrayHeader {
    pub fn from_npy(h: &NpyHeader) -> Result<Self> {
        match h.shape[..] {
            [n_vectors, m] => Ok(ArrayHeader {
                dtype: h.dtype,
                n_vectors,
                m,
                data_offset: h.data_offset,
            }),
            _ => Err(Error::Format(format!(
                "expected a 2-D array, found shape {:?}",
                h.shape
            ))),
        }
    }

    pub fn precision(&self) -> Precision {
        precision_of(self.dtype)
    }

    pub fn data_len(&self) -> Option<usize> {
        self.n_vectors
            .checked_mul(self.m)?
            .checked_mul(self.dtype.size())
    }
}

pub fn precision_of(dtype: Dtype) -> Precision {
    match dtype {
        Dtype::F4 => Precision::Single,
        Dtype::F8 => Precision::Double,
    }
}

pub fn dtype_of(precision: Precision) -> Dtype {
    match precision {
        Precision::Single => Dtype::F4,
        Precision::Double => Dtype::F8,
    }
}

/// Reads only the header bytes of `path`.
pub fn read_npy_header(path: &Path) -> Result<NpyHeader> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut preamble = [0u8; 10];
    read_prefix(&mut file, &mut preamble, path)?;
    let total = header_len(&preamble).map_err(|e| in_file(path, e))?;
    let mut bytes = preamble.to_vec();
    bytes.resize(total, 0);
    read_prefix(&mut file, &mut bytes[10..], path)?;
    parse_header(&bytes).map_err(|e| in_file(path, e))
}

/// Reads and validates the header of a 2-D feature file.
pub fn read_header(path: &Path) -> Result<ArrayHeader> {
    ArrayHeader::from_npy(&read_npy_header(path)?).map_err(|e| in_file(path, e))
}

fn read_prefix(file: &mut fs::File, buf: &mut [u8], path: &Path) -> Result<()> {
    file.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            Error::Format(format!("{}: file ends inside the header", path.display()))
        }
        _ => Error::io(path, e),
    })
}

/// Prefixes format and data errors with the file name.
pub(crate) fn in_file(path: &Path, err: Error) -> Error {
    match err {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    }
}

/// A fully decoded array of any supported rank.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub header: NpyHeader,
    /// Elements in C order, widened to `f64`.
    pub values: Vec<f64>,
}

impl NpyArray {
    /// Decodes a complete file image. The data section must have exactly the
    /// declared length and every element must be finite.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = parse_header(bytes)?;
        let expected = header
            .data_len()
            .ok_or_else(|| Error::Format(format!("shape {:?} overflows", header.shape)))?;
        let data = &bytes[header.data_offset..];
        if data.len() < expected {
            return Err(Error::Data(format!(
                "truncated data: {} of {expected} bytes present",
                data.len()
            )));
        }
        if data.len() > expected {
            return Err(Error::Data(format!(
                "{} trailing bytes after the data section",
                data.len() - expected
            )));
        }
        let size = header.dtype.size();
        let row_len = header.shape.last().copied().unwrap_or(1).max(1);
        let mut values = Vec::with_capacity(expected / size);
        for (i, chunk) in data.chunks_exact(size).enumerate() {
            let v = header.dtype.decode(chunk);
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite value at row {}, column {}",
                    i / row_len,
                    i % row_len
                )));
            }
            values.push(v);
        }
        Ok(NpyArray { header, values })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        NpyArray::from_bytes(&bytes).map_err(|e| in_file(path, e))
    }

    pub fn precision(&self) -> Precision {
        precision_of(self.header.dtype)
    }
}

/// Serializes C-order `values` with the given shape.
pub fn encode_array(dtype: Dtype, shape: &[usize], values: &[f64]) -> Vec<u8> {
    debug_assert_eq!(shape.iter().product::<usize>(), values.len());
    let mut out = encode_header(dtype, shape);
    out.reserve(values.len() * dtype.size());
    for &v in values {
        dtype.encode(v, &mut out);
    }
    out
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `x` (m × n) as a feature file of shape `(n, m)`.
pub fn write_matrix(path: &Path, x: &Matrix, dtype: Dtype) -> Result<()> {
    write_bytes(
        path,
        &encode_array(dtype, &[x.cols(), x.rows()], x.as_slice()),
    )
}

/// Reads a feature file of shape `(n, m)` into an m × n matrix.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let arr = NpyArray::read(path)?;
    let h = ArrayHeader::from_npy(&arr.header).map_err(|e| in_file(path, e))?;
    Matrix::from_col_major(h.m, h.n_vectors, arr.values, h.precision())
}

/// Writes `x` in its natural orientation: disk shape `(rows, cols)`.
pub fn write_array2(path: &Path, x: &Matrix, dtype: Dtype) -> Result<()> {
    let t = x.transpose();
    write_bytes(
        path,
        &encode_array(dtype, &[x.rows(), x.cols()], t.as_slice()),
    )
}

/// Reads a 2-D array in its natural orientation.
pub fn read_array2(path: &Path) -> Result<Matrix> {
    let arr = NpyArray::read(path)?;
    let h = ArrayHeader::from_npy(&arr.header).map_err(|e| in_file(path, e))?;
    let (rows, cols) = (h.n_vectors, h.m);
    // C order of (rows, cols) is column-major of the transpose.
    Ok(Matrix::from_col_major(cols, rows, arr.values, h.precision())?.transpose())
}

pub fn write_vector(path: &Path, values: &[f64], dtype: Dtype) -> Result<()> {
    write_bytes(path, &encode_array(dtype, &[values.len()], values))
}

pub fn read_vector(path: &Path) -> Result<(Vec<f64>, Dtype)> {
    let arr = NpyArray::read(path)?;
    if arr.header.shape.len() != 1 {
        return Err(Error::Format(format!(
            "{}: expected a 1-D array, found shape {:?}",
            path.display(),
            arr.header.shape
        )));
    }
    Ok((arr.values, arr.header.dtype))
}
