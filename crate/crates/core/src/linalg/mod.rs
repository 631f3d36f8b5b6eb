//! Small dense linear-algebra kernel.
//!
//! Matrices are column-major and always computed in double precision. A
//! [`Precision::Single`] matrix holds values that are exactly representable
//! as `f32`; results derived from single-precision operands are rounded back
//! to single precision on output.

mod svd;

pub(crate) use svd::truncated_left;
pub use svd::{truncated_svd, TruncatedSvd};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    /// Unit roundoff of the storage format.
    pub fn unit_roundoff(self) -> f64 {
        match self {
            Precision::Single => f64::from(f32::EPSILON) / 2.0,
            Precision::Double => f64::EPSILON / 2.0,
        }
    }

    /// Orthonormality and reconstruction tolerance used throughout the crate.
    pub fn tolerance(self) -> f64 {
        match self {
            Precision::Single => 1e-5,
            Precision::Double => 1e-10,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }

    /// The lower of the two precisions.
    pub fn combine(self, other: Precision) -> Precision {
        if self == Precision::Single || other == Precision::Single {
            Precision::Single
        } else {
            Precision::Double
        }
    }

    #[inline]
    fn round(self, v: f64) -> f64 {
        match self {
            Precision::Single => v as f32 as f64,
            Precision::Double => v,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(Error::Config(format!(
                "unknown precision {other:?} (expected single or double)"
            ))),
        }
    }
}

/// Dense column-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    precision: Precision,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} ({})", self.rows, self.cols, self.precision)?;
        for i in 0..self.rows.min(8) {
            let row: Vec<String> = (0..self.cols.min(8))
                .map(|j| format!("{:>10.4}", self.get(i, j)))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize, precision: Precision) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            precision,
        }
    }

    pub fn identity(n: usize, precision: Precision) -> Self {
        let mut m = Matrix::zeros(n, n, precision);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from column-major values, rejecting non-finite entries.
    pub fn from_col_major(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        precision: Precision,
    ) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "matrix construction",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at row {}, column {}",
                pos % rows.max(1),
                pos / rows.max(1)
            )));
        }
        Ok(Matrix::from_parts(rows, cols, data, precision))
    }

    /// Builds a matrix from row-major values. Mostly useful for literals.
    pub fn from_rows(rows: &[&[f64]], precision: Precision) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::shape("matrix construction", "ragged rows"));
        }
        let mut data = vec![0.0; n_rows * n_cols];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data[j * n_rows + i] = v;
            }
        }
        Matrix::from_col_major(n_rows, n_cols, data, precision)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(
        rows: usize,
        columns: &[C],
        precision: Precision,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::shape(
                    "matrix construction",
                    format!("column of length {} for {rows} rows", c.len()),
                ));
            }
            data.extend_from_slice(c);
        }
        Matrix::from_col_major(rows, columns.len(), data, precision)
    }

    pub fn diag(values: &[f64], precision: Precision) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n, precision);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = precision.round(v);
        }
        m
    }

    /// Trusted constructor for kernel results: rounds to `precision`, skips the
    /// finiteness scan.
    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        mut data: Vec<f64>,
        precision: Precision,
    ) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        if precision == Precision::Single {
            for v in &mut data {
                *v = *v as f32 as f64;
            }
        }
        Matrix {
            rows,
            cols,
            data,
            precision,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    /// Column-major values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.cols).map(move |j| self.column(j))
    }

    /// Returns a copy stored at `precision`.
    pub fn with_precision(&self, precision: Precision) -> Matrix {
        if precision == self.precision {
            return self.clone();
        }
        Matrix::from_parts(self.rows, self.cols, self.data.clone(), precision)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for j in 0..self.cols {
            for i in 0..self.rows {
                out[i * self.cols + j] = self.data[j * self.rows + i];
            }
        }
        Matrix::from_parts(self.cols, self.rows, out, self.precision)
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let (m, p) = (self.rows, other.cols);
        let mut out = vec![0.0; m * p];
        for j in 0..p {
            let dst = &mut out[j * m..(j + 1) * m];
            for (l, &b) in other.column(j).iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                for (d, &a) in dst.iter_mut().zip(self.column(l)) {
                    *d += a * b;
                }
            }
        }
        Ok(Matrix::from_parts(
            m,
            p,
            out,
            self.precision.combine(other.precision),
        ))
    }

    /// `selfᵀ * other`.
    pub fn tr_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "transpose matmul",
                format!(
                    "({}x{})ᵀ times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let (m, p) = (self.cols, other.cols);
        let mut out = vec![0.0; m * p];
        for j in 0..p {
            let b = other.column(j);
            for i in 0..m {
                out[j * m + i] = dot(self.column(i), b);
            }
        }
        Ok(Matrix::from_parts(
            m,
            p,
            out,
            self.precision.combine(other.precision),
        ))
    }

    /// `self * otherᵀ`.
    pub fn matmul_tr(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul transpose",
                format!(
                    "{}x{} times ({}x{})ᵀ",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let (m, p) = (self.rows, other.rows);
        let mut out = vec![0.0; m * p];
        for l in 0..self.cols {
            let a = self.column(l);
            let b = other.column(l);
            for (j, &bj) in b.iter().enumerate() {
                if bj == 0.0 {
                    continue;
                }
                let dst = &mut out[j * m..(j + 1) * m];
                for (d, &ai) in dst.iter_mut().zip(a) {
                    *d += ai * bj;
                }
            }
        }
        Ok(Matrix::from_parts(
            m,
            p,
            out,
            self.precision.combine(other.precision),
        ))
    }

    /// `self * diag(scale)`.
    pub fn scale_columns(&self, scale: &[f64]) -> Result<Matrix> {
        if scale.len() != self.cols {
            return Err(Error::shape(
                "column scaling",
                format!("{} factors for {} columns", scale.len(), self.cols),
            ));
        }
        let mut out = self.data.clone();
        for (j, &s) in scale.iter().enumerate() {
            for v in &mut out[j * self.rows..(j + 1) * self.rows] {
                *v *= s;
            }
        }
        Ok(Matrix::from_parts(
            self.rows,
            self.cols,
            out,
            self.precision,
        ))
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Matrix {
        let out = self.data.iter().map(|v| v * factor).collect();
        Matrix::from_parts(self.rows, self.cols, out, self.precision)
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "horizontal concatenation",
                format!("{} rows next to {} rows", self.rows, other.rows),
            ));
        }
        let mut out = Vec::with_capacity(self.data.len() + other.data.len());
        out.extend_from_slice(&self.data);
        out.extend_from_slice(&other.data);
        Ok(Matrix::from_parts(
            self.rows,
            self.cols + other.cols,
            out,
            self.precision.combine(other.precision),
        ))
    }

    /// Appends the columns of `other` in place.
    pub fn append_columns(&mut self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "column append",
                format!("{} rows onto {} rows", other.rows, self.rows),
            ));
        }
        let precision = self.precision.combine(other.precision);
        self.data.extend_from_slice(&other.data);
        self.cols += other.cols;
        if precision != self.precision {
            *self = self.with_precision(precision);
        }
        Ok(())
    }

    /// Copies the listed columns, in order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Matrix> {
        let mut out = Vec::with_capacity(self.rows * indices.len());
        for &j in indices {
            if j >= self.cols {
                return Err(Error::shape(
                    "column selection",
                    format!("index {j} out of {} columns", self.cols),
                ));
            }
            out.extend_from_slice(self.column(j));
        }
        Ok(Matrix::from_parts(
            self.rows,
            indices.len(),
            out,
            self.precision,
        ))
    }

    /// Copies columns `start..end`.
    pub fn column_range(&self, start: usize, end: usize) -> Result<Matrix> {
        if start > end || end > self.cols {
            return Err(Error::shape(
                "column range",
                format!("{start}..{end} out of {} columns", self.cols),
            ));
        }
        let out = self.data[start * self.rows..end * self.rows].to_vec();
        Ok(Matrix::from_parts(
            self.rows,
            end - start,
            out,
            self.precision,
        ))
    }

    /// Copies the leading `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        let k = k.min(self.cols);
        Matrix::from_parts(
            self.rows,
            k,
            self.data[..k * self.rows].to_vec(),
            self.precision,
        )
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                "subtraction",
                format!(
                    "{}x{} minus {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let out = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix::from_parts(
            self.rows,
            self.cols,
            out,
            self.precision.combine(other.precision),
        ))
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    /// Largest absolute entry-wise difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Flips the sign of column `j`.
    pub fn negate_column(&mut self, j: usize) {
        for v in &mut self.data[j * self.rows..(j + 1) * self.rows] {
            *v = -*v;
        }
    }
}

/// `sqrt(sum x_ij^2)`, scaled to avoid overflow.
pub fn frobenius_norm(x: &Matrix) -> f64 {
    norm2(&x.data)
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * sum.sqrt()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}
