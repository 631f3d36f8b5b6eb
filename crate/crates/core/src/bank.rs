//! The trained artifact: final basis plus coreset coordinates.
//!
//! On disk a bank is a directory holding `basis.npy` (m × k_eff), `svals.npy`
//! (k_eff), `bank.npy` (k_eff × M) and `meta.json`. Arrays use `<f4` for
//! single-precision banks and `<f8` otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array_io::{self, dtype_of, Dtype, NpyArray};
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix, Precision};
use crate::reducer::FinalBasis;

pub const FORMAT_VERSION: u32 = 1;
pub const BASIS_FILE: &str = "basis.npy";
pub const SVALS_FILE: &str = "svals.npy";
pub const COORDS_FILE: &str = "bank.npy";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankMeta {
    pub format_version: u32,
    /// Requested reduced dimension.
    pub k: usize,
    pub k_effective: usize,
    pub m: usize,
    pub precision: Precision,
    /// Reduction batch size.
    pub n_b: usize,
    pub rate: f64,
    pub buffer_policy: String,
    pub vectors_seen: usize,
}

impl BankMeta {
    /// Parses `meta.json`, checking the format version before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("{META_FILE}: {e}")))?;
        let version = value
            .get("format_version")
            .ok_or_else(|| Error::Format(format!("{META_FILE}: missing format_version")))?;
        if version.as_u64() != Some(u64::from(FORMAT_VERSION)) {
            return Err(Error::Version {
                found: version.to_string(),
                expected: FORMAT_VERSION.to_string(),
            });
        }
        serde_json::from_value(value).map_err(|e| Error::Format(format!("{META_FILE}: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("meta serializes");
        s.push('\n');
        s
    }
}

/// Per-query nearest-entry scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub per_vector_scores: Vec<f64>,
    /// Bank column nearest to each query.
    pub nearest_index: Vec<usize>,
    /// Maximum over all scores; `None` for an empty query set.
    pub image_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    basis: FinalBasis,
    coords: Matrix,
    meta: BankMeta,
}

impl MemoryBank {
    pub fn new(basis: FinalBasis, coords: Matrix, meta: BankMeta) -> Result<Self> {
        if coords.cols() == 0 {
            return Err(Error::Data("memory bank has no entries".into()));
        }
        if coords.rows() != basis.k_effective() {
            return Err(Error::Consistency(format!(
                "bank coordinates have {} rows but the basis has {} columns",
                coords.rows(),
                basis.k_effective()
            )));
        }
        if meta.k_effective != basis.k_effective() {
            return Err(Error::Consistency(format!(
                "meta k_effective = {} but the basis has {} columns",
                meta.k_effective,
                basis.k_effective()
            )));
        }
        if meta.m != basis.m() {
            return Err(Error::Consistency(format!(
                "meta m = {} but the basis has {} rows",
                meta.m,
                basis.m()
            )));
        }
        if meta.k_effective > meta.k {
            return Err(Error::Consistency(format!(
                "k_effective = {} exceeds k = {}",
                meta.k_effective, meta.k
            )));
        }
        Ok(MemoryBank {
            basis,
            coords,
            meta,
        })
    }

    pub fn basis(&self) -> &FinalBasis {
        &self.basis
    }

    pub fn coords(&self) -> &Matrix {
        &self.coords
    }

    pub fn meta(&self) -> &BankMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.coords.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.cols() == 0
    }

    /// Scores m × q raw queries against the bank.
    pub fn score(&self, queries: &Matrix) -> Result<ScoreReport> {
        if queries.rows() != self.basis.m() {
            return Err(Error::Consistency(format!(
                "queries have {} features, the bank was trained on {}",
                queries.rows(),
                self.basis.m()
            )));
        }
        let projected = self.basis.project(queries)?;
        nearest(&self.coords, &projected)
    }
}

/// Nearest bank column for each projected query (ties go to the smaller
/// index), with Euclidean distances.
pub fn nearest(bank: &Matrix, projected: &Matrix) -> Result<ScoreReport> {
    if bank.cols() == 0 {
        return Err(Error::Data("memory bank has no entries".into()));
    }
    if bank.rows() != projected.rows() {
        return Err(Error::shape(
            "nearest entry",
            format!(
                "bank entries have {} dimensions, queries {}",
                bank.rows(),
                projected.rows()
            ),
        ));
    }
    let mut per_vector_scores = Vec::with_capacity(projected.cols());
    let mut nearest_index = Vec::with_capacity(projected.cols());
    for q in projected.columns() {
        let mut best = (f64::INFINITY, 0);
        for (j, entry) in bank.columns().enumerate() {
            let d = squared_distance(q, entry);
            if d < best.0 {
                best = (d, j);
            }
        }
        per_vector_scores.push(best.0.sqrt());
        nearest_index.push(best.1);
    }
    let image_score = aggregate_image(&per_vector_scores).ok();
    Ok(ScoreReport {
        per_vector_scores,
        nearest_index,
        image_score,
    })
}

/// Image-level score: the maximum patch score.
pub fn aggregate_image(scores: &[f64]) -> Result<f64> {
    scores
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::Data("cannot aggregate an empty score list".into()))
}

impl MemoryBank {
    /// Writes the bank into `dir`, creating it if needed. On failure every
    /// file written by this call is removed again.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let created = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written: Vec<PathBuf> = Vec::new();
        let result = self.write_files(dir, &mut written);
        if result.is_err() {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            if created {
                let _ = fs::remove_dir(dir);
            }
        }
        result
    }

    fn write_files(&self, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
        let dtype = dtype_of(self.meta.precision);
        let files: [(&str, Vec<u8>); 4] = [
            (BASIS_FILE, natural_bytes(&self.basis.u, dtype)),
            (
                SVALS_FILE,
                array_io::encode_array(dtype, &[self.basis.s.len()], &self.basis.s),
            ),
            (COORDS_FILE, natural_bytes(&self.coords, dtype)),
            (META_FILE, self.meta.to_json().into_bytes()),
        ];
        for (name, bytes) in files {
            let path = dir.join(name);
            let tmp = dir.join(format!(".{name}.partial"));
            written.push(tmp.clone());
            fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
            written.push(path.clone());
            fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Loads and cross-checks a bank directory. Nothing is returned unless
    /// every file is intact and consistent.
    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta = BankMeta::from_json(&text)?;
        let dtype = dtype_of(meta.precision);

        let basis = load_natural(&dir.join(BASIS_FILE), dtype)?;
        let svals_path = dir.join(SVALS_FILE);
        let (s, svals_dtype) = array_io::read_vector(&svals_path)?;
        check_dtype(&svals_path, svals_dtype, dtype)?;
        let coords = load_natural(&dir.join(COORDS_FILE), dtype)?;

        if s.len() != basis.cols() {
            return Err(Error::Consistency(format!(
                "{SVALS_FILE} has {} values but {BASIS_FILE} has {} columns",
                s.len(),
                basis.cols()
            )));
        }
        if meta.k_effective != coords.rows() {
            return Err(Error::Consistency(format!(
                "meta k_effective = {} but {COORDS_FILE} has {} rows",
                meta.k_effective,
                coords.rows()
            )));
        }
        let basis = FinalBasis::new(basis, s)?;
        MemoryBank::new(basis, coords, meta)
    }
}

fn natural_bytes(x: &Matrix, dtype: Dtype) -> Vec<u8> {
    array_io::encode_array(dtype, &[x.rows(), x.cols()], x.transpose().as_slice())
}

fn check_dtype(path: &Path, found: Dtype, expected: Dtype) -> Result<()> {
    if found != expected {
        return Err(Error::Consistency(format!(
            "{} stores {found} but the bank precision needs {expected}",
            path.display()
        )));
    }
    Ok(())
}

fn load_natural(path: &Path, dtype: Dtype) -> Result<Matrix> {
    let arr = NpyArray::read(path)?;
    check_dtype(path, arr.header.dtype, dtype)?;
    if arr.header.shape.len() != 2 {
        return Err(Error::Format(format!(
            "{}: expected a 2-D array, found shape {:?}",
            path.display(),
            arr.header.shape
        )));
    }
    let (rows, cols) = (arr.header.shape[0], arr.header.shape[1]);
    let precision = arr.precision();
    Ok(Matrix::from_col_major(cols, rows, arr.values, precision)?.transpose())
}
