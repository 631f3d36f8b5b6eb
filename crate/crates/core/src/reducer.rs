//! Incremental truncated SVD over a stream of column batches.
//!
//! The running pair `(U, S)` summarizes the Gram matrix of every batch seen so
//! far: after batch `b` it holds the leading left singular vectors and values
//! of `[U·S | X_b]`, whose Gram matrix is `U S² Uᵀ + X_b X_bᵀ`. Raw batches are
//! never retained. Each batch instead keeps its own truncated SVD so that, once
//! the stream ends, its coordinates can be rotated into the final basis
//! without revisiting the data.

use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{self, truncated_svd, Matrix, Precision, TruncatedSvd};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReducerConfig {
    /// Target reduced dimension.
    pub k: usize,
    /// Largest number of vectors accepted per batch.
    pub batch_capacity: usize,
    pub precision: Precision,
}

impl ReducerConfig {
    pub fn new(k: usize, batch_capacity: usize, precision: Precision) -> Result<Self> {
        let cfg = ReducerConfig {
            k,
            batch_capacity,
            precision,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.k == 0 {
            problems.push("k must be at least 1");
        }
        if self.batch_capacity == 0 {
            problems.push("batch capacity must be at least 1");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Archived truncated SVD of one ingested batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchDecomposition {
    pub svd: TruncatedSvd,
    /// 1-based position of the batch in the stream.
    pub batch_index: usize,
    pub batch_size: usize,
}

impl BatchDecomposition {
    /// Values held by the archive entry.
    pub fn retained_values(&self) -> usize {
        self.svd.u.as_slice().len() + self.svd.s.len() + self.svd.v.as_slice().len()
    }
}

/// Finalized basis `U^{1,B}` with its singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalBasis {
    /// m×k_eff orthonormal columns.
    pub u: Matrix,
    pub s: Vec<f64>,
}

impl FinalBasis {
    pub fn new(u: Matrix, s: Vec<f64>) -> Result<Self> {
        if u.cols() != s.len() {
            return Err(Error::Consistency(format!(
                "basis has {} columns but {} singular values",
                u.cols(),
                s.len()
            )));
        }
        Ok(FinalBasis { u, s })
    }

    /// Feature dimensionality m.
    pub fn m(&self) -> usize {
        self.u.rows()
    }

    pub fn k_effective(&self) -> usize {
        self.u.cols()
    }

    pub fn precision(&self) -> Precision {
        self.u.precision()
    }

    /// Projects the columns of `y` (m×q) onto the basis, giving `uᵀ y`.
    pub fn project(&self, y: &Matrix) -> Result<Matrix> {
        if y.rows() != self.m() {
            return Err(Error::shape(
                "query projection",
                format!("queries have {} rows, basis expects {}", y.rows(), self.m()),
            ));
        }
        self.u.tr_matmul(y)
    }
}

/// `uᵀ y`; free-function form of [`FinalBasis::project`].
pub fn project_query(basis: &FinalBasis, y: &Matrix) -> Result<Matrix> {
    basis.project(y)
}

/// Rotation `R_b = Uᵀ U_b S_b` carrying a batch's right singular coordinates
/// into the final basis.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix {
    /// k_eff × k'_b.
    pub matrix: Matrix,
    pub batch_index: usize,
}

/// Output of [`ReducerState::finalize`].
#[derive(Debug, Clone)]
pub struct Finalized {
    pub basis: FinalBasis,
    /// One rotation per archived batch, in archive order.
    pub rotations: Vec<RotationMatrix>,
}

/// Result of a streaming ingest: the batch expressed in the updated basis and
/// the map from the previous basis into it.
#[derive(Debug, Clone)]
pub struct StreamedBatch {
    /// k_new × n_b coordinates `U_newᵀ X_b`.
    pub coords: Matrix,
    /// k_new × k_old transition `U_newᵀ U_old`.
    pub transition: Matrix,
}

/// Running state of the incremental reducer. Single writer.
#[derive(Debug, Clone)]
pub struct ReducerState {
    config: ReducerConfig,
    m: Option<usize>,
    u_cur: Option<Matrix>,
    s_cur: Vec<f64>,
    archive: Vec<BatchDecomposition>,
    total_vectors: usize,
    batches: usize,
}

impl ReducerState {
    pub fn new(config: ReducerConfig) -> Result<Self> {
        config.validate()?;
        Ok(ReducerState {
            config,
            m: None,
            u_cur: None,
            s_cur: Vec::new(),
            archive: Vec::new(),
            total_vectors: 0,
            batches: 0,
        })
    }

    pub fn config(&self) -> &ReducerConfig {
        &self.config
    }

    /// Current basis `U^{1,b}`, if any batch has been ingested.
    pub fn current_basis(&self) -> Option<&Matrix> {
        self.u_cur.as_ref()
    }

    pub fn current_singular_values(&self) -> &[f64] {
        &self.s_cur
    }

    pub fn archive(&self) -> &[BatchDecomposition] {
        &self.archive
    }

    pub fn total_vectors(&self) -> usize {
        self.total_vectors
    }

    pub fn batches_seen(&self) -> usize {
        self.batches
    }

    /// Number of real values currently held: archive plus the running pair.
    pub fn retained_values(&self) -> usize {
        let running = self.u_cur.as_ref().map_or(0, |u| u.as_slice().len()) + self.s_cur.len();
        running
            + self
                .archive
                .iter()
                .map(BatchDecomposition::retained_values)
                .sum::<usize>()
    }

    /// `U S² Uᵀ`, the running approximation of the Gram matrix.
    pub fn gram_estimate(&self) -> Option<Matrix> {
        let u = self.u_cur.as_ref()?;
        let sq: Vec<f64> = self.s_cur.iter().map(|s| s * s).collect();
        Some(
            u.scale_columns(&sq)
                .and_then(|us| us.matmul_tr(u))
                .expect("running pair shapes are consistent"),
        )
    }

    fn check_batch(&self, x_b: &Matrix) -> Result<Matrix> {
        if x_b.cols() == 0 {
            return Err(Error::Data("empty batch".into()));
        }
        if x_b.cols() > self.config.batch_capacity {
            return Err(Error::shape(
                "batch ingest",
                format!(
                    "{} vectors exceed the batch capacity {}",
                    x_b.cols(),
                    self.config.batch_capacity
                ),
            ));
        }
        if let Some(m) = self.m {
            if x_b.rows() != m {
                return Err(Error::shape(
                    "batch ingest",
                    format!("batch has {} rows, earlier batches had {m}", x_b.rows()),
                ));
            }
        } else if x_b.rows() == 0 {
            return Err(Error::Data("batch vectors have zero dimensions".into()));
        }
        Ok(x_b.with_precision(self.config.precision))
    }

    /// Updates the running pair with `x_b`; returns the previous basis.
    fn update_running(&mut self, x_b: &Matrix) -> Result<Matrix> {
        let m = x_b.rows();
        let previous = self
            .u_cur
            .clone()
            .unwrap_or_else(|| Matrix::zeros(m, 0, self.config.precision));
        let scaled = previous.scale_columns(&self.s_cur)?;
        let stacked = scaled.hcat(x_b)?;
        let (u, s) = linalg::truncated_left(&stacked, self.config.k)?;
        self.u_cur = Some(u);
        self.s_cur = s;
        self.m = Some(m);
        self.total_vectors += x_b.cols();
        self.batches += 1;
        Ok(previous)
    }

    /// Ingests one batch: archives its truncated SVD and folds it into the
    /// running pair. The batch itself is not retained.
    pub fn ingest_batch(&mut self, x_b: &Matrix) -> Result<()> {
        let x_b = self.check_batch(x_b)?;
        let d_b = truncated_svd(&x_b, self.config.k)?;
        if self.u_cur.is_none() {
            self.u_cur = Some(d_b.u.clone());
            self.s_cur = d_b.s.clone();
            self.m = Some(x_b.rows());
            self.total_vectors += x_b.cols();
            self.batches += 1;
        } else if d_b.rank() == 0 {
            // An all-zero batch leaves the Gram sum unchanged.
            self.total_vectors += x_b.cols();
            self.batches += 1;
        } else {
            self.update_running(&x_b)?;
        }
        debug!(
            "ingested batch {} ({} vectors): batch rank {}, running rank {}",
            self.batches,
            x_b.cols(),
            d_b.rank(),
            self.s_cur.len()
        );
        self.archive.push(BatchDecomposition {
            svd: d_b,
            batch_index: self.batches,
            batch_size: x_b.cols(),
        });
        Ok(())
    }

    /// Folds a batch into the running pair without archiving it, returning the
    /// batch's coordinates in the updated basis and the transition from the
    /// previous basis. Used when downstream consumers keep their own reduced
    /// copies (incremental sampling) and the archive would be dead weight.
    pub fn ingest_batch_streaming(&mut self, x_b: &Matrix) -> Result<StreamedBatch> {
        let x_b = self.check_batch(x_b)?;
        let previous = self.update_running(&x_b)?;
        let u = self.u_cur.as_ref().expect("set by update_running");
        let coords = u.tr_matmul(&x_b)?;
        let transition = u.tr_matmul(&previous)?;
        Ok(StreamedBatch { coords, transition })
    }

    /// Snapshot of the running pair as a basis.
    pub fn basis(&self) -> Result<FinalBasis> {
        let u = self
            .u_cur
            .clone()
            .ok_or_else(|| Error::State("no batch has been ingested".into()))?;
        FinalBasis::new(u, self.s_cur.clone())
    }

    /// Fixes the final basis and computes one rotation per archived batch.
    pub fn finalize(&self) -> Result<Finalized> {
        let basis = self.basis()?;
        let rotations = self
            .archive
            .iter()
            .map(|d| {
                let us = d.svd.u.scale_columns(&d.svd.s)?;
                Ok(RotationMatrix {
                    matrix: basis.u.tr_matmul(&us)?,
                    batch_index: d.batch_index,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Finalized { basis, rotations })
    }
}

/// Coordinates of a batch in the final basis, `R_b · V_bᵀ` (k_eff × n_b).
pub fn reduce_batch(rot: &RotationMatrix, d_b: &BatchDecomposition) -> Result<Matrix> {
    if rot.batch_index != d_b.batch_index {
        return Err(Error::Usage(format!(
            "rotation for batch {} applied to batch {}",
            rot.batch_index, d_b.batch_index
        )));
    }
    rot.matrix.matmul_tr(&d_b.svd.v)
}
