//! Streaming coreset maintenance.
//!
//! After each trigger the stored samples and the buffered vectors are pooled
//! and resampled down to `floor(r · visited)`. Samples live in the basis that
//! was current at their last resample; a pending transition composed from the
//! per-batch basis changes brings them up to date right before they are
//! pooled. Buffered vectors are always kept in the newest basis.

use std::fmt;
use std::str::FromStr;

use log::debug;

use crate::coreset::{self, ComparisonCounter};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Precision};
use crate::rate::SampleRate;

/// When buffered vectors are folded into the sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BufferPolicy {
    /// Resample after every batch.
    EveryBatch,
    /// Resample once the buffer holds `c` times the current target size.
    Factor(u32),
    /// Never resample before the stream ends; incremental sampling disabled.
    Unbounded,
}

impl fmt::Display for BufferPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BufferPolicy::EveryBatch => f.write_str("no"),
            BufferPolicy::Factor(c) => write!(f, "factor:{c}"),
            BufferPolicy::Unbounded => f.write_str("all"),
        }
    }
}

impl FromStr for BufferPolicy {
    type Err = Error;

    /// Accepts `all`, `no`, `<c>`, `<c>x` and `factor:<c>`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "all" | "unbounded" => return Ok(BufferPolicy::Unbounded),
            "no" | "none" | "every_batch" => return Ok(BufferPolicy::EveryBatch),
            _ => {}
        }
        let digits = t
            .strip_prefix("factor:")
            .unwrap_or(t)
            .trim_end_matches(['x', 'X']);
        match digits.parse::<u32>() {
            Ok(c) if c >= 1 => Ok(BufferPolicy::Factor(c)),
            _ => Err(Error::Config(format!(
                "unknown buffer policy {s:?} (expected all, no, or a factor >= 1)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncrementalSamplerConfig {
    pub rate: SampleRate,
    /// Largest batch accepted by `observe_batch`.
    pub batch_size: usize,
    pub buffer_policy: BufferPolicy,
}

impl IncrementalSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config(
                "sampling batch size must be at least 1".into(),
            ));
        }
        if self.buffer_policy == BufferPolicy::Factor(0) {
            return Err(Error::Config("buffer factor must be at least 1".into()));
        }
        Ok(())
    }
}

/// Final output of a sampling stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBank {
    /// k×M coordinates in the newest basis, in selection order.
    pub coords: Matrix,
    pub counter: ComparisonCounter,
    pub peak_stored: usize,
    pub visited: usize,
}

#[derive(Debug, Clone)]
pub struct IncrementalSampler {
    config: IncrementalSamplerConfig,
    /// Basis dimension of the newest batch.
    dim: Option<usize>,
    samples: Option<Matrix>,
    buffer: Option<Matrix>,
    /// Maps sample coordinates into the newest basis; `None` means identity.
    pending_rotation: Option<Matrix>,
    basis_version: usize,
    batches: usize,
    visited: usize,
    counter: ComparisonCounter,
    peak_stored: usize,
    resamples: usize,
}

impl IncrementalSampler {
    pub fn new(config: IncrementalSamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(IncrementalSampler {
            config,
            dim: None,
            samples: None,
            buffer: None,
            pending_rotation: None,
            basis_version: 0,
            batches: 0,
            visited: 0,
            counter: ComparisonCounter::default(),
            peak_stored: 0,
            resamples: 0,
        })
    }

    pub fn config(&self) -> &IncrementalSamplerConfig {
        &self.config
    }

    pub fn visited(&self) -> usize {
        self.visited
    }

    pub fn counter(&self) -> ComparisonCounter {
        self.counter
    }

    pub fn peak_stored(&self) -> usize {
        self.peak_stored
    }

    /// Batch index whose basis the stored samples are expressed in.
    pub fn basis_version(&self) -> usize {
        self.basis_version
    }

    pub fn resamples(&self) -> usize {
        self.resamples
    }

    pub fn samples(&self) -> Option<&Matrix> {
        self.samples.as_ref()
    }

    pub fn buffer(&self) -> Option<&Matrix> {
        self.buffer.as_ref()
    }

    pub fn pending_rotation(&self) -> Option<&Matrix> {
        self.pending_rotation.as_ref()
    }

    pub fn stored(&self) -> usize {
        self.samples.as_ref().map_or(0, Matrix::cols) + self.buffer.as_ref().map_or(0, Matrix::cols)
    }

    /// Current target bank size `floor(r · visited)`.
    pub fn target(&self) -> usize {
        self.config.rate.floor_of(self.visited as u64) as usize
    }

    /// Observes a batch already expressed in the same basis as the previous one.
    pub fn observe_batch_same_basis(&mut self, batch_coords: &Matrix) -> Result<()> {
        let identity = Matrix::identity(batch_coords.rows(), batch_coords.precision());
        self.observe_batch(batch_coords, &identity)
    }

    /// Observes a batch in the newest basis. `transition` maps coordinates of
    /// the previous basis into the newest one (`U_newᵀ U_old`).
    pub fn observe_batch(&mut self, batch_coords: &Matrix, transition: &Matrix) -> Result<()> {
        if batch_coords.cols() > self.config.batch_size {
            return Err(Error::shape(
                "sampler batch",
                format!(
                    "{} vectors exceed the sampling batch size {}",
                    batch_coords.cols(),
                    self.config.batch_size
                ),
            ));
        }
        let new_dim = batch_coords.rows();
        if transition.rows() != new_dim {
            return Err(Error::shape(
                "sampler transition",
                format!(
                    "transition has {} rows for {new_dim}-dimensional coordinates",
                    transition.rows()
                ),
            ));
        }
        if let Some(dim) = self.dim {
            if transition.cols() != dim {
                return Err(Error::shape(
                    "sampler transition",
                    format!(
                        "transition has {} columns but stored coordinates have {dim} dimensions",
                        transition.cols()
                    ),
                ));
            }
            if !is_identity(transition) {
                self.pending_rotation = Some(match self.pending_rotation.take() {
                    Some(p) => transition.matmul(&p)?,
                    None => transition.clone(),
                });
                if let Some(buf) = self.buffer.take() {
                    self.buffer = Some(transition.matmul(&buf)?);
                }
            }
        }
        self.dim = Some(new_dim);
        self.batches += 1;

        match &mut self.buffer {
            Some(buf) => buf.append_columns(batch_coords)?,
            None => self.buffer = Some(batch_coords.clone()),
        }
        self.visited += batch_coords.cols();
        self.peak_stored = self.peak_stored.max(self.stored());

        if self.should_trigger() {
            self.force_resample()?;
        }
        Ok(())
    }

    fn should_trigger(&self) -> bool {
        let buffered = self.buffer.as_ref().map_or(0, Matrix::cols);
        if buffered == 0 {
            return false;
        }
        match self.config.buffer_policy {
            BufferPolicy::EveryBatch => true,
            BufferPolicy::Factor(c) => buffered as u64 >= u64::from(c) * self.target() as u64,
            BufferPolicy::Unbounded => false,
        }
    }

    fn rotate_samples(&mut self) -> Result<()> {
        if let Some(rot) = self.pending_rotation.take() {
            if let Some(s) = self.samples.take() {
                self.samples = Some(rot.matmul(&s)?);
            }
        }
        self.basis_version = self.batches;
        Ok(())
    }

    /// Pools samples and buffer and resamples to the current target, whether
    /// or not the buffer policy would fire.
    pub fn force_resample(&mut self) -> Result<()> {
        self.rotate_samples()?;
        let buffer = match self.buffer.take() {
            Some(b) => b,
            None => return Ok(()),
        };
        let pool = match self.samples.take() {
            Some(s) => s.hcat(&buffer)?,
            None => buffer,
        };
        let target = self.target().min(pool.cols());
        let picked = coreset::select(&pool, target);
        self.counter.anchor_comparisons += picked.counter.anchor_comparisons;
        self.counter.greedy_comparisons += picked.counter.greedy_comparisons;
        debug!(
            "resample {}: pool {} -> {} ({} comparisons)",
            self.resamples + 1,
            pool.cols(),
            target,
            picked.counter.greedy_comparisons
        );
        self.samples = Some(pool.select_columns(&picked.indices)?);
        self.resamples += 1;
        Ok(())
    }

    /// Drains any buffered vectors and returns the samples in the newest basis.
    pub fn flush(mut self) -> Result<SampledBank> {
        if self.buffer.as_ref().is_some_and(|b| b.cols() > 0) {
            self.force_resample()?;
        }
        self.rotate_samples()?;
        let precision = self
            .samples
            .as_ref()
            .map_or(Precision::Double, Matrix::precision);
        let coords = self
            .samples
            .take()
            .unwrap_or_else(|| Matrix::zeros(self.dim.unwrap_or(0), 0, precision));
        Ok(SampledBank {
            coords,
            counter: self.counter,
            peak_stored: self.peak_stored,
            visited: self.visited,
        })
    }
}

fn is_identity(m: &Matrix) -> bool {
    m.rows() == m.cols()
        && (0..m.cols()).all(|j| {
            m.column(j)
                .iter()
                .enumerate()
                .all(|(i, &v)| v == if i == j { 1.0 } else { 0.0 })
        })
}
