//! End-to-end training, reduction and scoring over batch streams.

use std::path::Path;

use log::info;
use serde::Serialize;

use crate::array_io::BatchStream;
use crate::bank::{BankMeta, MemoryBank, ScoreReport, FORMAT_VERSION};
use crate::coreset::{greedy_sample, ComparisonCounter, SampleTarget};
use crate::error::{Error, Result};
use crate::incremental::{BufferPolicy, IncrementalSampler, IncrementalSamplerConfig};
use crate::linalg::{Matrix, Precision};
use crate::rate::SampleRate;
use crate::reducer::{reduce_batch, FinalBasis, ReducerConfig, ReducerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainConfig {
    pub k: usize,
    /// Reduction batch size n_b.
    pub n_b: usize,
    pub rate: SampleRate,
    /// Sampling batch size B; defaults to n_b.
    pub sample_batch: Option<usize>,
    pub incremental: bool,
    pub buffer_policy: BufferPolicy,
    /// Working precision; `None` follows the input data.
    pub precision: Option<Precision>,
}

impl TrainConfig {
    pub fn new(k: usize, n_b: usize, rate: SampleRate) -> Self {
        TrainConfig {
            k,
            n_b,
            rate,
            sample_batch: None,
            incremental: false,
            buffer_policy: BufferPolicy::Unbounded,
            precision: None,
        }
    }

    pub fn incremental(mut self, policy: BufferPolicy) -> Self {
        self.incremental = true;
        self.buffer_policy = policy;
        self
    }

    pub fn sample_batch_size(&self) -> usize {
        self.sample_batch.unwrap_or(self.n_b)
    }

    /// Collects every problem into one message. `n_total` enables the check
    /// that the bank would not be empty.
    pub fn validate(&self, n_total: Option<usize>) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        if self.k == 0 {
            problems.push("--k must be at least 1".into());
        }
        if self.n_b == 0 {
            problems.push("--batch-size must be at least 1".into());
        }
        if self.sample_batch == Some(0) {
            problems.push("--sample-batch must be at least 1".into());
        }
        if self.buffer_policy == BufferPolicy::Factor(0) {
            problems.push("buffer factor must be at least 1".into());
        }
        if !self.incremental && self.buffer_policy != BufferPolicy::Unbounded {
            problems.push(format!(
                "--buffer {} needs --incremental-sampling (without it every vector is buffered)",
                self.buffer_policy
            ));
        }
        if let Some(n) = n_total {
            if n == 0 {
                problems.push("the input holds no vectors".into());
            } else if self.rate.floor_of(n as u64) == 0 {
                problems.push(format!(
                    "sample rate {} keeps floor({} * {n}) = 0 vectors",
                    self.rate, self.rate
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrainSummary {
    pub vectors_seen: usize,
    pub k_effective: usize,
    pub bank_size: usize,
    pub anchor_comparisons: u64,
    pub greedy_comparisons: u64,
    pub peak_stored: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub bank: MemoryBank,
    pub summary: TrainSummary,
}

/// Trains a bank from feature files.
pub fn train_files<P: AsRef<Path>>(paths: &[P], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate(None)?;
    let stream = BatchStream::open(paths, config.n_b)?;
    let n = stream.total_vectors();
    config.validate(Some(n))?;
    let precision = config.precision.unwrap_or_else(|| stream.precision());
    train_batches(stream, n, precision, config)
}

/// Trains a bank from an in-memory m × N matrix, split into n_b batches.
pub fn train_matrix(x: &Matrix, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate(Some(x.cols()))?;
    let precision = config.precision.unwrap_or(x.precision());
    train_batches(chunks(x, config.n_b), x.cols(), precision, config)
}

/// Splits the columns of `x` into consecutive batches of at most `size`.
pub fn chunks(x: &Matrix, size: usize) -> impl Iterator<Item = Result<Matrix>> + '_ {
    (0..x.cols())
        .step_by(size.max(1))
        .map(move |start| x.column_range(start, (start + size).min(x.cols())))
}

/// Trains from any sequence of m × (≤ n_b) batches totalling `n_total`.
pub fn train_batches<I>(
    batches: I,
    n_total: usize,
    precision: Precision,
    config: &TrainConfig,
) -> Result<TrainOutput>
where
    I: IntoIterator<Item = Result<Matrix>>,
{
    config.validate(Some(n_total))?;
    let reducer = ReducerState::new(ReducerConfig::new(config.k, config.n_b, precision)?)?;
    let (basis, coords, counter, peak_stored, seen) = if config.incremental {
        train_incremental(batches, reducer, config)?
    } else {
        train_batchless(batches, reducer, config)?
    };
    if seen != n_total {
        return Err(Error::Data(format!(
            "expected {n_total} vectors but the stream yielded {seen}"
        )));
    }

    let meta = BankMeta {
        format_version: FORMAT_VERSION,
        k: config.k,
        k_effective: basis.k_effective(),
        m: basis.m(),
        precision,
        n_b: config.n_b,
        rate: config.rate.to_f64(),
        buffer_policy: config.buffer_policy.to_string(),
        vectors_seen: seen,
    };
    let summary = TrainSummary {
        vectors_seen: seen,
        k_effective: basis.k_effective(),
        bank_size: coords.cols(),
        anchor_comparisons: counter.anchor_comparisons,
        greedy_comparisons: counter.greedy_comparisons,
        peak_stored,
    };
    info!(
        "trained bank: {} of {} vectors, k_eff = {}, {} comparisons",
        summary.bank_size, seen, summary.k_effective, summary.greedy_comparisons
    );
    Ok(TrainOutput {
        bank: MemoryBank::new(basis, coords, meta)?,
        summary,
    })
}

type Trained = (FinalBasis, Matrix, ComparisonCounter, usize, usize);

/// Reduce everything, then sample once over all reduced coordinates.
fn train_batchless<I>(batches: I, reducer: ReducerState, config: &TrainConfig) -> Result<Trained>
where
    I: IntoIterator<Item = Result<Matrix>>,
{
    let (basis, coords) = reduce_all(batches, reducer)?;
    let n = coords.cols();
    let picked = greedy_sample(&coords, SampleTarget::Rate(config.rate))?;
    let bank = coords.select_columns(&picked.indices)?;
    Ok((basis, bank, picked.counter, n, n))
}

/// Ingests all batches, finalizes, and rotates every archived batch into the
/// final basis. Returns the basis and the k_eff × N coordinates.
pub fn reduce_all<I>(batches: I, mut reducer: ReducerState) -> Result<(FinalBasis, Matrix)>
where
    I: IntoIterator<Item = Result<Matrix>>,
{
    for batch in batches {
        reducer.ingest_batch(&batch?)?;
    }
    let fin = reducer.finalize()?;
    let k_eff = fin.basis.k_effective();
    let mut coords = Matrix::zeros(k_eff, 0, fin.basis.precision());
    for (rot, d_b) in fin.rotations.iter().zip(reducer.archive()) {
        coords.append_columns(&reduce_batch(rot, d_b)?)?;
    }
    Ok((fin.basis, coords))
}

/// Streams batches through the reducer without archiving them and feeds the
/// sampler in chunks of B, rotating held coordinates as the basis moves.
fn train_incremental<I>(
    batches: I,
    mut reducer: ReducerState,
    config: &TrainConfig,
) -> Result<Trained>
where
    I: IntoIterator<Item = Result<Matrix>>,
{
    let b = config.sample_batch_size();
    let mut sampler = IncrementalSampler::new(IncrementalSamplerConfig {
        rate: config.rate,
        batch_size: b,
        buffer_policy: config.buffer_policy,
    })?;
    // Coordinates waiting to fill a sampling batch, in the newest basis.
    let mut pending: Option<Matrix> = None;
    // Basis change since the sampler last observed a batch.
    let mut transition_acc: Option<Matrix> = None;
    let mut seen = 0;

    for batch in batches {
        let batch = batch?;
        seen += batch.cols();
        let step = reducer.ingest_batch_streaming(&batch)?;
        transition_acc = Some(match transition_acc.take() {
            Some(t) => step.transition.matmul(&t)?,
            None => step.transition.clone(),
        });
        let mut held = match pending.take() {
            Some(p) => step.transition.matmul(&p)?.hcat(&step.coords)?,
            None => step.coords,
        };
        while held.cols() >= b {
            let chunk = held.column_range(0, b)?;
            held = held.column_range(b, held.cols())?;
            observe(&mut sampler, &chunk, &mut transition_acc)?;
        }
        if held.cols() > 0 {
            pending = Some(held);
        }
    }
    if let Some(rest) = pending.take() {
        observe(&mut sampler, &rest, &mut transition_acc)?;
    }

    let basis = reducer.basis()?;
    let out = sampler.flush()?;
    if out.coords.rows() != basis.k_effective() {
        return Err(Error::Consistency(format!(
            "sampled coordinates have {} dimensions, final basis {}",
            out.coords.rows(),
            basis.k_effective()
        )));
    }
    let held_peak = out.peak_stored;
    Ok((basis, out.coords, out.counter, held_peak, seen))
}

fn observe(
    sampler: &mut IncrementalSampler,
    chunk: &Matrix,
    transition_acc: &mut Option<Matrix>,
) -> Result<()> {
    let transition = transition_acc
        .take()
        .unwrap_or_else(|| Matrix::identity(chunk.rows(), chunk.precision()));
    sampler.observe_batch(chunk, &transition)
}

/// Reduced coordinates of a whole input, as written by the `reduce` command.
#[derive(Debug, Clone)]
pub struct Reduced {
    pub basis: FinalBasis,
    /// k_eff × N.
    pub coords: Matrix,
}

pub fn reduce_files<P: AsRef<Path>>(
    paths: &[P],
    k: usize,
    n_b: usize,
    precision: Option<Precision>,
) -> Result<Reduced> {
    let stream = BatchStream::open(paths, n_b)?;
    if stream.total_vectors() == 0 {
        return Err(Error::Data("the input holds no vectors".into()));
    }
    let precision = precision.unwrap_or_else(|| stream.precision());
    let reducer = ReducerState::new(ReducerConfig::new(k, n_b, precision)?)?;
    let (basis, coords) = reduce_all(stream, reducer)?;
    Ok(Reduced { basis, coords })
}

/// Scores every vector of the given files, streaming them in chunks.
pub fn score_files<P: AsRef<Path>>(bank: &MemoryBank, paths: &[P]) -> Result<ScoreReport> {
    let mut stream = BatchStream::open(paths, 4096)?;
    if stream.m() != bank.basis().m() {
        return Err(Error::Consistency(format!(
            "queries have {} features, the bank was trained on {}",
            stream.m(),
            bank.basis().m()
        )));
    }
    let mut report = ScoreReport {
        per_vector_scores: Vec::with_capacity(stream.total_vectors()),
        nearest_index: Vec::with_capacity(stream.total_vectors()),
        image_score: None,
    };
    while let Some(batch) = stream.next_batch()? {
        let part = bank.score(&batch)?;
        report.per_vector_scores.extend(part.per_vector_scores);
        report.nearest_index.extend(part.nearest_index);
    }
    report.image_score = crate::bank::aggregate_image(&report.per_vector_scores).ok();
    Ok(report)
}
