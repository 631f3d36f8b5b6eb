//! Deterministic greedy k-center (farthest-point) coreset selection.
//!
//! The selection starts from a virtual anchor, the mean of all columns, which
//! never enters the result. Every selection round scans all columns, so the
//! number of pairwise distance evaluations is exactly `N·M` for `M` picks.

use std::ops::AddAssign;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::rate::SampleRate;

/// How many columns to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleTarget {
    Count(usize),
    /// `floor(r·N)`, but at least one.
    Rate(SampleRate),
}

impl SampleTarget {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::Config("cannot sample from zero vectors".into()));
        }
        match *self {
            SampleTarget::Count(0) => Err(Error::Config("sample count must be at least 1".into())),
            SampleTarget::Count(m) if m > n => {
                Err(Error::Config(format!("cannot sample {m} vectors from {n}")))
            }
            SampleTarget::Count(m) => Ok(m),
            SampleTarget::Rate(r) => Ok((r.floor_of(n as u64) as usize).max(1)),
        }
    }
}

/// Pairwise distance evaluations performed during sampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ComparisonCounter {
    /// Evaluations against the mean anchor.
    pub anchor_comparisons: u64,
    /// Evaluations during the selection rounds.
    pub greedy_comparisons: u64,
}

impl AddAssign for ComparisonCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.anchor_comparisons += rhs.anchor_comparisons;
        self.greedy_comparisons += rhs.greedy_comparisons;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoresetResult {
    /// Selected column indices in selection order.
    pub indices: Vec<usize>,
    pub counter: ComparisonCounter,
}

/// Euclidean distance between two equal-length vectors.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(
            "distance",
            format!("vectors of length {} and {}", a.len(), b.len()),
        ));
    }
    Ok(squared_distance(a, b).sqrt())
}

/// Column mean of a k×N matrix.
pub fn column_mean(vectors: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; vectors.rows()];
    for col in vectors.columns() {
        for (m, v) in mean.iter_mut().zip(col) {
            *m += v;
        }
    }
    let n = vectors.cols().max(1) as f64;
    for m in &mut mean {
        *m /= n;
    }
    mean
}

/// Greedy farthest-point selection of columns of `vectors` (k×N).
pub fn greedy_sample(vectors: &Matrix, target: SampleTarget) -> Result<CoresetResult> {
    let count = target.resolve(vectors.cols())?;
    Ok(select(vectors, count))
}

/// Selection core. Accepts `count == 0` (anchor pass only) and requires
/// `count <= N`.
pub(crate) fn select(vectors: &Matrix, count: usize) -> CoresetResult {
    let n = vectors.cols();
    debug_assert!(count <= n);
    let mut counter = ComparisonCounter::default();
    if n == 0 {
        return CoresetResult {
            indices: Vec::new(),
            counter,
        };
    }

    let anchor = column_mean(vectors);
    // Squared distances; the ordering matches Euclidean distance.
    let mut min_dist: Vec<f64> = vectors
        .columns()
        .map(|c| squared_distance(c, &anchor))
        .collect();
    counter.anchor_comparisons += n as u64;

    let mut taken = vec![false; n];
    let mut indices = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<usize> = None;
        for (i, &d) in min_dist.iter().enumerate() {
            if taken[i] {
                continue;
            }
            match best {
                Some(b) if min_dist[b] >= d => {}
                _ => best = Some(i),
            }
        }
        let j = best.expect("count <= N leaves an untaken column");
        taken[j] = true;
        indices.push(j);

        let picked = vectors.column(j);
        for (i, col) in vectors.columns().enumerate() {
            let d = squared_distance(col, picked);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
        counter.greedy_comparisons += n as u64;
    }

    CoresetResult { indices, counter }
}

/// Largest distance from any column to its nearest selected column.
pub fn coverage_radius(vectors: &Matrix, selected: &[usize]) -> f64 {
    vectors
        .columns()
        .map(|c| {
            selected
                .iter()
                .map(|&j| squared_distance(c, vectors.column(j)))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0f64, f64::max)
        .sqrt()
}
