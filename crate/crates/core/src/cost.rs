//! Closed-form comparison counts for batchless and incremental sampling.
//!
//! All predictions are exact integers; the closed forms are evaluated in
//! rational arithmetic and must reduce to integers. Inputs that would need
//! rounding are rejected rather than rounded.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rate::SampleRate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostQuery {
    /// Total number of vectors N.
    pub n_total: u64,
    /// Vectors per batch B.
    pub batch: u64,
    pub rate: SampleRate,
}

/// The two parts of the incremental count: `rB²·Σb` and `r²B²·Σ(b−1)b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosedForm {
    pub half_term: u128,
    pub extra_term: u128,
}

impl ClosedForm {
    pub fn total(&self) -> u128 {
        self.half_term + self.extra_term
    }
}

impl CostQuery {
    pub fn new(n_total: u64, batch: u64, rate: SampleRate) -> Result<Self> {
        let q = CostQuery {
            n_total,
            batch,
            rate,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.n_total < self.batch {
            return Err(Error::Config(format!(
                "N = {} is smaller than the batch size {}",
                self.n_total, self.batch
            )));
        }
        Ok(())
    }

    fn batches(&self) -> Result<u64> {
        self.validate()?;
        if !self.n_total.is_multiple_of(self.batch) {
            return Err(Error::Config(format!(
                "N = {} is not a multiple of B = {}",
                self.n_total, self.batch
            )));
        }
        if !self.rate.divides(self.batch) {
            return Err(Error::Config(format!(
                "r·B = {}·{} is not an integer",
                self.rate, self.batch
            )));
        }
        Ok(self.n_total / self.batch)
    }

    fn rate(&self) -> Ratio<i128> {
        Ratio::new(i128::from(self.rate.numer()), i128::from(self.rate.denom()))
    }
}

/// `N · (N·r)`: comparisons to sample `N·r` vectors from all `N` at once.
pub fn predict_batchless(q: &CostQuery) -> Result<u128> {
    q.validate()?;
    if !q.rate.divides(q.n_total) {
        return Err(Error::Config(format!(
            "r·N = {}·{} is not an integer",
            q.rate, q.n_total
        )));
    }
    Ok(u128::from(q.n_total) * u128::from(q.rate.floor_of(q.n_total)))
}

/// `Σ_{b=1}^{N/B} [B + r(b−1)B]·[rbB]`, summed term by term.
pub fn predict_incremental_sum(q: &CostQuery) -> Result<u128> {
    Ok(incremental_terms(q)?.iter().sum())
}

/// The individual per-batch terms `[B + r(b−1)B]·[rbB]`.
pub fn incremental_terms(q: &CostQuery) -> Result<Vec<u128>> {
    let batches = q.batches()?;
    let b_size = u128::from(q.batch);
    let kept_per_batch = u128::from(q.rate.floor_of(q.batch));
    Ok((1..=u128::from(batches))
        .map(|b| (b_size + kept_per_batch * (b - 1)) * (kept_per_batch * b))
        .collect())
}

/// `½·rN(N+B)` and `r²·N(N+B)(2N+B)/(6B) − r²·N(N+B)/2`, evaluated exactly.
pub fn predict_incremental_closed(q: &CostQuery) -> Result<ClosedForm> {
    q.batches()?;
    let n = Ratio::from_integer(i128::from(q.n_total));
    let b = Ratio::from_integer(i128::from(q.batch));
    let r = q.rate();
    let two = Ratio::from_integer(2);
    let six = Ratio::from_integer(6);

    let half = r * n * (n + b) / two;
    let extra = r * r * n * (n + b) * (two * n + b) / (six * b) - r * r * n * (n + b) / two;
    Ok(ClosedForm {
        half_term: to_count(half, "half term")?,
        extra_term: to_count(extra, "extra term")?,
    })
}

fn to_count(v: Ratio<i128>, what: &str) -> Result<u128> {
    if !v.is_integer() || v < Ratio::zero() {
        return Err(Error::Consistency(format!(
            "{what} evaluated to the non-count {v}"
        )));
    }
    Ok(v.to_integer() as u128)
}

/// `(1/2)(1+r) + (1/6)(1+r)(2+r) − (r/2)(1+r)`: the incremental-to-batchless
/// ratio when the batch size is chosen as `B = rN`. Tends to 5/6 as r → 0.
pub fn ratio_for_batch_equal_to_target(rate: SampleRate) -> Ratio<i128> {
    let r = Ratio::new(i128::from(rate.numer()), i128::from(rate.denom()));
    let one = Ratio::from_integer(1);
    let two = Ratio::from_integer(2);
    let half = Ratio::new(1, 2);
    let sixth = Ratio::new(1, 6);
    half * (one + r) + sixth * (one + r) * (two + r) - r / two * (one + r)
}

/// Measured over predicted, as a float for reporting.
pub fn ratio(numer: u128, denom: u128) -> f64 {
    if denom == 0 {
        return f64::NAN;
    }
    Ratio::new(numer, denom).to_f64().unwrap_or(f64::NAN)
}
