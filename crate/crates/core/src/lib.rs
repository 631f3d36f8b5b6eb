//! Streaming truncated SVD and greedy coreset memory banks for
//! nearest-neighbor anomaly scoring.

pub mod array_io;
pub mod bank;
pub mod coreset;
pub mod cost;
pub mod error;
pub mod incremental;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod rate;
pub mod reducer;
pub mod tables;

pub use error::{Error, Result};
pub use linalg::{Matrix, Precision};
