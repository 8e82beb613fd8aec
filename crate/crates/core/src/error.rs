use std::io;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge {edge} of matching {class} has {len} vertices, expected {k}")]
    Arity {
        class: usize,
        edge: usize,
        len: usize,
        k: usize,
    },

    #[error("invalid family: {}", format_violations(.0))]
    InvalidFamily(Vec<Violation>),

    #[error("matchings have unequal sizes (min {min}, max {max})")]
    UnequalSizes { min: usize, max: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("could not place edge {edge} of matching {class} after {restarts} restarts")]
    CouldNotPlace {
        class: usize,
        edge: usize,
        restarts: usize,
    },

    #[error("product of matching sizes {product} exceeds the enumeration limit {limit}")]
    EnumerationTooLarge { product: u128, limit: u128 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    let mut s = v
        .iter()
        .take(5)
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ");
    if v.len() > 5 {
        s.push_str(&format!("; ... ({} more)", v.len() - 5));
    }
    s
}
