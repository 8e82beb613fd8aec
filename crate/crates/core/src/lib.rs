//! Full rainbow matchings in properly edge-coloured graphs, multigraphs and
//! k-uniform hypergraphs.
//!
//! The crate is organised around a [`MatchingFamily`] (the coloured
//! instance), a randomised chunked algorithm in [`nibble`] whose per-iteration
//! probabilities come from [`schedule`], an exact backtracking oracle in
//! [`exact`], instance constructors in [`generators`], and the Monte Carlo
//! driver in [`harness`].

pub mod error;
pub mod exact;
pub mod generators;
pub mod harness;
pub mod model;
pub mod nibble;
pub mod rmf;
pub mod schedule;

pub use error::{Error, Result};
pub use model::{
    check_hypotheses, compute_stats, validate, verify_rainbow, Colouring, FamilyStats,
    HypothesisParams, HypothesisReport, MatchingFamily, RainbowMatching, RainbowViolation,
    Theorem, Vertex, Violation,
};
pub use nibble::{run, RunOptions, RunOutcome, RunStatus, TrajectoryRecord};
pub use schedule::{Mode, ScheduleParams, ScheduleState};
