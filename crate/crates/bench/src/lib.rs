//! Fixtures shared by the benchmarks.

use rainbow_core::generators::{gen_latin, gen_random_simple, LatinKind, RandomSimple};
use rainbow_core::nibble::adaptive_params;
use rainbow_core::{MatchingFamily, ScheduleParams};

/// Random family with `m = 0.8 n` and chunks of `m / 20`, as in the
/// concentration experiments.
pub fn random_instance(n: usize, k: usize, seed: u64) -> (MatchingFamily, ScheduleParams) {
    let m = n * 4 / 5;
    let family = gen_random_simple(&RandomSimple::new(n, m, k, seed)).expect("generator");
    let params = adaptive_params(&family, (m / 20).max(1)).expect("schedule");
    (family, params)
}

pub fn cyclic_latin(order: usize) -> MatchingFamily {
    gen_latin(order, LatinKind::Cyclic, 0).expect("latin square")
}
