//! Randomized chunked ("nibble") search for a full rainbow matching.
//!
//! The matchings are shuffled and cut into chunks of `εm`. Each chunk but
//! the last goes through three steps:
//!
//! 1. every matching in the chunk picks a uniform surviving edge; picks that
//!    share no vertex with another pick join the rainbow matching and their
//!    vertices are deleted ("killed"),
//! 2. every surviving vertex is deleted ("zapped") independently with
//!    probability `P(v) = (f - Q(v))/(1 - Q(v))`, where `Q(v)` is the chance
//!    it was touched in step 1, so each vertex is condemned with probability
//!    exactly `f`,
//! 3. matchings whose pick collided take their lowest surviving edge.
//!
//! The last chunk is completed greedily. A zap probability outside `[0, 1]`
//! restarts the whole run.
//!
//! # Randomness
//!
//! All draws come from [`ChaCha8Rng`] seeded with the run seed. Each
//! `(restart, iteration, purpose)` triple selects its own stream via
//! [`stream_id`], so the zap draws are independent of the edge picks and a
//! run is reproducible from its seed alone.

mod state;

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate, MatchingFamily, RainbowMatching};
use crate::schedule::{final_stage_guard, Mode, ScheduleParams, ScheduleState};

pub use state::{Incidence, MarkOutcome, MarkingSummary, RunState, StepFailure, ZapOutcome};

/// Tolerance of the in-run check `Q + P(1 - Q) = f`.
pub const ZAP_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Permute = 0,
    Pick = 1,
    Zap = 2,
    Sample = 3,
}

/// `restart << 40 | iteration << 8 | purpose`.
pub fn stream_id(restart: usize, iteration: usize, purpose: Purpose) -> u64 {
    ((restart as u64) << 40) | ((iteration as u64) << 8) | purpose as u64
}

pub fn stream(seed: u64, restart: usize, iteration: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(restart, iteration, purpose));
    rng
}

/// Result of shuffling the matchings into chunks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkAssignment {
    pub chunks: Vec<Vec<usize>>,
    /// Chunk index of every matching.
    pub chunk_of: Vec<usize>,
}

/// Uniform permutation of `0..m` cut into consecutive chunks of `chunk`
/// (the last may be shorter).
pub fn permute_and_chunk<R: Rng>(m: usize, chunk: usize, rng: &mut R) -> ChunkAssignment {
    assert!(chunk >= 1, "chunk size must be positive");
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let chunks: Vec<Vec<usize>> = order.chunks(chunk).map(<[usize]>::to_vec).collect();
    let mut chunk_of = vec![0; m];
    for (j, ch) in chunks.iter().enumerate() {
        for &c in ch {
            chunk_of[c] = j;
        }
    }
    ChunkAssignment { chunks, chunk_of }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    RestartExhausted,
    GreedyFailed,
    ConstraintViolation,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunStatus::Success => "success",
            RunStatus::RestartExhausted => "restart_exhausted",
            RunStatus::GreedyFailed => "greedy_failed",
            RunStatus::ConstraintViolation => "constraint_violation",
        })
    }
}

/// Observables at the start of iteration `i` and the counts of that
/// iteration. The last record (`greedy = true`) describes the final chunk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub i: usize,
    pub x: f64,
    pub greedy: bool,
    pub surviving_vertices: usize,
    /// Matchings not yet processed.
    pub remaining: usize,
    pub min_size: usize,
    pub mean_size: f64,
    pub max_size: usize,
    /// `r_i n`
    pub predicted_size: f64,
    /// Exact maximum degree into the chunk about to be processed.
    pub next_chunk_degree: usize,
    /// Maximum over sampled vertices and later chunks.
    pub sampled_degree: usize,
    /// `εγ g_i n + b_i`
    pub predicted_degree: f64,
    pub f: f64,
    pub c: f64,
    pub max_q: f64,
    pub zap_residual: f64,
    pub marked: usize,
    pub killed: usize,
    pub zapped: usize,
    pub collisions: usize,
    pub phi: usize,
    /// Vertices deleted by collision repair or by the final greedy pass.
    pub repair_deleted: usize,
    /// Size bound breached (theoretical mode only).
    pub a1_breach: Option<bool>,
    /// Degree bound breached (theoretical mode only).
    pub a2_breach: Option<bool>,
}

impl TrajectoryRecord {
    pub fn tracked_degree(&self) -> usize {
        self.next_chunk_degree.max(self.sampled_degree)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    /// The full rainbow matching, on success.
    pub rainbow: Option<RainbowMatching>,
    /// Matching built by the last attempt before it stopped.
    pub partial: RainbowMatching,
    pub trajectory: Vec<TrajectoryRecord>,
    pub seed: u64,
    pub restarts: usize,
    /// Whether the final-stage guard held when the last chunk started.
    /// `None` if the last chunk was not reached or the family is improper.
    pub final_guard: Option<bool>,
    /// Matching that ran out of edges (greedy failure).
    pub failed_matching: Option<usize>,
    #[serde(skip)]
    pub iteration_times: Vec<Duration>,
    #[serde(skip)]
    pub wallclock: Duration,
}

// Timings are not part of the result.
impl PartialEq for RunOutcome {
    fn eq(&self, other: &Self) -> bool {
        self.status == other.status
            && self.rainbow == other.rainbow
            && self.partial == other.partial
            && self.trajectory == other.trajectory
            && self.seed == other.seed
            && self.restarts == other.restarts
            && self.final_guard == other.final_guard
            && self.failed_matching == other.failed_matching
    }
}

impl RunOutcome {
    pub fn is_success(&self) -> bool {
        self.status == RunStatus::Success
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub max_restarts: usize,
    /// Stop with `ConstraintViolation` when a theoretical size or degree
    /// bound is breached.
    pub strict: bool,
    /// Vertices sampled per iteration for later-chunk degrees.
    pub degree_sample: usize,
    /// Re-verify state consistency after every iteration (slow).
    pub check_invariants: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_restarts: 10, strict: false, degree_sample: 32, check_invariants: false }
    }
}

enum Attempt {
    Finished(Box<RunOutcome>),
    Restart(Vec<TrajectoryRecord>, RainbowMatching, Vec<Duration>),
}

/// Runs the algorithm on `family` until success, a greedy failure, a strict
/// constraint violation, or `max_restarts` restarts.
pub fn run(family: &MatchingFamily, params: &ScheduleParams, seed: u64, opts: &RunOptions) -> Result<RunOutcome> {
    validate(family).map_err(Error::InvalidFamily)?;
    params.check()?;
    let n = common_size(family)?;
    if family.k() != params.k || family.m() != params.m || n != params.n {
        return Err(Error::Parameter(format!(
            "schedule is for k={}, n={}, m={} but the family has k={}, n={}, m={}",
            params.k,
            params.n,
            params.m,
            family.k(),
            n,
            family.m()
        )));
    }
    if params.mode == Mode::Theoretical {
        let max_degree = family.degrees().into_iter().max().unwrap_or(0);
        if max_degree as f64 > params.gamma * n as f64 {
            return Err(Error::Parameter(format!(
                "max degree {max_degree} exceeds gamma*n = {:.3}",
                params.gamma * n as f64
            )));
        }
    }

    let start = Instant::now();
    let inc = Incidence::new(family);
    let table = params.table();
    let runner = Runner { family, inc: &inc, params, table: &table, seed, opts };
    let mut restarts = 0;
    loop {
        match runner.attempt(restarts) {
            Attempt::Finished(mut out) => {
                out.restarts = restarts;
                out.wallclock = start.elapsed();
                return Ok(*out);
            }
            Attempt::Restart(trajectory, partial, iteration_times) => {
                if restarts == opts.max_restarts {
                    return Ok(RunOutcome {
                        status: RunStatus::RestartExhausted,
                        rainbow: None,
                        partial,
                        trajectory,
                        seed,
                        restarts,
                        final_guard: None,
                        failed_matching: None,
                        iteration_times,
                        wallclock: start.elapsed(),
                    });
                }
                restarts += 1;
            }
        }
    }
}

struct Runner<'a> {
    family: &'a MatchingFamily,
    inc: &'a Incidence,
    params: &'a ScheduleParams,
    table: &'a [ScheduleState],
    seed: u64,
    opts: &'a RunOptions,
}

impl Runner<'_> {
    fn attempt(&self, restart: usize) -> Attempt {
        let p = self.params;
        let tau = p.tau();
        let assignment = permute_and_chunk(p.m, p.chunk, &mut stream(self.seed, restart, 0, Purpose::Permute));
        let mut st = RunState::new(self.inc);
        let mut trajectory = Vec::with_capacity(tau);
        let mut times = Vec::with_capacity(tau);

        let finish = |st: &RunState,
                      trajectory: Vec<TrajectoryRecord>,
                      times: Vec<Duration>,
                      status: RunStatus,
                      guard: Option<bool>,
                      failed: Option<usize>| {
            let partial = st.rainbow();
            let rainbow = (status == RunStatus::Success).then(|| partial.clone());
            Attempt::Finished(Box::new(RunOutcome {
                status,
                rainbow,
                partial,
                trajectory,
                seed: self.seed,
                restarts: 0,
                final_guard: guard,
                failed_matching: failed,
                iteration_times: times,
                wallclock: Duration::ZERO,
            }))
        };

        for i in 0..tau - 1 {
            let t0 = Instant::now();
            let chunk = &assignment.chunks[i];
            let mut rec = self.observe(&st, &assignment, i, restart);
            let marking = match st.compute_marking(chunk) {
                Ok(s) => s,
                Err(e) => {
                    trajectory.push(rec);
                    return finish(&st, trajectory, times, RunStatus::GreedyFailed, None, failed_of(e));
                }
            };
            rec.next_chunk_degree = marking.max_chunk_degree;
            rec.max_q = marking.max_q;
            self.check_bounds(&mut rec, i);
            let (f, c) = match p.mode {
                Mode::Adaptive => {
                    let base = p.base_rate(i);
                    let c = (marking.max_q - base).max(0.0) + p.eta;
                    ((base + c).min(1.0), c)
                }
                Mode::Theoretical => (self.table[i].f, self.table[i].c),
            };
            rec.f = f;
            rec.c = c;
            if self.opts.strict && (rec.a1_breach == Some(true) || rec.a2_breach == Some(true)) {
                trajectory.push(rec);
                return finish(&st, trajectory, times, RunStatus::ConstraintViolation, None, None);
            }

            let before = st.alive_count();
            let mark = match st.mark_and_kill(chunk, &mut stream(self.seed, restart, i, Purpose::Pick)) {
                Ok(m) => m,
                Err(e) => {
                    trajectory.push(rec);
                    return finish(&st, trajectory, times, RunStatus::GreedyFailed, None, failed_of(e));
                }
            };
            rec.marked = mark.marked;
            rec.killed = mark.killed;
            rec.collisions = mark.collisions;
            rec.phi = mark.phi.len();

            let zap = match st.zap(f, &mut stream(self.seed, restart, i, Purpose::Zap)) {
                Ok(z) => z,
                Err(_) => {
                    trajectory.push(rec);
                    times.push(t0.elapsed());
                    return Attempt::Restart(trajectory, st.rainbow(), times);
                }
            };
            assert!(
                zap.max_residual <= ZAP_TOLERANCE,
                "zap identity off by {} in iteration {i}",
                zap.max_residual
            );
            rec.zapped = zap.zapped.len();
            rec.zap_residual = zap.max_residual;

            match st.repair(&mark.phi) {
                Ok(d) => rec.repair_deleted = d,
                Err(e) => {
                    trajectory.push(rec);
                    return finish(&st, trajectory, times, RunStatus::GreedyFailed, None, failed_of(e));
                }
            }
            if self.opts.check_invariants {
                self.check_state(&st, &assignment, i, before, &rec);
            }
            trajectory.push(rec);
            times.push(t0.elapsed());
        }

        let t0 = Instant::now();
        let last = &assignment.chunks[tau - 1];
        let mut rec = self.observe(&st, &assignment, tau - 1, restart);
        rec.greedy = true;
        self.check_bounds(&mut rec, tau - 1);
        let guard = self
            .family
            .is_proper()
            .then(|| final_stage_guard(p.k, last.len(), last.iter().map(|&c| st.size(c)).min().unwrap_or(0)));
        let result = st.final_greedy(last);
        if guard == Some(true) {
            assert!(result.is_ok(), "final-stage guard held but greedy failed");
        }
        times.push(t0.elapsed());
        match result {
            Ok(d) => {
                rec.repair_deleted = d;
                trajectory.push(rec);
                if self.opts.check_invariants {
                    st.check_consistency().expect("consistent state");
                }
                finish(&st, trajectory, times, RunStatus::Success, guard, None)
            }
            Err(e) => {
                trajectory.push(rec);
                finish(&st, trajectory, times, RunStatus::GreedyFailed, guard, failed_of(e))
            }
        }
    }

    fn observe(&self, st: &RunState, asg: &ChunkAssignment, i: usize, restart: usize) -> TrajectoryRecord {
        let p = self.params;
        let remaining: Vec<usize> = asg.chunks[i..].iter().flatten().map(|&c| st.size(c)).collect();
        let min_size = remaining.iter().copied().min().unwrap_or(0);
        let max_size = remaining.iter().copied().max().unwrap_or(0);
        let mean_size = remaining.iter().sum::<usize>() as f64 / remaining.len().max(1) as f64;
        let b = if p.mode == Mode::Theoretical { self.table[i].b } else { 0.0 };
        TrajectoryRecord {
            i,
            x: p.x(i),
            greedy: false,
            surviving_vertices: st.alive_count(),
            remaining: remaining.len(),
            min_size,
            mean_size,
            max_size,
            predicted_size: p.predicted_size(i),
            next_chunk_degree: 0,
            sampled_degree: self.sample_degrees(st, asg, i, restart),
            predicted_degree: p.predicted_degree(i) + b,
            f: 0.0,
            c: 0.0,
            max_q: 0.0,
            zap_residual: 0.0,
            marked: 0,
            killed: 0,
            zapped: 0,
            collisions: 0,
            phi: 0,
            repair_deleted: 0,
            a1_breach: None,
            a2_breach: None,
        }
    }

    /// Maximum degree into any chunk after `i`, over a uniform sample of
    /// surviving vertices.
    fn sample_degrees(&self, st: &RunState, asg: &ChunkAssignment, i: usize, restart: usize) -> usize {
        let later = asg.chunks.len() - i - 1;
        if self.opts.degree_sample == 0 || later == 0 || st.alive_count() == 0 {
            return 0;
        }
        let alive: Vec<u32> = (0..self.inc.num_vertices() as u32).filter(|&v| st.is_alive(v)).collect();
        let mut rng = stream(self.seed, restart, i, Purpose::Sample);
        let mut counts = vec![0usize; asg.chunks.len()];
        let mut best = 0;
        for _ in 0..self.opts.degree_sample {
            let v = alive[rng.random_range(0..alive.len())];
            counts.iter_mut().for_each(|c| *c = 0);
            st.chunk_degrees(v, &asg.chunk_of, &mut counts);
            best = best.max(counts[i + 1..].iter().copied().max().unwrap_or(0));
        }
        best
    }

    fn check_bounds(&self, rec: &mut TrajectoryRecord, i: usize) {
        if self.params.mode != Mode::Theoretical {
            return;
        }
        let a = self.table[i].a;
        rec.a1_breach = Some(
            rec.remaining > 0
                && ((rec.min_size as f64) < rec.predicted_size - a || rec.max_size as f64 > rec.predicted_size + a),
        );
        rec.a2_breach = Some(rec.tracked_degree() as f64 > rec.predicted_degree);
    }

    fn check_state(&self, st: &RunState, asg: &ChunkAssignment, i: usize, before: usize, rec: &TrajectoryRecord) {
        st.check_consistency().expect("consistent state");
        crate::model::verify_rainbow(self.family, &st.rainbow(), false).expect("partial rainbow matching");
        assert_eq!(before - st.alive_count(), rec.killed + rec.zapped + rec.repair_deleted);
        let processed: usize = asg.chunks[..=i].iter().map(Vec::len).sum();
        assert_eq!(st.picked_count(), processed);
        assert!(asg.chunks[..=i].iter().flatten().all(|&c| st.is_processed(c)));
    }
}

fn common_size(family: &MatchingFamily) -> Result<usize> {
    family.uniform_size().ok_or_else(|| Error::UnequalSizes {
        min: family.sizes().min().unwrap_or(0),
        max: family.sizes().max().unwrap_or(0),
    })
}

fn failed_of(e: StepFailure) -> Option<usize> {
    match e {
        StepFailure::EmptyMatching(c) => Some(c),
        StepFailure::Restart => None,
    }
}

/// Adaptive schedule with the given chunk size for `family`.
pub fn adaptive_params(family: &MatchingFamily, chunk: usize) -> Result<ScheduleParams> {
    let n = common_size(family)?;
    let max_degree = family.degrees().into_iter().max().unwrap_or(0);
    ScheduleParams::adaptive(family.k(), n, family.m(), max_degree as usize, chunk.min(family.m()).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{find_full, Budget};
    use crate::generators::{gen_double_star, gen_random_simple, RandomSimple};
    use crate::model::verify_rainbow;

    fn checked() -> RunOptions {
        RunOptions { check_invariants: true, ..RunOptions::default() }
    }

    #[test]
    fn chunking_examples() {
        let mut rng = stream(5, 0, 0, Purpose::Permute);
        let a = permute_and_chunk(10, 2, &mut rng);
        assert_eq!(a.chunks.len(), 5);
        assert!(a.chunks.iter().all(|c| c.len() == 2));
        let b = permute_and_chunk(10, 3, &mut stream(5, 0, 0, Purpose::Permute));
        assert_eq!(b.chunks.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 3, 1]);
        let mut all: Vec<usize> = b.chunks.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(a, permute_and_chunk(10, 2, &mut stream(5, 0, 0, Purpose::Permute)));
    }

    #[test]
    fn streams_differ_by_purpose() {
        let mut a = stream(1, 0, 0, Purpose::Pick);
        let mut b = stream(1, 0, 0, Purpose::Zap);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
        assert_ne!(stream_id(1, 0, Purpose::Permute), stream_id(0, 1, Purpose::Permute));
    }

    #[test]
    fn single_edge_family() {
        let f = MatchingFamily::new(2, 2, vec![vec![vec![0, 1]]]).unwrap();
        let p = adaptive_params(&f, 1).unwrap();
        let out = run(&f, &p, 0, &checked()).unwrap();
        assert_eq!(out.status, RunStatus::Success);
        assert_eq!(out.rainbow.unwrap().get(0), Some(&[0, 1][..]));
        // 2 * 1 > 1: the guard is sufficient, not necessary
        assert_eq!(out.final_guard, Some(false));
    }

    #[test]
    fn random_instance_succeeds_and_is_deterministic() {
        let f = gen_random_simple(&RandomSimple::new(1000, 800, 2, 1)).unwrap();
        let p = adaptive_params(&f, 40).unwrap();
        let a = run(&f, &p, 7, &checked()).unwrap();
        assert_eq!(a.status, RunStatus::Success, "{:?}", a.failed_matching);
        verify_rainbow(&f, a.rainbow.as_ref().unwrap(), true).unwrap();
        assert_eq!(a.trajectory.len(), p.tau());
        let b = run(&f, &p, 7, &RunOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = run(&f, &p, 8, &RunOptions::default()).unwrap();
        assert_ne!(a.trajectory, c.trajectory);
    }

    #[test]
    fn records_are_consistent() {
        let f = gen_random_simple(&RandomSimple::new(300, 240, 2, 11)).unwrap();
        let p = adaptive_params(&f, 12).unwrap();
        let out = run(&f, &p, 2, &checked()).unwrap();
        let t = &out.trajectory;
        assert_eq!(t[0].mean_size, 300.0);
        assert_eq!(t[0].surviving_vertices, f.num_vertices());
        for w in t.windows(2) {
            let (r, next) = (&w[0], &w[1]);
            assert_eq!(r.surviving_vertices - next.surviving_vertices, r.killed + r.zapped + r.repair_deleted);
            assert!(next.max_size <= r.max_size);
            assert!(r.killed <= r.marked);
            assert!(r.zap_residual <= ZAP_TOLERANCE);
            assert!(r.f > 0.0 && r.f <= 1.0);
            assert!(r.f >= r.max_q);
        }
    }

    #[test]
    fn theoretical_mode_runs_with_breach_flags() {
        let n = 400;
        let f = gen_random_simple(&RandomSimple { max_degree: Some(100), rho: 3.0, ..RandomSimple::new(n, 200, 2, 4) }).unwrap();
        let p = ScheduleParams::theoretical(2, n, 200, 0.05, 0.0, None, None).unwrap();
        let out = run(&f, &p, 1, &RunOptions::default()).unwrap();
        assert!(out.trajectory.iter().all(|r| r.a1_breach.is_some() && r.a2_breach.is_some()));
        if out.is_success() {
            verify_rainbow(&f, out.rainbow.as_ref().unwrap(), true).unwrap();
        }
        let strict = RunOptions { strict: true, ..RunOptions::default() };
        let s = run(&f, &p, 1, &strict).unwrap();
        if s.trajectory.iter().any(|r| r.a1_breach == Some(true) || r.a2_breach == Some(true)) {
            assert_eq!(s.status, RunStatus::ConstraintViolation);
        }
    }

    #[test]
    fn theoretical_mode_rejects_high_degree() {
        let f = gen_random_simple(&RandomSimple::new(50, 40, 2, 4)).unwrap();
        let p = ScheduleParams::theoretical(2, 50, 40, 0.05, 0.0, None, None).unwrap();
        assert!(p.gamma * 50.0 < 40.0);
        assert!(matches!(run(&f, &p, 0, &RunOptions::default()), Err(Error::Parameter(_))));
    }

    #[test]
    fn mismatched_schedule_is_rejected() {
        let f = gen_random_simple(&RandomSimple::new(20, 10, 2, 1)).unwrap();
        let p = ScheduleParams::adaptive(2, 21, 10, 5, 2).unwrap();
        assert!(run(&f, &p, 0, &RunOptions::default()).is_err());
    }

    #[test]
    fn double_star_never_falsely_succeeds() {
        for m in [2, 4, 6] {
            let f = gen_double_star(m).unwrap();
            assert_eq!(find_full(&f, Budget::unlimited()).exists(), Some(false));
            for seed in 0..20 {
                let p = adaptive_params(&f, 1).unwrap();
                let out = run(&f, &p, seed, &checked()).unwrap();
                assert_ne!(out.status, RunStatus::Success);
                assert!(out.final_guard.is_none());
            }
        }
    }
}
