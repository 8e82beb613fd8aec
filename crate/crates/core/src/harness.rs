//! Monte Carlo experiments over parameter grids.
//!
//! An [`ExperimentSpec`] names an instance source, a grid of parameters and
//! a number of trials per grid point. Trial `t` of every cell uses seed
//! `base_seed + t` both for generating its instance and for the run, so any
//! single trial can be replayed on its own. Trials fan out over a rayon pool
//! and are merged in trial order; the results do not depend on the number of
//! worker threads.
//!
//! Output layout under the spec's output directory:
//!
//! ```text
//! cells.csv                one row per grid point
//! trials.csv               one row per trial
//! trajectories/cell_N.csv  per-iteration aggregates for cell N
//! spec.json                the spec that produced the run
//! timing.csv               wall-clock per cell (not reproducible)
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{gen_latin, gen_random_simple, LatinKind, RandomSimple};
use crate::model::{verify_rainbow, MatchingFamily};
use crate::nibble::{adaptive_params, run, RunOptions, RunStatus, TrajectoryRecord};
use crate::rmf::read_family;
use crate::schedule::{choose_chunk, Mode, ScheduleParams, ScheduleState};

/// Where the instances of a cell come from. For generated sources `n`, `m`
/// and `k` come from the grid; a file fixes them itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSource {
    File {
        path: PathBuf,
    },
    Random {
        #[serde(default)]
        max_degree: Option<usize>,
        #[serde(default)]
        max_codegree: Option<usize>,
        #[serde(default)]
        rho: Option<f64>,
    },
    /// Latin square of order `n` (the grid's `m` and `k` are ignored).
    Latin {
        #[serde(default = "default_latin_kind")]
        latin: LatinKind,
    },
}

fn default_latin_kind() -> LatinKind {
    LatinKind::Random
}

/// Parameter lists; the cells are their Cartesian product. Empty optional
/// lists fall back to the defaults described on each field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub n: Vec<usize>,
    /// Number of matchings. Ignored when `m_ratio` is given.
    #[serde(default)]
    pub m: Vec<usize>,
    /// `m = floor(ratio * n)`.
    #[serde(default)]
    pub m_ratio: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    /// Matchings per chunk. Takes precedence over `alpha`; without either
    /// adaptive mode uses `round(m / 20)` and theoretical mode picks `alpha`.
    #[serde(default)]
    pub chunk: Vec<usize>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default = "default_c")]
    pub c: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: Vec<f64>,
    #[serde(default = "default_mode")]
    pub mode: Vec<Mode>,
}

fn default_k() -> Vec<usize> {
    vec![2]
}
fn default_c() -> Vec<f64> {
    vec![0.05]
}
fn default_delta() -> Vec<f64> {
    vec![0.0]
}
fn default_mode() -> Vec<Mode> {
    vec![Mode::Adaptive]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub instance: InstanceSource,
    pub grid: Grid,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_restarts")]
    pub max_restarts: usize,
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_sample")]
    pub degree_sample: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_restarts() -> usize {
    10
}
fn default_sample() -> usize {
    32
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        if self.cells().is_empty() {
            return Err(Error::Parameter("parameter grid is empty".into()));
        }
        Ok(())
    }

    /// Grid points in a fixed order.
    pub fn cells(&self) -> Vec<GridPoint> {
        let g = &self.grid;
        let file = matches!(self.instance, InstanceSource::File { .. });
        let ns: Vec<Option<usize>> = if file { vec![None] } else { g.n.iter().copied().map(Some).collect() };
        let ms: Vec<MSpec> = if file || matches!(self.instance, InstanceSource::Latin { .. }) {
            vec![MSpec::Auto]
        } else if !g.m_ratio.is_empty() {
            g.m_ratio.iter().map(|&r| MSpec::Ratio(r)).collect()
        } else {
            g.m.iter().map(|&m| MSpec::Fixed(m)).collect()
        };
        let ks: Vec<Option<usize>> = if file { vec![None] } else { g.k.iter().copied().map(Some).collect() };
        let sizes: Vec<ChunkSpec> = if !g.chunk.is_empty() {
            g.chunk.iter().map(|&s| ChunkSpec::Size(s)).collect()
        } else if !g.alpha.is_empty() {
            g.alpha.iter().map(|&a| ChunkSpec::Alpha(a)).collect()
        } else {
            vec![ChunkSpec::Default]
        };
        let mut out = Vec::new();
        for &n in &ns {
            for &m in &ms {
                for &k in &ks {
                    for &chunk in &sizes {
                        for &c in &g.c {
                            for &delta in &g.delta {
                                for &mode in &g.mode {
                                    out.push(GridPoint { index: out.len(), n, m, k, chunk, c, delta, mode });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MSpec {
    Auto,
    Fixed(usize),
    Ratio(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ChunkSpec {
    Default,
    Size(usize),
    Alpha(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub n: Option<usize>,
    pub m: MSpec,
    pub k: Option<usize>,
    pub chunk: ChunkSpec,
    pub c: f64,
    pub delta: f64,
    pub mode: Mode,
}

impl GridPoint {
    fn m_for(&self, n: usize) -> Option<usize> {
        match self.m {
            MSpec::Auto => None,
            MSpec::Fixed(m) => Some(m),
            MSpec::Ratio(r) => Some((r * n as f64).floor() as usize),
        }
    }

    /// Schedule for an instance with the given shape.
    pub fn params(&self, family: &MatchingFamily) -> Result<ScheduleParams> {
        let n = family.uniform_size().ok_or_else(|| Error::UnequalSizes {
            min: family.sizes().min().unwrap_or(0),
            max: family.sizes().max().unwrap_or(0),
        })?;
        let m = family.m();
        match self.mode {
            Mode::Adaptive => {
                let chunk = match self.chunk {
                    ChunkSpec::Size(s) => s,
                    ChunkSpec::Alpha(a) => choose_chunk(n, m, a),
                    ChunkSpec::Default => ((m as f64) / 20.0).round() as usize,
                };
                adaptive_params(family, chunk.clamp(1, m.max(1)))
            }
            Mode::Theoretical => {
                let (alpha, chunk) = match self.chunk {
                    ChunkSpec::Size(s) => (None, Some(s.clamp(1, m.max(1)))),
                    ChunkSpec::Alpha(a) => (Some(a), None),
                    ChunkSpec::Default => (None, None),
                };
                ScheduleParams::theoretical(family.k(), n, m, self.c, self.delta, alpha, chunk)
            }
        }
    }
}

/// Outcome of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    /// Run status, or `error` when the instance or schedule could not be built.
    pub status: String,
    pub verified: bool,
    pub restarts: usize,
    pub iterations: usize,
    pub final_guard: Option<bool>,
    pub error: Option<String>,
}

/// Per-iteration aggregate over the trials of a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub i: usize,
    pub x: f64,
    pub trials: usize,
    pub mean_size: f64,
    pub min_size: usize,
    pub max_size: usize,
    pub predicted_size: f64,
    pub size_deviation: f64,
    pub mean_degree: f64,
    pub max_degree: usize,
    pub predicted_degree: f64,
    pub mean_f: f64,
    pub mean_marked: f64,
    pub mean_killed: f64,
    pub mean_zapped: f64,
    pub mean_collisions: f64,
    pub mean_phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: usize,
    pub mode: Mode,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub chunk: Option<usize>,
    pub alpha: Option<f64>,
    pub c: f64,
    pub delta: f64,
    pub trials: usize,
    pub successes: usize,
    pub greedy_failed: usize,
    pub restart_exhausted: usize,
    pub constraint_violation: usize,
    pub errors: usize,
    pub restarts: usize,
    /// Mean over iterations of `|mean size - r_i n| / (r_i n)`.
    pub mean_deviation: f64,
    /// Maximum over iterations of the same quantity.
    pub max_deviation: f64,
    pub a1_breaches: usize,
    pub a2_breaches: usize,
    pub guard_held: usize,
    /// Runs where the final-stage guard held but greedy failed.
    pub guard_counterexamples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
    pub trials: Vec<TrialRow>,
    pub trajectories: Vec<Vec<AggregateRow>>,
    /// Wall-clock per cell; not part of the reproducible output.
    pub timings: Vec<Duration>,
}

struct TrialOutcome {
    row: TrialRow,
    params: Option<ScheduleParams>,
    trajectory: Vec<TrajectoryRecord>,
}

fn build_instance(spec: &ExperimentSpec, point: &GridPoint, file: Option<&MatchingFamily>, seed: u64) -> Result<MatchingFamily> {
    match &spec.instance {
        InstanceSource::File { .. } => Ok(file.expect("loaded").clone()),
        InstanceSource::Random { max_degree, max_codegree, rho } => {
            let n = point.n.ok_or_else(|| Error::Parameter("grid needs n".into()))?;
            let m = point.m_for(n).ok_or_else(|| Error::Parameter("grid needs m or m_ratio".into()))?;
            let k = point.k.unwrap_or(2);
            let mut cfg = RandomSimple::new(n, m, k, seed);
            cfg.max_degree = *max_degree;
            cfg.max_codegree = *max_codegree;
            if let Some(rho) = rho {
                cfg.rho = *rho;
            }
            gen_random_simple(&cfg)
        }
        InstanceSource::Latin { latin } => {
            let n = point.n.ok_or_else(|| Error::Parameter("grid needs n".into()))?;
            gen_latin(n, *latin, seed)
        }
    }
}

fn run_trial(spec: &ExperimentSpec, point: &GridPoint, file: Option<&MatchingFamily>, trial: usize) -> TrialOutcome {
    let seed = spec.base_seed.wrapping_add(trial as u64);
    let mut row = TrialRow {
        cell: point.index,
        trial,
        seed,
        status: "error".into(),
        verified: false,
        restarts: 0,
        iterations: 0,
        final_guard: None,
        error: None,
    };
    let opts = RunOptions {
        max_restarts: spec.max_restarts,
        strict: spec.strict,
        degree_sample: spec.degree_sample,
        check_invariants: false,
    };
    let attempt = build_instance(spec, point, file, seed).and_then(|family| {
        let params = point.params(&family)?;
        let out = run(&family, &params, seed, &opts)?;
        Ok((family, params, out))
    });
    match attempt {
        Err(e) => {
            row.error = Some(e.to_string());
            TrialOutcome { row, params: None, trajectory: Vec::new() }
        }
        Ok((family, params, out)) => {
            row.status = out.status.to_string();
            row.verified = out
                .rainbow
                .as_ref()
                .is_some_and(|rm| verify_rainbow(&family, rm, true).is_ok());
            row.restarts = out.restarts;
            row.iterations = out.trajectory.len();
            row.final_guard = out.final_guard;
            TrialOutcome { row, params: Some(params), trajectory: out.trajectory }
        }
    }
}

/// Runs every cell of `spec`. `threads = None` uses rayon's default pool.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<ExperimentResult> {
    spec.check()?;
    let file = match &spec.instance {
        InstanceSource::File { path } => Some(read_family(path)?),
        _ => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;

    let mut result = ExperimentResult { cells: Vec::new(), trials: Vec::new(), trajectories: Vec::new(), timings: Vec::new() };
    for point in spec.cells() {
        let start = Instant::now();
        let outcomes: Vec<TrialOutcome> = pool.install(|| {
            (0..spec.trials)
                .into_par_iter()
                .map(|t| run_trial(spec, &point, file.as_ref(), t))
                .collect()
        });
        let (cell, rows) = summarize(&point, &outcomes);
        result.cells.push(cell);
        result.trajectories.push(rows);
        result.trials.extend(outcomes.into_iter().map(|o| o.row));
        result.timings.push(start.elapsed());
    }
    Ok(result)
}

fn summarize(point: &GridPoint, outcomes: &[TrialOutcome]) -> (CellResult, Vec<AggregateRow>) {
    let params = outcomes.iter().find_map(|o| o.params.clone());
    let count = |s: RunStatus| outcomes.iter().filter(|o| o.row.status == s.to_string()).count();
    let records: Vec<&[TrajectoryRecord]> = outcomes.iter().map(|o| o.trajectory.as_slice()).collect();
    let rows = aggregate(&records);
    let deviations: Vec<f64> = rows.iter().map(|r| r.size_deviation).collect();
    let all = records.iter().flat_map(|t| t.iter());
    let cell = CellResult {
        cell: point.index,
        mode: point.mode,
        n: params.as_ref().map(|p| p.n).or(point.n),
        m: params.as_ref().map(|p| p.m),
        k: params.as_ref().map(|p| p.k).or(point.k),
        chunk: params.as_ref().map(|p| p.chunk),
        alpha: params.as_ref().and_then(|p| p.alpha),
        c: point.c,
        delta: point.delta,
        trials: outcomes.len(),
        successes: outcomes.iter().filter(|o| o.row.verified).count(),
        greedy_failed: count(RunStatus::GreedyFailed),
        restart_exhausted: count(RunStatus::RestartExhausted),
        constraint_violation: count(RunStatus::ConstraintViolation),
        errors: outcomes.iter().filter(|o| o.row.error.is_some()).count(),
        restarts: outcomes.iter().map(|o| o.row.restarts).sum(),
        mean_deviation: if deviations.is_empty() { 0.0 } else { deviations.iter().sum::<f64>() / deviations.len() as f64 },
        max_deviation: deviations.iter().copied().fold(0.0, f64::max),
        a1_breaches: all.clone().filter(|r| r.a1_breach == Some(true)).count(),
        a2_breaches: all.filter(|r| r.a2_breach == Some(true)).count(),
        guard_held: outcomes.iter().filter(|o| o.row.final_guard == Some(true)).count(),
        guard_counterexamples: outcomes
            .iter()
            .filter(|o| o.row.final_guard == Some(true) && o.row.status != RunStatus::Success.to_string())
            .count(),
    };
    (cell, rows)
}

/// Averages trajectories over trials, iteration by iteration. Runs that
/// stopped early contribute to the iterations they reached.
pub fn aggregate(trajectories: &[&[TrajectoryRecord]]) -> Vec<AggregateRow> {
    let len = trajectories.iter().map(|t| t.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let recs: Vec<&TrajectoryRecord> = trajectories.iter().filter_map(|t| t.get(i)).collect();
            let n = recs.len() as f64;
            let mean = |f: fn(&TrajectoryRecord) -> f64| recs.iter().map(|r| f(r)).sum::<f64>() / n;
            let first = recs[0];
            let mean_size = mean(|r| r.mean_size);
            AggregateRow {
                i,
                x: first.x,
                trials: recs.len(),
                mean_size,
                min_size: recs.iter().map(|r| r.min_size).min().unwrap_or(0),
                max_size: recs.iter().map(|r| r.max_size).max().unwrap_or(0),
                predicted_size: first.predicted_size,
                size_deviation: relative(mean_size, first.predicted_size),
                mean_degree: mean(|r| r.tracked_degree() as f64),
                max_degree: recs.iter().map(|r| r.tracked_degree()).max().unwrap_or(0),
                predicted_degree: first.predicted_degree,
                mean_f: mean(|r| r.f),
                mean_marked: mean(|r| r.marked as f64),
                mean_killed: mean(|r| r.killed as f64),
                mean_zapped: mean(|r| r.zapped as f64),
                mean_collisions: mean(|r| r.collisions as f64),
                mean_phi: mean(|r| r.phi as f64),
            }
        })
        .collect()
}

fn relative(observed: f64, predicted: f64) -> f64 {
    if predicted == 0.0 {
        if observed == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        (observed - predicted).abs() / predicted
    }
}

/// Deviation of one run's trajectory from the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub i: usize,
    pub predicted_size: f64,
    pub min_deviation: f64,
    pub mean_deviation: f64,
    pub max_deviation: f64,
    pub predicted_degree: f64,
    pub degree_deviation: f64,
    /// Observed sizes outside `r_i n ± a_i` (theoretical schedules only).
    pub size_envelope_breach: Option<bool>,
    /// Observed degree above `εγ g_i n + b_i` (theoretical schedules only).
    pub degree_envelope_breach: Option<bool>,
}

pub fn trajectory_report(records: &[TrajectoryRecord], params: &ScheduleParams) -> Vec<DeviationRow> {
    let table: Vec<ScheduleState> = params.table();
    let theoretical = params.mode == Mode::Theoretical;
    records
        .iter()
        .map(|rec| {
            let predicted = params.predicted_size(rec.i);
            let degree = params.predicted_degree(rec.i);
            let state = table.get(rec.i);
            let (a, b) = state.map_or((0.0, 0.0), |s| (s.a, s.b));
            DeviationRow {
                i: rec.i,
                predicted_size: predicted,
                min_deviation: relative(rec.min_size as f64, predicted),
                mean_deviation: relative(rec.mean_size, predicted),
                max_deviation: relative(rec.max_size as f64, predicted),
                predicted_degree: degree,
                degree_deviation: relative(rec.tracked_degree() as f64, degree),
                size_envelope_breach: theoretical.then(|| {
                    (rec.min_size as f64) < predicted - a || rec.max_size as f64 > predicted + a
                }),
                degree_envelope_breach: theoretical.then(|| rec.tracked_degree() as f64 > degree + b),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TimingRow {
    cell: usize,
    seconds: f64,
}

/// Writes every output file into `dir`.
pub fn write_outputs(spec: &ExperimentSpec, result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("trajectories"))?;
    write_csv(&dir.join("cells.csv"), &result.cells)?;
    write_csv(&dir.join("trials.csv"), &result.trials)?;
    for (cell, rows) in result.trajectories.iter().enumerate() {
        write_csv(&dir.join("trajectories").join(format!("cell_{cell}.csv")), rows)?;
    }
    fs::write(dir.join("spec.json"), serde_json::to_string_pretty(spec)? + "\n")?;
    let timing: Vec<TimingRow> = result
        .timings
        .iter()
        .enumerate()
        .map(|(cell, t)| TimingRow { cell, seconds: t.as_secs_f64() })
        .collect();
    write_csv(&dir.join("timing.csv"), &timing)?;
    Ok(())
}
