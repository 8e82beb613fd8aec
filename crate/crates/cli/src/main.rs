//! `rainbow`: generate, inspect and solve rainbow matching instances.
//!
//! Exit codes: 0 on success or a "yes" answer, 1 on a "no" answer or a
//! failed run, 2 on usage and I/O errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rainbow_core::exact::{enumerate_oracle, find_full, max_rainbow, Budget, FullOutcome};
use rainbow_core::generators::{
    find_2regular_counterexample, gen_double_star, gen_latin, gen_random_simple, gen_two_k4, lift_to_3uniform,
    LatinKind, RandomSimple,
};
use rainbow_core::harness::{run_experiment, write_outputs, ExperimentSpec};
use rainbow_core::nibble::{adaptive_params, run, RunOptions};
use rainbow_core::rmf::{parse_selection, read_family, write_family, write_selection};
use rainbow_core::schedule::{check_ab_constraints, choose_chunk, Mode, ScheduleParams};
use rainbow_core::{check_hypotheses, compute_stats, verify_rainbow, HypothesisParams, MatchingFamily, Theorem};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "rainbow", version, about = "Full rainbow matchings: generators, solvers and experiments")]
struct Cli {
    /// Seed for generators and randomized solvers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for experiments (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (directory for `experiment`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance in RMF format.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Lift a coloured graph to a 3-uniform hypergraph.
    Lift {
        input: PathBuf,
        /// Part labels as CSV; defaults to `<out>.parts.csv` when `--out` is set.
        #[arg(long)]
        parts: Option<PathBuf>,
    },
    /// Print instance statistics and, optionally, a theorem's hypotheses.
    Stats {
        input: PathBuf,
        /// Theorem (1-4) whose hypotheses to check.
        #[arg(long)]
        theorem: Option<u8>,
        #[arg(long, default_value_t = 0.05)]
        c: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 0.1)]
        eps0: f64,
        #[arg(long)]
        json: bool,
    },
    /// Check a selection of `pick` lines against an instance.
    Verify {
        input: PathBuf,
        selection: PathBuf,
        /// Accept selections that skip some matchings.
        #[arg(long)]
        partial: bool,
    },
    #[command(subcommand)]
    Solve(SolveCommand),
    /// Print the schedule table as CSV.
    Schedule(ScheduleArgs),
    /// Run a JSON experiment spec.
    Experiment { spec: PathBuf },
}

#[derive(Subcommand)]
enum GenCommand {
    /// Random edge-disjoint matchings.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Vertex universe is ceil(rho * k * n).
        #[arg(long, default_value_t = 1.5)]
        rho: f64,
        #[arg(long)]
        max_degree: Option<usize>,
        #[arg(long)]
        max_codegree: Option<usize>,
    },
    /// Latin square as a properly coloured K_{n,n}.
    Latin {
        #[arg(long)]
        order: usize,
        #[arg(long, value_enum, default_value_t = LatinArg::Cyclic)]
        kind: LatinArg,
    },
    /// Double-star family without a full rainbow matching (m even).
    DoubleStar {
        #[arg(long)]
        m: usize,
    },
    /// Two disjoint K4s, each split into its three perfect matchings.
    TwoK4,
    /// Search small 2-regular bipartite graphs for a 3-edge colouring without
    /// a full rainbow matching.
    #[command(name = "find-2reg")]
    Find2reg {
        #[arg(long, default_value_t = 12)]
        max_vertices: usize,
        /// Random colourings tried per layout when enumeration is too large.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LatinArg {
    Cyclic,
    Random,
}

#[derive(Subcommand)]
enum SolveCommand {
    /// Randomized chunked algorithm.
    Nibble(NibbleArgs),
    /// Exact search.
    Exact {
        input: PathBuf,
        /// Also compute the largest rainbow matching.
        #[arg(long)]
        max: bool,
        /// Also count full rainbow matchings by enumeration.
        #[arg(long)]
        count: bool,
        #[arg(long)]
        node_budget: Option<u64>,
        /// Advisory wall-clock limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
    },
}

#[derive(Args)]
struct NibbleArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Adaptive)]
    mode: ModeArg,
    /// Matchings per chunk.
    #[arg(long, conflicts_with_all = ["epsilon", "alpha"])]
    chunk: Option<usize>,
    /// Chunk fraction; the chunk is round(epsilon * m).
    #[arg(long, conflicts_with = "alpha")]
    epsilon: Option<f64>,
    /// Chunk exponent; the chunk is round(n^-alpha * m).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Slack function value (default 1/ln n).
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long, default_value_t = 10)]
    max_restarts: usize,
    /// Write the per-iteration trajectory as CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Stop when a theoretical size or degree bound is breached.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = 32)]
    degree_sample: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Adaptive,
    Theoretical,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Theoretical)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.05)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    chunk: Option<usize>,
    /// Maximum degree for the adaptive `gamma` (default m).
    #[arg(long)]
    max_degree: Option<usize>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<MatchingFamily> {
    read_family(path).with_context(|| format!("reading {}", path.display()))
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Gen(g) => generate(g, cli.seed, out),
        Command::Lift { input, parts } => {
            let lifted = lift_to_3uniform(&load(input)?)?;
            emit(out, &write_family(&lifted.family))?;
            let parts_path = parts.clone().or_else(|| out.map(|o| PathBuf::from(format!("{}.parts.csv", o.display()))));
            if let Some(path) = parts_path {
                let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
                w.write_record(["vertex", "part"])?;
                for (v, p) in lifted.parts.iter().enumerate() {
                    w.write_record([v.to_string().as_str(), p.label()])?;
                }
                w.flush()?;
            }
            eprintln!(
                "min colour degree {}, max original degree {}",
                lifted.min_colour_degree, lifted.max_original_degree
            );
            Ok(true)
        }
        Command::Stats { input, theorem, c, delta, eps0, json } => {
            let family = load(input)?;
            let stats = compute_stats(&family)?;
            let report = match theorem {
                Some(t) => {
                    let t = Theorem::from_number(*t).with_context(|| format!("unknown theorem {t}"))?;
                    Some(check_hypotheses(&family, t, HypothesisParams { c: *c, delta: *delta, eps0: *eps0 })?)
                }
                None => None,
            };
            let text = if *json {
                serde_json::to_string_pretty(&serde_json::json!({ "stats": stats, "hypotheses": report }))? + "\n"
            } else {
                let mut s = format!(
                    "k {}\nvertices {}\nmatchings {}\nedges {}\nsizes {}..{}\nmax degree {}\nmax multiplicity {}\nmax codegree {}\ncolouring {:?}\n",
                    stats.k,
                    stats.num_vertices,
                    stats.m,
                    stats.num_edges,
                    stats.min_size,
                    stats.max_size,
                    stats.max_degree,
                    stats.max_multiplicity,
                    stats.max_codegree,
                    family.colouring(),
                );
                if let Some(r) = &report {
                    if let Some((lo, hi)) = r.unequal_sizes {
                        s += &format!("sizes differ ({lo}..{hi}): hypotheses need equal sizes\n");
                    }
                    for cl in &r.clauses {
                        s += &format!(
                            "{} {}: {} vs {}\n",
                            if cl.holds { "ok  " } else { "FAIL" },
                            cl.name,
                            cl.measured,
                            cl.bound
                        );
                    }
                }
                s
            };
            emit(out, &text)?;
            Ok(report.is_none_or(|r| r.all_hold()))
        }
        Command::Verify { input, selection, partial } => {
            let family = load(input)?;
            let text = fs::read_to_string(selection).with_context(|| format!("reading {}", selection.display()))?;
            let rm = parse_selection(&text, family.k())?;
            match verify_rainbow(&family, &rm, !partial) {
                Ok(()) => {
                    println!("valid: {} of {} matchings", rm.len(), family.m());
                    Ok(true)
                }
                Err(v) => {
                    println!("invalid: {v}");
                    Ok(false)
                }
            }
        }
        Command::Solve(SolveCommand::Nibble(args)) => solve_nibble(args, cli.seed, out),
        Command::Solve(SolveCommand::Exact { input, max, count, node_budget, time_limit }) => {
            let family = load(input)?;
            let budget = Budget { nodes: *node_budget, time: time_limit.map(Duration::from_secs_f64) };
            let full = find_full(&family, budget);
            let mut exists = full.exists();
            let mut witness = match &full.outcome {
                FullOutcome::Found(rm) => Some(rm.clone()),
                _ => None,
            };
            println!(
                "full rainbow matching: {} ({} nodes)",
                match exists {
                    Some(true) => "yes",
                    Some(false) => "no",
                    None => "unknown (budget exhausted)",
                },
                full.nodes
            );
            if *max {
                let best = max_rainbow(&family, budget);
                println!(
                    "max rainbow matching: {}{} ({} nodes)",
                    best.size,
                    if best.complete { "" } else { " (lower bound)" },
                    best.nodes
                );
                if witness.is_none() {
                    witness = Some(best.witness);
                }
            }
            if *count {
                let n = enumerate_oracle(&family)?;
                println!("full rainbow matchings: {n}");
                exists.get_or_insert(n > 0);
            }
            if let (Some(path), Some(rm)) = (out, &witness) {
                emit(Some(path), &write_selection(rm))?;
            }
            Ok(exists == Some(true))
        }
        Command::Schedule(args) => schedule(args, out),
        Command::Experiment { spec } => {
            let parsed = ExperimentSpec::load(spec).with_context(|| format!("reading {}", spec.display()))?;
            let dir = out
                .map(Path::to_path_buf)
                .or_else(|| parsed.output.clone())
                .unwrap_or_else(|| PathBuf::from("experiment-out"));
            let result = run_experiment(&parsed, cli.threads)?;
            write_outputs(&parsed, &result, &dir)?;
            for c in &result.cells {
                eprintln!(
                    "cell {}: {}/{} successes, {} restarts, max deviation {:.3}",
                    c.cell, c.successes, c.trials, c.restarts, c.max_deviation
                );
            }
            eprintln!("wrote {}", dir.display());
            Ok(true)
        }
    }
}

fn generate(cmd: &GenCommand, seed: u64, out: Option<&Path>) -> Result<bool> {
    let family = match *cmd {
        GenCommand::Random { n, m, k, rho, max_degree, max_codegree } => {
            gen_random_simple(&RandomSimple { n, m, k, seed, max_degree, max_codegree, rho })?
        }
        GenCommand::Latin { order, kind } => {
            let kind = match kind {
                LatinArg::Cyclic => LatinKind::Cyclic,
                LatinArg::Random => LatinKind::Random,
            };
            gen_latin(order, kind, seed)?
        }
        GenCommand::DoubleStar { m } => gen_double_star(m)?,
        GenCommand::TwoK4 => gen_two_k4(),
        GenCommand::Find2reg { max_vertices, samples } => {
            let Some(found) = find_2regular_counterexample(max_vertices, seed, samples) else {
                eprintln!("no counterexample on at most {max_vertices} vertices");
                return Ok(false);
            };
            eprint!("{}", found.certificate());
            found.family
        }
    };
    emit(out, &write_family(&family))?;
    Ok(true)
}

fn solve_nibble(args: &NibbleArgs, seed: u64, out: Option<&Path>) -> Result<bool> {
    let family = load(&args.input)?;
    let Some(n) = family.uniform_size() else {
        bail!("matchings must all have the same size");
    };
    let m = family.m();
    let chunk = args
        .chunk
        .or(args.epsilon.map(|e| ((e * m as f64).round() as usize).clamp(1, m.max(1))))
        .or(args.alpha.map(|a| choose_chunk(n, m, a)));
    let mut params = match args.mode {
        ModeArg::Adaptive => adaptive_params(&family, chunk.unwrap_or_else(|| ((m as f64) / 20.0).round() as usize))?,
        ModeArg::Theoretical => {
            ScheduleParams::theoretical(family.k(), n, m, args.c, args.delta, args.alpha, args.chunk.or(chunk))?
        }
    };
    if let Some(xi) = args.xi {
        params.xi = xi;
    }
    if let Some(c0) = args.c0 {
        params.c0 = c0;
    }
    let opts = RunOptions {
        max_restarts: args.max_restarts,
        strict: args.strict,
        degree_sample: args.degree_sample,
        check_invariants: false,
    };
    let outcome = run(&family, &params, seed, &opts)?;
    if let Some(path) = &args.trajectory {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        for rec in &outcome.trajectory {
            w.serialize(rec)?;
        }
        w.flush()?;
    }
    eprintln!(
        "status {} after {} restarts, {} iterations, chunk {}, {:.3?}",
        outcome.status,
        outcome.restarts,
        outcome.trajectory.len(),
        params.chunk,
        outcome.wallclock
    );
    match &outcome.rainbow {
        Some(rm) => {
            emit(out, &write_selection(rm))?;
            Ok(true)
        }
        None => {
            if let Some(c) = outcome.failed_matching {
                eprintln!("matching {c} ran out of edges");
            }
            Ok(false)
        }
    }
}

#[derive(Serialize)]
struct ScheduleRow {
    i: usize,
    x: f64,
    r: f64,
    g: f64,
    f: f64,
    a: f64,
    b: f64,
    c: f64,
    predicted_size: f64,
    predicted_degree: f64,
    admissible: Option<bool>,
    failed_clauses: String,
}

fn schedule(args: &ScheduleArgs, out: Option<&Path>) -> Result<bool> {
    let mut params = match args.mode {
        ModeArg::Theoretical => {
            ScheduleParams::theoretical(args.k, args.n, args.m, args.c, args.delta, args.alpha, args.chunk)?
        }
        ModeArg::Adaptive => {
            let chunk = args
                .chunk
                .or(args.alpha.map(|a| choose_chunk(args.n, args.m, a)))
                .unwrap_or_else(|| ((args.m as f64) / 20.0).round().max(1.0) as usize);
            ScheduleParams::adaptive(args.k, args.n, args.m, args.max_degree.unwrap_or(args.m), chunk)?
        }
    };
    if let Some(xi) = args.xi {
        params.xi = xi;
    }
    if let Some(c0) = args.c0 {
        params.c0 = c0;
    }
    let theoretical = params.mode == Mode::Theoretical;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut all_ok = true;
    for s in params.table() {
        let check = theoretical.then(|| check_ab_constraints(&params, &s));
        let failed = match &check {
            Some(Err(clauses)) => {
                all_ok = false;
                clauses.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(";")
            }
            _ => String::new(),
        };
        w.serialize(ScheduleRow {
            i: s.i,
            x: s.x,
            r: s.r,
            g: s.g,
            f: s.f,
            a: s.a,
            b: s.b,
            c: s.c,
            predicted_size: params.predicted_size(s.i),
            predicted_degree: params.predicted_degree(s.i),
            admissible: check.map(|c| c.is_ok()),
            failed_clauses: failed,
        })?;
    }
    let text = String::from_utf8(w.into_inner()?)?;
    emit(out, &text)?;
    eprintln!(
        "chunk {}, epsilon {:.6}, tau {}, gamma {:.6}{}",
        params.chunk,
        params.epsilon(),
        params.tau(),
        params.gamma,
        params.alpha.map(|a| format!(", alpha {a:.6}")).unwrap_or_default()
    );
    Ok(all_ok)
}
