//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rainbow_core::exact::{enumerate_oracle, find_full, max_rainbow, Budget};
use rainbow_core::generators::{gen_double_star, gen_latin, gen_random_simple, gen_two_k4, LatinKind, RandomSimple};
use rainbow_core::harness::{run_experiment, write_outputs, ExperimentSpec};
use rainbow_core::nibble::{adaptive_params, run, RunOptions, RunOutcome};
use rainbow_core::schedule::{check_ab_constraints, choose_alpha, choose_chunk, g, r, theoretical_table, ScheduleParams};
use rainbow_core::{verify_rainbow, MatchingFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Every nibble run of the suite, for the cross-run criteria 4 and 8.
static RUNS: Mutex<Vec<RunSummary>> = Mutex::new(Vec::new());

struct RunSummary {
    max_residual: f64,
    guard: Option<bool>,
    success: bool,
}

fn record(out: &RunOutcome) {
    let max_residual = out.trajectory.iter().map(|r| r.zap_residual).fold(0.0, f64::max);
    RUNS.lock().unwrap().push(RunSummary { max_residual, guard: out.final_guard, success: out.is_success() });
}

fn nibble(family: &MatchingFamily, chunk: usize, seed: u64) -> RunOutcome {
    let params = adaptive_params(family, chunk).expect("schedule");
    let out = run(family, &params, seed, &RunOptions::default()).expect("run");
    record(&out);
    out
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn criterion_1() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut check = |name: String, family: &MatchingFamily, expected_max: usize| {
        let t = Instant::now();
        let full = find_full(family, Budget::unlimited());
        let best = max_rainbow(family, Budget::unlimited());
        let elapsed = t.elapsed();
        let ok = full.exists() == Some(false) && best.complete && best.size == expected_max && elapsed < Duration::from_secs(1);
        pass &= ok;
        notes.push(format!("{name}: max {} in {:.0?}", best.size, elapsed));
    };
    check("two K4".into(), &gen_two_k4(), 2);
    for m in [2, 4, 6] {
        check(format!("double star {m}"), &gen_double_star(m).unwrap(), m);
    }
    verdict(pass, notes.join(", "))
}

fn criterion_2() -> Verdict {
    let t = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for order in 2..=7 {
        let f = gen_latin(order, LatinKind::Cyclic, 0).unwrap();
        let exists = find_full(&f, Budget::unlimited()).exists();
        let count = enumerate_oracle(&f).unwrap();
        let expected = order % 2 == 1;
        pass &= exists == Some(expected) && (count > 0) == expected;
        notes.push(format!("{order}:{count}"));
    }
    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(5);
    verdict(pass, format!("transversal counts {} in {:.2?}", notes.join(" "), elapsed))
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let (mut worst_ratio, mut worst_dr, mut worst_dg) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let x: f64 = rng.random_range(h..1.0 - h);
        let gamma: f64 = rng.random_range(0.001..0.999);
        let k: usize = rng.random_range(2..=8);
        let kf = k as f64;
        let (rv, gv) = (r(x, gamma, k), g(x, gamma, k));
        worst_ratio = worst_ratio.max((rv - gv.powf(kf / (kf - 1.0))).abs());
        let dr = (r(x + h, gamma, k) - r(x - h, gamma, k)) / (2.0 * h);
        let dg = (g(x + h, gamma, k) - g(x - h, gamma, k)) / (2.0 * h);
        worst_dr = worst_dr.max((dr + kf * gamma * gv).abs());
        worst_dg = worst_dg.max((dg + (kf - 1.0) * gamma * gv * gv / rv).abs());
    }
    let pass = worst_ratio <= 1e-12 && worst_dr <= 10.0 * h && worst_dg <= 10.0 * h;
    verdict(pass, format!("max |r - g^(k/(k-1))| = {worst_ratio:.1e}, derivative errors {worst_dr:.1e}, {worst_dg:.1e}"))
}

fn criterion_4() -> Verdict {
    let runs = RUNS.lock().unwrap();
    let worst = runs.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    verdict(worst <= 1e-12 && !runs.is_empty(), format!("max |Q + P(1-Q) - f| = {worst:.1e} over {} runs", runs.len()))
}

fn criterion_5() -> Verdict {
    let t = Instant::now();
    let (n, m, chunk) = (2000, 1600, 80);
    let outs: Vec<RunOutcome> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let f = gen_random_simple(&RandomSimple::new(n, m, 2, seed)).unwrap();
            nibble(&f, chunk, seed)
        })
        .collect();
    let tau = m / chunk;
    let mut worst_half = 0.0f64;
    let mut worst_all = 0.0f64;
    let mut complete = true;
    for i in 0..tau {
        let sizes: Vec<f64> = outs.iter().filter_map(|o| o.trajectory.get(i)).map(|r| r.mean_size).collect();
        if sizes.len() != outs.len() {
            complete = false;
            continue;
        }
        let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
        let predicted = outs[0].trajectory[i].predicted_size;
        let dev = (mean - predicted).abs() / predicted;
        worst_all = worst_all.max(dev);
        if i <= tau / 2 {
            worst_half = worst_half.max(dev);
        }
    }
    let elapsed = t.elapsed();
    let pass = complete && worst_half <= 0.10 && worst_all <= 0.25;
    verdict(
        pass,
        format!(
            "max deviation {:.1}% (i <= tau/2), {:.1}% (all i), {} successes, {:.1?}",
            100.0 * worst_half,
            100.0 * worst_all,
            outs.iter().filter(|o| o.is_success()).count(),
            elapsed
        ),
    )
}

fn success_count(make: impl Fn(u64) -> MatchingFamily + Sync, chunk: impl Fn(&MatchingFamily) -> usize + Sync) -> (usize, usize) {
    let results: Vec<(bool, bool)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let f = make(seed);
            let out = nibble(&f, chunk(&f), seed);
            let verified = out.rainbow.as_ref().is_some_and(|rm| verify_rainbow(&f, rm, true).is_ok());
            (out.is_success(), verified)
        })
        .collect();
    let successes = results.iter().filter(|r| r.0).count();
    let verified = results.iter().filter(|r| r.0 && r.1).count();
    (successes, verified)
}

fn criterion_6() -> Verdict {
    let (s2, v2) = success_count(|seed| gen_random_simple(&RandomSimple::new(1000, 800, 2, seed)).unwrap(), |_| 40);
    // k = 3: linear hypergraph, chunk from the default exponent for c = 0.05
    let alpha = choose_alpha(0.05, 0.0).unwrap();
    let chunk3 = choose_chunk(500, 350, alpha);
    let (s3, v3) = success_count(
        |seed| {
            let cfg = RandomSimple { max_codegree: Some(1), ..RandomSimple::new(500, 350, 3, seed) };
            gen_random_simple(&cfg).unwrap()
        },
        |_| chunk3,
    );
    let pass = s2 >= 45 && v2 == s2 && s3 >= 40 && v3 == s3;
    verdict(pass, format!("k=2: {s2}/50 (verified {v2}); k=3 chunk {chunk3}: {s3}/50 (verified {v3})"))
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut instances, mut disagreements, mut successes, mut bad_successes) = (0, 0, 0, 0);
    let mut seed = 0u64;
    while instances < 100 {
        seed += 1;
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=5);
        let k = rng.random_range(2..=3);
        let rho = [1.0, 1.25, 1.5][rng.random_range(0..3)];
        let Ok(f) = gen_random_simple(&RandomSimple { rho, ..RandomSimple::new(n, m, k, seed) }) else {
            continue;
        };
        instances += 1;
        let exists = find_full(&f, Budget::unlimited()).exists().expect("complete search");
        let count = enumerate_oracle(&f).unwrap();
        if exists != (count > 0) {
            disagreements += 1;
        }
        for run_seed in 0..5 {
            let out = nibble(&f, 1 + (run_seed as usize % 2).min(m - 1), run_seed);
            if out.is_success() {
                successes += 1;
                let ok = verify_rainbow(&f, out.rainbow.as_ref().unwrap(), true).is_ok() && count > 0;
                if !ok {
                    bad_successes += 1;
                }
            }
        }
    }
    verdict(
        disagreements == 0 && bad_successes == 0,
        format!("{instances} instances, {disagreements} disagreements, {successes} nibble successes, {bad_successes} unconfirmed"),
    )
}

fn criterion_8() -> Verdict {
    // small, sparse families whose last chunk usually starts with the guard holding
    let outs: Vec<()> = (0..2000u64)
        .into_par_iter()
        .map(|seed| {
            let n = 20 + (seed % 5) as usize * 10;
            let m = 4 + (seed % 7) as usize;
            let k = 2 + (seed % 2) as usize;
            let f = gen_random_simple(&RandomSimple { rho: 2.0, ..RandomSimple::new(n, m, k, seed) }).unwrap();
            nibble(&f, 1 + (seed % 3) as usize, seed);
        })
        .collect();
    let runs = RUNS.lock().unwrap();
    let held = runs.iter().filter(|r| r.guard == Some(true)).count();
    let counterexamples = runs.iter().filter(|r| r.guard == Some(true) && !r.success).count();
    verdict(
        counterexamples == 0 && held > 0,
        format!("guard held in {held} of {} runs ({} in the sweep), {counterexamples} failures", runs.len(), outs.len()),
    )
}

fn criterion_9() -> Verdict {
    let n = 1_000_000usize;
    let c = 0.05;
    let gamma = 1.0 - (n as f64).powf(-c);
    let m = (gamma * n as f64).floor() as usize;
    let params = ScheduleParams::theoretical(2, n, m, c, 0.0, None, None).unwrap();
    let table = theoretical_table(&params);
    let mut first_bad = None;
    let mut max_f = 0.0f64;
    for s in &table {
        max_f = max_f.max(s.f);
        if let Err(clauses) = check_ab_constraints(&params, s) {
            first_bad.get_or_insert((s.i, clauses));
        }
    }
    let pass = first_bad.is_none() && max_f <= 1.0;
    let detail = match first_bad {
        None => format!("all {} rows admissible, max f = {max_f:.4}", table.len()),
        Some((i, clauses)) => format!("row {i} of {} breaks {clauses:?}; max f = {max_f:.4}", table.len()),
    };
    verdict(pass, detail)
}

fn criterion_10() -> Verdict {
    let spec = ExperimentSpec::from_json(
        r#"{
            "instance": {"kind": "random"},
            "grid": {"n": [200, 400], "m_ratio": [0.5], "chunk": [10], "mode": ["adaptive"]},
            "trials": 8,
            "base_seed": 10
        }"#,
    )
    .unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, threads) in dirs.iter().zip([1, 4]) {
        let res = run_experiment(&spec, Some(threads)).unwrap();
        write_outputs(&spec, &res, dir.path()).unwrap();
    }
    let files = ["cells.csv", "trials.csv", "spec.json", "trajectories/cell_0.csv", "trajectories/cell_1.csv"];
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    let differing: Vec<&str> = files.iter().copied().filter(|f| read(dirs[0].path(), f) != read(dirs[1].path(), f)).collect();
    verdict(differing.is_empty(), format!("1 vs 4 threads, differing files: {differing:?}"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "counterexample certification", criterion_1),
        (2, "latin square ground truth", criterion_2),
        (3, "schedule identities", criterion_3),
        (5, "trajectory concentration", criterion_5),
        (6, "success rate", criterion_6),
        (7, "oracle agreement", criterion_7),
        (8, "final-stage guard soundness", criterion_8),
        (4, "zap equation exactness", criterion_4),
        (9, "theoretical constraint audit", criterion_9),
        (10, "determinism across thread counts", criterion_10),
    ];
    let mut lines = Vec::new();
    for (id, name, check) in criteria {
        let t = Instant::now();
        let v = check();
        lines.push((id, format!("criterion {id:>2} {:<4} {name}: {} [{:.1?}]", if v.pass { "PASS" } else { "FAIL" }, v.detail, t.elapsed()), v.pass));
    }
    lines.sort_by_key(|l| l.0);
    for (_, line, _) in &lines {
        println!("{line}");
    }
    let failed = lines.iter().filter(|l| !l.2).count();
    println!("{} passed, {failed} failed", lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
