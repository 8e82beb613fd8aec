//! Idealised trajectory and per-iteration probabilities.
//!
//! After `i` chunks have been processed (time `x = iε`) a surviving matching
//! is expected to have about `r(x)·n` edges and a surviving vertex about
//! `εγg(x)·n` edges into any later chunk, where
//!
//! ```text
//! r(x) = (1 - γx)^k        g(x) = (1 - γx)^(k-1)
//! ```
//!
//! solve `r' = -kγg`, `g' = -(k-1)γg²/r` with `r(0) = g(0) = 1`. Each
//! surviving vertex is condemned in iteration `i+1` with probability
//! `f_i = εγ g_i / r_i + c_i`.
//!
//! In [`Mode::Theoretical`] the slack `c_i` comes from the coupled error
//! recurrences for the matching-size error `a_i` and degree error `b_i`;
//! in [`Mode::Adaptive`] it is chosen at run time from the observed marking
//! probabilities (see [`crate::nibble`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Adaptive,
    Theoretical,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Mode::Adaptive),
            "theoretical" => Ok(Mode::Theoretical),
            other => Err(Error::Parameter(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Adaptive => "adaptive",
            Mode::Theoretical => "theoretical",
        })
    }
}

/// Expected surviving matching size as a fraction of `n`.
pub fn r(x: f64, gamma: f64, k: usize) -> f64 {
    (1.0 - gamma * x).powi(k as i32)
}

/// Expected surviving chunk degree as a fraction of `εγn`.
pub fn g(x: f64, gamma: f64, k: usize) -> f64 {
    (1.0 - gamma * x).powi(k as i32 - 1)
}

/// Midpoint of the open interval of admissible exponents `α` (with `ε ≈ n^-α`)
/// for the given `c` and `δ`, or `None` when it is empty.
///
/// The interval is `(max(δ + 2c, 0), min((1 - δ - 4c)/3, 1/3))`.
pub fn choose_alpha(c: f64, delta: f64) -> Option<f64> {
    if c >= 1.0 / 3.0 {
        return None;
    }
    let lo = (delta + 2.0 * c).max(0.0);
    let hi = ((1.0 - delta - 4.0 * c) / 3.0).min(1.0 / 3.0);
    (lo < hi).then(|| 0.5 * (lo + hi))
}

/// Chunk size `εm = max(1, round(n^-α · m))`, capped at `m`.
pub fn choose_chunk(n: usize, m: usize, alpha: f64) -> usize {
    let s = ((n as f64).powf(-alpha) * m as f64).round() as usize;
    s.clamp(1, m.max(1))
}

/// `ε` with `εm` an integer.
pub fn choose_epsilon(n: usize, m: usize, alpha: f64) -> f64 {
    choose_chunk(n, m, alpha) as f64 / m.max(1) as f64
}

/// Slack function `ξ(n) = 1/ln n`, using `ln 3` below `n = 3`.
pub fn default_xi(n: usize) -> f64 {
    1.0 / (n.max(3) as f64).ln()
}

/// `γ = max(Δ/n, m/n)` clamped into `(0, 1 - 1e-9]`.
pub fn adaptive_gamma(n: usize, m: usize, max_degree: usize) -> f64 {
    let n = n.max(1) as f64;
    (max_degree as f64 / n)
        .max(m as f64 / n)
        .clamp(1e-9, 1.0 - 1e-9)
}

/// `k·remaining ≤ min_size`: one greedy pick deletes `k` vertices and so
/// removes at most `k` edges from any other matching.
pub fn final_stage_guard(k: usize, remaining: usize, min_size: usize) -> bool {
    k * remaining <= min_size
}

pub const DEFAULT_C0: f64 = 4.0;
pub const DEFAULT_ETA: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub mode: Mode,
    pub k: usize,
    /// Common matching size.
    pub n: usize,
    /// Number of matchings.
    pub m: usize,
    pub gamma: f64,
    /// Matchings per chunk, `εm`.
    pub chunk: usize,
    pub alpha: Option<f64>,
    pub delta: f64,
    pub c: f64,
    pub xi: f64,
    pub c0: f64,
    /// Extra slack added in adaptive mode so `P(v)` stays inside `[0, 1]`.
    pub eta: f64,
}

impl ScheduleParams {
    /// Adaptive schedule: `γ` from the instance, `c_i` chosen at run time.
    pub fn adaptive(k: usize, n: usize, m: usize, max_degree: usize, chunk: usize) -> Result<Self> {
        let p = ScheduleParams {
            mode: Mode::Adaptive,
            k,
            n,
            m,
            gamma: adaptive_gamma(n, m, max_degree),
            chunk,
            alpha: None,
            delta: 0.0,
            c: 0.0,
            xi: default_xi(n),
            c0: DEFAULT_C0,
            eta: DEFAULT_ETA,
        };
        p.check()?;
        Ok(p)
    }

    /// Theoretical schedule: `γ = 1 - n^-c`, `α` from [`choose_alpha`] unless
    /// given, chunk from [`choose_chunk`] unless given.
    pub fn theoretical(
        k: usize,
        n: usize,
        m: usize,
        c: f64,
        delta: f64,
        alpha: Option<f64>,
        chunk: Option<usize>,
    ) -> Result<Self> {
        let alpha = match alpha {
            Some(a) => a,
            None => choose_alpha(c, delta).ok_or_else(|| {
                Error::Parameter(format!("no admissible alpha for c={c}, delta={delta}"))
            })?,
        };
        let p = ScheduleParams {
            mode: Mode::Theoretical,
            k,
            n,
            m,
            gamma: 1.0 - (n as f64).powf(-c),
            chunk: chunk.unwrap_or_else(|| choose_chunk(n, m, alpha)),
            alpha: Some(alpha),
            delta,
            c,
            xi: default_xi(n),
            c0: DEFAULT_C0,
            eta: DEFAULT_ETA,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.k < 2 {
            return bad(format!("k = {} must be at least 2", self.k));
        }
        if self.m == 0 || self.chunk == 0 || self.chunk > self.m {
            return bad(format!("chunk {} must lie in 1..={}", self.chunk, self.m));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma = {} must lie in (0, 1)", self.gamma));
        }
        if self.mode == Mode::Theoretical {
            let a = self.alpha.unwrap_or(f64::NAN);
            let ok = self.delta + 2.0 * self.c - a < 0.0
                && 1.5 * a + 0.5 * self.delta + 2.0 * self.c < 0.5
                && self.c < 1.0 / 3.0
                && a > 0.0
                && a < 1.0 / 3.0;
            if !ok {
                return bad(format!(
                    "alpha = {a}, c = {}, delta = {} violate the theoretical constraints",
                    self.c, self.delta
                ));
            }
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.chunk as f64 / self.m as f64
    }

    /// Number of chunks (iterations, the greedy last one included).
    pub fn tau(&self) -> usize {
        self.m.div_ceil(self.chunk)
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.epsilon()
    }

    pub fn r_at(&self, i: usize) -> f64 {
        r(self.x(i), self.gamma, self.k)
    }

    pub fn g_at(&self, i: usize) -> f64 {
        g(self.x(i), self.gamma, self.k)
    }

    /// `εγ g_i / r_i`, the condemnation probability before slack.
    pub fn base_rate(&self, i: usize) -> f64 {
        self.epsilon() * self.gamma * self.g_at(i) / self.r_at(i)
    }

    /// Predicted surviving matching size `r_i n`.
    pub fn predicted_size(&self, i: usize) -> f64 {
        self.r_at(i) * self.n as f64
    }

    /// Predicted maximum chunk degree `εγ g_i n`.
    pub fn predicted_degree(&self, i: usize) -> f64 {
        self.epsilon() * self.gamma * self.g_at(i) * self.n as f64
    }

    /// Rows `0..tau` of the schedule. Theoretical mode fills in the error
    /// recurrences; adaptive mode reports zero slack.
    pub fn table(&self) -> Vec<ScheduleState> {
        match self.mode {
            Mode::Theoretical => theoretical_table(self),
            Mode::Adaptive => (0..self.tau())
                .map(|i| ScheduleState {
                    i,
                    x: self.x(i),
                    r: self.r_at(i),
                    g: self.g_at(i),
                    f: self.base_rate(i).min(1.0),
                    a: 0.0,
                    b: 0.0,
                    c: 0.0,
                })
                .collect(),
        }
    }
}

/// One row of the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub i: usize,
    pub x: f64,
    pub r: f64,
    pub g: f64,
    pub f: f64,
    /// Matching-size error (edges).
    pub a: f64,
    /// Degree error (edge-slots).
    pub b: f64,
    /// Probability slack.
    pub c: f64,
}

/// Iterates the coupled `(a, b, c)` recurrences up to row `i`.
pub fn theoretical_error_terms(params: &ScheduleParams, i: usize) -> ScheduleState {
    iterate_error_terms(params, i + 1)[i]
}

pub fn theoretical_table(params: &ScheduleParams) -> Vec<ScheduleState> {
    iterate_error_terms(params, params.tau())
}

// The factor 2 on the edge-endpoint terms is written as k.
fn iterate_error_terms(p: &ScheduleParams, rows: usize) -> Vec<ScheduleState> {
    let n = p.n as f64;
    let m = p.m as f64;
    let eps = p.epsilon();
    let gamma = p.gamma;
    let ln_n = n.ln();
    let kf = p.k as f64;
    let spread = (eps * m).sqrt() * ln_n;

    let mut a = 0.0;
    let mut b = (eps * gamma * n).sqrt() * ln_n;
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let (ri, gi) = (p.r_at(i), p.g_at(i));
        let c = eps * gamma * a * gi * (1.0 + 2.0 * p.xi) / (ri * ri * n)
            + b * (1.0 + 2.0 * p.xi) / (ri * n);
        let rate = eps * gamma * gi / ri;
        let f = rate + c;
        out.push(ScheduleState { i, x: p.x(i), r: ri, g: gi, f, a, b, c });

        let a_next = p.c0 * (eps * eps * gi * m / ri + spread)
            + kf * c * ri * n
            + a * (1.0 - kf * rate);
        let b_next = (1.0 - f) * b + p.c0 * (eps * eps * gi * gi / (ri * ri) + spread);
        a = a_next;
        b = b_next;
    }
    out
}

/// Clauses bounding the error terms; a row is admissible when none fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AbClause {
    /// `a_i < r_i n / 2`
    SizeErrorHalf,
    /// `b_i ≤ εγ g_i n`
    DegreeErrorBound,
    /// `c_i ≤ εγ g_i / r_i`
    SlackBound,
    /// `εγ g_i / r_i ≤ 1/2`
    RateHalf,
    /// `a_i ≤ ξ r_i n`
    SizeErrorSmall,
    /// `b_i ≤ ξ ε g_i n`
    DegreeErrorSmall,
}

pub fn check_ab_constraints(
    params: &ScheduleParams,
    state: &ScheduleState,
) -> std::result::Result<(), Vec<AbClause>> {
    let n = params.n as f64;
    let eps = params.epsilon();
    let rate = eps * params.gamma * state.g / state.r;
    let mut failed = Vec::new();
    if !(state.a < state.r * n / 2.0) {
        failed.push(AbClause::SizeErrorHalf);
    }
    if !(state.b <= eps * params.gamma * state.g * n) {
        failed.push(AbClause::DegreeErrorBound);
    }
    if !(state.c <= rate) {
        failed.push(AbClause::SlackBound);
    }
    if !(rate <= 0.5) {
        failed.push(AbClause::RateHalf);
    }
    if !(state.a <= params.xi * state.r * n) {
        failed.push(AbClause::SizeErrorSmall);
    }
    if !(state.b <= params.xi * eps * state.g * n) {
        failed.push(AbClause::DegreeErrorSmall);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(failed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trajectory_endpoints() {
        assert_eq!(r(0.0, 0.7, 3), 1.0);
        assert_eq!(g(0.0, 0.7, 3), 1.0);
        assert_eq!(r(1.0, 0.5, 2), 0.25);
        assert_eq!(g(1.0, 0.5, 2), 0.5);
    }

    #[test]
    fn alpha_midpoint() {
        // interval (0.1, 0.8/3)
        let a = choose_alpha(0.05, 0.0).unwrap();
        assert!((a - (0.1 + 0.8 / 3.0) / 2.0).abs() < 1e-15);
        assert!((a - 0.183_333_333_333).abs() < 1e-9);
        assert_eq!(choose_alpha(0.3, 0.0), None);
        assert_eq!(choose_alpha(0.4, 0.0), None);
        // the interval closes at c = 1/10 when δ = 0
        let near = choose_alpha(0.0999, 0.0).unwrap();
        assert!((near - 0.2).abs() < 1e-3);
        assert_eq!(choose_alpha(0.1, 0.0), None);
    }

    #[test]
    fn epsilon_choice() {
        assert_eq!(choose_chunk(100, 100, 0.25), 32);
        assert!((choose_epsilon(100, 100, 0.25) - 0.32).abs() < 1e-15);
        assert_eq!(choose_epsilon(100, 37, 0.0), 1.0);
        assert_eq!(choose_chunk(1_000_000, 10, 0.3), 1);
    }

    #[test]
    fn guard_boundaries() {
        assert!(final_stage_guard(2, 0, 0));
        assert!(!final_stage_guard(2, 10, 19));
        assert!(final_stage_guard(2, 10, 20));
        assert!(!final_stage_guard(3, 10, 29));
    }

    #[test]
    fn tau_counts_partial_last_chunk() {
        let p = ScheduleParams::adaptive(2, 10, 10, 5, 3).unwrap();
        assert_eq!(p.tau(), 4);
        let p = ScheduleParams::adaptive(2, 10, 10, 5, 2).unwrap();
        assert_eq!(p.tau(), 5);
    }

    #[test]
    fn adaptive_gamma_clamps() {
        assert_eq!(adaptive_gamma(100, 80, 60), 0.8);
        assert_eq!(adaptive_gamma(100, 200, 60), 1.0 - 1e-9);
        assert_eq!(adaptive_gamma(100, 0, 0), 1e-9);
    }

    fn theory(n: usize) -> ScheduleParams {
        let gamma = 1.0 - (n as f64).powf(-0.05);
        let m = (gamma * n as f64).floor() as usize;
        ScheduleParams::theoretical(2, n, m, 0.05, 0.0, None, None).unwrap()
    }

    #[test]
    fn base_case_terms() {
        let p = theory(10_000);
        let s0 = theoretical_error_terms(&p, 0);
        let eps = p.epsilon();
        let n = p.n as f64;
        let b0 = (eps * p.gamma * n).sqrt() * n.ln();
        assert_eq!(s0.a, 0.0);
        assert!((s0.b - b0).abs() < 1e-9);
        assert!((s0.c - b0 * (1.0 + 2.0 * p.xi) / n).abs() < 1e-15);
        assert!((s0.f - (eps * p.gamma + s0.c)).abs() < 1e-15);
    }

    #[test]
    fn size_error_nondecreasing() {
        let p = theory(1_000_000);
        let t = theoretical_table(&p);
        assert!(t.windows(2).all(|w| w[1].a >= w[0].a));
        assert!(t.iter().all(|s| s.a >= 0.0 && s.b >= 0.0 && s.c >= 0.0 && s.f >= 0.0));
    }

    #[test]
    fn constraint_clauses() {
        let p = ScheduleParams::adaptive(2, 1000, 800, 700, 40).unwrap();
        let zero = ScheduleState { i: 0, x: 0.0, r: 1.0, g: 1.0, f: 0.0, a: 0.0, b: 0.0, c: 0.0 };
        assert!(check_ab_constraints(&p, &zero).is_ok());
        let big_a = ScheduleState { a: 1000.0, ..zero };
        let failed = check_ab_constraints(&p, &big_a).unwrap_err();
        assert!(failed.contains(&AbClause::SizeErrorHalf));
    }

    #[test]
    fn desk_scale_recurrences_outgrow_the_small_error_bounds() {
        // n = 10^6, c = 0.05, δ = 0, ξ = 1/ln n, C0 = 4. Values frozen from
        // an independent re-implementation of the recurrences: row 0 passes,
        // row 1 breaks only b_i ≤ ξ ε g_i n, row 2 also breaks a_i ≤ ξ r_i n.
        let p = theory(1_000_000);
        assert_eq!(p.chunk, 39_622);
        assert_eq!(p.tau(), 13);
        let t = theoretical_table(&p);
        assert!(check_ab_constraints(&p, &t[0]).is_ok());
        assert_eq!(check_ab_constraints(&p, &t[1]), Err(vec![AbClause::DegreeErrorSmall]));
        assert_eq!(
            check_ab_constraints(&p, &t[2]),
            Err(vec![AbClause::SizeErrorSmall, AbClause::DegreeErrorSmall])
        );
        assert!((t[1].a - 29_885.443_5).abs() < 0.01, "{}", t[1].a);
        assert!((t[1].b - 13_632.485_9).abs() < 0.01, "{}", t[1].b);
    }

    #[test]
    fn theoretical_rejects_infeasible_alpha() {
        assert!(ScheduleParams::theoretical(2, 1000, 700, 0.3, 0.0, None, None).is_err());
        assert!(ScheduleParams::theoretical(2, 1000, 700, 0.05, 0.0, Some(0.05), None).is_err());
    }

    proptest! {
        #[test]
        fn r_is_g_to_the_k_over_k_minus_one(x in 0.0f64..=1.0, gamma in 0.001f64..0.999, k in 2usize..8) {
            let ratio = r(x, gamma, k) / g(x, gamma, k).powf(k as f64 / (k as f64 - 1.0));
            prop_assert!((ratio - 1.0).abs() < 1e-12);
        }

        #[test]
        fn derivatives_match_odes(x in 0.0f64..0.999, gamma in 0.001f64..0.999, k in 2usize..5) {
            let h = 1e-6;
            let kf = k as f64;
            let dr = (r(x + h, gamma, k) - r(x, gamma, k)) / h;
            let dg = (g(x + h, gamma, k) - g(x, gamma, k)) / h;
            prop_assert!((dr + kf * gamma * g(x, gamma, k)).abs() <= 10.0 * h);
            let rhs = -(kf - 1.0) * gamma * g(x, gamma, k).powi(2) / r(x, gamma, k);
            prop_assert!((dg - rhs).abs() <= 10.0 * h);
        }

        #[test]
        fn trajectories_strictly_decrease(x in 0.0f64..0.99, dx in 0.001f64..0.01, gamma in 0.01f64..0.999, k in 2usize..6) {
            prop_assert!(r(x + dx, gamma, k) < r(x, gamma, k));
            prop_assert!(g(x + dx, gamma, k) < g(x, gamma, k));
        }

        #[test]
        fn chosen_alpha_satisfies_constraints(c in 0.0f64..0.4, delta in 0.0f64..0.3) {
            if let Some(a) = choose_alpha(c, delta) {
                prop_assert!(delta + 2.0 * c - a < 0.0);
                prop_assert!(1.5 * a + delta / 2.0 + 2.0 * c < 0.5);
                prop_assert!(c < 1.0 / 3.0);
                prop_assert!(a > 0.0 && a < 1.0 / 3.0);
            }
        }

        #[test]
        fn chunk_times_m_is_integral(n in 1usize..100_000, m in 1usize..5_000, alpha in 0.0f64..0.34) {
            let eps = choose_epsilon(n, m, alpha);
            let s = eps * m as f64;
            prop_assert!((s - s.round()).abs() < 1e-9);
            prop_assert!(s >= 1.0 - 1e-9 && s <= m as f64 + 1e-9);
        }

        #[test]
        fn theoretical_rates_bounded_when_admissible(n in 1_000usize..10_000_000, c in 0.01f64..0.09) {
            let gamma = 1.0 - (n as f64).powf(-c);
            let m = ((gamma * n as f64).floor() as usize).max(1);
            if let Ok(p) = ScheduleParams::theoretical(2, n, m, c, 0.0, None, None) {
                for s in theoretical_table(&p) {
                    prop_assert!(s.a >= 0.0 && s.b >= 0.0 && s.c >= 0.0 && s.f >= 0.0);
                    if check_ab_constraints(&p, &s).is_ok() {
                        prop_assert!(s.f <= 1.0);
                    }
                }
            }
        }
    }
}
