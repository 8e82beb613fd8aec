//! Exact search for rainbow matchings on small instances.
//!
//! [`find_full`] and [`max_rainbow`] branch over colour classes in fail-first
//! order (fewest currently available edges, ties by index) while keeping a
//! used-vertex bitset. [`enumerate_oracle`] walks the full Cartesian product
//! of classes; it is deliberately naive and serves as an independent check.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MatchingFamily, RainbowMatching, Vertex};

/// Search limits. The node budget is the deterministic limit; the wall-clock
/// limit is advisory and only checked every few thousand nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Budget {
    pub nodes: Option<u64>,
    pub time: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }

    pub fn nodes(limit: u64) -> Self {
        Budget { nodes: Some(limit), time: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FullOutcome {
    Found(RainbowMatching),
    /// Search space exhausted: no full rainbow matching exists.
    None,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FullResult {
    pub outcome: FullOutcome,
    pub nodes: u64,
}

impl FullResult {
    /// `Some(true/false)` when the search completed.
    pub fn exists(&self) -> Option<bool> {
        match self.outcome {
            FullOutcome::Found(_) => Some(true),
            FullOutcome::None => Some(false),
            FullOutcome::Timeout => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxResult {
    pub size: usize,
    pub witness: RainbowMatching,
    /// False when the budget ran out; `size` is then only a lower bound.
    pub complete: bool,
    pub nodes: u64,
}

struct Searcher<'a> {
    family: &'a MatchingFamily,
    used: Vec<u64>,
    nodes: u64,
    budget: Budget,
    start: Instant,
    out_of_budget: bool,
}

impl<'a> Searcher<'a> {
    fn new(family: &'a MatchingFamily, budget: Budget) -> Self {
        Searcher {
            family,
            used: vec![0; family.num_vertices().div_ceil(64)],
            nodes: 0,
            budget,
            start: Instant::now(),
            out_of_budget: false,
        }
    }

    #[inline]
    fn is_used(&self, v: Vertex) -> bool {
        self.used[v as usize >> 6] >> (v & 63) & 1 == 1
    }

    #[inline]
    fn toggle(&mut self, edge: &[Vertex]) {
        for &v in edge {
            self.used[v as usize >> 6] ^= 1 << (v & 63);
        }
    }

    fn available(&self, class: usize) -> impl Iterator<Item = usize> + '_ {
        self.family
            .edges(class)
            .enumerate()
            .filter(|(_, e)| e.iter().all(|&v| !self.is_used(v)))
            .map(|(i, _)| i)
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if let Some(limit) = self.budget.nodes {
            if self.nodes > limit {
                self.out_of_budget = true;
            }
        }
        if let Some(t) = self.budget.time {
            if self.nodes % 4096 == 0 && self.start.elapsed() > t {
                self.out_of_budget = true;
            }
        }
        !self.out_of_budget
    }

    /// Unassigned class with the fewest available edges, and that count.
    fn most_constrained(&self, open: &[usize]) -> Option<(usize, usize)> {
        open.iter()
            .map(|&c| (self.available(c).count(), c))
            .min()
            .map(|(count, c)| (c, count))
    }

    fn full(&mut self, open: &mut Vec<usize>, picks: &mut Vec<(usize, usize)>) -> Option<bool> {
        if open.is_empty() {
            return Some(true);
        }
        if !self.tick() {
            return None;
        }
        let (class, count) = self.most_constrained(open)?;
        if count == 0 {
            return Some(false);
        }
        let pos = open.iter().position(|&c| c == class).unwrap();
        open.swap_remove(pos);
        let choices: Vec<usize> = self.available(class).collect();
        for e in choices {
            let edge = self.family.edge(class, e);
            self.toggle(edge);
            picks.push((class, e));
            match self.full(open, picks) {
                Some(false) => {}
                other => return other,
            }
            picks.pop();
            self.toggle(self.family.edge(class, e));
        }
        open.push(class);
        let last = open.len() - 1;
        open.swap(pos, last);
        Some(false)
    }

    fn best(
        &mut self,
        open: &[usize],
        picks: &mut Vec<(usize, usize)>,
        best: &mut Vec<(usize, usize)>,
    ) {
        if !self.tick() {
            return;
        }
        if picks.len() > best.len() {
            *best = picks.clone();
        }
        let live: Vec<(usize, usize)> = open
            .iter()
            .map(|&c| (self.available(c).count(), c))
            .filter(|&(count, _)| count > 0)
            .collect();
        if picks.len() + live.len() <= best.len() {
            return;
        }
        let &(_, class) = live.iter().min().unwrap();
        let rest: Vec<usize> = live.iter().map(|&(_, c)| c).filter(|&c| c != class).collect();
        let choices: Vec<usize> = self.available(class).collect();
        for e in choices {
            self.toggle(self.family.edge(class, e));
            picks.push((class, e));
            self.best(&rest, picks, best);
            picks.pop();
            self.toggle(self.family.edge(class, e));
            if self.out_of_budget {
                return;
            }
        }
        self.best(&rest, picks, best);
    }

    fn to_matching(&self, picks: &[(usize, usize)]) -> RainbowMatching {
        let mut rm = RainbowMatching::new();
        for &(c, e) in picks {
            rm.insert(c, self.family.edge(c, e));
        }
        rm
    }
}

/// Finds a full rainbow matching or certifies that none exists.
pub fn find_full(family: &MatchingFamily, budget: Budget) -> FullResult {
    let mut s = Searcher::new(family, budget);
    let mut open: Vec<usize> = (0..family.m()).collect();
    let mut picks = Vec::with_capacity(family.m());
    let outcome = match s.full(&mut open, &mut picks) {
        Some(true) => FullOutcome::Found(s.to_matching(&picks)),
        Some(false) => FullOutcome::None,
        None => FullOutcome::Timeout,
    };
    FullResult { outcome, nodes: s.nodes }
}

/// Branch and bound for the largest rainbow matching.
pub fn max_rainbow(family: &MatchingFamily, budget: Budget) -> MaxResult {
    let mut s = Searcher::new(family, budget);
    let open: Vec<usize> = (0..family.m()).collect();
    let mut picks = Vec::new();
    let mut best = Vec::new();
    s.best(&open, &mut picks, &mut best);
    MaxResult {
        size: best.len(),
        witness: s.to_matching(&best),
        complete: !s.out_of_budget,
        nodes: s.nodes,
    }
}

pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Counts full rainbow matchings by walking every selection of one edge per
/// class. Refuses when the product of class sizes exceeds [`ENUMERATION_LIMIT`].
pub fn enumerate_oracle(family: &MatchingFamily) -> Result<u64> {
    let sizes: Vec<usize> = family.sizes().collect();
    let product = sizes
        .iter()
        .try_fold(1u128, |acc, &s| acc.checked_mul(s as u128))
        .unwrap_or(u128::MAX);
    if product > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { product, limit: ENUMERATION_LIMIT });
    }
    if product == 0 {
        return Ok(0);
    }
    let m = sizes.len();
    let mut stamp = vec![0u64; family.num_vertices()];
    let mut round = 0u64;
    let mut idx = vec![0usize; m];
    let mut count = 0u64;
    loop {
        round += 1;
        let disjoint = (0..m).all(|c| {
            family.edge(c, idx[c]).iter().all(|&v| {
                let slot = &mut stamp[v as usize];
                let fresh = *slot != round;
                *slot = round;
                fresh
            })
        });
        if disjoint {
            count += 1;
        }
        // odometer
        let mut c = 0;
        loop {
            if c == m {
                return Ok(count);
            }
            idx[c] += 1;
            if idx[c] < sizes[c] {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}
