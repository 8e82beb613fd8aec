//! Instance constructors.
//!
//! Every generator is a deterministic function of its arguments (and seed,
//! where it takes one). Seeded generators use `ChaCha8Rng::seed_from_u64`.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Budget, FullOutcome};
use crate::model::{edge_key, pair_key, EdgeKey, Colouring, MatchingFamily, Vertex};

/// Parameters for [`gen_random_simple`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSimple {
    /// Edges per matching.
    pub n: usize,
    /// Number of matchings.
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub max_degree: Option<usize>,
    pub max_codegree: Option<usize>,
    /// Vertex universe is `ceil(rho * k * n)`.
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_rho() -> f64 {
    1.5
}

impl RandomSimple {
    pub fn new(n: usize, m: usize, k: usize, seed: u64) -> Self {
        RandomSimple { n, m, k, seed, max_degree: None, max_codegree: None, rho: default_rho() }
    }

    pub fn universe(&self) -> usize {
        (self.rho * (self.k * self.n) as f64).ceil() as usize
    }
}

const EDGE_ATTEMPTS: usize = 1000;
const RESTARTS: usize = 20;

/// `m` edge-disjoint matchings of exactly `n` random `k`-edges each.
///
/// Edges are placed by rejection sampling: a candidate is `k` distinct
/// vertices not yet used by the current matching (and below the degree cap);
/// it is rejected if it repeats an existing edge or exceeds the codegree cap.
/// After 1000 rejections for one edge the whole construction restarts, up to
/// 20 times.
pub fn gen_random_simple(cfg: &RandomSimple) -> Result<MatchingFamily> {
    if cfg.k < 2 {
        return Err(Error::Parameter("k must be at least 2".into()));
    }
    if !(cfg.rho >= 1.0) {
        return Err(Error::Parameter(format!("rho = {} must be at least 1", cfg.rho)));
    }
    let universe = cfg.universe();
    if universe > u32::MAX as usize {
        return Err(Error::Parameter("vertex universe too large".into()));
    }
    if let Some(cap) = cfg.max_degree {
        if (cap as u128) * (universe as u128) < (cfg.m * cfg.n * cfg.k) as u128 {
            return Err(Error::Parameter(format!(
                "degree cap {cap} over {universe} vertices cannot hold {} edge slots",
                cfg.m * cfg.n * cfg.k
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last_failure = (0, 0);
    for _ in 0..=RESTARTS {
        match try_random_simple(cfg, universe, &mut rng) {
            Ok(classes) => return MatchingFamily::from_flat(cfg.k, universe, classes),
            Err(at) => last_failure = at,
        }
    }
    Err(Error::CouldNotPlace { class: last_failure.0, edge: last_failure.1, restarts: RESTARTS })
}

fn try_random_simple(
    cfg: &RandomSimple,
    universe: usize,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Vec<Vec<Vertex>>, (usize, usize)> {
    let k = cfg.k;
    let deg_cap = cfg.max_degree.unwrap_or(usize::MAX);
    let mut degree = vec![0usize; universe];
    let mut edges = EdgeSet::new(k, universe, cfg.m * cfg.n);
    let mut codegree: HashMap<u64, usize> = HashMap::new();
    let mut classes = Vec::with_capacity(cfg.m);
    let mut candidate = vec![0 as Vertex; k];

    for class in 0..cfg.m {
        let mut pool: Vec<Vertex> = (0..universe as Vertex)
            .filter(|&v| degree[v as usize] < deg_cap)
            .collect();
        let mut flat = Vec::with_capacity(cfg.n * k);
        for slot in 0..cfg.n {
            let mut placed = false;
            for _ in 0..EDGE_ATTEMPTS {
                let len = pool.len();
                if len < k {
                    break;
                }
                // partial Fisher-Yates: the last k entries of the pool
                for t in 0..k {
                    let j = rng.random_range(0..len - t);
                    pool.swap(j, len - 1 - t);
                }
                candidate.copy_from_slice(&pool[len - k..]);
                candidate.sort_unstable();
                if edges.contains(&candidate) {
                    continue;
                }
                if let Some(cap) = cfg.max_codegree {
                    let over = pairs(&candidate)
                        .any(|p| codegree.get(&p).copied().unwrap_or(0) >= cap);
                    if over {
                        continue;
                    }
                    for p in pairs(&candidate) {
                        *codegree.entry(p).or_default() += 1;
                    }
                }
                edges.insert(&candidate);
                for &v in &candidate {
                    degree[v as usize] += 1;
                }
                flat.extend_from_slice(&candidate);
                pool.truncate(len - k);
                placed = true;
                break;
            }
            if !placed {
                return Err((class, slot));
            }
        }
        classes.push(flat);
    }
    Ok(classes)
}

/// Set of sorted edges; a bitset over vertex pairs for small graphs.
enum EdgeSet {
    Pairs(Vec<u64>),
    Hashed(HashSet<EdgeKey>),
}

impl EdgeSet {
    const MAX_PAIR_BITS: usize = 1 << 31;

    fn new(k: usize, universe: usize, capacity: usize) -> Self {
        let bits = universe * universe.saturating_sub(1) / 2;
        if k == 2 && bits <= Self::MAX_PAIR_BITS {
            EdgeSet::Pairs(vec![0; bits.div_ceil(64)])
        } else {
            EdgeSet::Hashed(HashSet::with_capacity(capacity))
        }
    }

    // index of (u, v), u < v, in the strict upper triangle
    fn bit(edge: &[Vertex]) -> usize {
        let (u, v) = (edge[0] as usize, edge[1] as usize);
        v * (v - 1) / 2 + u
    }

    fn contains(&self, edge: &[Vertex]) -> bool {
        match self {
            EdgeSet::Pairs(bits) => {
                let b = Self::bit(edge);
                bits[b >> 6] >> (b & 63) & 1 == 1
            }
            EdgeSet::Hashed(set) => set.contains(&edge_key(edge)),
        }
    }

    fn insert(&mut self, edge: &[Vertex]) {
        match self {
            EdgeSet::Pairs(bits) => {
                let b = Self::bit(edge);
                bits[b >> 6] |= 1 << (b & 63);
            }
            EdgeSet::Hashed(set) => {
                set.insert(edge_key(edge));
            }
        }
    }
}

fn pairs(edge: &[Vertex]) -> impl Iterator<Item = u64> + '_ {
    (0..edge.len()).flat_map(move |i| edge[i + 1..].iter().map(move |&v| pair_key(edge[i], v)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatinKind {
    /// `L[r][c] = (r + c) mod n`.
    Cyclic,
    /// Heuristically shuffled; see [`random_latin_square`].
    Random,
}

/// Latin square of order `n` as rows of symbols.
pub fn latin_square(n: usize, kind: LatinKind, seed: u64) -> Vec<Vec<usize>> {
    match kind {
        LatinKind::Cyclic => (0..n).map(|r| (0..n).map(|c| (r + c) % n).collect()).collect(),
        LatinKind::Random => random_latin_square(n, seed, 10 * n * n),
    }
}

/// Random row, column and symbol permutations of the cyclic square followed
/// by `steps` Jacobson–Matthews moves (stopping at the first proper square
/// after the step budget). Mixing is not quantified; treat it as a heuristic.
pub fn random_latin_square(n: usize, seed: u64, steps: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut syms: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    cols.shuffle(&mut rng);
    syms.shuffle(&mut rng);
    let mut cube = vec![0i8; n * n * n];
    let at = |r: usize, c: usize, s: usize| (r * n + c) * n + s;
    for r in 0..n {
        for c in 0..n {
            cube[at(rows[r], cols[c], syms[(r + c) % n])] = 1;
        }
    }
    if n >= 2 {
        jacobson_matthews(&mut cube, n, steps, &mut rng);
    }
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| (0..n).find(|&s| cube[at(r, c, s)] == 1).unwrap())
                .collect()
        })
        .collect()
}

fn jacobson_matthews(cube: &mut [i8], n: usize, steps: usize, rng: &mut ChaCha8Rng) {
    let at = |r: usize, c: usize, s: usize| (r * n + c) * n + s;
    let mut improper: Option<(usize, usize, usize)> = None;
    let mut step = 0;
    while step < steps || improper.is_some() {
        step += 1;
        let (r, c, s, r2, c2, s2);
        if let Some((ir, ic, is)) = improper {
            // the -1 cell has two +1 cells along each of its lines
            (r, c, s) = (ir, ic, is);
            r2 = pick_one(rng, (0..n).filter(|&x| cube[at(x, c, s)] == 1));
            c2 = pick_one(rng, (0..n).filter(|&x| cube[at(r, x, s)] == 1));
            s2 = pick_one(rng, (0..n).filter(|&x| cube[at(r, c, x)] == 1));
        } else {
            loop {
                let (a, b, d) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
                if cube[at(a, b, d)] == 0 {
                    (r, c, s) = (a, b, d);
                    break;
                }
            }
            r2 = (0..n).find(|&x| cube[at(x, c, s)] == 1).unwrap();
            c2 = (0..n).find(|&x| cube[at(r, x, s)] == 1).unwrap();
            s2 = (0..n).find(|&x| cube[at(r, c, x)] == 1).unwrap();
        }
        cube[at(r, c, s)] += 1;
        cube[at(r, c2, s2)] += 1;
        cube[at(r2, c, s2)] += 1;
        cube[at(r2, c2, s)] += 1;
        cube[at(r2, c, s)] -= 1;
        cube[at(r, c2, s)] -= 1;
        cube[at(r, c, s2)] -= 1;
        cube[at(r2, c2, s2)] -= 1;
        improper = (cube[at(r2, c2, s2)] < 0).then_some((r2, c2, s2));
    }
}

fn pick_one(rng: &mut ChaCha8Rng, it: impl Iterator<Item = usize>) -> usize {
    let options: Vec<usize> = it.collect();
    options[rng.random_range(0..options.len())]
}

/// Bipartite family of a Latin square: rows are vertices `0..n`, columns
/// `n..2n`, and symbol `s` is the matching `{(r, n + c) : L[r][c] = s}`.
/// Full rainbow matchings are exactly the transversals.
pub fn gen_latin(n: usize, kind: LatinKind, seed: u64) -> Result<MatchingFamily> {
    if n == 0 {
        return Err(Error::Parameter("Latin square order must be positive".into()));
    }
    latin_family(&latin_square(n, kind, seed))
}

pub fn latin_family(square: &[Vec<usize>]) -> Result<MatchingFamily> {
    let n = square.len();
    let mut classes = vec![Vec::with_capacity(2 * n); n];
    for (r, row) in square.iter().enumerate() {
        for (c, &s) in row.iter().enumerate() {
            classes[s].extend([r as Vertex, (n + c) as Vertex]);
        }
    }
    MatchingFamily::from_flat(2, 2 * n, classes)
}

/// The double-star family `𝒢_m` (`m` even): `m` components, each two adjacent
/// centres with `m/2` leaves apiece. Class 0 holds the `m` central edges;
/// class `j + 1` holds the `m` leaf edges of component `j`. Leaf classes are
/// stars, so the family is [`Colouring::Improper`].
///
/// Component `j` occupies ids `j(m+2) .. (j+1)(m+2)`: the two centres first,
/// then the leaves of the first centre, then those of the second.
pub fn gen_double_star(m: usize) -> Result<MatchingFamily> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::Parameter(format!("double star needs an even m >= 2, got {m}")));
    }
    let block = m + 2;
    let half = m / 2;
    let mut classes = vec![Vec::new(); m + 1];
    for j in 0..m {
        let base = (j * block) as Vertex;
        let (a, b) = (base, base + 1);
        classes[0].extend([a, b]);
        for l in 0..half as Vertex {
            classes[j + 1].extend([a, base + 2 + l]);
        }
        for l in 0..half as Vertex {
            classes[j + 1].extend([b, base + 2 + half as Vertex + l]);
        }
    }
    Ok(MatchingFamily::from_flat(2, m * block, classes)?.with_colouring(Colouring::Improper))
}

/// Two disjoint copies of `K4`, each split into the perfect matchings
/// `{01,23}`, `{02,13}`, `{03,12}`; matching `i` is factor `i` of both copies.
pub fn gen_two_k4() -> MatchingFamily {
    const FACTORS: [[[Vertex; 2]; 2]; 3] = [[[0, 1], [2, 3]], [[0, 2], [1, 3]], [[0, 3], [1, 2]]];
    let classes = FACTORS
        .iter()
        .map(|f| {
            [0, 4]
                .iter()
                .flat_map(|&off| f.iter().flat_map(move |e| [e[0] + off, e[1] + off]))
                .collect()
        })
        .collect();
    MatchingFamily::from_flat(2, 8, classes).expect("fixed construction")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    /// Colour vertex.
    V1,
    /// One side of a bipartite original graph.
    V2,
    /// The other side.
    V3,
    /// Original vertex of a non-bipartite graph.
    V23,
}

impl Part {
    pub fn label(self) -> &'static str {
        match self {
            Part::V1 => "V1",
            Part::V2 => "V2",
            Part::V3 => "V3",
            Part::V23 => "V23",
        }
    }
}

/// 3-uniform lift of a coloured graph: colour `i` becomes vertex
/// `num_vertices + i` and edge `{u, v}` of colour `i` becomes `{u, v, c_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lifted {
    /// Hyperedges grouped by colour. Every class shares its colour vertex, so
    /// the family is tagged improper.
    pub family: MatchingFamily,
    pub parts: Vec<Part>,
    pub original_vertices: usize,
    /// δ(V₁): minimum colour-vertex degree (= smallest colour class).
    pub min_colour_degree: usize,
    /// Δ(V₂ ∪ V₃): maximum degree among original vertices.
    pub max_original_degree: usize,
}

impl Lifted {
    pub fn colour_vertex(&self, colour: usize) -> Vertex {
        (self.original_vertices + colour) as Vertex
    }
}

pub fn lift_to_3uniform(family: &MatchingFamily) -> Result<Lifted> {
    if family.k() != 2 {
        return Err(Error::Parameter(format!("lift needs k = 2, got k = {}", family.k())));
    }
    let n = family.num_vertices();
    let m = family.m();
    let classes = (0..m)
        .map(|c| {
            let cv = (n + c) as Vertex;
            family.edges(c).flat_map(|e| [e[0], e[1], cv]).collect()
        })
        .collect();
    let lifted = MatchingFamily::from_flat(3, n + m, classes)?.with_colouring(Colouring::Improper);

    let mut parts = match bipartition(family) {
        Some(side) => side
            .into_iter()
            .map(|s| if s { Part::V3 } else { Part::V2 })
            .collect::<Vec<_>>(),
        None => vec![Part::V23; n],
    };
    parts.extend(std::iter::repeat_n(Part::V1, m));

    Ok(Lifted {
        family: lifted,
        parts,
        original_vertices: n,
        min_colour_degree: family.sizes().min().unwrap_or(0),
        max_original_degree: family.degrees().into_iter().max().unwrap_or(0) as usize,
    })
}

/// 2-colouring of the union graph by BFS, `None` if it has an odd cycle.
fn bipartition(family: &MatchingFamily) -> Option<Vec<bool>> {
    let n = family.num_vertices();
    let mut adj = vec![Vec::new(); n];
    for (_, e) in family.iter_edges() {
        adj[e[0] as usize].push(e[1]);
        adj[e[1] as usize].push(e[0]);
    }
    let mut side: Vec<Option<bool>> = vec![None; n];
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if side[start].is_some() {
            continue;
        }
        side[start] = Some(false);
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            let su = side[u].unwrap();
            for &w in &adj[u] {
                match side[w as usize] {
                    None => {
                        side[w as usize] = Some(!su);
                        queue.push_back(w as usize);
                    }
                    Some(sw) if sw == su => return None,
                    _ => {}
                }
            }
        }
    }
    Some(side.into_iter().map(Option::unwrap).collect())
}

/// A 2-regular bipartite family with every colour on exactly 3 edges and no
/// full rainbow matching, together with its oracle certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub family: MatchingFamily,
    /// Lengths of the disjoint cycles making up the graph.
    pub cycles: Vec<usize>,
    pub max_rainbow: usize,
    pub oracle_nodes: u64,
    pub candidates_checked: u64,
}

impl Counterexample {
    /// Companion note certifying the instance.
    pub fn certificate(&self) -> String {
        format!(
            "# certificate\n\
             graph: disjoint cycles {:?} ({} vertices), 2-regular, bipartite\n\
             colours: {} classes of 3 edges each\n\
             exact oracle: no full rainbow matching (search exhausted after {} nodes)\n\
             maximum rainbow matching: {}\n\
             candidates examined: {}\n",
            self.cycles,
            self.family.num_vertices(),
            self.family.m(),
            self.oracle_nodes,
            self.max_rainbow,
            self.candidates_checked,
        )
    }
}

/// Above this many colourings of one cycle layout, sample instead of enumerating.
const EXHAUSTIVE_LIMIT: u128 = 200_000;

/// Searches small 2-regular bipartite graphs (disjoint even cycles of length
/// at least 4) on up to `max_vertices` vertices, for a partition of the edges
/// into colour classes of size 3 with no full rainbow matching.
///
/// Vertex counts are multiples of 6 (even, and the edge count equals the
/// vertex count). Layouts are tried with the shortest cycles first; each
/// layout's colourings are enumerated when there are at most 200 000 of them
/// and otherwise `samples` random colourings are drawn.
pub fn find_2regular_counterexample(
    max_vertices: usize,
    seed: u64,
    samples: usize,
) -> Option<Counterexample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0u64;
    for v in (6..=max_vertices).step_by(6) {
        for cycles in even_cycle_layouts(v) {
            let edges = cycle_edges(&cycles);
            let mut test = |triples: &[[usize; 3]]| -> Option<Counterexample> {
                checked += 1;
                let classes: Vec<Vec<Vertex>> = triples
                    .iter()
                    .map(|t| t.iter().flat_map(|&e| edges[e]).collect())
                    .collect();
                let mut family = MatchingFamily::from_flat(2, v, classes).ok()?;
                if crate::model::validate(&family).is_err() {
                    family = family.with_colouring(Colouring::Improper);
                }
                let r = exact::find_full(&family, Budget::unlimited());
                if r.outcome != FullOutcome::None {
                    return None;
                }
                let best = exact::max_rainbow(&family, Budget::unlimited());
                Some(Counterexample {
                    family,
                    cycles: cycles.clone(),
                    max_rainbow: best.size,
                    oracle_nodes: r.nodes,
                    candidates_checked: checked,
                })
            };
            if triple_partition_count(v) <= EXHAUSTIVE_LIMIT {
                let mut found = None;
                each_triple_partition(v, &mut |p| {
                    found = test(p);
                    found.is_some()
                });
                if found.is_some() {
                    return found;
                }
            } else {
                let mut ids: Vec<usize> = (0..v).collect();
                for _ in 0..samples {
                    ids.shuffle(&mut rng);
                    let triples: Vec<[usize; 3]> =
                        ids.chunks_exact(3).map(|t| [t[0], t[1], t[2]]).collect();
                    if let Some(found) = test(&triples) {
                        return Some(found);
                    }
                }
            }
        }
    }
    None
}

/// Partitions of `v` into even parts >= 4, each in non-decreasing order,
/// listed with more (shorter) cycles first.
fn even_cycle_layouts(v: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, min: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        let mut len = min;
        while len <= rest {
            cur.push(len);
            rec(rest - len, len, cur, out);
            cur.pop();
            len += 2;
        }
    }
    let mut out = Vec::new();
    rec(v, 4, &mut Vec::new(), &mut out);
    out.sort_by_key(|p| std::cmp::Reverse(p.len()));
    out
}

fn cycle_edges(cycles: &[usize]) -> Vec<[Vertex; 2]> {
    let mut edges = Vec::new();
    let mut base = 0;
    for &len in cycles {
        for i in 0..len {
            let (a, b) = (base + i, base + (i + 1) % len);
            edges.push([a.min(b) as Vertex, a.max(b) as Vertex]);
        }
        base += len;
    }
    edges
}

/// `v! / (6^(v/3) (v/3)!)`
fn triple_partition_count(v: usize) -> u128 {
    let mut count = 1u128;
    let mut rest = v;
    while rest > 0 {
        // choose two partners for the lowest remaining item
        let r = (rest - 1) as u128;
        count = count.saturating_mul(r * (r - 1) / 2);
        rest -= 3;
    }
    count
}

/// Calls `visit` on every partition of `0..v` into unordered triples until it
/// returns true.
fn each_triple_partition(v: usize, visit: &mut dyn FnMut(&[[usize; 3]]) -> bool) {
    fn rec(
        free: &mut Vec<usize>,
        acc: &mut Vec<[usize; 3]>,
        visit: &mut dyn FnMut(&[[usize; 3]]) -> bool,
    ) -> bool {
        if free.is_empty() {
            return visit(acc);
        }
        let first = free[0];
        let rest: Vec<usize> = free[1..].to_vec();
        for i in 0..rest.len() {
            for j in i + 1..rest.len() {
                let mut remaining: Vec<usize> = rest
                    .iter()
                    .enumerate()
                    .filter(|&(t, _)| t != i && t != j)
                    .map(|(_, &x)| x)
                    .collect();
                acc.push([first, rest[i], rest[j]]);
                if rec(&mut remaining, acc, visit) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }
    let mut free: Vec<usize> = (0..v).collect();
    rec(&mut free, &mut Vec::new(), visit);
}

/// Appends matchings on fresh vertices until there are `target_m` of them;
/// each new matching is vertex-disjoint from everything before it.
pub fn pad_with_disjoint_matchings(family: &MatchingFamily, target_m: usize) -> Result<MatchingFamily> {
    if target_m < family.m() {
        return Err(Error::Parameter(format!(
            "target {target_m} is below the current {} matchings",
            family.m()
        )));
    }
    if target_m == family.m() {
        return Ok(family.clone());
    }
    let n = family.uniform_size().ok_or_else(|| {
        let min = family.sizes().min().unwrap_or(0);
        let max = family.sizes().max().unwrap_or(0);
        Error::UnequalSizes { min, max }
    })?;
    let k = family.k();
    let mut classes: Vec<Vec<Vertex>> = (0..family.m()).map(|c| family.class_flat(c).to_vec()).collect();
    let mut next = family.num_vertices();
    for _ in family.m()..target_m {
        classes.push((next..next + k * n).map(|v| v as Vertex).collect());
        next += k * n;
    }
    Ok(MatchingFamily::from_flat(k, next, classes)?.with_colouring(family.colouring()))
}
