//! Coloured matching families, their statistics, and rainbow-matching checks.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::slice::ChunksExact;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vertex id.
pub type Vertex = u32;

/// Whether every colour class is required to be a matching.
///
/// The counterexample families (double stars and their 3-uniform lifts) have
/// colour classes that share vertices; they are tagged `Improper` so the
/// matching invariant is not enforced on them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colouring {
    #[default]
    Proper,
    Improper,
}

/// `m` colour classes of `k`-vertex edges over the vertex set `0..num_vertices`.
///
/// Each class is stored flat with stride `k`; every edge is kept sorted.
/// Parallel edges are identical vertex lists in different classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingFamily {
    k: usize,
    num_vertices: usize,
    colouring: Colouring,
    classes: Vec<Vec<Vertex>>,
}

impl MatchingFamily {
    pub fn new(k: usize, num_vertices: usize, classes: Vec<Vec<Vec<Vertex>>>) -> Result<Self> {
        let mut flat = Vec::with_capacity(classes.len());
        for (ci, class) in classes.into_iter().enumerate() {
            let mut buf = Vec::with_capacity(class.len() * k);
            for (ei, edge) in class.into_iter().enumerate() {
                if edge.len() != k {
                    return Err(Error::Arity {
                        class: ci,
                        edge: ei,
                        len: edge.len(),
                        k,
                    });
                }
                buf.extend(edge);
            }
            flat.push(buf);
        }
        Self::from_flat(k, num_vertices, flat)
    }

    /// Builds a family from flat vertex buffers (one per class, stride `k`).
    pub fn from_flat(k: usize, num_vertices: usize, mut classes: Vec<Vec<Vertex>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("edge arity must be positive".into()));
        }
        for (ci, class) in classes.iter_mut().enumerate() {
            if class.len() % k != 0 {
                return Err(Error::Arity {
                    class: ci,
                    edge: class.len() / k,
                    len: class.len() % k,
                    k,
                });
            }
            for edge in class.chunks_exact_mut(k) {
                edge.sort_unstable();
            }
        }
        Ok(MatchingFamily {
            k,
            num_vertices,
            colouring: Colouring::Proper,
            classes,
        })
    }

    pub fn with_colouring(mut self, colouring: Colouring) -> Self {
        self.colouring = colouring;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn colouring(&self) -> Colouring {
        self.colouring
    }

    pub fn is_proper(&self) -> bool {
        self.colouring == Colouring::Proper
    }

    /// Number of colour classes.
    pub fn m(&self) -> usize {
        self.classes.len()
    }

    pub fn class_len(&self, class: usize) -> usize {
        self.classes[class].len() / self.k
    }

    pub fn edges(&self, class: usize) -> ChunksExact<'_, Vertex> {
        self.classes[class].chunks_exact(self.k)
    }

    pub fn edge(&self, class: usize, index: usize) -> &[Vertex] {
        &self.classes[class][index * self.k..(index + 1) * self.k]
    }

    /// Flat vertex buffer of one class.
    pub fn class_flat(&self, class: usize) -> &[Vertex] {
        &self.classes[class]
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m()).map(move |c| self.class_len(c))
    }

    /// The common class size, if the family is nonempty and all classes agree.
    pub fn uniform_size(&self) -> Option<usize> {
        let mut sizes = self.sizes();
        let first = sizes.next()?;
        sizes.all(|s| s == first).then_some(first)
    }

    pub fn total_edges(&self) -> usize {
        self.sizes().sum()
    }

    pub fn iter_edges(&self) -> impl Iterator<Item = (usize, &[Vertex])> + '_ {
        (0..self.m()).flat_map(move |c| self.edges(c).map(move |e| (c, e)))
    }

    pub fn contains_edge(&self, class: usize, edge: &[Vertex]) -> bool {
        edge.len() == self.k && self.edges(class).any(|e| e == edge)
    }

    /// Reorders classes: class `i` of the result is class `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.m(), "permutation length mismatch");
        MatchingFamily {
            k: self.k,
            num_vertices: self.num_vertices,
            colouring: self.colouring,
            classes: order.iter().map(|&c| self.classes[c].clone()).collect(),
        }
    }

    /// Degree of every vertex, counting each edge-slot (multiplicity included).
    pub fn degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.num_vertices];
        for class in &self.classes {
            for &v in class {
                if let Some(d) = deg.get_mut(v as usize) {
                    *d += 1;
                }
            }
        }
        deg
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    ArityTooSmall { k: usize },
    VertexOutOfRange { class: usize, edge: usize, vertex: Vertex },
    RepeatedVertexInEdge { class: usize, edge: usize, vertex: Vertex },
    SharedVertex { class: usize, vertex: Vertex },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ArityTooSmall { k } => write!(f, "edge arity {k} is below 2"),
            Violation::VertexOutOfRange { class, edge, vertex } => {
                write!(f, "vertex {vertex} out of range in edge {edge} of matching {class}")
            }
            Violation::RepeatedVertexInEdge { class, edge, vertex } => {
                write!(f, "vertex {vertex} repeated inside edge {edge} of matching {class}")
            }
            Violation::SharedVertex { class, vertex } => {
                write!(f, "vertex {vertex} repeated in matching {class}")
            }
        }
    }
}

/// Checks arity, vertex range, distinct vertices per edge and, for properly
/// coloured families, that each class is a matching.
pub fn validate(family: &MatchingFamily) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if family.k < 2 {
        out.push(Violation::ArityTooSmall { k: family.k });
    }
    let n = family.num_vertices;
    // stamp[v] == class + 1 means v was already used in this class
    let mut stamp = vec![0u32; n];
    for class in 0..family.m() {
        let tag = class as u32 + 1;
        for (ei, edge) in family.edges(class).enumerate() {
            for (j, &v) in edge.iter().enumerate() {
                if (v as usize) >= n {
                    out.push(Violation::VertexOutOfRange { class, edge: ei, vertex: v });
                    continue;
                }
                if j > 0 && edge[j - 1] == v {
                    out.push(Violation::RepeatedVertexInEdge { class, edge: ei, vertex: v });
                    continue;
                }
                if family.is_proper() {
                    if stamp[v as usize] == tag {
                        out.push(Violation::SharedVertex { class, vertex: v });
                    }
                    stamp[v as usize] = tag;
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyStats {
    pub m: usize,
    pub k: usize,
    pub num_vertices: usize,
    pub num_edges: usize,
    pub min_size: usize,
    pub max_size: usize,
    /// Δ(ℳ): edge-slots per vertex, multiplicity included.
    pub max_degree: usize,
    /// Largest number of classes containing one identical vertex set.
    pub max_multiplicity: usize,
    /// Largest number of edges containing a fixed vertex pair.
    pub max_codegree: usize,
}

/// Packs a sorted edge into a hashable key; narrow edges avoid allocation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum EdgeKey {
    Packed(u128),
    Wide(Box<[Vertex]>),
}

pub(crate) fn edge_key(edge: &[Vertex]) -> EdgeKey {
    if edge.len() <= 3 {
        let mut key = (edge.len() as u128) << 96;
        for (i, &v) in edge.iter().enumerate() {
            key |= (v as u128) << (32 * i);
        }
        EdgeKey::Packed(key)
    } else {
        EdgeKey::Wide(edge.into())
    }
}

#[inline]
pub(crate) fn pair_key(u: Vertex, v: Vertex) -> u64 {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    ((a as u64) << 32) | b as u64
}

pub fn compute_stats(family: &MatchingFamily) -> Result<FamilyStats> {
    validate(family).map_err(Error::InvalidFamily)?;
    let m = family.m();
    let min_size = family.sizes().min().unwrap_or(0);
    let max_size = family.sizes().max().unwrap_or(0);
    let max_degree = family.degrees().into_iter().max().unwrap_or(0) as usize;

    let mut multiplicity: HashMap<EdgeKey, usize> = HashMap::with_capacity(family.total_edges());
    for (_, e) in family.iter_edges() {
        *multiplicity.entry(edge_key(e)).or_default() += 1;
    }
    let max_multiplicity = multiplicity.values().copied().max().unwrap_or(0);

    let max_codegree = if family.k == 2 {
        max_multiplicity
    } else {
        let mut codeg: HashMap<u64, usize> = HashMap::new();
        for (_, e) in family.iter_edges() {
            for (i, &u) in e.iter().enumerate() {
                for &v in &e[i + 1..] {
                    *codeg.entry(pair_key(u, v)).or_default() += 1;
                }
            }
        }
        codeg.values().copied().max().unwrap_or(0)
    };

    Ok(FamilyStats {
        m,
        k: family.k,
        num_vertices: family.num_vertices,
        num_edges: family.total_edges(),
        min_size,
        max_size,
        max_degree,
        max_multiplicity,
        max_codegree,
    })
}

/// One edge per represented colour class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RainbowMatching {
    selection: BTreeMap<usize, Vec<Vertex>>,
}

impl RainbowMatching {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `edge` (sorted on insertion) for `class`, returning the previous pick.
    pub fn insert(&mut self, class: usize, edge: &[Vertex]) -> Option<Vec<Vertex>> {
        let mut e = edge.to_vec();
        e.sort_unstable();
        self.selection.insert(class, e)
    }

    pub fn get(&self, class: usize) -> Option<&[Vertex]> {
        self.selection.get(&class).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.selection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selection.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[Vertex])> + '_ {
        self.selection.iter().map(|(&c, e)| (c, e.as_slice()))
    }

    pub fn is_full(&self, m: usize) -> bool {
        self.len() == m && (0..m).all(|c| self.selection.contains_key(&c))
    }

    /// Relabels classes: class `order[i]` of the source becomes class `i`.
    pub fn relabel(&self, order: &[usize]) -> Self {
        let mut inverse = vec![usize::MAX; order.len()];
        for (i, &c) in order.iter().enumerate() {
            inverse[c] = i;
        }
        RainbowMatching {
            selection: self
                .selection
                .iter()
                .map(|(&c, e)| (inverse[c], e.clone()))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RainbowViolation {
    UnknownMatching { class: usize },
    EdgeNotInMatching { class: usize, edge: Vec<Vertex> },
    Overlap { vertex: Vertex, first: usize, second: usize },
    Missing { class: usize },
}

impl fmt::Display for RainbowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RainbowViolation::UnknownMatching { class } => write!(f, "matching {class} does not exist"),
            RainbowViolation::EdgeNotInMatching { class, edge } => {
                write!(f, "edge {edge:?} is not in matching {class}")
            }
            RainbowViolation::Overlap { vertex, first, second } => write!(
                f,
                "vertices overlap: vertex {vertex} used by matchings {first} and {second}"
            ),
            RainbowViolation::Missing { class } => write!(f, "matching {class} is not represented"),
        }
    }
}

impl std::error::Error for RainbowViolation {}

pub fn verify_rainbow(
    family: &MatchingFamily,
    rm: &RainbowMatching,
    require_full: bool,
) -> std::result::Result<(), RainbowViolation> {
    let mut owner: HashMap<Vertex, usize> = HashMap::new();
    for (class, edge) in rm.iter() {
        if class >= family.m() {
            return Err(RainbowViolation::UnknownMatching { class });
        }
        if !family.contains_edge(class, edge) {
            return Err(RainbowViolation::EdgeNotInMatching {
                class,
                edge: edge.to_vec(),
            });
        }
        for &v in edge {
            if let Some(&first) = owner.get(&v) {
                return Err(RainbowViolation::Overlap { vertex: v, first, second: class });
            }
            owner.insert(v, class);
        }
    }
    if require_full {
        if let Some(class) = (0..family.m()).find(|c| rm.get(*c).is_none()) {
            return Err(RainbowViolation::Missing { class });
        }
    }
    Ok(())
}

/// The four sufficient conditions for a full rainbow matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// Simple graphs, m up to (1-n^-c)n^(1+δ), Δ ≤ (1-n^-c)n.
    Simple = 1,
    /// δ = 0 corollary of [`Theorem::Simple`].
    SimpleSquare = 2,
    /// Multigraphs with bounded edge multiplicity.
    Multigraph = 3,
    /// k-uniform hypergraphs with bounded codegree.
    Hypergraph = 4,
}

impl Theorem {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Theorem::Simple),
            2 => Some(Theorem::SimpleSquare),
            3 => Some(Theorem::Multigraph),
            4 => Some(Theorem::Hypergraph),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisParams {
    pub c: f64,
    pub delta: f64,
    pub eps0: f64,
}

impl Default for HypothesisParams {
    fn default() -> Self {
        HypothesisParams { c: 0.05, delta: 0.0, eps0: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
}

impl Clause {
    fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Clause { name: name.into(), measured, bound, holds: measured <= bound }
    }

    fn below(name: &str, measured: f64, bound: f64) -> Self {
        Clause { name: name.into(), measured, bound, holds: measured < bound }
    }

    fn above(name: &str, measured: f64, bound: f64) -> Self {
        Clause { name: name.into(), measured, bound, holds: measured > bound }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub theorem: Theorem,
    /// Matching size used for the bounds (the largest size when sizes differ).
    pub n: usize,
    /// `(min, max)` sizes when the classes are not all the same size.
    pub unequal_sizes: Option<(usize, usize)>,
    pub clauses: Vec<Clause>,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.unequal_sizes.is_none() && self.clauses.iter().all(|c| c.holds)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }
}

pub fn check_hypotheses(
    family: &MatchingFamily,
    theorem: Theorem,
    params: HypothesisParams,
) -> Result<HypothesisReport> {
    let stats = compute_stats(family)?;
    Ok(check_hypotheses_with_stats(&stats, family.colouring(), theorem, params))
}

/// Hypothesis check from precomputed statistics.
pub fn check_hypotheses_with_stats(
    stats: &FamilyStats,
    colouring: Colouring,
    theorem: Theorem,
    params: HypothesisParams,
) -> HypothesisReport {
    let n = stats.max_size;
    let nf = n as f64;
    let m = stats.m as f64;
    let gamma = 1.0 - nf.powf(-params.c);
    let ln = nf.ln();
    let multiplicity_cap = nf.sqrt() / (ln * ln);
    let proper = Clause {
        name: "colour classes are matchings".into(),
        measured: if colouring == Colouring::Proper { 1.0 } else { 0.0 },
        bound: 1.0,
        holds: colouring == Colouring::Proper,
    };
    let simple = Clause::at_most("non-intersecting (multiplicity <= 1)", stats.max_multiplicity as f64, 1.0);

    let clauses = match theorem {
        Theorem::Simple => vec![
            proper,
            Clause::at_most("k = 2", stats.k as f64, 2.0),
            Clause {
                name: "0 <= delta < 1/4".into(),
                measured: params.delta,
                bound: 0.25,
                holds: (0.0..0.25).contains(&params.delta),
            },
            Clause {
                name: "0 < c < (1 - 4 delta)/10".into(),
                measured: params.c,
                bound: (1.0 - 4.0 * params.delta) / 10.0,
                holds: params.c > 0.0 && params.c < (1.0 - 4.0 * params.delta) / 10.0,
            },
            simple,
            Clause::at_most("m <= (1 - n^-c) n^(1+delta)", m, gamma * nf.powf(1.0 + params.delta)),
            Clause::at_most("max degree <= (1 - n^-c) n", stats.max_degree as f64, gamma * nf),
        ],
        Theorem::SimpleSquare => vec![
            proper,
            Clause::at_most("k = 2", stats.k as f64, 2.0),
            Clause {
                name: "0 < c < 1/10".into(),
                measured: params.c,
                bound: 0.1,
                holds: params.c > 0.0 && params.c < 0.1,
            },
            simple,
            Clause::at_most("m <= (1 - n^-c) n", m, gamma * nf),
        ],
        Theorem::Multigraph => vec![
            proper,
            Clause::at_most("k = 2", stats.k as f64, 2.0),
            Clause::above("eps0 > 0", params.eps0, 0.0),
            Clause::at_most("m <= (1 - eps0) n", m, (1.0 - params.eps0) * nf),
            Clause::at_most(
                "multiplicity <= sqrt(n)/log^2 n",
                stats.max_multiplicity as f64,
                multiplicity_cap,
            ),
        ],
        Theorem::Hypergraph => vec![
            proper,
            Clause::above("k >= 2", stats.k as f64, 1.0),
            Clause::above("eps0 > 0", params.eps0, 0.0),
            Clause::below("edge-disjoint (multiplicity < 2)", stats.max_multiplicity as f64, 2.0),
            Clause::at_most("m <= (1 - eps0) n", m, (1.0 - params.eps0) * nf),
            Clause::at_most(
                "codegree <= sqrt(n)/log^2 n",
                stats.max_codegree as f64,
                multiplicity_cap,
            ),
        ],
    };

    HypothesisReport {
        theorem,
        n,
        unequal_sizes: (stats.min_size != stats.max_size).then_some((stats.min_size, stats.max_size)),
        clauses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(k: usize, n: usize, classes: Vec<Vec<Vec<Vertex>>>) -> MatchingFamily {
        MatchingFamily::new(k, n, classes).unwrap()
    }

    #[test]
    fn single_edge_is_valid() {
        let f = fam(2, 2, vec![vec![vec![0, 1]]]);
        assert!(validate(&f).is_ok());
        let s = compute_stats(&f).unwrap();
        assert_eq!((s.m, s.max_degree, s.max_multiplicity), (1, 1, 1));
    }

    #[test]
    fn shared_vertex_is_reported() {
        let f = fam(2, 3, vec![vec![vec![0, 1], vec![1, 2]]]);
        let v = validate(&f).unwrap_err();
        assert_eq!(v, vec![Violation::SharedVertex { class: 0, vertex: 1 }]);
        assert_eq!(v[0].to_string(), "vertex 1 repeated in matching 0");
        assert!(compute_stats(&f).is_err());
    }

    #[test]
    fn improper_families_skip_matching_check() {
        let f = fam(2, 3, vec![vec![vec![0, 1], vec![1, 2]]]).with_colouring(Colouring::Improper);
        assert!(validate(&f).is_ok());
    }

    #[test]
    fn out_of_range_and_repeated_vertices() {
        let f = fam(2, 2, vec![vec![vec![0, 5]], vec![vec![1, 1]]]);
        let v = validate(&f).unwrap_err();
        assert!(v.contains(&Violation::VertexOutOfRange { class: 0, edge: 0, vertex: 5 }));
        assert!(v.contains(&Violation::RepeatedVertexInEdge { class: 1, edge: 0, vertex: 1 }));
    }

    #[test]
    fn arity_mismatch_rejected_at_construction() {
        let err = MatchingFamily::new(2, 4, vec![vec![vec![0, 1, 2]]]).unwrap_err();
        assert!(matches!(err, Error::Arity { class: 0, edge: 0, len: 3, k: 2 }));
    }

    #[test]
    fn doubled_edge_multiplicity() {
        let f = fam(2, 2, vec![vec![vec![0, 1]], vec![vec![1, 0]]]);
        let s = compute_stats(&f).unwrap();
        assert_eq!(s.max_degree, 2);
        assert_eq!(s.max_multiplicity, 2);
        assert_eq!(s.max_codegree, 2);
    }

    #[test]
    fn hypergraph_codegree() {
        let f = fam(3, 6, vec![vec![vec![0, 1, 2], vec![3, 4, 5]], vec![vec![0, 1, 3]]]);
        let s = compute_stats(&f).unwrap();
        assert_eq!(s.max_multiplicity, 1);
        assert_eq!(s.max_codegree, 2);
        assert_eq!(s.max_degree, 2);
    }

    #[test]
    fn rainbow_checks() {
        let f = fam(2, 3, vec![vec![vec![0, 1]], vec![vec![1, 2]]]);
        assert!(verify_rainbow(&f, &RainbowMatching::new(), false).is_ok());
        assert_eq!(
            verify_rainbow(&f, &RainbowMatching::new(), true),
            Err(RainbowViolation::Missing { class: 0 })
        );
        let mut rm = RainbowMatching::new();
        rm.insert(0, &[0, 1]);
        rm.insert(1, &[2, 1]);
        let err = verify_rainbow(&f, &rm, false).unwrap_err();
        assert!(matches!(err, RainbowViolation::Overlap { vertex: 1, .. }));
        assert!(err.to_string().starts_with("vertices overlap"));

        let mut wrong = RainbowMatching::new();
        wrong.insert(0, &[1, 2]);
        assert!(matches!(
            verify_rainbow(&f, &wrong, false),
            Err(RainbowViolation::EdgeNotInMatching { class: 0, .. })
        ));
        let mut unknown = RainbowMatching::new();
        unknown.insert(7, &[0, 1]);
        assert_eq!(
            verify_rainbow(&f, &unknown, false),
            Err(RainbowViolation::UnknownMatching { class: 7 })
        );
    }

    #[test]
    fn theorem_one_bounds_at_n_1000() {
        // 1000^-0.05 = exp(-0.05 ln 1000) = 0.70795, bound = 292.05... for c=0.05.
        let gamma = 1.0 - (-0.05f64 * 1000f64.ln()).exp();
        assert!((1.0 - gamma - 0.7079458).abs() < 1e-6);
        let stats = FamilyStats {
            m: 800,
            k: 2,
            num_vertices: 3000,
            num_edges: 800_000,
            min_size: 1000,
            max_size: 1000,
            max_degree: 750,
            max_multiplicity: 1,
            max_codegree: 1,
        };
        let p = HypothesisParams { c: 0.05, delta: 0.0, eps0: 0.1 };
        let r = check_hypotheses_with_stats(&stats, Colouring::Proper, Theorem::Simple, p);
        let mc = r.clause("m <= (1 - n^-c) n^(1+delta)").unwrap();
        assert!(!mc.holds);
        assert!((mc.bound - 292.054).abs() < 0.01, "{}", mc.bound);
        assert!(!r.clause("max degree <= (1 - n^-c) n").unwrap().holds);
        assert!(r.clause("non-intersecting (multiplicity <= 1)").unwrap().holds);
        assert!(r.clause("0 < c < (1 - 4 delta)/10").unwrap().holds);
        assert!(!r.all_hold());
    }

    #[test]
    fn simple_family_satisfies_multiplicity_clause() {
        let f = fam(2, 4, vec![vec![vec![0, 1], vec![2, 3]], vec![vec![0, 2], vec![1, 3]]]);
        let r = check_hypotheses(&f, Theorem::Multigraph, HypothesisParams::default()).unwrap();
        assert!(r.clause("multiplicity <= sqrt(n)/log^2 n").unwrap().measured == 1.0);
        assert!(r.unequal_sizes.is_none());
    }

    #[test]
    fn unequal_sizes_are_reported() {
        let f = fam(2, 4, vec![vec![vec![0, 1], vec![2, 3]], vec![vec![0, 2]]]);
        let r = check_hypotheses(&f, Theorem::SimpleSquare, HypothesisParams::default()).unwrap();
        assert_eq!(r.unequal_sizes, Some((1, 2)));
        assert!(!r.all_hold());
    }

    #[test]
    fn edge_keys_distinguish_arity() {
        assert_ne!(edge_key(&[0, 1]), edge_key(&[0, 0, 1]));
        assert_eq!(edge_key(&[3, 9]), edge_key(&[3, 9]));
        assert_ne!(edge_key(&[1, 2, 3, 4, 5]), edge_key(&[1, 2, 3, 4, 6]));
    }
}
