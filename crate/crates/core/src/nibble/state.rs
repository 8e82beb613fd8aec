//! Mutable state of one attempt and the individual steps of an iteration.
//!
//! Edges get dense ids grouped by class. Every class keeps the ids of its
//! surviving edges in a list with swap-removal (`pos[e]` is the index of `e`
//! in its list, or `DEAD`), so sampling a uniform surviving edge is O(1) and
//! deleting a vertex costs O(degree).

use rand::Rng;

use crate::model::{MatchingFamily, RainbowMatching, Vertex};

const DEAD: u32 = u32::MAX;

/// Read-only CSR incidence of a family; shared by all attempts of a run.
#[derive(Debug)]
pub struct Incidence {
    k: usize,
    num_vertices: usize,
    edge_vertices: Vec<Vertex>,
    edge_class: Vec<u32>,
    class_start: Vec<usize>,
    vert_start: Vec<usize>,
    vert_edges: Vec<u32>,
}

impl Incidence {
    pub fn new(family: &MatchingFamily) -> Self {
        let k = family.k();
        let nv = family.num_vertices();
        let mut edge_vertices = Vec::with_capacity(family.total_edges() * k);
        let mut edge_class = Vec::with_capacity(family.total_edges());
        let mut class_start = Vec::with_capacity(family.m() + 1);
        for c in 0..family.m() {
            class_start.push(edge_class.len());
            edge_vertices.extend_from_slice(family.class_flat(c));
            edge_class.extend(std::iter::repeat_n(c as u32, family.class_len(c)));
        }
        class_start.push(edge_class.len());

        let mut vert_start = vec![0usize; nv + 1];
        for &v in &edge_vertices {
            vert_start[v as usize + 1] += 1;
        }
        for v in 0..nv {
            vert_start[v + 1] += vert_start[v];
        }
        let mut fill = vert_start.clone();
        let mut vert_edges = vec![0u32; edge_vertices.len()];
        for (e, edge) in edge_vertices.chunks_exact(k).enumerate() {
            for &v in edge {
                vert_edges[fill[v as usize]] = e as u32;
                fill[v as usize] += 1;
            }
        }
        Incidence { k, num_vertices: nv, edge_vertices, edge_class, class_start, vert_start, vert_edges }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_classes(&self) -> usize {
        self.class_start.len() - 1
    }

    #[inline]
    pub fn edge(&self, e: u32) -> &[Vertex] {
        let s = e as usize * self.k;
        &self.edge_vertices[s..s + self.k]
    }

    #[inline]
    pub fn class_of(&self, e: u32) -> usize {
        self.edge_class[e as usize] as usize
    }

    #[inline]
    fn incident(&self, v: Vertex) -> &[u32] {
        &self.vert_edges[self.vert_start[v as usize]..self.vert_start[v as usize + 1]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ClassStatus {
    /// In a chunk that has not been reached.
    Pending,
    /// In the current chunk and still waiting for an edge (collision repair).
    Active,
    Done,
}

/// A step could not be carried out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepFailure {
    /// The matching had no surviving edge when it was needed.
    EmptyMatching(usize),
    /// Some zap probability fell outside `[0, 1]`.
    Restart,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MarkingSummary {
    pub max_q: f64,
    /// Exact maximum over surviving vertices of their degree into the chunk.
    pub max_chunk_degree: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkOutcome {
    /// Distinct vertices touched by a chosen edge.
    pub marked: usize,
    /// Vertices deleted as endpoints of collision-free chosen edges.
    pub killed: usize,
    /// Vertices lying on two or more chosen edges.
    pub collisions: usize,
    /// Classes whose chosen edge collided, in chunk order.
    pub phi: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ZapOutcome {
    pub zapped: Vec<Vertex>,
    /// Largest `|Q + P(1 - Q) - f|` over the vertices considered.
    pub max_residual: f64,
}

/// Live state of one attempt: surviving vertices and edges, the partial
/// rainbow matching, and per-iteration scratch space.
pub struct RunState<'a> {
    inc: &'a Incidence,
    alive: Vec<bool>,
    alive_count: usize,
    live: Vec<Vec<u32>>,
    pos: Vec<u32>,
    status: Vec<ClassStatus>,
    picks: Vec<Option<u32>>,
    // marking probabilities: Q(v) = 1 - keep[v]
    keep: Vec<f64>,
    chunk_degree: Vec<u32>,
    touched: Vec<Vertex>,
    class_degree: Vec<u32>,
    class_touched: Vec<Vertex>,
    mark_count: Vec<u32>,
    marked: Vec<Vertex>,
}

impl<'a> RunState<'a> {
    pub fn new(inc: &'a Incidence) -> Self {
        let m = inc.num_classes();
        let nv = inc.num_vertices;
        let live = (0..m)
            .map(|c| (inc.class_start[c] as u32..inc.class_start[c + 1] as u32).collect())
            .collect();
        let mut pos = vec![0u32; inc.edge_class.len()];
        for c in 0..m {
            for (i, e) in (inc.class_start[c]..inc.class_start[c + 1]).enumerate() {
                pos[e] = i as u32;
            }
        }
        RunState {
            inc,
            alive: vec![true; nv],
            alive_count: nv,
            live,
            pos,
            status: vec![ClassStatus::Pending; m],
            picks: vec![None; m],
            keep: vec![1.0; nv],
            chunk_degree: vec![0; nv],
            touched: Vec::new(),
            class_degree: vec![0; nv],
            class_touched: Vec::new(),
            mark_count: vec![0; nv],
            marked: Vec::new(),
        }
    }

    pub fn incidence(&self) -> &Incidence {
        self.inc
    }

    pub fn is_alive(&self, v: Vertex) -> bool {
        self.alive[v as usize]
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    /// Current number of surviving edges of a class.
    pub fn size(&self, class: usize) -> usize {
        self.live[class].len()
    }

    pub fn surviving_edges(&self, class: usize) -> impl Iterator<Item = &[Vertex]> + '_ {
        self.live[class].iter().map(|&e| self.inc.edge(e))
    }

    pub fn is_processed(&self, class: usize) -> bool {
        self.status[class] == ClassStatus::Done
    }

    /// Partial rainbow matching built so far.
    pub fn rainbow(&self) -> RainbowMatching {
        let mut rm = RainbowMatching::new();
        for (c, pick) in self.picks.iter().enumerate() {
            if let Some(e) = pick {
                rm.insert(c, self.inc.edge(*e));
            }
        }
        rm
    }

    pub fn picked_count(&self) -> usize {
        self.picks.iter().filter(|p| p.is_some()).count()
    }

    /// Deletes `v` and all of its surviving edges. Returns false if it was
    /// already gone.
    pub fn delete_vertex(&mut self, v: Vertex) -> bool {
        if !self.alive[v as usize] {
            return false;
        }
        self.alive[v as usize] = false;
        self.alive_count -= 1;
        let inc = self.inc;
        for &e in inc.incident(v) {
            let p = self.pos[e as usize];
            if p == DEAD {
                continue;
            }
            let list = &mut self.live[inc.class_of(e)];
            let last = list.pop().expect("live list holds e");
            if last != e {
                list[p as usize] = last;
                self.pos[last as usize] = p;
            }
            self.pos[e as usize] = DEAD;
        }
        true
    }

    fn delete_edge_vertices(&mut self, e: u32) -> usize {
        let inc = self.inc;
        inc.edge(e).iter().filter(|&&v| self.delete_vertex(v)).count()
    }

    fn take(&mut self, class: usize, e: u32) {
        self.picks[class] = Some(e);
        self.status[class] = ClassStatus::Done;
    }

    /// Computes `Q(v) = 1 - Π (1 - deg_M(v)/|M|)` over the classes of `chunk`
    /// for every surviving vertex, from the current surviving sets.
    pub fn compute_marking(&mut self, chunk: &[usize]) -> Result<MarkingSummary, StepFailure> {
        for &v in &self.touched {
            self.keep[v as usize] = 1.0;
            self.chunk_degree[v as usize] = 0;
        }
        self.touched.clear();
        for &c in chunk {
            let size = self.live[c].len();
            if size == 0 {
                return Err(StepFailure::EmptyMatching(c));
            }
            for &e in &self.live[c] {
                for &v in self.inc.edge(e) {
                    if self.class_degree[v as usize] == 0 {
                        self.class_touched.push(v);
                    }
                    self.class_degree[v as usize] += 1;
                }
            }
            for &v in &self.class_touched {
                let d = self.class_degree[v as usize];
                if self.chunk_degree[v as usize] == 0 {
                    self.touched.push(v);
                }
                self.chunk_degree[v as usize] += d;
                self.keep[v as usize] *= 1.0 - d as f64 / size as f64;
                self.class_degree[v as usize] = 0;
            }
            self.class_touched.clear();
        }
        let mut summary = MarkingSummary::default();
        for &v in &self.touched {
            summary.max_q = summary.max_q.max(1.0 - self.keep[v as usize]);
            summary.max_chunk_degree = summary.max_chunk_degree.max(self.chunk_degree[v as usize] as usize);
        }
        Ok(summary)
    }

    /// Marking probability from the last [`compute_marking`](Self::compute_marking).
    pub fn marking_probability(&self, v: Vertex) -> f64 {
        1.0 - self.keep[v as usize]
    }

    /// Step (i): one uniform surviving edge per class of `chunk`. Edges that
    /// share no vertex with another chosen edge join the rainbow matching and
    /// their endpoints are deleted; the others' classes are returned in `phi`.
    pub fn mark_and_kill<R: Rng>(&mut self, chunk: &[usize], rng: &mut R) -> Result<MarkOutcome, StepFailure> {
        self.unmark();
        let mut chosen = Vec::with_capacity(chunk.len());
        for &c in chunk {
            let list = &self.live[c];
            if list.is_empty() {
                return Err(StepFailure::EmptyMatching(c));
            }
            let e = list[rng.random_range(0..list.len())];
            self.status[c] = ClassStatus::Active;
            chosen.push((c, e));
            for &v in self.inc.edge(e) {
                if self.mark_count[v as usize] == 0 {
                    self.marked.push(v);
                }
                self.mark_count[v as usize] += 1;
            }
        }
        let mut out = MarkOutcome {
            marked: self.marked.len(),
            collisions: self.marked.iter().filter(|&&v| self.mark_count[v as usize] > 1).count(),
            ..MarkOutcome::default()
        };
        for (c, e) in chosen {
            let collides = self.inc.edge(e).iter().any(|&v| self.mark_count[v as usize] > 1);
            if collides {
                out.phi.push(c);
            } else {
                self.take(c, e);
                out.killed += self.delete_edge_vertices(e);
            }
        }
        Ok(out)
    }

    pub fn was_marked(&self, v: Vertex) -> bool {
        self.mark_count[v as usize] > 0
    }

    /// Clears the marks of step (i).
    pub fn unmark(&mut self) {
        for &v in &self.marked {
            self.mark_count[v as usize] = 0;
        }
        self.marked.clear();
    }

    /// Zap probability `P = (f - Q)/(1 - Q)` so that `Q + P(1 - Q) = f`.
    /// `None` when `P` would leave `[0, 1]`.
    pub fn zap_probability(q: f64, f: f64) -> Option<f64> {
        if q >= 1.0 {
            return (f >= 1.0).then_some(0.0);
        }
        let p = (f - q) / (1.0 - q);
        (0.0..=1.0).contains(&p).then_some(p)
    }

    /// Step (ii): deletes every surviving vertex independently with its zap
    /// probability. Nothing is deleted if any probability is out of range.
    pub fn zap<R: Rng>(&mut self, f: f64, rng: &mut R) -> Result<ZapOutcome, StepFailure> {
        let mut out = ZapOutcome::default();
        for v in 0..self.alive.len() {
            if !self.alive[v] {
                continue;
            }
            let q = 1.0 - self.keep[v];
            let p = Self::zap_probability(q, f).ok_or(StepFailure::Restart)?;
            out.max_residual = out.max_residual.max((q + p * (1.0 - q) - f).abs());
        }
        for v in 0..self.alive.len() {
            if !self.alive[v] {
                continue;
            }
            let q = 1.0 - self.keep[v];
            let p = Self::zap_probability(q, f).unwrap_or(0.0);
            if p > 0.0 && rng.random::<f64>() < p {
                out.zapped.push(v as Vertex);
            }
        }
        for &v in &out.zapped {
            self.delete_vertex(v);
        }
        Ok(out)
    }

    /// Surviving edge of `class` with the smallest lowest vertex (ties by the
    /// remaining vertices).
    pub fn lowest_edge(&self, class: usize) -> Option<u32> {
        self.live[class]
            .iter()
            .copied()
            .min_by(|&a, &b| self.inc.edge(a).cmp(self.inc.edge(b)))
    }

    fn greedy_pick(&mut self, class: usize) -> Result<usize, StepFailure> {
        let e = self.lowest_edge(class).ok_or(StepFailure::EmptyMatching(class))?;
        self.take(class, e);
        Ok(self.delete_edge_vertices(e))
    }

    /// Step (iii): in increasing class index, takes the lowest surviving edge
    /// of each collided class. Returns the number of vertices deleted.
    pub fn repair(&mut self, phi: &[usize]) -> Result<usize, StepFailure> {
        let mut order = phi.to_vec();
        order.sort_unstable();
        let mut deleted = 0;
        for c in order {
            deleted += self.greedy_pick(c)?;
        }
        self.unmark();
        Ok(deleted)
    }

    /// Last chunk: greedy in increasing class index.
    pub fn final_greedy(&mut self, classes: &[usize]) -> Result<usize, StepFailure> {
        let mut order = classes.to_vec();
        order.sort_unstable();
        let mut deleted = 0;
        for c in order {
            self.status[c] = ClassStatus::Active;
            deleted += self.greedy_pick(c)?;
        }
        Ok(deleted)
    }

    /// Exact degree of `v` into each of `classes`, summed.
    pub fn degree_into(&self, v: Vertex, classes: impl Fn(usize) -> bool) -> usize {
        self.inc
            .incident(v)
            .iter()
            .filter(|&&e| self.pos[e as usize] != DEAD && classes(self.inc.class_of(e)))
            .count()
    }

    /// Per-chunk degrees of `v` into pending classes, via `chunk_of`.
    pub fn chunk_degrees(&self, v: Vertex, chunk_of: &[usize], counts: &mut [usize]) {
        for &e in self.inc.incident(v) {
            if self.pos[e as usize] == DEAD {
                continue;
            }
            let c = self.inc.class_of(e);
            if self.status[c] == ClassStatus::Pending {
                counts[chunk_of[c]] += 1;
            }
        }
    }

    /// Checks that every surviving edge has all endpoints alive and that the
    /// partial rainbow matching is vertex-disjoint.
    pub fn check_consistency(&self) -> Result<(), String> {
        for (c, list) in self.live.iter().enumerate() {
            for (i, &e) in list.iter().enumerate() {
                if self.pos[e as usize] != i as u32 {
                    return Err(format!("edge {e} of class {c} has a stale position"));
                }
                if let Some(v) = self.inc.edge(e).iter().find(|&&v| !self.alive[v as usize]) {
                    return Err(format!("edge {e} of class {c} survives with vertex {v} deleted"));
                }
            }
        }
        let mut owner = std::collections::HashMap::new();
        for (c, pick) in self.picks.iter().enumerate() {
            if let Some(e) = pick {
                for &v in self.inc.edge(*e) {
                    if let Some(prev) = owner.insert(v, c) {
                        return Err(format!("vertex {v} used by classes {prev} and {c}"));
                    }
                }
            }
        }
        Ok(())
    }
}
