//! Capacitated undirected graphs and the vocabulary built on top of them:
//! vertex sets, partitions, edge sets, vertex weightings and demands.
//!
//! Vertices are dense integers `0..n`. Parallel edges are kept distinct in
//! storage; all capacity aggregates (`deg`, `δC`, `δ𝒫`) sum over them.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex {0} out of range (n = {1})")]
    VertexOutOfRange(usize, usize),
    #[error("edge {0} out of range (m = {1})")]
    EdgeOutOfRange(usize, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("capacity {0} on edge {1} must be positive and finite")]
    BadCapacity(f64, usize),
    #[error("capacity {0} on edge {1} outside declared range [1, {2}]")]
    OutsideDeclaredRange(f64, usize, f64),
    #[error("empty vertex set where a nonempty one is required")]
    EmptySet,
    #[error("clusters do not form a partition of the vertex set")]
    NotAPartition,
    #[error("demand entries sum to {0}, beyond tolerance {1}")]
    UnbalancedDemand(f64, f64),
    #[error("expected a vector of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub capacity: f64,
}

impl Edge {
    /// Lower-indexed endpoint; positive flow runs from here.
    pub fn lo(&self) -> usize {
        self.u.min(self.v)
    }

    pub fn hi(&self) -> usize {
        self.u.max(self.v)
    }

    pub fn other(&self, w: usize) -> usize {
        if w == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Undirected capacitated graph. Immutable after construction.
///
/// The constructor only requires structurally valid input (ids in range, no
/// self-loops, positive finite capacities). The declared range `[1, W]` is
/// enforced at the text-format boundary, since internal auxiliary instances
/// legitimately carry capacities outside it.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, usize)>>, // (edge id, other endpoint)
    w_declared: f64,
    total_capacity: f64,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>, w_declared: f64) -> Result<Graph> {
        let mut es = Vec::with_capacity(edges.len());
        let mut adj = vec![Vec::new(); n];
        let mut total = 0.0;
        for (id, (u, v, c)) in edges.into_iter().enumerate() {
            if u >= n {
                return Err(GraphError::VertexOutOfRange(u, n));
            }
            if v >= n {
                return Err(GraphError::VertexOutOfRange(v, n));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !(c.is_finite() && c > 0.0) {
                return Err(GraphError::BadCapacity(c, id));
            }
            adj[u].push((id, v));
            adj[v].push((id, u));
            total += c;
            es.push(Edge { u, v, capacity: c });
        }
        Ok(Graph {
            n,
            edges: es,
            adj,
            w_declared,
            total_capacity: total,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn w_declared(&self) -> f64 {
        self.w_declared
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn adj(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    pub fn total_capacity(&self) -> f64 {
        self.total_capacity
    }

    /// Scale-aware absolute tolerance used by every conservation and
    /// decomposition check on this graph.
    pub fn conservation_tolerance(&self) -> f64 {
        1e-9 * (1.0 + self.total_capacity)
    }

    pub fn degree(&self, v: usize) -> f64 {
        self.adj[v].iter().map(|&(e, _)| self.edges[e].capacity).sum()
    }

    pub fn degree_vector(&self) -> Vec<f64> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    pub fn capacities_within_declared_range(&self) -> bool {
        self.edges
            .iter()
            .all(|e| e.capacity >= 1.0 && e.capacity <= self.w_declared)
    }

    /// Total capacity of edges with exactly one endpoint in `c`.
    pub fn boundary_capacity(&self, c: &VertexSet) -> Result<f64> {
        let mask = c.mask(self.n)?;
        Ok(self
            .edges
            .iter()
            .filter(|e| mask[e.u] != mask[e.v])
            .map(|e| e.capacity)
            .sum())
    }

    pub fn boundary_edges(&self, c: &VertexSet) -> Result<EdgeSet> {
        let mask = c.mask(self.n)?;
        let mut bits = vec![false; self.m()];
        for (id, e) in self.edges.iter().enumerate() {
            if mask[e.u] != mask[e.v] {
                bits[id] = true;
            }
        }
        Ok(EdgeSet { bits })
    }

    /// Total capacity of edges of `f` incident to `v`.
    pub fn restricted_degree(&self, f: &EdgeSet, v: usize) -> Result<f64> {
        if v >= self.n {
            return Err(GraphError::VertexOutOfRange(v, self.n));
        }
        f.check(self.m())?;
        Ok(self.adj[v]
            .iter()
            .filter(|&&(e, _)| f.contains(e))
            .map(|&(e, _)| self.edges[e].capacity)
            .sum())
    }

    /// Inter-cluster edges of a partition.
    pub fn partition_boundary(&self, p: &Partition) -> Result<EdgeSet> {
        p.check_against(self.n)?;
        let mut bits = vec![false; self.m()];
        for (id, e) in self.edges.iter().enumerate() {
            if p.cluster_of(e.u) != p.cluster_of(e.v) {
                bits[id] = true;
            }
        }
        Ok(EdgeSet { bits })
    }

    /// Subgraph induced by `a`, with id mappings in both directions.
    pub fn induced_subgraph(&self, a: &VertexSet) -> Result<Subgraph> {
        if a.is_empty() {
            return Err(GraphError::EmptySet);
        }
        let mask = a.mask(self.n)?;
        let vertex_map: Vec<usize> = a.iter().collect();
        let mut local = vec![usize::MAX; self.n];
        for (i, &v) in vertex_map.iter().enumerate() {
            local[v] = i;
        }
        let mut edges = Vec::new();
        let mut edge_map = Vec::new();
        for (id, e) in self.edges.iter().enumerate() {
            if mask[e.u] && mask[e.v] {
                edges.push((local[e.u], local[e.v], e.capacity));
                edge_map.push(id);
            }
        }
        let graph = Graph::new(vertex_map.len(), edges, self.w_declared)?;
        Ok(Subgraph {
            graph,
            vertex_map,
            local_index: local,
            edge_map,
        })
    }

    pub fn connected_components(&self) -> Vec<VertexSet> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            let mut stack = vec![s];
            let mut comp = Vec::new();
            seen[s] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(_, w) in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(VertexSet::from_sorted(comp));
        }
        out
    }

    /// Stable FNV-1a fingerprint of the graph structure, used to pair
    /// serialized artifacts with the graph they were built from.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_usize(self.n);
        h.write_usize(self.m());
        h.write_u64(self.w_declared.to_bits());
        for e in &self.edges {
            h.write_usize(e.u);
            h.write_usize(e.v);
            h.write_u64(e.capacity.to_bits());
        }
        h.finish()
    }

    /// Text format: `p <n> <m> <W>` followed by one `e <u> <v> <cap>` line
    /// per edge.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "p {} {} {}\n",
            self.n,
            self.m(),
            fmt_cap(self.w_declared)
        ));
        for e in &self.edges {
            out.push_str(&format!("e {} {} {}\n", e.u, e.v, fmt_cap(e.capacity)));
        }
        out
    }

    /// Strict parser for the text format. Unknown or malformed lines are
    /// errors; capacities must lie in the declared `[1, W]` range.
    pub fn from_text(text: &str) -> Result<Graph> {
        let mut lines = text.lines().enumerate();
        let (ln, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty input"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "p" {
            return Err(parse_err(ln + 1, "expected `p <n> <m> <W>`"));
        }
        let n: usize = toks[1]
            .parse()
            .map_err(|_| parse_err(ln + 1, "bad vertex count"))?;
        let m: usize = toks[2]
            .parse()
            .map_err(|_| parse_err(ln + 1, "bad edge count"))?;
        let w: f64 = toks[3]
            .parse()
            .map_err(|_| parse_err(ln + 1, "bad capacity bound"))?;
        if !(w.is_finite() && w >= 1.0) {
            return Err(parse_err(ln + 1, "capacity bound must be at least 1"));
        }
        let mut edges = Vec::with_capacity(m);
        for (ln, line) in lines {
            if line.is_empty() && edges.len() == m {
                continue; // tolerate trailing blank line
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 || toks[0] != "e" {
                return Err(parse_err(ln + 1, "expected `e <u> <v> <cap>`"));
            }
            let u: usize = toks[1]
                .parse()
                .map_err(|_| parse_err(ln + 1, "bad endpoint"))?;
            let v: usize = toks[2]
                .parse()
                .map_err(|_| parse_err(ln + 1, "bad endpoint"))?;
            let c: f64 = toks[3]
                .parse()
                .map_err(|_| parse_err(ln + 1, "bad capacity"))?;
            if !(c.is_finite() && c >= 1.0 && c <= w) {
                return Err(parse_err(
                    ln + 1,
                    &format!("capacity {c} outside declared range [1, {w}]"),
                ));
            }
            edges.push((u, v, c));
        }
        if edges.len() != m {
            return Err(parse_err(
                0,
                &format!("edge count mismatch: header says {m}, found {}", edges.len()),
            ));
        }
        Graph::new(n, edges, w)
    }
}

fn parse_err(line: usize, msg: &str) -> GraphError {
    GraphError::Parse {
        line,
        msg: msg.to_string(),
    }
}

/// Format a capacity so that integral values print without a fraction.
pub(crate) fn fmt_cap(c: f64) -> String {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format!("{c}")
    }
}

/// Sorted, deduplicated set of vertex identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VertexSet {
    members: Vec<usize>,
}

impl VertexSet {
    pub fn new(mut members: Vec<usize>) -> VertexSet {
        members.sort_unstable();
        members.dedup();
        VertexSet { members }
    }

    pub fn from_sorted(members: Vec<usize>) -> VertexSet {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        VertexSet { members }
    }

    pub fn singleton(v: usize) -> VertexSet {
        VertexSet { members: vec![v] }
    }

    pub fn full(n: usize) -> VertexSet {
        VertexSet {
            members: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn mask(&self, n: usize) -> Result<Vec<bool>> {
        let mut mask = vec![false; n];
        for &v in &self.members {
            if v >= n {
                return Err(GraphError::VertexOutOfRange(v, n));
            }
            mask[v] = true;
        }
        Ok(mask)
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut m = self.members.clone();
        m.extend_from_slice(&other.members);
        VertexSet::new(m)
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        let members = self
            .members
            .iter()
            .copied()
            .filter(|&v| other.contains(v))
            .collect();
        VertexSet::from_sorted(members)
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        let members = self
            .members
            .iter()
            .copied()
            .filter(|&v| !other.contains(v))
            .collect();
        VertexSet::from_sorted(members)
    }

    pub fn is_subset_of(&self, other: &VertexSet) -> bool {
        self.members.iter().all(|&v| other.contains(v))
    }

    pub fn is_disjoint_from(&self, other: &VertexSet) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.members.iter().all(|&v| !large.contains(v))
    }
}

/// Set of edge identifiers, stored as a bitmask over `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    bits: Vec<bool>,
}

impl EdgeSet {
    pub fn empty(m: usize) -> EdgeSet {
        EdgeSet {
            bits: vec![false; m],
        }
    }

    pub fn from_ids(m: usize, ids: &[usize]) -> Result<EdgeSet> {
        let mut bits = vec![false; m];
        for &e in ids {
            if e >= m {
                return Err(GraphError::EdgeOutOfRange(e, m));
            }
            bits[e] = true;
        }
        Ok(EdgeSet { bits })
    }

    pub fn full(m: usize) -> EdgeSet {
        EdgeSet {
            bits: vec![true; m],
        }
    }

    pub fn contains(&self, e: usize) -> bool {
        self.bits.get(e).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn ids(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a || b)
            .collect();
        EdgeSet { bits }
    }

    pub fn insert(&mut self, e: usize) {
        self.bits[e] = true;
    }

    fn check(&self, m: usize) -> Result<()> {
        if self.bits.len() != m {
            return Err(GraphError::LengthMismatch {
                expected: m,
                got: self.bits.len(),
            });
        }
        Ok(())
    }

    /// Per-vertex capacity of this edge set: `deg_F(v)` for every `v`.
    pub fn degree_vector(&self, g: &Graph) -> Vec<f64> {
        let mut deg = vec![0.0; g.n()];
        for (id, e) in g.edges().iter().enumerate() {
            if self.contains(id) {
                deg[e.u] += e.capacity;
                deg[e.v] += e.capacity;
            }
        }
        deg
    }
}

/// Partition of `0..n` into disjoint clusters. Canonical form sorts clusters
/// by their minimum member, so equal partitions compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    clusters: Vec<VertexSet>,
    assignment: Vec<usize>, // vertex -> cluster index
}

impl Partition {
    pub fn new(n: usize, mut clusters: Vec<VertexSet>) -> Result<Partition> {
        clusters.retain(|c| !c.is_empty());
        clusters.sort_by_key(|c| c.members().first().copied().unwrap_or(usize::MAX));
        let mut assignment = vec![usize::MAX; n];
        let mut covered = 0usize;
        for (i, c) in clusters.iter().enumerate() {
            for v in c.iter() {
                if v >= n || assignment[v] != usize::MAX {
                    return Err(GraphError::NotAPartition);
                }
                assignment[v] = i;
                covered += 1;
            }
        }
        if covered != n {
            return Err(GraphError::NotAPartition);
        }
        Ok(Partition {
            clusters,
            assignment,
        })
    }

    pub fn singletons(n: usize) -> Partition {
        let clusters = (0..n).map(VertexSet::singleton).collect();
        Partition {
            clusters,
            assignment: (0..n).collect(),
        }
    }

    pub fn whole(n: usize) -> Partition {
        Partition {
            clusters: vec![VertexSet::full(n)],
            assignment: vec![0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn clusters(&self) -> &[VertexSet] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    pub fn is_singletons(&self) -> bool {
        self.clusters.iter().all(|c| c.len() == 1)
    }

    fn check_against(&self, n: usize) -> Result<()> {
        if self.assignment.len() != n {
            return Err(GraphError::LengthMismatch {
                expected: n,
                got: self.assignment.len(),
            });
        }
        Ok(())
    }

    /// Total boundary capacity `δ𝒫`.
    pub fn boundary_capacity(&self, g: &Graph) -> Result<f64> {
        let b = g.partition_boundary(self)?;
        Ok(b.ids().iter().map(|&e| g.edge(e).capacity).sum())
    }
}

/// Nonnegative per-vertex budget, in capacity units.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexWeighting {
    values: Vec<f64>,
}

impl VertexWeighting {
    pub fn new(values: Vec<f64>) -> Result<VertexWeighting> {
        if values.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(GraphError::BadCapacity(f64::NAN, 0));
        }
        Ok(VertexWeighting { values })
    }

    pub fn zeros(n: usize) -> VertexWeighting {
        VertexWeighting {
            values: vec![0.0; n],
        }
    }

    pub fn from_vec_unchecked(values: Vec<f64>) -> VertexWeighting {
        VertexWeighting { values }
    }

    pub fn get(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn set(&mut self, v: usize, x: f64) {
        self.values[v] = x;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn total_on(&self, s: &VertexSet) -> f64 {
        s.iter().map(|v| self.values[v]).sum()
    }

    pub fn scaled(&self, k: f64) -> VertexWeighting {
        VertexWeighting {
            values: self.values.iter().map(|&x| x * k).collect(),
        }
    }

    /// Restriction `w|_S`: zero outside `s`.
    pub fn restricted_to(&self, s: &VertexSet) -> VertexWeighting {
        let mut out = vec![0.0; self.values.len()];
        for v in s.iter() {
            out[v] = self.values[v];
        }
        VertexWeighting { values: out }
    }

    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(v, &x)| (x > 0.0).then_some(v))
            .collect()
    }
}

/// Per-vertex reals summing to zero. `get(v)` is the net flow vertex `v`
/// must receive: positive entries are requirements, negative are supplies.
#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    values: Vec<f64>,
}

impl Demand {
    pub fn new(values: Vec<f64>, tolerance: f64) -> Result<Demand> {
        let sum: f64 = values.iter().sum();
        if sum.abs() > tolerance {
            return Err(GraphError::UnbalancedDemand(sum, tolerance));
        }
        Ok(Demand { values })
    }

    pub fn zeros(n: usize) -> Demand {
        Demand {
            values: vec![0.0; n],
        }
    }

    pub fn from_vec_unchecked(values: Vec<f64>) -> Demand {
        Demand { values }
    }

    pub fn get(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_on(&self, s: &VertexSet) -> f64 {
        s.iter().map(|v| self.values[v]).sum()
    }

    pub fn abs_total(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).sum()
    }
}

/// Induced subgraph plus the id mappings needed to round-trip vertices,
/// edges and flows between the two id spaces.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub graph: Graph,
    /// local vertex id -> original vertex id
    pub vertex_map: Vec<usize>,
    /// original vertex id -> local id, `usize::MAX` when absent
    pub local_index: Vec<usize>,
    /// local edge id -> original edge id
    pub edge_map: Vec<usize>,
}

impl Subgraph {
    pub fn to_original_vertex(&self, local: usize) -> usize {
        self.vertex_map[local]
    }

    pub fn to_local_vertex(&self, original: usize) -> Option<usize> {
        match self.local_index.get(original) {
            Some(&i) if i != usize::MAX => Some(i),
            _ => None,
        }
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Fnv {
        Fnv(0xcbf29ce484222325)
    }

    fn write_u64(&mut self, x: u64) {
        for b in x.to_le_bytes() {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    fn write_usize(&mut self, x: usize) {
        self.write_u64(x as u64);
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// δ_{G[A]} S: capacity of edges inside `a` with exactly one endpoint in
/// `s`.
pub fn boundary_capacity_within(g: &Graph, a: &VertexSet, s: &VertexSet) -> Result<f64> {
    let a_mask = a.mask(g.n())?;
    let s_mask = s.mask(g.n())?;
    Ok(g.edges()
        .iter()
        .filter(|e| a_mask[e.u] && a_mask[e.v] && s_mask[e.u] != s_mask[e.v])
        .map(|e| e.capacity)
        .sum())
}

/// Capacitated degree over the marked edges (partition boundary plus the
/// boundary of `a`), restricted to `a`. This is the working weighting of
/// the game and trimming layers.
pub fn restricted_boundary_weighting(
    g: &Graph,
    p: &Partition,
    a: &VertexSet,
) -> Result<VertexWeighting> {
    let marked = g.partition_boundary(p)?.union(&g.boundary_edges(a)?);
    let deg = marked.degree_vector(g);
    let mut values = vec![0.0; g.n()];
    for v in a.iter() {
        values[v] = deg[v];
    }
    Ok(VertexWeighting::from_vec_unchecked(values))
}

/// The common refinement of a list of partitions: all nonempty intersections
/// of one cluster from each input.
pub fn common_refinement(parts: &[&Partition]) -> Result<Partition> {
    let first = parts.first().ok_or(GraphError::NotAPartition)?;
    let n = first.n();
    for p in parts {
        p.check_against(n)?;
    }
    let mut keys: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for v in 0..n {
        let key: Vec<usize> = parts.iter().map(|p| p.cluster_of(v)).collect();
        keys.entry(key).or_default().push(v);
    }
    let clusters = keys
        .into_values()
        .map(VertexSet::new)
        .collect::<Vec<_>>();
    Partition::new(n, clusters)
}
