//! The queryable artifact: the union of the common refinements of the
//! hierarchy levels, stored as a laminar forest over a vertex permutation
//! so that every stored set is a contiguous leaf range.
//!
//! The congestion-estimation query maxes |b(C)|/δC over the family in one
//! bottom-up pass. Sets with zero boundary capacity act as feasibility
//! gates instead of entering the max.

use std::fmt;

use thiserror::Error;

use crate::graph::{common_refinement, Demand, Graph, GraphError, Partition, VertexSet};
use crate::partition::Hierarchy;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("hierarchy corrupt: {0}")]
    HierarchyCorrupt(String),
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, ApproxError>;

const MAGIC: &[u8; 4] = b"CGA\x01";
const FORMAT_VERSION: u16 = 1;

/// One stored set of the family: the leaves in `lo..hi` of the leaf
/// permutation, tagged with the highest hierarchy level it appears at and
/// its cached boundary capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestNode {
    pub level: u32,
    /// Index of the parent node, `u32::MAX` for roots. Parents always
    /// precede children in the node array.
    pub parent: u32,
    pub lo: u32,
    pub hi: u32,
    pub delta: f64,
}

impl ForestNode {
    pub fn parent_index(&self) -> Option<usize> {
        (self.parent != u32::MAX).then_some(self.parent as usize)
    }
}

/// Laminar family with cached boundary capacities and quality metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LaminarApproximator {
    n: usize,
    /// DFS pre-order: parents before children.
    nodes: Vec<ForestNode>,
    /// Leaf permutation: position -> vertex.
    leaf_order: Vec<u32>,
    /// Levels in the source hierarchy.
    levels: u32,
    /// Σ_i Σ_{C ∈ refinement level i} |C| (counted with multiplicity).
    k_total: u64,
    pub alpha: f64,
    pub beta: f64,
    /// 5 L² α β
    pub quality_bound: f64,
    /// Conservation tolerance inherited from the source graph.
    pub tolerance: f64,
    pub graph_fingerprint: u64,
}

/// Result of restricting the family to a subset: the nonempty intersections
/// plus the three reserved terminal singletons of an auxiliary instance.
#[derive(Debug, Clone)]
pub struct RestrictedCollection {
    pub sets: Vec<VertexSet>,
    /// Markers for the auxiliary terminals {x}, {s}, {t}; always present.
    pub terminal_markers: [char; 3],
}

impl LaminarApproximator {
    /// Assemble the family from hierarchy levels. Refinement levels are
    /// computed top-down; a set unchanged across consecutive refinements is
    /// stored once at its highest level.
    pub fn assemble(g: &Graph, h: &Hierarchy) -> Result<LaminarApproximator> {
        Self::from_levels(g, &h.levels, h.alpha, h.beta)
    }

    pub fn from_levels(
        g: &Graph,
        levels: &[Partition],
        alpha: f64,
        beta: f64,
    ) -> Result<LaminarApproximator> {
        let n = g.n();
        let l = levels.len();
        if l == 0 {
            return Err(ApproxError::HierarchyCorrupt("no levels".into()));
        }
        if !levels[0].is_singletons() {
            return Err(ApproxError::HierarchyCorrupt(
                "bottom level is not the singleton partition".into(),
            ));
        }
        // Common refinements R_{≥i}, built from the top down.
        let mut refinements: Vec<Partition> = vec![levels[l - 1].clone()];
        for i in (0..l - 1).rev() {
            let prev = refinements.last().unwrap();
            refinements.push(common_refinement(&[&levels[i], prev])?);
        }
        refinements.reverse(); // refinements[i] = R_{≥ i+1}
        let k_total: u64 = (l as u64) * (n as u64);

        // Build nodes top-down, deduplicating sets that survive unchanged
        // into lower refinement levels.
        struct Building {
            level: u32,
            parent: u32,
            members: Vec<usize>,
        }
        let mut building: Vec<Building> = Vec::new();
        let mut owner = vec![u32::MAX; n]; // vertex -> deepest stored node
        for c in refinements[l - 1].clusters() {
            let id = building.len() as u32;
            building.push(Building {
                level: l as u32,
                parent: u32::MAX,
                members: c.iter().collect(),
            });
            for v in c.iter() {
                owner[v] = id;
            }
        }
        for i in (0..l.saturating_sub(1)).rev() {
            for c in refinements[i].clusters() {
                let first = c.members()[0];
                let parent = owner[first];
                for v in c.iter() {
                    if owner[v] != parent {
                        return Err(ApproxError::HierarchyCorrupt(format!(
                            "level {} does not refine the level above it",
                            i + 1
                        )));
                    }
                }
                if building[parent as usize].members.len() == c.len() {
                    // Same set one level down; keep the copy at the higher
                    // level.
                    continue;
                }
                let id = building.len() as u32;
                building.push(Building {
                    level: (i + 1) as u32,
                    parent,
                    members: c.iter().collect(),
                });
                for v in c.iter() {
                    owner[v] = id;
                }
            }
        }

        // DFS over the containment forest for the leaf permutation and the
        // pre-order node array.
        let mut children: Vec<Vec<u32>> = vec![Vec::new(); building.len()];
        let mut roots: Vec<u32> = Vec::new();
        for (id, b) in building.iter().enumerate() {
            if b.parent == u32::MAX {
                roots.push(id as u32);
            } else {
                children[b.parent as usize].push(id as u32);
            }
        }
        let min_member = |id: u32| building[id as usize].members.iter().min().copied().unwrap();
        roots.sort_by_key(|&id| min_member(id));
        for ch in children.iter_mut() {
            ch.sort_by_key(|&id| min_member(id));
        }

        let mut nodes: Vec<ForestNode> = Vec::with_capacity(building.len());
        let mut leaf_order: Vec<u32> = Vec::with_capacity(n);
        let mut new_id = vec![u32::MAX; building.len()];
        // Explicit stack DFS assigning contiguous ranges.
        enum Step {
            Enter(u32, u32), // (old id, new parent)
            Exit(usize),     // new id to close
        }
        let mut stack: Vec<Step> = roots.iter().rev().map(|&r| Step::Enter(r, u32::MAX)).collect();
        while let Some(step) = stack.pop() {
            match step {
                Step::Enter(old, parent) => {
                    let nid = nodes.len();
                    new_id[old as usize] = nid as u32;
                    nodes.push(ForestNode {
                        level: building[old as usize].level,
                        parent,
                        lo: leaf_order.len() as u32,
                        hi: 0,
                        delta: 0.0,
                    });
                    stack.push(Step::Exit(nid));
                    if children[old as usize].is_empty() {
                        // Leaf: by construction a singleton set.
                        for &v in &building[old as usize].members {
                            leaf_order.push(v as u32);
                        }
                    } else {
                        for &c in children[old as usize].iter().rev() {
                            stack.push(Step::Enter(c, nid as u32));
                        }
                    }
                }
                Step::Exit(nid) => {
                    nodes[nid].hi = leaf_order.len() as u32;
                }
            }
        }

        // Boundary capacities via one scan per edge over position ranges.
        let mut pos_of = vec![0u32; n];
        for (pos, &v) in leaf_order.iter().enumerate() {
            pos_of[v as usize] = pos as u32;
        }
        for node in nodes.iter_mut() {
            node.delta = 0.0;
        }
        for e in g.edges() {
            let (pu, pv) = (pos_of[e.u], pos_of[e.v]);
            // Walk up from the leaf containing u; add capacity to every
            // node containing exactly one endpoint.
            for (p_in, p_out) in [(pu, pv), (pv, pu)] {
                // Find the deepest node whose range contains p_in, then
                // climb.
                let mut id = Self::leaf_node_at(&nodes, p_in);
                while let Some(i) = id {
                    let nd = &nodes[i];
                    let contains_other = nd.lo <= p_out && p_out < nd.hi;
                    if contains_other {
                        break;
                    }
                    nodes[i].delta += e.capacity;
                    id = nodes[i].parent_index();
                }
            }
        }

        let levels_u = l as u32;
        let qual = 5.0 * (l as f64) * (l as f64) * alpha * beta;
        Ok(LaminarApproximator {
            n,
            nodes,
            leaf_order,
            levels: levels_u,
            k_total,
            alpha,
            beta,
            quality_bound: qual,
            tolerance: g.conservation_tolerance(),
            graph_fingerprint: g.fingerprint(),
        })
    }

    fn leaf_node_at(nodes: &[ForestNode], pos: u32) -> Option<usize> {
        // Deepest node whose range is exactly the leaf position; ranges are
        // nested, so scan from the last node covering pos. Nodes are in
        // pre-order: the deepest covering node is the last one with
        // lo <= pos < hi.
        let mut found = None;
        for (i, nd) in nodes.iter().enumerate() {
            if nd.lo <= pos && pos < nd.hi {
                found = Some(i);
            }
            if nd.lo > pos {
                break;
            }
        }
        found
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[ForestNode] {
        &self.nodes
    }

    pub fn levels(&self) -> usize {
        self.levels as usize
    }

    pub fn k_total(&self) -> u64 {
        self.k_total
    }

    /// Members of a stored node, via its leaf range.
    pub fn node_set(&self, i: usize) -> VertexSet {
        let nd = &self.nodes[i];
        VertexSet::new(
            self.leaf_order[nd.lo as usize..nd.hi as usize]
                .iter()
                .map(|&v| v as usize)
                .collect(),
        )
    }

    /// max over stored sets of |b(C)|/δC. Sets with δC = 0 must carry no
    /// demand; otherwise the estimate is +∞.
    pub fn estimate_congestion(&self, b: &Demand) -> f64 {
        self.estimate_with_stats(b).0
    }

    /// The estimate together with the number of value visits performed
    /// (leaf reads plus one aggregation per stored node).
    pub fn estimate_with_stats(&self, b: &Demand) -> (f64, usize) {
        let mut sums = vec![0.0f64; self.nodes.len()];
        let mut visits = 0usize;
        // Children precede parents in reverse pre-order.
        for i in (0..self.nodes.len()).rev() {
            let nd = &self.nodes[i];
            let leaf = !self
                .nodes
                .get(i + 1)
                .is_some_and(|next| next.parent == i as u32);
            if leaf {
                for pos in nd.lo..nd.hi {
                    sums[i] += b.get(self.leaf_order[pos as usize] as usize);
                    visits += 1;
                }
            }
            if let Some(p) = nd.parent_index() {
                sums[p] += sums[i];
            }
            visits += 1;
        }
        let mut best = 0.0f64;
        for (i, nd) in self.nodes.iter().enumerate() {
            let total = sums[i].abs();
            if nd.delta > 0.0 {
                best = best.max(total / nd.delta);
            } else if total > self.tolerance {
                return (f64::INFINITY, visits);
            }
        }
        (best, visits)
    }

    /// All nonempty intersections of stored sets with `a`, preserving
    /// laminarity, plus the reserved terminal markers.
    pub fn restrict_to(&self, a: &VertexSet) -> RestrictedCollection {
        let mut seen = std::collections::HashSet::new();
        let mut sets = Vec::new();
        for i in 0..self.nodes.len() {
            let inter = self.node_set(i).intersection(a);
            if !inter.is_empty() && seen.insert(inter.members().to_vec()) {
                sets.push(inter);
            }
        }
        RestrictedCollection {
            sets,
            terminal_markers: ['x', 's', 't'],
        }
    }

    /// Versioned little-endian binary encoding. Layout:
    /// magic "CGA\x01", version u16, then u64 fields n, levels, K,
    /// node count, graph fingerprint, f64 fields alpha, beta, quality,
    /// tolerance; then the leaf permutation as n u32 values; then per node
    /// level u32, parent u32, lo u32, hi u32, delta f64.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for x in [
            self.n as u64,
            self.levels as u64,
            self.k_total,
            self.nodes.len() as u64,
            self.graph_fingerprint,
        ] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for x in [self.alpha, self.beta, self.quality_bound, self.tolerance] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for &v in &self.leaf_order {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for nd in &self.nodes {
            out.extend_from_slice(&nd.level.to_le_bytes());
            out.extend_from_slice(&nd.parent.to_le_bytes());
            out.extend_from_slice(&nd.lo.to_le_bytes());
            out.extend_from_slice(&nd.hi.to_le_bytes());
            out.extend_from_slice(&nd.delta.to_le_bytes());
        }
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<LaminarApproximator> {
        let mut r = Reader { bytes, offset: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(r.err("bad magic"));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(r.err(&format!("unsupported version {version}")));
        }
        let n = r.u64()? as usize;
        let levels = r.u64()? as u32;
        let k_total = r.u64()?;
        let node_count = r.u64()? as usize;
        let graph_fingerprint = r.u64()?;
        let alpha = r.f64()?;
        let beta = r.f64()?;
        let quality_bound = r.f64()?;
        let tolerance = r.f64()?;
        let mut leaf_order = Vec::with_capacity(n);
        for _ in 0..n {
            let v = r.u32()?;
            if v as usize >= n {
                return Err(r.err("leaf id out of range"));
            }
            leaf_order.push(v);
        }
        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            let level = r.u32()?;
            let parent = r.u32()?;
            let lo = r.u32()?;
            let hi = r.u32()?;
            let delta = r.f64()?;
            if lo > hi || hi as usize > n {
                return Err(r.err("node range out of bounds"));
            }
            nodes.push(ForestNode {
                level,
                parent,
                lo,
                hi,
                delta,
            });
        }
        if r.offset != bytes.len() {
            return Err(r.err("trailing bytes"));
        }
        Ok(LaminarApproximator {
            n,
            nodes,
            leaf_order,
            levels,
            k_total,
            alpha,
            beta,
            quality_bound,
            tolerance,
            graph_fingerprint,
        })
    }

    /// Exhaustive pairwise laminarity scan: every two stored sets are
    /// nested or disjoint.
    pub fn check_laminar(&self) -> bool {
        for i in 0..self.nodes.len() {
            for j in i + 1..self.nodes.len() {
                let (a, b) = (&self.nodes[i], &self.nodes[j]);
                let nested = (a.lo <= b.lo && b.hi <= a.hi) || (b.lo <= a.lo && a.hi <= b.hi);
                let disjoint = a.hi <= b.lo || b.hi <= a.lo;
                if !(nested || disjoint) {
                    return false;
                }
            }
        }
        true
    }
}

impl fmt::Display for LaminarApproximator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "laminar family: n={} nodes={} levels={} K={} quality={}",
            self.n,
            self.nodes.len(),
            self.levels,
            self.k_total,
            self.quality_bound
        )
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: &str) -> ApproxError {
        ApproxError::Parse {
            offset: self.offset,
            msg: msg.to_string(),
        }
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.offset + k > self.bytes.len() {
            return Err(self.err("unexpected end of input"));
        }
        let s = &self.bytes[self.offset..self.offset + k];
        self.offset += k;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_le_bytes(
            self.take(8)?.try_into().unwrap(),
        )))
    }
}
