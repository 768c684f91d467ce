//! Edge flows, path decompositions, and the conservation checks used as
//! certificates throughout the construction.

use thiserror::Error;

use crate::graph::{Demand, Graph, VertexWeighting};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("flow vector length {got} does not match edge count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("path quota at vertex {vertex} exceeds available capacity: need {need}, have {have}")]
    QuotaExceedsAvailable {
        vertex: usize,
        need: f64,
        have: f64,
    },
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// Signed per-edge flow. Positive values run from the lower-indexed endpoint
/// to the higher-indexed one.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFlow {
    values: Vec<f64>,
}

impl EdgeFlow {
    pub fn zero(m: usize) -> EdgeFlow {
        EdgeFlow {
            values: vec![0.0; m],
        }
    }

    pub fn from_values(values: Vec<f64>) -> EdgeFlow {
        EdgeFlow { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, e: usize) -> f64 {
        self.values[e]
    }

    pub fn set(&mut self, e: usize, x: f64) {
        self.values[e] = x;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Add `k * other` into this flow.
    pub fn add_scaled(&mut self, other: &EdgeFlow, k: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += k * b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in self.values.iter_mut() {
            *a *= k;
        }
    }

    /// Send `amount` from `from` along edge `e` (signs handled internally).
    pub fn push(&mut self, g: &Graph, e: usize, from: usize, amount: f64) {
        if g.edge(e).lo() == from {
            self.values[e] += amount;
        } else {
            self.values[e] -= amount;
        }
    }

    /// max_e |f(e)| / c(e)
    pub fn congestion(&self, g: &Graph) -> f64 {
        self.values
            .iter()
            .zip(g.edges())
            .map(|(f, e)| f.abs() / e.capacity)
            .fold(0.0, f64::max)
    }

    /// Per-vertex net inflow: the demand this flow routes.
    pub fn net_inflow(&self, g: &Graph) -> Vec<f64> {
        let mut b = vec![0.0; g.n()];
        for (id, e) in g.edges().iter().enumerate() {
            let f = self.values[id];
            b[e.hi()] += f;
            b[e.lo()] -= f;
        }
        b
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// One directed capacitated path. `edges[i]` joins `verts[i]` and
/// `verts[i+1]`; keeping edge ids makes re-accumulation unambiguous in the
/// presence of parallel edges.
#[derive(Debug, Clone)]
pub struct FlowPath {
    pub verts: Vec<usize>,
    pub edges: Vec<usize>,
    pub capacity: f64,
}

impl FlowPath {
    pub fn start(&self) -> usize {
        self.verts[0]
    }

    pub fn end(&self) -> usize {
        *self.verts.last().unwrap()
    }
}

#[derive(Debug, Clone, Default)]
pub struct PathDecomposition {
    pub paths: Vec<FlowPath>,
}

impl PathDecomposition {
    pub fn empty() -> PathDecomposition {
        PathDecomposition { paths: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Re-accumulate the paths into an edge flow.
    pub fn to_edge_flow(&self, g: &Graph) -> EdgeFlow {
        let mut f = EdgeFlow::zero(g.m());
        for p in &self.paths {
            for (i, &e) in p.edges.iter().enumerate() {
                f.push(g, e, p.verts[i], p.capacity);
            }
        }
        f
    }

    /// Total capacity of paths starting at each vertex.
    pub fn start_totals(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for p in &self.paths {
            out[p.start()] += p.capacity;
        }
        out
    }

    /// Total capacity of paths ending at each vertex.
    pub fn end_totals(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for p in &self.paths {
            out[p.end()] += p.capacity;
        }
        out
    }

    pub fn scale(&mut self, k: f64) {
        for p in &mut self.paths {
            p.capacity *= k;
        }
    }
}

/// Does `f` route demand `b`? Returns the verdict together with the flow's
/// congestion, which is reported regardless of the verdict.
pub fn route_check(g: &Graph, f: &EdgeFlow, b: &Demand) -> (bool, f64) {
    let congestion = f.congestion(g);
    if f.len() != g.m() || b.len() != g.n() {
        return (false, congestion);
    }
    let tol = g.conservation_tolerance();
    let inflow = f.net_inflow(g);
    let ok = inflow
        .iter()
        .zip(b.values())
        .all(|(got, want)| (got - want).abs() <= tol);
    (ok, congestion)
}

/// Decompose `f` into source-to-sink paths, silently canceling cycle flow.
/// At most `m` paths are produced; re-accumulating them reproduces the
/// cycle-canceled flow edgewise.
pub fn path_decompose(g: &Graph, f: &EdgeFlow) -> PathDecomposition {
    let eps = 1e-13 * (1.0 + f.max_abs());
    // Residual arcs in the direction the flow actually runs.
    let mut residual: Vec<f64> = f.values().iter().map(|x| x.abs()).collect();
    let arc_from = |e: usize| {
        if f.get(e) >= 0.0 {
            g.edge(e).lo()
        } else {
            g.edge(e).hi()
        }
    };
    let mut out_arcs: Vec<Vec<usize>> = vec![Vec::new(); g.n()];
    for e in 0..g.m() {
        if residual[e] > eps {
            out_arcs[arc_from(e)].push(e);
        }
    }
    let mut cursor = vec![0usize; g.n()];
    // Positive entries are remaining source output, negative remaining sink
    // intake.
    let mut imbalance: Vec<f64> = f.net_inflow(g).iter().map(|x| -x).collect();

    let mut paths = Vec::new();
    for s in 0..g.n() {
        while imbalance[s] > eps {
            // Walk forward until a vertex that still needs inflow, canceling
            // any cycle the walk closes.
            let mut verts = vec![s];
            let mut edges: Vec<usize> = Vec::new();
            let mut pos = vec![usize::MAX; 0];
            pos.resize(g.n(), usize::MAX);
            pos[s] = 0;
            let mut cur = s;
            let sink;
            loop {
                if cur != s && imbalance[cur] < -eps {
                    sink = Some(cur);
                    break;
                }
                // Advance past exhausted arcs.
                let mut next_edge = None;
                while cursor[cur] < out_arcs[cur].len() {
                    let e = out_arcs[cur][cursor[cur]];
                    if residual[e] > eps {
                        next_edge = Some(e);
                        break;
                    }
                    cursor[cur] += 1;
                }
                let Some(e) = next_edge else {
                    // Dead end: float noise left a source with no outgoing
                    // residual. Treat as a sink for the remainder.
                    sink = None;
                    break;
                };
                let nxt = g.edge(e).other(arc_from(e));
                if pos[nxt] != usize::MAX {
                    // Cycle closed: cancel it along its minimum arc.
                    let start = pos[nxt];
                    let mut bottleneck = f64::INFINITY;
                    for &ce in &edges[start..] {
                        bottleneck = bottleneck.min(residual[ce]);
                    }
                    bottleneck = bottleneck.min(residual[e]);
                    for &ce in &edges[start..] {
                        residual[ce] -= bottleneck;
                    }
                    residual[e] -= bottleneck;
                    for &v in &verts[start + 1..] {
                        pos[v] = usize::MAX;
                    }
                    verts.truncate(start + 1);
                    edges.truncate(start);
                    cur = nxt;
                    continue;
                }
                pos[nxt] = verts.len();
                verts.push(nxt);
                edges.push(e);
                cur = nxt;
            }
            if edges.is_empty() {
                // Nothing routable from s; drop the residual imbalance.
                imbalance[s] = 0.0;
                break;
            }
            let mut bottleneck = imbalance[s];
            for &e in &edges {
                bottleneck = bottleneck.min(residual[e]);
            }
            if let Some(t) = sink {
                bottleneck = bottleneck.min(-imbalance[t]);
            }
            if bottleneck <= eps {
                imbalance[s] = 0.0;
                break;
            }
            for &e in &edges {
                residual[e] -= bottleneck;
            }
            imbalance[s] -= bottleneck;
            let end = *verts.last().unwrap();
            imbalance[end] += bottleneck;
            paths.push(FlowPath {
                verts,
                edges,
                capacity: bottleneck,
            });
        }
    }
    PathDecomposition { paths }
}

/// Shrink or drop paths until each vertex starts exactly `quota(v)` total
/// capacity. Paths are never rerouted. `tol` absorbs solver noise: a deficit
/// up to `tol` is filled by whatever is available.
pub fn trim_paths(
    pd: &PathDecomposition,
    quota: &VertexWeighting,
    tol: f64,
) -> Result<PathDecomposition> {
    let n = quota.len();
    let have = pd.start_totals(n);
    for v in 0..n {
        if quota.get(v) > have[v] + tol {
            return Err(FlowError::QuotaExceedsAvailable {
                vertex: v,
                need: quota.get(v),
                have: have[v],
            });
        }
    }
    let mut remaining: Vec<f64> = (0..n).map(|v| quota.get(v).min(have[v])).collect();
    let mut out = Vec::new();
    for p in &pd.paths {
        let keep = p.capacity.min(remaining[p.start()]);
        if keep > 0.0 {
            remaining[p.start()] -= keep;
            let mut q = p.clone();
            q.capacity = keep;
            out.push(q);
        }
    }
    Ok(PathDecomposition { paths: out })
}
