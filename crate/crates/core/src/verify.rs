//! Independent oracles and samplers backing every guarantee the
//! construction claims: exact optimal congestion (brute force and max-flow
//! search), empirical quality measurement, feasibility checks for the
//! level-flow property, and a mixing sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::approx::LaminarApproximator;
use crate::faircut::exact_max_flow;
use crate::graph::{Demand, Graph, GraphError, Partition, VertexSet};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("brute-force oracle limited to 16 vertices, got {0}")]
    TooLarge(usize),
}

pub type Result<T> = std::result::Result<T, VerifyError>;

/// Exact optimal congestion by enumerating all proper cuts: the optimum for
/// a single demand vector equals max over cuts of |b(S)|/δS. Infeasible
/// demands (imbalance across a zero-capacity cut) report +∞.
pub fn opt_congestion_bruteforce(g: &Graph, b: &Demand) -> Result<f64> {
    let n = g.n();
    if n > 16 {
        return Err(VerifyError::TooLarge(n));
    }
    if n <= 1 {
        return Ok(0.0);
    }
    let tol = g.conservation_tolerance();
    let mut best = 0.0f64;
    // Fix vertex 0 on the complement side; each unordered cut appears once.
    for mask in 1u32..(1 << (n - 1)) {
        let mut demand = 0.0;
        for v in 1..n {
            if (mask >> (v - 1)) & 1 == 1 {
                demand += b.get(v);
            }
        }
        let mut delta = 0.0;
        for e in g.edges() {
            let us = e.u > 0 && (mask >> (e.u - 1)) & 1 == 1;
            let vs = e.v > 0 && (mask >> (e.v - 1)) & 1 == 1;
            if us != vs {
                delta += e.capacity;
            }
        }
        if delta > 0.0 {
            best = best.max(demand.abs() / delta);
        } else if demand.abs() > tol {
            return Ok(f64::INFINITY);
        }
    }
    Ok(best)
}

/// Can demand `b` be routed at congestion `lambda`? One exact max-flow on
/// the super-source/super-sink network with edges scaled by `lambda`.
pub fn routable_at(g: &Graph, b: &[f64], lambda: f64) -> bool {
    let n = g.n();
    let sigma = n;
    let tau = n + 1;
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(g.m() + n);
    let mut total_supply = 0.0;
    if lambda > 0.0 {
        for e in g.edges() {
            edges.push((e.u, e.v, e.capacity * lambda));
        }
    }
    for (v, &x) in b.iter().enumerate() {
        if x < 0.0 {
            edges.push((sigma, v, -x));
            total_supply += -x;
        } else if x > 0.0 {
            edges.push((v, tau, x));
        }
    }
    if total_supply == 0.0 {
        return true;
    }
    let Ok(net) = Graph::new(n + 2, edges, g.w_declared()) else {
        return false;
    };
    let Ok((_, _, value)) = exact_max_flow(&net, sigma, tau) else {
        return false;
    };
    // Slack relative to the supply itself: the coarse graph-wide tolerance
    // would blur the bisection for small demands.
    value >= total_supply - 1e-11 * (1.0 + total_supply)
}

/// Minimal congestion routing `b`, found by bisection over feasibility
/// max-flows, to relative tolerance `tol`. Demands that are unbalanced
/// within some connected component are infeasible and report +∞.
pub fn opt_congestion_maxflow(g: &Graph, b: &Demand, tol: f64) -> f64 {
    let tau_cons = g.conservation_tolerance();
    if b.abs_total() <= tau_cons {
        return 0.0;
    }
    for comp in g.connected_components() {
        if b.total_on(&comp).abs() > tau_cons {
            return f64::INFINITY;
        }
    }
    let mut hi = 1.0f64;
    let mut grow = 0;
    while !routable_at(g, b.values(), hi) {
        hi *= 4.0;
        grow += 1;
        if grow > 60 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..60 {
        if hi - lo <= tol * hi.max(1.0) {
            break;
        }
        let mid = (lo + hi) / 2.0;
        if routable_at(g, b.values(), mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandSampler {
    /// ±s on a random vertex pair inside one component, scaled to degrees.
    DegreePairs,
    /// Saturate a random stored cluster: b(C) = δC.
    ClusterSaturating,
    /// Saturate the stored cluster with the weakest boundary.
    Bottleneck,
    /// Cycle through the three samplers.
    Mixed,
}

/// Draw one demand. Returns `None` when the instance offers nothing to
/// sample (no positive-degree pair, no proper cluster).
pub fn sample_demand(
    g: &Graph,
    approx: &LaminarApproximator,
    sampler: DemandSampler,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Demand> {
    let concrete = match sampler {
        DemandSampler::Mixed => match index % 3 {
            0 => DemandSampler::DegreePairs,
            1 => DemandSampler::ClusterSaturating,
            _ => DemandSampler::Bottleneck,
        },
        s => s,
    };
    match concrete {
        DemandSampler::DegreePairs => {
            let comps: Vec<VertexSet> = g
                .connected_components()
                .into_iter()
                .filter(|c| c.len() >= 2)
                .collect();
            if comps.is_empty() {
                return None;
            }
            let comp = &comps[rng.gen_range(0..comps.len())];
            let members: Vec<usize> = comp.iter().collect();
            let u = members[rng.gen_range(0..members.len())];
            let mut v = members[rng.gen_range(0..members.len())];
            while v == u {
                v = members[rng.gen_range(0..members.len())];
            }
            let s = rng.gen_range(0.1..=1.0) * g.degree(u).min(g.degree(v));
            if s <= 0.0 {
                return None;
            }
            let mut b = vec![0.0; g.n()];
            b[u] = -s;
            b[v] = s;
            Some(Demand::from_vec_unchecked(b))
        }
        DemandSampler::ClusterSaturating | DemandSampler::Bottleneck => {
            let comp_of = component_index(g);
            let mut candidates: Vec<(usize, f64)> = Vec::new();
            for i in 0..approx.node_count() {
                let nd = approx.nodes()[i];
                if nd.delta > 0.0 {
                    candidates.push((i, nd.delta));
                }
            }
            if candidates.is_empty() {
                return None;
            }
            let pick = match concrete {
                DemandSampler::Bottleneck => {
                    candidates
                        .iter()
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .unwrap()
                        .0
                }
                _ => candidates[rng.gen_range(0..candidates.len())].0,
            };
            let cluster = approx.node_set(pick);
            let delta = approx.nodes()[pick].delta;
            let comp = comp_of[cluster.members()[0]];
            let outside: Vec<usize> = (0..g.n())
                .filter(|&v| comp_of[v] == comp && !cluster.contains(v))
                .collect();
            if outside.is_empty() {
                return None;
            }
            let mut b = vec![0.0; g.n()];
            let inside_deg: f64 = cluster.iter().map(|v| g.degree(v)).sum();
            for v in cluster.iter() {
                b[v] = delta * g.degree(v) / inside_deg.max(1e-300);
            }
            let outside_deg: f64 = outside.iter().map(|&v| g.degree(v)).sum();
            for &v in &outside {
                b[v] = -delta * g.degree(v) / outside_deg.max(1e-300);
            }
            Some(Demand::from_vec_unchecked(b))
        }
        DemandSampler::Mixed => unreachable!(),
    }
}

fn component_index(g: &Graph) -> Vec<usize> {
    let mut idx = vec![usize::MAX; g.n()];
    for (i, comp) in g.connected_components().into_iter().enumerate() {
        for v in comp.iter() {
            idx[v] = i;
        }
    }
    idx
}

#[derive(Debug, Clone)]
pub struct QualityRow {
    pub id: usize,
    pub estimate: f64,
    pub opt: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct QualityReport {
    pub rows: Vec<QualityRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

impl QualityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,estimate,opt,ratio\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.id, r.estimate, r.opt, r.ratio));
        }
        out
    }
}

/// Sample demands, compare the family's estimate against the exact optimal
/// congestion, and report the ratio spread. The estimate must stay a lower
/// bound (ratio ≥ 1 − 10⁻⁶) and within the quality bound from above.
/// Samples are independent and evaluated in parallel, each on its own
/// seeded stream.
pub fn empirical_quality(
    g: &Graph,
    approx: &LaminarApproximator,
    sampler: DemandSampler,
    count: usize,
    seed: u64,
    opt_tol: f64,
) -> QualityReport {
    let rows: Vec<QualityRow> = (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
            let b = sample_demand(g, approx, sampler, i, &mut rng)?;
            let estimate = approx.estimate_congestion(&b);
            let opt = opt_congestion_maxflow(g, &b, opt_tol);
            let ratio = if estimate.is_infinite() && opt.is_infinite() {
                1.0
            } else if estimate > 0.0 {
                opt / estimate
            } else if opt <= g.conservation_tolerance() {
                1.0
            } else {
                f64::INFINITY
            };
            Some(QualityRow {
                id: i,
                estimate,
                opt,
                ratio,
            })
        })
        .collect();
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let bound = approx.quality_bound;
    let pass = !rows.is_empty() && max_ratio <= bound && min_ratio >= 1.0 - 1e-6;
    QualityReport {
        rows,
        max_ratio,
        min_ratio,
        bound,
        pass,
    }
}

/// Feasibility of the level-flow contract between two consecutive levels at
/// congestion `beta`: every vertex sends its new boundary degree, receives
/// at most half its old one.
pub fn check_property3(g: &Graph, p_cur: &Partition, p_next: &Partition, beta: f64) -> bool {
    let n = g.n();
    let Ok(bp) = g.partition_boundary(p_cur) else {
        return false;
    };
    let Ok(bn) = g.partition_boundary(p_next) else {
        return false;
    };
    let deg_prev = bp.degree_vector(g);
    let deg_next = bn.degree_vector(g);
    let sigma = n;
    let tau = n + 1;
    let mut edges: Vec<(usize, usize, f64)> = g
        .edges()
        .iter()
        .map(|e| (e.u, e.v, e.capacity * beta))
        .collect();
    let mut total = 0.0;
    for v in 0..n {
        if deg_next[v] > 0.0 {
            edges.push((sigma, v, deg_next[v]));
            total += deg_next[v];
        }
        if deg_prev[v] > 0.0 {
            edges.push((v, tau, deg_prev[v] / 2.0));
        }
    }
    if total <= g.conservation_tolerance() {
        return true;
    }
    let Ok(net) = Graph::new(n + 2, edges, g.w_declared()) else {
        return false;
    };
    let Ok((_, _, value)) = exact_max_flow(&net, sigma, tau) else {
        return false;
    };
    value >= total - g.conservation_tolerance()
}

/// Necessary-condition sampler for simultaneous mixing: draw per-cluster
/// demands bounded by the cluster weightings, sum them, and test
/// routability at congestion `alpha`. All samples must pass.
pub fn check_mixing_sampled(
    g: &Graph,
    p_cur: &Partition,
    p_next: &Partition,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> bool {
    let Ok(bp) = g.partition_boundary(p_cur) else {
        return false;
    };
    (0..samples).into_par_iter().all(|s| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (s as u64).wrapping_mul(0xbf58476d1ce4e5b9));
        let mut b = vec![0.0; g.n()];
        for cluster in p_next.clusters() {
            let Ok(bc) = g.boundary_edges(cluster) else {
                return false;
            };
            // Weighting deg over (∂P_cur ∪ ∂C) restricted to C; edges in
            // both sets count once.
            let w = |v: usize| {
                let mut x = 0.0;
                for &(e, _) in g.adj(v) {
                    if bp.contains(e) || bc.contains(e) {
                        x += g.edge(e).capacity;
                    }
                }
                x
            };
            let mut plus: Vec<usize> = Vec::new();
            let mut minus: Vec<usize> = Vec::new();
            for v in cluster.iter() {
                if rng.gen_bool(0.5) {
                    plus.push(v);
                } else {
                    minus.push(v);
                }
            }
            let pw: f64 = plus.iter().map(|&v| w(v)).sum();
            let mw: f64 = minus.iter().map(|&v| w(v)).sum();
            let m = pw.min(mw);
            if m <= 0.0 {
                continue;
            }
            for &v in &plus {
                b[v] += w(v) * m / pw;
            }
            for &v in &minus {
                b[v] -= w(v) * m / mw;
            }
        }
        routable_at(g, &b, alpha)
    })
}

/// Merge two random clusters at a random mergeable level. Returns the
/// corrupted levels and the (level, cluster, cluster) picked, or None when
/// nothing is mergeable.
pub fn corrupt_hierarchy(
    levels: &[Partition],
    seed: u64,
) -> Option<(Vec<Partition>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eligible: Vec<usize> = (0..levels.len())
        .filter(|&i| levels[i].len() >= 2)
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let li = eligible[rng.gen_range(0..eligible.len())];
    let k = levels[li].len();
    let a = rng.gen_range(0..k);
    let mut b = rng.gen_range(0..k);
    while b == a {
        b = rng.gen_range(0..k);
    }
    let mut clusters: Vec<VertexSet> = levels[li].clusters().to_vec();
    let merged = clusters[a].union(&clusters[b]);
    let (hi, lo) = (a.max(b), a.min(b));
    clusters.remove(hi);
    clusters.remove(lo);
    clusters.push(merged);
    let n = levels[li].n();
    let corrupted = Partition::new(n, clusters).ok()?;
    let mut out = levels.to_vec();
    out[li] = corrupted;
    Some((out, li))
}

/// Structural checks on a hierarchy: singleton bottom, halving boundary
/// capacities, boundary-free top.
pub fn verify_structure(g: &Graph, levels: &[Partition]) -> std::result::Result<(), String> {
    if levels.is_empty() {
        return Err("no levels".into());
    }
    if !levels[0].is_singletons() {
        return Err("bottom level is not the singleton partition".into());
    }
    let tol = g.conservation_tolerance();
    let mut prev = None;
    for (i, p) in levels.iter().enumerate() {
        let delta = p
            .boundary_capacity(g)
            .map_err(|e| format!("level {}: {e}", i + 1))?;
        if let Some(pd) = prev {
            if delta > pd / 2.0 + tol {
                return Err(format!(
                    "level {} boundary {delta} above half of previous {pd}",
                    i + 1
                ));
            }
        }
        prev = Some(delta);
    }
    if prev.unwrap_or(0.0) > tol {
        return Err("top level still has boundary capacity".into());
    }
    Ok(())
}

/// Does the serialized family match what the hierarchy levels produce?
/// Rebuilds the family from the levels and compares structurally.
pub fn approx_matches_levels(
    g: &Graph,
    approx: &LaminarApproximator,
    levels: &[Partition],
) -> bool {
    match LaminarApproximator::from_levels(g, levels, approx.alpha, approx.beta) {
        Ok(rebuilt) => rebuilt == *approx,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{build_hierarchy, BuildConfig};

    fn path_graph(n: usize) -> Graph {
        Graph::new(n, (1..n).map(|v| (v - 1, v, 1.0)).collect(), 1.0).unwrap()
    }

    #[test]
    fn brute_force_basics() {
        let g = Graph::new(2, vec![(0, 1, 2.0)], 2.0).unwrap();
        assert_eq!(
            opt_congestion_bruteforce(&g, &Demand::zeros(2)).unwrap(),
            0.0
        );
        let b = Demand::new(vec![1.0, -1.0], 1e-9).unwrap();
        let got = opt_congestion_bruteforce(&g, &b).unwrap();
        assert!((got - 0.5).abs() < 1e-12);
        let big = Graph::new(17, (1..17).map(|v| (0, v, 1.0)).collect(), 1.0).unwrap();
        assert!(opt_congestion_bruteforce(&big, &Demand::zeros(17)).is_err());
    }

    #[test]
    fn maxflow_search_basics() {
        let g = path_graph(3);
        assert_eq!(opt_congestion_maxflow(&g, &Demand::zeros(3), 1e-6), 0.0);
        let b = Demand::new(vec![-1.0, 0.0, 1.0], 1e-9).unwrap();
        let got = opt_congestion_maxflow(&g, &b, 1e-8);
        assert!((got - 1.0).abs() < 1e-6);
        // Across components: infeasible.
        let g2 = Graph::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)], 1.0).unwrap();
        let b2 = Demand::from_vec_unchecked(vec![-1.0, 0.0, 0.0, 1.0]);
        assert!(opt_congestion_maxflow(&g2, &b2, 1e-6).is_infinite());
    }

    #[test]
    fn cross_oracle_agreement_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..60 {
            let n = rng.gen_range(2..=8);
            let m = rng.gen_range(1..=2 * n);
            let edges: Vec<(usize, usize, f64)> = (0..m)
                .filter_map(|_| {
                    let u = rng.gen_range(0..n);
                    let v = rng.gen_range(0..n);
                    (u != v).then(|| (u, v, rng.gen_range(1..=8) as f64))
                })
                .collect();
            if edges.is_empty() {
                continue;
            }
            let g = Graph::new(n, edges, 8.0).unwrap();
            let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let shift: f64 = b.iter().sum::<f64>() / n as f64;
            for x in b.iter_mut() {
                *x -= shift;
            }
            let d = Demand::from_vec_unchecked(b);
            let brute = opt_congestion_bruteforce(&g, &d).unwrap();
            let search = opt_congestion_maxflow(&g, &d, 1e-9);
            if brute.is_infinite() || search.is_infinite() {
                assert_eq!(brute.is_infinite(), search.is_infinite());
            } else {
                let scale = brute.abs().max(1.0);
                assert!(
                    (brute - search).abs() / scale < 1e-6,
                    "oracles disagree: {brute} vs {search}"
                );
            }
        }
    }

    #[test]
    fn property3_verdicts() {
        let g = path_graph(4);
        // Identical trivial levels: vacuous.
        assert!(check_property3(
            &g,
            &Partition::whole(4),
            &Partition::whole(4),
            1.0
        ));
        // A 4-cycle where the next partition keeps the same boundary and
        // β = 1 cannot absorb into half the budget.
        let c4 = Graph::new(
            4,
            vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)],
            1.0,
        )
        .unwrap();
        let p = Partition::new(
            4,
            vec![VertexSet::new(vec![0, 1]), VertexSet::new(vec![2, 3])],
        )
        .unwrap();
        assert!(!check_property3(&c4, &p, &p, 1.0));
    }

    #[test]
    fn property3_holds_for_real_builds() {
        let g = path_graph(9);
        let h = build_hierarchy(&g, &BuildConfig::default()).unwrap();
        for (i, cert) in h.transitions.iter().enumerate() {
            assert!(check_property3(
                &g,
                &h.levels[i],
                &h.levels[i + 1],
                cert.beta.max(1.0)
            ));
        }
    }

    #[test]
    fn mixing_sampler_trivial_cases() {
        let g = path_graph(6);
        // Huge α passes whenever balance holds.
        assert!(check_mixing_sampled(
            &g,
            &Partition::singletons(6),
            &Partition::whole(6),
            1e9,
            20,
            7
        ));
    }

    #[test]
    fn quality_report_on_trivial_family() {
        let g = path_graph(6);
        let levels = vec![Partition::singletons(6), Partition::whole(6)];
        let ap = LaminarApproximator::from_levels(&g, &levels, 10.0, 1.0).unwrap();
        let rep = empirical_quality(&g, &ap, DemandSampler::Mixed, 30, 5, 1e-9);
        assert!(!rep.rows.is_empty());
        assert!(rep.min_ratio >= 1.0 - 1e-6, "estimate exceeded optimum");
        let csv = rep.to_csv();
        assert!(csv.starts_with("id,estimate,opt,ratio\n"));
        assert_eq!(csv.lines().count(), rep.rows.len() + 1);
    }

    #[test]
    fn corrupt_changes_structure() {
        let g = path_graph(6);
        let h = build_hierarchy(&g, &BuildConfig::default()).unwrap();
        let (bad, li) = corrupt_hierarchy(&h.levels, 3).unwrap();
        assert!(bad[li].len() < h.levels[li].len());
    }

    #[test]
    fn structure_checks() {
        let g = path_graph(4);
        let h = build_hierarchy(&g, &BuildConfig::default()).unwrap();
        assert!(verify_structure(&g, &h.levels).is_ok());
        // Violations: non-singleton bottom.
        let bad = vec![Partition::whole(4)];
        assert!(verify_structure(&g, &bad).is_err());
    }

    #[test]
    fn approx_consistency_detects_mismatch() {
        let g = path_graph(6);
        let h = build_hierarchy(&g, &BuildConfig::default()).unwrap();
        let ap = LaminarApproximator::assemble(&g, &h).unwrap();
        assert!(approx_matches_levels(&g, &ap, &h.levels));
        if let Some((bad, _)) = corrupt_hierarchy(&h.levels, 9) {
            // Either the rebuild differs or the corrupted levels no longer
            // form a valid refinement chain.
            assert!(!approx_matches_levels(&g, &ap, &bad) || bad == h.levels);
        }
    }
}
