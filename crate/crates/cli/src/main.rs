//! Command-line surface: generate benchmark graphs, build hierarchies and
//! approximators, verify the construction's guarantees, and emit benchmark
//! CSVs.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 internal invariant violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use conga::approx::LaminarApproximator;
use conga::faircut::{build_auxiliary, fair_cut, validate_fair_pair};
use conga::graph::{Graph, Partition, VertexSet, VertexWeighting};
use conga::partition::{
    build_hierarchy, certificates_to_text, hierarchy_from_text, hierarchy_to_text, BuildConfig,
    PartitionError,
};
use conga::verify::{
    approx_matches_levels, check_mixing_sampled, check_property3, empirical_quality,
    verify_structure, DemandSampler,
};

#[derive(Parser)]
#[command(
    name = "conga",
    about = "Congestion-approximators for capacitated undirected graphs",
    long_about = "Builds a hierarchy of partitions with halving boundary capacity, turns it \
into a laminar congestion-approximator, and verifies the construction against exact flow \
oracles. Logs are controlled by the CONGA_LOG environment variable. All logarithms in \
derived parameters are base 2."
)]
struct Cli {
    /// Number of worker threads for sampled verification (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph file in the text format (`p n m W` + `e u v cap`).
    Gen(GenArgs),
    /// Build the hierarchy and approximator for a graph file.
    Build(BuildArgs),
    /// Run verification suites against a built approximator.
    Verify(VerifyArgs),
    /// Sweep instance families and emit a benchmark CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Gnm,
    Grid,
    TwoCliques,
    Path,
    Star,
    PowerLaw,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Gnm => "gnm",
            Family::Grid => "grid",
            Family::TwoCliques => "two-cliques",
            Family::Path => "path",
            Family::Star => "star",
            Family::PowerLaw => "power-law",
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Graph family.
    #[arg(value_enum)]
    family: Family,
    /// Vertex count (at least 1).
    n: usize,
    /// Edge count for gnm / power-law (default 3n).
    #[arg(long)]
    m: Option<usize>,
    /// Capacities are uniform integers in [1, W].
    #[arg(long, default_value_t = 1)]
    w_max: u64,
    /// Bridge capacity for two-cliques.
    #[arg(long, default_value_t = 1.0)]
    bridge_cap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ConstantArgs {
    /// Multiplier for the round cap T = ceil(c_t log^2(nW)).
    #[arg(long, default_value_t = 1.0)]
    c_t: f64,
    /// Multiplier in phi = 1/(c_phi log^3(nW)), capped at 1/24.
    #[arg(long, default_value_t = 1.0)]
    c_phi: f64,
    /// Multiplier in kappa = c_kappa log^3(nW).
    #[arg(long, default_value_t = 1.0)]
    c_kappa: f64,
    /// Explicit flow-matrix checks inside the game for instances up to this
    /// size (0 disables).
    #[arg(long, default_value_t = 0)]
    dense_cap: usize,
}

#[derive(Args)]
struct BuildArgs {
    /// Input graph file.
    graph: PathBuf,
    /// Output stem; writes <stem>.hier.txt, <stem>.approx.bin,
    /// <stem>.certs.txt (default: the graph path without extension).
    #[arg(long)]
    out_stem: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    constants: ConstantArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Quality,
    Property3,
    MixingSampled,
    FairnessAudit,
    Laminarity,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Quality => "quality",
            Suite::Property3 => "property3",
            Suite::MixingSampled => "mixing-sampled",
            Suite::FairnessAudit => "fairness-audit",
            Suite::Laminarity => "laminarity",
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Input graph file.
    graph: PathBuf,
    /// Approximator file from a build.
    approx: PathBuf,
    /// Hierarchy file (default: derived from the approximator path).
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Suites to run (default: all).
    #[arg(long, value_enum)]
    suite: Vec<Suite>,
    /// Samples per sampled suite.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Relative tolerance of the optimal-congestion search.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the quality CSV here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Families to sweep.
    #[arg(long, value_enum, default_values_t = [Family::Gnm, Family::TwoCliques, Family::Path])]
    family: Vec<Family>,
    /// Comma-separated instance sizes.
    #[arg(long, default_value = "16,32,64")]
    sizes: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-instance build budget in milliseconds; larger instances of a
    /// family are skipped once it is exceeded.
    #[arg(long, default_value_t = 60_000)]
    budget_ms: u64,
    /// Demand samples for the quality column.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[command(flatten)]
    constants: ConstantArgs,
}

enum CliError {
    Usage(String),
    Verification(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Verification(_) => 1,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Verification(m) | CliError::Internal(m) => m,
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn partition_error(e: PartitionError) -> CliError {
    match e {
        PartitionError::Parse { .. } | PartitionError::Graph(_) => CliError::Usage(e.to_string()),
        other => CliError::Internal(other.to_string()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CONGA_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Build(args) => cmd_build(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn generate(family: Family, n: usize, args: &GenArgs) -> Result<Graph, CliError> {
    if n == 0 {
        return Err(CliError::Usage("n must be at least 1".into()));
    }
    let w = args.w_max.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let cap = |rng: &mut ChaCha8Rng| rng.gen_range(1..=w) as f64;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    match family {
        Family::Path => {
            for v in 1..n {
                let c = cap(&mut rng);
                edges.push((v - 1, v, c));
            }
        }
        Family::Star => {
            for v in 1..n {
                let c = cap(&mut rng);
                edges.push((0, v, c));
            }
        }
        Family::Grid => {
            let width = (n as f64).sqrt().ceil() as usize;
            for v in 0..n {
                if (v + 1) % width != 0 && v + 1 < n {
                    let c = cap(&mut rng);
                    edges.push((v, v + 1, c));
                }
                if v + width < n {
                    let c = cap(&mut rng);
                    edges.push((v, v + width, c));
                }
            }
        }
        Family::TwoCliques => {
            if n < 2 {
                return Err(CliError::Usage("two-cliques needs n >= 2".into()));
            }
            let half = n / 2;
            for (base, size) in [(0, half), (half, n - half)] {
                for i in 0..size {
                    for j in i + 1..size {
                        let c = cap(&mut rng);
                        edges.push((base + i, base + j, c));
                    }
                }
            }
            if !(args.bridge_cap >= 1.0 && args.bridge_cap <= w as f64) {
                return Err(CliError::Usage(format!(
                    "bridge capacity {} outside [1, {w}]",
                    args.bridge_cap
                )));
            }
            edges.push((half - 1, half, args.bridge_cap));
        }
        Family::Gnm => {
            let m = args.m.unwrap_or(3 * n);
            let mut placed = 0;
            let mut attempts = 0;
            while placed < m && attempts < 100 * m + 100 {
                attempts += 1;
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u != v {
                    let c = cap(&mut rng);
                    edges.push((u.min(v), u.max(v), c));
                    placed += 1;
                }
            }
        }
        Family::PowerLaw => {
            let m = args.m.unwrap_or(3 * n);
            let weights: Vec<f64> = (0..n).map(|i| 1.0 / ((i + 1) as f64).powf(0.8)).collect();
            let total: f64 = weights.iter().sum();
            let pick = |rng: &mut ChaCha8Rng| {
                let mut x = rng.gen_range(0.0..total);
                for (i, &wt) in weights.iter().enumerate() {
                    if x < wt {
                        return i;
                    }
                    x -= wt;
                }
                n - 1
            };
            let mut placed = 0;
            let mut attempts = 0;
            while placed < m && attempts < 100 * m + 100 {
                attempts += 1;
                let u = pick(&mut rng);
                let v = pick(&mut rng);
                if u != v {
                    let c = cap(&mut rng);
                    edges.push((u.min(v), u.max(v), c));
                    placed += 1;
                }
            }
        }
    }
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    Graph::new(n, edges, w as f64).map_err(usage)
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let g = generate(args.family, args.n, &args)?;
    let text = g.to_text();
    match &args.out {
        Some(path) => fs::write(path, text).map_err(usage)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_graph(path: &Path) -> Result<Graph, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Graph::from_text(&text).map_err(usage)
}

fn cmd_build(args: BuildArgs) -> Result<(), CliError> {
    let g = load_graph(&args.graph)?;
    let stem = args
        .out_stem
        .clone()
        .unwrap_or_else(|| args.graph.with_extension(""));
    let config = BuildConfig {
        c_t: args.constants.c_t,
        c_phi: args.constants.c_phi,
        c_kappa: args.constants.c_kappa,
        seed: args.seed,
        dense_cap: args.constants.dense_cap,
        check_star: true,
    };
    let started = Instant::now();
    let hierarchy = build_hierarchy(&g, &config).map_err(partition_error)?;
    let approx = LaminarApproximator::assemble(&g, &hierarchy)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let build_ms = started.elapsed().as_millis();

    let hier_path = stem.with_extension("hier.txt");
    let approx_path = stem.with_extension("approx.bin");
    let certs_path = stem.with_extension("certs.txt");
    fs::write(&hier_path, hierarchy_to_text(&g, &hierarchy)).map_err(usage)?;
    fs::write(&approx_path, approx.serialize()).map_err(usage)?;
    fs::write(&certs_path, certificates_to_text(&g, &hierarchy)).map_err(usage)?;

    let components = g.connected_components().len();
    let deltas: Vec<String> = hierarchy
        .boundary_capacities(&g)
        .iter()
        .map(|d| format!("{d}"))
        .collect();
    println!(
        "summary n={} m={} w={} components={} L={} K={} deltas={} alpha={} beta={} \
quality_bound={} rounds={} phi={} kappa={} build_ms={}",
        g.n(),
        g.m(),
        g.w_declared(),
        components,
        hierarchy.depth(),
        approx.k_total(),
        deltas.join(","),
        hierarchy.alpha,
        hierarchy.beta,
        approx.quality_bound,
        hierarchy.params.rounds,
        hierarchy.params.phi,
        hierarchy.params.kappa,
        build_ms
    );
    if components > 1 {
        println!("# disconnected input: top level is the per-component partition");
    }
    Ok(())
}

fn default_hierarchy_path(approx: &Path) -> PathBuf {
    let s = approx.to_string_lossy();
    if let Some(stripped) = s.strip_suffix(".approx.bin") {
        PathBuf::from(format!("{stripped}.hier.txt"))
    } else {
        PathBuf::from(format!("{s}.hier.txt"))
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let g = load_graph(&args.graph)?;
    let bytes = fs::read(&args.approx)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.approx.display())))?;
    let approx = LaminarApproximator::deserialize(&bytes).map_err(usage)?;
    let hier_path = args
        .hierarchy
        .clone()
        .unwrap_or_else(|| default_hierarchy_path(&args.approx));
    let hier_text = fs::read_to_string(&hier_path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", hier_path.display())))?;
    let hier = hierarchy_from_text(&hier_text).map_err(usage)?;

    // File consistency gate.
    if approx.n() != g.n() || hier.n != g.n() {
        return Err(CliError::Usage("vertex counts disagree across files".into()));
    }
    if approx.graph_fingerprint != g.fingerprint() || hier.fingerprint != g.fingerprint() {
        return Err(CliError::Usage(
            "fingerprint mismatch: artifacts were built from a different graph".into(),
        ));
    }

    let suites: Vec<Suite> = if args.suite.is_empty() {
        vec![
            Suite::Laminarity,
            Suite::Property3,
            Suite::MixingSampled,
            Suite::Quality,
            Suite::FairnessAudit,
        ]
    } else {
        args.suite.clone()
    };

    let mut failed: Vec<&'static str> = Vec::new();

    // Structural precheck runs before any suite.
    if let Err(msg) = verify_structure(&g, &hier.levels) {
        eprintln!("suite structure: FAIL ({msg})");
        failed.push("structure");
    } else {
        println!("suite structure: ok");
    }

    for suite in suites {
        let ok = match suite {
            Suite::Laminarity => run_laminarity(&g, &approx, &hier.levels),
            Suite::Property3 => run_property3(&g, &hier.levels, hier.beta),
            Suite::MixingSampled => {
                run_mixing(&g, &hier.levels, hier.alpha, args.samples, args.seed)
            }
            Suite::Quality => run_quality(&g, &approx, &args)?,
            Suite::FairnessAudit => run_fairness_audit(&g, args.samples.max(1), args.seed),
        };
        if ok {
            println!("suite {}: ok", suite.name());
        } else {
            eprintln!("suite {}: FAIL", suite.name());
            failed.push(suite.name());
        }
    }

    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "failing suites: {}",
            failed.join(", ")
        )))
    }
}

fn run_laminarity(g: &Graph, approx: &LaminarApproximator, levels: &[Partition]) -> bool {
    if !approx.check_laminar() {
        return false;
    }
    if !approx_matches_levels(g, approx, levels) {
        return false;
    }
    // Aggregation cost stays within one pass over K plus the leaves.
    let (_, visits) = approx.estimate_with_stats(&conga::graph::Demand::zeros(g.n()));
    visits <= approx.k_total() as usize + 2 * g.n()
}

fn run_property3(g: &Graph, levels: &[Partition], beta: f64) -> bool {
    levels
        .windows(2)
        .all(|w| check_property3(g, &w[0], &w[1], beta.max(1.0)))
}

fn run_mixing(g: &Graph, levels: &[Partition], alpha: f64, samples: usize, seed: u64) -> bool {
    levels
        .windows(2)
        .enumerate()
        .all(|(i, w)| check_mixing_sampled(g, &w[0], &w[1], alpha, samples, seed ^ i as u64))
}

fn run_quality(
    g: &Graph,
    approx: &LaminarApproximator,
    args: &VerifyArgs,
) -> Result<bool, CliError> {
    let report = empirical_quality(
        g,
        approx,
        DemandSampler::Mixed,
        args.samples,
        args.seed,
        args.tol,
    );
    let csv = report.to_csv();
    match &args.report {
        Some(path) => fs::write(path, csv).map_err(usage)?,
        None => print!("{csv}"),
    }
    println!(
        "# quality: max_ratio={} min_ratio={} bound={}",
        report.max_ratio, report.min_ratio, report.bound
    );
    Ok(report.pass)
}

fn run_fairness_audit(g: &Graph, samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfa12);
    for _ in 0..samples {
        let members: Vec<usize> = (0..g.n()).filter(|_| rng.gen_bool(0.7)).collect();
        if members.is_empty() {
            continue;
        }
        let a = VertexSet::new(members);
        let mut s_w = VertexWeighting::zeros(g.n());
        let mut t_w = VertexWeighting::zeros(g.n());
        for v in a.iter() {
            if rng.gen_bool(0.5) {
                s_w.set(v, rng.gen_range(0.1..4.0));
            } else {
                t_w.set(v, rng.gen_range(0.1..4.0));
            }
        }
        let gamma = rng.gen_range(0.05..=1.0);
        let eps = rng.gen_range(0.05..=1.0);
        let Ok(inst) = build_auxiliary(g, &Partition::singletons(g.n()), &a, gamma, &s_w, &t_w)
        else {
            return false;
        };
        let Ok(pair) = fair_cut(&inst, eps) else {
            return false;
        };
        if !validate_fair_pair(&inst, &pair, eps) {
            return false;
        }
        let Ok(cut_cap) = inst.h.boundary_capacity(&pair.cut) else {
            return false;
        };
        if (cut_cap - pair.flow_value).abs() > inst.h.conservation_tolerance() {
            return false;
        }
    }
    true
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let sizes: Vec<usize> = args
        .sizes
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| usage("bad size list")))
        .collect::<Result<_, _>>()?;
    println!("family,n,m,L,K,build_ms,query_us,max_ratio,status");
    for &family in &args.family {
        let mut over_budget = false;
        for &n in &sizes {
            if over_budget {
                println!("{},{n},,,,,,,skipped", family.name());
                continue;
            }
            let gen_args = GenArgs {
                family,
                n,
                m: None,
                w_max: 1,
                bridge_cap: 1.0,
                seed: args.seed,
                out: None,
            };
            let g = generate(family, n, &gen_args)?;
            let config = BuildConfig {
                c_t: args.constants.c_t,
                c_phi: args.constants.c_phi,
                c_kappa: args.constants.c_kappa,
                seed: args.seed,
                dense_cap: args.constants.dense_cap,
                check_star: true,
            };
            let started = Instant::now();
            let build = build_hierarchy(&g, &config);
            let build_ms = started.elapsed().as_millis() as u64;
            let hierarchy = match build {
                Ok(h) => h,
                Err(e) => {
                    log::warn!("bench build failed on {} n={n}: {e}", family.name());
                    println!("{},{n},{},,,,,,failed", family.name(), g.m());
                    continue;
                }
            };
            if build_ms > args.budget_ms {
                over_budget = true;
            }
            let approx = LaminarApproximator::assemble(&g, &hierarchy)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            // Query time: mean over repeated estimates of a fixed demand.
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let mut b = vec![0.0; g.n()];
            if g.n() >= 2 {
                let u = rng.gen_range(0..g.n());
                let mut v = rng.gen_range(0..g.n());
                while v == u {
                    v = rng.gen_range(0..g.n());
                }
                b[u] = 1.0;
                b[v] = -1.0;
            }
            let demand = conga::graph::Demand::from_vec_unchecked(b);
            let reps = 200;
            let q0 = Instant::now();
            for _ in 0..reps {
                let _ = approx.estimate_congestion(&demand);
            }
            let query_us = q0.elapsed().as_micros() as f64 / reps as f64;
            let report = empirical_quality(
                &g,
                &approx,
                DemandSampler::Mixed,
                args.samples,
                args.seed,
                1e-6,
            );
            println!(
                "{},{n},{},{},{},{build_ms},{query_us:.2},{},{}",
                family.name(),
                g.m(),
                hierarchy.depth(),
                approx.k_total(),
                report.max_ratio,
                if over_budget { "over-budget" } else { "ok" }
            );
        }
    }
    Ok(())
}
