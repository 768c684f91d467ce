//! Construction of congestion-approximators for capacitated undirected
//! graphs by bottom-up hierarchical partitioning.
//!
//! The pipeline: a cut-matching game finds sparse cuts or certifies mixing,
//! a trimming pass turns sparse cuts into well-bounded cluster boundaries,
//! a recursive partitioner stacks these into a hierarchy of partitions with
//! halving boundary capacity, and the union of common refinements of the
//! hierarchy becomes a laminar family answering congestion-estimation
//! queries. A verifier backs every claimed guarantee with exact flow
//! oracles at small scale.

pub mod approx;
pub mod cutmatch;
pub mod faircut;
pub mod flow;
pub mod graph;
pub mod partition;
pub mod trimming;
pub mod verify;

pub use approx::LaminarApproximator;
pub use faircut::{build_auxiliary, exact_max_flow, fair_cut, validate_fair_pair};
pub use partition::{build_hierarchy, BuildConfig, Hierarchy};
pub use flow::{path_decompose, route_check, trim_paths, EdgeFlow, PathDecomposition};
pub use graph::{common_refinement, Demand, EdgeSet, Graph, Partition, VertexSet, VertexWeighting};
