//! Graph combinatorics of the time-dependent perturbation expansion:
//! interaction histories, momentum graphs, spanning-tree momentum
//! resolution, the cluster scheme, classification, time-simplex identities
//! and the leading-graph sum.

pub mod classify;
pub mod cluster;
pub mod dump;
pub mod enumerate;
pub mod expansion;
pub mod leading;
pub mod momentum;
pub mod simplex;

pub use classify::{classify, classify_spec, count_leading, CountScope, GraphClass, GraphKind, LeadingCount};
pub use cluster::ClusterScheme;
pub use enumerate::{
    enumerate_histories, enumerate_interlacings, enumerate_partitions, ClusterPartition, InteractionHistory,
    Interlacing,
};
pub use momentum::{GraphSpec, Lin, MomentumGraph, Phase, ResolvedGraph};
pub use leading::{eval_leading_sum, LeadingSum};
