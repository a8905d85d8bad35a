//! Cluster expansion of the hard-core partition function.

mod enumerate;
mod series;
mod ursell;

pub use enumerate::{
    connected_sets, connected_sets_containing, enumerate_clusters, for_each_surjective_word,
    Cluster, SetEnumerator,
};
pub use series::{
    e_pairs, in_cluster_regime, log_z_coefficients, pair_cluster_mass, truncated_log_ratio,
    truncated_log_z, PairClusterMass, TruncatedSeries,
};
pub use ursell::{
    connected_signed_sum, connected_signed_sum_by_subsets, penrose_bound_check,
    spanning_tree_count, ursell, IncompatibilityGraph, UrsellCache,
};
