//! Regression trees, bootstrap forests, and iterative forest imputation.

mod ensemble;
mod missforest;
mod tree;

pub use ensemble::{fit_forest, Forest, ForestConfig};
pub use missforest::{missforest_impute, ImputeTrace, MissForestConfig, StopReason};
pub use tree::{best_split_on, fit_tree, Node, RegressionTree, SplitChoice, TreeConfig};
