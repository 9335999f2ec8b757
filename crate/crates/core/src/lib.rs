//! Untrained message passing for link prediction.
//!
//! Parameter-free propagation operators on undirected graphs, inner-product
//! link scoring, classical path heuristics with exact oracles, a linear
//! scoring head and a transductive evaluation harness.

pub mod classifier;
pub mod error;
pub mod experiment;
pub mod features;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod paths;
pub mod propagation;
pub mod scalar;
pub mod seed;
pub mod split;
pub mod verify;

pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentResult, Method};
pub use graph::{parse_edge_list, parse_edge_str, Edge, Graph};
pub use metrics::roc_auc;
pub use propagation::Variant;
pub use scalar::Scalar;
pub use split::{sample_negatives, split_edges, EdgeSplit};

pub type Features = features::FeatureMatrix<f64>;
pub type Features32 = features::FeatureMatrix<f32>;
pub type Operator = propagation::PropagationOperator<f64>;
pub type Operator32 = propagation::PropagationOperator<f32>;
pub type Head = classifier::LinearHead<f64>;
pub type Head32 = classifier::LinearHead<f32>;
