//! The joint imputation / graph-learning / feature-selection model.

mod checkpoint;
mod config;
mod fit;
pub mod graph;
mod objective;
mod select;
mod state;
pub mod updates;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader};
pub use config::{FitConfig, ImputationRule};
pub use fit::{
    apply_stage, check_constraints, fit, fit_from, ConstraintReport, FitFailure, FitTrace, Observer, Stage,
    TraceRow,
};
pub use objective::{
    cluster_laplacian, graph_gram, objective, orthogonality_penalty, reconstruction_error, ObjectiveTerms,
};
pub use select::{rank_by_scores, rank_features, SelectionResult};
pub use state::{
    init_state, knn_graph, row_reweighting, scaled_indicator, spectral_labels, Components, ModelState,
};
