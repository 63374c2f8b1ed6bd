//! Online dual averaging with graph-structured sparsity.

pub mod datagen;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod online;
pub mod pcst;
pub mod projection;
mod union_find;

pub use error::{Error, Result};
pub use graph::{
    build_grid_graph, build_toy_graph, enumerate_model_supports, is_in_wgm, restrict, support_of,
    DenseVector, Edge, Graph, Support, WgmConfig,
};
pub use pcst::{brute_force_pcst, pcst_objective, solve_pcst, Forest, PcstInstance, PcstSolver};
pub use projection::{
    exact_top_s, hard_threshold, head_project, model_project, tail_project, HeadLowerBound,
    ProjectionConfig, Projector,
};
pub use online::{
    run_stream, HyperParams, Learner, LearnerKind, LossKind, Sample, Trajectory,
};
pub use datagen::{benchmark_dataset, BenchmarkSpec, Dataset, WStarStrategy};
pub use harness::{ExperimentConfig, Grid, ResultRow};
