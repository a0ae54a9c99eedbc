//! Citation-kNN multi-instance classification with rank Hausdorff distances,
//! NSGA-II model search and a stacked kernel combiner.
//!
//! Typical flow: [`load_musk_csv`] → [`normalize_minmax`] → [`evolve`] for a
//! front of CNN configurations → [`build_meta_dataset`] and [`tune_stack`] →
//! [`StackedModel::fit`] → [`predict_bag`].

pub mod cnn;
pub mod data;
pub mod error;
pub mod hausdorff;
pub mod nsga2;
pub mod optimize;
pub mod pareto;
pub mod stacking;
pub mod svm;
pub mod validation;

pub use cnn::{cnn_classify, find_citers, find_references, CnnParams, CnnPrediction, NeighbourCounts};
pub use data::{
    apply_normalization, load_musk_csv, normalize_minmax, parse_musk_csv, Bag, Dataset, FeatureRange, FeatureSubset,
    Instance, Label, Normalization,
};
pub use error::{MilError, Result};
pub use hausdorff::{
    build_distance_matrix, directed_rank_hausdorff, rank_hausdorff, BagDistances, DistanceMatrix, NearestPointTable,
    RankParameter,
};
pub use nsga2::{run_nsga2, Evolution, GaConfig, Individual, SearchSpace};
pub use optimize::{
    evolve, evolve_with, CnnGenome, FitnessMemo, FrontMember, GenomeEvaluator, ParetoFront, SearchOutcome,
};
pub use pareto::{crowding_distance, dominates, fast_nondominated_sort, hypervolume, Objectives};
pub use stacking::{
    build_meta_dataset, build_meta_dataset_with, evaluate_model, meta_dataset_for, predict_bag, stack_loo, train_final,
    tune_stack, tune_stack_with, MetaDataset, MetaFeatures, StackFront, StackSolution, StackedModel,
};
pub use svm::{solve_dual, DualSolution, KernelSvm};
pub use validation::{kfold_validate, loo_validate, validate, Scheme, ValidationReport};
