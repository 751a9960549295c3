//! Logical-location regression: geometric cell features, a cascade of
//! attention regressors, the training objectives and inference rounding.

mod config;
mod embed;
mod featurize;
mod losses;
mod model;
mod train;

pub use config::{Ablation, InterVariant, LrSchedule, ModelConfig};
pub use embed::positional_embedding_2d;
pub use featurize::{CellFeatures, Featurizer, GEO_FEATURES};
pub use losses::{
    adjacent_pairs_of, build_adjacent_pairs, loss_intra, loss_inter, loss_log, loss_total, AdjacentPairs, LossParts,
    LossToggles,
};
pub use model::{
    locations_tensor, round_to_logical, CascadeRegressor, Forward, LogicalPrediction, StackRegressor,
    REGRESSOR_COMPONENT,
};
pub use train::{evaluate, fit, samples_from, train, AccuracyReport, EpochLog, Sample, TrainConfig, TrainOutcome};
