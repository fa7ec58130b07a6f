//! The three-representation fusion model for cardiac ion-channel activity,
//! its training loop and the evaluation-metric suite.

pub mod features;
pub mod fusion;
pub mod gat;
pub mod metrics;
pub mod train;

pub use features::{featurize_graph, peoe_partial_charges, GraphBatch, MolGraph, ATOM_FEATURES};
pub use fusion::{
    fusion_forward, predict, sigmoid, EncoderParams, FusionParams, FusionSample, TaskMode,
    FEAT_INPUT, FP_INPUT,
};
pub use gat::{gat_encode, gat_layer_forward, GatLayerParams, TapedGatLayer};
pub use metrics::{
    evaluate_metrics, pearson, roc_auc, AucError, ConfusionCounts, MetricReport,
};
pub use train::{
    evaluate_on, train_discriminator, y_randomization_test, DiscEpochRecord, DiscSample,
    DiscTrainConfig, TrainError, TrainedDiscriminator, YRandReport, BLOCKER_THRESHOLD,
    CLASS_DECISION,
};
