//! Shared transformer blocks powering the conditioned generator and the
//! bidirectional masked model used for feature extraction.

pub mod config;
pub mod corruption;
pub mod model;
pub mod params;
pub mod sampling;
pub mod train;

pub use config::TransformerConfig;
pub use corruption::{mlm_corrupt, CorruptedSequence, MLM_MASK_FRAC, MLM_RANDOM_FRAC, MLM_RATE};
pub use model::{
    ar_loss, ar_targets, embed_and_condition, extract_feature_from_sequence,
    extract_feature_vector, hidden_batch, logits_batch, token_accuracy, ConditioningInput,
    FeatureError, PropStats, SequenceInput, TapedBlock, TapedParams,
};
pub use params::{BlockParams, TransformerKind, TransformerParams};
pub use sampling::{sample_from_logits, sample_sequence, SampleOutcome};
pub use train::{train_ar, train_mlm, EpochRecord, LmTrainConfig};
