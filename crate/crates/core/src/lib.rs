//! Channel-level editing of pooled convolutional feature maps.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical piece
//! of the pipeline: per-channel kurtosis statistics, intra/inter-class
//! variance profiles and the per-class edit masks built from them, linear
//! SVM and box-regression heads, and PASCAL-style detection evaluation.
//! File formats, orchestration and the command line live in the `featedit`
//! crate.

#![no_std]

extern crate alloc;

pub mod boxes;
pub mod detect;
pub mod edit;
pub mod error;
pub mod feature;
mod linalg;
pub mod oracle;
pub mod pca;
pub mod regress;
pub mod stats;
pub mod svm;
pub mod synth;
mod twofold;

pub use boxes::BBox;
pub use detect::{
    average_precision, evaluate, iou, nms, ApMode, EvalConfig, EvalReport, GroundTruth, PrCurve,
};
pub use edit::{
    apply_mask, build_mask, build_masks, drop_distribution, edit_dataset, edit_for_classifier, merge_datasets,
    random_edit, variance_profile, DropReason, EditConfig, EditMask, NegativeEdit,
    VarianceProfile,
};
pub use error::{Error, Result};
pub use feature::{Dataset, DetectionRecord, FeatureMap, LabeledSample};
pub use pca::{pca_project, Matrix, PcaResult};
pub use regress::{apply_transform, box_targets, train_regressor, BoxRegressor};
pub use stats::{
    central_window, channel_kurtosis, kurtosis, mask_expectation, rank_channel_activations,
    shannon_entropy, stats_matrix, ChannelStatsMatrix, ProbabilityVector,
};
pub use svm::{
    accuracy, predict_class, score, svm_objective, train_svm, train_svm_vectors, LinearModel,
    SvmConfig,
};
pub use synth::{generate, SynthData, SynthSpec};

/// Seeded generator used everywhere a seed appears in a config.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's seeded generator from a plain integer seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
