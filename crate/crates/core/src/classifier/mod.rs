//! Classifier-based quality `Q_N`: minutiae-derived features, the
//! match/non-match separation target and a small regression network whose
//! output is binned into five levels.

mod features;
mod minutiae;
mod net;
mod separation;

pub use features::{build_feature_vector, FeatureVector, FEATURE_LEN, MINUTIA_QUALITY_THRESHOLDS};
pub use minutiae::{
    binarize, crossing_number, detect_minutiae, extract_minutiae_lite, thin, BinaryImage, Minutia, MinutiaKind,
    BORDER_MARGIN, MIN_SPUR_LENGTH,
};
pub use net::{level_for, predict_quality, quintile_edges, train_quality_net, QualityNet, TrainConfig, MODEL_MAGIC};
pub use separation::{target_separation, ScoreSet};
