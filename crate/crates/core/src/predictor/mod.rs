//! Multimodal trajectory predictor: graph-gated recurrent encoder, temporal
//! attention, control decoder with EKF covariance propagation, mixture NLL
//! training with hand-written gradients.

mod cell;
mod decoder;
mod features;
mod hyper;
mod io;
mod linalg;
mod mixture;
mod model;
mod synth;
mod train;

pub use cell::{cell_step, encode, encode_backward, EncoderCache, GraphCellParams};
pub use decoder::{attend, attend_scores, ekf_propagate, DecoderParams};
pub use features::{
    build_sample, extract_windows, features_of, Churn, FeatureVector, HistoryStep, LocalFrame, Sample, D_IN,
};
pub use hyper::PredictorHyper;
pub use io::{load_model, save_model, ModelManifest, TensorEntry, FORMAT_VERSION};
pub use linalg::{is_symmetric_psd, symmetric_eigenvalues, Mat4};
pub use mixture::{metrics, nll_loss, Metrics, MixturePrediction, Mode, COV_JITTER};
pub use model::{decode, Model, INIT_SCALE};
pub use synth::{synthetic_corpus, track_specs, TrackSpec, TRACK_SPACING};
pub use train::{
    finite_difference_check, gradient_check, mean_loss, relative_error, train, train_with, GradCheck,
    REL_ERROR_FLOOR,
};
