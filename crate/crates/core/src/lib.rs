//! Counterfactual motion guidance: a small reverse-mode autodiff engine,
//! motion datasets, a stroke-quality classifier and motion autoencoder,
//! latent-space and nearest-neighbour counterfactual search, the
//! evaluation metrics, and end-to-end experiment pipelines.

pub mod cfengine;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod ndiff;

pub use cfengine::{batch_explain, latent_cf, nn_cf, CFParams, CFResult, Distance, Method};
pub use dataset::{Dataset, Frames, MotionSample, MotionSchema, StrokeQuality, StrokeType};
pub use error::{Error, ErrorCategory, Result};
pub use models::{Autoencoder, Classifier, LatentCode, ModelBundle};
