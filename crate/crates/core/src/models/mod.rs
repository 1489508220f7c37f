//! The stroke-quality classifier, the motion autoencoder, their training
//! loops and the persisted model bundle.

mod autoencoder;
mod bundle;
mod classifier;
mod train;

pub use autoencoder::{reconstruction_rmse, train_autoencoder, Autoencoder, AutoencoderHp, LatentCode};
pub use bundle::{load_bundle, save_bundle, ModelBundle, BUNDLE_MAGIC, BUNDLE_TRAILER, BUNDLE_VERSION};
pub use classifier::{argmax, train_classifier, Classifier, ClassifierArch, ClassifierHp, MajorityBaseline};
pub use train::{TrainHp, TrainTrace};
