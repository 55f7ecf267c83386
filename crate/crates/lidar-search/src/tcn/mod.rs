//! Map-free per-beam scan classifier.
//!
//! Three temporal-convolutional encoders (scan, label, pose) consume a
//! k-step history buffer and produce one logit per beam; a sign threshold
//! yields map (+1) / non-map (-1) labels. Training is supervised on
//! map-based ground truth with bit-flip label corruption; inference is
//! auto-regressive on the model's own past predictions.

mod dataset;
mod infer;
mod model;
mod train;

pub use dataset::{generate_dataset, load_dataset, save_dataset, Dataset, DatasetTuple};
pub use infer::{accuracy, classify_threshold, ewa_labels, HistoryBuffer};
pub use model::{circular_conv_rows, ForwardTrace, TcnInput, TcnMeta, TcnModel};
pub use train::{evaluate_on_dataset, train, EpochStats, TrainConfig, TrainOutput};
