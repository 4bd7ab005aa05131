//! Binary grayscale image classification with three from-scratch models —
//! a shallow sigmoid network, a deep maxout network, and a hybrid that
//! trains the deep network on per-class fuzzy C-means cluster labels —
//! evaluated under deterministic K-fold cross-validation with a full
//! confusion-matrix / ROC-AUC report.

pub mod dataset;
pub mod error;
pub mod fcm;
pub mod metrics;
pub mod network;
pub mod partition;
pub mod pipeline;
pub mod preprocess;
pub mod seeds;

pub use error::{Error, Result};
