//! Skeleton-motion data augmentation.
//!
//! * [`numcore`]: arrays, reverse-mode autodiff, layers, Adam, checkpoints
//! * [`data`]: dataset loaders, Savitzky–Golay smoothing, padding, splits
//! * [`augment`]: classical transform-based augmentation
//! * [`gan`]: the teacher-forced GRU CycleGAN and synthetic sampling
//! * [`recognition`]: LSTM/CNN recognizers and their training schedule
//! * [`metrics`]: affinity, diversity, seed statistics
//! * [`search`]: grid search over classical policies
//! * [`viz`]: PCA and exact t-SNE

pub mod augment;
pub mod data;
pub mod error;
pub mod gan;
pub mod metrics;
pub mod numcore;
pub mod recognition;
pub mod search;
pub mod viz;

pub use error::{Error, Result};
