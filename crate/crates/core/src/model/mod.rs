//! Windowing, normalization, GRU training / inference and the frame metrics.

mod metrics;
mod normalize;
mod predict;
mod train;
mod window;

pub use metrics::{
    accuracy, dynamic_gesture_accuracy, extended_window, gesture_accuracy, gesture_segment, MetricsReport,
};
pub use normalize::{MinMaxStats, NormStats, STD_FLOOR};
pub use predict::GruModel;
pub use train::{
    temporal_split, train_baseline, train_network, EpochStats, NoHooks, TrainConfig, TrainHistory, TrainHooks,
};
pub use window::{window_dataset, window_many, WindowedDataset};
