//! Domain-adversarial training with pluggable normalization, batch active
//! learning on the target domain, and the statistics used to compare runs.
//!
//! Everything runs on a small reverse-mode autodiff tape over `f64`
//! tensors; see [`autodiff`].

pub mod active;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod model;
pub mod norm;
pub mod pool;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use active::{run_active_learning, select_batch, AlConfig, RoundResult, StrategyKind};
pub use data::{gen_shifted_gaussians, load_image_folder, DatasetSplit, Domain, Sample, ShiftSpec};
pub use error::{Error, Result};
pub use model::{build_model, train, LossReport, TrainConfig, TrainMode, UadaModel};
pub use norm::{NormKind, NormMode};
pub use pool::Pool;
pub use stats::{grid_search, mean_per_class_accuracy, students_ttest, GridSpec, TTestResult};
pub use tensor::{ParamId, ParamSet, Tensor};
