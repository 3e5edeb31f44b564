//! Shared fixtures for the criterion benches.

use shiftlab::{build_model, gen_shifted_gaussians, train, DatasetSplit, Pool, ShiftSpec, TrainConfig, TrainMode, UadaModel};

/// The default five-class shifted-Gaussian problem (about 200 train rows per domain).
pub fn dataset() -> DatasetSplit {
    gen_shifted_gaussians(&ShiftSpec::default()).expect("default spec is valid")
}

/// A semi-supervised model after a few epochs, as seen by a selection round.
pub fn trained_model(data: &DatasetSplit, epochs: usize) -> UadaModel {
    let cfg = TrainConfig {
        mode: TrainMode::UadaSemi,
        epochs,
        ..TrainConfig::default()
    };
    let mut model = build_model(&cfg, data.dim, data.num_classes, 0).expect("valid config");
    train(&mut model, &Pool::from_split(data), &cfg).expect("training succeeds");
    model
}
