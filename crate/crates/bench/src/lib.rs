//! Shared fixtures for the benchmark targets.

use varopt_ais::{BinaryDataset, GeometricPath, RbmParams, TrainAlgorithm, TrainConfig};

/// A small trained model pair representative of desk-scale experiments.
pub fn desk_path() -> GeometricPath {
    let data = BinaryDataset::shifted_bars(3, 4, 8);
    let config = TrainConfig {
        algorithm: TrainAlgorithm::Pcd,
        gibbs_steps: 5,
        learning_rate: 0.2,
        epochs: 80,
        batch_size: 8,
        l2: 1e-4,
        seed: 99,
    };
    let target = varopt_ais::train(&data, 10, &config).expect("training succeeds");
    let base = RbmParams::zero_weight_base(1, vec![0.0; 12]).expect("valid base");
    GeometricPath::new(base, target).expect("valid path")
}
