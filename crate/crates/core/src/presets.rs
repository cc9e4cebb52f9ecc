//! Bundled network shapes and the synthetic datasets they are paired with.

use crate::data::{digits, gaussian_blobs, DatasetManifest};
use crate::error::{Error, Result};
use crate::snn::{ConvShape, LayerSpec, NetworkTopology, NeuronParams, PoolShape};

pub const NETWORK_PRESETS: [&str; 2] = ["desk-mlp", "desk-cnn"];

/// Two hidden dense layers (32, 16) in front of the readout. Weights are
/// zero; see [`crate::training::init_weights`].
pub fn desk_mlp(n_in: usize, n_classes: usize, n_timesteps: usize, params: NeuronParams) -> Result<NetworkTopology> {
    let dense = |a: usize, b: usize| LayerSpec::dense(a, b, vec![0.0; a * b], params);
    NetworkTopology::new(vec![dense(n_in, 32)?, dense(32, 16)?, dense(16, n_classes)?], n_timesteps)
}

/// 8 channels of 3x3 conv on a 1x8x8 image, 2x2 pooling, a 64-unit dense
/// layer and the readout.
pub fn desk_cnn(n_classes: usize, n_timesteps: usize, params: NeuronParams) -> Result<NetworkTopology> {
    let conv = ConvShape {
        in_channels: 1,
        in_h: 8,
        in_w: 8,
        out_channels: 8,
        kernel: 3,
        padding: 1,
    };
    let pool = PoolShape {
        channels: 8,
        in_h: 8,
        in_w: 8,
    };
    let flat = pool.n_out();
    NetworkTopology::new(
        vec![
            LayerSpec::conv2d(conv, vec![0.0; conv.n_kernel()], params)?,
            LayerSpec::pool2x2(pool)?,
            LayerSpec::dense(flat, 64, vec![0.0; flat * 64], params)?,
            LayerSpec::dense(64, n_classes, vec![0.0; 64 * n_classes], params)?,
        ],
        n_timesteps,
    )
}

pub fn network(name: &str, n_in: usize, n_classes: usize, n_timesteps: usize, params: NeuronParams) -> Result<NetworkTopology> {
    match name {
        "desk-mlp" => desk_mlp(n_in, n_classes, n_timesteps, params),
        "desk-cnn" => {
            if n_in != 64 {
                return Err(Error::Config(format!("desk-cnn takes 8x8 inputs (64 features), dataset has {n_in}")));
            }
            desk_cnn(n_classes, n_timesteps, params)
        }
        other => Err(Error::Config(format!(
            "unknown network preset '{other}' (known: {})",
            NETWORK_PRESETS.join(", ")
        ))),
    }
}

pub const DATASET_GENERATORS: [&str; 3] = ["blobs2", "blobs", "digits"];

/// Synthetic datasets by name:
/// - `blobs2`: 2 well separated classes in 16 features
/// - `blobs`: `n_classes` classes in 16 features
/// - `digits`: 8x8 glyph images
pub fn dataset(name: &str, n_samples: usize, n_classes: usize, seed: u64) -> Result<DatasetManifest> {
    match name {
        "blobs2" => Ok(gaussian_blobs(n_samples, 16, 2, 0.1, seed)),
        "blobs" => Ok(gaussian_blobs(n_samples, 16, n_classes, 0.1, seed)),
        "digits" => Ok(digits(n_samples, n_classes, 0.05, seed)),
        other => Err(Error::Config(format!(
            "unknown dataset generator '{other}' (known: {})",
            DATASET_GENERATORS.join(", ")
        ))),
    }
}
