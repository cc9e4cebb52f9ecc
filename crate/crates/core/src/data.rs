//! Labeled feature datasets and the bundled synthetic generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub n_features: usize,
    pub n_classes: usize,
    /// Declared normalization range of every feature.
    pub range: (f64, f64),
    pub samples: Vec<Sample>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range;
        if !(lo < hi) {
            return Err(Error::Config(format!("dataset range [{lo}, {hi}] is empty")));
        }
        if self.n_classes == 0 || self.n_features == 0 {
            return Err(Error::Config("dataset needs at least one feature and one class".into()));
        }
        for (k, s) in self.samples.iter().enumerate() {
            if s.features.len() != self.n_features {
                return Err(Error::Config(format!(
                    "sample {k} has {} features, expected {}",
                    s.features.len(),
                    self.n_features
                )));
            }
            if s.label >= self.n_classes {
                return Err(Error::Config(format!(
                    "sample {k} has label {} outside [0, {})",
                    s.label, self.n_classes
                )));
            }
            if let Some(i) = s.features.iter().position(|f| !(lo..=hi).contains(f)) {
                return Err(Error::Config(format!(
                    "sample {k} feature {i} = {} outside declared range [{lo}, {hi}]",
                    s.features[i]
                )));
            }
        }
        Ok(())
    }

    /// Splits off the last `fraction` of samples.
    pub fn split(mut self, fraction: f64) -> (DatasetManifest, DatasetManifest) {
        let n_tail = ((self.samples.len() as f64) * fraction).round() as usize;
        let tail = self.samples.split_off(self.samples.len() - n_tail.min(self.samples.len()));
        let other = DatasetManifest {
            samples: tail,
            ..self.clone()
        };
        (self, other)
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Gaussian blobs clipped to `[0, 1]`. Class centers are redrawn until every
/// pair differs by at least 0.5 in some feature; samples cycle through the
/// classes.
pub fn gaussian_blobs(n_samples: usize, n_features: usize, n_classes: usize, spread: f64, seed: u64) -> DatasetManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut attempts = 0;
    while centers.len() < n_classes {
        let c: Vec<f64> = (0..n_features).map(|_| 0.15 + 0.7 * rng.gen::<f64>()).collect();
        let separated = centers
            .iter()
            .all(|o| o.iter().zip(&c).any(|(a, b)| (a - b).abs() >= 0.5));
        attempts += 1;
        // Too many classes for the feature count: accept whatever comes.
        if separated || attempts > 10_000 {
            centers.push(c);
        }
    }
    let samples = (0..n_samples)
        .map(|i| {
            let label = i % n_classes;
            let features = centers[label]
                .iter()
                .map(|&m| (m + spread * normal(&mut rng)).clamp(0.0, 1.0))
                .collect();
            Sample { features, label }
        })
        .collect();
    DatasetManifest {
        n_features,
        n_classes,
        range: (0.0, 1.0),
        samples,
    }
}

const GLYPHS: [[&str; 8]; 10] = [
    ["..####..", ".##..##.", ".##..##.", ".##..##.", ".##..##.", ".##..##.", ".##..##.", "..####.."],
    ["...##...", "..###...", ".####...", "...##...", "...##...", "...##...", "...##...", ".######."],
    ["..####..", ".##..##.", ".....##.", "....##..", "...##...", "..##....", ".##.....", ".######."],
    ["..####..", ".##..##.", ".....##.", "...###..", ".....##.", ".....##.", ".##..##.", "..####.."],
    ["....##..", "...###..", "..#.##..", ".#..##..", ".######.", "....##..", "....##..", "....##.."],
    [".######.", ".##.....", ".##.....", ".#####..", ".....##.", ".....##.", ".##..##.", "..####.."],
    ["..####..", ".##.....", ".##.....", ".#####..", ".##..##.", ".##..##.", ".##..##.", "..####.."],
    [".######.", ".....##.", "....##..", "....##..", "...##...", "...##...", "..##....", "..##...."],
    ["..####..", ".##..##.", ".##..##.", "..####..", ".##..##.", ".##..##.", ".##..##.", "..####.."],
    ["..####..", ".##..##.", ".##..##.", ".##..##.", "..#####.", ".....##.", ".....##.", "..####.."],
];

/// 8x8 digit-like images: one of ten glyphs, shifted by up to one pixel,
/// with pixel intensity jitter and random speckle.
pub fn digits(n_samples: usize, n_classes: usize, noise: f64, seed: u64) -> DatasetManifest {
    let n_classes = n_classes.clamp(1, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_samples)
        .map(|i| {
            let label = i % n_classes;
            let (dy, dx) = (rng.gen_range(-1i32..=1), rng.gen_range(-1i32..=1));
            let mut features = vec![0.0; 64];
            for y in 0..8i32 {
                for x in 0..8i32 {
                    let (sy, sx) = (y - dy, x - dx);
                    let on = (0..8).contains(&sy)
                        && (0..8).contains(&sx)
                        && GLYPHS[label][sy as usize].as_bytes()[sx as usize] == b'#';
                    let base = if on { 0.85 } else { 0.05 };
                    let speckle = if rng.gen::<f64>() < noise { 0.5 } else { 0.0 };
                    let v: f64 = base + speckle + 0.1 * normal(&mut rng);
                    features[(y * 8 + x) as usize] = v.clamp(0.0, 1.0);
                }
            }
            Sample { features, label }
        })
        .collect();
    DatasetManifest {
        n_features: 64,
        n_classes,
        range: (0.0, 1.0),
        samples,
    }
}
