//! Synthetic fixtures: labeled Gaussian blobs and pure-tone clips.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::audio_io::{AudioClip, CANONICAL_SAMPLE_RATE};
use crate::dataset::LabeledDataset;

/// `n_samples` points split round-robin over `n_classes` isotropic Gaussians.
///
/// Centers are drawn uniformly from `[-10, 10]^dim`; each point adds
/// `N(0, spread^2)` noise per coordinate.
pub fn gaussian_blobs(
    n_samples: usize,
    n_classes: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let noise = Normal::new(0.0, spread).expect("spread must be finite and non-negative");
    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let label = i % n_classes;
        features.push(
            centers[label]
                .iter()
                .map(|c| c + noise.sample(&mut rng))
                .collect(),
        );
        labels.push(label);
    }
    let names = (0..n_classes).map(|c| format!("class{c}")).collect();
    LabeledDataset::from_rows(features, labels, names).expect("blob rows are consistent")
}

/// `amplitude * cos(2 pi f t + phase)` at the canonical rate.
pub fn tone(freq_hz: f64, amplitude: f64, phase: f64, n_samples: usize) -> AudioClip {
    let rate = CANONICAL_SAMPLE_RATE as f64;
    let samples = (0..n_samples)
        .map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / rate + phase).cos())
        .collect();
    AudioClip::new(samples, CANONICAL_SAMPLE_RATE, format!("tone_{freq_hz}Hz"))
        .expect("amplitude must lie in [0, 1]")
}
