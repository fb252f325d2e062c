//! Synthetic multi-label data with correlated labels and optional label
//! noise on a random subset of instances.

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    /// Number of shared latent directions the label scores are built from.
    pub n_factors: usize,
    /// Standard deviation of the score noise before thresholding.
    pub score_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { n: 300, d: 10, l: 4, n_factors: 2, score_noise: 0.1, seed: 0 }
    }
}

/// Gaussian features; label `l` is the sign of a noisy linear score whose
/// direction mixes a few shared factors, so labels are correlated. Every
/// label is guaranteed both classes.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n < 2 || spec.d == 0 || spec.l < 2 || spec.n_factors == 0 {
        return Err(Error::InvalidInput(format!("degenerate synthetic spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let features = Array2::from_shape_fn((spec.n, spec.d), |_| normal(&mut rng));
    let factors = Array2::from_shape_fn((spec.d, spec.n_factors), |_| normal(&mut rng));
    let mixing = Array2::from_shape_fn((spec.n_factors, spec.l), |_| normal(&mut rng));
    let mut directions = factors.dot(&mixing);
    for mut col in directions.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt().max(1e-12);
        col /= norm;
    }
    let offsets: Vec<f64> = (0..spec.l).map(|_| rng.random_range(-0.5..0.5)).collect();
    let scores = features.dot(&directions);
    let mut labels = Array2::from_shape_fn((spec.n, spec.l), |(i, l)| {
        let s = scores[[i, l]] + offsets[l] + spec.score_noise * normal(&mut rng);
        if s > 0.0 {
            1i8
        } else {
            -1
        }
    });
    for l in 0..spec.l {
        let col = labels.column(l);
        let pos = col.iter().filter(|&&y| y > 0).count();
        if pos == 0 || pos == spec.n {
            // flip the instance whose score is closest to the threshold
            let i = (0..spec.n)
                .min_by(|&a, &b| (scores[[a, l]] + offsets[l]).abs().total_cmp(&(scores[[b, l]] + offsets[l]).abs()))
                .expect("n ≥ 2");
            labels[[i, l]] = -labels[[i, l]];
        }
    }
    Dataset::from_arrays(features, labels)
}

/// Flips every label of `round(rate · n)` randomly chosen instances.
/// Returns the noisy dataset and the sorted indices of the corrupted rows.
pub fn flip_instances(ds: &Dataset, rate: f64, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidInput(format!("noise rate must lie in [0, 1], got {rate}")));
    }
    let n = ds.n_instances();
    let k = (n as f64 * rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = sample(&mut rng, n, k).into_vec();
    rows.sort_unstable();
    let mut labels = ds.labels().clone();
    for &i in &rows {
        labels.row_mut(i).mapv_inplace(|y| -y);
    }
    Ok((ds.with_labels(labels)?, rows))
}
