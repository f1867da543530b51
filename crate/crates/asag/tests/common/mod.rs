//! Shared synthetic-data generators for the integration tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use asag::dataset::{Corpus, Response};
use asag::featurize::FeatureMatrix;

/// Per-feature ground-truth curve for the synthetic grading task.
pub enum Truth {
    /// Smooth additive score, mostly monotone per feature; a linear model
    /// can track it reasonably well.
    Additive,
    /// Oscillating per-feature effects that average to zero over [0, 1], so
    /// a linear fit has almost nothing to work with.
    Nonlinear,
}

fn feature_effect(truth: &Truth, j: usize, x: f64) -> f64 {
    match truth {
        Truth::Additive => {
            let w = 1.0 + 0.35 * j as f64;
            w * x + 0.4 * x * x
        }
        Truth::Nonlinear => {
            let phase = j as f64 * 0.7;
            (2.0 * std::f64::consts::PI * x + phase).sin()
        }
    }
}

/// Builds `n` synthetic responses with `d` features uniform on [0, 1] and a
/// 5-class rating from quantiles of the noisy additive score. The returned
/// corpus carries placeholder texts; the feature matrix is what the models
/// consume.
pub fn synthetic_dataset(
    n: usize,
    d: usize,
    truth: Truth,
    seed: u64,
) -> (Corpus, FeatureMatrix, Vec<usize>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let clean: f64 = row
            .iter()
            .enumerate()
            .map(|(j, &x)| feature_effect(&truth, j, x))
            .sum();
        let noise: f64 = rng.gen_range(-0.15..0.15);
        scores.push(clean + noise);
        values.push(row);
    }

    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cut = |q: f64| sorted[((n as f64 * q) as usize).min(n - 1)];
    let cuts = [cut(0.2), cut(0.4), cut(0.6), cut(0.8)];
    let labels: Vec<usize> = scores
        .iter()
        .map(|&s| cuts.iter().filter(|&&c| s >= c).count())
        .collect();

    let ids: Vec<String> = (0..n).map(|i| format!("s{i:04}")).collect();
    let responses: Vec<Response> = ids
        .iter()
        .zip(&labels)
        .map(|(id, &y)| Response {
            id: id.clone(),
            text: format!("synthetic {id}"),
            rating: y as i32 + 1,
        })
        .collect();
    let corpus = Corpus::new(responses, 1, 5).expect("synthetic corpus is valid");
    let features = FeatureMatrix {
        values,
        feature_names: (0..d).map(|j| format!("f{j}")).collect(),
        response_ids: ids,
    };
    (corpus, features, labels)
}
