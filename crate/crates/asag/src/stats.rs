//! Evaluation statistics: quadratic weighted kappa, the 5x2
//! cross-validated paired t-test (5 degrees of freedom, one-tailed),
//! Student-t tail probabilities, Cohen's D, and the end-to-end model
//! comparison harness.

use serde::{Deserialize, Serialize};

use crate::dataset::{make_5x2_folds, Corpus};
use crate::featurize::{featurize_corpus, EmbeddingProvider, FeatureMatrix, RubricPhrase};
use crate::{derive_seed, Error, Result};

/// Quadratic weighted Cohen's kappa between two rating vectors.
///
/// `kappa = 1 - sum(w * O) / sum(w * E)` with quadratic weights
/// `w_ij = (i - j)^2 / (K - 1)^2`, observed confusion counts `O`, and `E`
/// the outer product of the marginals scaled to N. Perfect agreement
/// returns exactly 1.
pub fn qwk(a: &[i32], b: &[i32], min_rating: i32, max_rating: i32) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::SampleTooSmall { need: 1, got: 0 });
    }
    for &r in a.iter().chain(b.iter()) {
        if r < min_rating || r > max_rating {
            return Err(Error::RatingOutOfRange {
                row: 0,
                rating: r,
                min: min_rating,
                max: max_rating,
            });
        }
    }
    if a == b {
        return Ok(1.0);
    }

    let k = (max_rating - min_rating + 1) as usize;
    let n = a.len() as f64;
    let mut observed = vec![vec![0.0f64; k]; k];
    let mut marg_a = vec![0.0f64; k];
    let mut marg_b = vec![0.0f64; k];
    for (&ra, &rb) in a.iter().zip(b) {
        let i = (ra - min_rating) as usize;
        let j = (rb - min_rating) as usize;
        observed[i][j] += 1.0;
        marg_a[i] += 1.0;
        marg_b[j] += 1.0;
    }
    let denom_scale = ((k - 1) * (k - 1)) as f64;
    let mut weighted_obs = 0.0;
    let mut weighted_exp = 0.0;
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64 - j as f64) * (i as f64 - j as f64)) / denom_scale;
            weighted_obs += w * observed[i][j];
            weighted_exp += w * marg_a[i] * marg_b[j] / n;
        }
    }
    if weighted_exp == 0.0 {
        // Only possible when both raters are constant; disagreement with
        // zero chance-expected disagreement has no defined kappa.
        return Err(Error::DegenerateMarginals);
    }
    Ok(1.0 - weighted_obs / weighted_exp)
}

/// Per-iteration metric differences for the 5x2 test: `pairs[i] = (p_i^(1),
/// p_i^(2))`, the model-A-minus-model-B differences on the two half-folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub pairs: [(f64, f64); 5],
}

/// The 5x2 cv paired t statistic and its upper one-tailed p-value.
///
/// `t = p_1^(1) / sqrt(mean of the five per-iteration variance estimates)`
/// with `s_i^2 = (p_i^(1) - mean_i)^2 + (p_i^(2) - mean_i)^2`, referred to
/// a Student-t distribution with 5 degrees of freedom.
pub fn t_test_5x2(metrics: &FoldMetrics) -> Result<(f64, f64)> {
    let mut variance_sum = 0.0;
    for &(p1, p2) in &metrics.pairs {
        if !p1.is_finite() || !p2.is_finite() {
            return Err(Error::NonFinite {
                what: "fold metric",
                iteration: 0,
            });
        }
        let mean = (p1 + p2) / 2.0;
        variance_sum += (p1 - mean) * (p1 - mean) + (p2 - mean) * (p2 - mean);
    }
    if variance_sum == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let t = metrics.pairs[0].0 / (variance_sum / 5.0).sqrt();
    let p = student_t_upper_tail(t, 5)?;
    Ok((t, p))
}

/// `P(T > t)` for Student's t with `df` degrees of freedom, via the
/// regularized incomplete beta function at `x = df / (df + t^2)`.
pub fn student_t_upper_tail(t: f64, df: u32) -> Result<f64> {
    if df < 1 {
        return Err(Error::InvalidDof(df as i64));
    }
    let dff = df as f64;
    let x = dff / (dff + t * t);
    let half_tail = 0.5 * regularized_incomplete_beta(x, dff / 2.0, 0.5)?;
    Ok(if t >= 0.0 { half_tail } else { 1.0 - half_tail })
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9.
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (std::f64::consts::TAU).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `I_x(a, b)` by the Lentz continued fraction, 200 iterations max,
/// 1e-12 relative tolerance.
fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::NonFinite {
            what: "incomplete beta argument",
            iteration: 0,
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    // Use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) where the continued
    // fraction converges fastest.
    if x > (a + 1.0) / (a + b + 2.0) {
        return Ok(1.0 - regularized_incomplete_beta(1.0 - x, b, a)?);
    }
    let front =
        (a * x.ln() + b * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)).exp() / a;

    const TINY: f64 = 1e-300;
    let mut f = 1.0f64;
    let mut c = 1.0f64;
    let mut d = 0.0f64;
    for i in 0..=200 {
        let m = i / 2;
        let numerator = if i == 0 {
            1.0
        } else if i % 2 == 0 {
            (m as f64) * (b - m as f64) * x / ((a + 2.0 * m as f64 - 1.0) * (a + 2.0 * m as f64))
        } else {
            -(a + m as f64) * (a + b + m as f64) * x
                / ((a + 2.0 * m as f64) * (a + 2.0 * m as f64 + 1.0))
        };
        d = 1.0 + numerator * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + numerator / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-12 {
            return Ok(front * (f - 1.0));
        }
    }
    Ok(front * (f - 1.0))
}

/// Standardized mean difference with the pooled standard deviation.
pub fn cohens_d(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    if sample_a.len() < 2 {
        return Err(Error::SampleTooSmall {
            need: 2,
            got: sample_a.len(),
        });
    }
    if sample_b.len() < 2 {
        return Err(Error::SampleTooSmall {
            need: 2,
            got: sample_b.len(),
        });
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let var = |s: &[f64], m: f64| {
        s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (s.len() - 1) as f64
    };
    let (ma, mb) = (mean(sample_a), mean(sample_b));
    let (va, vb) = (var(sample_a, ma), var(sample_b, mb));
    let (na, nb) = (sample_a.len() as f64, sample_b.len() as f64);
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        if ma == mb {
            return Ok(0.0);
        }
        return Err(Error::ZeroPooledVariance);
    }
    Ok((ma - mb) / pooled)
}

/// A fitted model the comparison harness can score.
pub trait Grader {
    fn predict_class(&self, x: &[f64]) -> Result<usize>;
}

/// A training procedure producing a [`Grader`], fully determined by its
/// inputs and the given seed.
pub trait GraderTrainer {
    fn name(&self) -> String;
    fn train(
        &self,
        features: &FeatureMatrix,
        labels: &[usize],
        num_classes: usize,
        seed: u64,
    ) -> Result<Box<dyn Grader>>;
}

impl Grader for crate::nam::NamModel {
    fn predict_class(&self, x: &[f64]) -> Result<usize> {
        NamModel::predict_class(self, x)
    }
}

use crate::nam::NamModel;

/// Comparison arm training an additive model with a fixed config (the
/// per-cell seed overrides the config's seed).
pub struct NamArm {
    pub config: crate::trainer::TrainConfig,
}

impl GraderTrainer for NamArm {
    fn name(&self) -> String {
        "nam".into()
    }

    fn train(
        &self,
        features: &FeatureMatrix,
        labels: &[usize],
        num_classes: usize,
        seed: u64,
    ) -> Result<Box<dyn Grader>> {
        let config = crate::trainer::TrainConfig {
            seed,
            ..self.config.clone()
        };
        let (model, _) = crate::trainer::train_nam(features, labels, num_classes, &config)?;
        Ok(Box::new(model))
    }
}

impl Grader for crate::logreg::LogRegModel {
    fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(crate::nam::argmax(&self.predict_proba(x)?))
    }
}

/// Comparison arm fitting the logistic-regression baseline. L-BFGS is
/// deterministic from a zero start, so the seed is unused.
pub struct LogRegArm {
    pub l2_strength: f64,
}

impl GraderTrainer for LogRegArm {
    fn name(&self) -> String {
        "logreg".into()
    }

    fn train(
        &self,
        features: &FeatureMatrix,
        labels: &[usize],
        num_classes: usize,
        _seed: u64,
    ) -> Result<Box<dyn Grader>> {
        let model = crate::logreg::train_logreg(features, labels, num_classes, self.l2_strength)?;
        Ok(Box::new(model))
    }
}

/// Full result of one 5x2 comparison run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub model_a: String,
    pub model_b: String,
    pub seed: u64,
    pub t_statistic: f64,
    pub p_value_one_tailed: f64,
    pub cohens_d: f64,
    /// Ten per-fold QWK values per model, ordered (iteration, direction).
    pub qwk_a: Vec<f64>,
    pub qwk_b: Vec<f64>,
    pub mean_qwk_a: f64,
    pub mean_qwk_b: f64,
}

impl ComparisonReport {
    /// Plain-text table: the t-test block, then CV QWK averages.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str("5x2 CV paired t-test (5 df) and Cohen's D effect size\n");
        out.push_str(&format!("{} versus:  t(5)      p-val     Cohen's D\n", self.model_a));
        out.push_str(&format!(
            "{:<9}  {:>8.4}  {:>8.4}  {:>8.3}\n\n",
            self.model_b, self.t_statistic, self.p_value_one_tailed, self.cohens_d
        ));
        out.push_str("5x2 CV QWK averages\n");
        out.push_str(&format!("{:<9}  {:>8.4}\n", self.model_a, self.mean_qwk_a));
        out.push_str(&format!("{:<9}  {:>8.4}\n", self.model_b, self.mean_qwk_b));
        out
    }
}

/// Runs the full protocol: five stratified twofold splits; for each half,
/// train both models on one fold and score QWK on the other; then the 5x2
/// paired t-test over QWK differences and Cohen's D over the ten per-fold
/// QWK values of each model. Both models see identical folds and identical
/// per-cell seeds, so comparing a trainer against itself yields all-zero
/// differences (reported as a degenerate-variance error).
pub fn run_5x2_comparison<P: EmbeddingProvider + ?Sized>(
    corpus: &Corpus,
    phrases: &[RubricPhrase],
    provider: &P,
    trainer_a: &dyn GraderTrainer,
    trainer_b: &dyn GraderTrainer,
    seed: u64,
) -> Result<ComparisonReport> {
    let features = featurize_corpus(corpus, phrases, provider)?;
    run_5x2_comparison_on_features(
        corpus,
        &features,
        trainer_a,
        trainer_b,
        seed,
        &trainer_a.name(),
        &trainer_b.name(),
    )
}

/// Same protocol on a precomputed feature matrix (rows aligned with the
/// corpus).
pub fn run_5x2_comparison_on_features(
    corpus: &Corpus,
    features: &FeatureMatrix,
    trainer_a: &dyn GraderTrainer,
    trainer_b: &dyn GraderTrainer,
    seed: u64,
    name_a: &str,
    name_b: &str,
) -> Result<ComparisonReport> {
    let plan = make_5x2_folds(corpus, seed)?;
    let labels = corpus.labels();
    let num_classes = corpus.num_classes();
    let index_of: std::collections::HashMap<&str, usize> = corpus
        .responses
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();

    let mut qwk_a = Vec::with_capacity(10);
    let mut qwk_b = Vec::with_capacity(10);
    let mut pairs = [(0.0, 0.0); 5];

    for (iter, fold_pair) in plan.iterations.iter().enumerate() {
        let idx_a: Vec<usize> = fold_pair.fold_a.iter().map(|id| index_of[id.as_str()]).collect();
        let idx_b: Vec<usize> = fold_pair.fold_b.iter().map(|id| index_of[id.as_str()]).collect();
        let mut diffs = [0.0; 2];
        for (direction, (train_idx, test_idx)) in
            [(&idx_a, &idx_b), (&idx_b, &idx_a)].iter().enumerate()
        {
            let cell_seed = derive_seed(seed, 1 + (iter * 2 + direction) as u64);
            let train_features = features.select_rows(train_idx);
            let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let test_actual: Vec<i32> = test_idx.iter().map(|&i| labels[i] as i32).collect();

            let score = |trainer: &dyn GraderTrainer| -> Result<f64> {
                let model = trainer.train(&train_features, &train_labels, num_classes, cell_seed)?;
                let predicted: Vec<i32> = test_idx
                    .iter()
                    .map(|&i| model.predict_class(&features.values[i]).map(|c| c as i32))
                    .collect::<Result<_>>()?;
                qwk(&test_actual, &predicted, 0, num_classes as i32 - 1)
            };
            let score_a = score(trainer_a)?;
            let score_b = score(trainer_b)?;
            qwk_a.push(score_a);
            qwk_b.push(score_b);
            diffs[direction] = score_a - score_b;
        }
        pairs[iter] = (diffs[0], diffs[1]);
    }

    let (t_statistic, p_value_one_tailed) = t_test_5x2(&FoldMetrics { pairs })?;
    let d = cohens_d(&qwk_a, &qwk_b)?;
    Ok(ComparisonReport {
        model_a: name_a.to_string(),
        model_b: name_b.to_string(),
        seed,
        t_statistic,
        p_value_one_tailed,
        cohens_d: d,
        mean_qwk_a: qwk_a.iter().sum::<f64>() / qwk_a.len() as f64,
        mean_qwk_b: qwk_b.iter().sum::<f64>() / qwk_b.len() as f64,
        qwk_a,
        qwk_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qwk_perfect_agreement() {
        let a = vec![1, 2, 3, 4, 5];
        assert_eq!(qwk(&a, &a, 1, 5).unwrap(), 1.0);
    }

    #[test]
    fn qwk_hand_derived_case() {
        // Confusion matrix over 1..3: weighted observed disagreement 1,
        // weighted expected 1.625, kappa = 1 - 1/1.625.
        let a = vec![1, 2, 3, 1];
        let b = vec![1, 2, 3, 3];
        let got = qwk(&a, &b, 1, 3).unwrap();
        assert!((got - 0.3846153846).abs() < 1e-9, "{got}");
    }

    #[test]
    fn qwk_symmetry() {
        let a = vec![1, 3, 2, 5, 4, 1, 2];
        let b = vec![2, 3, 2, 4, 4, 2, 1];
        assert!((qwk(&a, &b, 1, 5).unwrap() - qwk(&b, &a, 1, 5).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn qwk_degenerate_cases() {
        // Both raters constant and equal: perfect agreement.
        assert_eq!(qwk(&[2, 2], &[2, 2], 1, 3).unwrap(), 1.0);
        // Both constant but different: expected disagreement equals
        // observed, kappa 0 (the zero-denominator guard never fires here).
        assert_eq!(qwk(&[2, 2], &[3, 3], 1, 3).unwrap(), 0.0);
        assert!(matches!(qwk(&[1], &[1, 2], 1, 2), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(
            qwk(&[0], &[1], 1, 2),
            Err(Error::RatingOutOfRange { .. })
        ));
    }

    /// Brute-force QWK straight from the definition, kept independent of
    /// the production path.
    pub fn qwk_brute_force(a: &[i32], b: &[i32], min_rating: i32, max_rating: i32) -> f64 {
        let k = (max_rating - min_rating + 1) as usize;
        let n = a.len() as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..k {
            for j in 0..k {
                let w = ((i as f64 - j as f64) / (k as f64 - 1.0)).powi(2);
                let o = a
                    .iter()
                    .zip(b)
                    .filter(|(&x, &y)| {
                        x == i as i32 + min_rating && y == j as i32 + min_rating
                    })
                    .count() as f64;
                let ma = a.iter().filter(|&&x| x == i as i32 + min_rating).count() as f64;
                let mb = b.iter().filter(|&&y| y == j as i32 + min_rating).count() as f64;
                num += w * o;
                den += w * ma * mb / n;
            }
        }
        1.0 - num / den
    }

    #[test]
    fn qwk_matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.gen_range(2..30);
            let k = rng.gen_range(2..6);
            let a: Vec<i32> = (0..n).map(|_| rng.gen_range(1..=k)).collect();
            let b: Vec<i32> = (0..n).map(|_| rng.gen_range(1..=k)).collect();
            if a == b || a.iter().zip(&b).all(|(x, y)| a[0] == *x && b[0] == *y) {
                continue;
            }
            match qwk(&a, &b, 1, k) {
                Ok(got) => {
                    let expected = qwk_brute_force(&a, &b, 1, k);
                    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
                }
                Err(Error::DegenerateMarginals) => {}
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
    }

    #[test]
    fn t_test_zero_numerator() {
        let metrics = FoldMetrics {
            pairs: [(0.0, 0.1), (0.05, -0.05), (0.02, 0.0), (0.0, 0.03), (0.01, 0.02)],
        };
        let (t, p) = t_test_5x2(&metrics).unwrap();
        assert_eq!(t, 0.0);
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn t_test_degenerate_variance() {
        let metrics = FoldMetrics {
            pairs: [(0.0, 0.0); 5],
        };
        assert!(matches!(t_test_5x2(&metrics), Err(Error::DegenerateVariance)));
    }

    #[test]
    fn t_test_sign_convention() {
        let metrics = FoldMetrics {
            pairs: [(0.08, 0.02), (0.03, 0.05), (0.06, 0.01), (0.02, 0.04), (0.05, 0.03)],
        };
        let (t, p) = t_test_5x2(&metrics).unwrap();
        let negated = FoldMetrics {
            pairs: metrics.pairs.map(|(x, y)| (-x, -y)),
        };
        let (t2, p2) = t_test_5x2(&negated).unwrap();
        assert!((t + t2).abs() < 1e-12);
        assert!((p + p2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn student_t_tail_reference_points() {
        assert_eq!(student_t_upper_tail(0.0, 7).unwrap(), 0.5);
        // Standard critical value: t_{0.05, 5} = 2.015.
        let p = student_t_upper_tail(2.015, 5).unwrap();
        assert!((p - 0.05).abs() < 5e-4, "{p}");
        let p = student_t_upper_tail(2.1732, 5).unwrap();
        assert!((p - 0.0409).abs() < 1e-3, "{p}");
        assert!(student_t_upper_tail(50.0, 5).unwrap() < 1e-6);
        assert!(matches!(student_t_upper_tail(1.0, 0), Err(Error::InvalidDof(0))));
    }

    #[test]
    fn student_t_tail_reflection() {
        for &t in &[0.3, 1.7, 2.9, 8.0] {
            let upper = student_t_upper_tail(t, 5).unwrap();
            let lower = student_t_upper_tail(-t, 5).unwrap();
            assert!((upper + lower - 1.0).abs() < 1e-12);
        }
    }

    /// Numerical quadrature of the t density, as an independent oracle.
    fn t_upper_tail_quadrature(t: f64, df: f64) -> f64 {
        let density = |x: f64| {
            (ln_gamma((df + 1.0) / 2.0)
                - ln_gamma(df / 2.0)
                - 0.5 * (df * std::f64::consts::PI).ln())
            .exp()
                * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0)
        };
        // Simpson over [t, t + 2000]; the truncated tail is ~1e-17.
        let (a, b, steps) = (t, t + 2000.0, 400_000usize);
        let h = (b - a) / steps as f64;
        let mut sum = density(a) + density(b);
        for i in 1..steps {
            let x = a + i as f64 * h;
            sum += density(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    }

    #[test]
    fn student_t_tail_matches_quadrature() {
        for &t in &[0.5, 1.0, 2.1732, 3.5] {
            let got = student_t_upper_tail(t, 5).unwrap();
            let expected = t_upper_tail_quadrature(t, 5.0);
            assert!((got - expected).abs() < 1e-8, "t={t}: {got} vs {expected}");
        }
    }

    #[test]
    fn cohens_d_hand_case() {
        let a = vec![0.8, 0.9, 1.0];
        let b = vec![0.5, 0.6, 0.7];
        let d = cohens_d(&a, &b).unwrap();
        assert!((d - 3.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn cohens_d_properties() {
        let a = vec![0.7, 0.75, 0.8, 0.68];
        let b = vec![0.6, 0.66, 0.71, 0.59];
        let d = cohens_d(&a, &b).unwrap();
        // Antisymmetry.
        assert!((d + cohens_d(&b, &a).unwrap()).abs() < 1e-12);
        // Shift invariance.
        let shift = |s: &[f64]| s.iter().map(|v| v + 2.0).collect::<Vec<_>>();
        assert!((d - cohens_d(&shift(&a), &shift(&b)).unwrap()).abs() < 1e-12);
        // Common positive scaling invariance.
        let scale = |s: &[f64]| s.iter().map(|v| v * 3.5).collect::<Vec<_>>();
        assert!((d - cohens_d(&scale(&a), &scale(&b)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn cohens_d_degenerate_cases() {
        // Equal-mean distinct-value samples give zero.
        assert_eq!(cohens_d(&[0.4, 0.6], &[0.3, 0.7]).unwrap(), 0.0);
        // Identical constant samples: zero pooled variance but equal means.
        assert_eq!(cohens_d(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert!(matches!(
            cohens_d(&[0.5, 0.5], &[0.6, 0.6]),
            Err(Error::ZeroPooledVariance)
        ));
        assert!(matches!(
            cohens_d(&[0.5], &[0.6, 0.6]),
            Err(Error::SampleTooSmall { .. })
        ));
    }
}
