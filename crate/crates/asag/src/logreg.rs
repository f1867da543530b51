//! Multinomial logistic regression fit by limited-memory BFGS.
//!
//! The optimizer is the standard two-loop recursion with an Armijo
//! backtracking line search; the objective is mean softmax cross-entropy
//! plus an L2 penalty on the weights (intercepts unpenalized), which is
//! convex, so restarts agree on the optimum.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::featurize::FeatureMatrix;
use crate::nam::softmax;
use crate::{Error, Result};

/// Softmax-parametrized K-class linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// weights[c][j]: weight of feature j for class c.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub l2_strength: f64,
}

impl LogRegModel {
    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn num_features(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }

    /// `softmax(Wx + intercepts)`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_features() {
            return Err(Error::DimMismatch {
                expected: self.num_features(),
                actual: x.len(),
            });
        }
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.intercepts)
            .map(|(row, &b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        Ok(softmax(&logits))
    }
}

/// L-BFGS settings; the defaults match common practice.
#[derive(Debug, Clone)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub grad_tolerance: f64,
    pub max_iterations: usize,
    pub armijo_c1: f64,
    pub max_halvings: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            grad_tolerance: 1e-6,
            max_iterations: 500,
            armijo_c1: 1e-4,
            max_halvings: 50,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Minimizes `objective` from `x0` by the two-loop recursion. Stops when
/// the gradient infinity norm drops below the tolerance or the iteration
/// cap is hit. Curvature pairs with `s . y <= 0` are discarded.
pub fn lbfgs_minimize<F>(objective: F, x0: &[f64], config: &LbfgsConfig) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0.to_vec();
    let (mut value, mut grad) = objective(&x);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "objective",
            iteration: 0,
        });
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, rho)

    for iteration in 0..config.max_iterations {
        if inf_norm(&grad) < config.grad_tolerance {
            break;
        }

        // Two-loop recursion for the search direction.
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let alpha = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= alpha * yi;
            }
            alphas.push(alpha);
        }
        // Initial inverse-Hessian scaling from the newest pair.
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
            let beta = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (alpha - beta) * si;
            }
        }
        let mut direction: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &direction);
        if slope >= 0.0 {
            // Not a descent direction (stale curvature info); fall back to
            // steepest descent.
            direction = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }

        // Armijo backtracking.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let candidate: Vec<f64> = x
                .iter()
                .zip(&direction)
                .map(|(xi, di)| xi + step * di)
                .collect();
            let (cand_value, cand_grad) = objective(&candidate);
            if !cand_value.is_finite() || cand_grad.iter().any(|g| !g.is_finite()) {
                step *= 0.5;
                continue;
            }
            if cand_value <= value + config.armijo_c1 * step * slope {
                accepted = Some((candidate, cand_value, cand_grad));
                break;
            }
            step *= 0.5;
        }
        let (new_x, new_value, new_grad) = match accepted {
            Some(t) => t,
            None => {
                // At numerical resolution already; treat a tiny gradient as
                // converged rather than failing.
                if inf_norm(&grad) < 1e-5 {
                    break;
                }
                return Err(Error::LineSearchFailed(config.max_halvings));
            }
        };

        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        } else {
            // Armijo-only steps can violate the curvature condition; a
            // stale memory then yields near-orthogonal directions and the
            // iteration stalls. Restart from steepest descent instead.
            history.clear();
        }
        x = new_x;
        value = new_value;
        grad = new_grad;
        let _ = iteration;
    }
    Ok(x)
}

#[cfg(test)]
fn pack(weights: &[Vec<f64>], intercepts: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = weights.iter().flatten().copied().collect();
    out.extend_from_slice(intercepts);
    out
}

fn unpack(params: &[f64], num_classes: usize, num_features: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let weights: Vec<Vec<f64>> = (0..num_classes)
        .map(|c| params[c * num_features..(c + 1) * num_features].to_vec())
        .collect();
    let intercepts = params[num_classes * num_features..].to_vec();
    (weights, intercepts)
}

/// Mean cross-entropy + (l2/2)·‖W‖² and its gradient, packed as
/// `[W row-major, intercepts]`.
pub fn logreg_objective(
    params: &[f64],
    features: &FeatureMatrix,
    labels: &[usize],
    num_classes: usize,
    l2_strength: f64,
) -> (f64, Vec<f64>) {
    let d = features.cols();
    let n = features.rows() as f64;
    let (weights, intercepts) = unpack(params, num_classes, d);
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (row, &y) in features.values.iter().zip(labels) {
        let logits: Vec<f64> = (0..num_classes)
            .map(|c| intercepts[c] + dot(&weights[c], row))
            .collect();
        let probs = softmax(&logits);
        loss += -probs[y].max(1e-300).ln() / n;
        for c in 0..num_classes {
            let delta = (probs[c] - if c == y { 1.0 } else { 0.0 }) / n;
            for (j, &xj) in row.iter().enumerate() {
                grad[c * d + j] += delta * xj;
            }
            grad[num_classes * d + c] += delta;
        }
    }
    for c in 0..num_classes {
        for j in 0..d {
            let w = weights[c][j];
            loss += 0.5 * l2_strength * w * w;
            grad[c * d + j] += l2_strength * w;
        }
    }
    (loss, grad)
}

/// Fits the regularized softmax model from a zero start.
pub fn train_logreg(
    features: &FeatureMatrix,
    labels: &[usize],
    num_classes: usize,
    l2_strength: f64,
) -> Result<LogRegModel> {
    if features.rows() == 0 {
        return Err(Error::EmptyCorpus);
    }
    if features.rows() != labels.len() {
        return Err(Error::LengthMismatch(features.rows(), labels.len()));
    }
    if l2_strength < 0.0 {
        return Err(Error::InvalidConfig("l2_strength must be >= 0".into()));
    }
    for &y in labels {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                classes: num_classes,
            });
        }
    }
    let distinct: std::collections::HashSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::SingleClass);
    }

    let d = features.cols();
    let x0 = vec![0.0; num_classes * d + num_classes];
    let solution = lbfgs_minimize(
        |params| logreg_objective(params, features, labels, num_classes, l2_strength),
        &x0,
        &LbfgsConfig::default(),
    )?;
    let (weights, intercepts) = unpack(&solution, num_classes, d);
    Ok(LogRegModel {
        weights,
        intercepts,
        l2_strength,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn lbfgs_1d_quadratic() {
        let solution = lbfgs_minimize(
            |x| ((x[0] - 3.0) * (x[0] - 3.0), vec![2.0 * (x[0] - 3.0)]),
            &[0.0],
            &LbfgsConfig::default(),
        )
        .unwrap();
        assert!((solution[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn lbfgs_anisotropic_quadratic() {
        let solution = lbfgs_minimize(
            |x| {
                (
                    x[0] * x[0] + 10.0 * x[1] * x[1],
                    vec![2.0 * x[0], 20.0 * x[1]],
                )
            },
            &[1.0, 1.0],
            &LbfgsConfig::default(),
        )
        .unwrap();
        assert!(solution[0].abs() < 1e-6);
        assert!(solution[1].abs() < 1e-6);
    }

    #[test]
    fn lbfgs_rosenbrock() {
        let rosenbrock = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let value = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let grad = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (value, grad)
        };
        let solution =
            lbfgs_minimize(rosenbrock, &[-1.2, 1.0], &LbfgsConfig::default()).unwrap();
        assert!((solution[0] - 1.0).abs() < 1e-4, "{solution:?}");
        assert!((solution[1] - 1.0).abs() < 1e-4);
        assert!(rosenbrock(&solution).0 < 1e-8);
    }

    #[test]
    fn lbfgs_rejects_non_finite_start() {
        assert!(matches!(
            lbfgs_minimize(|_| (f64::NAN, vec![0.0]), &[0.0], &LbfgsConfig::default()),
            Err(Error::NonFinite { .. })
        ));
    }

    fn toy_features(values: Vec<Vec<f64>>) -> FeatureMatrix {
        let cols = values[0].len();
        FeatureMatrix {
            response_ids: (0..values.len()).map(|i| format!("r{i}")).collect(),
            feature_names: (0..cols).map(|j| format!("f{j}")).collect(),
            values,
        }
    }

    fn separable_problem() -> (FeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..40 {
            let x = rng.gen_range(0.0..1.0);
            let noise = rng.gen_range(-0.05..0.05);
            values.push(vec![x, x + noise]);
            labels.push(usize::from(x > 0.5));
        }
        (toy_features(values), labels)
    }

    #[test]
    fn separable_data_reaches_full_accuracy() {
        let (features, labels) = separable_problem();
        let model = train_logreg(&features, &labels, 2, 1e-4).unwrap();
        let correct = features
            .values
            .iter()
            .zip(&labels)
            .filter(|(x, &y)| {
                crate::nam::argmax(&model.predict_proba(x).unwrap()) == y
            })
            .count();
        assert_eq!(correct, labels.len());
    }

    #[test]
    fn heavy_regularization_shrinks_weights_to_priors() {
        let (features, labels) = separable_problem();
        let model = train_logreg(&features, &labels, 2, 1e6).unwrap();
        for row in &model.weights {
            for &w in row {
                assert!(w.abs() < 1e-4, "{w}");
            }
        }
        // Prediction collapses to the class priors.
        let probs = model.predict_proba(&[0.9, 0.9]).unwrap();
        let prior1 = labels.iter().filter(|&&y| y == 1).count() as f64 / labels.len() as f64;
        assert!((probs[1] - prior1).abs() < 1e-3, "{probs:?} vs {prior1}");
    }

    #[test]
    fn optimum_has_small_gradient_and_beats_zero() {
        let (features, labels) = separable_problem();
        let l2 = 0.1;
        let model = train_logreg(&features, &labels, 2, l2).unwrap();
        let params = pack(&model.weights, &model.intercepts);
        let (value, grad) = logreg_objective(&params, &features, &labels, 2, l2);
        let zero = vec![0.0; params.len()];
        let (zero_value, _) = logreg_objective(&zero, &features, &labels, 2, l2);
        assert!(value <= zero_value);
        assert!(inf_norm(&grad) < 1e-5, "{}", inf_norm(&grad));
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let (features, labels) = separable_problem();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 2 * features.cols() + 2;
        let params: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (_, grad) = logreg_objective(&params, &features, &labels, 2, 0.3);
        let h = 1e-6;
        for p in 0..n {
            let mut plus = params.clone();
            plus[p] += h;
            let mut minus = params.clone();
            minus[p] -= h;
            let (vp, _) = logreg_objective(&plus, &features, &labels, 2, 0.3);
            let (vm, _) = logreg_objective(&minus, &features, &labels, 2, 0.3);
            let numeric = (vp - vm) / (2.0 * h);
            let scale = grad[p].abs().max(numeric.abs()).max(1e-8);
            assert!((grad[p] - numeric).abs() / scale < 1e-5);
        }
    }

    #[test]
    fn restarts_agree_in_objective() {
        // Convexity: optimizing from a random start matches the zero start
        // in objective value.
        let (features, labels) = separable_problem();
        let l2 = 0.5;
        let objective =
            |params: &[f64]| logreg_objective(params, &features, &labels, 2, l2);
        let n = 2 * features.cols() + 2;
        let zero_solution = lbfgs_minimize(&objective, &vec![0.0; n], &LbfgsConfig::default()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let start: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let other_solution = lbfgs_minimize(&objective, &start, &LbfgsConfig::default()).unwrap();
        let v1 = objective(&zero_solution).0;
        let v2 = objective(&other_solution).0;
        assert!((v1 - v2).abs() < 1e-8, "{v1} vs {v2}");
    }

    #[test]
    fn predict_basics() {
        let model = LogRegModel {
            weights: vec![vec![0.0], vec![0.0]],
            intercepts: vec![0.0, 0.0],
            l2_strength: 0.0,
        };
        assert_eq!(model.predict_proba(&[0.7]).unwrap(), vec![0.5, 0.5]);

        // Hand-set 2x1 weights on a scalar input.
        let model = LogRegModel {
            weights: vec![vec![1.0], vec![-1.0]],
            intercepts: vec![0.2, -0.1],
            l2_strength: 0.0,
        };
        let x = 0.4;
        let probs = model.predict_proba(&[x]).unwrap();
        let (z0, z1) = (0.2 + x, -0.1 - x);
        let denom = z0.exp() + z1.exp();
        assert!((probs[0] - z0.exp() / denom).abs() < 1e-12);
        assert!((probs[1] - z1.exp() / denom).abs() < 1e-12);

        // Intercept shift invariance.
        let mut shifted = model.clone();
        for b in &mut shifted.intercepts {
            *b += 5.0;
        }
        let probs2 = shifted.predict_proba(&[x]).unwrap();
        for (a, b) in probs.iter().zip(&probs2) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            model.predict_proba(&[0.1, 0.2]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn single_class_rejected() {
        let features = toy_features(vec![vec![0.1], vec![0.2]]);
        assert!(matches!(
            train_logreg(&features, &[0, 0], 2, 1.0),
            Err(Error::SingleClass)
        ));
    }
}
