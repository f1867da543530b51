//! The neural additive model.
//!
//! One small subnetwork per feature: an exponential-weighted hidden layer
//! whose units compute `clip(exp(w) * (x - b), 0, 1)` (a capped ReLU over
//! an exponentially scaled input), followed by a linear head emitting one
//! logit contribution per rating class. Class logits are the global bias
//! plus the sum of per-feature outputs, so every prediction decomposes
//! exactly into per-feature contributions.
//!
//! Gradients are hand-derived for this fixed architecture; see
//! [`loss_and_gradients`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::featurize::FeatureMatrix;
use crate::{Error, Result};

/// Hidden layer of U exponential-weighted capped-ReLU units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExuLayer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ExuLayer {
    pub fn units(&self) -> usize {
        self.weights.len()
    }
}

/// Subnetwork for a single feature: hidden layer, U×K head, K bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNet {
    pub exu: ExuLayer,
    /// head[u][c]: weight from hidden unit u to class c.
    pub head: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Additive K-class model over D features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamModel {
    pub nets: Vec<FeatureNet>,
    pub global_bias: Vec<f64>,
    /// centers[i][c]: training-set mean of the raw per-feature output,
    /// subtracted when reporting contributions. Zero until calibrated.
    pub centers: Vec<Vec<f64>>,
    pub num_classes: usize,
}

/// Exact decomposition of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionBreakdown {
    /// per_feature[i][c]: centered contribution of feature i to class c.
    pub per_feature: Vec<Vec<f64>>,
    pub bias_term: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Gradients in the same layout as the model parameters.
#[derive(Debug, Clone)]
pub struct NamGradients {
    pub nets: Vec<NetGradients>,
    pub global_bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NetGradients {
    pub exu_weights: Vec<f64>,
    pub exu_biases: Vec<f64>,
    pub head: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Hidden activations: unit u outputs `clip(exp(w_u) * (x - b_u), 0, 1)`.
pub fn exu_forward(layer: &ExuLayer, x: f64) -> Vec<f64> {
    layer
        .weights
        .iter()
        .zip(&layer.biases)
        .map(|(&w, &b)| (w.exp() * (x - b)).clamp(0.0, 1.0))
        .collect()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl NamModel {
    /// A model with all parameters zero (bias-only predictions).
    pub fn zeros(num_features: usize, num_classes: usize, hidden_units: usize) -> Self {
        let net = FeatureNet {
            exu: ExuLayer {
                weights: vec![0.0; hidden_units],
                biases: vec![0.0; hidden_units],
            },
            head: vec![vec![0.0; num_classes]; hidden_units],
            bias: vec![0.0; num_classes],
        };
        NamModel {
            nets: vec![net; num_features],
            global_bias: vec![0.0; num_classes],
            centers: vec![vec![0.0; num_classes]; num_features],
            num_classes,
        }
    }

    pub fn num_features(&self) -> usize {
        self.nets.len()
    }

    /// Raw (uncentered) K-vector output of feature net `i` at input `x`.
    pub fn raw_feature_output(&self, i: usize, x: f64) -> Vec<f64> {
        let net = &self.nets[i];
        let hidden = exu_forward(&net.exu, x);
        let mut out = net.bias.clone();
        for (u, &h) in hidden.iter().enumerate() {
            if h != 0.0 {
                for (c, o) in out.iter_mut().enumerate() {
                    *o += net.head[u][c] * h;
                }
            }
        }
        out
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features() {
            return Err(Error::DimMismatch {
                expected: self.num_features(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// K class logits: global bias plus the sum of per-feature outputs.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut logits = self.global_bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            let out = self.raw_feature_output(i, xi);
            for (c, l) in logits.iter_mut().enumerate() {
                *l += out[c];
            }
        }
        Ok(logits)
    }

    /// Softmax class probabilities.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(x)?))
    }

    /// Index of the most probable class.
    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        let probs = self.predict_proba(x)?;
        Ok(argmax(&probs))
    }

    /// Centered per-feature contributions plus the bias term; the parts
    /// reassemble the logits exactly. The bias term absorbs the centers so
    /// the identity holds whether or not the model is calibrated.
    pub fn contributions(&self, x: &[f64]) -> Result<ContributionBreakdown> {
        self.check_input(x)?;
        let mut logits = self.global_bias.clone();
        let mut bias_term = self.global_bias.clone();
        let mut per_feature = Vec::with_capacity(self.num_features());
        for (i, &xi) in x.iter().enumerate() {
            let raw = self.raw_feature_output(i, xi);
            for (c, l) in logits.iter_mut().enumerate() {
                *l += raw[c];
            }
            for (c, b) in bias_term.iter_mut().enumerate() {
                *b += self.centers[i][c];
            }
            let centered: Vec<f64> = raw
                .iter()
                .zip(&self.centers[i])
                .map(|(r, c)| r - c)
                .collect();
            per_feature.push(centered);
        }
        Ok(ContributionBreakdown {
            per_feature,
            bias_term,
            logits,
        })
    }

    /// Centered shape-function values for one feature over a grid:
    /// `out[g][c] = f_{i,c}(grid[g]) - centers[i][c]`.
    pub fn shape_function(&self, feature: usize, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
        if feature >= self.num_features() {
            return Err(Error::FeatureIndexOutOfRange {
                index: feature,
                count: self.num_features(),
            });
        }
        Ok(grid
            .iter()
            .map(|&x| {
                self.raw_feature_output(feature, x)
                    .iter()
                    .zip(&self.centers[feature])
                    .map(|(r, c)| r - c)
                    .collect()
            })
            .collect())
    }

    /// Mean absolute centered contribution per feature, averaged over
    /// rows and classes.
    pub fn feature_importance(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        if features.cols() != self.num_features() {
            return Err(Error::DimMismatch {
                expected: self.num_features(),
                actual: features.cols(),
            });
        }
        let n = features.rows();
        let k = self.num_classes;
        let mut importance = vec![0.0; self.num_features()];
        for row in &features.values {
            for (i, &xi) in row.iter().enumerate() {
                let raw = self.raw_feature_output(i, xi);
                for (c, &r) in raw.iter().enumerate() {
                    importance[i] += (r - self.centers[i][c]).abs();
                }
            }
        }
        for imp in &mut importance {
            *imp /= (n * k) as f64;
        }
        Ok(importance)
    }

    /// Sets `centers[i][c]` to the training-set mean of the raw feature
    /// output, so centered contributions average to zero on that set.
    pub fn calibrate_centers(&mut self, train_features: &FeatureMatrix) -> Result<()> {
        if train_features.cols() != self.num_features() {
            return Err(Error::DimMismatch {
                expected: self.num_features(),
                actual: train_features.cols(),
            });
        }
        if train_features.rows() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let n = train_features.rows() as f64;
        let mut centers = vec![vec![0.0; self.num_classes]; self.num_features()];
        for row in &train_features.values {
            for (i, &xi) in row.iter().enumerate() {
                let raw = self.raw_feature_output(i, xi);
                for (c, &r) in raw.iter().enumerate() {
                    centers[i][c] += r;
                }
            }
        }
        for per_feature in &mut centers {
            for c in per_feature.iter_mut() {
                *c /= n;
            }
        }
        self.centers = centers;
        Ok(())
    }

    /// Flattens trainable parameters (centers excluded) into one vector.
    /// Layout: global bias, then per net: exu weights, exu biases, head
    /// row-major, net bias.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = self.global_bias.clone();
        for net in &self.nets {
            out.extend_from_slice(&net.exu.weights);
            out.extend_from_slice(&net.exu.biases);
            for row in &net.head {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&net.bias);
        }
        out
    }

    /// Inverse of [`flatten_params`].
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.flatten_params().len();
        if flat.len() != expected {
            return Err(Error::DimMismatch {
                expected,
                actual: flat.len(),
            });
        }
        let mut it = flat.iter();
        for b in &mut self.global_bias {
            *b = *it.next().unwrap();
        }
        for net in &mut self.nets {
            for w in &mut net.exu.weights {
                *w = *it.next().unwrap();
            }
            for b in &mut net.exu.biases {
                *b = *it.next().unwrap();
            }
            for row in &mut net.head {
                for h in row.iter_mut() {
                    *h = *it.next().unwrap();
                }
            }
            for b in &mut net.bias {
                *b = *it.next().unwrap();
            }
        }
        Ok(())
    }
}

impl NamGradients {
    pub fn zeros_like(model: &NamModel) -> Self {
        NamGradients {
            nets: model
                .nets
                .iter()
                .map(|net| NetGradients {
                    exu_weights: vec![0.0; net.exu.units()],
                    exu_biases: vec![0.0; net.exu.units()],
                    head: vec![vec![0.0; model.num_classes]; net.exu.units()],
                    bias: vec![0.0; model.num_classes],
                })
                .collect(),
            global_bias: vec![0.0; model.num_classes],
        }
    }

    /// Same layout as [`NamModel::flatten_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.global_bias.clone();
        for net in &self.nets {
            out.extend_from_slice(&net.exu_weights);
            out.extend_from_slice(&net.exu_biases);
            for row in &net.head {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&net.bias);
        }
        out
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean softmax cross-entropy over a batch plus optional L2 penalty on the
/// exu and head weights, with gradients by reverse-mode differentiation.
///
/// Dropout (inverted scaling) is applied to the hidden activations when
/// `dropout_rate > 0`; masks are drawn from `rng` in a fixed order
/// (example, feature, unit). With `dropout_rate == 0` the rng is untouched
/// and the result is deterministic.
pub fn loss_and_gradients<R: Rng>(
    model: &NamModel,
    batch_x: &[Vec<f64>],
    batch_y: &[usize],
    dropout_rate: f64,
    weight_decay: f64,
    rng: &mut R,
) -> Result<(f64, NamGradients)> {
    if batch_x.len() != batch_y.len() {
        return Err(Error::LengthMismatch(batch_x.len(), batch_y.len()));
    }
    if batch_x.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::InvalidConfig(format!(
            "dropout rate {dropout_rate} outside [0, 1)"
        )));
    }
    for &y in batch_y {
        if y >= model.num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                classes: model.num_classes,
            });
        }
    }

    let d = model.num_features();
    let k = model.num_classes;
    let batch = batch_x.len() as f64;
    let keep = 1.0 - dropout_rate;
    let mut grads = NamGradients::zeros_like(model);
    let mut loss = 0.0;

    for (x, &y) in batch_x.iter().zip(batch_y) {
        model.check_input(x)?;
        // Forward pass, keeping intermediates per feature.
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(d); // z = exp(w)(x - b)
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(d); // dropped+scaled
        let mut masks: Vec<Vec<f64>> = Vec::with_capacity(d);
        let mut logits = model.global_bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            let net = &model.nets[i];
            let z: Vec<f64> = net
                .exu
                .weights
                .iter()
                .zip(&net.exu.biases)
                .map(|(&w, &b)| w.exp() * (xi - b))
                .collect();
            let mask: Vec<f64> = if dropout_rate > 0.0 {
                (0..net.exu.units())
                    .map(|_| if rng.gen::<f64>() < keep { 1.0 } else { 0.0 })
                    .collect()
            } else {
                vec![1.0; net.exu.units()]
            };
            let h: Vec<f64> = z
                .iter()
                .zip(&mask)
                .map(|(&zu, &mu)| zu.clamp(0.0, 1.0) * mu / keep)
                .collect();
            for (c, l) in logits.iter_mut().enumerate() {
                *l += net.bias[c];
                for (u, &hu) in h.iter().enumerate() {
                    *l += net.head[u][c] * hu;
                }
            }
            pre.push(z);
            hidden.push(h);
            masks.push(mask);
        }

        let probs = softmax(&logits);
        loss += -probs[y].max(1e-300).ln() / batch;

        // d loss / d logit_c, already averaged over the batch.
        let dlogits: Vec<f64> = (0..k)
            .map(|c| (probs[c] - if c == y { 1.0 } else { 0.0 }) / batch)
            .collect();
        for (c, &dl) in dlogits.iter().enumerate() {
            grads.global_bias[c] += dl;
        }
        for i in 0..d {
            let net = &model.nets[i];
            let g = &mut grads.nets[i];
            for (c, &dl) in dlogits.iter().enumerate() {
                g.bias[c] += dl;
            }
            for u in 0..net.exu.units() {
                let hu = hidden[i][u];
                let mut dh = 0.0;
                for (c, &dl) in dlogits.iter().enumerate() {
                    g.head[u][c] += hu * dl;
                    dh += net.head[u][c] * dl;
                }
                let zu = pre[i][u];
                if zu > 0.0 && zu < 1.0 {
                    let da = dh * masks[i][u] / keep;
                    // dz/dw = z (weight enters through exp), dz/db = -exp(w)
                    g.exu_weights[u] += da * zu;
                    g.exu_biases[u] += -da * net.exu.weights[u].exp();
                }
            }
        }
    }

    if weight_decay > 0.0 {
        for (net, g) in model.nets.iter().zip(&mut grads.nets) {
            for (u, &w) in net.exu.weights.iter().enumerate() {
                loss += 0.5 * weight_decay * w * w;
                g.exu_weights[u] += weight_decay * w;
            }
            for (u, row) in net.head.iter().enumerate() {
                for (c, &h) in row.iter().enumerate() {
                    loss += 0.5 * weight_decay * h * h;
                    g.head[u][c] += weight_decay * h;
                }
            }
        }
    }

    if !loss.is_finite() {
        return Err(Error::NonFinite {
            what: "loss",
            iteration: 0,
        });
    }
    Ok((loss, grads))
}
