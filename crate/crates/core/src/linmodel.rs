//! Multinomial logistic regression trained by minibatch gradient descent.
//!
//! Serves as the lexicon-feature base model and as the stacking meta model.
//! Objective: mean cross-entropy + `(l2 / 2) * ||W||^2` (bias unpenalized).

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{argmax, log_sum_exp, relative_error, softmax_in_place, Matrix};

const FORMAT_TAG: &str = "tweetstack-logreg";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    /// C x D.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains full batch.
    pub batch_size: Option<usize>,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 200,
            batch_size: None,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch_size == Some(0) || !(self.l2 >= 0.0) {
            return Err(Error::Config(format!("invalid logistic regression config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitLog {
    pub initial_loss: f64,
    /// Full training objective after each epoch.
    pub epoch_losses: Vec<f64>,
    /// Classes with no training rows.
    pub empty_classes: Vec<usize>,
}

impl LogRegModel {
    pub fn zeros(class_names: Vec<String>, feature_names: Vec<String>, l2: f64) -> Self {
        let (c, d) = (class_names.len(), feature_names.len());
        LogRegModel {
            class_names,
            feature_names,
            weights: Matrix::zeros(c, d),
            bias: vec![0.0; c],
            l2,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_classes())
            .map(|c| self.bias[c] + crate::linalg::dot(self.weights.row(c), x))
            .collect()
    }

    /// Class probabilities for a single feature row.
    pub fn predict_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let mut p = self.logits(x);
        softmax_in_place(&mut p);
        Ok(p)
    }

    /// Row-stochastic N x C probability matrix.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.cols(),
            });
        }
        let mut out = Matrix::zeros(x.rows(), self.n_classes());
        for i in 0..x.rows() {
            let p = self.predict_row(x.row(i))?;
            out.row_mut(i).copy_from_slice(&p);
        }
        Ok(out)
    }

    /// Argmax predictions; ties go to the lower class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.iter_rows().map(argmax).collect())
    }

    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.class_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    /// Largest-magnitude weights of one class, signs preserved. Ties keep
    /// feature order.
    pub fn top_coefficients(&self, class: &str, k: usize) -> Result<Vec<(String, f64)>> {
        let c = self.class_index(class)?;
        let row = self.weights.row(c);
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[b].abs().total_cmp(&row[a].abs()).then(a.cmp(&b)));
        Ok(order
            .into_iter()
            .take(k)
            .map(|j| (self.feature_names[j].clone(), row[j]))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Envelope<'a> {
            format: &'a str,
            version: u32,
            model: &'a LogRegModel,
        }
        Ok(serde_json::to_string_pretty(&Envelope {
            format: FORMAT_TAG,
            version: FORMAT_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Envelope {
            format: String,
            version: u32,
            model: LogRegModel,
        }
        let env: Envelope = serde_json::from_str(text)?;
        if env.format != FORMAT_TAG || env.version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "expected {FORMAT_TAG} v{FORMAT_VERSION}, found {} v{}",
                env.format, env.version
            )));
        }
        let m = env.model;
        if m.weights.rows() != m.class_names.len()
            || m.weights.cols() != m.feature_names.len()
            || m.bias.len() != m.class_names.len()
        {
            return Err(Error::ModelFormat("inconsistent logistic regression dimensions".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

fn check_inputs(model: &LogRegModel, x: &Matrix, y: &[usize]) -> Result<()> {
    if x.cols() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: x.cols(),
        });
    }
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= model.n_classes()) {
        return Err(Error::UnknownClass(bad.to_string()));
    }
    Ok(())
}

/// Training objective over the given rows.
pub fn loss(model: &LogRegModel, x: &Matrix, y: &[usize]) -> Result<f64> {
    check_inputs(model, x, y)?;
    let all: Vec<usize> = (0..x.rows()).collect();
    Ok(batch_loss(model, x, y, &all))
}

fn batch_loss(model: &LogRegModel, x: &Matrix, y: &[usize], rows: &[usize]) -> f64 {
    let mut ce = 0.0;
    for &i in rows {
        let z = model.logits(x.row(i));
        ce += log_sum_exp(&z) - z[y[i]];
    }
    let penalty: f64 = model.weights.as_slice().iter().map(|w| w * w).sum();
    ce / rows.len() as f64 + 0.5 * model.l2 * penalty
}

/// Analytic gradient of the objective: `(dW, db)`.
pub fn gradient(model: &LogRegModel, x: &Matrix, y: &[usize]) -> Result<(Matrix, Vec<f64>)> {
    check_inputs(model, x, y)?;
    let all: Vec<usize> = (0..x.rows()).collect();
    Ok(batch_gradient(model, x, y, &all))
}

fn batch_gradient(model: &LogRegModel, x: &Matrix, y: &[usize], rows: &[usize]) -> (Matrix, Vec<f64>) {
    let (c, d) = (model.n_classes(), model.n_features());
    let mut gw = Matrix::zeros(c, d);
    let mut gb = vec![0.0; c];
    let scale = 1.0 / rows.len() as f64;
    for &i in rows {
        let xi = x.row(i);
        let mut p = model.logits(xi);
        softmax_in_place(&mut p);
        p[y[i]] -= 1.0;
        for k in 0..c {
            let delta = p[k] * scale;
            gb[k] += delta;
            for (g, &v) in gw.row_mut(k).iter_mut().zip(xi) {
                *g += delta * v;
            }
        }
    }
    for (g, &w) in gw.as_mut_slice().iter_mut().zip(model.weights.as_slice()) {
        *g += model.l2 * w;
    }
    (gw, gb)
}

/// Fits from zero initialization. Deterministic for a fixed config: the
/// seed only drives minibatch order.
pub fn fit(
    x: &Matrix,
    y: &[usize],
    class_names: Vec<String>,
    feature_names: Vec<String>,
    config: &TrainConfig,
) -> Result<(LogRegModel, FitLog)> {
    config.validate()?;
    let mut model = LogRegModel::zeros(class_names, feature_names, config.l2);
    check_inputs(&model, x, y)?;
    let n = x.rows();
    if n < model.n_classes() {
        return Err(Error::InsufficientData(format!(
            "{n} rows for {} classes",
            model.n_classes()
        )));
    }
    let mut log = FitLog {
        initial_loss: loss(&model, x, y)?,
        ..FitLog::default()
    };
    log.empty_classes = (0..model.n_classes()).filter(|c| !y.contains(c)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = config.batch_size.unwrap_or(n).min(n);
    for epoch in 0..config.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        for rows in order.chunks(batch) {
            let (gw, gb) = batch_gradient(&model, x, y, rows);
            for (w, g) in model.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                *w -= config.learning_rate * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&gb) {
                *b -= config.learning_rate * g;
            }
        }
        let l = loss(&model, x, y)?;
        if !l.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        log.epoch_losses.push(l);
    }
    Ok((model, log))
}

/// Largest relative error between the analytic gradient and central finite
/// differences over every weight and bias.
pub fn gradient_check(model: &LogRegModel, x: &Matrix, y: &[usize], epsilon: f64) -> Result<f64> {
    let (gw, gb) = gradient(model, x, y)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;

    let n_weights = model.weights.as_slice().len();
    for idx in 0..n_weights {
        let orig = probe.weights.as_slice()[idx];
        probe.weights.as_mut_slice()[idx] = orig + epsilon;
        let plus = loss(&probe, x, y)?;
        probe.weights.as_mut_slice()[idx] = orig - epsilon;
        let minus = loss(&probe, x, y)?;
        probe.weights.as_mut_slice()[idx] = orig;
        let fd = (plus - minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(gw.as_slice()[idx], fd));
    }
    for k in 0..model.n_classes() {
        let orig = probe.bias[k];
        probe.bias[k] = orig + epsilon;
        let plus = loss(&probe, x, y)?;
        probe.bias[k] = orig - epsilon;
        let minus = loss(&probe, x, y)?;
        probe.bias[k] = orig;
        let fd = (plus - minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(gb[k], fd));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    /// Two Gaussian-free clusters separated by a margin of 1 along x0 + x1.
    fn separable(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let class = i % 2;
            let t: f64 = rng.gen_range(-3.0..3.0);
            let offset: f64 = rng.gen_range(0.5..2.5);
            let s = if class == 1 { offset } else { -offset };
            // Point = t * (1, -1)/sqrt2 + s * (1, 1)/sqrt2; margin |s| >= 0.5 each side.
            let r = std::f64::consts::FRAC_1_SQRT_2;
            rows.push(vec![(t + s) * r, (s - t) * r]);
            y.push(class);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separable_toy_set_is_fit_exactly() {
        let (x, y) = separable(200, 5);
        let cfg = TrainConfig {
            l2: 0.0,
            epochs: 300,
            ..TrainConfig::default()
        };
        let (model, log) = fit(&x, &y, names("c", 2), names("f", 2), &cfg).unwrap();
        let pred = model.predict(&x).unwrap();
        assert_eq!(pred, y);
        assert!(log.epoch_losses.last().unwrap() < &log.initial_loss);
    }

    #[test]
    fn zero_model_is_uniform() {
        let model = LogRegModel::zeros(names("c", 4), names("f", 3), 0.0);
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let p = model.predict_proba(&x).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn large_bias_dominates() {
        let mut model = LogRegModel::zeros(names("c", 4), names("f", 2), 0.0);
        model.bias[0] = 10.0;
        let p = model.predict_row(&[0.3, 0.7]).unwrap();
        let expected = 10f64.exp() / (10f64.exp() + 3.0);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!(p[0] > 0.9998);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let model = LogRegModel::zeros(names("c", 2), names("f", 2), 0.0);
        let x = Matrix::zeros(1, 3);
        assert!(matches!(model.predict_proba(&x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fit_is_bitwise_deterministic() {
        let (x, y) = separable(60, 9);
        let cfg = TrainConfig {
            batch_size: Some(7),
            epochs: 20,
            seed: 77,
            ..TrainConfig::default()
        };
        let a = fit(&x, &y, names("c", 2), names("f", 2), &cfg).unwrap().0;
        let b = fit(&x, &y, names("c", 2), names("f", 2), &cfg).unwrap().0;
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn top_coefficient_examples() {
        let mut model = LogRegModel::zeros(names("c", 1), names("f", 3), 0.0);
        model.weights.row_mut(0).copy_from_slice(&[0.1, -5.0, 2.0]);
        assert_eq!(
            model.top_coefficients("c0", 2).unwrap(),
            vec![("f1".to_string(), -5.0), ("f2".to_string(), 2.0)]
        );
        assert_eq!(model.top_coefficients("c0", 10).unwrap().len(), 3);
        assert!(model.top_coefficients("nope", 2).is_err());

        let zero = LogRegModel::zeros(names("c", 1), names("f", 3), 0.0);
        let top = zero.top_coefficients("c0", 3).unwrap();
        assert_eq!(top.iter().map(|t| t.0.as_str()).collect::<Vec<_>>(), ["f0", "f1", "f2"]);
    }

    #[test]
    fn bias_gradient_at_zero_is_prediction_minus_frequency() {
        let model = LogRegModel::zeros(names("c", 4), names("f", 2), 0.0);
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.5]]).unwrap();
        let y = [0, 1, 2, 3];
        let (_, gb) = gradient(&model, &x, &y).unwrap();
        for g in gb {
            assert!((g - (0.25 - 0.25)).abs() < 1e-15);
        }
        let y = [0, 0, 0, 1];
        let (_, gb) = gradient(&model, &x, &y).unwrap();
        let expected = [0.25 - 0.75, 0.25 - 0.25, 0.25, 0.25];
        for (g, e) in gb.iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn l2_adds_exactly_l2_times_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_rows(&(0..5).map(|_| vec![rng.gen(), rng.gen()]).collect::<Vec<_>>()).unwrap();
        let y = [0, 1, 2, 0, 1];
        let mut model = LogRegModel::zeros(names("c", 3), names("f", 2), 0.0);
        for w in model.weights.as_mut_slice() {
            *w = rng.gen_range(-1.0..1.0);
        }
        let (g0, _) = gradient(&model, &x, &y).unwrap();
        model.l2 = 0.3;
        let (g1, _) = gradient(&model, &x, &y).unwrap();
        for ((a, b), w) in g0.as_slice().iter().zip(g1.as_slice()).zip(model.weights.as_slice()) {
            assert!((b - a - 0.3 * w).abs() < 1e-15);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (x, y) = separable(40, 2);
        let model = fit(&x, &y, names("c", 2), names("f", 2), &TrainConfig::default()).unwrap().0;
        let back = LogRegModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn empty_class_is_reported_not_rejected() {
        let (x, y) = separable(20, 4);
        let (_, log) = fit(&x, &y, names("c", 3), names("f", 2), &TrainConfig::default()).unwrap();
        assert_eq!(log.empty_classes, vec![2]);
    }

    #[test]
    fn blow_up_is_detected() {
        let x = Matrix::from_rows(&[vec![1e200, 1.0], vec![-1e200, 1.0]]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e10,
            ..TrainConfig::default()
        };
        assert!(matches!(
            fit(&x, &[0, 1], names("c", 2), names("f", 2), &cfg),
            Err(Error::NonFiniteLoss { .. })
        ));
    }
}
