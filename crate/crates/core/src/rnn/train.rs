use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{build_vocab, BiLstmModel, EmbeddingTable, RnnTrainConfig, NULL_TOKEN, UNK_TOKEN};
use crate::corpus::ProcessedTweet;
use crate::error::{Error, Result};
use crate::linalg::norm;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    /// Largest batch gradient norm before clipping.
    pub max_raw_grad_norm: f64,
    /// Largest norm of the gradient actually handed to Adam.
    pub max_applied_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RnnFitLog {
    pub epochs: Vec<EpochStats>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Trains on `train` with randomly initialized embeddings.
pub fn fit(train: &[ProcessedTweet], config: &RnnTrainConfig) -> Result<(BiLstmModel, RnnFitLog)> {
    config.validate()?;
    let vocab = build_vocab(train, config.min_count);
    let mut table = EmbeddingTable::random(&vocab, config.embedding_dim, config.seed);
    table.trainable = config.trainable_embeddings;
    train_model(train, config, &table)
}

/// Trains starting from `pretrained` vectors. The vocabulary is the
/// training vocabulary; words missing from `pretrained` are initialized
/// uniformly.
pub fn fit_with_embeddings(
    train: &[ProcessedTweet],
    config: &RnnTrainConfig,
    pretrained: &EmbeddingTable,
) -> Result<(BiLstmModel, RnnFitLog)> {
    config.validate()?;
    let vocab = build_vocab(train, config.min_count);
    let mut table = EmbeddingTable::random(&vocab, pretrained.dim, config.seed);
    table.trainable = config.trainable_embeddings;
    let index = pretrained.index();
    for (i, w) in vocab.iter().enumerate() {
        if w == NULL_TOKEN || w == UNK_TOKEN {
            continue;
        }
        if let Some(&j) = index.get(w.as_str()) {
            table.vectors.row_mut(i).copy_from_slice(pretrained.vectors.row(j));
            table.pretrained += 1;
        }
    }
    train_model(train, config, &table)
}

fn train_model(
    train: &[ProcessedTweet],
    config: &RnnTrainConfig,
    table: &EmbeddingTable,
) -> Result<(BiLstmModel, RnnFitLog)> {
    if train.is_empty() {
        return Err(Error::InsufficientData("no training tweets".into()));
    }
    let mut model = BiLstmModel::new(table, config.hidden, config.max_len, config.seed.wrapping_add(1))?;
    let encoded: Vec<(Vec<usize>, usize)> = train
        .iter()
        .map(|t| (model.encode(&t.tokens), t.label.index()))
        .collect();

    let n_params = model.layout.total();
    let mut adam = Adam::new(n_params);
    let mut grad = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let mut log = RnnFitLog::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        let mut max_raw: f64 = 0.0;
        let mut max_applied: f64 = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (ids, label) = &encoded[i];
                total_loss += model.accumulate_gradient(ids, *label, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let raw = norm(&grad);
            if !raw.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            max_raw = max_raw.max(raw);
            if raw > config.clip_norm {
                let shrink = config.clip_norm / raw;
                grad.iter_mut().for_each(|g| *g *= shrink);
            }
            max_applied = max_applied.max(norm(&grad));
            adam.step(&mut model.params, &grad, config.learning_rate);
        }
        let mean_loss = total_loss / encoded.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        log.epochs.push(EpochStats {
            mean_loss,
            max_raw_grad_norm: max_raw,
            max_applied_grad_norm: max_applied,
        });
    }
    Ok((model, log))
}
