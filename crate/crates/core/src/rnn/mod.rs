//! Bidirectional LSTM with attention pooling, trained by hand-derived
//! backpropagation through time.
//!
//! Per token the forward and backward hidden states are concatenated into
//! `H_t` (size 2h). Scores `s_t = w . tanh(H_t)` are softmax-normalized into
//! attention weights, the pooled vector `r = sum_t alpha_t H_t` goes through
//! `tanh` and a linear softmax layer.
//!
//! All parameters live in one flat vector addressed through [`Layout`],
//! which keeps the optimizer, clipping, serialization and gradient checks
//! block-agnostic.

mod attention;
mod embeddings;
mod train;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use attention::{
    aggregate_attention, classwise_attention, write_attention_tsv, AttentionEntry, AttentionGrouping,
    AttentionOptions, ClasswiseAttention,
};
pub use embeddings::{load_embeddings, EmbeddingTable, INIT_BOUND};
pub use train::{fit, fit_with_embeddings, EpochStats, RnnFitLog};

use crate::binio::{Reader, Writer};
use crate::corpus::{Label, ProcessedTweet};
use crate::error::{Error, Result};
use crate::linalg::{argmax, relative_error, sigmoid, softmax_in_place};

const MAGIC: &[u8; 4] = b"BLSM";
const VERSION: u32 = 1;

/// Stands in for an empty tweet.
pub const NULL_TOKEN: &str = "<null>";
/// Shared slot for out-of-vocabulary words.
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RnnTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    /// Used when no pretrained vectors are supplied.
    pub embedding_dim: usize,
    pub batch_size: usize,
    pub max_len: usize,
    pub clip_norm: f64,
    pub trainable_embeddings: bool,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for RnnTrainConfig {
    fn default() -> Self {
        RnnTrainConfig {
            epochs: 4,
            learning_rate: 1e-3,
            hidden: 64,
            embedding_dim: 100,
            batch_size: 32,
            max_len: 64,
            clip_norm: 5.0,
            trainable_embeddings: true,
            min_count: 1,
            seed: 0,
        }
    }
}

impl RnnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || !(self.learning_rate > 0.0)
            || self.hidden == 0
            || self.embedding_dim == 0
            || self.batch_size == 0
            || self.max_len == 0
            || !(self.clip_norm > 0.0)
            || self.min_count == 0
        {
            return Err(Error::Config(format!("invalid BiLSTM config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DirLayout {
    /// 4h x d input weights, gate rows ordered input, forget, cell, output.
    w: usize,
    /// 4h x h recurrent weights.
    u: usize,
    /// 4h.
    b: usize,
}

/// Offsets of every parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    pub vocab: usize,
    pub dim: usize,
    pub hidden: usize,
    pub classes: usize,
    emb: usize,
    dirs: [DirLayout; 2],
    att: usize,
    out_w: usize,
    out_b: usize,
    total: usize,
}

impl Layout {
    pub fn new(vocab: usize, dim: usize, hidden: usize, classes: usize) -> Self {
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let emb = take(vocab * dim);
        let mut dir = || DirLayout {
            w: take(4 * hidden * dim),
            u: take(4 * hidden * hidden),
            b: take(4 * hidden),
        };
        let dirs = [dir(), dir()];
        let att = take(2 * hidden);
        let out_w = take(classes * 2 * hidden);
        let out_b = take(classes);
        Layout {
            vocab,
            dim,
            hidden,
            classes,
            emb,
            dirs,
            att,
            out_w,
            out_b,
            total: off,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn embedding_range(&self) -> std::ops::Range<usize> {
        self.emb..self.emb + self.vocab * self.dim
    }

    pub fn attention_range(&self) -> std::ops::Range<usize> {
        self.att..self.att + 2 * self.hidden
    }

    pub fn output_range(&self) -> std::ops::Range<usize> {
        self.out_w..self.total
    }
}

/// Per-token attention weights of one tweet (padding excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmModel {
    pub class_names: Vec<String>,
    pub vocab: Vec<String>,
    index: HashMap<String, usize>,
    pub layout: Layout,
    pub params: Vec<f64>,
    pub max_len: usize,
    pub trainable_embeddings: bool,
}

struct Step {
    id: usize,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
    c_prev: Vec<f64>,
    h_prev: Vec<f64>,
}

/// Everything the backward pass needs from one forward pass.
struct Trace {
    /// Steps per direction, in that direction's processing order.
    steps: [Vec<Step>; 2],
    /// Concatenated states, position order, each 2h.
    states: Vec<Vec<f64>>,
    /// tanh(states).
    squashed: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    pooled_tanh: Vec<f64>,
    probs: Vec<f64>,
}

/// y += M x, with M stored row-major as `rows x x.len()`.
fn gemv_add(m: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (r, out) in y.iter_mut().enumerate() {
        *out += crate::linalg::dot(&m[r * cols..(r + 1) * cols], x);
    }
}

/// y += M^T x, M stored row-major as `x.len() x y.len()`.
fn gemv_t_add(m: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = y.len();
    for (r, &xr) in x.iter().enumerate() {
        if xr == 0.0 {
            continue;
        }
        for (out, &w) in y.iter_mut().zip(&m[r * cols..(r + 1) * cols]) {
            *out += w * xr;
        }
    }
}

/// G += a b^T, G stored row-major as `a.len() x b.len()`.
fn outer_add(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (r, &ar) in a.iter().enumerate() {
        if ar == 0.0 {
            continue;
        }
        for (out, &bv) in g[r * cols..(r + 1) * cols].iter_mut().zip(b) {
            *out += ar * bv;
        }
    }
}

impl BiLstmModel {
    /// Fresh model over `embeddings.words`. LSTM and output weights are
    /// uniform in `±1/sqrt(h)`, forget-gate biases start at 1.
    pub fn new(embeddings: &EmbeddingTable, hidden: usize, max_len: usize, seed: u64) -> Result<Self> {
        let vocab = embeddings.words.clone();
        for special in [NULL_TOKEN, UNK_TOKEN] {
            if !vocab.iter().any(|w| w == special) {
                return Err(Error::Config(format!("embedding vocabulary lacks {special}")));
            }
        }
        let layout = Layout::new(vocab.len(), embeddings.dim, hidden, Label::ALL.len());
        let mut params = vec![0.0; layout.total];
        params[layout.embedding_range()].copy_from_slice(embeddings.vectors.as_slice());

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden as f64).sqrt();
        for dir in &layout.dirs {
            for p in &mut params[dir.w..dir.b] {
                *p = rng.gen_range(-bound..bound);
            }
            for p in &mut params[dir.b + hidden..dir.b + 2 * hidden] {
                *p = 1.0;
            }
        }
        for p in &mut params[layout.att..layout.out_b] {
            *p = rng.gen_range(-bound..bound);
        }
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(BiLstmModel {
            class_names: Label::names(),
            vocab,
            index,
            layout,
            params,
            max_len,
            trainable_embeddings: embeddings.trainable,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.layout.classes
    }

    /// Token ids fed to the encoder: truncated to `max_len`, OOV mapped to
    /// `<unk>`, an empty tweet becomes the single `<null>` token.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        if tokens.is_empty() {
            return vec![self.index[NULL_TOKEN]];
        }
        let unk = self.index[UNK_TOKEN];
        tokens
            .iter()
            .take(self.max_len)
            .map(|t| self.index.get(t).copied().unwrap_or(unk))
            .collect()
    }

    fn run_direction(&self, params: &[f64], dir: usize, ids: &[usize]) -> Vec<Step> {
        let l = &self.layout;
        let (h, d) = (l.hidden, l.dim);
        let dl = l.dirs[dir];
        let w = &params[dl.w..dl.w + 4 * h * d];
        let u = &params[dl.u..dl.u + 4 * h * h];
        let b = &params[dl.b..dl.b + 4 * h];
        let order: Vec<usize> = if dir == 0 {
            (0..ids.len()).collect()
        } else {
            (0..ids.len()).rev().collect()
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut steps = Vec::with_capacity(ids.len());
        for pos in order {
            let id = ids[pos];
            let x = &params[l.emb + id * d..l.emb + (id + 1) * d];
            let mut z = b.to_vec();
            gemv_add(w, x, &mut z);
            gemv_add(u, &h_prev, &mut z);
            let i: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
            let o: Vec<f64> = z[3 * h..].iter().map(|&v| sigmoid(v)).collect();
            let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let h_new: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
            steps.push(Step {
                id,
                i,
                f,
                g,
                o,
                tanh_c,
                c_prev: std::mem::replace(&mut c_prev, c),
                h_prev: std::mem::replace(&mut h_prev, h_new),
            });
        }
        steps
    }

    fn trace(&self, params: &[f64], ids: &[usize]) -> Trace {
        let l = &self.layout;
        let h = l.hidden;
        let t_len = ids.len();
        let fwd = self.run_direction(params, 0, ids);
        let bwd = self.run_direction(params, 1, ids);
        let hidden_of = |s: &Step| -> Vec<f64> { (0..h).map(|k| s.o[k] * s.tanh_c[k]).collect() };

        let mut states = Vec::with_capacity(t_len);
        for pos in 0..t_len {
            let mut state = hidden_of(&fwd[pos]);
            state.extend(hidden_of(&bwd[t_len - 1 - pos]));
            states.push(state);
        }
        let squashed: Vec<Vec<f64>> = states.iter().map(|s| s.iter().map(|v| v.tanh()).collect()).collect();
        let att = &params[l.att..l.att + 2 * h];
        let mut alpha: Vec<f64> = squashed.iter().map(|m| crate::linalg::dot(att, m)).collect();
        softmax_in_place(&mut alpha);

        let mut pooled = vec![0.0; 2 * h];
        for (a, s) in alpha.iter().zip(&states) {
            for (p, v) in pooled.iter_mut().zip(s) {
                *p += a * v;
            }
        }
        let pooled_tanh: Vec<f64> = pooled.iter().map(|v| v.tanh()).collect();
        let mut probs = params[l.out_b..l.out_b + l.classes].to_vec();
        gemv_add(&params[l.out_w..l.out_b], &pooled_tanh, &mut probs);
        softmax_in_place(&mut probs);
        Trace {
            steps: [fwd, bwd],
            states,
            squashed,
            alpha,
            pooled_tanh,
            probs,
        }
    }

    /// Class probabilities and per-token attention.
    pub fn forward(&self, tokens: &[String]) -> (Vec<f64>, AttentionRecord) {
        let ids = self.encode(tokens);
        let trace = self.trace(&self.params, &ids);
        let record = if tokens.is_empty() {
            AttentionRecord {
                tokens: Vec::new(),
                weights: Vec::new(),
            }
        } else {
            AttentionRecord {
                tokens: tokens.iter().take(self.max_len).cloned().collect(),
                weights: trace.alpha,
            }
        };
        (trace.probs, record)
    }

    pub fn predict_proba(&self, tokens: &[String]) -> Vec<f64> {
        self.forward(tokens).0
    }

    pub fn predict(&self, tokens: &[String]) -> usize {
        argmax(&self.predict_proba(tokens))
    }

    fn loss_with(&self, params: &[f64], ids: &[usize], label: usize) -> f64 {
        -self.trace(params, ids).probs[label].ln()
    }

    /// Cross-entropy of one example.
    pub fn loss(&self, tokens: &[String], label: usize) -> f64 {
        self.loss_with(&self.params, &self.encode(tokens), label)
    }

    /// Adds the gradient of one example's cross-entropy into `grad` and
    /// returns the loss.
    pub(crate) fn accumulate_gradient(&self, ids: &[usize], label: usize, grad: &mut [f64]) -> f64 {
        let l = &self.layout;
        let (h, d, c) = (l.hidden, l.dim, l.classes);
        let p = &self.params;
        let tr = self.trace(p, ids);
        let t_len = ids.len();
        let loss = -tr.probs[label].ln();

        // Output layer.
        let mut dlogits = tr.probs.clone();
        dlogits[label] -= 1.0;
        outer_add(&mut grad[l.out_w..l.out_b], &dlogits, &tr.pooled_tanh);
        for k in 0..c {
            grad[l.out_b + k] += dlogits[k];
        }
        let mut dpooled = vec![0.0; 2 * h];
        gemv_t_add(&p[l.out_w..l.out_b], &dlogits, &mut dpooled);
        for (dp, t) in dpooled.iter_mut().zip(&tr.pooled_tanh) {
            *dp *= 1.0 - t * t;
        }

        // Attention pooling.
        let att = &p[l.att..l.att + 2 * h];
        let dalpha: Vec<f64> = tr.states.iter().map(|s| crate::linalg::dot(s, &dpooled)).collect();
        let mean_dalpha: f64 = tr.alpha.iter().zip(&dalpha).map(|(a, da)| a * da).sum();
        let mut dstates: Vec<Vec<f64>> = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let ds = tr.alpha[t] * (dalpha[t] - mean_dalpha);
            let m = &tr.squashed[t];
            for k in 0..2 * h {
                grad[l.att + k] += ds * m[k];
            }
            let dstate: Vec<f64> = (0..2 * h)
                .map(|k| tr.alpha[t] * dpooled[k] + ds * att[k] * (1.0 - m[k] * m[k]))
                .collect();
            dstates.push(dstate);
        }

        // Backpropagation through time, per direction.
        for dir in 0..2 {
            let dl = l.dirs[dir];
            let w = &p[dl.w..dl.w + 4 * h * d];
            let u = &p[dl.u..dl.u + 4 * h * h];
            let steps = &tr.steps[dir];
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            let mut dz = vec![0.0; 4 * h];
            for (k, step) in steps.iter().enumerate().rev() {
                let pos = if dir == 0 { k } else { t_len - 1 - k };
                let dh_out = &dstates[pos][dir * h..(dir + 1) * h];
                for j in 0..h {
                    let dh = dh_out[j] + dh_next[j];
                    let tc = step.tanh_c[j];
                    let dc = dh * step.o[j] * (1.0 - tc * tc) + dc_next[j];
                    let (i, f, g, o) = (step.i[j], step.f[j], step.g[j], step.o[j]);
                    dz[j] = dc * g * i * (1.0 - i);
                    dz[h + j] = dc * step.c_prev[j] * f * (1.0 - f);
                    dz[2 * h + j] = dc * i * (1.0 - g * g);
                    dz[3 * h + j] = dh * tc * o * (1.0 - o);
                    dc_next[j] = dc * f;
                }
                let x = &p[l.emb + step.id * d..l.emb + (step.id + 1) * d];
                outer_add(&mut grad[dl.w..dl.w + 4 * h * d], &dz, x);
                outer_add(&mut grad[dl.u..dl.u + 4 * h * h], &dz, &step.h_prev);
                for (gb, z) in grad[dl.b..dl.b + 4 * h].iter_mut().zip(&dz) {
                    *gb += z;
                }
                if self.trainable_embeddings {
                    let ge = l.emb + step.id * d;
                    gemv_t_add(w, &dz, &mut grad[ge..ge + d]);
                }
                dh_next.iter_mut().for_each(|v| *v = 0.0);
                gemv_t_add(u, &dz, &mut dh_next);
            }
        }
        loss
    }

    /// Analytic gradient of one example's cross-entropy.
    pub fn gradient(&self, tokens: &[String], label: usize) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.layout.total];
        let loss = self.accumulate_gradient(&self.encode(tokens), label, &mut grad);
        (loss, grad)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, VERSION);
        w.strs(&self.class_names);
        w.strs(&self.vocab);
        w.usize(self.layout.dim);
        w.usize(self.layout.hidden);
        w.usize(self.max_len);
        w.bool(self.trainable_embeddings);
        w.f64s(&self.params);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::open(bytes, MAGIC)?;
        if version != VERSION {
            return Err(Error::ModelFormat(format!("unsupported BiLSTM model version {version}")));
        }
        let class_names = r.strs()?;
        let vocab = r.strs()?;
        let dim = r.usize()?;
        let hidden = r.usize()?;
        let max_len = r.usize()?;
        let trainable_embeddings = r.bool()?;
        let params = r.f64s()?;
        r.expect_end()?;
        let layout = Layout::new(vocab.len(), dim, hidden, class_names.len());
        if params.len() != layout.total {
            return Err(Error::ModelFormat(format!(
                "expected {} parameters, found {}",
                layout.total,
                params.len()
            )));
        }
        let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        if !index.contains_key(NULL_TOKEN) || !index.contains_key(UNK_TOKEN) {
            return Err(Error::ModelFormat("vocabulary lacks special tokens".into()));
        }
        Ok(BiLstmModel {
            class_names,
            vocab,
            index,
            layout,
            params,
            max_len,
            trainable_embeddings,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Largest relative error between analytic and central finite-difference
/// gradients over every parameter (embeddings included when trainable).
pub fn gradient_check(model: &BiLstmModel, tokens: &[String], label: usize, epsilon: f64) -> f64 {
    let ids = model.encode(tokens);
    let mut analytic = vec![0.0; model.layout.total];
    model.accumulate_gradient(&ids, label, &mut analytic);
    let mut probe = model.params.clone();
    let skip = if model.trainable_embeddings {
        0..0
    } else {
        model.layout.embedding_range()
    };
    let mut worst: f64 = 0.0;
    for idx in 0..probe.len() {
        if skip.contains(&idx) {
            continue;
        }
        let orig = probe[idx];
        probe[idx] = orig + epsilon;
        let plus = model.loss_with(&probe, &ids, label);
        probe[idx] = orig - epsilon;
        let minus = model.loss_with(&probe, &ids, label);
        probe[idx] = orig;
        let fd = (plus - minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic[idx], fd));
    }
    worst
}

/// Vocabulary for a training set: the two special tokens, then words with at
/// least `min_count` occurrences by descending count, ties alphabetical.
pub fn build_vocab(train: &[ProcessedTweet], min_count: usize) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in train {
        for w in &t.tokens {
            *counts.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut words: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(w, c)| c >= min_count && w != NULL_TOKEN && w != UNK_TOKEN)
        .collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    [NULL_TOKEN, UNK_TOKEN]
        .into_iter()
        .chain(words.into_iter().map(|(w, _)| w))
        .map(String::from)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_model(seed: u64, hidden: usize, dim: usize, words: &[&str]) -> BiLstmModel {
        let mut vocab = vec![NULL_TOKEN.to_string(), UNK_TOKEN.to_string()];
        vocab.extend(words.iter().map(|w| w.to_string()));
        let emb = EmbeddingTable::random(&vocab, dim, seed);
        let mut m = BiLstmModel::new(&emb, hidden, 16, seed + 1).unwrap();
        // Spread every parameter so no block sits at a symmetric point.
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        for p in m.params.iter_mut() {
            *p = rng.gen_range(-0.8..0.8);
        }
        m
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn single_token_gets_all_attention() {
        let m = tiny_model(1, 3, 4, &["a", "b"]);
        let (p, rec) = m.forward(&toks("a"));
        assert_eq!(rec.weights, vec![1.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attention_and_probabilities_normalize() {
        let m = tiny_model(2, 4, 3, &["a", "b", "c"]);
        let (p, rec) = m.forward(&toks("a b zzz c a"));
        assert_eq!(rec.weights.len(), 5);
        assert!((rec.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(rec.weights.iter().all(|&w| w >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversal_changes_output() {
        let m = tiny_model(3, 4, 3, &["a", "b", "c"]);
        let (p1, _) = m.forward(&toks("a b c"));
        let (p2, _) = m.forward(&toks("c b a"));
        assert_ne!(p1, p2);
    }

    #[test]
    fn empty_tweet_uses_null_token() {
        let m = tiny_model(4, 2, 2, &["a"]);
        let (p, rec) = m.forward(&[]);
        assert!(rec.tokens.is_empty() && rec.weights.is_empty());
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m.encode(&[]), vec![0]);
    }

    #[test]
    fn truncation_matches_prefix() {
        let mut m = tiny_model(5, 3, 3, &["a", "b"]);
        m.max_len = 4;
        let long = toks("a b a b b a a");
        let (p_long, rec) = m.forward(&long);
        let (p_prefix, _) = m.forward(&long[..4]);
        assert_eq!(p_long, p_prefix);
        assert_eq!(rec.tokens.len(), 4);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = tiny_model(6, 3, 4, &["a", "b", "c"]);
        let err = gradient_check(&m, &toks("a c b zzz"), 2, 1e-5);
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn frozen_embeddings_get_no_gradient() {
        let mut m = tiny_model(7, 2, 2, &["a", "b"]);
        m.trainable_embeddings = false;
        let (_, g) = m.gradient(&toks("a b"), 1);
        assert!(g[m.layout.embedding_range()].iter().all(|&v| v == 0.0));
        assert!(gradient_check(&m, &toks("a b"), 1, 1e-5) <= 1e-4);
    }

    #[test]
    fn saturated_correct_prediction_has_tiny_output_gradient() {
        let mut m = tiny_model(8, 3, 3, &["a", "b"]);
        let ob = m.layout.out_b;
        m.params[ob + 1] = 60.0;
        let (loss, g) = m.gradient(&toks("a b"), 1);
        assert!(loss < 1e-20);
        assert!(g[m.layout.output_range()].iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let m = tiny_model(9, 3, 3, &["a", "b"]);
        let back = BiLstmModel::from_bytes(&m.to_bytes()).unwrap();
        for t in ["a", "a b", "b b a zzz", ""] {
            let t = toks(t);
            let (p1, r1) = m.forward(&t);
            let (p2, r2) = back.forward(&t);
            assert_eq!(p1, p2);
            assert_eq!(r1, r2);
        }
    }

    #[test]
    fn vocab_starts_with_specials() {
        let train = vec![ProcessedTweet {
            id: "1".into(),
            tokens: toks("b a b"),
            label: Label::Normal,
        }];
        assert_eq!(build_vocab(&train, 1), vec![NULL_TOKEN, UNK_TOKEN, "b", "a"]);
        assert_eq!(build_vocab(&train, 2), vec![NULL_TOKEN, UNK_TOKEN, "b"]);
    }
}
