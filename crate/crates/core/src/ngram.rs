//! Bag-of-n-grams embedding classifier in the fastText style.
//!
//! A tweet is represented by the mean of the input embeddings of its
//! in-vocabulary words and of its hashed word n-grams (orders 2..=n_max);
//! a linear softmax layer sits on top. Word vectors double as an embedding
//! space for nearest-neighbor and analogy queries.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::corpus::{Label, ProcessedTweet};
use crate::error::{Error, Result};
use crate::linalg::{argmax, cosine, softmax_in_place, Matrix};

const MAGIC: &[u8; 4] = b"NGRM";
const VERSION: u32 = 1;

/// Joins the words of an n-gram before hashing. Tokens never contain it.
pub const NGRAM_SEPARATOR: char = ' ';

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_extend(FNV_OFFSET, bytes)
}

fn fnv1a64_extend(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgramTrainConfig {
    pub epochs: usize,
    /// Initial learning rate; decays linearly to zero over all updates.
    pub lr0: f64,
    pub n_max: usize,
    pub dim: usize,
    pub bucket_count: usize,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for NgramTrainConfig {
    fn default() -> Self {
        NgramTrainConfig {
            epochs: 10,
            lr0: 0.1,
            n_max: 3,
            dim: 100,
            bucket_count: 2_000_000,
            min_count: 1,
            seed: 0,
        }
    }
}

impl NgramTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || !(self.lr0 > 0.0) || self.n_max == 0 || self.dim == 0 || self.min_count == 0 {
            return Err(Error::Config(format!("invalid n-gram config {self:?}")));
        }
        if self.n_max > 1 && self.bucket_count == 0 {
            return Err(Error::Config("n_max > 1 needs a positive bucket_count".into()));
        }
        Ok(())
    }
}

/// Learning rate of update `step` out of `total` updates.
pub fn learning_rate(lr0: f64, step: usize, total: usize) -> f64 {
    lr0 * (1.0 - step as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramVocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    pub bucket_count: usize,
    pub n_max: usize,
}

impl NgramVocab {
    /// Words with at least `min_count` occurrences, ordered by descending
    /// count then lexicographically.
    pub fn build<'a, I>(docs: I, min_count: usize, bucket_count: usize, n_max: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for doc in docs {
            for t in doc {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count as u64).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_parts(
            kept.iter().map(|(w, _)| w.to_string()).collect(),
            kept.iter().map(|&(_, c)| c).collect(),
            bucket_count,
            n_max,
        )
    }

    fn from_parts(words: Vec<String>, counts: Vec<u64>, bucket_count: usize, n_max: usize) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        NgramVocab {
            words,
            counts,
            index,
            bucket_count,
            n_max,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.index.get(word).map(|&i| self.counts[i])
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Total input rows: words plus hash buckets.
    pub fn rows(&self) -> usize {
        self.words.len() + self.bucket_count
    }

    /// Bucket row of an n-gram given as its joined string.
    pub fn bucket_of(&self, joined: &str) -> usize {
        self.len() + (fnv1a64(joined.as_bytes()) % self.bucket_count as u64) as usize
    }
}

/// Input rows for a token sequence: in-vocabulary unigrams, then hashed
/// n-grams of each order 2..=n_max in position order. Out-of-vocabulary
/// words are skipped as unigrams but still take part in n-grams.
pub fn featurize(tokens: &[String], vocab: &NgramVocab) -> Vec<usize> {
    let mut out: Vec<usize> = tokens.iter().filter_map(|t| vocab.get(t)).collect();
    if vocab.n_max < 2 || vocab.bucket_count == 0 {
        return out;
    }
    let buckets = vocab.bucket_count as u64;
    let sep = NGRAM_SEPARATOR.to_string();
    for n in 2..=vocab.n_max.min(tokens.len()) {
        for start in 0..=tokens.len() - n {
            let mut h = fnv1a64(tokens[start].as_bytes());
            for t in &tokens[start + 1..start + n] {
                h = fnv1a64_extend(h, sep.as_bytes());
                h = fnv1a64_extend(h, t.as_bytes());
            }
            out.push(vocab.len() + (h % buckets) as usize);
        }
    }
    out
}

/// Input embedding table. Rows that training never touched keep their
/// seeded initial value, which is regenerated on demand instead of stored.
#[derive(Debug, Clone, PartialEq)]
struct InputTable {
    dim: usize,
    seed: u64,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl InputTable {
    fn initial_row(&self, idx: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(idx as u64);
        let bound = 1.0 / self.dim as f64;
        (0..self.dim).map(|_| rng.gen_range(-bound..bound)).collect()
    }

    fn row(&self, idx: usize) -> Cow<'_, [f64]> {
        match self.rows.get(&idx) {
            Some(r) => Cow::Borrowed(r),
            None => Cow::Owned(self.initial_row(idx)),
        }
    }

    fn row_mut(&mut self, idx: usize) -> &mut Vec<f64> {
        if !self.rows.contains_key(&idx) {
            let init = self.initial_row(idx);
            self.rows.insert(idx, init);
        }
        self.rows.get_mut(&idx).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    pub vocab: NgramVocab,
    pub class_names: Vec<String>,
    pub dim: usize,
    input: InputTable,
    /// C x dim.
    pub output: Matrix,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NgramFitLog {
    /// Mean training loss of each epoch, accumulated while training.
    pub epoch_losses: Vec<f64>,
    /// Learning rate used by the first and the last update.
    pub first_lr: f64,
    pub last_lr: f64,
}

fn labels_of(docs: &[ProcessedTweet]) -> Vec<usize> {
    docs.iter().map(|d| d.label.index()).collect()
}

/// Trains on the tweets with one SGD update per example.
pub fn fit(train: &[ProcessedTweet], config: &NgramTrainConfig) -> Result<(NgramModel, NgramFitLog)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let vocab = NgramVocab::build(
        train.iter().map(|d| d.tokens.as_slice()),
        config.min_count,
        config.bucket_count,
        config.n_max,
    );
    let class_names = Label::names();
    let c = class_names.len();
    let mut model = NgramModel {
        vocab,
        class_names,
        dim: config.dim,
        input: InputTable {
            dim: config.dim,
            seed: config.seed,
            rows: BTreeMap::new(),
        },
        output: Matrix::zeros(c, config.dim),
    };
    let features: Vec<Vec<usize>> = train.iter().map(|d| featurize(&d.tokens, &model.vocab)).collect();
    let labels = labels_of(train);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let total = config.epochs * train.len();
    let mut log = NgramFitLog::default();
    let mut step = 0;
    let mut hidden = vec![0.0; config.dim];
    let mut grad_hidden = vec![0.0; config.dim];
    let mut probs = vec![0.0; c];

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for &i in &order {
            let lr = learning_rate(config.lr0, step, total);
            if step == 0 {
                log.first_lr = lr;
            }
            log.last_lr = lr;
            step += 1;
            let feats = &features[i];
            if feats.is_empty() {
                continue;
            }
            model.mean_embedding(feats, &mut hidden);
            for (k, p) in probs.iter_mut().enumerate() {
                *p = crate::linalg::dot(model.output.row(k), &hidden);
            }
            softmax_in_place(&mut probs);
            let l = -probs[labels[i]].ln();
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            loss_sum += l;
            seen += 1;

            // Gradient of the loss with respect to the logits.
            probs[labels[i]] -= 1.0;
            grad_hidden.iter_mut().for_each(|g| *g = 0.0);
            for k in 0..c {
                let row = model.output.row_mut(k);
                for j in 0..config.dim {
                    grad_hidden[j] += probs[k] * row[j];
                    row[j] -= lr * probs[k] * hidden[j];
                }
            }
            let scale = lr / feats.len() as f64;
            for &idx in feats {
                let row = model.input.row_mut(idx);
                for (w, g) in row.iter_mut().zip(&grad_hidden) {
                    *w -= scale * g;
                }
            }
        }
        log.epoch_losses.push(if seen > 0 { loss_sum / seen as f64 } else { 0.0 });
    }
    Ok((model, log))
}

impl NgramModel {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn mean_embedding(&self, feats: &[usize], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if feats.is_empty() {
            return;
        }
        for &idx in feats {
            for (o, v) in out.iter_mut().zip(self.input.row(idx).iter()) {
                *o += v;
            }
        }
        let inv = 1.0 / feats.len() as f64;
        out.iter_mut().for_each(|v| *v *= inv);
    }

    /// Mean input embedding of the tweet's features; zero when it has none.
    pub fn sentence_embedding(&self, tokens: &[String]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mean_embedding(&featurize(tokens, &self.vocab), &mut out);
        out
    }

    pub fn predict_proba(&self, tokens: &[String]) -> Vec<f64> {
        let h = self.sentence_embedding(tokens);
        let mut p: Vec<f64> = (0..self.n_classes())
            .map(|k| crate::linalg::dot(self.output.row(k), &h))
            .collect();
        softmax_in_place(&mut p);
        p
    }

    pub fn predict(&self, tokens: &[String]) -> usize {
        argmax(&self.predict_proba(tokens))
    }

    pub fn word_vector(&self, word: &str) -> Result<Vec<f64>> {
        let idx = self
            .vocab
            .get(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
        Ok(self.input.row(idx).into_owned())
    }

    /// Overwrites a word's input vector.
    pub fn set_word_vector(&mut self, word: &str, vector: &[f64]) -> Result<()> {
        let idx = self
            .vocab
            .get(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        self.input.row_mut(idx).copy_from_slice(vector);
        Ok(())
    }

    /// Vocabulary words closest to `query` by cosine, skipping `exclude`.
    /// Ties are broken by vocabulary index.
    pub fn nearest_to_vector(&self, query: &[f64], k: usize, exclude: &[usize]) -> Vec<(String, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let mut scored: Vec<(usize, f64)> = (0..self.vocab.len())
            .filter(|i| !exclude.contains(i))
            .map(|i| (i, cosine(query, &self.input.row(i))))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored
            .into_iter()
            .take(k)
            .map(|(i, s)| (self.vocab.words[i].clone(), s))
            .collect()
    }

    pub fn nearest_neighbors(&self, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
        let idx = self
            .vocab
            .get(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_string()))?;
        Ok(self.nearest_to_vector(&self.input.row(idx), k, &[idx]))
    }

    /// Neighbors of `vec(a) - vec(b) + vec(c)`, excluding the three operands.
    pub fn analogy(&self, a: &str, b: &str, c: &str, k: usize) -> Result<Vec<(String, f64)>> {
        let idx = |w: &str| {
            self.vocab
                .get(w)
                .ok_or_else(|| Error::OutOfVocabulary(w.to_string()))
        };
        let (ia, ib, ic) = (idx(a)?, idx(b)?, idx(c)?);
        let (va, vb, vc) = (self.input.row(ia), self.input.row(ib), self.input.row(ic));
        let query: Vec<f64> = (0..self.dim).map(|j| va[j] - vb[j] + vc[j]).collect();
        Ok(self.nearest_to_vector(&query, k, &[ia, ib, ic]))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, VERSION);
        w.strs(&self.class_names);
        w.usize(self.dim);
        w.usize(self.vocab.n_max);
        w.usize(self.vocab.bucket_count);
        w.u64(self.input.seed);
        w.strs(&self.vocab.words);
        w.usize(self.vocab.counts.len());
        for &c in &self.vocab.counts {
            w.u64(c);
        }
        w.f64s(self.output.as_slice());
        w.usize(self.input.rows.len());
        for (&idx, row) in &self.input.rows {
            w.usize(idx);
            for &v in row {
                w.f64(v);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::open(bytes, MAGIC)?;
        if version != VERSION {
            return Err(Error::ModelFormat(format!("unsupported n-gram model version {version}")));
        }
        let class_names = r.strs()?;
        let dim = r.usize()?;
        let n_max = r.usize()?;
        let bucket_count = r.usize()?;
        let seed = r.u64()?;
        let words = r.strs()?;
        let n_counts = r.usize()?;
        if n_counts != words.len() {
            return Err(Error::ModelFormat("vocabulary counts do not match words".into()));
        }
        let counts = (0..n_counts).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let output = Matrix::from_vec(class_names.len(), dim, r.f64s()?)?;
        let vocab = NgramVocab::from_parts(words, counts, bucket_count, n_max);
        let n_rows = r.usize()?;
        let mut rows = BTreeMap::new();
        for _ in 0..n_rows {
            let idx = r.usize()?;
            if idx >= vocab.rows() {
                return Err(Error::ModelFormat(format!("input row {idx} out of range")));
            }
            rows.insert(idx, (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
        }
        r.expect_end()?;
        Ok(NgramModel {
            vocab,
            class_names,
            dim,
            input: InputTable { dim, seed, rows },
            output,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
