//! Stacking: the three base models' class probabilities become a 12-wide
//! feature row for a meta logistic regression.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetSplit, Label, ProcessedTweet, NUM_CLASSES};
use crate::digest::{sha256_file, verify_file};
use crate::error::{Error, Result};
use crate::linalg::{argmax, Matrix};
use crate::linmodel::{self, LogRegModel, TrainConfig};
use crate::models::{Classifier, LexiconClassifier};
use crate::ngram::NgramModel;
use crate::rnn::BiLstmModel;

/// Base model order inside every meta row.
pub const BASE_NAMES: [&str; 3] = ["lex", "ngram", "rnn"];

/// Allowed deviation of a probability block's sum from 1.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Candidate l2 strengths; the best on the validation split wins.
    pub l2_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            learning_rate: 0.1,
            epochs: 300,
            l2_grid: vec![0.0, 1e-4, 1e-2],
            seed: 0,
        }
    }
}

/// Concatenates per-model probability blocks after checking each is a
/// distribution.
pub fn build_meta_features(blocks: &[&[f64]]) -> Result<Vec<f64>> {
    let mut row = Vec::with_capacity(blocks.len() * NUM_CLASSES);
    for (b, block) in blocks.iter().enumerate() {
        if block.len() != NUM_CLASSES {
            return Err(Error::DimensionMismatch {
                expected: NUM_CLASSES,
                got: block.len(),
            });
        }
        let sum: f64 = block.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE || block.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::NotStochastic { block: b, sum });
        }
        row.extend_from_slice(block);
    }
    Ok(row)
}

/// One meta row per tweet.
pub fn meta_matrix(bases: &[&dyn Classifier], tweets: &[ProcessedTweet]) -> Result<Matrix> {
    let width = bases.len() * NUM_CLASSES;
    let mut data = Vec::with_capacity(tweets.len() * width);
    for t in tweets {
        let probs: Vec<Vec<f64>> = bases.iter().map(|b| b.class_probabilities(&t.tokens)).collect();
        let blocks: Vec<&[f64]> = probs.iter().map(Vec::as_slice).collect();
        data.extend(build_meta_features(&blocks)?);
    }
    Matrix::from_vec(tweets.len(), width, data)
}

fn meta_feature_names() -> Vec<String> {
    BASE_NAMES
        .iter()
        .flat_map(|b| Label::ALL.iter().map(move |l| format!("{b}:{l}")))
        .collect()
}

fn labels(tweets: &[ProcessedTweet]) -> Vec<usize> {
    tweets.iter().map(|t| t.label.index()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Trial {
    pub l2: f64,
    pub valid_accuracy: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub base_names: Vec<String>,
    pub model: LogRegModel,
    pub trials: Vec<L2Trial>,
    /// Whether the training rows came from out-of-fold base predictions.
    pub out_of_fold: bool,
}

impl MetaModel {
    pub fn selected_l2(&self) -> f64 {
        self.model.l2
    }

    pub fn predict_row(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.model.predict_row(features)
    }
}

fn check_bases(n: usize) -> Result<()> {
    if n != BASE_NAMES.len() {
        return Err(Error::Config(format!(
            "stacking needs {} base models, got {n}",
            BASE_NAMES.len()
        )));
    }
    Ok(())
}

/// Fits the meta model for each l2 candidate on `(train_x, train_y)` and
/// keeps the one with the best validation accuracy (then lower validation
/// loss, then earlier in the grid).
pub fn select_meta(
    train_x: &Matrix,
    train_y: &[usize],
    valid_x: &Matrix,
    valid_y: &[usize],
    config: &MetaConfig,
) -> Result<(LogRegModel, Vec<L2Trial>)> {
    if config.l2_grid.is_empty() {
        return Err(Error::Config("empty l2 grid".into()));
    }
    let mut best: Option<(LogRegModel, L2Trial)> = None;
    let mut trials = Vec::new();
    for &l2 in &config.l2_grid {
        let tc = TrainConfig {
            learning_rate: config.learning_rate,
            epochs: config.epochs,
            batch_size: None,
            l2,
            seed: config.seed,
        };
        let (model, _) = linmodel::fit(train_x, train_y, Label::names(), meta_feature_names(), &tc)?;
        let preds = model.predict(valid_x)?;
        let correct = preds.iter().zip(valid_y).filter(|(p, g)| p == g).count();
        let trial = L2Trial {
            l2,
            valid_accuracy: correct as f64 / valid_y.len().max(1) as f64,
            valid_loss: linmodel::loss(&LogRegModel { l2: 0.0, ..model.clone() }, valid_x, valid_y)?,
        };
        trials.push(trial);
        let better = match &best {
            None => true,
            Some((_, b)) => {
                trial.valid_accuracy > b.valid_accuracy
                    || (trial.valid_accuracy == b.valid_accuracy && trial.valid_loss < b.valid_loss)
            }
        };
        if better {
            best = Some((model, trial));
        }
    }
    Ok((best.expect("grid is non-empty").0, trials))
}

/// Meta model on in-sample base predictions over the train split, l2
/// chosen on the validation split. The test split is only used for the
/// disjointness check.
pub fn fit_meta(bases: &[&dyn Classifier], split: &DatasetSplit, config: &MetaConfig) -> Result<MetaModel> {
    check_bases(bases.len())?;
    split.check_disjoint()?;
    if split.train.is_empty() || split.valid.is_empty() {
        return Err(Error::InsufficientData("stacking needs train and validation rows".into()));
    }
    let train_x = meta_matrix(bases, &split.train)?;
    let valid_x = meta_matrix(bases, &split.valid)?;
    let (model, trials) = select_meta(&train_x, &labels(&split.train), &valid_x, &labels(&split.valid), config)?;
    Ok(MetaModel {
        base_names: BASE_NAMES.iter().map(|s| s.to_string()).collect(),
        model,
        trials,
        out_of_fold: false,
    })
}

/// Trains a base model from scratch; used by out-of-fold stacking.
pub trait BaseTrainer {
    fn train(&self, train: &[ProcessedTweet]) -> Result<Box<dyn Classifier>>;
}

/// Fold index per training row: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Leakage-reduced stacking: meta training rows come from base models that
/// never saw them (k-fold), validation rows from bases fitted on the whole
/// train split. Returns the meta model and those full-train bases.
pub fn fit_meta_out_of_fold(
    trainers: &[&dyn BaseTrainer],
    split: &DatasetSplit,
    config: &MetaConfig,
    folds: usize,
) -> Result<(MetaModel, Vec<Box<dyn Classifier>>)> {
    check_bases(trainers.len())?;
    split.check_disjoint()?;
    if folds < 2 || folds > split.train.len() {
        return Err(Error::Config(format!(
            "{folds} folds for {} training rows",
            split.train.len()
        )));
    }
    let n = split.train.len();
    let width = trainers.len() * NUM_CLASSES;
    let assignment = fold_assignment(n, folds, config.seed);
    let mut oof = Matrix::zeros(n, width);
    for k in 0..folds {
        let inside: Vec<ProcessedTweet> = (0..n)
            .filter(|&i| assignment[i] != k)
            .map(|i| split.train[i].clone())
            .collect();
        let held: Vec<usize> = (0..n).filter(|&i| assignment[i] == k).collect();
        let fold_bases = trainers.iter().map(|t| t.train(&inside)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&dyn Classifier> = fold_bases.iter().map(|b| b.as_ref()).collect();
        let held_tweets: Vec<ProcessedTweet> = held.iter().map(|&i| split.train[i].clone()).collect();
        let rows = meta_matrix(&refs, &held_tweets)?;
        for (r, &i) in held.iter().enumerate() {
            oof.row_mut(i).copy_from_slice(rows.row(r));
        }
    }
    let full = trainers.iter().map(|t| t.train(&split.train)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&dyn Classifier> = full.iter().map(|b| b.as_ref()).collect();
    let valid_x = meta_matrix(&refs, &split.valid)?;
    let (model, trials) = select_meta(&oof, &labels(&split.train), &valid_x, &labels(&split.valid), config)?;
    let meta = MetaModel {
        base_names: BASE_NAMES.iter().map(|s| s.to_string()).collect(),
        model,
        trials,
        out_of_fold: true,
    };
    Ok((meta, full))
}

/// Meta prediction for one tweet given any three bases.
pub fn stacked_proba(bases: &[&dyn Classifier], meta: &MetaModel, tokens: &[String]) -> Result<Vec<f64>> {
    let probs: Vec<Vec<f64>> = bases.iter().map(|b| b.class_probabilities(tokens)).collect();
    let blocks: Vec<&[f64]> = probs.iter().map(Vec::as_slice).collect();
    meta.predict_row(&build_meta_features(&blocks)?)
}

/// The fitted ensemble with concrete base models.
#[derive(Debug, Clone)]
pub struct StackedModel {
    pub lex: LexiconClassifier,
    pub ngram: NgramModel,
    pub rnn: BiLstmModel,
    pub meta: MetaModel,
}

impl StackedModel {
    pub fn bases(&self) -> [&dyn Classifier; 3] {
        [&self.lex, &self.ngram, &self.rnn]
    }

    pub fn predict_proba(&self, tokens: &[String]) -> Result<Vec<f64>> {
        stacked_proba(&self.bases(), &self.meta, tokens)
    }

    pub fn predict(&self, tokens: &[String]) -> Result<(usize, Vec<f64>)> {
        let p = self.predict_proba(tokens)?;
        Ok((argmax(&p), p))
    }

    /// Loads the manifest and every base file it lists, verifying hashes.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = StackedManifest::read(manifest_path)?;
        let paths = manifest.verified_paths(manifest_path)?;
        Ok(StackedModel {
            lex: LexiconClassifier::load(&paths[0])?,
            ngram: NgramModel::load(&paths[1])?,
            rnn: BiLstmModel::load(&paths[2])?,
            meta: manifest.meta,
        })
    }
}

impl Classifier for StackedModel {
    fn class_probabilities(&self, tokens: &[String]) -> Vec<f64> {
        self.predict_proba(tokens).expect("fitted bases emit distributions")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseRef {
    pub name: String,
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub sha256: String,
}

const MANIFEST_FORMAT: &str = "tweetstack-stacked";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedManifest {
    pub format: String,
    pub version: u32,
    pub bases: Vec<BaseRef>,
    pub meta: MetaModel,
    /// Free-form upstream hashes (e.g. of the data the bases saw).
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl StackedManifest {
    /// Hashes the three base files; `base_paths` are given relative to
    /// `dir`, where the manifest will live.
    pub fn new(dir: &Path, base_paths: [&Path; 3], meta: MetaModel) -> Result<Self> {
        let bases = BASE_NAMES
            .iter()
            .zip(base_paths)
            .map(|(name, rel)| {
                Ok(BaseRef {
                    name: name.to_string(),
                    path: rel.to_path_buf(),
                    sha256: sha256_file(&dir.join(rel))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StackedManifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            bases,
            meta,
            provenance: BTreeMap::new(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: StackedManifest = serde_json::from_str(&text)?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(Error::ModelFormat(format!(
                "expected {MANIFEST_FORMAT} v{MANIFEST_VERSION}, found {} v{}",
                m.format, m.version
            )));
        }
        let names: Vec<&str> = m.bases.iter().map(|b| b.name.as_str()).collect();
        if names != BASE_NAMES || m.meta.base_names != BASE_NAMES {
            return Err(Error::ModelFormat(format!("unexpected base order {names:?}")));
        }
        Ok(m)
    }

    /// Absolute base paths after checking every content hash.
    pub fn verified_paths(&self, manifest_path: &Path) -> Result<Vec<PathBuf>> {
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        self.bases
            .iter()
            .map(|b| {
                let p = dir.join(&b.path);
                verify_file(&p, &b.sha256)?;
                Ok(p)
            })
            .collect()
    }
}
