//! The three base classifiers behind one probabilistic interface, and the
//! lexicon-feature logistic regression pipeline.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, ProcessedTweet};
use crate::error::{Error, Result};
use crate::lexfeat::{extract, extract_matrix, fit_scaler, prune_correlated, Lexicon, PruneReport, Scaler};
use crate::linalg::argmax;
use crate::linmodel::{self, FitLog, LogRegModel, TrainConfig};
use crate::ngram::NgramModel;
use crate::rnn::BiLstmModel;

/// A fitted model that maps a token sequence to class probabilities in
/// label order.
pub trait Classifier {
    fn class_probabilities(&self, tokens: &[String]) -> Vec<f64>;

    fn classify(&self, tokens: &[String]) -> usize {
        argmax(&self.class_probabilities(tokens))
    }
}

impl Classifier for NgramModel {
    fn class_probabilities(&self, tokens: &[String]) -> Vec<f64> {
        self.predict_proba(tokens)
    }
}

impl Classifier for BiLstmModel {
    fn class_probabilities(&self, tokens: &[String]) -> Vec<f64> {
        self.predict_proba(tokens)
    }
}

impl<C: Classifier + ?Sized> Classifier for Box<C> {
    fn class_probabilities(&self, tokens: &[String]) -> Vec<f64> {
        (**self).class_probabilities(tokens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexTrainConfig {
    pub logreg: TrainConfig,
    /// Absolute Pearson correlation above which a feature is dropped.
    pub prune_threshold: f64,
}

impl Default for LexTrainConfig {
    fn default() -> Self {
        LexTrainConfig {
            logreg: TrainConfig::default(),
            prune_threshold: 0.9,
        }
    }
}

/// Lexicon features, standardized, pruned, then logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconClassifier {
    pub lexicon: Lexicon,
    pub scaler: Scaler,
    /// Feature columns surviving the correlation pruning.
    pub kept: Vec<usize>,
    pub model: LogRegModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexFitLog {
    pub prune: PruneReport,
    pub fit: FitLog,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    classifier: LexiconClassifier,
}

const FORMAT: &str = "tweetstack-lexicon-lr";
const FORMAT_VERSION: u32 = 1;

impl LexiconClassifier {
    pub fn fit(train: &[ProcessedTweet], lexicon: &Lexicon, config: &LexTrainConfig) -> Result<(Self, LexFitLog)> {
        if !(config.prune_threshold > 0.0 && config.prune_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "prune threshold {} outside (0, 1]",
                config.prune_threshold
            )));
        }
        let raw = extract_matrix(train.iter().map(|t| t.tokens.as_slice()), lexicon);
        let names = lexicon.feature_names();
        let scaler = fit_scaler(&raw, &names)?;
        let scaled = scaler.apply(&raw)?;
        let prune = prune_correlated(&scaled, config.prune_threshold)?;
        let x = scaled.select_columns(&prune.kept);
        let y: Vec<usize> = train.iter().map(|t| t.label.index()).collect();
        let kept_names = prune.kept.iter().map(|&j| names[j].clone()).collect();
        let (model, fit) = linmodel::fit(&x, &y, Label::names(), kept_names, &config.logreg)?;
        let classifier = LexiconClassifier {
            lexicon: lexicon.clone(),
            scaler,
            kept: prune.kept.clone(),
            model,
        };
        Ok((classifier, LexFitLog { prune, fit }))
    }

    /// Standardized, pruned feature row for one tweet.
    pub fn features(&self, tokens: &[String]) -> Vec<f64> {
        let mut row = extract(tokens, &self.lexicon).values;
        self.scaler.apply_row(&mut row);
        self.kept.iter().map(|&j| row[j]).collect()
    }

    pub fn predict_proba(&self, tokens: &[String]) -> Vec<f64> {
        self.model
            .predict_row(&self.features(tokens))
            .expect("kept columns match the fitted model")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Envelope {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            classifier: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope = serde_json::from_str(text)?;
        if env.format != FORMAT || env.version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "expected {FORMAT} v{FORMAT_VERSION}, found {} v{}",
                env.format, env.version
            )));
        }
        let c = env.classifier;
        if c.kept.len() != c.model.n_features() || c.kept.iter().any(|&j| j >= c.scaler.means.len()) {
            return Err(Error::ModelFormat("kept columns disagree with the model".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

impl Classifier for LexiconClassifier {
    fn class_probabilities(&self, tokens: &[String]) -> Vec<f64> {
        self.predict_proba(tokens)
    }
}
