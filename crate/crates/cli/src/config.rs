//! Declarative run configuration (TOML) with per-stage seeds.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tweetstack_core::corpus::{Format, LabelMap, SplitSpec};
use tweetstack_core::ensemble::MetaConfig;
use tweetstack_core::eval::TsneConfig;
use tweetstack_core::lexfeat::Lexicon;
use tweetstack_core::linmodel::TrainConfig;
use tweetstack_core::models::LexTrainConfig;
use tweetstack_core::ngram::NgramTrainConfig;
use tweetstack_core::rnn::RnnTrainConfig;
use tweetstack_core::synth::SynthConfig;

use crate::error::{io, CliError, Result};

/// Value of `paths.lexicon` selecting the bundled demo lexicon.
pub const BUILTIN_LEXICON: &str = "builtin:demo";

/// Offsets added to the global seed for each stage.
pub mod seed_offset {
    pub const SYNTH: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const OVERSAMPLE: u64 = 2;
    pub const LEX: u64 = 3;
    pub const NGRAM: u64 = 4;
    pub const RNN: u64 = 5;
    pub const STACK: u64 = 6;
    pub const TSNE: u64 = 7;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    /// csv, tsv or jsonl; guessed from the extension when absent.
    pub format: Option<String>,
    /// A `.dic` file or `builtin:demo`.
    pub lexicon: Option<PathBuf>,
    /// Optional text word vectors for the BiLSTM.
    pub embeddings: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus: None,
            format: None,
            lexicon: None,
            embeddings: None,
            output_dir: PathBuf::from("tweetstack-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        SplitConfig {
            ratios: s.ratios,
            stratified: s.stratified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    /// `from=to` pairs, e.g. `spam=normal`.
    pub merge: Vec<String>,
    /// Randomly oversample the train split up to the majority class.
    pub oversample: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    pub l2: f64,
    pub prune_threshold: f64,
}

impl Default for LexConfig {
    fn default() -> Self {
        let d = LexTrainConfig::default();
        LexConfig {
            learning_rate: d.logreg.learning_rate,
            epochs: d.logreg.epochs,
            batch_size: d.logreg.batch_size,
            l2: d.logreg.l2,
            prune_threshold: d.prune_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NgramConfig {
    pub epochs: usize,
    pub lr0: f64,
    pub n_max: usize,
    pub dim: usize,
    pub bucket_count: usize,
    pub min_count: usize,
}

impl Default for NgramConfig {
    fn default() -> Self {
        let d = NgramTrainConfig::default();
        NgramConfig {
            epochs: d.epochs,
            lr0: d.lr0,
            n_max: d.n_max,
            dim: d.dim,
            bucket_count: d.bucket_count,
            min_count: d.min_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnnConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    pub embedding_dim: usize,
    pub batch_size: usize,
    pub max_len: usize,
    pub clip_norm: f64,
    pub trainable_embeddings: bool,
    pub min_count: usize,
}

impl Default for RnnConfig {
    fn default() -> Self {
        let d = RnnTrainConfig::default();
        RnnConfig {
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            hidden: d.hidden,
            embedding_dim: d.embedding_dim,
            batch_size: d.batch_size,
            max_len: d.max_len,
            clip_norm: d.clip_norm,
            trainable_embeddings: d.trainable_embeddings,
            min_count: d.min_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_grid: Vec<f64>,
    pub out_of_fold: bool,
    pub folds: usize,
}

impl Default for StackConfig {
    fn default() -> Self {
        let d = MetaConfig::default();
        StackConfig {
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            l2_grid: d.l2_grid,
            out_of_fold: false,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneSection {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Random subset size; all test tweets when absent.
    pub sample: Option<usize>,
}

impl Default for TsneSection {
    fn default() -> Self {
        let d = TsneConfig::default();
        TsneSection {
            perplexity: d.perplexity,
            iterations: d.iterations,
            learning_rate: d.learning_rate,
            sample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub size: usize,
    pub confusion_rate: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        SynthSection {
            size: d.size,
            confusion_rate: d.confusion_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub split: SplitConfig,
    pub labels: LabelConfig,
    pub lex: LexConfig,
    pub ngram: NgramConfig,
    pub rnn: RnnConfig,
    pub stack: StackConfig,
    pub tsne: TsneSection,
    pub synth: SynthSection,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() && p.as_os_str() != BUILTIN_LEXICON {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Parses a config file; relative paths are taken from the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [&mut p.corpus, &mut p.lexicon, &mut p.embeddings].into_iter().flatten() {
            resolve(base, slot);
        }
        resolve(base, &mut p.output_dir);
    }

    pub fn stage_seed(&self, offset: u64) -> u64 {
        self.seed.wrapping_add(offset)
    }

    /// The config without machine-specific paths, for hashing into reports.
    pub fn portable_digest(&self) -> String {
        let mut c = self.clone();
        c.paths = PathsConfig::default();
        tweetstack_core::digest::sha256_hex(toml::to_string(&c).expect("config serializes").as_bytes())
    }

    pub fn corpus(&self) -> Result<(&Path, Format)> {
        let path = self
            .paths
            .corpus
            .as_deref()
            .ok_or_else(|| CliError::Config("paths.corpus is not set".into()))?;
        let format = match &self.paths.format {
            Some(f) => f.parse()?,
            None => Format::from_path(path).ok_or_else(|| {
                CliError::Config(format!("cannot tell the format of {}; set paths.format", path.display()))
            })?,
        };
        Ok((path, format))
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            ratios: self.split.ratios,
            seed: self.stage_seed(seed_offset::SPLIT),
            stratified: self.split.stratified,
        }
    }

    pub fn label_map(&self) -> Result<LabelMap> {
        Ok(LabelMap::parse(&self.labels.merge)?)
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        let path = self.paths.lexicon.as_deref().ok_or_else(|| {
            CliError::Config(format!("train lex needs paths.lexicon (a .dic file or {BUILTIN_LEXICON:?})"))
        })?;
        if path.as_os_str() == BUILTIN_LEXICON {
            return Ok(Lexicon::demo());
        }
        if !path.is_file() {
            return Err(CliError::Config(format!("lexicon {} does not exist", path.display())));
        }
        Ok(tweetstack_core::lexfeat::parse_lexicon(path)?)
    }

    pub fn lex_train(&self) -> LexTrainConfig {
        LexTrainConfig {
            logreg: TrainConfig {
                learning_rate: self.lex.learning_rate,
                epochs: self.lex.epochs,
                batch_size: self.lex.batch_size,
                l2: self.lex.l2,
                seed: self.stage_seed(seed_offset::LEX),
            },
            prune_threshold: self.lex.prune_threshold,
        }
    }

    pub fn ngram_train(&self) -> NgramTrainConfig {
        let n = &self.ngram;
        NgramTrainConfig {
            epochs: n.epochs,
            lr0: n.lr0,
            n_max: n.n_max,
            dim: n.dim,
            bucket_count: n.bucket_count,
            min_count: n.min_count,
            seed: self.stage_seed(seed_offset::NGRAM),
        }
    }

    pub fn rnn_train(&self) -> RnnTrainConfig {
        let r = &self.rnn;
        RnnTrainConfig {
            epochs: r.epochs,
            learning_rate: r.learning_rate,
            hidden: r.hidden,
            embedding_dim: r.embedding_dim,
            batch_size: r.batch_size,
            max_len: r.max_len,
            clip_norm: r.clip_norm,
            trainable_embeddings: r.trainable_embeddings,
            min_count: r.min_count,
            seed: self.stage_seed(seed_offset::RNN),
        }
    }

    pub fn meta(&self) -> MetaConfig {
        MetaConfig {
            learning_rate: self.stack.learning_rate,
            epochs: self.stack.epochs,
            l2_grid: self.stack.l2_grid.clone(),
            seed: self.stage_seed(seed_offset::STACK),
        }
    }

    pub fn tsne_config(&self) -> TsneConfig {
        TsneConfig {
            perplexity: self.tsne.perplexity,
            iterations: self.tsne.iterations,
            learning_rate: self.tsne.learning_rate,
            seed: self.stage_seed(seed_offset::TSNE),
            ..TsneConfig::default()
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            size: self.synth.size,
            seed: self.stage_seed(seed_offset::SYNTH),
            confusion_rate: self.synth.confusion_rate,
        }
    }
}
