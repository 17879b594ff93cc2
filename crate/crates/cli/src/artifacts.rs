//! Output directory layout and the hash-linked manifests between stages.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tweetstack_core::corpus::{class_counts, read_jsonl, DatasetSplit, LabelMap, SplitSpec};
use tweetstack_core::digest::sha256_file;
use tweetstack_core::{ProcessedTweet, NUM_CLASSES};

use crate::error::{io, CliError, Result};

pub const SPLIT_NAMES: [&str; 3] = ["train", "valid", "test"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lex,
    Ngram,
    Rnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Lex, ModelKind::Ngram, ModelKind::Rnn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lex => "lex",
            ModelKind::Ngram => "ngram",
            ModelKind::Rnn => "rnn",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ModelKind::Lex => "lex.json",
            ModelKind::Ngram => "ngram.bin",
            ModelKind::Rnn => "rnn.bin",
        }
    }
}

/// Paths of every artifact under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout {
            root: root.to_path_buf(),
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn split_file(&self, name: &str) -> PathBuf {
        self.data_dir().join(format!("{name}.jsonl"))
    }

    pub fn data_manifest(&self) -> PathBuf {
        self.data_dir().join("manifest.json")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn model_file(&self, kind: ModelKind) -> PathBuf {
        self.models_dir().join(kind.file_name())
    }

    pub fn model_manifest(&self, kind: ModelKind) -> PathBuf {
        self.models_dir().join(format!("{}.manifest.json", kind.name()))
    }

    pub fn train_log(&self, kind: ModelKind) -> PathBuf {
        self.models_dir().join(format!("{}.log.tsv", kind.name()))
    }

    pub fn stacked_manifest(&self) -> PathBuf {
        self.models_dir().join("stacked.json")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.reports_dir().join(format!("{name}.toml"))
    }

    pub fn heatmap(&self, name: &str) -> PathBuf {
        self.reports_dir().join(format!("{name}_confusion.svg"))
    }

    pub fn tsne_csv(&self) -> PathBuf {
        self.reports_dir().join("tsne.csv")
    }

    pub fn tsne_svg(&self) -> PathBuf {
        self.reports_dir().join("tsne.svg")
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(tweetstack_core::Error::from)? + "\n";
    fs::write(path, text).map_err(|e| io(path, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path, command: &str) -> Result<T> {
    if !path.is_file() {
        return Err(CliError::MissingArtifact {
            path: path.to_path_buf(),
            command: command.to_string(),
        });
    }
    let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(tweetstack_core::Error::from)?)
}

pub(crate) fn check_hash(path: &Path, expected: &str, command: &str) -> Result<()> {
    if !path.is_file() {
        return Err(CliError::MissingArtifact {
            path: path.to_path_buf(),
            command: command.to_string(),
        });
    }
    let found = sha256_file(path)?;
    if found != expected {
        return Err(CliError::Stale {
            path: path.to_path_buf(),
            reason: format!("content hash {found} does not match the recorded {expected}; rerun `tweetstack {command}`"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub file: String,
    pub sha256: String,
    pub count: usize,
    pub class_counts: [usize; NUM_CLASSES],
    pub ids: Vec<String>,
}

const DATA_FORMAT: &str = "tweetstack-data";
const MODEL_FORMAT: &str = "tweetstack-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub format: String,
    pub version: u32,
    pub corpus_sha256: String,
    pub split: SplitSpec,
    pub label_map: LabelMap,
    pub splits: BTreeMap<String, SplitEntry>,
}

impl DataManifest {
    pub fn new(corpus_sha256: String, split: &DatasetSplit, label_map: LabelMap, layout: &Layout) -> Result<Self> {
        let mut splits = BTreeMap::new();
        for (name, part) in SPLIT_NAMES.iter().zip(split.parts()) {
            let path = layout.split_file(name);
            splits.insert(
                name.to_string(),
                SplitEntry {
                    file: format!("{name}.jsonl"),
                    sha256: sha256_file(&path)?,
                    count: part.len(),
                    class_counts: class_counts(part),
                    ids: part.iter().map(|t| t.id.clone()).collect(),
                },
            );
        }
        Ok(DataManifest {
            format: DATA_FORMAT.into(),
            version: 1,
            corpus_sha256,
            split: split.spec,
            label_map,
            splits,
        })
    }
}

/// The ingested splits after verifying every file against the manifest.
pub struct LoadedData {
    pub manifest: DataManifest,
    pub manifest_sha256: String,
    pub split: DatasetSplit,
}

pub fn load_data(layout: &Layout) -> Result<LoadedData> {
    let path = layout.data_manifest();
    let manifest: DataManifest = read_json(&path, "ingest")?;
    if manifest.format != DATA_FORMAT {
        return Err(CliError::Stale {
            path,
            reason: format!("not a {DATA_FORMAT} manifest"),
        });
    }
    let manifest_sha256 = sha256_file(&path)?;
    let mut parts: Vec<Vec<ProcessedTweet>> = Vec::new();
    for name in SPLIT_NAMES {
        let entry = manifest.splits.get(name).ok_or_else(|| CliError::Stale {
            path: path.clone(),
            reason: format!("manifest lacks the {name} split"),
        })?;
        let file = layout.data_dir().join(&entry.file);
        check_hash(&file, &entry.sha256, "ingest")?;
        parts.push(read_jsonl(&file)?);
    }
    let test = parts.pop().expect("three parts");
    let valid = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    let split = DatasetSplit {
        train,
        valid,
        test,
        spec: manifest.split,
    };
    split.check_disjoint()?;
    Ok(LoadedData {
        manifest,
        manifest_sha256,
        split,
    })
}

/// Written next to each trained base model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub model_file: String,
    pub sha256: String,
    pub data_manifest_sha256: String,
    pub train_examples: usize,
    pub config: serde_json::Value,
}

impl ModelManifest {
    pub fn new(
        kind: ModelKind,
        layout: &Layout,
        data_manifest_sha256: &str,
        train_examples: usize,
        config: serde_json::Value,
    ) -> Result<Self> {
        Ok(ModelManifest {
            format: MODEL_FORMAT.into(),
            version: 1,
            kind,
            model_file: kind.file_name().into(),
            sha256: sha256_file(&layout.model_file(kind))?,
            data_manifest_sha256: data_manifest_sha256.into(),
            train_examples,
            config,
        })
    }
}

/// Reads a model manifest and confirms the model file and the data it was
/// trained on are both current.
pub fn verified_model(layout: &Layout, kind: ModelKind, data_manifest_sha256: &str) -> Result<(PathBuf, ModelManifest)> {
    let command = format!("train {}", kind.name());
    let manifest: ModelManifest = read_json(&layout.model_manifest(kind), &command)?;
    if manifest.data_manifest_sha256 != data_manifest_sha256 {
        return Err(CliError::Stale {
            path: layout.model_file(kind),
            reason: format!("trained on different data; rerun `tweetstack {command}`"),
        });
    }
    let path = layout.models_dir().join(&manifest.model_file);
    check_hash(&path, &manifest.sha256, &command)?;
    Ok((path, manifest))
}

pub fn config_value<T: Serialize>(config: &T) -> serde_json::Value {
    serde_json::to_value(config).expect("configs serialize")
}
