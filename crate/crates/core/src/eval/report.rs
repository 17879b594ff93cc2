use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{precision_recall_f1, row_normalize, ConfusionMatrix};
use crate::ensemble::L2Trial;
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Scores of one model on one evaluation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub accuracy: f64,
    pub examples: u64,
    pub class_names: Vec<String>,
    /// Rows are gold classes.
    pub confusion_counts: Vec<Vec<u64>>,
    pub confusion_fractions: Vec<Vec<f64>>,
    pub empty_gold_rows: Vec<usize>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
}

impl ModelResult {
    pub fn from_confusion(matrix: &ConfusionMatrix) -> Self {
        let fractions = row_normalize(matrix);
        let scores = precision_recall_f1(matrix);
        ModelResult {
            accuracy: matrix.accuracy(),
            examples: matrix.total(),
            class_names: matrix.class_names.clone(),
            confusion_counts: matrix.counts.clone(),
            confusion_fractions: fractions.fractions,
            empty_gold_rows: fractions.empty_rows,
            precision: scores.iter().map(|s| s.precision).collect(),
            recall: scores.iter().map(|s| s.recall).collect(),
            f1: scores.iter().map(|s| s.f1).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedSection {
    pub accuracy: f64,
    pub selected_l2: f64,
    pub out_of_fold: bool,
    pub best_base_accuracy: f64,
    pub l2_trials: Vec<L2Trial>,
}

/// The evaluation report, serialized as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    /// Seeds, config digests, and artifact hashes.
    pub metadata: BTreeMap<String, String>,
    pub models: BTreeMap<String, ModelResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stacked: Option<StackedSection>,
}

impl Default for Report {
    fn default() -> Self {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            metadata: BTreeMap::new(),
            models: BTreeMap::new(),
            stacked: None,
        }
    }
}

impl Report {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("report serialization: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let report: Report = toml::from_str(text).map_err(|e| Error::Config(format!("report parse: {e}")))?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::ModelFormat(format!(
                "report schema {} is not {REPORT_SCHEMA_VERSION}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
