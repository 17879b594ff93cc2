//! Metrics, confusion matrices, t-SNE, and the report/plot artifacts.

mod plot;
mod report;
mod tsne;

use serde::{Deserialize, Serialize};

pub use plot::{heatmap_svg, scatter_svg, write_svg};
pub use report::{ModelResult, Report, StackedSection, REPORT_SCHEMA_VERSION};
pub use tsne::{tsne, write_tsne_csv, Projection2D, TsneConfig};

use crate::error::{Error, Result};

fn check_lengths(preds: &[usize], golds: &[usize]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(Error::DimensionMismatch {
            expected: golds.len(),
            got: preds.len(),
        });
    }
    if golds.is_empty() {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], golds: &[usize]) -> Result<f64> {
    check_lengths(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / golds.len() as f64)
}

/// Gold-by-predicted counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    /// `counts[gold][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// trace / total, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }
}

pub fn confusion(preds: &[usize], golds: &[usize], class_names: &[String]) -> Result<ConfusionMatrix> {
    if preds.len() != golds.len() {
        return Err(Error::DimensionMismatch {
            expected: golds.len(),
            got: preds.len(),
        });
    }
    let c = class_names.len();
    let mut counts = vec![vec![0u64; c]; c];
    for (&p, &g) in preds.iter().zip(golds) {
        for v in [p, g] {
            if v >= c {
                return Err(Error::UnknownClass(format!("class index {v} with {c} classes")));
            }
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix {
        class_names: class_names.to_vec(),
        counts,
    })
}

/// Row-normalized confusion fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionFractions {
    pub class_names: Vec<String>,
    pub fractions: Vec<Vec<f64>>,
    /// Gold classes without examples; their rows stay zero.
    pub empty_rows: Vec<usize>,
}

pub fn row_normalize(matrix: &ConfusionMatrix) -> ConfusionFractions {
    let mut empty_rows = Vec::new();
    let fractions = matrix
        .counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                empty_rows.push(i);
                vec![0.0; row.len()]
            } else {
                row.iter().map(|&v| v as f64 / total as f64).collect()
            }
        })
        .collect();
    ConfusionFractions {
        class_names: matrix.class_names.clone(),
        fractions,
        empty_rows,
    }
}

/// One-vs-rest scores for one class. A zero denominator yields 0 and sets
/// the matching flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

pub fn precision_recall_f1(matrix: &ConfusionMatrix) -> Vec<ClassScores> {
    let c = matrix.counts.len();
    (0..c)
        .map(|k| {
            let tp = matrix.counts[k][k] as f64;
            let predicted: u64 = (0..c).map(|g| matrix.counts[g][k]).sum();
            let actual: u64 = matrix.counts[k].iter().sum();
            let ratio = |num: f64, den: u64| if den == 0 { (0.0, true) } else { (num / den as f64, false) };
            let (precision, precision_undefined) = ratio(tp, predicted);
            let (recall, recall_undefined) = ratio(tp, actual);
            let (f1, f1_undefined) = if precision + recall == 0.0 {
                (0.0, true)
            } else {
                (2.0 * precision * recall / (precision + recall), false)
            };
            ClassScores {
                precision,
                recall,
                f1,
                precision_undefined,
                recall_undefined,
                f1_undefined,
            }
        })
        .collect()
}
