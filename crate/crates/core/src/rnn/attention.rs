use std::collections::BTreeMap;
use std::io::Write;

use super::{AttentionRecord, BiLstmModel, NULL_TOKEN, UNK_TOKEN};
use crate::corpus::{is_punctuation_token, is_sentinel, Label, ProcessedTweet, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttentionGrouping {
    #[default]
    Gold,
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionOptions {
    pub min_count: usize,
    /// `None` keeps every word above `min_count`.
    pub top_k: Option<usize>,
    pub grouping: AttentionGrouping,
    /// Keep punctuation tokens in the tables.
    pub include_punctuation: bool,
}

impl Default for AttentionOptions {
    fn default() -> Self {
        AttentionOptions {
            min_count: 5,
            top_k: Some(20),
            grouping: AttentionGrouping::Gold,
            include_punctuation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionEntry {
    pub word: String,
    pub mean_attention: f64,
    pub count: usize,
}

/// One ranked table per class, in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClasswiseAttention {
    pub tables: [Vec<AttentionEntry>; NUM_CLASSES],
}

fn excluded(word: &str, options: &AttentionOptions) -> bool {
    is_sentinel(word)
        || word == NULL_TOKEN
        || word == UNK_TOKEN
        || (!options.include_punctuation && is_punctuation_token(word))
}

/// Averages attention per (class, word) over pre-computed records; the
/// grouping option is ignored since records arrive already labeled.
/// Ranking is by mean attention descending, then count descending, then word.
pub fn aggregate_attention<'a, I>(records: I, options: &AttentionOptions) -> ClasswiseAttention
where
    I: IntoIterator<Item = (Label, &'a AttentionRecord)>,
{
    let mut sums: [BTreeMap<&str, (f64, usize)>; NUM_CLASSES] = Default::default();
    for (label, record) in records {
        for (word, &w) in record.tokens.iter().zip(&record.weights) {
            if excluded(word, options) {
                continue;
            }
            let slot = sums[label.index()].entry(word.as_str()).or_insert((0.0, 0));
            slot.0 += w;
            slot.1 += 1;
        }
    }
    let tables = sums.map(|class| {
        let mut entries: Vec<AttentionEntry> = class
            .into_iter()
            .filter(|&(_, (_, n))| n >= options.min_count)
            .map(|(word, (sum, count))| AttentionEntry {
                word: word.to_string(),
                mean_attention: sum / count as f64,
                count,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.mean_attention
                .total_cmp(&a.mean_attention)
                .then(b.count.cmp(&a.count))
                .then(a.word.cmp(&b.word))
        });
        if let Some(k) = options.top_k {
            entries.truncate(k);
        }
        entries
    });
    ClasswiseAttention { tables }
}

/// Runs the model over every tweet of every split and aggregates the
/// attention weights by gold (or predicted) class.
pub fn classwise_attention(
    model: &BiLstmModel,
    splits: &[&[ProcessedTweet]],
    options: &AttentionOptions,
) -> ClasswiseAttention {
    let records: Vec<(Label, AttentionRecord)> = splits
        .iter()
        .flat_map(|s| s.iter())
        .map(|t| {
            let (probs, record) = model.forward(&t.tokens);
            let label = match options.grouping {
                AttentionGrouping::Gold => t.label,
                AttentionGrouping::Predicted => {
                    Label::from_index(crate::linalg::argmax(&probs)).expect("model has four classes")
                }
            };
            (label, record)
        })
        .collect();
    aggregate_attention(records.iter().map(|(l, r)| (*l, r)), options)
}

/// `class<TAB>word<TAB>mean_attention<TAB>count` with a header row.
pub fn write_attention_tsv<W: Write>(out: &mut W, tables: &ClasswiseAttention) -> std::io::Result<()> {
    writeln!(out, "class\tword\tmean_attention\tcount")?;
    for (label, table) in Label::ALL.iter().zip(&tables.tables) {
        for e in table {
            writeln!(out, "{label}\t{}\t{}\t{}", e.word, e.mean_attention, e.count)?;
        }
    }
    Ok(())
}

impl ClasswiseAttention {
    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        write_attention_tsv(&mut buf, self).expect("writing to memory");
        String::from_utf8(buf).expect("tsv is utf-8")
    }
}
