//! Dictionary-based psycholinguistic features.
//!
//! Reads category dictionaries in the LIWC `.dic` layout and turns a token
//! sequence into percentage scores per category, plus four structural
//! features. Also hosts the standardizer and the correlated-feature pruner
//! used in front of the lexicon logistic regression.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::is_punctuation_token;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Bundled open lexicon (45 categories) in `.dic` layout.
pub const DEMO_LEXICON: &str = include_str!("../data/demo.dic");

/// Structural features that precede the category scores.
pub const STRUCTURAL_FEATURES: [&str; 4] = ["word_count", "words_per_sentence", "dic", "punct_pct"];

const SENTENCE_TERMINATORS: [char; 3] = ['.', '!', '?'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexEntry {
    /// Lowercase literal, or a stem ending in `*`.
    pub pattern: String,
    pub category_ids: Vec<u32>,
}

impl LexEntry {
    pub fn is_stem(&self) -> bool {
        self.pattern.ends_with('*')
    }

    pub fn matches(&self, token: &str) -> bool {
        match self.pattern.strip_suffix('*') {
            Some(stem) => token.starts_with(stem),
            None => token == self.pattern,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "LexiconParts", into = "LexiconParts")]
pub struct Lexicon {
    categories: Vec<(u32, String)>,
    entries: Vec<LexEntry>,
    literals: HashMap<String, Vec<usize>>,
    stems: HashMap<String, Vec<usize>>,
}

impl Lexicon {
    /// Builds a lexicon from already-parsed parts, enforcing its invariants.
    pub fn new(categories: Vec<(u32, String)>, entries: Vec<LexEntry>) -> Result<Self> {
        let mut position = HashMap::new();
        for (i, (id, _)) in categories.iter().enumerate() {
            if position.insert(*id, i).is_some() {
                return Err(Error::Lexicon {
                    line: 0,
                    message: format!("duplicate category id {id}"),
                });
            }
        }
        let mut literals: HashMap<String, Vec<usize>> = HashMap::new();
        let mut stems: HashMap<String, Vec<usize>> = HashMap::new();
        for entry in &entries {
            if entry.pattern != entry.pattern.to_lowercase() {
                return Err(Error::Lexicon {
                    line: 0,
                    message: format!("pattern {:?} is not lowercase", entry.pattern),
                });
            }
            let mut cats = Vec::with_capacity(entry.category_ids.len());
            for id in &entry.category_ids {
                let &p = position.get(id).ok_or_else(|| Error::Lexicon {
                    line: 0,
                    message: format!("entry {:?} uses undeclared category {id}", entry.pattern),
                })?;
                cats.push(p);
            }
            let slot = match entry.pattern.strip_suffix('*') {
                Some(stem) => stems.entry(stem.to_string()).or_default(),
                None => literals.entry(entry.pattern.clone()).or_default(),
            };
            slot.extend(cats);
            slot.sort_unstable();
            slot.dedup();
        }
        Ok(Lexicon {
            categories,
            entries,
            literals,
            stems,
        })
    }

    pub fn demo() -> Self {
        parse_lexicon_str(DEMO_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn categories(&self) -> &[(u32, String)] {
        &self.categories
    }

    pub fn entries(&self) -> &[LexEntry] {
        &self.entries
    }

    /// Structural feature names followed by category names.
    pub fn feature_names(&self) -> Vec<String> {
        STRUCTURAL_FEATURES
            .iter()
            .map(|s| s.to_string())
            .chain(self.categories.iter().map(|(_, n)| n.clone()))
            .collect()
    }

    pub fn feature_count(&self) -> usize {
        STRUCTURAL_FEATURES.len() + self.categories.len()
    }

    /// Category positions matched by a token: the union over its literal
    /// entry and every stem that prefixes it.
    fn matched_categories(&self, token: &str, out: &mut Vec<usize>) {
        out.clear();
        if let Some(c) = self.literals.get(token) {
            out.extend(c);
        }
        let boundaries = token.char_indices().map(|(i, _)| i).chain(std::iter::once(token.len()));
        for end in boundaries {
            if let Some(c) = self.stems.get(&token[..end]) {
                out.extend(c);
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

#[derive(Serialize, Deserialize)]
struct LexiconParts {
    categories: Vec<(u32, String)>,
    entries: Vec<LexEntry>,
}

impl TryFrom<LexiconParts> for Lexicon {
    type Error = Error;

    fn try_from(parts: LexiconParts) -> Result<Self> {
        Lexicon::new(parts.categories, parts.entries)
    }
}

impl From<Lexicon> for LexiconParts {
    fn from(lex: Lexicon) -> Self {
        LexiconParts {
            categories: lex.categories,
            entries: lex.entries,
        }
    }
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.categories == other.categories && self.entries == other.entries
    }
}

pub fn parse_lexicon(path: &Path) -> Result<Lexicon> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon_str(&text)
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).filter(|s| !s.is_empty()).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses the `.dic` layout: a `%` line, `id<TAB>name` lines, a closing
/// `%`, then `pattern<TAB>id[<TAB>id...]` lines.
pub fn parse_lexicon_str(text: &str) -> Result<Lexicon> {
    let err = |line: usize, message: String| Error::Lexicon { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    match lines.next() {
        Some((_, l)) if l.trim() == "%" => {}
        Some((n, _)) => return Err(err(n, "expected '%' to open the category header".into())),
        None => return Err(err(0, "empty lexicon".into())),
    }

    let mut categories = Vec::new();
    let mut seen = HashSet::new();
    let mut closed = false;
    for (n, line) in lines.by_ref() {
        if line.trim() == "%" {
            closed = true;
            break;
        }
        let fields = split_fields(line);
        let [id, name] = fields[..] else {
            return Err(err(n, format!("malformed category line {line:?}")));
        };
        let id: u32 = id
            .parse()
            .map_err(|_| err(n, format!("category id {id:?} is not an integer")))?;
        if !seen.insert(id) {
            return Err(err(n, format!("duplicate category id {id}")));
        }
        categories.push((id, name.to_string()));
    }
    if !closed {
        return Err(err(0, "category header is not closed by '%'".into()));
    }

    let mut entries = Vec::new();
    for (n, line) in lines {
        let fields = split_fields(line);
        let Some((pattern, ids)) = fields.split_first() else {
            continue;
        };
        if ids.is_empty() {
            return Err(err(n, format!("entry {pattern:?} lists no categories")));
        }
        let mut category_ids = Vec::with_capacity(ids.len());
        for id in ids {
            let id: u32 = id
                .parse()
                .map_err(|_| err(n, format!("entry {pattern:?}: category id {id:?} is not an integer")))?;
            if !seen.contains(&id) {
                return Err(err(n, format!("entry {pattern:?} uses undeclared category {id}")));
            }
            category_ids.push(id);
        }
        entries.push(LexEntry {
            pattern: pattern.to_lowercase(),
            category_ids,
        });
    }
    Lexicon::new(categories, entries)
}

/// Per-tweet feature values, ordered as [`Lexicon::feature_names`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn word_count(&self) -> f64 {
        self.values[0]
    }

    pub fn words_per_sentence(&self) -> f64 {
        self.values[1]
    }

    pub fn dic(&self) -> f64 {
        self.values[2]
    }

    pub fn punct_pct(&self) -> f64 {
        self.values[3]
    }

    pub fn categories(&self) -> &[f64] {
        &self.values[STRUCTURAL_FEATURES.len()..]
    }
}

/// Scores one token sequence.
///
/// Category and `dic` scores are percentages of word (non-punctuation)
/// tokens; `punct_pct` is a percentage of all tokens. A sentence is a run of
/// tokens closed by a punctuation token containing `.`, `!` or `?` (or by the
/// end of input) that holds at least one word.
pub fn extract(tokens: &[String], lexicon: &Lexicon) -> FeatureVector {
    let n_cat = lexicon.categories.len();
    let mut values = vec![0.0; STRUCTURAL_FEATURES.len() + n_cat];
    let mut cat_hits = vec![0usize; n_cat];
    let mut matched_words = 0usize;
    let mut words = 0usize;
    let mut punct = 0usize;
    let mut sentences = 0usize;
    let mut words_in_sentence = 0usize;
    let mut scratch = Vec::new();

    for token in tokens {
        if is_punctuation_token(token) {
            punct += 1;
            if token.contains(SENTENCE_TERMINATORS) && words_in_sentence > 0 {
                sentences += 1;
                words_in_sentence = 0;
            }
            continue;
        }
        words += 1;
        words_in_sentence += 1;
        lexicon.matched_categories(token, &mut scratch);
        if !scratch.is_empty() {
            matched_words += 1;
        }
        for &c in &scratch {
            cat_hits[c] += 1;
        }
    }
    if words_in_sentence > 0 {
        sentences += 1;
    }

    values[0] = words as f64;
    if words > 0 {
        let w = words as f64;
        values[1] = w / sentences as f64;
        values[2] = 100.0 * matched_words as f64 / w;
        for (v, &h) in values[STRUCTURAL_FEATURES.len()..].iter_mut().zip(&cat_hits) {
            *v = 100.0 * h as f64 / w;
        }
    }
    if !tokens.is_empty() {
        values[3] = 100.0 * punct as f64 / tokens.len() as f64;
    }
    FeatureVector { values }
}

/// Feature matrix with one row per token sequence.
pub fn extract_matrix<'a, I>(docs: I, lexicon: &Lexicon) -> Matrix
where
    I: IntoIterator<Item = &'a [String]>,
{
    let rows: Vec<Vec<f64>> = docs.into_iter().map(|t| extract(t, lexicon).values).collect();
    if rows.is_empty() {
        return Matrix::zeros(0, lexicon.feature_count());
    }
    Matrix::from_rows(&rows).expect("rows share the lexicon width")
}

/// CSV export with a header of feature names.
pub fn write_feature_csv(path: &Path, names: &[String], matrix: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
    let csv_err = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(names).map_err(csv_err)?;
    for row in matrix.iter_rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn is_constant(column: &[f64]) -> bool {
    column.windows(2).all(|w| w[0] == w[1])
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per-feature standardization with population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

pub fn fit_scaler(matrix: &Matrix, names: &[String]) -> Result<Scaler> {
    if matrix.rows() < 2 {
        return Err(Error::InsufficientData(format!(
            "scaler needs at least 2 rows, got {}",
            matrix.rows()
        )));
    }
    if names.len() != matrix.cols() {
        return Err(Error::DimensionMismatch {
            expected: matrix.cols(),
            got: names.len(),
        });
    }
    let mut scaler = Scaler {
        names: names.to_vec(),
        means: Vec::new(),
        stds: Vec::new(),
        constant: Vec::new(),
    };
    for j in 0..matrix.cols() {
        let col = matrix.column(j);
        let m = mean(&col);
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / col.len() as f64;
        scaler.means.push(m);
        scaler.stds.push(var.sqrt());
        scaler.constant.push(is_constant(&col));
    }
    Ok(scaler)
}

impl Scaler {
    pub fn apply(&self, matrix: &Matrix) -> Result<Matrix> {
        if matrix.cols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                got: matrix.cols(),
            });
        }
        let mut out = matrix.clone();
        for i in 0..out.rows() {
            self.apply_row(out.row_mut(i));
        }
        Ok(out)
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if self.constant[j] || self.stds[j] == 0.0 {
                0.0
            } else {
                (*v - self.means[j]) / self.stds[j]
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub index: usize,
    /// Earlier kept feature it correlates with.
    pub partner: usize,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub kept: Vec<usize>,
    pub dropped: Vec<DroppedFeature>,
    /// Constant columns (kept; correlation treated as 0).
    pub constant: Vec<usize>,
}

/// Pearson correlation; 0 when either column is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    if is_constant(x) || is_constant(y) {
        return 0.0;
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Greedy scan in feature order: feature `j` is dropped when
/// `|r(i, j)| > threshold` for some already kept `i < j`.
pub fn prune_correlated(matrix: &Matrix, threshold: f64) -> Result<PruneReport> {
    if matrix.rows() < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation pruning needs at least 2 rows, got {}",
            matrix.rows()
        )));
    }
    let columns: Vec<Vec<f64>> = (0..matrix.cols()).map(|j| matrix.column(j)).collect();
    let mut report = PruneReport {
        kept: Vec::new(),
        dropped: Vec::new(),
        constant: Vec::new(),
    };
    for (j, col) in columns.iter().enumerate() {
        if is_constant(col) {
            report.constant.push(j);
            report.kept.push(j);
            continue;
        }
        let hit = report.kept.iter().find_map(|&i| {
            let r = pearson(&columns[i], col);
            (r.abs() > threshold).then_some((i, r))
        });
        match hit {
            Some((partner, r)) => report.dropped.push(DroppedFeature { index: j, partner, r }),
            None => report.kept.push(j),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn affect_lexicon(pattern: &str) -> Lexicon {
        parse_lexicon_str(&format!("%\n1\taffect\n%\n{pattern}\t1\n")).unwrap()
    }

    #[test]
    fn parse_literal_and_stem() {
        let lex = affect_lexicon("happy");
        assert_eq!(lex.categories().len(), 1);
        assert_eq!(lex.entries().len(), 1);
        assert!(!lex.entries()[0].is_stem());

        let stem = affect_lexicon("happ*");
        assert!(stem.entries()[0].matches("happy"));
        assert!(stem.entries()[0].matches("happily"));
        assert!(!stem.entries()[0].matches("hap"));
    }

    #[test]
    fn parse_errors() {
        let undeclared = parse_lexicon_str("%\n1\taffect\n%\nsad\t9\n").unwrap_err();
        assert!(undeclared.to_string().contains("sad"), "{undeclared}");
        assert!(parse_lexicon_str("1\taffect\n%\n").is_err());
        assert!(parse_lexicon_str("%\n1\ta\n1\tb\n%\n").is_err());
        assert!(parse_lexicon_str("%\n1\ta\n").is_err());
    }

    #[test]
    fn demo_lexicon_loads() {
        let lex = Lexicon::demo();
        assert_eq!(lex.categories().len(), 45);
        assert_eq!(lex.feature_count(), 49);
    }

    #[test]
    fn extract_examples() {
        let lex = affect_lexicon("happy");
        assert!(extract(&[], &lex).values.iter().all(|&v| v == 0.0));

        let f = extract(&toks(&["happy", "happy"]), &lex);
        assert_eq!(f.categories()[0], 100.0);
        assert_eq!(f.dic(), 100.0);
        assert_eq!(f.word_count(), 2.0);

        let f = extract(&toks(&["happy", "rock", "!"]), &lex);
        assert_eq!(f.categories()[0], 50.0);
        assert!((f.punct_pct() - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(f.word_count(), 2.0);
        assert_eq!(f.words_per_sentence(), 2.0);
    }

    #[test]
    fn literal_and_stem_both_fire_once_per_category() {
        let lex = parse_lexicon_str("%\n1\ta\n2\tb\n%\nhappy\t1\nhapp*\t1\t2\n").unwrap();
        let f = extract(&toks(&["happy"]), &lex);
        assert_eq!(f.categories(), &[100.0, 100.0]);
        assert_eq!(f.dic(), 100.0);
    }

    #[test]
    fn sentences_split_on_terminators() {
        let lex = affect_lexicon("x");
        let f = extract(&toks(&["a", "b", ".", "c", "!!", "d"]), &lex);
        assert_eq!(f.words_per_sentence(), 4.0 / 3.0);
        let f = extract(&toks(&["!", "a", "b"]), &lex);
        assert_eq!(f.words_per_sentence(), 2.0);
    }

    #[test]
    fn scaler_examples() {
        let m = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let s = fit_scaler(&m, &toks(&["a", "b"])).unwrap();
        let t = s.apply(&m).unwrap();
        assert_eq!(t.column(0), vec![-1.0, 1.0]);
        assert_eq!(t.column(1), vec![0.0, 0.0]);
        assert!(s.constant[1]);

        let three = Matrix::from_rows(&[vec![5.0], vec![5.0], vec![5.0]]).unwrap();
        let s = fit_scaler(&three, &toks(&["c"])).unwrap();
        assert_eq!(s.apply(&three).unwrap().column(0), vec![0.0; 3]);

        let one = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(fit_scaler(&one, &toks(&["c"])).is_err());
    }

    #[test]
    fn scaled_columns_have_zero_mean_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|j| rng.gen::<f64>() * (j as f64 + 1.0) * 10.0).collect())
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let s = fit_scaler(&m, &toks(&["a", "b", "c", "d"])).unwrap();
        let t = s.apply(&m).unwrap();
        for j in 0..4 {
            let col = t.column(j);
            let mu = mean(&col);
            let var = col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mu.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn prune_duplicate_and_negated_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base: Vec<f64> = (0..30).map(|_| rng.gen()).collect();
        let rows: Vec<Vec<f64>> = base.iter().map(|&x| vec![x, x, -x]).collect();
        let report = prune_correlated(&Matrix::from_rows(&rows).unwrap(), 0.9).unwrap();
        assert_eq!(report.kept, vec![0]);
        assert_eq!(report.dropped.len(), 2);
        assert!((report.dropped[0].r - 1.0).abs() < 1e-12);
        assert!((report.dropped[1].r + 1.0).abs() < 1e-12);
        assert!(report.dropped.iter().all(|d| d.partner == 0));
    }

    #[test]
    fn prune_keeps_independent_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let rows: Vec<Vec<f64>> = (0..1000).map(|_| (0..8).map(|_| rng.gen()).collect()).collect();
        let report = prune_correlated(&Matrix::from_rows(&rows).unwrap(), 0.9).unwrap();
        assert_eq!(report.kept, (0..8).collect::<Vec<_>>());
        assert!(report.dropped.is_empty());
    }

    #[test]
    fn constant_columns_are_kept_and_flagged() {
        let rows = vec![vec![1.0, 2.0], vec![1.0, 3.0], vec![1.0, 7.0]];
        let report = prune_correlated(&Matrix::from_rows(&rows).unwrap(), 0.9).unwrap();
        assert_eq!(report.kept, vec![0, 1]);
        assert_eq!(report.constant, vec![0]);
    }
}
