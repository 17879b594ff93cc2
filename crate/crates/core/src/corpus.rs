//! Tweet ingestion: loading, normalization, tokenization, splitting and
//! class rebalancing.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 4;

pub const USER_TAG: &str = "user_tag";
pub const WEB_LINK: &str = "web_link";

/// Punctuation that survives normalization.
pub const RETAINED_PUNCTUATION: &[char] = &['.', ',', '!', '?', '\'', '"', ':', ';', '(', ')', '-'];

/// Class priors of the four-way abusive-behavior corpus, in class order.
pub const CLASS_PRIORS: [f64; NUM_CLASSES] = [0.5385, 0.2715, 0.1404, 0.0496];

/// The four tweet classes. The declaration order is the global class order
/// used by every model, serialized file and stacked feature block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Spam,
    Abusive,
    Hateful,
}

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::Normal, Label::Spam, Label::Abusive, Label::Hateful];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Spam => "spam",
            Label::Abusive => "abusive",
            Label::Hateful => "hateful",
        }
    }

    pub fn names() -> Vec<String> {
        Label::ALL.iter().map(|l| l.as_str().to_string()).collect()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedTweet {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: Label,
}

impl ProcessedTweet {
    pub fn from_raw(record: &RawRecord) -> Self {
        ProcessedTweet {
            id: record.id.clone(),
            tokens: tokenize(&normalize(&record.text)),
            label: record.label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Tsv,
    Jsonl,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()? {
            "csv" => Some(Format::Csv),
            "tsv" => Some(Format::Tsv),
            "jsonl" | "ndjson" => Some(Format::Jsonl),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "tsv" => Ok(Format::Tsv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::Config(format!("unknown corpus format {other:?}"))),
        }
    }
}

fn parse_label(line: usize, s: &str) -> Result<Label> {
    Label::from_str(s.trim()).map_err(|_| Error::UnknownLabel {
        line,
        label: s.to_string(),
    })
}

/// Loads labeled records, preserving file order. Line numbers in errors are
/// 1-based physical lines (the CSV/TSV header is line 1).
pub fn load(path: &Path, format: Format) -> Result<Vec<RawRecord>> {
    let records = match format {
        Format::Jsonl => load_jsonl(path)?,
        Format::Csv => load_delimited(path, b',', true)?,
        Format::Tsv => load_delimited(path, b'\t', false)?,
    };
    let mut seen = HashSet::new();
    for (line, r) in &records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Parse {
                line: *line,
                message: format!("duplicate id {:?}", r.id),
            });
        }
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

fn load_delimited(path: &Path, delimiter: u8, quoting: bool) -> Result<Vec<(usize, RawRecord)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .quoting(quoting)
        .from_reader(file);
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (id_col, text_col, label_col) = (column("id")?, column("text")?, column("label")?);

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |col: usize, name: &str| {
            row.get(col).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing field {name:?}"),
            })
        };
        out.push((
            line,
            RawRecord {
                id: field(id_col, "id")?.to_string(),
                text: field(text_col, "text")?.to_string(),
                label: parse_label(line, field(label_col, "label")?)?,
            },
        ));
    }
    Ok(out)
}

fn load_jsonl(path: &Path) -> Result<Vec<(usize, RawRecord)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let key = |name: &str| {
            value.get(name).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("missing key {name:?}"),
            })
        };
        let as_text = |v: &serde_json::Value, name: &str| match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) if name == "id" => Ok(n.to_string()),
            _ => Err(Error::Parse {
                line: line_no,
                message: format!("key {name:?} must be a string"),
            }),
        };
        let id = as_text(key("id")?, "id")?;
        let text = as_text(key("text")?, "text")?;
        let label = parse_label(line_no, &as_text(key("label")?, "label")?)?;
        out.push((line_no, RawRecord { id, text, label }));
    }
    Ok(out)
}

/// Writes processed tweets as JSON lines.
pub fn write_jsonl(path: &Path, tweets: &[ProcessedTweet]) -> Result<()> {
    let mut buf = Vec::new();
    for t in tweets {
        serde_json::to_writer(&mut buf, t)?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<ProcessedTweet>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn is_retained_punct(c: char) -> bool {
    RETAINED_PUNCTUATION.contains(&c)
}

fn is_handle_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn is_url(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www.")
}

fn filter_chars(s: &str) -> String {
    s.chars()
        .filter(|&c| c.is_ascii_lowercase() || c.is_ascii_digit() || is_retained_punct(c))
        .collect()
}

/// Normalizes raw tweet text.
///
/// Applied per whitespace-separated piece, in order: lowercase, URL
/// replacement, mention replacement, `#` removal, character filter. The
/// output pieces are joined by single spaces.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let mut pieces: Vec<String> = Vec::new();
    for raw in lowered.split_whitespace() {
        if raw == USER_TAG || raw == WEB_LINK {
            pieces.push(raw.to_string());
            continue;
        }
        if is_url(raw) {
            pieces.push(WEB_LINK.to_string());
            continue;
        }
        let rest = match raw.strip_prefix('@') {
            Some(after) if after.starts_with(is_handle_char) => {
                pieces.push(USER_TAG.to_string());
                after.trim_start_matches(is_handle_char)
            }
            _ => raw,
        };
        let filtered = filter_chars(&rest.replace('#', ""));
        if filtered.is_empty() {
            continue;
        }
        // Stripping can expose a "www." prefix, e.g. "w~ww.site".
        if is_url(&filtered) {
            pieces.push(WEB_LINK.to_string());
        } else {
            pieces.push(filtered);
        }
    }
    pieces.join(" ")
}

/// Splits normalized text on whitespace, then detaches every maximal run of
/// punctuation as its own token. Sentinel tokens are kept whole.
pub fn tokenize(normalized: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for piece in normalized.split_whitespace() {
        if piece == USER_TAG || piece == WEB_LINK {
            tokens.push(piece.to_string());
            continue;
        }
        let mut current = String::new();
        let mut current_punct = false;
        for c in piece.chars() {
            let punct = !c.is_alphanumeric();
            if !current.is_empty() && punct != current_punct {
                tokens.push(std::mem::take(&mut current));
            }
            current_punct = punct;
            current.push(c);
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// True for tokens made only of punctuation characters.
pub fn is_punctuation_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| !c.is_alphanumeric() && c != '_')
}

pub fn is_sentinel(token: &str) -> bool {
    token == USER_TAG || token == WEB_LINK
}

/// Checks the processed-token grammar: lowercase alphanumerics, pure
/// retained punctuation, or a sentinel.
pub fn is_valid_token(token: &str) -> bool {
    if token.is_empty() {
        return false;
    }
    is_sentinel(token)
        || token.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        || token.chars().all(is_retained_punct)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Train, validation and test fractions.
    pub ratios: [f64; 3],
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratios: [0.8, 0.1, 0.1],
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::Config("split ratios must be strictly positive".into()));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<ProcessedTweet>,
    pub valid: Vec<ProcessedTweet>,
    pub test: Vec<ProcessedTweet>,
    pub spec: SplitSpec,
}

impl DatasetSplit {
    pub fn parts(&self) -> [&[ProcessedTweet]; 3] {
        [&self.train, &self.valid, &self.test]
    }

    /// Verifies that no id appears in two parts.
    pub fn check_disjoint(&self) -> Result<()> {
        check_disjoint(&self.parts())
    }
}

pub fn check_disjoint(parts: &[&[ProcessedTweet]]) -> Result<()> {
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (p, part) in parts.iter().enumerate() {
        for t in part.iter() {
            if let Some(&prev) = owner.get(t.id.as_str()) {
                if prev != p {
                    return Err(Error::SplitOverlap(t.id.clone()));
                }
            }
            owner.insert(&t.id, p);
        }
    }
    Ok(())
}

/// Largest-remainder apportionment of `n` items over `ratios`. With
/// `min_each`, every part receives at least one item (requires `n >= 3`).
fn apportion(n: usize, ratios: &[f64; 3], min_each: bool) -> [usize; 3] {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: [usize; 3] = [0; 3];
    for (c, q) in counts.iter_mut().zip(&quotas) {
        *c = (q + 1e-9).floor() as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - counts[a] as f64;
        let fb = quotas[b] - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut left = n.saturating_sub(counts.iter().sum());
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    if min_each {
        for i in 0..3 {
            while counts[i] == 0 {
                let donor = (0..3).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
                counts[donor] -= 1;
                counts[i] += 1;
            }
        }
    }
    counts
}

/// Deterministic train/validation/test partition.
pub fn split(records: &[ProcessedTweet], spec: &SplitSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    if records.is_empty() {
        return Err(Error::InsufficientData("cannot split an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut assignment = vec![0usize; records.len()];

    let groups: Vec<Vec<usize>> = if spec.stratified {
        Label::ALL
            .iter()
            .map(|&l| (0..records.len()).filter(|&i| records[i].label == l).collect())
            .collect()
    } else {
        vec![(0..records.len()).collect()]
    };

    for (g, mut members) in groups.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if spec.stratified && members.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "class {} has {} records; stratified splitting needs at least 3",
                Label::ALL[g],
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let counts = apportion(members.len(), &spec.ratios, spec.stratified);
        let mut it = members.into_iter();
        for (part, &count) in counts.iter().enumerate() {
            for idx in it.by_ref().take(count) {
                assignment[idx] = part;
            }
        }
    }

    let pick = |part: usize| -> Vec<ProcessedTweet> {
        records
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a == part)
            .map(|(r, _)| r.clone())
            .collect()
    };
    Ok(DatasetSplit {
        train: pick(0),
        valid: pick(1),
        test: pick(2),
        spec: *spec,
    })
}

pub fn class_counts(records: &[ProcessedTweet]) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for r in records {
        counts[r.label.index()] += 1;
    }
    counts
}

/// Random oversampling: duplicates members of each listed class, uniformly
/// with replacement, until every class matches the largest one. Originals
/// keep their order; duplicates are appended class by class.
pub fn oversample(train: &[ProcessedTweet], classes: &[Label], seed: u64) -> Result<Vec<ProcessedTweet>> {
    let members: Vec<Vec<&ProcessedTweet>> = classes
        .iter()
        .map(|&c| train.iter().filter(|t| t.label == c).collect())
        .collect();
    if let Some(pos) = members.iter().position(Vec::is_empty) {
        return Err(Error::InsufficientData(format!(
            "class {} has no records to oversample",
            classes[pos]
        )));
    }
    let target = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = train.to_vec();
    for group in &members {
        for _ in group.len()..target {
            out.push(group[rng.gen_range(0..group.len())].clone());
        }
    }
    Ok(out)
}

/// Total relabeling of the four classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap(pub [Label; NUM_CLASSES]);

impl LabelMap {
    pub fn identity() -> Self {
        LabelMap(Label::ALL)
    }

    /// The three-class task: spam folded into normal.
    pub fn spam_to_normal() -> Self {
        LabelMap([Label::Normal, Label::Normal, Label::Abusive, Label::Hateful])
    }

    pub fn apply(&self, label: Label) -> Label {
        self.0[label.index()]
    }

    /// Parses `from=to` pairs such as `"spam=normal"`; unlisted classes map
    /// to themselves.
    pub fn parse(pairs: &[String]) -> Result<Self> {
        let mut map = LabelMap::identity();
        for pair in pairs {
            let (from, to) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("label mapping {pair:?} is not from=to")))?;
            map.0[from.trim().parse::<Label>()?.index()] = to.trim().parse()?;
        }
        Ok(map)
    }

    /// Classes that remain after the mapping, in class order.
    pub fn image(&self) -> Vec<Label> {
        Label::ALL.iter().copied().filter(|l| self.0.contains(l)).collect()
    }
}

pub fn merge_labels(records: &[ProcessedTweet], mapping: &LabelMap) -> Vec<ProcessedTweet> {
    records
        .iter()
        .map(|r| ProcessedTweet {
            label: mapping.apply(r.label),
            ..r.clone()
        })
        .collect()
}

/// Writes raw records as JSON lines (used by the synthetic corpus writer).
pub fn write_raw_jsonl(path: &Path, records: &[RawRecord]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        let line = serde_json::to_string(r)?;
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Writes raw records as CSV with an `id,text,label` header.
pub fn write_raw_csv(path: &Path, records: &[RawRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::Parse {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(["id", "text", "label"]).map_err(csv_err)?;
    for r in records {
        w.write_record([r.id.as_str(), r.text.as_str(), r.label.as_str()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweet(id: usize, label: Label) -> ProcessedTweet {
        ProcessedTweet {
            id: id.to_string(),
            tokens: vec!["w".into()],
            label,
        }
    }

    fn write_temp(contents: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_only_csv_is_empty() {
        let f = write_temp("id,text,label\n", ".csv");
        assert!(load(f.path(), Format::Csv).unwrap().is_empty());
    }

    #[test]
    fn jsonl_single_record() {
        let f = write_temp("{\"id\":\"1\",\"text\":\"hi\",\"label\":\"normal\"}\n", ".jsonl");
        let recs = load(f.path(), Format::Jsonl).unwrap();
        assert_eq!(
            recs,
            vec![RawRecord {
                id: "1".into(),
                text: "hi".into(),
                label: Label::Normal
            }]
        );
    }

    #[test]
    fn bad_label_names_line_and_label() {
        let f = write_temp("{\"id\":\"1\",\"text\":\"hi\",\"label\":\"hate\"}\n", ".jsonl");
        let err = load(f.path(), Format::Jsonl).unwrap_err();
        match &err {
            Error::UnknownLabel { line, label } => {
                assert_eq!(*line, 1);
                assert_eq!(label, "hate");
            }
            other => panic!("unexpected error {other:?}"),
        }
        let msg = err.to_string();
        assert!(msg.contains("line 1") && msg.contains("hate"), "{msg}");
    }

    #[test]
    fn csv_bad_label_reports_physical_line() {
        let f = write_temp("id,text,label\n1,ok,normal\n2,bad,hate\n", ".csv");
        match load(f.path(), Format::Csv).unwrap_err() {
            Error::UnknownLabel { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let f = write_temp("id,body,label\n1,x,normal\n", ".csv");
        assert!(matches!(load(f.path(), Format::Csv), Err(Error::MissingColumn(c)) if c == "text"));
    }

    #[test]
    fn tsv_keeps_quotes_verbatim() {
        let f = write_temp("id\ttext\tlabel\n7\tsay \"hi\"\tspam\n", ".tsv");
        let recs = load(f.path(), Format::Tsv).unwrap();
        assert_eq!(recs[0].text, "say \"hi\"");
        assert_eq!(recs[0].label, Label::Spam);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let f = write_temp("id,text,label\n1,a,normal\n1,b,spam\n", ".csv");
        assert!(matches!(load(f.path(), Format::Csv), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("@TheTweetOfGod"), "user_tag");
        assert_eq!(normalize(""), "");
        assert_eq!(
            normalize("#BlessUp!! Check https://t.co/x ~now~"),
            "blessup!! check web_link now"
        );
        assert_eq!(normalize("hi @ there"), "hi there");
        assert_eq!(normalize("@bob: yes"), "user_tag : yes");
        assert_eq!(normalize("w~ww.site.com"), "web_link");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("user_tag hi!!"), vec!["user_tag", "hi", "!!"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a b"), vec!["a", "b"]);
        assert_eq!(tokenize("don't"), vec!["don", "'", "t"]);
    }

    #[test]
    fn split_full_corpus_class_sizes() {
        let counts = [53_850, 27_150, 14_040, 4_960];
        let mut records = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                records.push(tweet(records.len(), Label::ALL[c]));
            }
        }
        let s = split(&records, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (80_000, 10_000, 10_000));
    }

    #[test]
    fn split_single_class_of_ten() {
        let records: Vec<_> = (0..10).map(|i| tweet(i, Label::Spam)).collect();
        let s = split(&records, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn split_is_deterministic() {
        let records: Vec<_> = (0..200).map(|i| tweet(i, Label::ALL[i % 4])).collect();
        let spec = SplitSpec {
            seed: 42,
            ..SplitSpec::default()
        };
        assert_eq!(split(&records, &spec).unwrap(), split(&records, &spec).unwrap());
    }

    #[test]
    fn stratified_split_rejects_tiny_class() {
        let mut records: Vec<_> = (0..20).map(|i| tweet(i, Label::Normal)).collect();
        records.push(tweet(99, Label::Hateful));
        assert!(matches!(
            split(&records, &SplitSpec::default()),
            Err(Error::InsufficientData(_))
        ));
        let plain = SplitSpec {
            stratified: false,
            ..SplitSpec::default()
        };
        assert!(split(&records, &plain).is_ok());
    }

    #[test]
    fn split_spec_validation() {
        let bad = SplitSpec {
            ratios: [0.8, 0.1, 0.2],
            ..SplitSpec::default()
        };
        assert!(bad.validate().is_err());
        let zero = SplitSpec {
            ratios: [1.0, 0.0, 0.0],
            ..SplitSpec::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn oversample_examples() {
        let ab = [Label::Normal, Label::Spam];
        let balanced: Vec<_> = (0..10).map(|i| tweet(i, ab[i % 2])).collect();
        assert_eq!(oversample(&balanced, &ab, 1).unwrap(), balanced);

        let mut skewed: Vec<_> = (0..10).map(|i| tweet(i, Label::Normal)).collect();
        skewed.extend((10..12).map(|i| tweet(i, Label::Spam)));
        let out = oversample(&skewed, &ab, 1).unwrap();
        assert_eq!(class_counts(&out)[..2], [10, 10]);
        assert!(out[12..].iter().all(|t| t.label == Label::Spam && (t.id == "10" || t.id == "11")));

        let abc = [Label::Normal, Label::Spam, Label::Abusive];
        let three = vec![
            tweet(0, Label::Normal),
            tweet(1, Label::Normal),
            tweet(2, Label::Normal),
            tweet(3, Label::Spam),
            tweet(4, Label::Abusive),
            tweet(5, Label::Abusive),
        ];
        assert_eq!(class_counts(&oversample(&three, &abc, 3).unwrap())[..3], [3, 3, 3]);
        assert!(oversample(&three, &Label::ALL, 3).is_err());
    }

    #[test]
    fn merge_label_examples() {
        let recs = vec![tweet(0, Label::Spam)];
        assert_eq!(merge_labels(&recs, &LabelMap::spam_to_normal())[0].label, Label::Normal);
        assert_eq!(merge_labels(&recs, &LabelMap::identity()), recs);
        let all_normal = LabelMap([Label::Normal; 4]);
        let mixed: Vec<_> = (0..8).map(|i| tweet(i, Label::ALL[i % 4])).collect();
        assert!(merge_labels(&mixed, &all_normal).iter().all(|t| t.label == Label::Normal));
        assert_eq!(all_normal.image(), vec![Label::Normal]);
        assert_eq!(LabelMap::parse(&["spam=normal".into()]).unwrap(), LabelMap::spam_to_normal());
    }

    #[test]
    fn disjointness_check_detects_overlap() {
        let a = vec![tweet(1, Label::Normal)];
        let b = vec![tweet(1, Label::Spam)];
        assert!(matches!(check_disjoint(&[&a, &b]), Err(Error::SplitOverlap(id)) if id == "1"));
        // Duplicates inside one part (oversampling) are fine.
        let dup = vec![tweet(1, Label::Normal), tweet(1, Label::Normal)];
        assert!(check_disjoint(&[&dup, &[]]).is_ok());
    }

    #[test]
    fn raw_csv_round_trip() {
        let records = vec![
            RawRecord {
                id: "1".into(),
                text: "quote \"this\", please".into(),
                label: Label::Spam,
            },
            RawRecord {
                id: "2".into(),
                text: "line one".into(),
                label: Label::Hateful,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_raw_csv(&path, &records).unwrap();
        assert_eq!(load(&path, Format::Csv).unwrap(), records);
    }
}
