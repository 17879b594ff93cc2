//! Brute-force reference implementations. None of these call into the code
//! under test except for plain data types.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tweetstack_core::lexfeat::LexEntry;
use tweetstack_core::models::Classifier;
use tweetstack_core::NUM_CLASSES;

const RETAINED: &str = ".,!?'\":;()-";

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 14695981039346656037;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(1099511628211);
    }
    h
}

/// Every span of every length, each mapped straight to its row: unigrams by
/// vocabulary position, longer spans by hashing the space-joined words.
pub fn featurize(tokens: &[String], words: &[String], n_max: usize, buckets: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for len in 1..=tokens.len() {
        for start in 0..tokens.len() {
            if start + len > tokens.len() {
                continue;
            }
            let span = &tokens[start..start + len];
            if len == 1 {
                if let Some(p) = words.iter().position(|w| *w == span[0]) {
                    out.push(p);
                }
            } else if len <= n_max && buckets > 0 {
                let joined = span.join(" ");
                out.push(words.len() + (fnv1a64(joined.as_bytes()) % buckets as u64) as usize);
            }
        }
    }
    out
}

pub fn is_punct(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| RETAINED.contains(c))
}

/// Lexicon scores by looping over every (token, entry) pair.
pub fn lexfeat(tokens: &[String], categories: &[(u32, String)], entries: &[LexEntry]) -> Vec<f64> {
    let n_cat = categories.len();
    let mut hits = vec![0usize; n_cat];
    let mut matched = 0usize;
    let mut words = 0usize;
    let mut punct = 0usize;
    for token in tokens {
        if is_punct(token) {
            punct += 1;
            continue;
        }
        words += 1;
        let mut cats = BTreeSet::new();
        for entry in entries {
            let hit = if entry.pattern.ends_with('*') {
                let stem = &entry.pattern[..entry.pattern.len() - 1];
                token.len() >= stem.len() && &token[..stem.len()] == stem
            } else {
                *token == entry.pattern
            };
            if hit {
                for id in &entry.category_ids {
                    cats.insert(categories.iter().position(|(c, _)| c == id).unwrap());
                }
            }
        }
        if !cats.is_empty() {
            matched += 1;
        }
        for c in cats {
            hits[c] += 1;
        }
    }

    // Sentences: segments cut after each token holding '.', '!' or '?',
    // counted only if they contain a word.
    let mut sentences = 0;
    let mut segment_has_word = false;
    for token in tokens {
        if is_punct(token) {
            if token.contains(['.', '!', '?']) {
                if segment_has_word {
                    sentences += 1;
                }
                segment_has_word = false;
            }
        } else {
            segment_has_word = true;
        }
    }
    if segment_has_word {
        sentences += 1;
    }

    let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
    let mut out = vec![
        words as f64,
        if sentences == 0 { 0.0 } else { words as f64 / sentences as f64 },
        pct(matched, words),
        pct(punct, tokens.len()),
    ];
    out.extend(hits.iter().map(|&h| pct(h, words)));
    out
}

const LEX_WORDS: [&str; 8] = ["a", "ab", "abc", "abd", "b", "ba", "c", "xyz"];
const LEX_PUNCT: [&str; 6] = [".", "!", ",", "?!", "...", "'"];

/// A random small lexicon: up to 5 categories with scattered ids, literal
/// and stem patterns over a tiny alphabet.
pub fn random_lexicon(rng: &mut ChaCha8Rng) -> (Vec<(u32, String)>, Vec<LexEntry>) {
    let n_cat = rng.gen_range(1..=5);
    let mut ids = BTreeSet::new();
    while ids.len() < n_cat {
        ids.insert(rng.gen_range(1..100u32));
    }
    let categories: Vec<(u32, String)> = ids.iter().map(|&id| (id, format!("cat{id}"))).collect();
    let patterns = ["a", "ab", "abc", "b", "ba", "xyz", "a*", "ab*", "b*", "abc*", "z*"];
    let n_entries = rng.gen_range(0..=8);
    let entries = (0..n_entries)
        .map(|_| {
            let pattern = patterns[rng.gen_range(0..patterns.len())].to_string();
            let k = rng.gen_range(1..=n_cat);
            let mut picked = BTreeSet::new();
            while picked.len() < k {
                picked.insert(categories[rng.gen_range(0..n_cat)].0);
            }
            LexEntry {
                pattern,
                category_ids: picked.into_iter().collect(),
            }
        })
        .collect();
    (categories, entries)
}

pub fn random_lex_tokens(rng: &mut ChaCha8Rng) -> Vec<String> {
    let len = rng.gen_range(0..=12);
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.3) {
                LEX_PUNCT[rng.gen_range(0..LEX_PUNCT.len())].to_string()
            } else {
                LEX_WORDS[rng.gen_range(0..LEX_WORDS.len())].to_string()
            }
        })
        .collect()
}

/// Confusion counts by scanning every (gold, predicted) cell.
pub fn confusion(preds: &[usize], golds: &[usize], classes: usize) -> Vec<Vec<u64>> {
    (0..classes)
        .map(|g| {
            (0..classes)
                .map(|p| preds.iter().zip(golds).filter(|&(&pp, &gg)| pp == p && gg == g).count() as u64)
                .collect()
        })
        .collect()
}

/// Tweets for the stacking fixtures look like `["id17", "r2", "g3"]`:
/// an id, an error region in 0..3 and the gold class.
pub fn fixture_tokens(id: usize, region: usize, gold: usize) -> Vec<String> {
    vec![format!("id{id}"), format!("r{region}"), format!("g{gold}")]
}

fn field(tokens: &[String], prefix: &str) -> usize {
    tokens
        .iter()
        .find_map(|t| t.strip_prefix(prefix).and_then(|v| v.parse().ok()))
        .expect("fixture token")
}

/// Noisy oracle base: right outside its own region, confidently wrong
/// inside it. Confidence varies per tweet.
pub struct RegionOracle {
    pub region: usize,
}

impl Classifier for RegionOracle {
    fn class_probabilities(&self, tokens: &[String]) -> Vec<f64> {
        let gold = field(tokens, "g");
        let region = field(tokens, "r");
        let id = field(tokens, "id");
        let noise = (fnv1a64(format!("{}:{id}", self.region).as_bytes()) % 1000) as f64 / 1000.0;
        let top = if region == self.region { (gold + 1) % NUM_CLASSES } else { gold };
        let conf = 0.45 + 0.4 * noise;
        let mut p = vec![(1.0 - conf) / (NUM_CLASSES - 1) as f64; NUM_CLASSES];
        p[top] = conf;
        p
    }
}

/// Always right with full confidence.
pub struct PerfectOracle;

impl Classifier for PerfectOracle {
    fn class_probabilities(&self, tokens: &[String]) -> Vec<f64> {
        let mut p = vec![0.0; NUM_CLASSES];
        p[field(tokens, "g")] = 1.0;
        p
    }
}

pub struct UniformBase;

impl Classifier for UniformBase {
    fn class_probabilities(&self, _: &[String]) -> Vec<f64> {
        vec![1.0 / NUM_CLASSES as f64; NUM_CLASSES]
    }
}
