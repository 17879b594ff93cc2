//! Keyword-planted synthetic tweets for self-contained end-to-end runs.
//!
//! Every class draws from its own keyword pool; shared filler words and
//! surface noise (mentions, links, hashtags, casing) go through the real
//! normalization rules. A small fraction of tweets borrow a keyword from
//! another class so no model scores trivially.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, RawRecord, CLASS_PRIORS, NUM_CLASSES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub size: usize,
    pub seed: u64,
    /// Probability that a tweet also carries a keyword of another class.
    pub confusion_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            size: 2000,
            seed: 0,
            confusion_rate: 0.05,
        }
    }
}

const FILLER: &[&str] = &[
    "the", "a", "and", "so", "just", "really", "this", "that", "is", "are", "was", "to", "of", "in", "on", "for",
    "with", "at", "it", "all", "now", "today", "we", "they", "i", "my", "our", "have", "will", "be",
];

const NORMAL: &[&str] = &[
    "weekend", "family", "coffee", "game", "music", "friends", "season", "dinner", "movie", "holiday", "morning",
    "team", "school", "beach", "lunch", "garden", "party", "happy", "lovely", "birthday", "sunshine", "concert",
];

const SPAM: &[&str] = &[
    "buy", "discount", "sale", "free", "shipping", "deal", "offer", "promo", "online", "store", "hoodies",
    "horoscope", "followers", "subscribe", "click", "cheap", "price", "order", "bonus", "prize",
];

const ABUSIVE: &[&str] = &[
    "idiot", "stupid", "moron", "dumb", "loser", "jerk", "trash", "pathetic", "damn", "crap", "hell", "ugly",
    "nasty", "bastard",
];

const GROUPS: &[&str] = &["immigrants", "foreigners", "refugees", "outsiders", "minorities", "tribes"];

const HOSTILE: &[&str] = &[
    "hate", "despise", "disgusting", "inferior", "vermin", "filth", "deport", "ban", "invading",
];

const HANDLES: &[&str] = &["@TheTweetOfGod", "@news_daily", "@Sam_K", "@weatherbot", "@jo99"];

fn pool(label: Label) -> &'static [&'static str] {
    match label {
        Label::Normal => NORMAL,
        Label::Spam => SPAM,
        Label::Abusive => ABUSIVE,
        Label::Hateful => HOSTILE,
    }
}

/// Per-class counts for `size` tweets under the fixed priors, by largest
/// remainder (ties to the lower class index).
pub fn class_sizes(size: usize) -> [usize; NUM_CLASSES] {
    let exact: Vec<f64> = CLASS_PRIORS.iter().map(|p| p * size as f64).collect();
    let mut counts = [0usize; NUM_CLASSES];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..NUM_CLASSES).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let missing = size - counts.iter().sum::<usize>();
    for &c in order.iter().take(missing) {
        counts[c] += 1;
    }
    counts
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty pool")
}

fn compose(rng: &mut ChaCha8Rng, label: Label, confusion_rate: f64) -> String {
    let mut words: Vec<String> = Vec::new();
    let n_keywords = rng.gen_range(1..=2);
    for _ in 0..n_keywords {
        words.push(pick(rng, pool(label)).to_string());
    }
    if label == Label::Hateful {
        words.push(pick(rng, GROUPS).to_string());
        if rng.gen_bool(0.3) {
            words.push(pick(rng, ABUSIVE).to_string());
        }
    }
    if rng.gen_bool(confusion_rate) {
        let others: Vec<Label> = Label::ALL.into_iter().filter(|&l| l != label).collect();
        let other = *others.choose(rng).expect("three other classes");
        words.push(pick(rng, pool(other)).to_string());
    }
    for _ in 0..rng.gen_range(2..=6) {
        words.push(pick(rng, FILLER).to_string());
    }
    words.shuffle(rng);

    if rng.gen_bool(0.3) {
        let w = rng.gen_range(0..words.len());
        words[w] = format!("#{}", words[w]);
    }
    if rng.gen_bool(0.2) {
        let w = rng.gen_range(0..words.len());
        words[w] = words[w].to_uppercase();
    }
    if rng.gen_bool(0.25) {
        words.insert(0, pick(rng, HANDLES).to_string());
    }
    let link_rate = if label == Label::Spam { 0.7 } else { 0.1 };
    if rng.gen_bool(link_rate) {
        words.push(format!("https://t.co/{:08x}", rng.gen::<u32>()));
    }
    let mut text = words.join(" ");
    text.push_str(pick(rng, &["", ".", "!", "!!", "?", " ..."]));
    text
}

/// Generates `config.size` tweets with exact per-class counts, in a
/// seed-determined shuffled order.
pub fn generate(config: &SynthConfig) -> Result<Vec<RawRecord>> {
    if !(0.0..=1.0).contains(&config.confusion_rate) {
        return Err(Error::Config(format!(
            "confusion rate {} outside [0, 1]",
            config.confusion_rate
        )));
    }
    let sizes = class_sizes(config.size);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut labels: Vec<Label> = Label::ALL
        .iter()
        .zip(sizes)
        .flat_map(|(&l, n)| std::iter::repeat(l).take(n))
        .collect();
    labels.shuffle(&mut rng);
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| RawRecord {
            id: format!("synth-{:05}", i + 1),
            text: compose(&mut rng, label, config.confusion_rate),
            label,
        })
        .collect())
}
