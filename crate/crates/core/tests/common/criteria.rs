//! Acceptance checks that need only the core library. Each returns a
//! one-line summary on success and a reason on failure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tweetstack_core::corpus::{normalize, DatasetSplit, SplitSpec};
use tweetstack_core::ensemble::{fit_meta, stacked_proba, MetaConfig};
use tweetstack_core::eval::{self, tsne, TsneConfig};
use tweetstack_core::lexfeat::{extract, Lexicon};
use tweetstack_core::linalg::argmax;
use tweetstack_core::linmodel::{self, LogRegModel};
use tweetstack_core::models::Classifier;
use tweetstack_core::ngram::{featurize, NgramVocab};
use tweetstack_core::rnn::{self, BiLstmModel, EmbeddingTable, NULL_TOKEN, UNK_TOKEN};
use tweetstack_core::{Label, Matrix, ProcessedTweet, NUM_CLASSES};

use super::oracles::{self, fixture_tokens, RegionOracle};

pub type Outcome = Result<String, String>;

pub const GOLDEN: &str = include_str!("../data/normalize_golden.tsv");

const EPSILON: f64 = 1e-5;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn random_logreg_instance(rng: &mut ChaCha8Rng) -> (LogRegModel, Matrix, Vec<usize>) {
    let classes = rng.gen_range(2..=NUM_CLASSES);
    let features = rng.gen_range(1..=5);
    let rows = rng.gen_range(1..=6);
    let mut model = LogRegModel::zeros(
        (0..classes).map(|c| format!("c{c}")).collect(),
        (0..features).map(|f| format!("f{f}")).collect(),
        rng.gen_range(0.0..0.1),
    );
    for w in model.weights.as_mut_slice() {
        *w = rng.gen_range(-1.0..1.0);
    }
    for b in &mut model.bias {
        *b = rng.gen_range(-1.0..1.0);
    }
    let x = Matrix::from_vec(rows, features, (0..rows * features).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .expect("shape");
    let y = (0..rows).map(|_| rng.gen_range(0..classes)).collect();
    (model, x, y)
}

/// A tiny BiLSTM with perturbed parameters and a random input sequence
/// (possibly with unknown words).
pub fn random_rnn_instance(rng: &mut ChaCha8Rng) -> (BiLstmModel, Vec<String>, usize) {
    let hidden = rng.gen_range(1..=4);
    let dim = rng.gen_range(1..=4);
    let len = rng.gen_range(1..=5);
    let words = ["aa", "bb", "cc", "dd"];
    let vocab: Vec<String> = [NULL_TOKEN, UNK_TOKEN].iter().chain(&words).map(|s| s.to_string()).collect();
    let mut table = EmbeddingTable::random(&vocab, dim, rng.gen());
    table.trainable = rng.gen_bool(0.8);
    let mut model = BiLstmModel::new(&table, hidden, 8, rng.gen()).expect("valid shape");
    for p in &mut model.params {
        *p += rng.gen_range(-0.5..0.5);
    }
    let tokens = (0..len)
        .map(|_| {
            if rng.gen_bool(0.1) {
                "zz".to_string()
            } else {
                words[rng.gen_range(0..words.len())].to_string()
            }
        })
        .collect();
    (model, tokens, rng.gen_range(0..NUM_CLASSES))
}

pub fn gradient_checks(instances: usize, seed: u64) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_lin: f64 = 0.0;
    for _ in 0..instances {
        let (model, x, y) = random_logreg_instance(&mut rng);
        let err = linmodel::gradient_check(&model, &x, &y, EPSILON).map_err(|e| e.to_string())?;
        worst_lin = worst_lin.max(err);
    }
    let mut worst_rnn: f64 = 0.0;
    for _ in 0..instances {
        let (model, tokens, label) = random_rnn_instance(&mut rng);
        worst_rnn = worst_rnn.max(rnn::gradient_check(&model, &tokens, label, EPSILON));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst_lin <= 1e-6 && worst_rnn <= 1e-4 && secs < 30.0,
        format!("{instances}+{instances} instances, linmodel max rel err {worst_lin:.2e}, rnn {worst_rnn:.2e}, {secs:.2}s"),
    )
}

pub fn golden_pairs() -> Vec<(&'static str, &'static str)> {
    GOLDEN
        .lines()
        .map(|l| l.split_once('\t').expect("raw<TAB>expected"))
        .collect()
}

fn fuzz_string(rng: &mut ChaCha8Rng) -> String {
    const PIECES: [&str; 24] = [
        "a", "Z", "q", "7", " ", "  ", "\t", "@", "#", "_", ".", "!", "?", "'", "~", "/", "http://", "https://",
        "www.", "user_tag", "web_link", "é", "\u{1F600}", "-",
    ];
    let len = rng.gen_range(0..30);
    (0..len).map(|_| PIECES[rng.gen_range(0..PIECES.len())]).collect()
}

pub fn golden_and_fuzz(fuzz_cases: usize, seed: u64) -> Outcome {
    let pairs = golden_pairs();
    if pairs.len() < 20 {
        return Err(format!("only {} golden pairs", pairs.len()));
    }
    if !pairs.contains(&("@TheTweetOfGod", "user_tag")) {
        return Err("golden file lacks the @TheTweetOfGod case".into());
    }
    for (raw, expected) in &pairs {
        let got = normalize(raw);
        if got != *expected {
            return Err(format!("normalize({raw:?}) = {got:?}, expected {expected:?}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..fuzz_cases {
        let s = fuzz_string(&mut rng);
        let once = normalize(&s);
        let twice = normalize(&once);
        if once != twice {
            return Err(format!("not idempotent on {s:?}: {once:?} -> {twice:?}"));
        }
    }
    Ok(format!("{} golden pairs exact, {fuzz_cases} fuzz strings idempotent", pairs.len()))
}

fn all_sequences(alphabet: &[String], max_len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for w in alphabet {
                let mut s = seq.clone();
                s.push(w.clone());
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Every sequence up to length 6 over five words, under several n-gram
/// orders and bucket counts, with and without an out-of-vocabulary word.
pub fn featurize_exhaustive() -> Outcome {
    let alphabet: Vec<String> = ["u", "v", "w", "x", "y"].iter().map(|s| s.to_string()).collect();
    let sequences = all_sequences(&alphabet, 6);
    // "y" appears once in the build docs, so min_count 2 drops it.
    let docs: Vec<Vec<String>> = vec![alphabet.clone(), alphabet[..4].to_vec()];
    let mut checked = 0usize;
    for min_count in [1, 2] {
        for (n_max, buckets) in [(1, 7), (2, 7), (3, 11), (6, 1000), (3, 0)] {
            let vocab = NgramVocab::build(docs.iter().map(Vec::as_slice), min_count, buckets, n_max);
            let words = vocab.words().to_vec();
            for seq in &sequences {
                let mut got = featurize(seq, &vocab);
                let mut want = oracles::featurize(seq, &words, n_max, buckets);
                got.sort_unstable();
                want.sort_unstable();
                if got != want {
                    return Err(format!("n_max {n_max}, buckets {buckets}, {seq:?}: {got:?} != {want:?}"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (sequence, config) cases match span enumeration"))
}

pub fn lexfeat_oracle(instances: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..instances {
        let (categories, entries) = oracles::random_lexicon(&mut rng);
        let lexicon = Lexicon::new(categories.clone(), entries.clone()).map_err(|e| e.to_string())?;
        let tokens = oracles::random_lex_tokens(&mut rng);
        let got = extract(&tokens, &lexicon).values;
        let want = oracles::lexfeat(&tokens, &categories, &entries);
        if got.len() != want.len() || got.iter().zip(&want).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(format!("instance {i}, tokens {tokens:?}: {got:?} != {want:?}"));
        }
        let pcts = got[2..].iter();
        if let Some(p) = pcts.clone().find(|p| !(0.0..=100.0).contains(*p)) {
            return Err(format!("instance {i}: percentage {p} out of range"));
        }
    }
    Ok(format!("{instances} random (lexicon, tokens) instances match the double loop"))
}

pub fn tsne_points(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = 6;
    let mut data = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % NUM_CLASSES;
        labels.push(c);
        for d in 0..dims {
            let center = if d % NUM_CLASSES == c { 4.0 } else { 0.0 };
            data.push(center + rng.gen_range(-1.0..1.0));
        }
    }
    (Matrix::from_vec(n, dims, data).expect("shape"), labels)
}

pub fn tsne_check(n: usize, seed: u64) -> Outcome {
    let (x, labels) = tsne_points(n, seed);
    let config = TsneConfig {
        seed,
        ..TsneConfig::default()
    };
    let first = tsne(&x, &labels, &config).map_err(|e| e.to_string())?;
    let second = tsne(&x, &labels, &config).map_err(|e| e.to_string())?;
    let worst = first
        .row_perplexities
        .iter()
        .map(|p| (p - config.perplexity).abs())
        .fold(0.0, f64::max);
    let bitwise = first
        .coords
        .as_slice()
        .iter()
        .zip(second.coords.as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(
        worst <= 1e-3 && first.kl_final < first.kl_initial && bitwise,
        format!(
            "N={n}: max perplexity error {worst:.2e}, KL {:.3} -> {:.3}, bitwise rerun {bitwise}",
            first.kl_initial, first.kl_final
        ),
    )
}

pub fn confusion_algebra(cases: usize, seed: u64) -> Outcome {
    let names = Label::names();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..200);
        let golds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..NUM_CLASSES)).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..NUM_CLASSES)).collect();
        let m = eval::confusion(&preds, &golds, &names).map_err(|e| e.to_string())?;
        if m.counts != oracles::confusion(&preds, &golds, NUM_CLASSES) {
            return Err(format!("case {case}: counts differ from the cell scan"));
        }
        let direct = eval::accuracy(&preds, &golds).map_err(|e| e.to_string())?;
        let ratio = m.trace() as f64 / m.total() as f64;
        if m.accuracy() != ratio || (direct - ratio).abs() > 1e-12 {
            return Err(format!("case {case}: accuracy {} vs trace/total {ratio}", m.accuracy()));
        }
        let f = eval::row_normalize(&m);
        for (g, row) in f.fractions.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            let present = golds.contains(&g);
            if present && (sum - 1.0).abs() > 1e-12 {
                return Err(format!("case {case}: row {g} sums to {sum}"));
            }
        }
        let perfect = eval::row_normalize(&eval::confusion(&golds, &golds, &names).map_err(|e| e.to_string())?);
        for (g, row) in perfect.fractions.iter().enumerate() {
            if !golds.contains(&g) {
                continue;
            }
            for (p, &v) in row.iter().enumerate() {
                if v != if g == p { 1.0 } else { 0.0 } {
                    return Err(format!("case {case}: perfect predictions give {v} at ({g},{p})"));
                }
            }
        }
    }
    Ok(format!("{cases} random prediction sets"))
}

/// Train/valid/test fixture tweets with gold drawn from `priors` and the
/// error region uniform over the three bases.
pub fn fixture_split(sizes: [usize; 3], priors: [f64; NUM_CLASSES], seed: u64) -> DatasetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next_id = 0;
    let mut part = |n: usize| -> Vec<ProcessedTweet> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut gold = NUM_CLASSES - 1;
                for (c, p) in priors.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        gold = c;
                        break;
                    }
                }
                let region = rng.gen_range(0..3);
                next_id += 1;
                ProcessedTweet {
                    id: format!("fx{next_id}"),
                    tokens: fixture_tokens(next_id, region, gold),
                    label: Label::from_index(gold).expect("class index"),
                }
            })
            .collect()
    };
    let train = part(sizes[0]);
    let valid = part(sizes[1]);
    let test = part(sizes[2]);
    DatasetSplit {
        train,
        valid,
        test,
        spec: SplitSpec {
            ratios: [0.6, 0.2, 0.2],
            seed,
            stratified: false,
        },
    }
}

pub fn accuracy_of(model: &dyn Classifier, tweets: &[ProcessedTweet]) -> f64 {
    let hits = tweets.iter().filter(|t| model.classify(&t.tokens) == t.label.index()).count();
    hits as f64 / tweets.len() as f64
}

pub fn complementary_errors(seed: u64) -> Outcome {
    let split = fixture_split([600, 200, 400], [0.25; NUM_CLASSES], seed);
    let oracles = [RegionOracle { region: 0 }, RegionOracle { region: 1 }, RegionOracle { region: 2 }];
    let bases: Vec<&dyn Classifier> = oracles.iter().map(|o| o as &dyn Classifier).collect();
    let meta = fit_meta(
        &bases,
        &split,
        &MetaConfig {
            seed,
            ..MetaConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let base_acc: Vec<f64> = bases.iter().map(|b| accuracy_of(*b, &split.test)).collect();
    let mut hits = 0;
    for t in &split.test {
        let p = stacked_proba(&bases, &meta, &t.tokens).map_err(|e| e.to_string())?;
        hits += usize::from(argmax(&p) == t.label.index());
    }
    let stacked = hits as f64 / split.test.len() as f64;
    ensure(
        base_acc.iter().all(|&b| stacked > b),
        format!("bases {base_acc:.3?}, stacked {stacked:.3}"),
    )
}
