//! Config builders and a whole-pipeline driver for the CLI tests.
#![allow(dead_code)]

use std::path::Path;

use tweetstack_cli::{
    cmd_evaluate, cmd_ingest, cmd_stack, cmd_synth, cmd_train, EvalSplit, EvalTarget, ModelKind, RunConfig,
};
use tweetstack_core::eval::Report;

pub const SYNTHETIC_CONFIG: &str = include_str!("../../../../configs/synthetic.toml");

/// The committed synthetic config with its corpus and outputs under `dir`.
pub fn synthetic_config(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(SYNTHETIC_CONFIG).expect("committed config parses");
    cfg.paths.corpus = Some(dir.join("corpus.csv"));
    cfg.paths.output_dir = dir.join("out");
    cfg
}

/// A smaller, faster variant for tests that only need working artifacts.
pub fn small_config(dir: &Path) -> RunConfig {
    let mut cfg = synthetic_config(dir);
    cfg.synth.size = 400;
    cfg.rnn.hidden = 16;
    cfg.rnn.embedding_dim = 16;
    cfg.rnn.epochs = 3;
    cfg.rnn.learning_rate = 1e-2;
    cfg.ngram.dim = 32;
    cfg.ngram.bucket_count = 50_000;
    cfg.tsne.sample = Some(30);
    cfg.tsne.perplexity = 10.0;
    cfg.tsne.iterations = 300;
    cfg
}

/// synth, ingest, train x 3, stack, evaluate stacked on the test split.
pub fn run_pipeline(cfg: &RunConfig) -> Report {
    cmd_synth(cfg, None).expect("synth");
    cmd_ingest(cfg).expect("ingest");
    for kind in [ModelKind::Lex, ModelKind::Ngram, ModelKind::Rnn] {
        cmd_train(cfg, kind).expect("train");
    }
    cmd_stack(cfg).expect("stack");
    cmd_evaluate(cfg, EvalTarget::Stacked, EvalSplit::Test).expect("evaluate")
}
