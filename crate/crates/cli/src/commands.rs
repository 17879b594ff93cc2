//! One function per subcommand. Each reads its inputs through hash-checked
//! manifests and writes deterministic artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tweetstack_core::corpus::{self, merge_labels, oversample, ProcessedTweet};
use tweetstack_core::digest::sha256_file;
use tweetstack_core::ensemble::{self, BaseTrainer, StackedManifest, StackedModel};
use tweetstack_core::eval::{
    confusion, heatmap_svg, scatter_svg, tsne, write_svg, write_tsne_csv, ModelResult, Projection2D, Report,
    StackedSection,
};
use tweetstack_core::models::{Classifier, LexiconClassifier};
use tweetstack_core::ngram::{self, NgramModel};
use tweetstack_core::rnn::{self, classwise_attention, AttentionGrouping, AttentionOptions, BiLstmModel};
use tweetstack_core::{synth, Label, Matrix};

use crate::artifacts::{
    config_value, ensure_dir, load_data, verified_model, write_json, DataManifest, Layout, LoadedData, ModelKind,
    ModelManifest,
};
use crate::config::{seed_offset, RunConfig};
use crate::error::{io, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalTarget {
    Lex,
    Ngram,
    Rnn,
    Stacked,
}

impl EvalTarget {
    pub fn name(self) -> &'static str {
        match self {
            EvalTarget::Lex => "lex",
            EvalTarget::Ngram => "ngram",
            EvalTarget::Rnn => "rnn",
            EvalTarget::Stacked => "stacked",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum EvalSplit {
    Valid,
    #[default]
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InspectView {
    Coef {
        class: Option<String>,
        k: usize,
    },
    Neighbors {
        word: String,
        k: usize,
    },
    Analogy {
        a: String,
        b: String,
        c: String,
        k: usize,
    },
    Attention {
        min_count: usize,
        top_k: Option<usize>,
        grouping: AttentionGrouping,
        include_punctuation: bool,
    },
}

fn layout(cfg: &RunConfig) -> Layout {
    Layout::new(&cfg.paths.output_dir)
}

fn log(message: impl AsRef<str>) {
    eprintln!("{}", message.as_ref());
}

/// Writes the synthetic corpus to `out` (or `paths.corpus`).
pub fn cmd_synth(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => cfg
            .paths
            .corpus
            .clone()
            .ok_or_else(|| CliError::Config("synth needs --out or paths.corpus".into()))?,
    };
    let records = synth::generate(&cfg.synth_config())?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    match corpus::Format::from_path(&path) {
        Some(corpus::Format::Jsonl) => corpus::write_raw_jsonl(&path, &records)?,
        Some(corpus::Format::Csv) => corpus::write_raw_csv(&path, &records)?,
        _ => {
            return Err(CliError::Config(format!(
                "synthetic corpus path {} must end in .csv or .jsonl",
                path.display()
            )))
        }
    }
    log(format!("wrote {} synthetic tweets to {}", records.len(), path.display()));
    Ok(path)
}

/// Normalizes, relabels and splits the corpus; returns the manifest path.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<PathBuf> {
    let (path, format) = cfg.corpus()?;
    let raw = corpus::load(path, format)?;
    let processed: Vec<ProcessedTweet> = raw.iter().map(ProcessedTweet::from_raw).collect();
    let label_map = cfg.label_map()?;
    // Split on the original labels so a merged run scores the same tweets.
    let mut split = corpus::split(&processed, &cfg.split_spec())?;
    for part in [&mut split.train, &mut split.valid, &mut split.test] {
        *part = merge_labels(part, &label_map);
    }
    split.check_disjoint()?;

    let layout = layout(cfg);
    ensure_dir(&layout.data_dir())?;
    for (name, part) in crate::artifacts::SPLIT_NAMES.iter().zip(split.parts()) {
        corpus::write_jsonl(&layout.split_file(name), part)?;
    }
    let manifest = DataManifest::new(sha256_file(path)?, &split, label_map, &layout)?;
    let manifest_path = layout.data_manifest();
    write_json(&manifest_path, &manifest)?;
    log(format!(
        "ingested {} tweets: train {} / valid {} / test {}",
        processed.len(),
        split.train.len(),
        split.valid.len(),
        split.test.len()
    ));
    Ok(manifest_path)
}

/// The train split as seen by base models: oversampled over the classes
/// present when enabled.
fn training_set(cfg: &RunConfig, train: &[ProcessedTweet]) -> Result<Vec<ProcessedTweet>> {
    if !cfg.labels.oversample {
        return Ok(train.to_vec());
    }
    let counts = corpus::class_counts(train);
    let present: Vec<Label> = Label::ALL.into_iter().filter(|l| counts[l.index()] > 0).collect();
    Ok(oversample(train, &present, cfg.stage_seed(seed_offset::OVERSAMPLE))?)
}

fn write_loss_log(path: &Path, losses: &[f64]) -> Result<()> {
    let mut text = String::from("epoch\tloss\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(text, "{}\t{l}", i + 1);
    }
    fs::write(path, text).map_err(|e| io(path, e))
}

fn fit_lex(cfg: &RunConfig, train: &[ProcessedTweet]) -> Result<(LexiconClassifier, Vec<f64>)> {
    let lexicon = cfg.lexicon()?;
    let (model, log) = LexiconClassifier::fit(train, &lexicon, &cfg.lex_train())?;
    Ok((model, log.fit.epoch_losses))
}

fn fit_ngram(cfg: &RunConfig, train: &[ProcessedTweet]) -> Result<(NgramModel, Vec<f64>)> {
    let (model, log) = ngram::fit(train, &cfg.ngram_train())?;
    Ok((model, log.epoch_losses))
}

fn fit_rnn(cfg: &RunConfig, train: &[ProcessedTweet]) -> Result<(BiLstmModel, Vec<f64>)> {
    let config = cfg.rnn_train();
    let (model, log) = match &cfg.paths.embeddings {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::Config(format!("embeddings {} do not exist", path.display())));
            }
            let vocab = rnn::build_vocab(train, config.min_count);
            let table = rnn::load_embeddings(path, &vocab, config.seed)?;
            rnn::fit_with_embeddings(train, &config, &table)?
        }
        None => rnn::fit(train, &config)?,
    };
    Ok((model, log.epochs.iter().map(|e| e.mean_loss).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub model_path: PathBuf,
    pub sha256: String,
    pub epoch_losses: Vec<f64>,
}

pub fn cmd_train(cfg: &RunConfig, kind: ModelKind) -> Result<TrainSummary> {
    let data = load_data(&layout(cfg))?;
    let layout = layout(cfg);
    ensure_dir(&layout.models_dir())?;
    let train = training_set(cfg, &data.split.train)?;
    let model_path = layout.model_file(kind);
    let (losses, config) = match kind {
        ModelKind::Lex => {
            let (m, l) = fit_lex(cfg, &train)?;
            m.save(&model_path)?;
            (l, config_value(&cfg.lex_train()))
        }
        ModelKind::Ngram => {
            let (m, l) = fit_ngram(cfg, &train)?;
            m.save(&model_path)?;
            (l, config_value(&cfg.ngram_train()))
        }
        ModelKind::Rnn => {
            let (m, l) = fit_rnn(cfg, &train)?;
            m.save(&model_path)?;
            (l, config_value(&cfg.rnn_train()))
        }
    };
    write_loss_log(&layout.train_log(kind), &losses)?;
    let manifest = ModelManifest::new(kind, &layout, &data.manifest_sha256, train.len(), config)?;
    write_json(&layout.model_manifest(kind), &manifest)?;
    log(format!(
        "trained {} on {} tweets; final loss {:.6}",
        kind.name(),
        train.len(),
        losses.last().copied().unwrap_or(f64::NAN)
    ));
    Ok(TrainSummary {
        model_path,
        sha256: manifest.sha256,
        epoch_losses: losses,
    })
}

fn load_lex(layout: &Layout, data: &LoadedData) -> Result<LexiconClassifier> {
    let (path, _) = verified_model(layout, ModelKind::Lex, &data.manifest_sha256)?;
    Ok(LexiconClassifier::load(&path)?)
}

fn load_ngram(layout: &Layout, data: &LoadedData) -> Result<NgramModel> {
    let (path, _) = verified_model(layout, ModelKind::Ngram, &data.manifest_sha256)?;
    Ok(NgramModel::load(&path)?)
}

fn load_rnn(layout: &Layout, data: &LoadedData) -> Result<BiLstmModel> {
    let (path, _) = verified_model(layout, ModelKind::Rnn, &data.manifest_sha256)?;
    Ok(BiLstmModel::load(&path)?)
}

struct FnTrainer<F>(F);

impl<F> BaseTrainer for FnTrainer<F>
where
    F: Fn(&[ProcessedTweet]) -> Result<Box<dyn Classifier>>,
{
    fn train(&self, train: &[ProcessedTweet]) -> tweetstack_core::Result<Box<dyn Classifier>> {
        (self.0)(train).map_err(|e| match e {
            CliError::Core(inner) => inner,
            other => tweetstack_core::Error::Config(other.to_string()),
        })
    }
}

const DATA_PROVENANCE_KEY: &str = "data_manifest_sha256";

/// Fits the meta model over the three trained bases and writes the
/// stacked manifest.
pub fn cmd_stack(cfg: &RunConfig) -> Result<PathBuf> {
    let layout = layout(cfg);
    let data = load_data(&layout)?;
    let lex = load_lex(&layout, &data)?;
    let ng = load_ngram(&layout, &data)?;
    let bilstm = load_rnn(&layout, &data)?;
    let bases: [&dyn Classifier; 3] = [&lex, &ng, &bilstm];

    let meta = if cfg.stack.out_of_fold {
        let lex_t = FnTrainer(|t: &[ProcessedTweet]| {
            let (m, _) = fit_lex(cfg, &training_set(cfg, t)?)?;
            Ok(Box::new(m) as Box<dyn Classifier>)
        });
        let ng_t = FnTrainer(|t: &[ProcessedTweet]| {
            let (m, _) = fit_ngram(cfg, &training_set(cfg, t)?)?;
            Ok(Box::new(m) as Box<dyn Classifier>)
        });
        let rnn_t = FnTrainer(|t: &[ProcessedTweet]| {
            let (m, _) = fit_rnn(cfg, &training_set(cfg, t)?)?;
            Ok(Box::new(m) as Box<dyn Classifier>)
        });
        let trainers: [&dyn BaseTrainer; 3] = [&lex_t, &ng_t, &rnn_t];
        ensemble::fit_meta_out_of_fold(&trainers, &data.split, &cfg.meta(), cfg.stack.folds)?.0
    } else {
        ensemble::fit_meta(&bases, &data.split, &cfg.meta())?
    };

    let models = layout.models_dir();
    let rel = ModelKind::ALL.map(|k| PathBuf::from(k.file_name()));
    let mut manifest = StackedManifest::new(&models, [&rel[0], &rel[1], &rel[2]], meta)?;
    manifest
        .provenance
        .insert(DATA_PROVENANCE_KEY.into(), data.manifest_sha256.clone());
    let path = layout.stacked_manifest();
    manifest.write(&path)?;
    log(format!(
        "stacked meta model: l2 = {}, validation accuracy per l2 = {:?}",
        manifest.meta.selected_l2(),
        manifest
            .meta
            .trials
            .iter()
            .map(|t| (t.l2, t.valid_accuracy))
            .collect::<Vec<_>>()
    ));
    Ok(path)
}

fn score<C: Classifier + ?Sized>(model: &C, tweets: &[ProcessedTweet]) -> Result<ModelResult> {
    let preds: Vec<usize> = tweets.iter().map(|t| model.classify(&t.tokens)).collect();
    let golds: Vec<usize> = tweets.iter().map(|t| t.label.index()).collect();
    Ok(ModelResult::from_confusion(&confusion(&preds, &golds, &Label::names())?))
}

fn load_stacked(layout: &Layout, data: &LoadedData) -> Result<(StackedModel, StackedManifest)> {
    let path = layout.stacked_manifest();
    if !path.is_file() {
        return Err(CliError::MissingArtifact {
            path,
            command: "stack".into(),
        });
    }
    let manifest = StackedManifest::read(&path)?;
    if manifest.provenance.get(DATA_PROVENANCE_KEY) != Some(&data.manifest_sha256) {
        return Err(CliError::Stale {
            path,
            reason: "stacked on different data; rerun `tweetstack stack`".into(),
        });
    }
    let model = StackedModel::load(&path).map_err(|e| match e {
        tweetstack_core::Error::HashMismatch { path, .. } => CliError::Stale {
            path,
            reason: "base model changed since stacking; rerun `tweetstack stack`".into(),
        },
        other => other.into(),
    })?;
    Ok((model, manifest))
}

fn hash_of(path: &Path) -> Result<String> {
    Ok(sha256_file(path)?)
}

/// Scores one model (or the stacked ensemble with its bases) and writes the
/// report and confusion heatmap.
pub fn cmd_evaluate(cfg: &RunConfig, target: EvalTarget, split: EvalSplit) -> Result<Report> {
    let layout = layout(cfg);
    let data = load_data(&layout)?;
    let (split_name, tweets) = match split {
        EvalSplit::Valid => ("valid", &data.split.valid),
        EvalSplit::Test => ("test", &data.split.test),
    };
    let mut report = Report::default();
    let md = &mut report.metadata;
    md.insert("seed".into(), cfg.seed.to_string());
    md.insert("eval_split".into(), split_name.into());
    md.insert("config_sha256".into(), cfg.portable_digest());
    md.insert("data_manifest_sha256".into(), data.manifest_sha256.clone());
    md.insert("corpus_sha256".into(), data.manifest.corpus_sha256.clone());

    match target {
        EvalTarget::Lex => {
            let m = load_lex(&layout, &data)?;
            report.models.insert("lex".into(), score(&m, tweets)?);
        }
        EvalTarget::Ngram => {
            let m = load_ngram(&layout, &data)?;
            report.models.insert("ngram".into(), score(&m, tweets)?);
        }
        EvalTarget::Rnn => {
            let m = load_rnn(&layout, &data)?;
            report.models.insert("rnn".into(), score(&m, tweets)?);
        }
        EvalTarget::Stacked => {
            let (model, manifest) = load_stacked(&layout, &data)?;
            for (name, base) in ensemble::BASE_NAMES.iter().zip(model.bases()) {
                report.models.insert(name.to_string(), score(base, tweets)?);
            }
            let stacked = score(&model, tweets)?;
            let best_base = ensemble::BASE_NAMES
                .iter()
                .map(|n| report.models[*n].accuracy)
                .fold(0.0, f64::max);
            report.stacked = Some(StackedSection {
                accuracy: stacked.accuracy,
                selected_l2: manifest.meta.selected_l2(),
                out_of_fold: manifest.meta.out_of_fold,
                best_base_accuracy: best_base,
                l2_trials: manifest.meta.trials.clone(),
            });
            report.models.insert("stacked".into(), stacked);
            report
                .metadata
                .insert("stacked_sha256".into(), hash_of(&layout.stacked_manifest())?);
        }
    }
    for kind in ModelKind::ALL {
        if report.models.contains_key(kind.name()) {
            report
                .metadata
                .insert(format!("{}_sha256", kind.name()), hash_of(&layout.model_file(kind))?);
        }
    }

    ensure_dir(&layout.reports_dir())?;
    let name = target.name();
    report.write(&layout.report(name))?;
    let result = &report.models[name];
    let svg = heatmap_svg(
        &result.confusion_fractions,
        &result.class_names,
        &format!("{name} confusion fractions ({split_name})"),
    );
    write_svg(&layout.heatmap(name), &svg)?;
    log(format!("{name} {split_name} accuracy {:.4}", result.accuracy));
    Ok(report)
}

fn tsv_rows<S: std::fmt::Display>(rows: impl IntoIterator<Item = (S, f64)>) -> String {
    let mut out = String::new();
    for (w, v) in rows {
        let _ = writeln!(out, "{w}\t{v}");
    }
    out
}

/// Renders an interpretability view as TSV.
pub fn cmd_inspect(cfg: &RunConfig, view: &InspectView) -> Result<String> {
    let layout = layout(cfg);
    let data = load_data(&layout)?;
    match view {
        InspectView::Coef { class, k } => {
            let m = load_lex(&layout, &data)?;
            let classes: Vec<String> = match class {
                Some(c) => vec![c.clone()],
                None => Label::names(),
            };
            let mut out = String::new();
            for c in &classes {
                for (feature, w) in m.model.top_coefficients(c, *k)? {
                    let _ = writeln!(out, "{c}\t{feature}\t{w}");
                }
            }
            Ok(out)
        }
        InspectView::Neighbors { word, k } => {
            let m = load_ngram(&layout, &data)?;
            Ok(tsv_rows(m.nearest_neighbors(word, *k)?))
        }
        InspectView::Analogy { a, b, c, k } => {
            let m = load_ngram(&layout, &data)?;
            Ok(tsv_rows(m.analogy(a, b, c, *k)?))
        }
        InspectView::Attention {
            min_count,
            top_k,
            grouping,
            include_punctuation,
        } => {
            let m = load_rnn(&layout, &data)?;
            let opts = AttentionOptions {
                min_count: *min_count,
                top_k: *top_k,
                grouping: *grouping,
                include_punctuation: *include_punctuation,
            };
            let parts = data.split.parts();
            Ok(classwise_attention(&m, &parts, &opts).to_tsv())
        }
    }
}

/// Projects n-gram sentence embeddings of the test split to 2-D.
pub fn cmd_tsne(cfg: &RunConfig, sample: Option<usize>) -> Result<Projection2D> {
    let layout = layout(cfg);
    let data = load_data(&layout)?;
    let model = load_ngram(&layout, &data)?;
    let tweets = &data.split.test;
    let mut chosen: Vec<usize> = (0..tweets.len()).collect();
    if let Some(n) = sample.or(cfg.tsne.sample) {
        if n < tweets.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.stage_seed(seed_offset::TSNE));
            chosen = rand::seq::index::sample(&mut rng, tweets.len(), n).into_vec();
            chosen.sort_unstable();
        }
    }
    let rows: Vec<Vec<f64>> = chosen.iter().map(|&i| model.sentence_embedding(&tweets[i].tokens)).collect();
    let labels: Vec<usize> = chosen.iter().map(|&i| tweets[i].label.index()).collect();
    let ids: Vec<String> = chosen.iter().map(|&i| tweets[i].id.clone()).collect();
    let x = Matrix::from_rows(&rows)?;
    let projection = tsne(&x, &labels, &cfg.tsne_config())?;

    ensure_dir(&layout.reports_dir())?;
    write_tsne_csv(&layout.tsne_csv(), &ids, &projection, &Label::names())?;
    let points: Vec<[f64; 2]> = projection.coords.iter_rows().map(|r| [r[0], r[1]]).collect();
    let svg = scatter_svg(&points, &labels, &Label::names(), "t-SNE of n-gram sentence embeddings");
    write_svg(&layout.tsne_svg(), &svg)?;
    log(format!(
        "t-SNE over {} tweets: KL {:.4} after exaggeration, {:.4} final",
        ids.len(),
        projection.kl_after_exaggeration,
        projection.kl_final
    ));
    Ok(projection)
}
