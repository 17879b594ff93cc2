use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tweetstack_cli::config::RunConfig;
use tweetstack_cli::{
    cmd_evaluate, cmd_ingest, cmd_inspect, cmd_stack, cmd_synth, cmd_train, cmd_tsne, EvalSplit, EvalTarget,
    InspectView, ModelKind, Result,
};
use tweetstack_core::rnn::AttentionGrouping;

#[derive(Parser)]
#[command(name = "tweetstack", version, about = "Abusive-language classifiers with a stacked ensemble")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `paths.output_dir`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides `paths.corpus`.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Overrides `paths.lexicon` (a .dic file or builtin:demo).
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    /// Overrides `paths.embeddings`.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grouping {
    Gold,
    Predicted,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the keyword-planted synthetic corpus.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Normalize, relabel and split the corpus.
    Ingest,
    /// Train one base model.
    Train {
        model: ModelKind,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Fit the stacking meta model over the three trained bases.
    Stack {
        /// Use k-fold out-of-fold base predictions for the meta rows.
        #[arg(long)]
        out_of_fold: bool,
    },
    /// Score a model and write its report and confusion heatmap.
    Evaluate {
        target: EvalTarget,
        #[arg(long, value_enum, default_value = "test")]
        split: EvalSplit,
    },
    /// Print an interpretability view as TSV.
    Inspect {
        #[command(subcommand)]
        view: View,
    },
    /// Project n-gram sentence embeddings of the test split with t-SNE.
    Tsne {
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        perplexity: Option<f64>,
    },
}

#[derive(Subcommand)]
enum View {
    /// Largest lexicon-model coefficients by magnitude.
    Coef {
        #[arg(long)]
        class: Option<String>,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Nearest words in the n-gram embedding space.
    Neighbors {
        word: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Neighbors of vec(a) - vec(b) + vec(c).
    Analogy {
        a: String,
        b: String,
        c: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Class-wise mean attention per word.
    Attention {
        #[arg(long, default_value_t = 5)]
        min_count: usize,
        #[arg(long, default_value_t = 20)]
        top_k: usize,
        #[arg(long, value_enum, default_value = "gold")]
        group_by: Grouping,
        /// Keep punctuation tokens in the tables.
        #[arg(long)]
        include_punctuation: bool,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &cli.output_dir {
        cfg.paths.output_dir = p.clone();
    }
    if let Some(p) = &cli.corpus {
        cfg.paths.corpus = Some(p.clone());
    }
    if let Some(p) = &cli.lexicon {
        cfg.paths.lexicon = Some(p.clone());
    }
    if let Some(p) = &cli.embeddings {
        cfg.paths.embeddings = Some(p.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Synth { out, size } => {
            if let Some(n) = size {
                cfg.synth.size = n;
            }
            cmd_synth(&cfg, out.as_deref())?;
        }
        Command::Ingest => {
            cmd_ingest(&cfg)?;
        }
        Command::Train { model, epochs } => {
            if let Some(e) = epochs {
                match model {
                    ModelKind::Lex => cfg.lex.epochs = e,
                    ModelKind::Ngram => cfg.ngram.epochs = e,
                    ModelKind::Rnn => cfg.rnn.epochs = e,
                }
            }
            cmd_train(&cfg, model)?;
        }
        Command::Stack { out_of_fold } => {
            cfg.stack.out_of_fold |= out_of_fold;
            cmd_stack(&cfg)?;
        }
        Command::Evaluate { target, split } => {
            cmd_evaluate(&cfg, target, split)?;
        }
        Command::Inspect { view } => {
            let view = match view {
                View::Coef { class, k } => InspectView::Coef { class, k },
                View::Neighbors { word, k } => InspectView::Neighbors { word, k },
                View::Analogy { a, b, c, k } => InspectView::Analogy { a, b, c, k },
                View::Attention {
                    min_count,
                    top_k,
                    group_by,
                    include_punctuation,
                } => InspectView::Attention {
                    include_punctuation,
                    min_count,
                    top_k: Some(top_k),
                    grouping: match group_by {
                        Grouping::Gold => AttentionGrouping::Gold,
                        Grouping::Predicted => AttentionGrouping::Predicted,
                    },
                },
            };
            print!("{}", cmd_inspect(&cfg, &view)?);
        }
        Command::Tsne { sample, perplexity } => {
            if let Some(p) = perplexity {
                cfg.tsne.perplexity = p;
            }
            cmd_tsne(&cfg, sample)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
