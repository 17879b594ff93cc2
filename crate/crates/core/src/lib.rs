//! Four-class abusive-language classification toolkit.
//!
//! Three diverse base classifiers (logistic regression over lexicon
//! features, a bag-of-n-grams embedding classifier and an attention
//! BiLSTM) feed a stacked logistic-regression meta model. Each base model
//! exposes its own interpretability view: signed coefficients, embedding
//! neighbors and analogies, and class-wise attention averages.

pub mod binio;
pub mod corpus;
pub mod digest;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod lexfeat;
pub mod linalg;
pub mod linmodel;
pub mod models;
pub mod ngram;
pub mod rnn;
pub mod synth;

pub use corpus::{Label, ProcessedTweet, RawRecord, NUM_CLASSES};
pub use error::{Error, Result};
pub use linalg::Matrix;
