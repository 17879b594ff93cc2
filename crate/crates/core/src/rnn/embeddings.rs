use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Bound of the uniform initialization for words without a pretrained vector.
pub const INIT_BOUND: f64 = 0.1;

/// Word vectors for a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub words: Vec<String>,
    pub dim: usize,
    /// One row per word.
    pub vectors: Matrix,
    pub trainable: bool,
    /// Words whose vector came from a pretrained file.
    pub pretrained: usize,
}

impl EmbeddingTable {
    /// Uniform `[-0.1, 0.1]` vectors drawn in vocabulary order.
    pub fn random(vocab: &[String], dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Matrix::zeros(vocab.len(), dim);
        for v in vectors.as_mut_slice() {
            *v = rng.gen_range(-INIT_BOUND..=INIT_BOUND);
        }
        EmbeddingTable {
            words: vocab.to_vec(),
            dim,
            vectors,
            trainable: true,
            pretrained: 0,
        }
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect()
    }
}

/// Reads whitespace-separated text vectors (`word v1 ... vd` per line).
///
/// The dimension is taken from the first line. Vocabulary words found in
/// the file take those vectors; the rest keep a seeded uniform
/// initialization. Lines for words outside the vocabulary are still
/// checked for a consistent dimension.
pub fn load_embeddings(path: &Path, vocab: &[String], seed: u64) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dim: Option<usize> = None;
    let mut found: HashMap<String, Vec<f64>> = HashMap::new();
    let wanted: HashMap<&str, ()> = vocab.iter().map(|w| (w.as_str(), ())).collect();

    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        let values: Vec<&str> = fields.collect();
        let expected = *dim.get_or_insert(values.len());
        if values.len() != expected || expected == 0 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("vector for {word:?} has {} components, expected {expected}", values.len()),
            });
        }
        if !wanted.contains_key(word) || found.contains_key(word) {
            continue;
        }
        let parsed = values
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                message: format!("bad component for {word:?}: {e}"),
            })?;
        found.insert(word.to_string(), parsed);
    }

    let dim = match dim {
        Some(d) => d,
        None if vocab.is_empty() => 0,
        None => {
            return Err(Error::Parse {
                line: 0,
                message: format!("{} holds no vectors", path.display()),
            })
        }
    };
    let mut table = EmbeddingTable::random(vocab, dim, seed);
    for (i, w) in vocab.iter().enumerate() {
        if let Some(v) = found.get(w) {
            table.vectors.row_mut(i).copy_from_slice(v);
            table.pretrained += 1;
        }
    }
    Ok(table)
}
