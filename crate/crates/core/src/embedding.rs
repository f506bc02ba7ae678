//! Vocabulary and the dual word-embedding table: a 100-dimensional and a
//! 300-dimensional table concatenated per word into 400-dimensional rows.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use aggrolab_numerics::{rng_stream, Tensor};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const GLOVE_DIM: usize = 100;
pub const FASTTEXT_DIM: usize = 300;
pub const EMBED_DIM: usize = GLOVE_DIM + FASTTEXT_DIM;
/// Row of the all-zero padding vector. Unknown words also map here.
pub const PAD_ROW: usize = 0;

/// Words indexed from 1 in order of decreasing frequency, ties alphabetical.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i + 1))
            .collect();
        Vocabulary { words, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

impl Vocabulary {
    pub fn build<'a, S: AsRef<str> + 'a>(docs: impl IntoIterator<Item = &'a [S]>) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            for w in doc {
                *counts.entry(w.as_ref()).or_default() += 1;
            }
        }
        let mut words: Vec<(&str, usize)> = counts.into_iter().collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        words
            .into_iter()
            .map(|(w, _)| w.to_string())
            .collect::<Vec<_>>()
            .into()
    }

    /// Number of words, excluding the padding row.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Rows of the embedding table, padding included.
    pub fn rows(&self) -> usize {
        self.words.len() + 1
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn row(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Table rows for `tokens`; unknown words map to [`PAD_ROW`].
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.row(t.as_ref()).unwrap_or(PAD_ROW))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Words missing from a table get zeros in that table's half.
    #[default]
    Zero,
    /// Words missing from a table get the normalised mean of seeded random
    /// vectors for their character 3- to 5-grams.
    HashNgram,
}

impl std::str::FromStr for OovPolicy {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(OovPolicy::Zero),
            "hash_ngram" => Ok(OovPolicy::HashNgram),
            other => Err(CoreError::invalid("oov policy", format!("`{other}`"))),
        }
    }
}

/// Euclidean norm of [`hash_ngram_vector`] outputs.
pub const HASH_NGRAM_NORM: f64 = 5.0;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Character n-grams (n = 3..=5) of `<word>`.
pub fn char_ngrams(word: &str) -> Vec<String> {
    let chars: Vec<char> = format!("<{word}>").chars().collect();
    let mut out = Vec::new();
    for n in 3..=5 {
        for w in chars.windows(n) {
            out.push(w.iter().collect());
        }
    }
    if out.is_empty() {
        out.push(chars.iter().collect());
    }
    out
}

/// Deterministic subword vector for `word`: mean of one uniform random
/// vector per character n-gram, rescaled to norm [`HASH_NGRAM_NORM`].
/// Words sharing n-grams get correlated vectors.
pub fn hash_ngram_vector(word: &str, dim: usize, seed: u64) -> Vec<f32> {
    let mut acc = vec![0.0f64; dim];
    for gram in char_ngrams(word) {
        let mut rng = rng_stream(seed, &[dim as u64, fnv1a(gram.as_bytes())]);
        for a in &mut acc {
            *a += rng.random_range(-1.0..1.0);
        }
    }
    let norm = acc.iter().map(|a| a * a).sum::<f64>().sqrt();
    let s = if norm > 0.0 {
        HASH_NGRAM_NORM / norm
    } else {
        0.0
    };
    acc.into_iter().map(|a| (a * s) as f32).collect()
}

/// Embedding table `[V + 1, 400]`; row 0 is the zero padding vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DualEmbedding {
    pub vocab: Vocabulary,
    pub matrix: Tensor<f32>,
    pub oov_policy: OovPolicy,
}

impl DualEmbedding {
    /// Assembles the table from per-word halves; `None` halves follow `policy`.
    pub fn assemble(
        vocab: Vocabulary,
        policy: OovPolicy,
        seed: u64,
        mut lookup: impl FnMut(&str) -> (Option<Vec<f32>>, Option<Vec<f32>>),
    ) -> Self {
        let mut data = vec![0.0f32; vocab.rows() * EMBED_DIM];
        for (i, w) in vocab.words().iter().enumerate() {
            let row = &mut data[(i + 1) * EMBED_DIM..(i + 2) * EMBED_DIM];
            let (g, f) = lookup(w);
            for (half, vec, dim) in [(0, g, GLOVE_DIM), (GLOVE_DIM, f, FASTTEXT_DIM)] {
                let v = match (vec, policy) {
                    (Some(v), _) => v,
                    (None, OovPolicy::HashNgram) => hash_ngram_vector(w, dim, seed),
                    (None, OovPolicy::Zero) => continue,
                };
                row[half..half + dim].copy_from_slice(&v);
            }
        }
        let matrix =
            Tensor::new(vec![vocab.rows(), EMBED_DIM], data).expect("rows * width entries");
        DualEmbedding {
            vocab,
            matrix,
            oov_policy: policy,
        }
    }

    /// Table made only of subword hash vectors, for runs without pretrained files.
    pub fn hashed(vocab: Vocabulary, seed: u64) -> Self {
        Self::assemble(vocab, OovPolicy::HashNgram, seed, |_| (None, None))
    }
}

/// Reads the vectors of `wanted` words from a word2vec-style text file
/// (`word v1 ... vD` per line, optional `count dim` header line).
pub fn read_vectors(
    path: &Path,
    dim: usize,
    wanted: &HashSet<&str>,
) -> Result<HashMap<String, Vec<f32>>> {
    let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let word = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.filter(|p| !p.is_empty()).collect();
        if i == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() {
            let declared: usize = rest[0].parse().map_err(|_| CoreError::EmbeddingDim {
                path: path.to_path_buf(),
                line: 1,
                expected: dim,
                got: 0,
            })?;
            if declared != dim {
                return Err(CoreError::EmbeddingDim {
                    path: path.to_path_buf(),
                    line: 1,
                    expected: dim,
                    got: declared,
                });
            }
            continue;
        }
        if rest.len() != dim {
            return Err(CoreError::EmbeddingDim {
                path: path.to_path_buf(),
                line: i + 1,
                expected: dim,
                got: rest.len(),
            });
        }
        if !wanted.contains(word) || out.contains_key(word) {
            continue;
        }
        let v = rest
            .iter()
            .map(|s| s.parse::<f32>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f32>>>()
            .ok_or_else(|| CoreError::MalformedRow {
                path: path.to_path_buf(),
                row: i + 1,
                reason: "non-numeric vector entry".into(),
            })?;
        out.insert(word.to_string(), v);
    }
    Ok(out)
}

/// Loads the 100-d and 300-d tables for `vocab` and concatenates them per word.
pub fn load_dual_embeddings(
    glove: &Path,
    fasttext: &Path,
    vocab: Vocabulary,
    policy: OovPolicy,
    seed: u64,
) -> Result<DualEmbedding> {
    let wanted: HashSet<&str> = vocab.words().iter().map(String::as_str).collect();
    let mut g = read_vectors(glove, GLOVE_DIM, &wanted)?;
    let mut f = read_vectors(fasttext, FASTTEXT_DIM, &wanted)?;
    log::info!(
        "embeddings: {} words, {} in {}, {} in {}",
        vocab.len(),
        g.len(),
        glove.display(),
        f.len(),
        fasttext.display()
    );
    Ok(DualEmbedding::assemble(vocab, policy, seed, |w| {
        (g.remove(w), f.remove(w))
    }))
}
