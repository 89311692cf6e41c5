//! Frozen word-embedding table in the word2vec text format.
//!
//! ```text
//! [V d]
//! word v1 v2 ... vd
//! ```
//!
//! Tokens missing from the table get a deterministic vector seeded from a
//! hash of the token string, so the same unknown word maps to the same point
//! in every run and on both sides of a train/test boundary.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Half-width of the uniform range used for out-of-vocabulary vectors.
pub const OOV_SCALE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct LoadStats {
    pub duplicates: usize,
}

impl Embeddings {
    pub fn new(dim: usize) -> Self {
        Embeddings {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Adds a word. Returns `false` (and leaves the table unchanged) when the
    /// word is already present.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Invalid(format!(
                "embedding for {word:?} has {} values, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if self.index.contains_key(word) {
            return Ok(false);
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.values.extend_from_slice(vector);
        Ok(true)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.values[i * self.dim..(i + 1) * self.dim])
    }

    /// Table vector, or the hash-seeded fallback for unknown tokens.
    pub fn vector(&self, token: &str) -> Cow<'_, [f64]> {
        match self.get(token) {
            Some(v) => Cow::Borrowed(v),
            None => Cow::Owned(oov_vector(token, self.dim)),
        }
    }

    /// d×n feature map whose column i is the vector of token i.
    pub fn feature_map<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Matrix> {
        if tokens.is_empty() {
            return Err(Error::Empty("token sequence"));
        }
        let n = tokens.len();
        let mut m = Matrix::zeros(self.dim, n);
        for (j, t) in tokens.iter().enumerate() {
            for (i, &v) in self.vector(t.as_ref()).iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    /// SHA-256 over the dimension, words, and raw values in table order.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for (i, w) in self.words.iter().enumerate() {
            h.update(w.as_bytes());
            h.update([0u8]);
            for v in &self.values[i * self.dim..(i + 1) * self.dim] {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn read_text<R: BufRead>(reader: R, source: &str) -> Result<(Self, LoadStats)> {
        let mut table: Option<Embeddings> = None;
        let mut declared: Option<(usize, usize)> = None;
        let mut stats = LoadStats::default();
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if table.is_none() && declared.is_none() && fields.len() == 2 {
                if let (Ok(v), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    declared = Some((v, d));
                    continue;
                }
            }
            let word = fields[0];
            let values = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(source, lineno, format!("non-numeric field {f:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let t = table.get_or_insert_with(|| Embeddings::new(declared.map_or(values.len(), |(_, d)| d)));
            if values.len() != t.dim || values.is_empty() {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("expected {} values, found {}", t.dim, values.len()),
                ));
            }
            if !t.insert(word, &values)? {
                log::warn!("{source}:{lineno}: duplicate word {word:?}, keeping first occurrence");
                stats.duplicates += 1;
            }
        }
        let table = match (table, declared) {
            (Some(t), _) => t,
            (None, Some((_, d))) => Embeddings::new(d),
            (None, None) => return Err(Error::Empty("embedding file has no vectors")),
        };
        if let Some((v, _)) = declared {
            if v != table.len() + stats.duplicates {
                log::warn!("{source}: header declares {v} words, found {}", table.len() + stats.duplicates);
            }
        }
        Ok((table, stats))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(BufReader::new(f), &path.display().to_string()).map(|(t, _)| t)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(w, "{word}")?;
            for v in &self.values[i * self.dim..(i + 1) * self.dim] {
                // `{}` on f64 prints the shortest string that parses back exactly.
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_text(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }
}

/// Deterministic vector for a token absent from the table.
pub fn oov_vector(token: &str, dim: usize) -> Vec<f64> {
    let digest = Sha256::digest(token.as_bytes());
    let mut seed = [0u8; 8];
    seed.copy_from_slice(&digest[..8]);
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(seed));
    (0..dim).map(|_| rng.gen_range(-OOV_SCALE..=OOV_SCALE)).collect()
}
