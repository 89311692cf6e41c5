//! Seeded synthetic taxonomies for desk-scale experiments.
//!
//! Concepts form a random tree. Every concept is defined by a short run of
//! filler words that contains its parent's token, so the hypernym of a term
//! is always visible in the term's definition while the term embeddings
//! themselves carry no taxonomic signal.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::embeddings::Embeddings;
use super::lexicon::{Lexicon, Sense, TermEntry};
use super::records::{Relation, RelationRecord};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    /// Number of concepts in the tree.
    pub taxonomy_size: usize,
    /// Total embedding-table vocabulary: concept tokens plus filler tokens.
    pub vocab_size: usize,
    pub seed: u64,
    pub dim: usize,
    /// Filler tokens around the parent token in each definition.
    pub definition_fillers: usize,
    /// Probability that a concept gets a second, filler-only sense.
    pub extra_sense_rate: f64,
    /// Fraction of tree edges exported as hyponym rows instead of hypernym rows.
    pub hyponym_rate: f64,
    /// Negatives per positive to aim for before the recipe's downsampling.
    pub negative_ratio: f64,
    /// Coordinates of embeddings are uniform in `[-scale, scale]`.
    pub embedding_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            taxonomy_size: 200,
            vocab_size: 300,
            seed: 7,
            dim: 32,
            definition_fillers: 4,
            extra_sense_rate: 0.3,
            hyponym_rate: 0.5,
            negative_ratio: 8.0,
            embedding_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub records: Vec<RelationRecord>,
    pub lexicon: Lexicon,
    pub embeddings: Embeddings,
    /// Parent index per concept; `None` for the root.
    pub parents: Vec<Option<usize>>,
}

impl SyntheticData {
    pub fn concept(i: usize) -> String {
        format!("c{i:05}")
    }

    pub fn filler(i: usize) -> String {
        format!("w{i:05}")
    }

    pub fn is_ancestor(&self, ancestor: usize, mut node: usize) -> bool {
        while let Some(p) = self.parents[node] {
            if p == ancestor {
                return true;
            }
            node = p;
        }
        false
    }
}

pub fn generate_synthetic(taxonomy_size: usize, vocab_size: usize, seed: u64) -> Result<SyntheticData> {
    generate(&SyntheticConfig {
        taxonomy_size,
        vocab_size,
        seed,
        ..Default::default()
    })
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.taxonomy_size < 10 || cfg.vocab_size < 10 {
        return Err(Error::Invalid("synthetic taxonomy and vocabulary sizes must be at least 10".into()));
    }
    if cfg.vocab_size < cfg.taxonomy_size + cfg.definition_fillers.max(1) {
        return Err(Error::Invalid(format!(
            "vocabulary of {} cannot hold {} concepts plus fillers",
            cfg.vocab_size, cfg.taxonomy_size
        )));
    }
    let n = cfg.taxonomy_size;
    let n_fillers = cfg.vocab_size - n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let parents: Vec<Option<usize>> = (0..n).map(|i| (i > 0).then(|| rng.gen_range(0..i))).collect();

    let fillers = |rng: &mut ChaCha8Rng| -> Vec<String> {
        (0..cfg.definition_fillers)
            .map(|_| SyntheticData::filler(rng.gen_range(0..n_fillers)))
            .collect()
    };

    let mut lexicon = Lexicon::new();
    let mut glosses = Vec::with_capacity(n);
    for (i, parent) in parents.iter().enumerate() {
        let mut tokens = fillers(&mut rng);
        if let Some(p) = parent {
            let at = rng.gen_range(0..=tokens.len());
            tokens.insert(at, SyntheticData::concept(*p));
        }
        let mut senses = vec![Sense {
            id: "1".into(),
            tokens: tokens.clone(),
        }];
        if rng.gen_bool(cfg.extra_sense_rate) {
            senses.push(Sense {
                id: "2".into(),
                tokens: fillers(&mut rng),
            });
        }
        glosses.push(tokens.join(" "));
        lexicon.insert(TermEntry::new(&SyntheticData::concept(i), senses));
    }

    let mut embeddings = Embeddings::new(cfg.dim);
    let vector = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..cfg.dim)
            .map(|_| rng.gen_range(-cfg.embedding_scale..=cfg.embedding_scale))
            .collect()
    };
    for i in 0..n {
        let v = vector(&mut rng);
        embeddings.insert(&SyntheticData::concept(i), &v)?;
    }
    for i in 0..n_fillers {
        let v = vector(&mut rng);
        embeddings.insert(&SyntheticData::filler(i), &v)?;
    }

    let mut data = SyntheticData {
        records: Vec::new(),
        lexicon,
        embeddings,
        parents,
    };

    let record = |a: usize, b: usize, rel: Relation| {
        RelationRecord::new(&SyntheticData::concept(a), &SyntheticData::concept(b), rel)
            .with_glosses(&glosses[a], &glosses[b])
    };

    let mut records = Vec::new();
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, p) in data.parents.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(i);
            used.insert((i, p));
            used.insert((p, i));
            if rng.gen_bool(cfg.hyponym_rate) {
                records.push(record(p, i, Relation::Hyponym));
            } else {
                records.push(record(i, p, Relation::Hypernym));
            }
        }
    }
    let positives = n - 1;

    // One sibling negative per concept that has siblings.
    let mut negatives = 0usize;
    for kids in &children {
        for &a in kids {
            if kids.len() < 2 {
                break;
            }
            let b = *kids.iter().filter(|&&k| k != a).collect::<Vec<_>>().choose(&mut rng).unwrap();
            if used.insert((a, *b)) {
                records.push(record(a, *b, Relation::Other));
                negatives += 1;
            }
        }
    }

    // Random non-ancestor pairs, with some slack above the target ratio so the
    // recipe's downsampling always has enough negatives to draw from.
    let target = ((cfg.negative_ratio * positives as f64) * 1.1).ceil() as usize;
    let needed = target.saturating_sub(negatives + positives);
    let mut attempts = 0usize;
    let mut added = 0usize;
    while added < needed && attempts < needed * 50 + 1000 {
        attempts += 1;
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b || data.is_ancestor(b, a) || data.is_ancestor(a, b) || !used.insert((a, b)) {
            continue;
        }
        records.push(record(a, b, Relation::Other));
        added += 1;
    }
    data.records = records;
    Ok(data)
}
