//! Train/dev/test partitioning.
//!
//! Random mode shuffles instances and cuts them by the requested fractions.
//! Lexical mode partitions the term vocabulary instead and keeps only
//! instances whose two terms fall into the same part, so no term is shared
//! across parts. Since an instance survives only when both of its terms land
//! in the same part, part `k` receives a vocabulary share proportional to
//! `sqrt(fraction_k)`; the retained instances then follow the requested
//! fractions in expectation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::instances::Instance;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMode {
    Random,
    Lexical,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Random => "random",
            SplitMode::Lexical => "lexical",
        })
    }
}

impl FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(SplitMode::Random),
            "lexical" => Ok(SplitMode::Lexical),
            other => Err(format!("unknown split mode {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            mode: SplitMode::Random,
            fractions: [0.8, 0.1, 0.1],
            seed: 13,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = self.fractions;
        if f.iter().any(|v| !(*v > 0.0 && v.is_finite())) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::Invalid(format!("split fractions must be positive and sum to 1, got {f:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Split {
    pub train: Vec<Instance>,
    pub dev: Vec<Instance>,
    pub test: Vec<Instance>,
    /// Lexical mode: instances whose terms landed in different parts.
    pub dropped: usize,
}

impl Split {
    pub fn parts(&self) -> [&[Instance]; 3] {
        [&self.train, &self.dev, &self.test]
    }
}

/// Sizes `round(n·f0)`, `round(n·f1)`, remainder.
fn cut_sizes(n: usize, f: [f64; 3]) -> [usize; 3] {
    let a = ((n as f64) * f[0]).round() as usize;
    let b = (((n as f64) * f[1]).round() as usize).min(n - a.min(n));
    let a = a.min(n);
    [a, b, n - a - b]
}

pub fn split(instances: &[Instance], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let out = match spec.mode {
        SplitMode::Random => random_split(instances, spec),
        SplitMode::Lexical => lexical_split(instances, spec),
    };
    for (name, part) in ["train", "dev", "test"].iter().zip(out.parts()) {
        if part.is_empty() {
            return Err(Error::Invalid(format!("{} split left the {name} part empty", spec.mode)));
        }
    }
    Ok(out)
}

fn random_split(instances: &[Instance], spec: &SplitSpec) -> Split {
    let mut idx: Vec<usize> = (0..instances.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let [a, b, _] = cut_sizes(idx.len(), spec.fractions);
    let take = |r: &[usize]| r.iter().map(|&i| instances[i].clone()).collect::<Vec<_>>();
    Split {
        train: take(&idx[..a]),
        dev: take(&idx[a..a + b]),
        test: take(&idx[a + b..]),
        dropped: 0,
    }
}

fn vocabulary_shares(f: [f64; 3]) -> [f64; 3] {
    let r = f.map(f64::sqrt);
    let total: f64 = r.iter().sum();
    r.map(|v| v / total)
}

/// Assigns every term to a part; returns term → part index.
pub fn partition_vocabulary(instances: &[Instance], spec: &SplitSpec) -> HashMap<String, usize> {
    let vocab: BTreeSet<&str> = instances.iter().flat_map(|i| [i.x.as_str(), i.y.as_str()]).collect();
    let mut terms: Vec<&str> = vocab.into_iter().collect();
    terms.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let [a, b, _] = cut_sizes(terms.len(), vocabulary_shares(spec.fractions));
    terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let part = if i < a {
                0
            } else if i < a + b {
                1
            } else {
                2
            };
            (t.to_string(), part)
        })
        .collect()
}

fn lexical_split(instances: &[Instance], spec: &SplitSpec) -> Split {
    let part_of = partition_vocabulary(instances, spec);
    let mut out = Split::default();
    for inst in instances {
        let (px, py) = (part_of[&inst.x], part_of[&inst.y]);
        if px != py {
            out.dropped += 1;
            continue;
        }
        match px {
            0 => out.train.push(inst.clone()),
            1 => out.dev.push(inst.clone()),
            _ => out.test.push(inst.clone()),
        }
    }
    out
}
