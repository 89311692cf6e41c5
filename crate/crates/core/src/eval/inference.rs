use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::metrics::ScoredPair;
use crate::data::{term_tokens, Instance, Lexicon, TermEntry};
use crate::error::{Error, Result};
use crate::model::{Model, PairInput};

pub const DEFAULT_SENSE_CAP: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InferenceMode {
    /// First-listed sense of each term only.
    #[default]
    TopDef,
    /// Maximum over all sense combinations.
    AllDef,
}

impl fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InferenceMode::TopDef => "topdef",
            InferenceMode::AllDef => "alldef",
        })
    }
}

impl FromStr for InferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "topdef" => Ok(InferenceMode::TopDef),
            "alldef" => Ok(InferenceMode::AllDef),
            other => Err(Error::Invalid(format!("unknown inference mode {other:?}"))),
        }
    }
}

fn pair_input(x: &TermEntry, dx: &[String], y: &TermEntry, dy: &[String]) -> PairInput {
    PairInput::new(term_tokens(x.surface()), dx.to_vec(), term_tokens(y.surface()), dy.to_vec())
}

pub fn infer_topdef(x: &TermEntry, y: &TermEntry, model: &Model) -> Result<f64> {
    model.predict(&pair_input(x, x.top_definition(), y, y.top_definition()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AllDefScore {
    pub score: f64,
    /// Number of forward passes run.
    pub passes: usize,
    /// Sense indices of the winning combination.
    pub best: (usize, usize),
}

/// Highest probability over the first `cap` senses of each side.
pub fn infer_alldef(x: &TermEntry, y: &TermEntry, model: &Model, cap: usize) -> Result<AllDefScore> {
    if cap == 0 {
        return Err(Error::Invalid("sense cap must be at least 1".into()));
    }
    let xs = &x.senses()[..x.senses().len().min(cap)];
    let ys = &y.senses()[..y.senses().len().min(cap)];
    let mut best = AllDefScore {
        score: f64::NEG_INFINITY,
        passes: 0,
        best: (0, 0),
    };
    for (i, sx) in xs.iter().enumerate() {
        for (j, sy) in ys.iter().enumerate() {
            let p = model.predict(&pair_input(x, &sx.tokens, y, &sy.tokens))?;
            best.passes += 1;
            if p > best.score {
                best.score = p;
                best.best = (i, j);
            }
        }
    }
    Ok(best)
}

/// Scores every instance. With a lexicon, definitions come from the
/// lexicon under `mode`; without one, each instance's own definitions are
/// used. Ids are instance positions; order follows the input.
pub fn score_instances(
    model: &Model,
    instances: &[Instance],
    lexicon: Option<&Lexicon>,
    mode: InferenceMode,
    cap: usize,
) -> Result<Vec<ScoredPair>> {
    instances
        .par_iter()
        .enumerate()
        .map(|(id, inst)| {
            let score = match lexicon {
                None => model.predict_instance(inst)?,
                Some(lex) => {
                    let (x, y) = (lex.lookup(&inst.x), lex.lookup(&inst.y));
                    match mode {
                        InferenceMode::TopDef => infer_topdef(&x, &y, model)?,
                        InferenceMode::AllDef => infer_alldef(&x, &y, model, cap)?.score,
                    }
                }
            };
            Ok(ScoredPair::new(id, score, inst.label))
        })
        .collect()
}
