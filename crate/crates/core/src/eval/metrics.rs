use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

pub const DEFAULT_AP_K: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredPair {
    pub id: usize,
    /// Probability of hypernymy.
    pub score: f64,
    pub gold: bool,
}

impl ScoredPair {
    pub fn new(id: usize, score: f64, gold: bool) -> Self {
        ScoredPair { id, score, gold }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Predicts positive iff `score >= threshold`. Zero denominators give 0.
pub fn precision_recall_f1(pairs: &[ScoredPair], threshold: f64) -> Result<Prf> {
    if pairs.is_empty() {
        return Err(Error::Empty("scored pairs"));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for p in pairs {
        match (p.score >= threshold, p.gold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Ok(Prf {
        precision,
        recall,
        f1: f1_score(precision, recall),
    })
}

/// Descending score, ties by ascending id.
pub fn rank(pairs: &[ScoredPair]) -> Vec<ScoredPair> {
    let mut ranked = pairs.to_vec();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(a.id.cmp(&b.id))
    });
    ranked
}

fn precision_sum(ranked: &[ScoredPair]) -> f64 {
    let mut seen = 0usize;
    let mut total = 0.0;
    for (i, p) in ranked.iter().enumerate() {
        if p.gold {
            seen += 1;
            total += seen as f64 / (i + 1) as f64;
        }
    }
    total
}

/// Non-interpolated average precision.
pub fn average_precision(pairs: &[ScoredPair]) -> Result<f64> {
    let positives = pairs.iter().filter(|p| p.gold).count();
    if positives == 0 {
        return Err(Error::Invalid("average precision needs at least one gold positive".into()));
    }
    Ok(precision_sum(&rank(pairs)) / positives as f64)
}

/// Average precision over the top `k` ranks, normalized by
/// `min(k, positives)`.
pub fn ap_at_k(pairs: &[ScoredPair], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    let positives = pairs.iter().filter(|p| p.gold).count();
    if positives == 0 {
        return Err(Error::Invalid("average precision needs at least one gold positive".into()));
    }
    let ranked = rank(pairs);
    let top = &ranked[..k.min(ranked.len())];
    Ok(precision_sum(top) / k.min(positives) as f64)
}

/// Candidate thresholds: 0.5 and the 1st..99th nearest-rank quantiles of
/// the scores.
fn threshold_candidates(pairs: &[ScoredPair]) -> Vec<f64> {
    let mut scores: Vec<f64> = pairs.iter().map(|p| p.score).collect();
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = scores.len();
    let mut out = vec![0.5];
    for q in 1..100 {
        let idx = ((q * n).div_ceil(100)).clamp(1, n) - 1;
        out.push(scores[idx]);
    }
    out
}

/// Threshold with the best F1 on `pairs`. 0.5 is kept unless a quantile
/// threshold does strictly better.
pub fn select_threshold(pairs: &[ScoredPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("scored pairs"));
    }
    let mut best = (0.5, precision_recall_f1(pairs, 0.5)?.f1);
    for t in threshold_candidates(pairs) {
        let f1 = precision_recall_f1(pairs, t)?.f1;
        if f1 > best.1 {
            best = (t, f1);
        }
    }
    Ok(best.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub count: usize,
    pub positives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ap: f64,
    pub k: usize,
    pub ap_at_k: f64,
    pub threshold: f64,
}

impl EvalReport {
    pub fn compute(pairs: &[ScoredPair], threshold: f64, k: usize) -> Result<Self> {
        let prf = precision_recall_f1(pairs, threshold)?;
        Ok(EvalReport {
            count: pairs.len(),
            positives: pairs.iter().filter(|p| p.gold).count(),
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            ap: average_precision(pairs)?,
            k,
            ap_at_k: ap_at_k(pairs, k)?,
            threshold,
        })
    }

    /// `key=value` lines.
    pub fn to_machine(&self) -> String {
        format!(
            "count={}\npositives={}\nprecision={}\nrecall={}\nf1={}\nap={}\nk={}\nap_at_k={}\nthreshold={}\n",
            self.count,
            self.positives,
            self.precision,
            self.recall,
            self.f1,
            self.ap,
            self.k,
            self.ap_at_k,
            self.threshold
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>8}", "metric", "value")?;
        writeln!(f, "{:<10} {:>8}", "pairs", self.count)?;
        writeln!(f, "{:<10} {:>8}", "positives", self.positives)?;
        for (name, v) in [
            ("P", self.precision),
            ("R", self.recall),
            ("F1", self.f1),
            ("AP", self.ap),
        ] {
            writeln!(f, "{name:<10} {v:>8.4}")?;
        }
        writeln!(f, "{:<10} {:>8.4}", format!("AP@{}", self.k), self.ap_at_k)?;
        write!(f, "{:<10} {:>8.4}", "threshold", self.threshold)
    }
}
