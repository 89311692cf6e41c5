//! Ranking and classification metrics, TopDef/AllDef inference, and
//! prediction files.

mod inference;
mod metrics;

use std::io::{BufRead, Write};

pub use inference::{infer_alldef, infer_topdef, score_instances, AllDefScore, InferenceMode, DEFAULT_SENSE_CAP};
pub use metrics::{
    ap_at_k, average_precision, f1_score, precision_recall_f1, rank, select_threshold, EvalReport, Prf, ScoredPair,
    DEFAULT_AP_K,
};

use crate::error::{Error, Result};

const PREDICTION_HEADER: &str = "id\tscore\tgold";

/// `id \t score \t gold` rows. Scores are written in shortest round-trip
/// form, so re-reading the file reproduces them exactly.
pub fn write_predictions<W: Write>(mut w: W, pairs: &[ScoredPair]) -> std::io::Result<()> {
    writeln!(w, "{PREDICTION_HEADER}")?;
    for p in pairs {
        writeln!(w, "{}\t{}\t{}", p.id, p.score, u8::from(p.gold))?;
    }
    w.flush()
}

pub fn read_predictions<R: BufRead>(reader: R, source: &str) -> Result<Vec<ScoredPair>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() || (i == 0 && line == PREDICTION_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |msg: &str| Error::parse(source, i + 1, msg.to_string());
        let [id, score, gold] = fields.as_slice() else {
            return Err(bad("expected 3 tab-separated fields"));
        };
        let id = id.parse().map_err(|_| bad("bad instance id"))?;
        let score: f64 = score.parse().map_err(|_| bad("bad score"))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(bad("score outside [0, 1]"));
        }
        let gold = match *gold {
            "1" => true,
            "0" => false,
            _ => return Err(bad("gold label must be 0 or 1")),
        };
        out.push(ScoredPair::new(id, score, gold));
    }
    Ok(out)
}
