//! Labeled (x, d_x; y, d_y; label) instances and the recipe that derives
//! them from relation records.
//!
//! Positives come from hypernym records as-is and from hyponym records with
//! the terms swapped. Negatives come from every other relation and from each
//! positive with its terms exchanged.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::records::{Relation, RelationRecord, DEFAULT_SENSE};
use super::tokenize::{definition_tokens, tokenize};
use crate::error::{Error, Result};

pub const DEFAULT_NEGATIVE_RATIO: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub x: String,
    pub dx: Vec<String>,
    pub y: String,
    pub dy: Vec<String>,
    pub label: bool,
    pub sense_x: String,
    pub sense_y: String,
}

pub type InstanceKey = (String, String, String, String);

impl Instance {
    pub fn new(x: &str, dx: Vec<String>, y: &str, dy: Vec<String>, label: bool) -> Self {
        Instance {
            x: x.to_string(),
            dx,
            y: y.to_string(),
            dy,
            label,
            sense_x: DEFAULT_SENSE.into(),
            sense_y: DEFAULT_SENSE.into(),
        }
    }

    pub fn key(&self) -> InstanceKey {
        (self.x.clone(), self.y.clone(), self.sense_x.clone(), self.sense_y.clone())
    }

    pub fn x_tokens(&self) -> Vec<String> {
        term_tokens(&self.x)
    }

    pub fn y_tokens(&self) -> Vec<String> {
        term_tokens(&self.y)
    }

    /// Same pair with the terms exchanged, as a negative.
    pub fn reversed(&self) -> Instance {
        Instance {
            x: self.y.clone(),
            dx: self.dy.clone(),
            y: self.x.clone(),
            dy: self.dx.clone(),
            label: false,
            sense_x: self.sense_y.clone(),
            sense_y: self.sense_x.clone(),
        }
    }
}

/// A term is encoded as a short sentence of its own tokens.
pub fn term_tokens(term: &str) -> Vec<String> {
    let t = tokenize(term);
    if t.is_empty() {
        vec![term.to_string()]
    } else {
        t
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub records: usize,
    pub skipped_records: usize,
    /// Candidate instances implied by the recipe: two per hypernym/hyponym
    /// record, one per other record.
    pub candidates: usize,
    /// Candidates lost with skipped records.
    pub skipped_candidates: usize,
    pub duplicates: usize,
    pub positives: usize,
    /// Negatives before downsampling.
    pub negatives_generated: usize,
    pub downsampled: usize,
    pub negatives: usize,
}

impl BuildStats {
    pub fn emitted(&self) -> usize {
        self.positives + self.negatives
    }

    pub fn ratio(&self) -> f64 {
        self.negatives as f64 / self.positives.max(1) as f64
    }
}

#[derive(Clone, Debug)]
pub struct BuildOutput {
    pub instances: Vec<Instance>,
    pub stats: BuildStats,
}

fn expansion(rel: Relation) -> usize {
    match rel {
        Relation::Hypernym | Relation::Hyponym => 2,
        _ => 1,
    }
}

fn oriented(r: &RelationRecord, swap: bool, label: bool) -> Instance {
    let (x, sx, gx, y, sy, gy) = if swap {
        (&r.term2, &r.sense2, &r.gloss2, &r.term1, &r.sense1, &r.gloss1)
    } else {
        (&r.term1, &r.sense1, &r.gloss1, &r.term2, &r.sense2, &r.gloss2)
    };
    Instance {
        x: x.clone(),
        dx: definition_tokens(gx, x),
        y: y.clone(),
        dy: definition_tokens(gy, y),
        label,
        sense_x: sx.clone(),
        sense_y: sy.clone(),
    }
}

/// Applies the instance recipe, deduplicates on (x, y, sense ids), and, when
/// `ratio_cap` is set, downsamples negatives uniformly to
/// `round(ratio_cap × positives)`.
///
/// A key that is both a positive and a negative candidate stays positive.
pub fn build_instances(records: &[RelationRecord], ratio_cap: Option<f64>, seed: u64) -> Result<BuildOutput> {
    if records.is_empty() {
        return Err(Error::Empty("relation records"));
    }
    let mut stats = BuildStats {
        records: records.len(),
        ..Default::default()
    };

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for r in records {
        let n = expansion(r.relation);
        stats.candidates += n;
        if r.term1.trim().is_empty() || r.term2.trim().is_empty() {
            stats.skipped_records += 1;
            stats.skipped_candidates += n;
            continue;
        }
        match r.relation {
            Relation::Hypernym | Relation::Hyponym => {
                let pos = oriented(r, r.relation == Relation::Hyponym, true);
                negatives.push(pos.reversed());
                positives.push(pos);
            }
            _ => negatives.push(oriented(r, false, false)),
        }
    }
    if stats.skipped_records > 0 {
        log::warn!("skipped {} records with an empty term", stats.skipped_records);
    }

    let mut seen: HashSet<InstanceKey> = HashSet::new();
    let mut kept_pos = Vec::new();
    for p in positives {
        if seen.insert(p.key()) {
            kept_pos.push(p);
        } else {
            stats.duplicates += 1;
        }
    }
    let mut kept_neg = Vec::new();
    for n in negatives {
        if seen.insert(n.key()) {
            kept_neg.push(n);
        } else {
            stats.duplicates += 1;
        }
    }
    stats.positives = kept_pos.len();
    stats.negatives_generated = kept_neg.len();

    if let Some(cap) = ratio_cap {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::Invalid(format!("negative ratio cap must be positive, got {cap}")));
        }
        let target = (cap * kept_pos.len() as f64).round() as usize;
        if kept_neg.len() > target {
            let mut idx: Vec<usize> = (0..kept_neg.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut keep = vec![false; kept_neg.len()];
            for &i in &idx[..target] {
                keep[i] = true;
            }
            let mut it = keep.iter();
            kept_neg.retain(|_| *it.next().unwrap());
            stats.downsampled = stats.negatives_generated - target;
        }
    }
    stats.negatives = kept_neg.len();

    let mut instances = kept_pos;
    instances.extend(kept_neg);
    Ok(BuildOutput { instances, stats })
}

/// `x \t d_x \t y \t d_y \t label`, definitions as space-joined tokens.
pub fn write_instances<W: Write>(mut w: W, instances: &[Instance]) -> std::io::Result<()> {
    for i in instances {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            i.x,
            i.dx.join(" "),
            i.y,
            i.dy.join(" "),
            u8::from(i.label)
        )?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(reader: R, source: &str) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::parse(source, lineno, format!("expected 5 fields, found {}", f.len())));
        }
        let label = match f[4].trim() {
            "1" => true,
            "0" => false,
            other => return Err(Error::parse(source, lineno, format!("label must be 0 or 1, got {other:?}"))),
        };
        let (x, y) = (f[0].trim(), f[2].trim());
        if x.is_empty() || y.is_empty() {
            return Err(Error::parse(source, lineno, "empty term"));
        }
        out.push(Instance::new(x, definition_tokens(f[1], x), y, definition_tokens(f[3], y), label));
    }
    Ok(out)
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<Instance>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_instances(BufReader::new(f), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(out: &BuildOutput, label: bool) -> Vec<(String, String)> {
        out.instances
            .iter()
            .filter(|i| i.label == label)
            .map(|i| (i.x.clone(), i.y.clone()))
            .collect()
    }

    #[test]
    fn hypernym_record_gives_positive_and_reversed_negative() {
        let recs = [RelationRecord::new("cat", "animal", Relation::Hypernym)];
        let out = build_instances(&recs, None, 0).unwrap();
        assert_eq!(pairs(&out, true), [("cat".into(), "animal".into())]);
        assert_eq!(pairs(&out, false), [("animal".into(), "cat".into())]);
    }

    #[test]
    fn hyponym_record_is_switched() {
        let recs = [RelationRecord::new("animal", "cat", Relation::Hyponym)];
        let out = build_instances(&recs, None, 0).unwrap();
        assert_eq!(pairs(&out, true), [("cat".into(), "animal".into())]);
    }

    #[test]
    fn other_relations_are_negative() {
        let recs = [
            RelationRecord::new("hot", "cold", Relation::Antonym),
            RelationRecord::new("big", "large", Relation::Synonym),
        ];
        let out = build_instances(&recs, None, 0).unwrap();
        assert_eq!(out.stats.positives, 0);
        assert_eq!(out.stats.negatives, 2);
    }

    #[test]
    fn duplicates_and_empty_terms_are_accounted_for() {
        let recs = [
            RelationRecord::new("cat", "animal", Relation::Hypernym),
            RelationRecord::new("animal", "cat", Relation::Hyponym),
            RelationRecord::new("", "animal", Relation::Hypernym),
            RelationRecord::new("animal", "cat", Relation::Other),
        ];
        let out = build_instances(&recs, None, 0).unwrap();
        let s = &out.stats;
        assert_eq!((s.positives, s.negatives, s.duplicates, s.skipped_records), (1, 1, 3, 1));
        assert_eq!(s.emitted() + s.duplicates + s.downsampled + s.skipped_candidates, s.candidates);
    }

    #[test]
    fn downsampling_hits_the_cap() {
        let mut recs = vec![RelationRecord::new("cat", "animal", Relation::Hypernym)];
        for i in 0..20 {
            recs.push(RelationRecord::new(&format!("a{i}"), &format!("b{i}"), Relation::Other));
        }
        let out = build_instances(&recs, Some(8.0), 3).unwrap();
        assert_eq!((out.stats.positives, out.stats.negatives), (1, 8));
        assert_eq!(out.stats.downsampled, 13);
        let again = build_instances(&recs, Some(8.0), 3).unwrap();
        assert_eq!(out.instances, again.instances);
    }

    #[test]
    fn missing_gloss_uses_term_string() {
        let recs = [RelationRecord::new("you", "person", Relation::Hypernym).with_glosses("", "a human being")];
        let out = build_instances(&recs, None, 0).unwrap();
        assert_eq!(out.instances[0].dx, ["you"]);
        assert_eq!(out.instances[0].dy, ["a", "human", "being"]);
    }

    #[test]
    fn tsv_round_trip() {
        let inst = vec![
            Instance::new("cat", vec!["feline".into(), "mammal".into()], "animal", vec!["organism".into()], true),
            Instance::new("animal", vec!["organism".into()], "cat", vec!["feline".into()], false),
        ];
        let mut buf = Vec::new();
        write_instances(&mut buf, &inst).unwrap();
        assert_eq!(read_instances(buf.as_slice(), "i").unwrap(), inst);
        assert!(read_instances("a\tb\tc\td\t2\n".as_bytes(), "i").is_err());
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(build_instances(&[], None, 0).is_err());
    }
}
