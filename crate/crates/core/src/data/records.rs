//! Relation export rows:
//! `term1 \t term2 \t relation \t sense1 \t sense2 \t gloss1 \t gloss2`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sense id assumed when the export leaves the column empty.
pub const DEFAULT_SENSE: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    /// term2 is a hypernym of term1.
    Hypernym,
    /// term2 is a hyponym of term1.
    Hyponym,
    Synonym,
    Antonym,
    Other,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Hypernym => "hypernym",
            Relation::Hyponym => "hyponym",
            Relation::Synonym => "synonym",
            Relation::Antonym => "antonym",
            Relation::Other => "other",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hypernym" => Ok(Relation::Hypernym),
            "hyponym" => Ok(Relation::Hyponym),
            "synonym" => Ok(Relation::Synonym),
            "antonym" => Ok(Relation::Antonym),
            "other" => Ok(Relation::Other),
            other => Err(format!("unknown relation {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationRecord {
    pub term1: String,
    pub term2: String,
    pub relation: Relation,
    pub sense1: String,
    pub sense2: String,
    pub gloss1: String,
    pub gloss2: String,
}

impl RelationRecord {
    pub fn new(term1: &str, term2: &str, relation: Relation) -> Self {
        RelationRecord {
            term1: term1.to_string(),
            term2: term2.to_string(),
            relation,
            sense1: DEFAULT_SENSE.to_string(),
            sense2: DEFAULT_SENSE.to_string(),
            gloss1: String::new(),
            gloss2: String::new(),
        }
    }

    pub fn with_glosses(mut self, gloss1: &str, gloss2: &str) -> Self {
        self.gloss1 = gloss1.to_string();
        self.gloss2 = gloss2.to_string();
        self
    }

    pub fn with_senses(mut self, sense1: &str, sense2: &str) -> Self {
        self.sense1 = sense1.to_string();
        self.sense2 = sense2.to_string();
        self
    }
}

fn sense_or_default(s: &str) -> String {
    let s = s.trim();
    if s.is_empty() {
        DEFAULT_SENSE.to_string()
    } else {
        s.to_string()
    }
}

pub fn read_relations<R: BufRead>(reader: R, source: &str) -> Result<Vec<RelationRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(Error::parse(source, lineno, format!("expected 7 tab-separated fields, found {}", f.len())));
        }
        let relation = f[2].parse().map_err(|m: String| Error::parse(source, lineno, m))?;
        out.push(RelationRecord {
            term1: f[0].trim().to_string(),
            term2: f[1].trim().to_string(),
            relation,
            sense1: sense_or_default(f[3]),
            sense2: sense_or_default(f[4]),
            gloss1: f[5].trim().to_string(),
            gloss2: f[6].trim().to_string(),
        });
    }
    Ok(out)
}

pub fn load_relations(path: impl AsRef<Path>) -> Result<Vec<RelationRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_relations(BufReader::new(f), &path.display().to_string())
}

pub fn write_relations<W: Write>(mut w: W, records: &[RelationRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.term1, r.term2, r.relation, r.sense1, r.sense2, r.gloss1, r.gloss2
        )?;
    }
    Ok(())
}
