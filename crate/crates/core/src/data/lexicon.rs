//! Sense-level definitions per term.
//!
//! On disk: `term \t sense_id \t gloss`, one row per sense, most frequent
//! sense first.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::records::RelationRecord;
use super::tokenize::{definition_tokens, tokenize};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sense {
    pub id: String,
    pub tokens: Vec<String>,
}

/// A term and its ordered sense definitions. Never has zero senses: a term
/// without any gloss is defined by its own surface string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermEntry {
    surface: String,
    senses: Vec<Sense>,
}

impl TermEntry {
    pub fn new(surface: &str, senses: Vec<Sense>) -> Self {
        let senses: Vec<Sense> = senses.into_iter().filter(|s| !s.tokens.is_empty()).collect();
        let mut entry = TermEntry {
            surface: surface.to_string(),
            senses,
        };
        if entry.senses.is_empty() {
            entry.senses.push(Sense {
                id: "1".into(),
                tokens: fallback_tokens(surface),
            });
        }
        entry
    }

    /// Entry with a single definition given as raw text.
    pub fn with_definition(surface: &str, gloss: &str) -> Self {
        TermEntry::new(
            surface,
            vec![Sense {
                id: "1".into(),
                tokens: definition_tokens(gloss, surface),
            }],
        )
    }

    /// Entry whose only definition is the term itself.
    pub fn undefined(surface: &str) -> Self {
        TermEntry::new(surface, Vec::new())
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn senses(&self) -> &[Sense] {
        &self.senses
    }

    pub fn top_definition(&self) -> &[String] {
        &self.senses[0].tokens
    }
}

fn fallback_tokens(surface: &str) -> Vec<String> {
    let t = tokenize(surface);
    if t.is_empty() {
        vec![surface.to_string()]
    } else {
        t
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, TermEntry>,
}

fn sense_rank(id: &str) -> u64 {
    id.parse().unwrap_or(u64::MAX)
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&TermEntry> {
        self.entries
            .get(term)
            .or_else(|| self.entries.get(&term.to_lowercase()))
    }

    /// Entry for `term`, or a fallback entry defining the term by itself.
    pub fn lookup(&self, term: &str) -> TermEntry {
        self.get(term).cloned().unwrap_or_else(|| TermEntry::undefined(term))
    }

    pub fn insert(&mut self, entry: TermEntry) {
        self.entries.insert(entry.surface.clone(), entry);
    }

    pub fn entries(&self) -> impl Iterator<Item = &TermEntry> {
        self.entries.values()
    }

    /// Adds a sense unless one with the same id already exists. Senses with
    /// numeric ids are kept in numeric order, others in arrival order.
    fn add_sense(&mut self, term: &str, sense_id: &str, gloss: &str) {
        let tokens = tokenize(gloss);
        if tokens.is_empty() || term.is_empty() {
            return;
        }
        let entry = self.entries.entry(term.to_string()).or_insert_with(|| TermEntry {
            surface: term.to_string(),
            senses: Vec::new(),
        });
        if entry.senses.iter().any(|s| s.id == sense_id) {
            return;
        }
        entry.senses.push(Sense {
            id: sense_id.to_string(),
            tokens,
        });
        entry.senses.sort_by_key(|s| sense_rank(&s.id));
    }

    /// Collects every (term, sense, gloss) triple mentioned in an export.
    pub fn from_records(records: &[RelationRecord]) -> Self {
        let mut lex = Lexicon::new();
        for r in records {
            lex.add_sense(&r.term1, &r.sense1, &r.gloss1);
            lex.add_sense(&r.term2, &r.sense2, &r.gloss2);
        }
        lex
    }

    pub fn read_tsv<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut lex = Lexicon::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(source, lineno, format!("expected 3 fields, found {}", f.len())));
            }
            lex.add_sense(f[0].trim(), f[1].trim(), f[2]);
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(f), &path.display().to_string())
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in self.entries.values() {
            for s in &e.senses {
                writeln!(w, "{}\t{}\t{}", e.surface, s.id, s.tokens.join(" "))?;
            }
        }
        Ok(())
    }
}
