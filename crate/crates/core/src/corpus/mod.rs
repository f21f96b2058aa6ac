//! Canonical data model, tokenizer, dataset formats, the span/IOB codec and
//! annotation lints.
//!
//! All offsets are counted in Unicode scalar values (`char`s), start
//! inclusive and end exclusive.

mod codec;
mod formats;
mod lint;
mod tags;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{iob_to_spans, spans_to_iob, token_spans};
pub(crate) use formats::json_error;
pub use formats::{
    export_canonical, export_conll, ingest_annotator_json, ingest_canonical, ingest_conll,
    DatasetFormat,
};
pub use lint::{lint_dataset, LintReport, SnapPolicy, Violation, ViolationKind};
pub use tags::{
    class_to_label, label_to_class, repair_tags, validate_tags, RepairPolicy, Tag, TagSequence,
    TagViolation,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("line {line}: {message}")]
    Conll { line: usize, message: String },
    #[error("invalid tag {tag:?}: {reason}")]
    InvalidTag { tag: String, reason: &'static str },
    #[error("document {doc_id}: span ({start},{end},{label}) {reason}")]
    Codec {
        doc_id: String,
        start: usize,
        end: usize,
        label: String,
        reason: &'static str,
    },
    #[error("document {doc_id}: invalid IOB transition at token {index} ({tag} after {previous})")]
    Transition {
        doc_id: String,
        index: usize,
        tag: String,
        previous: String,
    },
    #[error("document {doc_id}: {tags} tags for {tokens} tokens")]
    Length {
        doc_id: String,
        tags: usize,
        tokens: usize,
    },
    #[error("duplicate document id {0}")]
    DuplicateId(String),
    #[error("invalid dataset structure: {0}")]
    Schema(String),
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Self {
            start,
            end,
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub entities: Vec<EntitySpan>,
}

impl Document {
    /// Builds a document whose tokens are derived with [`tokenize`].
    pub fn new(id: impl Into<String>, text: impl Into<String>, entities: Vec<EntitySpan>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self {
            id: id.into(),
            text,
            tokens,
            entities,
        }
    }

    /// Number of `char`s in the text.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Text between two char offsets. Offsets past the end are clamped.
    pub fn slice(&self, start: usize, end: usize) -> &str {
        char_slice(&self.text, start, end)
    }
}

pub(crate) fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(b, _)| b).chain([text.len()]);
    let byte_start = indices.clone().nth(start).unwrap_or(text.len());
    let byte_end = indices.nth(end).unwrap_or(text.len()).max(byte_start);
    &text[byte_start..byte_end]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub documents: Vec<Document>,
    /// Explicitly declared label set; when absent the set is derived from
    /// the annotations.
    pub declared_labels: Option<BTreeSet<String>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            documents,
            declared_labels: None,
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            documents: Vec::new(),
            declared_labels: None,
        }
    }

    pub fn label_set(&self) -> BTreeSet<String> {
        match &self.declared_labels {
            Some(labels) => labels.clone(),
            None => self
                .documents
                .iter()
                .flat_map(|d| d.entities.iter().map(|e| e.label.clone()))
                .collect(),
        }
    }

    pub fn entity_count(&self) -> usize {
        self.documents.iter().map(|d| d.entities.len()).sum()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Gold tag sequences for every document, in document order.
    pub fn tag_sequences(&self) -> Result<Vec<TagSequence>, CorpusError> {
        self.documents.iter().map(spans_to_iob).collect()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits text into word and punctuation tokens.
///
/// Whitespace separates tokens and is never part of one. A maximal run of
/// alphanumeric characters forms a single token; any other character is a
/// token on its own.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (pos, c) in text.chars().enumerate() {
        if is_word_char(c) {
            match current.as_mut() {
                Some((_, word)) => word.push(c),
                None => current = Some((pos, c.to_string())),
            }
            continue;
        }
        if let Some((start, word)) = current.take() {
            tokens.push(Token {
                end: start + word.chars().count(),
                text: word,
                start,
            });
        }
        if !c.is_whitespace() {
            tokens.push(Token {
                text: c.to_string(),
                start: pos,
                end: pos + 1,
            });
        }
    }
    if let Some((start, word)) = current {
        tokens.push(Token {
            end: start + word.chars().count(),
            text: word,
            start,
        });
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub count: usize,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub classes: BTreeMap<String, ClassCount>,
    pub total: usize,
}

impl ClassCounts {
    pub fn render_table(&self) -> String {
        let width = self
            .classes
            .keys()
            .map(|k| k.chars().count())
            .max()
            .unwrap_or(0)
            .max("OVERALL".len());
        let mut out = format!(
            "{:<width$}  {:>12}  {:>14}\n",
            "Class", "Numerosity #", "Percentage [%]"
        );
        for (label, c) in &self.classes {
            out.push_str(&format!(
                "{:<width$}  {:>12}  {:>14.2}\n",
                label, c.count, c.percentage
            ));
        }
        let total_pct = if self.total > 0 { 100.0 } else { 0.0 };
        out.push_str(&format!(
            "{:<width$}  {:>12}  {:>14.2}\n",
            "OVERALL", self.total, total_pct
        ));
        out
    }
}

/// Entity spans per class with their share of the total.
pub fn class_counts(ds: &Dataset) -> ClassCounts {
    let mut raw: BTreeMap<String, usize> = BTreeMap::new();
    for e in ds.documents.iter().flat_map(|d| &d.entities) {
        *raw.entry(e.label.clone()).or_default() += 1;
    }
    let total: usize = raw.values().sum();
    let classes = raw
        .into_iter()
        .map(|(label, count)| {
            let percentage = 100.0 * count as f64 / total as f64;
            (label, ClassCount { count, percentage })
        })
        .collect();
    ClassCounts { classes, total }
}

/// Per-class entity counts published for the public PsyNIT release.
pub const PSYNIT_CLASS_COUNTS: [(&str, usize); 5] = [
    ("DIAGNOSI E COMORBIDITÀ", 779),
    ("SINTOMI COGNITIVI", 2386),
    ("SINTOMI NEUROPSICHIATRICI", 707),
    ("TRATTAMENTO FARMACOLOGICO", 162),
    ("TEST", 1854),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountCheckRow {
    pub label: String,
    pub expected: usize,
    pub observed: usize,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountCheck {
    pub rows: Vec<CountCheckRow>,
    pub expected_total: usize,
    pub observed_total: usize,
    pub matches: bool,
}

impl CountCheck {
    pub fn render_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.label.chars().count())
            .max()
            .unwrap_or(0)
            .max("TOTAL".len());
        let mut out = format!(
            "{:<width$}  {:>8}  {:>8}  {:>6}\n",
            "Class", "Expected", "Observed", "Delta"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<width$}  {:>8}  {:>8}  {:>+6}\n",
                r.label, r.expected, r.observed, r.delta
            ));
        }
        out.push_str(&format!(
            "{:<width$}  {:>8}  {:>8}  {:>+6}\n{}\n",
            "TOTAL",
            self.expected_total,
            self.observed_total,
            self.observed_total as i64 - self.expected_total as i64,
            if self.matches { "match" } else { "MISMATCH" }
        ));
        out
    }
}

fn normalize_label(label: &str) -> String {
    class_to_label(label).to_uppercase()
}

/// Compares observed class counts with expected ones. Labels match
/// case-insensitively and with `_` read as a space.
pub fn check_class_counts(counts: &ClassCounts, expected: &[(&str, usize)]) -> CountCheck {
    let mut observed: BTreeMap<String, usize> = BTreeMap::new();
    for (label, c) in &counts.classes {
        *observed.entry(normalize_label(label)).or_default() += c.count;
    }
    let mut rows = Vec::new();
    for (label, want) in expected {
        let got = observed.remove(&normalize_label(label)).unwrap_or(0);
        rows.push(CountCheckRow {
            label: label.to_string(),
            expected: *want,
            observed: got,
            delta: got as i64 - *want as i64,
        });
    }
    for (label, got) in observed {
        rows.push(CountCheckRow {
            label,
            expected: 0,
            observed: got,
            delta: got as i64,
        });
    }
    let expected_total = expected.iter().map(|(_, n)| n).sum();
    CountCheck {
        matches: rows.iter().all(|r| r.delta == 0),
        rows,
        expected_total,
        observed_total: counts.total,
    }
}
