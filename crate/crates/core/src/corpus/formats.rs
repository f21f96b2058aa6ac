use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::codec::token_spans;
use super::tags::class_to_label;
use super::{spans_to_iob, CorpusError, Dataset, Document, EntitySpan, Tag, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    AnnotatorJson,
    Conll,
    Canonical,
}

impl DatasetFormat {
    /// Guesses the format from the file extension and, for JSON, from the
    /// top-level shape.
    pub fn detect(path: &Path, bytes: &[u8]) -> Self {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        if ext != "json" {
            return Self::Conll;
        }
        match serde_json::from_slice::<serde_json::Value>(bytes) {
            Ok(serde_json::Value::Object(map)) if map.contains_key("documents") => Self::Canonical,
            _ => Self::AnnotatorJson,
        }
    }

    pub fn ingest(self, name: &str, bytes: &[u8]) -> Result<Dataset, CorpusError> {
        match self {
            Self::AnnotatorJson => ingest_annotator_json(name, bytes),
            Self::Conll => ingest_conll(name, bytes),
            Self::Canonical => ingest_canonical(bytes),
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "annotator-json" | "annotator" => Ok(Self::AnnotatorJson),
            "conll" => Ok(Self::Conll),
            "canonical" => Ok(Self::Canonical),
            _ => Err(CorpusError::Unknown {
                what: "dataset format",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AnnotatorJson => "annotator-json",
            Self::Conll => "conll",
            Self::Canonical => "canonical",
        })
    }
}

pub(crate) fn json_error(bytes: &[u8], err: serde_json::Error) -> CorpusError {
    let offset = if err.line() == 0 {
        0
    } else {
        let line_start: usize = bytes
            .split(|b| *b == b'\n')
            .take(err.line() - 1)
            .map(|l| l.len() + 1)
            .sum();
        line_start + err.column().saturating_sub(1)
    };
    CorpusError::Json {
        offset,
        message: err.to_string(),
    }
}

fn parse_json(bytes: &[u8]) -> Result<serde_json::Value, CorpusError> {
    serde_json::from_slice(bytes).map_err(|e| json_error(bytes, e))
}

#[derive(Deserialize)]
struct AnnotatorEntities {
    entities: Vec<(usize, usize, String)>,
}

#[derive(Deserialize)]
struct AnnotatorRecord(String, AnnotatorEntities);

#[derive(Deserialize)]
struct AnnotatorExport {
    #[serde(default)]
    classes: Option<Vec<String>>,
    annotations: Vec<Option<AnnotatorRecord>>,
}

/// Reads the web annotation tool's export: either a bare list of
/// `[text, {"entities": [[start, end, label], ...]}]` records or the tool's
/// `{"classes": [...], "annotations": [...]}` wrapper. `null` records
/// (unannotated texts) are skipped but still consume an index.
pub fn ingest_annotator_json(name: &str, bytes: &[u8]) -> Result<Dataset, CorpusError> {
    let value = parse_json(bytes)?;
    let schema = |e: serde_json::Error| CorpusError::Schema(e.to_string());
    let export = if value.is_array() {
        AnnotatorExport {
            classes: None,
            annotations: serde_json::from_value(value).map_err(schema)?,
        }
    } else {
        serde_json::from_value(value).map_err(schema)?
    };
    let documents = export
        .annotations
        .into_iter()
        .enumerate()
        .filter_map(|(i, rec)| rec.map(|r| (i, r)))
        .map(|(i, AnnotatorRecord(text, ents))| {
            let entities = ents
                .entities
                .into_iter()
                .map(|(start, end, label)| EntitySpan { start, end, label })
                .collect();
            Document::new(format!("{name}-{i}"), text, entities)
        })
        .collect();
    let mut ds = Dataset::new(name, documents)?;
    ds.declared_labels = export
        .classes
        .filter(|c| !c.is_empty())
        .map(|c| c.into_iter().collect());
    Ok(ds)
}

#[derive(Serialize, Deserialize)]
struct CanonicalEntity {
    start: usize,
    end: usize,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct CanonicalDocument {
    id: String,
    text: String,
    entities: Vec<CanonicalEntity>,
}

#[derive(Serialize, Deserialize)]
struct CanonicalDataset {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<BTreeSet<String>>,
    documents: Vec<CanonicalDocument>,
}

/// Reads the canonical dataset JSON. Tokens are always re-derived.
pub fn ingest_canonical(bytes: &[u8]) -> Result<Dataset, CorpusError> {
    let value = parse_json(bytes)?;
    let raw: CanonicalDataset =
        serde_json::from_value(value).map_err(|e| CorpusError::Schema(e.to_string()))?;
    let documents = raw
        .documents
        .into_iter()
        .map(|d| {
            let entities = d
                .entities
                .into_iter()
                .map(|e| EntitySpan::new(e.start, e.end, e.label))
                .collect();
            Document::new(d.id, d.text, entities)
        })
        .collect();
    let mut ds = Dataset::new(raw.name, documents)?;
    ds.declared_labels = raw.labels;
    Ok(ds)
}

pub fn export_canonical(ds: &Dataset) -> String {
    let raw = CanonicalDataset {
        name: ds.name.clone(),
        labels: ds.declared_labels.clone(),
        documents: ds
            .documents
            .iter()
            .map(|d| CanonicalDocument {
                id: d.id.clone(),
                text: d.text.clone(),
                entities: d
                    .entities
                    .iter()
                    .map(|e| CanonicalEntity {
                        start: e.start,
                        end: e.end,
                        label: e.label.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&raw).expect("dataset serializes");
    out.push('\n');
    out
}

struct PendingToken {
    text: String,
    tag: Tag,
    line: usize,
}

fn flush_conll_document(
    name: &str,
    pending: &mut Vec<PendingToken>,
    documents: &mut Vec<Document>,
) -> Result<(), CorpusError> {
    if pending.is_empty() {
        return Ok(());
    }
    let mut text = String::new();
    let mut tokens = Vec::with_capacity(pending.len());
    let mut pos = 0;
    for (i, p) in pending.iter().enumerate() {
        if i > 0 {
            text.push(' ');
            pos += 1;
        }
        let len = p.text.chars().count();
        text.push_str(&p.text);
        tokens.push(Token {
            text: p.text.clone(),
            start: pos,
            end: pos + len,
        });
        pos += len;
    }
    let seq = super::TagSequence::new("", pending.iter().map(|p| p.tag.clone()).collect());
    let spans = token_spans(&seq).map_err(|e| match e {
        CorpusError::Transition {
            index,
            tag,
            previous,
            ..
        } => CorpusError::Conll {
            line: pending[index].line,
            message: format!("invalid IOB transition: {tag} after {previous}"),
        },
        other => other,
    })?;
    let entities = spans
        .into_iter()
        .map(|(first, end, class)| {
            EntitySpan::new(
                tokens[first].start,
                tokens[end - 1].end,
                class_to_label(&class),
            )
        })
        .collect();
    documents.push(Document {
        id: format!("{name}-{}", documents.len()),
        text,
        tokens,
        entities,
    });
    pending.clear();
    Ok(())
}

/// Reads two-column `token<whitespace>tag` text. Blank lines (and
/// `-DOCSTART-` lines) separate documents; document text is the tokens
/// joined by single spaces.
pub fn ingest_conll(name: &str, bytes: &[u8]) -> Result<Dataset, CorpusError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CorpusError::Conll {
        line: bytes[..e.valid_up_to()]
            .iter()
            .filter(|b| **b == b'\n')
            .count()
            + 1,
        message: "input is not valid UTF-8".into(),
    })?;
    let mut documents = Vec::new();
    let mut pending = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line = i + 1;
        let content = raw.trim_end_matches('\r');
        if content.trim().is_empty() || content.starts_with("-DOCSTART-") {
            flush_conll_document(name, &mut pending, &mut documents)?;
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [token, tag] = fields[..] else {
            return Err(CorpusError::Conll {
                line,
                message: format!("expected 2 columns, found {}", fields.len()),
            });
        };
        let tag = tag.parse::<Tag>().map_err(|e| CorpusError::Conll {
            line,
            message: e.to_string(),
        })?;
        pending.push(PendingToken {
            text: token.to_string(),
            tag,
            line,
        });
    }
    flush_conll_document(name, &mut pending, &mut documents)?;
    Dataset::new(name, documents)
}

/// Writes one `token\ttag` line per token and a blank line between
/// documents. Documents without tokens cannot be represented and are
/// skipped.
pub fn export_conll(ds: &Dataset) -> Result<String, CorpusError> {
    let mut out = String::new();
    for doc in ds.documents.iter().filter(|d| !d.tokens.is_empty()) {
        let tags = spans_to_iob(doc)?;
        if !out.is_empty() {
            out.push('\n');
        }
        for (token, tag) in doc.tokens.iter().zip(&tags.tags) {
            out.push_str(&token.text);
            out.push('\t');
            out.push_str(&tag.to_string());
            out.push('\n');
        }
    }
    Ok(out)
}
