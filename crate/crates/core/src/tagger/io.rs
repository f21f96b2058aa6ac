//! Prediction files and the external trainer config.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{TaggerError, TaggerModel};
use crate::corpus::{repair_tags, Dataset, RepairPolicy, Tag, TagSequence};

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub tags: Vec<String>,
}

/// Decodes `ds` and renders one JSON record per document.
pub fn predict_file(model: &TaggerModel, ds: &Dataset) -> String {
    let mut out = String::new();
    for seq in model.decode_dataset(ds) {
        let record = PredictionRecord {
            doc_id: seq.doc_id,
            tags: seq.tags.iter().map(Tag::to_string).collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn load_error(line: Option<usize>, doc_id: Option<&str>, reason: impl Into<String>) -> TaggerError {
    TaggerError::Predictions {
        line,
        doc_id: doc_id.map(str::to_string),
        reason: reason.into(),
    }
}

/// Parses a prediction file against `ds` and returns sequences in dataset
/// order. Invalid transitions are repaired only when a policy is given.
pub fn load_predictions(
    bytes: &[u8],
    ds: &Dataset,
    repair: Option<RepairPolicy>,
) -> Result<Vec<TagSequence>, TaggerError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| load_error(None, None, format!("not UTF-8: {e}")))?;
    let positions: HashMap<&str, usize> = ds
        .documents
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.as_str(), i))
        .collect();
    let mut loaded: Vec<Option<TagSequence>> = vec![None; ds.documents.len()];
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(line)
            .map_err(|e| load_error(Some(line_no), None, format!("malformed record: {e}")))?;
        let id = record.doc_id.as_str();
        let Some(&pos) = positions.get(id) else {
            return Err(load_error(Some(line_no), Some(id), "unknown document"));
        };
        if loaded[pos].is_some() {
            return Err(load_error(Some(line_no), Some(id), "duplicate record"));
        }
        let doc = &ds.documents[pos];
        if record.tags.len() != doc.tokens.len() {
            return Err(load_error(
                Some(line_no),
                Some(id),
                format!("{} tags for {} tokens", record.tags.len(), doc.tokens.len()),
            ));
        }
        let tags = record
            .tags
            .iter()
            .map(|t| t.parse::<Tag>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| load_error(Some(line_no), Some(id), e.to_string()))?;
        let seq = TagSequence::new(record.doc_id.clone(), tags);
        loaded[pos] = Some(match repair {
            Some(policy) => repair_tags(&seq, policy),
            None => seq,
        });
    }
    loaded
        .into_iter()
        .zip(&ds.documents)
        .map(|(seq, doc)| {
            seq.ok_or_else(|| load_error(None, Some(&doc.id), "no prediction record"))
        })
        .collect()
}

/// Hyperparameters handed to an external transformer trainer. They are only
/// written out, never used here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalTrainerConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub layerwise_lr_decay: f64,
    pub frozen_layers: usize,
}

impl Default for ExternalTrainerConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            learning_rate: 3e-5,
            epochs: 50,
            weight_decay: 0.01,
            warmup_ratio: 0.02,
            layerwise_lr_decay: 0.95,
            frozen_layers: 3,
        }
    }
}

impl ExternalTrainerConfig {
    pub fn validate(&self) -> Result<(), TaggerError> {
        let positive = [
            ("batch_size", self.batch_size as f64),
            ("learning_rate", self.learning_rate),
            ("epochs", self.epochs as f64),
            ("weight_decay", self.weight_decay),
            ("warmup_ratio", self.warmup_ratio),
            ("layerwise_lr_decay", self.layerwise_lr_decay),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TaggerError::Domain(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("config serializes");
        out.push('\n');
        out
    }
}
