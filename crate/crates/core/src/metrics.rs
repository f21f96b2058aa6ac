//! Token- and entity-level precision, recall and F1.
//!
//! Zero denominators yield 0, never NaN. The headline overall score is the
//! support-weighted average of the per-class scores; the micro average is
//! reported alongside it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{token_spans, CorpusError, RepairPolicy, Tag, TagSequence};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("document {doc_id}: {reason}")]
    Alignment { doc_id: String, reason: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Full tag equality, IOB prefix included.
    #[default]
    TokenStrict,
    /// Class equality per token, prefixes ignored.
    TokenClass,
    /// Exact `(start, end, class)` span matches.
    EntityExact,
}

impl FromStr for EvalMode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "token_strict" | "strict" => Ok(Self::TokenStrict),
            "token_class" | "class" => Ok(Self::TokenClass),
            "entity_exact" | "entity" => Ok(Self::EntityExact),
            _ => Err(CorpusError::Unknown {
                what: "evaluation mode",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TokenStrict => "token_strict",
            Self::TokenClass => "token_class",
            Self::EntityExact => "entity_exact",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    fn add(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub mode: EvalMode,
    pub per_class: BTreeMap<String, Counts>,
}

impl ConfusionCounts {
    fn merge(mut self, other: ConfusionCounts) -> Self {
        for (class, c) in other.per_class {
            self.per_class.entry(class).or_default().add(&c);
        }
        self
    }

    fn class(&mut self, class: &str) -> &mut Counts {
        if !self.per_class.contains_key(class) {
            self.per_class.insert(class.to_string(), Counts::default());
        }
        self.per_class.get_mut(class).expect("inserted above")
    }
}

pub(crate) fn round6<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64((value * 1e6).round() / 1e6)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    #[serde(serialize_with = "round6")]
    pub precision: f64,
    #[serde(serialize_with = "round6")]
    pub recall: f64,
    #[serde(serialize_with = "round6")]
    pub f1: f64,
    pub support: usize,
}

impl ClassMetrics {
    fn from_counts(c: &Counts) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        Self {
            precision,
            recall,
            f1: f1_score(precision, recall),
            support: c.tp + c.fn_,
        }
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mode: EvalMode,
    pub per_class: BTreeMap<String, ClassMetrics>,
    /// Support-weighted average of the per-class scores.
    pub overall: ClassMetrics,
    /// Scores of the summed counts.
    pub micro: ClassMetrics,
    pub counts: BTreeMap<String, Counts>,
    /// Repair applied to the predictions before scoring, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<RepairPolicy>,
}

impl EvaluationReport {
    /// Canonical JSON: sorted class keys, scores rounded to 6 decimals.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned text table in percent, one row per class plus OVERALL.
    pub fn render_table(&self) -> String {
        let width = self
            .per_class
            .keys()
            .map(|k| k.chars().count())
            .max()
            .unwrap_or(0)
            .max("OVERALL".len());
        let mut out = format!(
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}\n",
            "Class", "P [%]", "R [%]", "F1 [%]", "Support"
        );
        let row = |name: &str, m: &ClassMetrics| {
            format!(
                "{:<width$}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8}\n",
                name,
                100.0 * m.precision,
                100.0 * m.recall,
                100.0 * m.f1,
                m.support
            )
        };
        for (class, m) in &self.per_class {
            out.push_str(&row(class, m));
        }
        out.push_str(&row("OVERALL", &self.overall));
        out.push_str(&format!("mode: {}\n", self.mode));
        out
    }
}

pub(crate) fn align<'a>(
    gold: &'a [TagSequence],
    pred: &'a [TagSequence],
) -> Result<Vec<(&'a TagSequence, &'a TagSequence)>, MetricsError> {
    let alignment = |doc_id: &str, reason: String| MetricsError::Alignment {
        doc_id: doc_id.to_string(),
        reason,
    };
    let mut by_id: HashMap<&str, &TagSequence> = HashMap::with_capacity(pred.len());
    for p in pred {
        if by_id.insert(&p.doc_id, p).is_some() {
            return Err(alignment(&p.doc_id, "duplicate prediction".into()));
        }
    }
    let mut pairs = Vec::with_capacity(gold.len());
    for g in gold {
        let p = by_id
            .remove(g.doc_id.as_str())
            .ok_or_else(|| alignment(&g.doc_id, "missing from predictions".into()))?;
        if p.len() != g.len() {
            return Err(alignment(
                &g.doc_id,
                format!("{} predicted tags for {} gold tags", p.len(), g.len()),
            ));
        }
        pairs.push((g, p));
    }
    if let Some(extra) = pred.iter().find(|p| by_id.contains_key(p.doc_id.as_str())) {
        return Err(alignment(&extra.doc_id, "not present in gold".into()));
    }
    Ok(pairs)
}

fn count_document(
    gold: &TagSequence,
    pred: &TagSequence,
    mode: EvalMode,
) -> Result<ConfusionCounts, MetricsError> {
    let mut counts = ConfusionCounts {
        mode,
        per_class: BTreeMap::new(),
    };
    match mode {
        EvalMode::TokenStrict | EvalMode::TokenClass => {
            for (g, p) in gold.tags.iter().zip(&pred.tags) {
                let hit = match mode {
                    EvalMode::TokenStrict => g == p,
                    _ => g.class() == p.class(),
                };
                match (g.class(), p.class()) {
                    (Some(gc), Some(_)) if hit => counts.class(gc).tp += 1,
                    (gc, pc) => {
                        if let Some(gc) = gc {
                            counts.class(gc).fn_ += 1;
                        }
                        if let Some(pc) = pc {
                            counts.class(pc).fp += 1;
                        }
                    }
                }
            }
        }
        EvalMode::EntityExact => {
            let gold_spans = token_spans(gold)?;
            let pred_spans = token_spans(pred)?;
            for span in &gold_spans {
                let c = counts.class(&span.2);
                if pred_spans.contains(span) {
                    c.tp += 1;
                } else {
                    c.fn_ += 1;
                }
            }
            for span in pred_spans.iter().filter(|s| !gold_spans.contains(s)) {
                counts.class(&span.2).fp += 1;
            }
        }
    }
    Ok(counts)
}

/// Per-class TP/FP/FN over documents paired by id.
///
/// In the token modes a mismatched token counts as FN for the gold class and
/// FP for the predicted class; `O` is never a class.
pub fn count_matches(
    gold: &[TagSequence],
    pred: &[TagSequence],
    mode: EvalMode,
) -> Result<ConfusionCounts, MetricsError> {
    let pairs = align(gold, pred)?;
    let empty = ConfusionCounts {
        mode,
        per_class: BTreeMap::new(),
    };
    pairs
        .par_iter()
        .map(|(g, p)| count_document(g, p, mode))
        .try_reduce(|| empty.clone(), |a, b| Ok(a.merge(b)))
}

pub fn prf(counts: &ConfusionCounts) -> BTreeMap<String, ClassMetrics> {
    counts
        .per_class
        .iter()
        .map(|(class, c)| (class.clone(), ClassMetrics::from_counts(c)))
        .collect()
}

/// Support-weighted mean of P, R and F1 over classes with non-zero support.
pub fn overall(per_class: &BTreeMap<String, ClassMetrics>) -> ClassMetrics {
    let support: usize = per_class.values().map(|m| m.support).sum();
    if support == 0 {
        return ClassMetrics::default();
    }
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .values()
            .filter(|m| m.support > 0)
            .map(|m| m.support as f64 * f(m))
            .sum::<f64>()
            / support as f64
    };
    ClassMetrics {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
        support,
    }
}

fn micro(counts: &ConfusionCounts) -> ClassMetrics {
    let mut total = Counts::default();
    for c in counts.per_class.values() {
        total.add(c);
    }
    ClassMetrics::from_counts(&total)
}

pub fn evaluate(
    gold: &[TagSequence],
    pred: &[TagSequence],
    mode: EvalMode,
) -> Result<EvaluationReport, MetricsError> {
    let counts = count_matches(gold, pred, mode)?;
    let per_class = prf(&counts);
    Ok(EvaluationReport {
        mode,
        overall: overall(&per_class),
        micro: micro(&counts),
        per_class,
        counts: counts.per_class,
        repair: None,
    })
}

/// An all-`O` prediction for each gold sequence.
pub fn all_outside(gold: &[TagSequence]) -> Vec<TagSequence> {
    gold.iter()
        .map(|g| TagSequence::new(g.doc_id.clone(), vec![Tag::Outside; g.len()]))
        .collect()
}
