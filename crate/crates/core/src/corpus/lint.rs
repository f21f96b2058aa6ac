use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Dataset, Document, EntitySpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Overlap,
    OutOfBounds,
    EmptySpan,
    MisalignedSpan,
    UnknownLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub doc_id: String,
    pub kind: ViolationKind,
    pub span: EntitySpan,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintReport {
    pub violations: Vec<Violation>,
    /// Spans moved onto token boundaries (including dropped ones).
    pub snapped_count: usize,
    /// Spans removed by `shrink` because they contain no whole token.
    pub dropped_count: usize,
}

impl LintReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// How spans that do not sit on token boundaries are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapPolicy {
    None,
    #[default]
    Expand,
    Shrink,
}

impl FromStr for SnapPolicy {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "expand" => Ok(Self::Expand),
            "shrink" => Ok(Self::Shrink),
            _ => Err(CorpusError::Unknown {
                what: "snap policy",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for SnapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Expand => "expand",
            Self::Shrink => "shrink",
        })
    }
}

enum Snapped {
    Aligned(EntitySpan),
    Moved(EntitySpan),
    Dropped,
    Unresolved(&'static str),
}

fn snap(doc: &Document, span: &EntitySpan, policy: SnapPolicy) -> Snapped {
    let starts_ok = doc
        .tokens
        .binary_search_by_key(&span.start, |t| t.start)
        .is_ok();
    let ends_ok = doc
        .tokens
        .binary_search_by_key(&span.end, |t| t.end)
        .is_ok();
    if starts_ok && ends_ok {
        return Snapped::Aligned(span.clone());
    }
    let covering = |first: Option<usize>, last: Option<usize>| match (first, last) {
        (Some(f), Some(l)) if f <= l => Some(EntitySpan::new(
            doc.tokens[f].start,
            doc.tokens[l].end,
            span.label.clone(),
        )),
        _ => None,
    };
    match policy {
        SnapPolicy::None => Snapped::Unresolved("span does not align with token boundaries"),
        SnapPolicy::Expand => {
            let first = doc.tokens.iter().position(|t| t.end > span.start);
            let last = doc.tokens.iter().rposition(|t| t.start < span.end);
            match covering(first, last) {
                Some(s) => Snapped::Moved(s),
                None => Snapped::Unresolved("span covers no token"),
            }
        }
        SnapPolicy::Shrink => {
            let inside = |t: &&super::Token| t.start >= span.start && t.end <= span.end;
            let first = doc.tokens.iter().position(|t| inside(&t));
            let last = doc.tokens.iter().rposition(|t| inside(&t));
            match covering(first, last) {
                Some(s) => Snapped::Moved(s),
                None => Snapped::Dropped,
            }
        }
    }
}

fn overlapping_pairs(mut spans: Vec<(usize, EntitySpan)>) -> BTreeSet<(usize, usize)> {
    spans.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut pairs = BTreeSet::new();
    for (i, (ia, a)) in spans.iter().enumerate() {
        for (ib, _) in spans[i + 1..].iter().take_while(|(_, b)| b.start < a.end) {
            pairs.insert((*ia.min(ib), *ia.max(ib)));
        }
    }
    pairs
}

/// Checks mechanically verifiable annotation rules and optionally snaps
/// misaligned spans to token boundaries. Overlaps are reported, never
/// resolved.
pub fn lint_dataset(ds: &Dataset, policy: SnapPolicy) -> (Dataset, LintReport) {
    let mut report = LintReport::default();
    let declared = ds.declared_labels.as_ref();
    let mut out = ds.clone();
    for doc in &mut out.documents {
        let len = doc.char_len();
        let mut kept = Vec::with_capacity(doc.entities.len());
        // in-bounds spans, before and after snapping, keyed by input index
        let mut raw: Vec<(usize, EntitySpan)> = Vec::new();
        let mut placed: Vec<(usize, EntitySpan)> = Vec::new();
        for (idx, span) in doc.entities.iter().enumerate() {
            let mut violation = |kind, span: &EntitySpan, detail: String| {
                report.violations.push(Violation {
                    doc_id: doc.id.clone(),
                    kind,
                    span: span.clone(),
                    detail,
                })
            };
            if let Some(labels) = declared {
                if !labels.contains(&span.label) {
                    violation(
                        ViolationKind::UnknownLabel,
                        span,
                        format!("label {:?} is not declared", span.label),
                    );
                }
            }
            if span.start >= span.end {
                violation(ViolationKind::EmptySpan, span, "start >= end".into());
                kept.push(span.clone());
                continue;
            }
            if span.end > len {
                violation(
                    ViolationKind::OutOfBounds,
                    span,
                    format!("document has {len} characters"),
                );
                kept.push(span.clone());
                continue;
            }
            raw.push((idx, span.clone()));
            match snap(doc, span, policy) {
                Snapped::Aligned(s) => {
                    placed.push((idx, s.clone()));
                    kept.push(s);
                }
                Snapped::Moved(s) => {
                    report.snapped_count += 1;
                    placed.push((idx, s.clone()));
                    kept.push(s);
                }
                Snapped::Dropped => {
                    report.snapped_count += 1;
                    report.dropped_count += 1;
                }
                Snapped::Unresolved(why) => {
                    violation(ViolationKind::MisalignedSpan, span, why.into());
                    placed.push((idx, span.clone()));
                    kept.push(span.clone());
                }
            }
        }
        let mut pairs = overlapping_pairs(raw);
        pairs.extend(overlapping_pairs(placed));
        for (a, b) in pairs {
            let (a, b) = (&doc.entities[a], &doc.entities[b]);
            report.violations.push(Violation {
                doc_id: doc.id.clone(),
                kind: ViolationKind::Overlap,
                span: b.clone(),
                detail: format!("overlaps ({},{},{})", a.start, a.end, a.label),
            });
        }
        doc.entities = kept;
    }
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(entities: Vec<EntitySpan>) -> Dataset {
        Dataset::new("t", vec![Document::new("t-0", "MMSE 22/30.", entities)]).unwrap()
    }

    #[test]
    fn expand_inside_token() {
        let (fixed, report) =
            lint_dataset(&ds(vec![EntitySpan::new(1, 3, "TEST")]), SnapPolicy::Expand);
        assert!(report.is_clean());
        assert_eq!(report.snapped_count, 1);
        assert_eq!(
            fixed.documents[0].entities,
            vec![EntitySpan::new(0, 4, "TEST")]
        );
    }

    #[test]
    fn shrink_drops_spans_without_whole_tokens() {
        let input = ds(vec![
            EntitySpan::new(1, 3, "TEST"),
            EntitySpan::new(3, 10, "X"),
        ]);
        let (fixed, report) = lint_dataset(&input, SnapPolicy::Shrink);
        assert!(report.is_clean());
        assert_eq!(report.snapped_count, 2);
        assert_eq!(report.dropped_count, 1);
        assert_eq!(
            fixed.documents[0].entities,
            vec![EntitySpan::new(5, 10, "X")]
        );
    }

    #[test]
    fn none_reports_misalignment() {
        let (fixed, report) =
            lint_dataset(&ds(vec![EntitySpan::new(1, 3, "TEST")]), SnapPolicy::None);
        assert_eq!(report.violations[0].kind, ViolationKind::MisalignedSpan);
        assert_eq!(report.snapped_count, 0);
        assert_eq!(fixed, ds(vec![EntitySpan::new(1, 3, "TEST")]));
    }

    #[test]
    fn clean_dataset() {
        let input = ds(vec![EntitySpan::new(0, 4, "TEST")]);
        let (fixed, report) = lint_dataset(&input, SnapPolicy::Expand);
        assert!(report.is_clean());
        assert_eq!(report.snapped_count, 0);
        assert_eq!(fixed, input);
    }

    #[test]
    fn overlap_is_never_resolved() {
        let input = ds(vec![
            EntitySpan::new(0, 4, "TEST"),
            EntitySpan::new(2, 7, "TEST"),
        ]);
        for policy in [SnapPolicy::None, SnapPolicy::Expand, SnapPolicy::Shrink] {
            let (_, report) = lint_dataset(&input, policy);
            assert!(
                report
                    .violations
                    .iter()
                    .any(|v| v.kind == ViolationKind::Overlap),
                "{policy}"
            );
        }
    }

    #[test]
    fn bounds_empty_and_labels() {
        let mut input = ds(vec![
            EntitySpan::new(100, 104, "TEST"),
            EntitySpan::new(4, 4, "TEST"),
            EntitySpan::new(0, 4, "SCORE"),
        ]);
        input.declared_labels = Some(["TEST".to_string()].into());
        let (_, report) = lint_dataset(&input, SnapPolicy::Expand);
        let kinds: Vec<_> = report.violations.iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            [
                ViolationKind::OutOfBounds,
                ViolationKind::EmptySpan,
                ViolationKind::UnknownLabel
            ]
        );
    }

    #[test]
    fn whitespace_only_span_cannot_expand() {
        let (_, report) =
            lint_dataset(&ds(vec![EntitySpan::new(4, 5, "TEST")]), SnapPolicy::Expand);
        assert_eq!(report.violations[0].kind, ViolationKind::MisalignedSpan);
    }
}
