use super::tags::{class_to_label, label_to_class};
use super::{CorpusError, Document, EntitySpan, Tag, TagSequence};

/// Encodes a document's entity spans as one IOB tag per token.
///
/// Every span starts a new `B-` tag, so adjacent spans of the same class stay
/// separate entities.
pub fn spans_to_iob(doc: &Document) -> Result<TagSequence, CorpusError> {
    let mut tags = vec![Tag::Outside; doc.tokens.len()];
    let mut entities: Vec<&EntitySpan> = doc.entities.iter().collect();
    entities.sort();
    for span in entities {
        let fail = |reason| CorpusError::Codec {
            doc_id: doc.id.clone(),
            start: span.start,
            end: span.end,
            label: span.label.clone(),
            reason,
        };
        if span.start >= span.end {
            return Err(fail("is empty"));
        }
        let first = doc
            .tokens
            .binary_search_by_key(&span.start, |t| t.start)
            .map_err(|_| fail("does not start on a token boundary"))?;
        let last = doc
            .tokens
            .binary_search_by_key(&span.end, |t| t.end)
            .map_err(|_| fail("does not end on a token boundary"))?;
        if last < first {
            return Err(fail("covers no token"));
        }
        if tags[first..=last].iter().any(|t| !t.is_outside()) {
            return Err(fail("overlaps another span"));
        }
        let class = label_to_class(&span.label);
        tags[first] = Tag::Begin(class.clone());
        for tag in &mut tags[first + 1..=last] {
            *tag = Tag::Inside(class.clone());
        }
    }
    Ok(TagSequence::new(doc.id.clone(), tags))
}

/// Decodes a valid tag sequence into token-index spans
/// `(first_token, end_token_exclusive, class)`.
pub fn token_spans(tags: &TagSequence) -> Result<Vec<(usize, usize, String)>, CorpusError> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.tags.iter().enumerate() {
        match tag {
            Tag::Inside(c) if matches!(open, Some((_, oc)) if oc == c) => {}
            Tag::Inside(_) => {
                return Err(CorpusError::Transition {
                    doc_id: tags.doc_id.clone(),
                    index: i,
                    tag: tag.to_string(),
                    previous: if i == 0 {
                        "sequence start".to_string()
                    } else {
                        tags.tags[i - 1].to_string()
                    },
                })
            }
            Tag::Begin(c) => {
                if let Some((s, oc)) = open.take() {
                    spans.push((s, i, oc.to_string()));
                }
                open = Some((i, c));
            }
            Tag::Outside => {
                if let Some((s, oc)) = open.take() {
                    spans.push((s, i, oc.to_string()));
                }
            }
        }
    }
    if let Some((s, oc)) = open {
        spans.push((s, tags.tags.len(), oc.to_string()));
    }
    Ok(spans)
}

/// Decodes a tag sequence back into character-offset spans over `doc`.
pub fn iob_to_spans(tags: &TagSequence, doc: &Document) -> Result<Vec<EntitySpan>, CorpusError> {
    if tags.len() != doc.tokens.len() {
        return Err(CorpusError::Length {
            doc_id: doc.id.clone(),
            tags: tags.len(),
            tokens: doc.tokens.len(),
        });
    }
    Ok(token_spans(tags)?
        .into_iter()
        .map(|(first, end, class)| EntitySpan {
            start: doc.tokens[first].start,
            end: doc.tokens[end - 1].end,
            label: class_to_label(&class),
        })
        .collect())
}
