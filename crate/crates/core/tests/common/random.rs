//! Seeded random documents, tag sequences and brute-force reference
//! counters.

use std::collections::BTreeMap;

use mcner::corpus::{Document, EntitySpan, Tag, TagSequence};
use mcner::metrics::EvalMode;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const LABELS: [&str; 3] = ["TEST", "DRUG", "SINTOMI COGNITIVI"];

const WORDS: &[&str] = &[
    "Il",
    "paziente",
    "MMSE",
    "22/30",
    "COVID-19",
    "è",
    "perché",
    "orientamento",
    "spaziale",
    ",",
    ".",
    "(",
    ")",
    "Urorec",
    "mg",
    "10",
    "dell'anno",
    "ansia",
    "città",
    "e",
];

/// A document whose entities sit on token boundaries and never overlap.
pub fn document(rng: &mut ChaCha8Rng, id: String) -> Document {
    let n = rng.random_range(0..15);
    let mut text = String::new();
    for i in 0..n {
        if i > 0 {
            text.push_str(if rng.random_bool(0.1) { "  " } else { " " });
        }
        text.push_str(WORDS.choose(rng).unwrap());
    }
    reannotate(rng, &Document::new(id, text, vec![]))
}

fn tag_of(prefix: u8, class: &str) -> Tag {
    match prefix {
        0 => Tag::Outside,
        1 => Tag::begin(class),
        _ => Tag::inside(class),
    }
}

/// `n` tags; when `valid`, no `I-` tag follows anything but `B-`/`I-` of its
/// class.
pub fn tags(rng: &mut ChaCha8Rng, n: usize, classes: &[&str], valid: bool) -> Vec<Tag> {
    let mut out: Vec<Tag> = Vec::with_capacity(n);
    for _ in 0..n {
        let class = classes.choose(rng).unwrap();
        let mut tag = tag_of(rng.random_range(0..3), class);
        if valid && !tag.may_follow(out.last()) {
            tag = Tag::begin(class);
        }
        out.push(tag);
    }
    out
}

/// Gold and predicted sequences over 1..=4 shared documents.
pub fn corpus(rng: &mut ChaCha8Rng, valid: bool) -> (Vec<TagSequence>, Vec<TagSequence>) {
    let classes = &LABELS[..rng.random_range(1..=LABELS.len())];
    let docs = rng.random_range(1..=4);
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for d in 0..docs {
        let n = rng.random_range(0..10);
        let id = format!("doc-{d}");
        gold.push(TagSequence::new(id.clone(), tags(rng, n, classes, valid)));
        let p = if rng.random_bool(0.2) {
            gold[d].tags.clone()
        } else {
            tags(rng, n, classes, valid)
        };
        pred.push(TagSequence::new(id, p));
    }
    (gold, pred)
}

/// Whether tokens `s..e` form exactly one entity of `class`.
fn is_entity(tags: &[Tag], s: usize, e: usize, class: &str) -> bool {
    let b = Tag::Begin(class.to_string());
    let i = Tag::Inside(class.to_string());
    tags[s] == b && tags[s + 1..e].iter().all(|t| *t == i) && tags.get(e) != Some(&i)
}

/// `(tp, fp, fn)` per class, counted by enumerating every position or every
/// candidate span.
pub fn brute_counts(
    gold: &[TagSequence],
    pred: &[TagSequence],
    mode: EvalMode,
) -> BTreeMap<String, (usize, usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        assert_eq!(g.doc_id, p.doc_id);
        let n = g.tags.len();
        match mode {
            EvalMode::TokenStrict | EvalMode::TokenClass => {
                for k in 0..n {
                    let (gt, pt) = (&g.tags[k], &p.tags[k]);
                    let same = if mode == EvalMode::TokenStrict {
                        gt == pt
                    } else {
                        gt.class() == pt.class()
                    };
                    if same {
                        if let Some(c) = gt.class() {
                            out.entry(c.to_string()).or_default().0 += 1;
                        }
                    } else {
                        if let Some(c) = gt.class() {
                            out.entry(c.to_string()).or_default().2 += 1;
                        }
                        if let Some(c) = pt.class() {
                            out.entry(c.to_string()).or_default().1 += 1;
                        }
                    }
                }
            }
            EvalMode::EntityExact => {
                let classes: Vec<String> = g
                    .tags
                    .iter()
                    .chain(&p.tags)
                    .filter_map(|t| t.class().map(str::to_string))
                    .collect();
                for class in classes.iter().collect::<std::collections::BTreeSet<_>>() {
                    for s in 0..n {
                        for e in s + 1..=n {
                            let in_gold = is_entity(&g.tags, s, e, class);
                            let in_pred = is_entity(&p.tags, s, e, class);
                            let entry = out.entry(class.clone()).or_default();
                            match (in_gold, in_pred) {
                                (true, true) => entry.0 += 1,
                                (false, true) => entry.1 += 1,
                                (true, false) => entry.2 += 1,
                                (false, false) => {}
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Same text as `doc` with an independently drawn annotation.
pub fn reannotate(rng: &mut ChaCha8Rng, doc: &Document) -> Document {
    let mut entities = Vec::new();
    let tokens = &doc.tokens;
    let mut i = 0;
    while i < tokens.len() {
        if rng.random_bool(0.3) {
            let len = rng.random_range(1..=3).min(tokens.len() - i);
            let label = LABELS.choose(rng).unwrap();
            entities.push(EntitySpan::new(
                tokens[i].start,
                tokens[i + len - 1].end,
                *label,
            ));
            i += len;
        } else {
            i += 1;
        }
    }
    Document::new(doc.id.clone(), doc.text.clone(), entities)
}
