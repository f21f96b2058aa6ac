//! Feature templates and the surface-form gazetteer.
//!
//! Templates, for the focus token at position `i`:
//!
//! * `bias`
//! * `w{-2..+2}=<lowercased token>`, with `<s>` / `</s>` past either end
//! * `pre{1,2,3}=` and `suf{1,2,3}=` of the lowercased focus token
//! * `shape=`, `shape-1=`, `shape+1=`: case/digit pattern with repeats
//!   collapsed (`MMSE` -> `X`, `Madopar` -> `Xx`, `22` -> `d`)
//! * `isdigit`, `ispunct`, `iscap` flags on the focus token
//! * `gaz=<class>` plus `gazb=<class>` or `gazi=<class>` (begin / inside)
//!   for the longest gazetteer entry covering the focus token
//! * `gaz-1=<class>`, `gaz+1=<class>` for the neighbours' longest matches

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::TaggerError;
use crate::corpus::{label_to_class, Dataset, Token};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureId(pub String);

impl FeatureId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Case-insensitive, exact-surface dictionary of entity token sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gazetteer {
    /// Lowercased tokens joined by single spaces -> tag-form classes.
    entries: BTreeMap<String, BTreeSet<String>>,
    max_tokens: usize,
}

fn surface_key<'a>(tokens: impl IntoIterator<Item = &'a str>) -> String {
    tokens
        .into_iter()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl Gazetteer {
    pub fn from_dataset(ds: &Dataset) -> Self {
        let mut g = Self::default();
        g.extend_from(ds);
        g
    }

    /// Adds every annotated entity of `ds`, keyed by the tokens it covers.
    pub fn extend_from(&mut self, ds: &Dataset) {
        for doc in &ds.documents {
            for e in &doc.entities {
                let covered: Vec<&str> = doc
                    .tokens
                    .iter()
                    .filter(|t| t.start >= e.start && t.end <= e.end)
                    .map(|t| t.text.as_str())
                    .collect();
                self.insert(&covered, &label_to_class(&e.label));
            }
        }
    }

    pub fn insert(&mut self, tokens: &[&str], class: &str) {
        if tokens.is_empty() || class.is_empty() {
            return;
        }
        self.max_tokens = self.max_tokens.max(tokens.len());
        self.entries
            .entry(surface_key(tokens.iter().copied()))
            .or_default()
            .insert(class.to_string());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.entries
            .contains_key(&surface_key(surface.split_whitespace()))
    }

    /// Longest entry covering `tokens[index]`; ties go to the leftmost start.
    /// Returns `(start, end_exclusive, classes)`.
    pub fn longest_match(
        &self,
        tokens: &[Token],
        index: usize,
    ) -> Option<(usize, usize, &BTreeSet<String>)> {
        if self.entries.is_empty() {
            return None;
        }
        for len in (1..=self.max_tokens.min(tokens.len())).rev() {
            let lo = (index + 1).saturating_sub(len);
            for start in lo..=index {
                let end = start + len;
                if end > tokens.len() {
                    break;
                }
                let key = surface_key(tokens[start..end].iter().map(|t| t.text.as_str()));
                if let Some(classes) = self.entries.get(&key) {
                    return Some((start, end, classes));
                }
            }
        }
        None
    }
}

fn shape(token: &str) -> String {
    let mut out = String::new();
    for c in token.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if !out.ends_with(s) {
            out.push(s);
        }
    }
    out
}

fn word_at(tokens: &[Token], i: isize) -> String {
    if i < 0 {
        "<s>".to_string()
    } else if i as usize >= tokens.len() {
        "</s>".to_string()
    } else {
        tokens[i as usize].text.to_lowercase()
    }
}

/// Sorted feature set of `tokens[index]`.
pub fn extract_features(
    tokens: &[Token],
    index: usize,
    gazetteer: &Gazetteer,
) -> Result<BTreeSet<FeatureId>, TaggerError> {
    if index >= tokens.len() {
        return Err(TaggerError::Domain(format!(
            "token index {index} out of range for {} tokens",
            tokens.len()
        )));
    }
    let mut feats = BTreeSet::new();
    let mut add = |s: String| {
        feats.insert(FeatureId(s));
    };
    add("bias".into());
    let i = index as isize;
    for offset in -2isize..=2 {
        let name = match offset {
            0 => "w0".to_string(),
            o if o < 0 => format!("w{o}"),
            o => format!("w+{o}"),
        };
        add(format!("{name}={}", word_at(tokens, i + offset)));
    }
    let focus = &tokens[index].text;
    let lower: Vec<char> = focus.to_lowercase().chars().collect();
    for n in 1..=3.min(lower.len()) {
        add(format!("pre{n}={}", lower[..n].iter().collect::<String>()));
        add(format!(
            "suf{n}={}",
            lower[lower.len() - n..].iter().collect::<String>()
        ));
    }
    add(format!("shape={}", shape(focus)));
    add(match index.checked_sub(1) {
        Some(p) => format!("shape-1={}", shape(&tokens[p].text)),
        None => "shape-1=<s>".to_string(),
    });
    add(match tokens.get(index + 1) {
        Some(t) => format!("shape+1={}", shape(&t.text)),
        None => "shape+1=</s>".to_string(),
    });
    if focus.chars().all(char::is_numeric) {
        add("isdigit".into());
    }
    if focus.chars().all(|c| !c.is_alphanumeric()) {
        add("ispunct".into());
    }
    if focus.chars().next().is_some_and(char::is_uppercase) {
        add("iscap".into());
    }
    if let Some((start, _, classes)) = gazetteer.longest_match(tokens, index) {
        for class in classes {
            add(format!("gaz={class}"));
            let pos = if start == index { "gazb" } else { "gazi" };
            add(format!("{pos}={class}"));
        }
    }
    for (name, neighbour) in [("gaz-1", index.checked_sub(1)), ("gaz+1", Some(index + 1))] {
        let Some(n) = neighbour.filter(|n| *n < tokens.len()) else {
            continue;
        };
        if let Some((_, _, classes)) = gazetteer.longest_match(tokens, n) {
            for class in classes {
                add(format!("{name}={class}"));
            }
        }
    }
    Ok(feats)
}
