use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CorpusError;

/// One IOB tag. The class is stored in tag form: spaces in entity labels
/// are written as underscores.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    pub fn begin(label: &str) -> Self {
        Tag::Begin(label_to_class(label))
    }

    pub fn inside(label: &str) -> Self {
        Tag::Inside(label_to_class(label))
    }

    /// Class in tag form, `None` for `O`.
    pub fn class(&self) -> Option<&str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(c) | Tag::Inside(c) => Some(c),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Tag::Outside)
    }

    /// Whether `self` may follow `previous` (`None` at sequence start).
    pub fn may_follow(&self, previous: Option<&Tag>) -> bool {
        match self {
            Tag::Inside(c) => matches!(
                previous,
                Some(Tag::Begin(p)) | Some(Tag::Inside(p)) if p == c
            ),
            _ => true,
        }
    }
}

/// Entity label to tag-form class.
pub fn label_to_class(label: &str) -> String {
    label.replace(' ', "_")
}

/// Tag-form class back to an entity label.
pub fn class_to_label(class: &str) -> String {
    class.replace('_', " ")
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(c) => write!(f, "B-{c}"),
            Tag::Inside(c) => write!(f, "I-{c}"),
        }
    }
}

impl FromStr for Tag {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = |reason| CorpusError::InvalidTag {
            tag: s.to_string(),
            reason,
        };
        if s == "O" {
            return Ok(Tag::Outside);
        }
        let (prefix, class) = s
            .split_once('-')
            .ok_or_else(|| invalid("expected O, B-<class> or I-<class>"))?;
        if class.is_empty() {
            return Err(invalid("empty class"));
        }
        if class.chars().any(char::is_whitespace) {
            return Err(invalid("class contains whitespace"));
        }
        match prefix {
            "B" => Ok(Tag::Begin(class.to_string())),
            "I" => Ok(Tag::Inside(class.to_string())),
            _ => Err(invalid("invalid tag prefix")),
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub doc_id: String,
    pub tags: Vec<Tag>,
}

impl TagSequence {
    pub fn new(doc_id: impl Into<String>, tags: Vec<Tag>) -> Self {
        Self {
            doc_id: doc_id.into(),
            tags,
        }
    }

    pub fn parse(doc_id: impl Into<String>, tags: &[&str]) -> Result<Self, CorpusError> {
        let tags = tags.iter().map(|t| t.parse()).collect::<Result<_, _>>()?;
        Ok(Self::new(doc_id, tags))
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagViolation {
    pub index: usize,
    pub tag: Tag,
    /// Preceding tag, `None` at sequence start.
    pub previous: Option<Tag>,
}

/// Every `I-<X>` not preceded by `B-<X>` or `I-<X>`.
pub fn validate_tags(tags: &TagSequence) -> Vec<TagViolation> {
    let mut out = Vec::new();
    let mut previous: Option<&Tag> = None;
    for (index, tag) in tags.tags.iter().enumerate() {
        if !tag.may_follow(previous) {
            out.push(TagViolation {
                index,
                tag: tag.clone(),
                previous: previous.cloned(),
            });
        }
        previous = Some(tag);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairPolicy {
    PromoteToB,
    DropToO,
}

impl FromStr for RepairPolicy {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "promote_to_B" | "promote_to_b" | "promote-to-b" | "promote" => Ok(Self::PromoteToB),
            "drop_to_O" | "drop_to_o" | "drop-to-o" | "drop" => Ok(Self::DropToO),
            _ => Err(CorpusError::Unknown {
                what: "repair policy",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for RepairPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PromoteToB => "promote_to_B",
            Self::DropToO => "drop_to_O",
        })
    }
}

/// Rewrites orphan `I-<X>` tags left to right, judging each tag against the
/// already repaired predecessor.
pub fn repair_tags(tags: &TagSequence, policy: RepairPolicy) -> TagSequence {
    let mut repaired: Vec<Tag> = Vec::with_capacity(tags.tags.len());
    for tag in &tags.tags {
        let fixed = if tag.may_follow(repaired.last()) {
            tag.clone()
        } else {
            match (policy, tag) {
                (RepairPolicy::PromoteToB, Tag::Inside(c)) => Tag::Begin(c.clone()),
                _ => Tag::Outside,
            }
        };
        repaired.push(fixed);
    }
    TagSequence::new(tags.doc_id.clone(), repaired)
}
