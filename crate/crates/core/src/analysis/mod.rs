//! Error taxonomy, inter-annotator agreement, one-way ANOVA and the
//! carbon-footprint estimate.

pub mod special;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{spans_to_iob, CorpusError, Dataset, Document, RepairPolicy, Tag, TagSequence};
use crate::metrics::{self, EvalMode, EvaluationReport, MetricsError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Domain(String),
    #[error("document {doc_id}: {reason}")]
    Pairing { doc_id: String, reason: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Kind of a token-level tagging error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorType {
    /// Gold `O`, predicted an entity tag.
    FalsePositive = 1,
    /// Gold entity tag, predicted `O`.
    FalseNegative = 2,
    /// Both entity tags, different classes.
    WrongClass = 3,
    /// Same class, different IOB prefix.
    WrongBoundary = 4,
}

impl ErrorType {
    pub const ALL: [ErrorType; 4] = [
        ErrorType::FalsePositive,
        ErrorType::FalseNegative,
        ErrorType::WrongClass,
        ErrorType::WrongBoundary,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    /// Classifies a mismatching gold/predicted tag pair; `None` when the
    /// tags are equal.
    pub fn classify(gold: &Tag, pred: &Tag) -> Option<ErrorType> {
        if gold == pred {
            return None;
        }
        Some(match (gold.class(), pred.class()) {
            (None, _) => ErrorType::FalsePositive,
            (_, None) => ErrorType::FalseNegative,
            (Some(g), Some(p)) if g != p => ErrorType::WrongClass,
            _ => ErrorType::WrongBoundary,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorType::FalsePositive => "False Positives (Type 1)",
            ErrorType::FalseNegative => "False Negatives (Type 2)",
            ErrorType::WrongClass => "Type 3",
            ErrorType::WrongBoundary => "Type 4",
        }
    }
}

impl Serialize for ErrorType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for ErrorType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let n = u8::deserialize(d)?;
        ErrorType::ALL
            .into_iter()
            .find(|t| t.number() == n)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown error type {n}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub doc_id: String,
    pub index: usize,
    pub gold: Tag,
    pub pred: Tag,
    #[serde(rename = "type")]
    pub error_type: ErrorType,
}

/// One record per mismatching position of an aligned pair of sequences.
pub fn classify_errors(
    gold: &TagSequence,
    pred: &TagSequence,
) -> Result<Vec<ErrorRecord>, AnalysisError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::Alignment {
            doc_id: gold.doc_id.clone(),
            reason: format!("{} predicted tags for {} gold tags", pred.len(), gold.len()),
        }
        .into());
    }
    Ok(gold
        .tags
        .iter()
        .zip(&pred.tags)
        .enumerate()
        .filter_map(|(index, (g, p))| {
            ErrorType::classify(g, p).map(|error_type| ErrorRecord {
                doc_id: gold.doc_id.clone(),
                index,
                gold: g.clone(),
                pred: p.clone(),
                error_type,
            })
        })
        .collect())
}

/// [`classify_errors`] over whole corpora paired by document id, in gold
/// order.
pub fn classify_corpus(
    gold: &[TagSequence],
    pred: &[TagSequence],
) -> Result<Vec<ErrorRecord>, AnalysisError> {
    let pairs = metrics::align(gold, pred)?;
    let mut out = Vec::new();
    for (g, p) in pairs {
        out.extend(classify_errors(g, p)?);
    }
    Ok(out)
}

pub fn records_to_jsonl(records: &[ErrorRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeCount {
    pub count: usize,
    pub percentage: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub type_1: TypeCount,
    pub type_2: TypeCount,
    pub type_3: TypeCount,
    pub type_4: TypeCount,
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<RepairPolicy>,
}

impl ErrorBreakdown {
    pub fn get(&self, t: ErrorType) -> TypeCount {
        match t {
            ErrorType::FalsePositive => self.type_1,
            ErrorType::FalseNegative => self.type_2,
            ErrorType::WrongClass => self.type_3,
            ErrorType::WrongBoundary => self.type_4,
        }
    }

    pub fn render_table(&self) -> String {
        let mut out = format!("{:<26}  {:>8}  {:>7}\n", "Class", "#", "%");
        for t in ErrorType::ALL {
            let c = self.get(t);
            out.push_str(&format!(
                "{:<26}  {:>8}  {:>7.2}\n",
                t.label(),
                c.count,
                c.percentage
            ));
        }
        let pct = if self.total > 0 { 100.0 } else { 0.0 };
        out.push_str(&format!(
            "{:<26}  {:>8}  {:>7.2}\n",
            "TOTAL", self.total, pct
        ));
        out
    }
}

pub fn error_breakdown(records: &[ErrorRecord]) -> ErrorBreakdown {
    let mut counts = [0usize; 4];
    for r in records {
        counts[r.error_type.number() as usize - 1] += 1;
    }
    let total = records.len();
    let tc = |count: usize| TypeCount {
        count,
        percentage: if total == 0 {
            0.0
        } else {
            100.0 * count as f64 / total as f64
        },
    };
    ErrorBreakdown {
        type_1: tc(counts[0]),
        type_2: tc(counts[1]),
        type_3: tc(counts[2]),
        type_4: tc(counts[3]),
        total,
        repair: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Poor,
    Fair,
    Moderate,
    Good,
    Excellent,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Poor => "poor",
            Band::Fair => "fair",
            Band::Moderate => "moderate",
            Band::Good => "good",
            Band::Excellent => "excellent",
        })
    }
}

/// Agreement band. Intervals are half-open on the right except the top one,
/// which includes 1.0.
pub fn band(value: f64) -> Result<Band, AnalysisError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(AnalysisError::Domain(format!(
            "agreement value {value} outside [0, 1]"
        )));
    }
    Ok(match value {
        v if v < 0.2 => Band::Poor,
        v if v < 0.4 => Band::Fair,
        v if v < 0.6 => Band::Moderate,
        v if v < 0.8 => Band::Good,
        _ => Band::Excellent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub value: f64,
    pub band: Band,
}

impl Agreement {
    fn new(value: f64) -> Result<Self, AnalysisError> {
        Ok(Self {
            value,
            band: band(value)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IaaReport {
    pub mode: EvalMode,
    pub per_class: BTreeMap<String, Agreement>,
    pub overall: Agreement,
    pub report: EvaluationReport,
}

impl IaaReport {
    pub fn render_table(&self) -> String {
        let width = self
            .per_class
            .keys()
            .map(|k| k.chars().count())
            .max()
            .unwrap_or(0)
            .max("OVERALL".len());
        let mut out = format!("{:<width$}  {:>6}  {}\n", "Class", "IAA", "Band");
        for (class, a) in &self.per_class {
            out.push_str(&format!(
                "{:<width$}  {:>6.2}  {}\n",
                class, a.value, a.band
            ));
        }
        out.push_str(&format!(
            "{:<width$}  {:>6.2}  {}\nmode: {}\n",
            "OVERALL", self.overall.value, self.overall.band, self.mode
        ));
        out
    }
}

/// Agreement of `other` against `reference` taken as gold: the F1 of the
/// second annotator per class and overall.
/// Agreement of `other` against `reference` taken as gold. Per-class values
/// are F1; the overall value is the micro-averaged F1, which does not depend
/// on which side is the reference.
pub fn iaa(
    reference: &Dataset,
    other: &Dataset,
    mode: EvalMode,
) -> Result<IaaReport, AnalysisError> {
    let by_id: HashMap<&str, &Document> =
        other.documents.iter().map(|d| (d.id.as_str(), d)).collect();
    if other.documents.len() != reference.documents.len() {
        if let Some(extra) = other
            .documents
            .iter()
            .find(|d| reference.get(&d.id).is_none())
        {
            return Err(AnalysisError::Pairing {
                doc_id: extra.id.clone(),
                reason: "not annotated by the reference".into(),
            });
        }
    }
    let mut gold = Vec::with_capacity(reference.documents.len());
    let mut pred = Vec::with_capacity(reference.documents.len());
    for doc in &reference.documents {
        let theirs = by_id
            .get(doc.id.as_str())
            .ok_or_else(|| AnalysisError::Pairing {
                doc_id: doc.id.clone(),
                reason: "missing from the second annotation".into(),
            })?;
        if theirs.text != doc.text {
            return Err(AnalysisError::Pairing {
                doc_id: doc.id.clone(),
                reason: "document text differs between annotations".into(),
            });
        }
        gold.push(spans_to_iob(doc)?);
        let projected = Document {
            entities: theirs.entities.clone(),
            ..doc.clone()
        };
        pred.push(spans_to_iob(&projected)?);
    }
    let report = metrics::evaluate(&gold, &pred, mode)?;
    let per_class = report
        .per_class
        .iter()
        .map(|(c, m)| Ok((c.clone(), Agreement::new(m.f1)?)))
        .collect::<Result<_, AnalysisError>>()?;
    Ok(IaaReport {
        mode,
        per_class,
        overall: Agreement::new(report.micro.f1)?,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// `+inf` when groups differ but have no within-group spread.
    #[serde(serialize_with = "finite_or_string")]
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub groups: usize,
    pub group_sizes: Vec<usize>,
}

fn finite_or_string<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.collect_str(v)
    }
}

/// Classical one-way ANOVA with the p-value from the F survival function.
///
/// Zero within-group spread is treated exactly: equal group means give
/// `F = 0, p = 1`, different means give `F = inf, p = 0`.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult, AnalysisError> {
    if groups.len() < 2 {
        return Err(AnalysisError::Domain(
            "ANOVA needs at least 2 groups".into(),
        ));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(AnalysisError::Domain(format!(
            "group {i} has fewer than 2 observations"
        )));
    }
    if groups.iter().flatten().any(|x| !x.is_finite()) {
        return Err(AnalysisError::Domain("observations must be finite".into()));
    }
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let means: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect();
    let ss_between: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum();

    // rounding noise left by the means of constant groups
    let scale = groups.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let noise = n as f64 * (64.0 * f64::EPSILON * scale).powi(2);
    let df_between = k - 1;
    let df_within = n - k;
    let (f, p) = if ss_within <= noise {
        if ss_between <= noise {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
        (
            f,
            special::f_survival(f, df_between as f64, df_within as f64),
        )
    };
    Ok(AnovaResult {
        f,
        p,
        df_between,
        df_within,
        groups: k,
        group_sizes: groups.iter().map(Vec::len).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarbonEstimate {
    pub gpu_hours: f64,
    /// Average draw in kW.
    pub avg_power: f64,
    /// kgCO2 per kWh.
    pub grid_intensity: f64,
    /// kgCO2-eq.
    pub total: f64,
}

pub fn carbon_estimate(
    gpu_hours: f64,
    avg_power_kw: f64,
    intensity_kg_per_kwh: f64,
) -> Result<CarbonEstimate, AnalysisError> {
    for (name, v) in [
        ("gpu hours", gpu_hours),
        ("power", avg_power_kw),
        ("intensity", intensity_kg_per_kwh),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(AnalysisError::Domain(format!(
                "{name} must be a non-negative number, got {v}"
            )));
        }
    }
    Ok(CarbonEstimate {
        gpu_hours,
        avg_power: avg_power_kw,
        grid_intensity: intensity_kg_per_kwh,
        total: gpu_hours * avg_power_kw * intensity_kg_per_kwh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EntitySpan;

    fn tag(s: &str) -> Tag {
        s.parse().unwrap()
    }

    #[test]
    fn taxonomy_examples() {
        let t = |g, p| ErrorType::classify(&tag(g), &tag(p));
        assert_eq!(
            t("B-TEST", "B-DIAGNOSI_E_COMORBIDITÀ"),
            Some(ErrorType::WrongClass)
        );
        assert_eq!(t("B-TEST", "I-TEST"), Some(ErrorType::WrongBoundary));
        assert_eq!(t("O", "B-DRUG"), Some(ErrorType::FalsePositive));
        assert_eq!(t("B-DRUG", "O"), Some(ErrorType::FalseNegative));
        assert_eq!(t("I-DRUG", "I-DRUG"), None);
    }

    #[test]
    fn classify_errors_positions() {
        let gold = TagSequence::parse("d", &["B-A", "I-A", "O", "B-B"]).unwrap();
        let pred = TagSequence::parse("d", &["B-A", "B-A", "B-B", "O"]).unwrap();
        let recs = classify_errors(&gold, &pred).unwrap();
        let got: Vec<_> = recs
            .iter()
            .map(|r| (r.index, r.error_type.number()))
            .collect();
        assert_eq!(got, [(1, 4), (2, 1), (3, 2)]);
        let short = TagSequence::parse("d", &["O"]).unwrap();
        assert!(classify_errors(&gold, &short).is_err());
        let line = records_to_jsonl(&recs[..1]);
        assert_eq!(
            line,
            "{\"doc_id\":\"d\",\"index\":1,\"gold\":\"I-A\",\"pred\":\"B-A\",\"type\":4}\n"
        );
    }

    #[test]
    fn breakdown_arithmetic() {
        let empty = error_breakdown(&[]);
        assert_eq!(empty.total, 0);
        assert!(ErrorType::ALL
            .iter()
            .all(|t| empty.get(*t) == TypeCount::default()));

        let rec = |t| ErrorRecord {
            doc_id: "d".into(),
            index: 0,
            gold: Tag::Outside,
            pred: Tag::Outside,
            error_type: t,
        };
        let recs = [
            rec(ErrorType::FalsePositive),
            rec(ErrorType::FalsePositive),
            rec(ErrorType::WrongBoundary),
            rec(ErrorType::WrongBoundary),
        ];
        let b = error_breakdown(&recs);
        let pct: Vec<f64> = ErrorType::ALL
            .iter()
            .map(|t| b.get(*t).percentage)
            .collect();
        assert_eq!(pct, [50.0, 0.0, 0.0, 50.0]);
    }

    #[test]
    fn band_boundaries() {
        assert_eq!(band(0.0).unwrap(), Band::Poor);
        assert_eq!(band(0.2).unwrap(), Band::Fair);
        assert_eq!(band(0.54).unwrap(), Band::Moderate);
        assert_eq!(band(0.6).unwrap(), Band::Good);
        assert_eq!(band(0.83).unwrap(), Band::Excellent);
        assert_eq!(band(1.0).unwrap(), Band::Excellent);
        assert!(band(1.01).is_err());
        assert!(band(-0.1).is_err());
        assert!(band(f64::NAN).is_err());
    }

    fn annotated(entities: Vec<EntitySpan>) -> Dataset {
        Dataset::new(
            "a",
            vec![Document::new("a-0", "MMSE e GDS nella norma", entities)],
        )
        .unwrap()
    }

    #[test]
    fn iaa_examples() {
        let both = vec![
            EntitySpan::new(0, 4, "TEST"),
            EntitySpan::new(7, 10, "TEST"),
        ];
        let reference = annotated(both.clone());
        let same = iaa(&reference, &annotated(both), EvalMode::TokenStrict).unwrap();
        assert_eq!(same.overall.value, 1.0);
        assert_eq!(same.overall.band, Band::Excellent);

        let disjoint = annotated(vec![EntitySpan::new(11, 16, "TEST")]);
        let r = iaa(&reference, &disjoint, EvalMode::TokenStrict).unwrap();
        assert_eq!(r.overall.value, 0.0);
        assert_eq!(r.overall.band, Band::Poor);

        let half = annotated(vec![EntitySpan::new(0, 4, "TEST")]);
        let r = iaa(&reference, &half, EvalMode::EntityExact).unwrap();
        assert!((r.overall.value - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.overall.band, Band::Good);
    }

    #[test]
    fn iaa_overall_is_symmetric_with_unequal_supports() {
        let a = annotated(vec![
            EntitySpan::new(0, 4, "TEST"),
            EntitySpan::new(7, 10, "TEST"),
            EntitySpan::new(11, 16, "DRUG"),
        ]);
        let b = annotated(vec![
            EntitySpan::new(0, 4, "TEST"),
            EntitySpan::new(11, 16, "DRUG"),
        ]);
        let ab = iaa(&a, &b, EvalMode::TokenStrict).unwrap();
        let ba = iaa(&b, &a, EvalMode::TokenStrict).unwrap();
        assert_ne!(ab.report.overall.f1, ba.report.overall.f1);
        assert!((ab.overall.value - ba.overall.value).abs() < 1e-12);
        assert!((ab.overall.value - 0.8).abs() < 1e-12);
    }

    #[test]
    fn iaa_pairing_errors() {
        let reference = annotated(vec![]);
        let mut other = reference.clone();
        other.documents[0].text.push('!');
        assert!(matches!(
            iaa(&reference, &other, EvalMode::TokenStrict),
            Err(AnalysisError::Pairing { .. })
        ));
        let mut other = reference.clone();
        other.documents[0].id = "zz".into();
        assert!(matches!(
            iaa(&reference, &other, EvalMode::TokenStrict),
            Err(AnalysisError::Pairing { .. })
        ));
    }

    #[test]
    fn anova_textbook() {
        let r = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]]).unwrap();
        assert_eq!(r.f, 1.5);
        assert_eq!((r.df_between, r.df_within), (1, 4));
        // scipy.stats.f.sf(1.5, 1, 4)
        assert!((r.p - 0.287_864_134_726_690_7).abs() < 1e-9);
    }

    #[test]
    fn anova_degenerate() {
        let same = vec![vec![0.1; 10]; 4];
        let r = anova_oneway(&same).unwrap();
        assert_eq!((r.f, r.p), (0.0, 1.0));
        let r = anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!((r.f, r.p), (f64::INFINITY, 0.0));
        assert!(serde_json::to_string(&r).unwrap().contains("\"inf\""));
        assert!(anova_oneway(&[vec![1.0, 2.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn carbon() {
        assert_eq!(carbon_estimate(30.0, 0.4, 0.45).unwrap().total, 5.4);
        assert_eq!(carbon_estimate(0.0, 0.4, 0.45).unwrap().total, 0.0);
        assert_eq!(carbon_estimate(1.0, 1.0, 1.0).unwrap().total, 1.0);
        assert!(carbon_estimate(-1.0, 1.0, 1.0).is_err());
    }
}
