//! Experiment protocols: document splits, seed sweeps, reference-run
//! selection, one-vs-all, leave-one-group-out with an anchor dataset,
//! low-resource A/B comparison and full-data training.

mod plan;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Dataset, Document, TagSequence};
use crate::metrics::{evaluate, round6, EvalMode, EvaluationReport, MetricsError};
use crate::tagger::{continue_training, train, TaggerError, TaggerModel, TrainConfig};

pub use plan::{load_plan, DatasetSource, ExperimentPlan, PlanKind};
pub use report::{run_plan, write_run_dir, ExperimentOutcome};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("split error: {0}")]
    Split(String),
    #[error("plan error: {0}")]
    Plan(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub val_fraction_of_rest: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.10,
            val_fraction_of_rest: 0.20,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        for (name, v) in [
            ("test_fraction", self.test_fraction),
            ("val_fraction_of_rest", self.val_fraction_of_rest),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ExperimentError::Split(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// `round(x)` with halves rounded up. The small epsilon keeps products such
/// as `0.2 * 9 = 1.8000000000000003` or `0.1 * 25 = 2.5` on the intended side.
fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// `(test, val, train)` sizes for `n` documents. Each part keeps at least one
/// document.
pub fn split_sizes(n: usize, spec: &SplitSpec) -> Result<(usize, usize, usize), ExperimentError> {
    spec.validate()?;
    if n < 3 {
        return Err(ExperimentError::Split(format!(
            "need at least 3 documents to split, got {n}"
        )));
    }
    let test = round_half_up(spec.test_fraction * n as f64).clamp(1, n - 2);
    let rest = n - test;
    let val = round_half_up(spec.val_fraction_of_rest * rest as f64).clamp(1, rest - 1);
    Ok((test, val, rest - val))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl Split {
    /// Training data for the baseline tagger: train followed by val.
    pub fn train_and_val(&self) -> Dataset {
        let mut merged = self.train.clone();
        merged.documents.extend(self.val.documents.iter().cloned());
        merged
    }
}

fn subset(ds: &Dataset, suffix: &str, ids: &[&str]) -> Dataset {
    let by_id: BTreeMap<&str, &Document> =
        ds.documents.iter().map(|d| (d.id.as_str(), d)).collect();
    Dataset {
        name: format!("{}/{suffix}", ds.name),
        documents: ids.iter().map(|id| by_id[id].clone()).collect(),
        declared_labels: ds.declared_labels.clone(),
    }
}

/// Document ids sorted, then shuffled with the seed. Independent of the
/// order documents appear in the dataset.
fn shuffled_ids(ds: &Dataset, seed: u64) -> Vec<&str> {
    let mut ids: Vec<&str> = ds.documents.iter().map(|d| d.id.as_str()).collect();
    ids.sort_unstable();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids
}

/// Seeded document-level partition into train, val and test.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Split, ExperimentError> {
    let (test, val, _) = split_sizes(ds.documents.len(), spec)?;
    let ids = shuffled_ids(ds, spec.seed);
    Ok(Split {
        test: subset(ds, "test", &ids[..test]),
        val: subset(ds, "val", &ids[test..test + val]),
        train: subset(ds, "train", &ids[test + val..]),
    })
}

/// Seeded partition of a left-out dataset into a tune slice of
/// `round(fraction * N)` documents and a test remainder.
pub fn lowres_partition(
    ds: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), ExperimentError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(ExperimentError::Plan(format!(
            "lowres_fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = ds.documents.len();
    let tune = round_half_up(fraction * n as f64);
    if tune == 0 || tune >= n {
        return Err(ExperimentError::Plan(format!(
            "dataset {} with {n} documents gives a tune set of {tune}",
            ds.name
        )));
    }
    let ids = shuffled_ids(ds, seed);
    Ok((
        subset(ds, "tune", &ids[..tune]),
        subset(ds, "test", &ids[tune..]),
    ))
}

/// Concatenates datasets, prefixing every id with `<dataset>/`.
pub fn concat(name: &str, parts: &[&Dataset]) -> Result<Dataset, ExperimentError> {
    let documents = parts
        .iter()
        .flat_map(|ds| {
            ds.documents.iter().map(move |d| Document {
                id: format!("{}/{}", ds.name, d.id),
                ..d.clone()
            })
        })
        .collect();
    Ok(Dataset::new(name, documents)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    #[serde(serialize_with = "round6")]
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    #[serde(serialize_with = "round6")]
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    /// Runs in which the class occurred.
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n_seeds: usize,
    pub per_class: BTreeMap<String, MetricSummary>,
    pub overall: MetricSummary,
    pub reference_seed: usize,
    pub reports: Vec<EvaluationReport>,
}

impl SweepSummary {
    pub fn overall_f1(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.overall.f1).collect()
    }
}

/// Distances to the mean closer than this count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the run whose overall F1 is closest to the mean; ties go to the
/// lowest index. `None` for no runs.
pub fn select_reference_run(overall_f1: &[f64]) -> Option<usize> {
    if overall_f1.is_empty() {
        return None;
    }
    let mean = MeanStd::of(overall_f1).mean;
    let mut best = 0;
    for (i, f) in overall_f1.iter().enumerate().skip(1) {
        if (f - mean).abs() < (overall_f1[best] - mean).abs() - TIE_TOLERANCE {
            best = i;
        }
    }
    Some(best)
}

/// Mean and sample std of every metric over per-seed reports.
pub fn summarize(reports: Vec<EvaluationReport>) -> Result<SweepSummary, ExperimentError> {
    let reference_seed =
        select_reference_run(&reports.iter().map(|r| r.overall.f1).collect::<Vec<_>>())
            .ok_or_else(|| ExperimentError::Plan("no runs to summarize".into()))?;
    let metric = |ms: Vec<&crate::metrics::ClassMetrics>| MetricSummary {
        precision: MeanStd::of(&ms.iter().map(|m| m.precision).collect::<Vec<_>>()),
        recall: MeanStd::of(&ms.iter().map(|m| m.recall).collect::<Vec<_>>()),
        f1: MeanStd::of(&ms.iter().map(|m| m.f1).collect::<Vec<_>>()),
        runs: ms.len(),
    };
    let classes: BTreeSet<&String> = reports.iter().flat_map(|r| r.per_class.keys()).collect();
    let per_class = classes
        .into_iter()
        .map(|c| {
            let ms = reports.iter().filter_map(|r| r.per_class.get(c)).collect();
            (c.clone(), metric(ms))
        })
        .collect();
    Ok(SweepSummary {
        n_seeds: reports.len(),
        overall: metric(reports.iter().map(|r| &r.overall).collect()),
        per_class,
        reference_seed,
        reports,
    })
}

pub fn evaluate_model(
    model: &TaggerModel,
    ds: &Dataset,
    mode: EvalMode,
) -> Result<EvaluationReport, ExperimentError> {
    let gold = ds.tag_sequences()?;
    let pred = model.decode_dataset(ds);
    Ok(evaluate(&gold, &pred, mode)?)
}

/// Settings shared by every training run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_seeds: usize,
    pub split: SplitSpec,
    pub mode: EvalMode,
    pub tagger: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_seeds: 10,
            split: SplitSpec::default(),
            mode: EvalMode::default(),
            tagger: TrainConfig::default(),
        }
    }
}

impl SweepConfig {
    /// Split and tagger settings for run `index`: both seeds are offset by it.
    fn for_run(&self, index: usize) -> (SplitSpec, TrainConfig) {
        let mut split = self.split;
        split.seed = self.split.seed + index as u64;
        let mut tagger = self.tagger.clone();
        tagger.seed = self.tagger.seed + index as u64;
        (split, tagger)
    }
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub report: EvaluationReport,
    pub model: TaggerModel,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub summary: SweepSummary,
    pub runs: Vec<SeedRun>,
}

impl Sweep {
    pub fn reference_model(&self) -> &TaggerModel {
        &self.runs[self.summary.reference_seed].model
    }
}

fn ids(ds: &Dataset) -> Vec<String> {
    ds.documents.iter().map(|d| d.id.clone()).collect()
}

/// Splits, trains (train and val merged) and tests once per seed.
pub fn sweep(ds: &Dataset, cfg: &SweepConfig) -> Result<Sweep, ExperimentError> {
    if cfg.n_seeds == 0 {
        return Err(ExperimentError::Plan("n_seeds must be at least 1".into()));
    }
    let runs = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|i| {
            let (split_spec, tagger) = cfg.for_run(i);
            let parts = split(ds, &split_spec)?;
            let model = train(&parts.train_and_val(), &tagger)?;
            let report = evaluate_model(&model, &parts.test, cfg.mode)?;
            Ok(SeedRun {
                seed: split_spec.seed,
                train_ids: ids(&parts.train),
                val_ids: ids(&parts.val),
                test_ids: ids(&parts.test),
                report,
                model,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let summary = summarize(runs.iter().map(|r| r.report.clone()).collect())?;
    Ok(Sweep { summary, runs })
}

/// Either a trained model or precomputed predictions per external dataset.
pub enum ModelSource<'a> {
    Model(&'a TaggerModel),
    Predictions(&'a [Vec<TagSequence>]),
}

/// Evaluates a fixed model on each external dataset in full.
pub fn run_ova(
    source: &ModelSource<'_>,
    externals: &[Dataset],
    mode: EvalMode,
) -> Result<Vec<EvaluationReport>, ExperimentError> {
    match source {
        ModelSource::Model(model) => externals
            .iter()
            .map(|ds| evaluate_model(model, ds, mode))
            .collect(),
        ModelSource::Predictions(preds) => {
            if preds.len() != externals.len() {
                return Err(ExperimentError::Plan(format!(
                    "{} prediction sets for {} datasets",
                    preds.len(),
                    externals.len()
                )));
            }
            externals
                .iter()
                .zip(preds.iter())
                .map(|(ds, pred)| Ok(evaluate(&ds.tag_sequences()?, pred, mode)?))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogoGroup {
    pub train_sets: Vec<String>,
    pub leftout: String,
}

/// One group per non-anchor dataset, holding that dataset out.
pub fn build_logo_groups(
    datasets: &[String],
    anchor: &str,
) -> Result<Vec<LogoGroup>, ExperimentError> {
    if !datasets.iter().any(|d| d == anchor) {
        return Err(ExperimentError::Plan(format!(
            "anchor dataset {anchor} is not in the plan"
        )));
    }
    let unique: BTreeSet<&String> = datasets.iter().collect();
    if unique.len() != datasets.len() {
        return Err(ExperimentError::Plan("dataset names must be unique".into()));
    }
    let groups: Vec<LogoGroup> = datasets
        .iter()
        .filter(|d| *d != anchor)
        .map(|leftout| LogoGroup {
            train_sets: datasets.iter().filter(|d| *d != leftout).cloned().collect(),
            leftout: leftout.clone(),
        })
        .collect();
    if groups.is_empty() {
        return Err(ExperimentError::Plan(format!(
            "no dataset besides the anchor {anchor} to hold out"
        )));
    }
    Ok(groups)
}

#[derive(Debug, Clone)]
pub struct LogoResult {
    pub group: LogoGroup,
    /// Concatenated training datasets, ids namespaced by source.
    pub train_data: Dataset,
    pub sweep: Sweep,
    /// Each seed's model on the full left-out dataset.
    pub leftout: SweepSummary,
}

fn by_name<'a>(datasets: &'a [Dataset], name: &str) -> Result<&'a Dataset, ExperimentError> {
    datasets
        .iter()
        .find(|d| d.name == name)
        .ok_or_else(|| ExperimentError::Plan(format!("dataset {name} not loaded")))
}

pub fn run_logo(
    datasets: &[Dataset],
    anchor: &str,
    cfg: &SweepConfig,
) -> Result<Vec<LogoResult>, ExperimentError> {
    let names: Vec<String> = datasets.iter().map(|d| d.name.clone()).collect();
    build_logo_groups(&names, anchor)?
        .into_iter()
        .map(|group| {
            let parts = group
                .train_sets
                .iter()
                .map(|n| by_name(datasets, n))
                .collect::<Result<Vec<_>, _>>()?;
            let train_data = concat(&format!("logo-{}", group.leftout), &parts)?;
            let sweep = sweep(&train_data, cfg)?;
            let leftout_ds = by_name(datasets, &group.leftout)?;
            let reports = sweep
                .runs
                .par_iter()
                .map(|r| evaluate_model(&r.model, leftout_ds, cfg.mode))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(LogoResult {
                group,
                train_data,
                leftout: summarize(reports)?,
                sweep,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbSeed {
    pub seed: u64,
    pub tune_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub tune_entities: usize,
    pub report_a: EvaluationReport,
    pub report_b: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbComparison {
    pub leftout: String,
    pub seeds: Vec<AbSeed>,
    pub a: MeanStd,
    pub b: MeanStd,
    pub delta: MeanStd,
    /// Seeds where B's overall F1 is strictly above A's.
    pub b_wins: usize,
}

#[derive(Debug, Clone)]
pub struct LowresResult {
    pub logo: LogoResult,
    pub ab: AbComparison,
}

/// Low-resource A/B per group. Model A is the group's reference LOGO model;
/// model B continues training it on a seeded slice of the left-out dataset,
/// replaying the group's training data. Both are tested on the rest.
pub fn run_lowres(
    datasets: &[Dataset],
    anchor: &str,
    lowres_fraction: f64,
    cfg: &SweepConfig,
) -> Result<Vec<LowresResult>, ExperimentError> {
    let logo = run_logo(datasets, anchor, cfg)?;
    logo.into_iter()
        .map(|group| {
            let leftout = by_name(datasets, &group.group.leftout)?;
            let model_a = group.sweep.reference_model();
            let seeds = (0..cfg.n_seeds)
                .into_par_iter()
                .map(|i| {
                    let (split_spec, tagger) = cfg.for_run(i);
                    let (tune, test) = lowres_partition(leftout, lowres_fraction, split_spec.seed)?;
                    let model_b = continue_training(model_a, &tune, &group.train_data, &tagger)?;
                    Ok(AbSeed {
                        seed: split_spec.seed,
                        tune_ids: ids(&tune),
                        test_ids: ids(&test),
                        tune_entities: tune.entity_count(),
                        report_a: evaluate_model(model_a, &test, cfg.mode)?,
                        report_b: evaluate_model(&model_b, &test, cfg.mode)?,
                    })
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            let a: Vec<f64> = seeds.iter().map(|s| s.report_a.overall.f1).collect();
            let b: Vec<f64> = seeds.iter().map(|s| s.report_b.overall.f1).collect();
            let delta: Vec<f64> = a.iter().zip(&b).map(|(a, b)| b - a).collect();
            let ab = AbComparison {
                leftout: group.group.leftout.clone(),
                a: MeanStd::of(&a),
                b: MeanStd::of(&b),
                delta: MeanStd::of(&delta),
                b_wins: delta.iter().filter(|d| **d > 0.0).count(),
                seeds,
            };
            Ok(LowresResult { logo: group, ab })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FullResult {
    pub train_data: Dataset,
    pub sweep: Sweep,
}

impl FullResult {
    pub fn reference_model(&self) -> &TaggerModel {
        self.sweep.reference_model()
    }
}

/// Sweeps over the concatenation of every dataset.
pub fn run_full(datasets: &[Dataset], cfg: &SweepConfig) -> Result<FullResult, ExperimentError> {
    if datasets.is_empty() {
        return Err(ExperimentError::Plan(
            "full training needs at least one dataset".into(),
        ));
    }
    let parts: Vec<&Dataset> = datasets.iter().collect();
    let train_data = concat("full", &parts)?;
    let sweep = sweep(&train_data, cfg)?;
    Ok(FullResult { train_data, sweep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EntitySpan;
    use proptest::prelude::*;

    fn numbered(name: &str, n: usize) -> Dataset {
        let docs = (0..n)
            .map(|i| Document::new(format!("{name}-{i:03}"), format!("doc {i}"), vec![]))
            .collect();
        Dataset::new(name, docs).unwrap()
    }

    #[test]
    fn split_sizes_follow_rounding() {
        let spec = SplitSpec::default();
        assert_eq!(split_sizes(100, &spec).unwrap(), (10, 18, 72));
        assert_eq!(split_sizes(10, &spec).unwrap(), (1, 2, 7));
        assert_eq!(split_sizes(3, &spec).unwrap(), (1, 1, 1));
        assert_eq!(split_sizes(25, &spec).unwrap(), (3, 4, 18));
        assert!(matches!(
            split_sizes(2, &spec),
            Err(ExperimentError::Split(_))
        ));
        let bad = SplitSpec {
            test_fraction: 1.0,
            ..spec
        };
        assert!(split_sizes(100, &bad).is_err());
    }

    #[test]
    fn split_ignores_document_order() {
        let ds = numbered("d", 40);
        let mut reversed = ds.clone();
        reversed.documents.reverse();
        let spec = SplitSpec {
            seed: 3,
            ..Default::default()
        };
        assert_eq!(split(&ds, &spec).unwrap(), split(&reversed, &spec).unwrap());
    }

    #[test]
    fn reference_run_selection() {
        assert_eq!(select_reference_run(&[0.88, 0.89, 0.90]), Some(1));
        assert_eq!(select_reference_run(&[0.8, 0.9]), Some(0));
        assert_eq!(select_reference_run(&[0.5]), Some(0));
        assert_eq!(select_reference_run(&[]), None);
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[0.7]).std, 0.0);
    }

    #[test]
    fn logo_groups() {
        let names: Vec<String> = ["PsyNIT", "Mondino", "Maugeri", "Auxologico"]
            .map(String::from)
            .into();
        let groups = build_logo_groups(&names, "PsyNIT").unwrap();
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0].leftout, "Mondino");
        assert_eq!(groups[0].train_sets, ["PsyNIT", "Maugeri", "Auxologico"]);
        assert_eq!(groups[2].train_sets, ["PsyNIT", "Mondino", "Maugeri"]);
        let two: Vec<String> = vec!["A".into(), "B".into()];
        assert_eq!(build_logo_groups(&two, "A").unwrap().len(), 1);
        assert!(build_logo_groups(&two[..1], "A").is_err());
        assert!(build_logo_groups(&two, "Z").is_err());
    }

    #[test]
    fn lowres_partition_sizes() {
        let ds = numbered("x", 25);
        let (tune, test) = lowres_partition(&ds, 0.1, 4).unwrap();
        assert_eq!((tune.documents.len(), test.documents.len()), (3, 22));
        assert!(lowres_partition(&numbered("y", 4), 0.1, 0).is_err());
        assert!(lowres_partition(&ds, 0.0, 0).is_err());
    }

    #[test]
    fn concat_namespaces_ids() {
        let a = numbered("a", 2);
        let b = numbered("b", 3);
        let all = concat("ab", &[&a, &b]).unwrap();
        assert_eq!(all.documents.len(), 5);
        assert_eq!(all.documents[0].id, "a/a-000");
        assert_eq!(all.documents[4].id, "b/b-002");
    }

    fn memorizable() -> Dataset {
        let forms = [("MMSE", "TEST"), ("Urorec", "DRUG"), ("tremore", "SINTOMI")];
        let docs = (0..30)
            .map(|i| {
                let (form, label) = forms[i % 3];
                let text = format!("referto {form} stabile");
                Document::new(
                    format!("m{i:02}"),
                    text,
                    vec![EntitySpan::new(8, 8 + form.len(), label)],
                )
            })
            .collect();
        Dataset::new("mem", docs).unwrap()
    }

    #[test]
    fn memorizable_sweep_is_perfect() {
        let cfg = SweepConfig {
            n_seeds: 3,
            ..Default::default()
        };
        let result = sweep(&memorizable(), &cfg).unwrap();
        assert_eq!(result.summary.overall.f1.mean, 1.0);
        assert_eq!(result.summary.overall.f1.std, 0.0);
        assert_eq!(result.summary.reports.len(), 3);
        assert_eq!(result.runs[1].seed, 1);
        let mut shuffled = memorizable();
        shuffled.documents.reverse();
        assert_eq!(sweep(&shuffled, &cfg).unwrap().summary, result.summary);
    }

    #[test]
    fn single_seed_summary() {
        let cfg = SweepConfig {
            n_seeds: 1,
            ..Default::default()
        };
        let result = sweep(&memorizable(), &cfg).unwrap();
        assert_eq!(result.summary.reference_seed, 0);
        assert_eq!(result.summary.overall.f1.std, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn splits_are_partitions(n in 3usize..120, seed in 0u64..1000) {
            let ds = numbered("p", n);
            let spec = SplitSpec { seed, ..Default::default() };
            let parts = split(&ds, &spec).unwrap();
            let mut all: Vec<String> = [&parts.train, &parts.val, &parts.test]
                .iter()
                .flat_map(|d| d.documents.iter().map(|x| x.id.clone()))
                .collect();
            let (t, v, r) = split_sizes(n, &spec).unwrap();
            prop_assert_eq!((parts.test.documents.len(), parts.val.documents.len(), parts.train.documents.len()), (t, v, r));
            all.sort();
            let mut expected = ids(&ds);
            expected.sort();
            prop_assert_eq!(all, expected);
            prop_assert_eq!(split(&ds, &spec).unwrap(), parts);
        }
    }
}
