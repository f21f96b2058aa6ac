use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentError, SplitSpec, SweepConfig};
use crate::corpus::{lint_dataset, Dataset, DatasetFormat, RepairPolicy, SnapPolicy};
use crate::metrics::EvalMode;
use crate::tagger::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Single,
    Ova,
    Logo,
    #[serde(alias = "logo_lowres")]
    Lowres,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub name: String,
    pub path: PathBuf,
    /// Detected from the file when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DatasetFormat>,
    /// External predictions for this dataset (JSON lines), `ova` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
}

fn default_seeds() -> usize {
    10
}

fn default_lowres() -> f64 {
    0.10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    /// Dataset always present in training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    pub datasets: Vec<DatasetSource>,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_lowres")]
    pub lowres_fraction: f64,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub mode: EvalMode,
    #[serde(default)]
    pub tagger: TrainConfig,
    /// Snapping applied when linting the input datasets.
    #[serde(default)]
    pub snap: SnapPolicy,
    /// Repair applied to external predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<RepairPolicy>,
    /// Pre-trained model for `ova`; trained on the anchor when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ExperimentError> {
        serde_json::from_slice(bytes)
            .map_err(|e| ExperimentError::Plan(crate::corpus::json_error(bytes, e).to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("plan serializes");
        out.push('\n');
        out
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            n_seeds: self.n_seeds,
            split: self.split,
            mode: self.mode,
            tagger: self.tagger.clone(),
        }
    }

    pub fn dataset_names(&self) -> Vec<String> {
        self.datasets.iter().map(|d| d.name.clone()).collect()
    }

    fn anchor(&self) -> Result<&str, ExperimentError> {
        let anchor = self.anchor.as_deref().ok_or_else(|| {
            ExperimentError::Plan(format!("{:?} plans need an anchor", self.kind))
        })?;
        if !self.datasets.iter().any(|d| d.name == anchor) {
            return Err(ExperimentError::Plan(format!(
                "anchor dataset {anchor} is not in the plan"
            )));
        }
        if self.datasets.len() < 2 {
            return Err(ExperimentError::Plan(format!(
                "no dataset besides the anchor {anchor}"
            )));
        }
        Ok(anchor)
    }

    pub fn anchor_name(&self) -> Option<&str> {
        self.anchor.as_deref()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.datasets.is_empty() {
            return Err(ExperimentError::Plan("plan lists no datasets".into()));
        }
        let names: BTreeSet<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        if names.len() != self.datasets.len() {
            return Err(ExperimentError::Plan("dataset names must be unique".into()));
        }
        if self.n_seeds == 0 {
            return Err(ExperimentError::Plan("n_seeds must be at least 1".into()));
        }
        if !(self.lowres_fraction > 0.0 && self.lowres_fraction < 1.0) {
            return Err(ExperimentError::Plan(format!(
                "lowres_fraction must lie in (0, 1), got {}",
                self.lowres_fraction
            )));
        }
        self.split.validate()?;
        self.tagger.validate()?;
        let with_predictions = self
            .datasets
            .iter()
            .filter(|d| d.predictions.is_some())
            .count();
        match self.kind {
            PlanKind::Single if self.datasets.len() != 1 => Err(ExperimentError::Plan(
                "single plans take exactly one dataset".into(),
            )),
            PlanKind::Ova => {
                let anchor = self.anchor()?;
                let externals = self.datasets.iter().filter(|d| d.name != anchor);
                let predicted = externals
                    .clone()
                    .filter(|d| d.predictions.is_some())
                    .count();
                if predicted != 0 && predicted != externals.count() {
                    return Err(ExperimentError::Plan(
                        "either every external dataset has predictions or none has".into(),
                    ));
                }
                if predicted != 0 && self.model.is_some() {
                    return Err(ExperimentError::Plan(
                        "give a model or predictions, not both".into(),
                    ));
                }
                Ok(())
            }
            PlanKind::Logo | PlanKind::Lowres => self.anchor().map(|_| ()),
            _ if with_predictions != 0 => Err(ExperimentError::Plan(
                "predictions are only used by ova plans".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Makes every path absolute, resolving relative ones against `base`.
    pub fn resolve_paths(&mut self, base: &Path) -> Result<(), ExperimentError> {
        let resolve = |p: &PathBuf| -> Result<PathBuf, ExperimentError> {
            let joined = if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            };
            std::fs::canonicalize(&joined).map_err(|source| ExperimentError::Io {
                path: joined.display().to_string(),
                source,
            })
        };
        for d in &mut self.datasets {
            d.path = resolve(&d.path)?;
            if let Some(p) = &d.predictions {
                d.predictions = Some(resolve(p)?);
            }
        }
        if let Some(m) = &self.model {
            self.model = Some(resolve(m)?);
        }
        Ok(())
    }

    /// Reads, names and lints every dataset of the plan.
    pub fn load_datasets(&self) -> Result<Vec<Dataset>, ExperimentError> {
        self.datasets
            .iter()
            .map(|src| {
                let bytes = read(&src.path)?;
                let format = src
                    .format
                    .unwrap_or_else(|| DatasetFormat::detect(&src.path, &bytes));
                let mut ds = format.ingest(&src.name, &bytes)?;
                ds.name = src.name.clone();
                let (clean, report) = lint_dataset(&ds, self.snap);
                if let Some(v) = report.violations.first() {
                    return Err(ExperimentError::Plan(format!(
                        "dataset {} has {} lint violation(s), first: document {} {:?} {}",
                        src.name,
                        report.violations.len(),
                        v.doc_id,
                        v.kind,
                        v.detail
                    )));
                }
                Ok(clean)
            })
            .collect()
    }
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>, ExperimentError> {
    std::fs::read(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a plan file, validates it and resolves its paths against the
/// plan's directory.
pub fn load_plan(path: &Path) -> Result<ExperimentPlan, ExperimentError> {
    let mut plan = ExperimentPlan::from_json(&read(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    plan.resolve_paths(base)?;
    plan.validate()?;
    Ok(plan)
}
