//! Python bindings: datasets, the baseline tagger, evaluation and the
//! experiment runner.

use std::path::PathBuf;

use mcner_core::analysis::{self, anova_oneway, carbon_estimate, classify_corpus, error_breakdown};
use mcner_core::corpus::{self, DatasetFormat, RepairPolicy, SnapPolicy};
use mcner_core::experiments::{self, load_plan, run_plan, write_run_dir, SplitSpec};
use mcner_core::metrics::{self, EvalMode};
use mcner_core::tagger::{self, load_predictions, predict_file, TrainConfig};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(mcner, McnerError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    McnerError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(err)
}

fn loads<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    loads(py, &serde_json::to_string(value).map_err(err)?)
}

/// An annotated corpus.
#[pyclass(module = "mcner", frozen)]
struct Dataset {
    inner: corpus::Dataset,
}

#[pymethods]
impl Dataset {
    /// Reads a dataset file; the format is detected when not given.
    #[staticmethod]
    #[pyo3(signature = (path, format=None, name=None))]
    fn from_file(path: PathBuf, format: Option<&str>, name: Option<&str>) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let format = match format {
            Some(f) => parse::<DatasetFormat>(f)?,
            None => DatasetFormat::detect(&path, &bytes),
        };
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset");
        let mut inner = format.ingest(name.unwrap_or(stem), &bytes).map_err(err)?;
        if let Some(n) = name {
            inner.name = n.to_string();
        }
        Ok(Self { inner })
    }

    /// Parses canonical JSON.
    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        corpus::ingest_canonical(json.as_bytes())
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn to_json(&self) -> String {
        corpus::export_canonical(&self.inner)
    }

    fn to_conll(&self) -> PyResult<String> {
        corpus::export_conll(&self.inner).map_err(err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn document_ids(&self) -> Vec<String> {
        self.inner.documents.iter().map(|d| d.id.clone()).collect()
    }

    #[getter]
    fn entity_count(&self) -> usize {
        self.inner.entity_count()
    }

    fn __len__(&self) -> usize {
        self.inner.documents.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, documents={}, entities={})",
            self.inner.name,
            self.inner.documents.len(),
            self.inner.entity_count()
        )
    }

    fn class_counts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &corpus::class_counts(&self.inner))
    }

    /// `(doc_id, tags)` pairs in document order.
    fn tag_sequences(&self) -> PyResult<Vec<(String, Vec<String>)>> {
        let seqs = self.inner.tag_sequences().map_err(err)?;
        Ok(seqs
            .into_iter()
            .map(|s| (s.doc_id, s.tags.iter().map(|t| t.to_string()).collect()))
            .collect())
    }

    /// Returns the snapped dataset and the lint report.
    #[pyo3(signature = (snap="expand"))]
    fn lint<'py>(&self, py: Python<'py>, snap: &str) -> PyResult<(Dataset, Bound<'py, PyAny>)> {
        let (clean, report) = corpus::lint_dataset(&self.inner, parse::<SnapPolicy>(snap)?);
        Ok((Dataset { inner: clean }, to_py(py, &report)?))
    }

    /// Seeded train/val/test split.
    #[pyo3(signature = (seed=0))]
    fn split(&self, seed: u64) -> PyResult<(Dataset, Dataset, Dataset)> {
        let spec = SplitSpec {
            seed,
            ..SplitSpec::default()
        };
        let s = experiments::split(&self.inner, &spec).map_err(err)?;
        Ok((
            Dataset { inner: s.train },
            Dataset { inner: s.val },
            Dataset { inner: s.test },
        ))
    }
}

/// Averaged-perceptron baseline tagger.
#[pyclass(module = "mcner", frozen)]
struct TaggerModel {
    inner: tagger::TaggerModel,
}

fn train_config(
    epochs: usize,
    seed: u64,
    shuffle: bool,
    rehearsal_fraction: f64,
) -> PyResult<TrainConfig> {
    let cfg = TrainConfig {
        epochs,
        seed,
        shuffle,
        rehearsal_fraction,
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

#[pymethods]
impl TaggerModel {
    #[staticmethod]
    #[pyo3(signature = (dataset, epochs=10, seed=0, shuffle=true))]
    fn train(
        py: Python<'_>,
        dataset: &Dataset,
        epochs: usize,
        seed: u64,
        shuffle: bool,
    ) -> PyResult<Self> {
        let cfg = train_config(
            epochs,
            seed,
            shuffle,
            TrainConfig::default().rehearsal_fraction,
        )?;
        let inner = py
            .detach(|| tagger::train(&dataset.inner, &cfg))
            .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        tagger::TaggerModel::from_json(json.as_bytes())
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Continues training on `tune`, replaying a sample of `prev`.
    #[pyo3(signature = (tune, prev, epochs=10, seed=0, rehearsal_fraction=0.25))]
    fn continue_training(
        &self,
        py: Python<'_>,
        tune: &Dataset,
        prev: &Dataset,
        epochs: usize,
        seed: u64,
        rehearsal_fraction: f64,
    ) -> PyResult<Self> {
        let cfg = train_config(epochs, seed, true, rehearsal_fraction)?;
        let inner = py
            .detach(|| tagger::continue_training(&self.inner, &tune.inner, &prev.inner, &cfg))
            .map_err(err)?;
        Ok(Self { inner })
    }

    /// Tag strings per document, in dataset order.
    fn decode(&self, dataset: &Dataset) -> Vec<Vec<String>> {
        self.inner
            .decode_dataset(&dataset.inner)
            .into_iter()
            .map(|s| s.tags.iter().map(|t| t.to_string()).collect())
            .collect()
    }

    /// Prediction JSONL accepted by [`evaluate`].
    fn predict(&self, dataset: &Dataset) -> String {
        predict_file(&self.inner, &dataset.inner)
    }

    #[getter]
    fn tags(&self) -> Vec<String> {
        self.inner.tags().iter().map(|t| t.to_string()).collect()
    }
}

fn gold_and_pred(
    gold: &Dataset,
    predictions: &str,
    repair: Option<&str>,
) -> PyResult<(
    Vec<corpus::TagSequence>,
    Vec<corpus::TagSequence>,
    Option<RepairPolicy>,
)> {
    let repair = repair.map(parse::<RepairPolicy>).transpose()?;
    let pred = load_predictions(predictions.as_bytes(), &gold.inner, repair).map_err(err)?;
    Ok((gold.inner.tag_sequences().map_err(err)?, pred, repair))
}

/// Scores prediction JSONL against `gold`.
#[pyfunction]
#[pyo3(signature = (gold, predictions, mode="token_strict", repair=None))]
fn evaluate<'py>(
    py: Python<'py>,
    gold: &Dataset,
    predictions: &str,
    mode: &str,
    repair: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let (g, p, repair) = gold_and_pred(gold, predictions, repair)?;
    let mut report = metrics::evaluate(&g, &p, parse::<EvalMode>(mode)?).map_err(err)?;
    report.repair = repair;
    loads(py, &report.to_json())
}

/// Type 1-4 error breakdown of prediction JSONL against `gold`.
#[pyfunction]
#[pyo3(signature = (gold, predictions, repair=None))]
fn errors<'py>(
    py: Python<'py>,
    gold: &Dataset,
    predictions: &str,
    repair: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let (g, p, repair) = gold_and_pred(gold, predictions, repair)?;
    let mut breakdown = error_breakdown(&classify_corpus(&g, &p).map_err(err)?);
    breakdown.repair = repair;
    to_py(py, &breakdown)
}

#[pyfunction]
#[pyo3(signature = (reference, other, mode="token_strict"))]
fn iaa<'py>(
    py: Python<'py>,
    reference: &Dataset,
    other: &Dataset,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let report =
        analysis::iaa(&reference.inner, &other.inner, parse::<EvalMode>(mode)?).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn anova<'py>(py: Python<'py>, groups: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &anova_oneway(&groups).map_err(err)?)
}

/// kgCO2-eq for the given GPU hours, average power (kW) and grid intensity.
#[pyfunction]
fn carbon(gpu_hours: f64, power_kw: f64, intensity: f64) -> PyResult<f64> {
    Ok(carbon_estimate(gpu_hours, power_kw, intensity)
        .map_err(err)?
        .total)
}

/// Runs a plan file and writes its run directory; returns the summary.
#[pyfunction]
fn run_experiment<'py>(
    py: Python<'py>,
    plan: PathBuf,
    out: PathBuf,
) -> PyResult<Bound<'py, PyAny>> {
    let summary = py
        .detach(|| -> Result<String, experiments::ExperimentError> {
            let plan = load_plan(&plan)?;
            let datasets = plan.load_datasets()?;
            let outcome = run_plan(&plan, &datasets)?;
            write_run_dir(&out, &plan, &datasets, &outcome)?;
            std::fs::read_to_string(out.join("summary.json")).map_err(|source| {
                experiments::ExperimentError::Io {
                    path: out.display().to_string(),
                    source,
                }
            })
        })
        .map_err(err)?;
    loads(py, &summary)
}

#[pymodule]
#[pyo3(name = "mcner")]
fn mcner_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("McnerError", m.py().get_type::<McnerError>())?;
    m.add_class::<Dataset>()?;
    m.add_class::<TaggerModel>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(errors, m)?)?;
    m.add_function(wrap_pyfunction!(iaa, m)?)?;
    m.add_function(wrap_pyfunction!(anova, m)?)?;
    m.add_function(wrap_pyfunction!(carbon, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
