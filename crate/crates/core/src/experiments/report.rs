//! Running a plan and writing its run directory.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::plan::read;
use super::{
    run_full, run_logo, run_lowres, run_ova, sweep, AbComparison, ExperimentError, ExperimentPlan,
    FullResult, LogoResult, LowresResult, MeanStd, ModelSource, PlanKind, SeedRun, Sweep,
    SweepSummary,
};
use crate::corpus::Dataset;
use crate::metrics::EvaluationReport;
use crate::tagger::{dataset_fingerprint, load_predictions, train, TaggerModel};

#[derive(Debug, Clone)]
pub enum ExperimentOutcome {
    Single(Sweep),
    Ova {
        /// Model trained on the anchor, when neither a model nor predictions
        /// were supplied.
        trained: Option<TaggerModel>,
        reports: Vec<(String, EvaluationReport)>,
    },
    Logo(Vec<LogoResult>),
    Lowres(Vec<LowresResult>),
    Full(FullResult),
}

/// Runs a validated plan over its loaded datasets (same order as the plan).
pub fn run_plan(
    plan: &ExperimentPlan,
    datasets: &[Dataset],
) -> Result<ExperimentOutcome, ExperimentError> {
    plan.validate()?;
    let cfg = plan.sweep_config();
    match plan.kind {
        PlanKind::Single => Ok(ExperimentOutcome::Single(sweep(&datasets[0], &cfg)?)),
        PlanKind::Full => Ok(ExperimentOutcome::Full(run_full(datasets, &cfg)?)),
        PlanKind::Logo => Ok(ExperimentOutcome::Logo(run_logo(
            datasets,
            plan.anchor_name().expect("validated"),
            &cfg,
        )?)),
        PlanKind::Lowres => Ok(ExperimentOutcome::Lowres(run_lowres(
            datasets,
            plan.anchor_name().expect("validated"),
            plan.lowres_fraction,
            &cfg,
        )?)),
        PlanKind::Ova => {
            let anchor = plan.anchor_name().expect("validated");
            let (anchor_ds, externals): (Vec<&Dataset>, Vec<&Dataset>) =
                datasets.iter().partition(|d| d.name == anchor);
            let externals: Vec<Dataset> = externals.into_iter().cloned().collect();
            let sources: Vec<_> = plan.datasets.iter().filter(|d| d.name != anchor).collect();
            let mut trained = None;
            let reports = if sources.iter().all(|s| s.predictions.is_some()) {
                let preds = sources
                    .iter()
                    .zip(&externals)
                    .map(|(src, ds)| {
                        let path = src.predictions.as_ref().expect("checked");
                        Ok(load_predictions(&read(path)?, ds, plan.repair)?)
                    })
                    .collect::<Result<Vec<_>, ExperimentError>>()?;
                run_ova(&ModelSource::Predictions(&preds), &externals, plan.mode)?
            } else {
                let model = match &plan.model {
                    Some(path) => TaggerModel::from_json(&read(path)?)?,
                    None => train(anchor_ds[0], &plan.tagger)?,
                };
                let reports = run_ova(&ModelSource::Model(&model), &externals, plan.mode)?;
                if plan.model.is_none() {
                    trained = Some(model);
                }
                reports
            };
            Ok(ExperimentOutcome::Ova {
                trained,
                reports: externals
                    .iter()
                    .map(|d| d.name.clone())
                    .zip(reports)
                    .collect(),
            })
        }
    }
}

fn pct(m: &MeanStd) -> String {
    format!("{:.2} ± {:.2}", 100.0 * m.mean, 100.0 * m.std)
}

/// Per-class mean ± std table of a sweep, in percent.
pub fn render_sweep(summary: &SweepSummary) -> String {
    let width = summary
        .per_class
        .keys()
        .map(|k| k.chars().count())
        .max()
        .unwrap_or(0)
        .max("OVERALL".len());
    let mut out = format!(
        "{:<width$}  {:>16}  {:>16}  {:>16}\n",
        "Class", "P [%]", "R [%]", "F1 [%]"
    );
    let rows = summary
        .per_class
        .iter()
        .map(|(c, m)| (c.as_str(), m))
        .chain([("OVERALL", &summary.overall)]);
    for (name, m) in rows {
        out.push_str(&format!(
            "{:<width$}  {:>16}  {:>16}  {:>16}\n",
            name,
            pct(&m.precision),
            pct(&m.recall),
            pct(&m.f1)
        ));
    }
    out.push_str(&format!(
        "seeds: {}  reference seed: {}  mode: {}\n",
        summary.n_seeds,
        summary.reference_seed,
        summary
            .reports
            .first()
            .map(|r| r.mode.to_string())
            .unwrap_or_default()
    ));
    out
}

fn render_groups(rows: &[Vec<String>], header: &[&str]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].chars().count())
                .chain([header[i].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<&str>| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

pub fn render_logo(groups: &[LogoResult]) -> String {
    let rows: Vec<Vec<String>> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            vec![
                format!("Group {}", i + 1),
                g.group.train_sets.join(", "),
                g.group.leftout.clone(),
                pct(&g.sweep.summary.overall.f1),
                pct(&g.leftout.overall.f1),
            ]
        })
        .collect();
    render_groups(
        &rows,
        &[
            "Group",
            "Fine-tuning datasets",
            "Left-out",
            "Fine-tuning test set F1 [%]",
            "Left-out set F1 [%]",
        ],
    )
}

pub fn render_lowres(groups: &[LowresResult]) -> String {
    let rows: Vec<Vec<String>> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            vec![
                format!("Group {}", i + 1),
                g.ab.leftout.clone(),
                pct(&g.ab.a),
                pct(&g.ab.b),
                pct(&g.ab.delta),
                format!("{}/{}", g.ab.b_wins, g.ab.seeds.len()),
            ]
        })
        .collect();
    render_groups(
        &rows,
        &[
            "Group",
            "Left-out",
            "Model A F1 [%]",
            "Model B F1 [%]",
            "Delta F1 [%]",
            "B > A",
        ],
    )
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializes");
    s.push('\n');
    s
}

fn dir_name(index: usize, name: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{:02}-{safe}", index + 1)
}

struct RunDir<'a> {
    root: &'a Path,
}

impl RunDir<'_> {
    fn write(&self, rel: &str, contents: &str) -> Result<(), ExperimentError> {
        let path = self.root.join(rel);
        let io = |source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        std::fs::write(&path, contents).map_err(io)
    }

    fn seeds(
        &self,
        prefix: &str,
        runs: &[SeedRun],
        leftout: Option<&SweepSummary>,
    ) -> Result<(), ExperimentError> {
        for (i, run) in runs.iter().enumerate() {
            let mut record = json!({
                "seed": run.seed,
                "train_ids": run.train_ids,
                "val_ids": run.val_ids,
                "test_ids": run.test_ids,
                "report": run.report,
            });
            if let Some(l) = leftout {
                record["leftout_report"] = serde_json::to_value(&l.reports[i]).expect("serializes");
            }
            self.write(
                &format!("{prefix}seeds/seed-{:02}.json", i),
                &pretty(&record),
            )?;
        }
        Ok(())
    }

    fn logo_group(&self, prefix: &str, g: &LogoResult) -> Result<(), ExperimentError> {
        self.seeds(prefix, &g.sweep.runs, Some(&g.leftout))?;
        self.write(
            &format!("{prefix}reference_model.json"),
            &g.sweep.reference_model().to_json(),
        )
    }
}

fn logo_json(g: &LogoResult) -> serde_json::Value {
    json!({
        "train_sets": g.group.train_sets,
        "leftout": g.group.leftout,
        "train_documents": g.train_data.documents.len(),
        "train_entities": g.train_data.entity_count(),
        "fine_tuning_test": g.sweep.summary,
        "leftout_set": g.leftout,
    })
}

fn ab_json(ab: &AbComparison) -> serde_json::Value {
    json!({ "a": ab.a, "b": ab.b, "delta": ab.delta, "b_wins": ab.b_wins, "seeds": ab.seeds.len() })
}

/// Writes the effective plan, input fingerprints, per-seed reports,
/// summaries and reference models into `dir`, which must be empty or absent.
pub fn write_run_dir(
    dir: &Path,
    plan: &ExperimentPlan,
    datasets: &[Dataset],
    outcome: &ExperimentOutcome,
) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    };
    if dir.exists() && std::fs::read_dir(dir).map_err(io)?.next().is_some() {
        return Err(ExperimentError::Plan(format!(
            "run directory {} is not empty",
            dir.display()
        )));
    }
    let out = RunDir { root: dir };
    out.write("config.json", &plan.to_json())?;
    let inputs: Vec<_> = datasets
        .iter()
        .map(|d| {
            json!({
                "name": d.name,
                "documents": d.documents.len(),
                "entities": d.entity_count(),
                "fingerprint": dataset_fingerprint(d),
            })
        })
        .collect();
    out.write("inputs.json", &pretty(&inputs))?;
    let kind = serde_json::to_value(plan.kind).expect("serializes");
    match outcome {
        ExperimentOutcome::Single(sweep) | ExperimentOutcome::Full(FullResult { sweep, .. }) => {
            out.seeds("", &sweep.runs, None)?;
            out.write("reference_model.json", &sweep.reference_model().to_json())?;
            let mut summary = json!({ "kind": kind, "sweep": sweep.summary });
            if let ExperimentOutcome::Full(full) = outcome {
                summary["train_documents"] = full.train_data.documents.len().into();
                summary["train_entities"] = full.train_data.entity_count().into();
            }
            out.write("summary.json", &pretty(&summary))?;
            out.write("summary.txt", &render_sweep(&sweep.summary))?;
        }
        ExperimentOutcome::Ova { trained, reports } => {
            let mut text = String::new();
            for (name, report) in reports {
                out.write(&format!("reports/{name}.json"), &report.to_json())?;
                text.push_str(&format!("== {name}\n{}\n", report.render_table()));
            }
            if let Some(model) = trained {
                out.write("anchor_model.json", &model.to_json())?;
            }
            let listed: Vec<_> = reports
                .iter()
                .map(|(name, report)| json!({ "dataset": name, "report": report }))
                .collect();
            out.write(
                "summary.json",
                &pretty(&json!({ "kind": kind, "anchor": plan.anchor, "reports": listed })),
            )?;
            out.write("summary.txt", &text)?;
        }
        ExperimentOutcome::Logo(groups) => {
            for (i, g) in groups.iter().enumerate() {
                out.logo_group(&format!("groups/{}/", dir_name(i, &g.group.leftout)), g)?;
            }
            let listed: Vec<_> = groups.iter().map(logo_json).collect();
            out.write(
                "summary.json",
                &pretty(&json!({ "kind": kind, "anchor": plan.anchor, "groups": listed })),
            )?;
            out.write("summary.txt", &render_logo(groups))?;
        }
        ExperimentOutcome::Lowres(groups) => {
            for (i, g) in groups.iter().enumerate() {
                let prefix = format!("groups/{}/", dir_name(i, &g.ab.leftout));
                out.logo_group(&prefix, &g.logo)?;
                out.write(&format!("{prefix}lowres.json"), &pretty(&g.ab))?;
            }
            let listed: Vec<_> = groups
                .iter()
                .map(|g| {
                    let mut v = logo_json(&g.logo);
                    v["lowres"] = ab_json(&g.ab);
                    v
                })
                .collect();
            out.write(
                "summary.json",
                &pretty(&json!({
                    "kind": kind,
                    "anchor": plan.anchor,
                    "lowres_fraction": plan.lowres_fraction,
                    "groups": listed,
                })),
            )?;
            let logo: Vec<LogoResult> = groups.iter().map(|g| g.logo.clone()).collect();
            out.write(
                "summary.txt",
                &format!("{}\n{}", render_logo(&logo), render_lowres(groups)),
            )?;
        }
    }
    Ok(())
}
