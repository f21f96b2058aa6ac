#![allow(dead_code)]

pub mod random;
pub mod synth;

use std::path::{Path, PathBuf};

use mcner::corpus::{
    export_canonical, export_conll, spans_to_iob, Dataset, DatasetFormat, Document, EntitySpan,
};
use mcner::tagger::PredictionRecord;

pub const WORKED_SENTENCE: &str = "Mister Rossi presents a MMSE of 22/30. At the present day, he is assuming Urorec twice a day, and Madopar once. He shows no symptoms of COVID-19.";
pub const IOB_SENTENCE: &str = "Gli esami evidenziano buon orientamento spaziale e temporale";

/// Set to regenerate checked-in fixtures and golden files instead of
/// comparing against them.
pub const REGENERATE: &str = "MCNER_REGENERATE_FIXTURES";

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture(rel: &str) -> PathBuf {
    fixture_dir().join(rel)
}

pub fn read_fixture(rel: &str) -> Vec<u8> {
    std::fs::read(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn load(rel: &str) -> Dataset {
    let path = fixture(rel);
    let bytes = read_fixture(rel);
    DatasetFormat::detect(&path, &bytes)
        .ingest("fixture", &bytes)
        .unwrap()
}

fn char_span(text: &str, needle: &str, label: &str) -> EntitySpan {
    let byte = text
        .find(needle)
        .unwrap_or_else(|| panic!("{needle} not in text"));
    let start = text[..byte].chars().count();
    EntitySpan::new(start, start + needle.chars().count(), label)
}

pub fn worked_gold() -> Dataset {
    let t = WORKED_SENTENCE;
    let doc = Document::new(
        "worked-0",
        t,
        vec![
            char_span(t, "MMSE", "ASSESSMENT"),
            char_span(t, "Urorec", "DRUG"),
            char_span(t, "Madopar", "DRUG"),
        ],
    );
    let mut ds = Dataset::new("worked_example", vec![doc]).unwrap();
    ds.declared_labels = Some(["ASSESSMENT".to_string(), "DRUG".to_string()].into());
    ds
}

pub fn worked_pred_doc() -> Document {
    let t = WORKED_SENTENCE;
    Document::new(
        "worked-0",
        t,
        vec![
            char_span(t, "Rossi", "DRUG"),
            char_span(t, "MMSE", "ASSESSMENT"),
            char_span(t, "Urorec", "DRUG"),
            char_span(t, "COVID-19", "DRUG"),
        ],
    )
}

fn jsonl(docs: &[Document]) -> String {
    docs.iter()
        .map(|d| {
            let tags = spans_to_iob(d).unwrap();
            let rec = PredictionRecord {
                doc_id: d.id.clone(),
                tags: tags.tags.iter().map(|t| t.to_string()).collect(),
            };
            serde_json::to_string(&rec).unwrap() + "\n"
        })
        .collect()
}

pub fn iob_dataset() -> Dataset {
    let t = IOB_SENTENCE;
    let doc = Document::new(
        "iob-0",
        t,
        vec![
            char_span(t, "orientamento spaziale", "SINTOMI COGNITIVI"),
            char_span(t, "temporale", "SINTOMI COGNITIVI"),
        ],
    );
    Dataset::new("iob_sentence", vec![doc]).unwrap()
}

fn annotator_export() -> String {
    let gold = worked_gold();
    let doc = &gold.documents[0];
    let entities: Vec<_> = doc
        .entities
        .iter()
        .map(|e| serde_json::json!([e.start, e.end, e.label]))
        .collect();
    let value = serde_json::json!({
        "classes": ["ASSESSMENT", "DRUG"],
        "annotations": [
            [doc.text, {"entities": entities}],
            ["MMSE 22/30.", {"entities": [[0, 4, "ASSESSMENT"]]}],
        ],
    });
    serde_json::to_string_pretty(&value).unwrap() + "\n"
}

fn plan(
    kind: &str,
    anchor: Option<&str>,
    dir: &str,
    names: &[&str],
    extra: serde_json::Value,
) -> String {
    let datasets: Vec<_> = names
        .iter()
        .map(|n| serde_json::json!({"name": n, "path": format!("../{dir}/{}.json", n.to_lowercase())}))
        .collect();
    let mut value = serde_json::json!({"kind": kind, "datasets": datasets});
    if let Some(a) = anchor {
        value["anchor"] = a.into();
    }
    for (k, v) in extra.as_object().unwrap() {
        value[k] = v.clone();
    }
    serde_json::to_string_pretty(&value).unwrap() + "\n"
}

/// Every generated fixture as (relative path, contents).
pub fn generated_fixtures() -> Vec<(String, String)> {
    let mut files = vec![
        (
            "worked_example/gold.json".to_string(),
            export_canonical(&worked_gold()),
        ),
        (
            "worked_example/pred.jsonl".to_string(),
            jsonl(&[worked_pred_doc()]),
        ),
        (
            "iob_sentence.json".to_string(),
            export_canonical(&iob_dataset()),
        ),
        (
            "separable.json".to_string(),
            export_canonical(&synth::separable()),
        ),
        ("formats/annotator.json".to_string(), annotator_export()),
        (
            "formats/iob_sentence.conll".to_string(),
            export_conll(&iob_dataset()).unwrap(),
        ),
        (
            "anova/textbook.json".to_string(),
            "[[1, 2, 3], [2, 3, 4]]\n".to_string(),
        ),
    ];
    for center in synth::multicenter() {
        files.push((
            format!("multicenter/{}.json", center.name.to_lowercase()),
            export_canonical(&synth::generate(&center)),
        ));
    }
    for center in synth::lowres() {
        files.push((
            format!("lowres/{}.json", center.name.to_lowercase()),
            export_canonical(&synth::generate(&center)),
        ));
    }
    let four = ["PsyNIT", "Mondino", "Maugeri", "Auxologico"];
    let single = serde_json::json!({"kind": "single", "datasets": [{"name": "separable", "path": "../separable.json"}]});
    files.push((
        "plans/single.json".into(),
        serde_json::to_string_pretty(&single).unwrap() + "\n",
    ));
    files.push((
        "plans/ova.json".into(),
        plan(
            "ova",
            Some("PsyNIT"),
            "multicenter",
            &four,
            serde_json::json!({}),
        ),
    ));
    files.push((
        "plans/logo.json".into(),
        plan(
            "logo",
            Some("PsyNIT"),
            "multicenter",
            &four,
            serde_json::json!({}),
        ),
    ));
    files.push((
        "plans/full.json".into(),
        plan(
            "full",
            None,
            "multicenter",
            &four,
            serde_json::json!({"n_seeds": 3}),
        ),
    ));
    files.push((
        "plans/lowres.json".into(),
        plan(
            "logo_lowres",
            Some("Alpha"),
            "lowres",
            &["Alpha", "Beta", "Gamma"],
            serde_json::json!({}),
        ),
    ));
    files
}

/// Compares `contents` with the checked-in file, or rewrites it when
/// [`REGENERATE`] is set.
pub fn check_or_write(rel: &str, contents: &str) {
    let path = fixture(rel);
    if std::env::var_os(REGENERATE).is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, contents).unwrap();
        return;
    }
    let on_disk = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{rel}: {e}; run with {REGENERATE}=1 to create it"));
    assert!(
        on_disk == contents,
        "{rel} is stale; run with {REGENERATE}=1 to refresh it"
    );
}

pub fn load_path(path: &Path) -> Dataset {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    DatasetFormat::detect(path, &bytes)
        .ingest("fixture", &bytes)
        .unwrap()
}
