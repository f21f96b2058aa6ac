//! Deterministic synthetic clinical-report corpora used as bundled fixtures.

use mcner::corpus::{Dataset, Document, EntitySpan};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIAG: &str = "DIAGNOSI E COMORBIDITÀ";
pub const COG: &str = "SINTOMI COGNITIVI";
pub const NEURO: &str = "SINTOMI NEUROPSICHIATRICI";
pub const DRUG: &str = "TRATTAMENTO FARMACOLOGICO";
pub const TEST: &str = "TEST";

pub const CLASSES: [&str; 5] = [DIAG, COG, NEURO, DRUG, TEST];

/// Sentence templates per class; `{}` is the entity slot, `{n}` a score.
pub struct Style {
    pub templates: [&'static [&'static str]; 5],
    pub fillers: &'static [&'static str],
}

pub struct Center {
    pub name: &'static str,
    pub seed: u64,
    pub documents: usize,
    pub style: &'static Style,
    /// Entity surface forms per class, same order as [`CLASSES`].
    pub forms: [Vec<&'static str>; 5],
}

pub const STANDARD: Style = Style {
    templates: [
        &["Diagnosi di {} .", "Anamnesi positiva per {} ."],
        &["Si evidenzia {} .", "Il colloquio mostra {} ."],
        &[
            "I familiari riferiscono {} .",
            "Presente {} nelle ultime settimane .",
        ],
        &["In terapia con {} .", "Assume {} al mattino ."],
        &[
            "Il paziente esegue {} con esito nella norma .",
            "Al {} ottiene {n}/30 .",
        ],
    ],
    fillers: &["Paziente collaborante .", "Nessun evento acuto riferito ."],
};

/// Wording that shares no word with [`STANDARD`].
pub const DISTANT: Style = Style {
    templates: [
        &["Quadro suggestivo : {} noto .", "Storia clinica : {} ."],
        &["Emergono {} marcati .", "Osservati {} lievi ."],
        &[
            "Caregiver segnala {} serale .",
            "Descritta {} persistente .",
        ],
        &["Prescritto {} quotidianamente .", "Continua {} invariato ."],
        &["Somministrato {} oggi .", "Eseguita {} , risultato {n} ."],
    ],
    fillers: &["Controllo programmato .", "Visita tranquilla ."],
};

fn shared_forms() -> [Vec<&'static str>; 5] {
    [
        vec!["demenza", "morbo di Parkinson", "ipoacusia"],
        vec!["anomia", "deficit di memoria", "disorientamento temporale"],
        vec!["apatia", "ansia", "irritabilità"],
        vec!["Madopar", "Urorec", "Sinemet"],
        vec!["MMSE", "GDS", "EEG", "RM encefalo"],
    ]
}

fn with_extra(extra: [&[&'static str]; 5]) -> [Vec<&'static str>; 5] {
    let mut forms = shared_forms();
    for (f, e) in forms.iter_mut().zip(extra) {
        f.extend_from_slice(e);
    }
    forms
}

pub fn document(
    id: String,
    rng: &mut ChaCha8Rng,
    style: &Style,
    forms: &[Vec<&str>; 5],
) -> Document {
    let mut text = String::new();
    let mut entities = Vec::new();
    let sentences = rng.random_range(2..=4);
    for _ in 0..sentences {
        if !text.is_empty() {
            text.push(' ');
        }
        if rng.random_bool(0.15) {
            text.push_str(style.fillers.choose(rng).unwrap());
            continue;
        }
        let class = rng.random_range(0..CLASSES.len());
        let template = style.templates[class].choose(rng).unwrap();
        let form = forms[class].choose(rng).unwrap();
        let score = rng.random_range(10..=30).to_string();
        let template = template.replace("{n}", &score);
        let (before, after) = template.split_once("{}").unwrap();
        text.push_str(before);
        let start = text.chars().count();
        text.push_str(form);
        entities.push(EntitySpan::new(
            start,
            start + form.chars().count(),
            CLASSES[class],
        ));
        text.push_str(after);
    }
    Document::new(id, text, entities)
}

pub fn generate(center: &Center) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(center.seed);
    let docs = (0..center.documents)
        .map(|i| {
            document(
                format!("{}-{:03}", center.name.to_lowercase(), i),
                &mut rng,
                center.style,
                &center.forms,
            )
        })
        .collect();
    let mut ds = Dataset::new(center.name, docs).unwrap();
    ds.declared_labels = Some(CLASSES.iter().map(|c| c.to_string()).collect());
    ds
}

/// Anchor plus three centers, each mixing the shared vocabulary with a few
/// forms of its own.
pub fn multicenter() -> Vec<Center> {
    vec![
        Center {
            name: "PsyNIT",
            seed: 11,
            documents: 60,
            style: &STANDARD,
            forms: shared_forms(),
        },
        Center {
            name: "Mondino",
            seed: 12,
            documents: 30,
            style: &STANDARD,
            forms: with_extra([
                &["epilessia"],
                &["afasia"],
                &["agitazione"],
                &["Exelon"],
                &["MoCA"],
            ]),
        },
        Center {
            name: "Maugeri",
            seed: 13,
            documents: 30,
            style: &STANDARD,
            forms: with_extra([
                &["ictus"],
                &["aprassia"],
                &["depressione"],
                &["Namenda"],
                &["TAC"],
            ]),
        },
        Center {
            name: "Auxologico",
            seed: 14,
            documents: 30,
            style: &STANDARD,
            forms: with_extra([
                &["diabete"],
                &["acalculia"],
                &["insonnia"],
                &["Aricept"],
                &["ECG"],
            ]),
        },
    ]
}

/// Two centers sharing vocabulary and wording, and a third whose forms and
/// wording are disjoint from both.
pub fn lowres() -> Vec<Center> {
    vec![
        Center {
            name: "Alpha",
            seed: 21,
            documents: 50,
            style: &STANDARD,
            forms: shared_forms(),
        },
        Center {
            name: "Beta",
            seed: 22,
            documents: 40,
            style: &STANDARD,
            forms: shared_forms(),
        },
        Center {
            name: "Gamma",
            seed: 23,
            documents: 60,
            style: &DISTANT,
            forms: [
                vec!["cardiopatia", "nefropatia"],
                vec!["rallentamenti ideomotori", "lapsus"],
                vec!["disforia", "labilità emotiva"],
                vec!["Quetiapina", "Sertralina"],
                vec!["spirometria", "FAB"],
            ],
        },
    ]
}

/// Distinct surface forms per class, six examples each.
pub fn separable() -> Dataset {
    let forms = [
        ("MMSE", TEST),
        ("Urorec", DRUG),
        ("Madopar", DRUG),
        ("anomia", COG),
        ("apatia", NEURO),
    ];
    let mut docs = Vec::new();
    for i in 0..6 {
        for (j, (form, label)) in forms.iter().enumerate() {
            let prefix = format!("referto {i} : ");
            let start = prefix.chars().count();
            let text = format!("{prefix}{form} stabile .");
            docs.push(Document::new(
                format!("sep-{i}-{j}"),
                text,
                vec![EntitySpan::new(start, start + form.chars().count(), *label)],
            ));
        }
    }
    Dataset::new("separable", docs).unwrap()
}

/// [`STANDARD`] wording with every class's templates moved to the next class.
pub const ROTATED: Style = Style {
    templates: [
        STANDARD.templates[1],
        STANDARD.templates[2],
        STANDARD.templates[3],
        STANDARD.templates[4],
        STANDARD.templates[0],
    ],
    fillers: STANDARD.fillers,
};

/// Tune set for the forgetting scenario: Gamma's forms in contexts that
/// [`STANDARD`] uses for other classes.
pub fn forgetting_tune() -> Center {
    let mut forms = lowres().remove(2).forms;
    forms.rotate_left(1);
    Center {
        name: "Tune",
        seed: 99,
        documents: 25,
        style: &ROTATED,
        forms,
    }
}
