//! Baseline sequence labeler: an averaged structured perceptron over sparse
//! token features, decoded with Viterbi under hard IOB constraints.

mod features;
mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    export_canonical, spans_to_iob, CorpusError, Dataset, Document, Tag, TagSequence,
};

pub use features::{extract_features, FeatureId, Gazetteer};
pub use io::{load_predictions, predict_file, ExternalTrainerConfig, PredictionRecord};

const MODEL_FORMAT: &str = "mcner-perceptron";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("{0}")]
    Domain(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("predictions{}: {reason}", location(.line, .doc_id))]
    Predictions {
        line: Option<usize>,
        doc_id: Option<String>,
        reason: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn location(line: &Option<usize>, doc_id: &Option<String>) -> String {
    let mut out = String::new();
    if let Some(l) = line {
        out.push_str(&format!(" line {l}"));
    }
    if let Some(d) = doc_id {
        out.push_str(&format!(" document {d}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Share of each continued-training epoch replayed from the previous
    /// training data, relative to the tune set size.
    pub rehearsal_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            seed: 0,
            shuffle: true,
            rehearsal_fraction: 0.25,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TaggerError> {
        if !(0.0..=1.0).contains(&self.rehearsal_fraction) {
            return Err(TaggerError::Domain(format!(
                "rehearsal_fraction must lie in [0, 1], got {}",
                self.rehearsal_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// sha256 of the canonical export of the training data.
    pub dataset_fingerprint: String,
    pub updates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rehearsal_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rehearsal_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continued_from: Option<Box<TrainMeta>>,
}

/// sha256 hex digest of the canonical JSON form of `ds`.
pub fn dataset_fingerprint(ds: &Dataset) -> String {
    let digest = Sha256::digest(export_canonical(ds).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Tag inventory for a set of tag-form classes: `O`, then every `B-*`, then
/// every `I-*`, classes in lexicographic order. This is also the decode
/// tie-break priority.
pub fn tag_inventory<'a>(classes: impl IntoIterator<Item = &'a str>) -> Vec<Tag> {
    let classes: BTreeSet<&str> = classes.into_iter().collect();
    let mut tags = vec![Tag::Outside];
    tags.extend(classes.iter().map(|c| Tag::Begin(c.to_string())));
    tags.extend(classes.iter().map(|c| Tag::Inside(c.to_string())));
    tags
}

/// `mask[prev][cur]`: whether tag `cur` may follow tag `prev`.
pub fn transition_mask(tags: &[Tag]) -> Vec<Vec<bool>> {
    tags.iter()
        .map(|prev| tags.iter().map(|cur| cur.may_follow(Some(prev))).collect())
        .collect()
}

/// Highest-scoring tag path allowed by the mask. Ties go to the
/// lower-indexed tag, both at each step and at the end of the sequence.
fn viterbi(emissions: &[Vec<f64>], tags: &[Tag], mask: &[Vec<bool>]) -> Vec<usize> {
    let n = emissions.len();
    if n == 0 {
        return Vec::new();
    }
    let k = tags.len();
    let mut score = vec![vec![f64::NEG_INFINITY; k]; n];
    let mut back = vec![vec![0usize; k]; n];
    for t in 0..k {
        if tags[t].may_follow(None) {
            score[0][t] = emissions[0][t];
        }
    }
    for i in 1..n {
        for t in 0..k {
            let mut best: Option<(usize, f64)> = None;
            for p in 0..k {
                if !mask[p][t] || score[i - 1][p] == f64::NEG_INFINITY {
                    continue;
                }
                if best.is_none_or(|(_, s)| score[i - 1][p] > s) {
                    best = Some((p, score[i - 1][p]));
                }
            }
            if let Some((p, s)) = best {
                score[i][t] = s + emissions[i][t];
                back[i][t] = p;
            }
        }
    }
    let mut last = 0;
    for t in 1..k {
        if score[n - 1][t] > score[n - 1][last] {
            last = t;
        }
    }
    let mut path = vec![last; n];
    for i in (1..n).rev() {
        path[i - 1] = back[i][path[i]];
    }
    path
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    tags: Vec<Tag>,
    mask: Vec<Vec<bool>>,
    /// Final raw perceptron weights, one entry per tag.
    weights: BTreeMap<FeatureId, Vec<f64>>,
    /// Weights used for decoding.
    averaged_weights: BTreeMap<FeatureId, Vec<f64>>,
    gazetteer: Gazetteer,
    train_meta: Option<TrainMeta>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    tags: Vec<Tag>,
    train_meta: Option<TrainMeta>,
    gazetteer: Gazetteer,
    weights: BTreeMap<FeatureId, Vec<f64>>,
    averaged_weights: BTreeMap<FeatureId, Vec<f64>>,
}

impl TaggerModel {
    /// Zero-weight model over the given tag-form classes.
    pub fn new<'a>(classes: impl IntoIterator<Item = &'a str>, gazetteer: Gazetteer) -> Self {
        let tags = tag_inventory(classes);
        Self {
            mask: transition_mask(&tags),
            tags,
            weights: BTreeMap::new(),
            averaged_weights: BTreeMap::new(),
            gazetteer,
            train_meta: None,
        }
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn transition_mask(&self) -> &[Vec<bool>] {
        &self.mask
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn gazetteer_mut(&mut self) -> &mut Gazetteer {
        &mut self.gazetteer
    }

    pub fn train_meta(&self) -> Option<&TrainMeta> {
        self.train_meta.as_ref()
    }

    pub fn feature_count(&self) -> usize {
        self.averaged_weights.len()
    }

    /// Averaged (decoding) weight of a feature for a tag.
    pub fn weight(&self, feature: &str, tag: &Tag) -> f64 {
        let Some(t) = self.tags.iter().position(|x| x == tag) else {
            return 0.0;
        };
        self.averaged_weights
            .get(&FeatureId(feature.to_string()))
            .map_or(0.0, |w| w[t])
    }

    /// Sets an averaged (decoding) weight.
    pub fn set_weight(&mut self, feature: &str, tag: &Tag, value: f64) -> Result<(), TaggerError> {
        if !value.is_finite() {
            return Err(TaggerError::Domain(format!(
                "weight must be finite, got {value}"
            )));
        }
        let t = self
            .tags
            .iter()
            .position(|x| x == tag)
            .ok_or_else(|| TaggerError::Domain(format!("tag {tag} is not in the model")))?;
        let k = self.tags.len();
        self.averaged_weights
            .entry(FeatureId(feature.to_string()))
            .or_insert_with(|| vec![0.0; k])[t] = value;
        Ok(())
    }

    fn emissions(&self, doc: &Document) -> Vec<Vec<f64>> {
        let k = self.tags.len();
        (0..doc.tokens.len())
            .map(|i| {
                let mut row = vec![0.0; k];
                let feats = extract_features(&doc.tokens, i, &self.gazetteer)
                    .expect("index within token range");
                for f in &feats {
                    if let Some(w) = self.averaged_weights.get(f) {
                        for (r, x) in row.iter_mut().zip(w) {
                            *r += x;
                        }
                    }
                }
                row
            })
            .collect()
    }

    pub fn decode(&self, doc: &Document) -> TagSequence {
        let path = viterbi(&self.emissions(doc), &self.tags, &self.mask);
        TagSequence::new(
            doc.id.clone(),
            path.into_iter().map(|t| self.tags[t].clone()).collect(),
        )
    }

    /// Decodes every document, in dataset order.
    pub fn decode_dataset(&self, ds: &Dataset) -> Vec<TagSequence> {
        ds.documents.par_iter().map(|d| self.decode(d)).collect()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            tags: self.tags.clone(),
            train_meta: self.train_meta.clone(),
            gazetteer: self.gazetteer.clone(),
            weights: self.weights.clone(),
            averaged_weights: self.averaged_weights.clone(),
        };
        let mut out = serde_json::to_string(&file).expect("model serializes");
        out.push('\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, TaggerError> {
        let file: ModelFile = serde_json::from_slice(bytes)
            .map_err(|e| TaggerError::Model(crate::corpus::json_error(bytes, e).to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(TaggerError::Model(format!(
                "unsupported model format {} version {}",
                file.format, file.version
            )));
        }
        let classes: BTreeSet<&str> = file.tags.iter().filter_map(Tag::class).collect();
        if file.tags != tag_inventory(classes) {
            return Err(TaggerError::Model(
                "tag inventory is not in canonical order".into(),
            ));
        }
        let k = file.tags.len();
        for (f, w) in file.weights.iter().chain(&file.averaged_weights) {
            if w.len() != k || w.iter().any(|x| !x.is_finite()) {
                return Err(TaggerError::Model(format!(
                    "bad weight vector for feature {f}"
                )));
            }
        }
        Ok(Self {
            mask: transition_mask(&file.tags),
            tags: file.tags,
            weights: file.weights,
            averaged_weights: file.averaged_weights,
            gazetteer: file.gazetteer,
            train_meta: file.train_meta,
        })
    }
}

/// Tokens, sorted feature ids and gold tag indices of one training document.
struct Prepared {
    features: Vec<Vec<usize>>,
    gold: Vec<usize>,
}

/// Dense perceptron state with lazy averaging.
struct Perceptron {
    tags: Vec<Tag>,
    mask: Vec<Vec<bool>>,
    feature_ids: HashMap<FeatureId, usize>,
    names: Vec<FeatureId>,
    w: Vec<Vec<f64>>,
    /// Sum of `(t - 1) * delta` over updates made while processing the t-th
    /// instance.
    u: Vec<Vec<f64>>,
    instances: u64,
    updates: u64,
}

impl Perceptron {
    fn new(tags: Vec<Tag>) -> Self {
        Self {
            mask: transition_mask(&tags),
            tags,
            feature_ids: HashMap::new(),
            names: Vec::new(),
            w: Vec::new(),
            u: Vec::new(),
            instances: 0,
            updates: 0,
        }
    }

    fn intern(&mut self, f: FeatureId) -> usize {
        if let Some(&i) = self.feature_ids.get(&f) {
            return i;
        }
        let i = self.names.len();
        self.feature_ids.insert(f.clone(), i);
        self.names.push(f);
        self.w.push(vec![0.0; self.tags.len()]);
        self.u.push(vec![0.0; self.tags.len()]);
        i
    }

    fn seed_weights(&mut self, model: &TaggerModel) {
        for (f, w) in &model.averaged_weights {
            let i = self.intern(f.clone());
            for (t, tag) in model.tags.iter().enumerate() {
                let dst = self
                    .tags
                    .iter()
                    .position(|x| x == tag)
                    .expect("tag set is a superset");
                self.w[i][dst] = w[t];
            }
        }
    }

    fn prepare(&mut self, doc: &Document, gaz: &Gazetteer) -> Result<Prepared, TaggerError> {
        let gold_seq = spans_to_iob(doc)?;
        let gold = gold_seq
            .tags
            .iter()
            .map(|t| {
                self.tags
                    .iter()
                    .position(|x| x == t)
                    .expect("tag set covers data")
            })
            .collect();
        let mut features = Vec::with_capacity(doc.tokens.len());
        for i in 0..doc.tokens.len() {
            let feats = extract_features(&doc.tokens, i, gaz)?;
            features.push(feats.into_iter().map(|f| self.intern(f)).collect());
        }
        Ok(Prepared { features, gold })
    }

    fn step(&mut self, doc: &Prepared) {
        self.instances += 1;
        let k = self.tags.len();
        let emissions: Vec<Vec<f64>> = doc
            .features
            .iter()
            .map(|fs| {
                let mut row = vec![0.0; k];
                for &f in fs {
                    for (r, x) in row.iter_mut().zip(&self.w[f]) {
                        *r += x;
                    }
                }
                row
            })
            .collect();
        let pred = viterbi(&emissions, &self.tags, &self.mask);
        if pred == doc.gold {
            return;
        }
        self.updates += 1;
        let age = (self.instances - 1) as f64;
        for (i, (&g, &p)) in doc.gold.iter().zip(&pred).enumerate() {
            if g == p {
                continue;
            }
            for &f in &doc.features[i] {
                self.w[f][g] += 1.0;
                self.u[f][g] += age;
                self.w[f][p] -= 1.0;
                self.u[f][p] -= age;
            }
        }
    }

    fn finish(self, gazetteer: Gazetteer, meta: TrainMeta) -> TaggerModel {
        let n = self.instances as f64;
        let mut weights = BTreeMap::new();
        let mut averaged = BTreeMap::new();
        for ((name, w), u) in self.names.into_iter().zip(self.w).zip(self.u) {
            let avg: Vec<f64> = if n > 0.0 {
                w.iter().zip(&u).map(|(w, u)| w - u / n).collect()
            } else {
                w.clone()
            };
            if avg.iter().any(|x| *x != 0.0) {
                averaged.insert(name.clone(), avg);
            }
            if w.iter().any(|x| *x != 0.0) {
                weights.insert(name, w);
            }
        }
        TaggerModel {
            mask: self.mask,
            tags: self.tags,
            weights,
            averaged_weights: averaged,
            gazetteer,
            train_meta: Some(meta),
        }
    }
}

fn data_classes(ds: &Dataset) -> Result<BTreeSet<String>, TaggerError> {
    let mut classes = BTreeSet::new();
    for seq in ds.tag_sequences()? {
        classes.extend(
            seq.tags
                .iter()
                .filter_map(|t| t.class().map(str::to_string)),
        );
    }
    Ok(classes)
}

/// Trains a fresh model on `ds`.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TaggerModel, TaggerError> {
    cfg.validate()?;
    if ds.documents.is_empty() {
        return Err(TaggerError::Training(format!(
            "dataset {} has no documents",
            ds.name
        )));
    }
    let gazetteer = Gazetteer::from_dataset(ds);
    let classes = data_classes(ds)?;
    let mut p = Perceptron::new(tag_inventory(classes.iter().map(String::as_str)));
    let docs = ds
        .documents
        .iter()
        .map(|d| p.prepare(d, &gazetteer))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..docs.len()).collect();
    for _ in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for &d in &order {
            p.step(&docs[d]);
        }
    }
    let meta = TrainMeta {
        epochs: cfg.epochs,
        seed: cfg.seed,
        shuffle: cfg.shuffle,
        dataset_fingerprint: dataset_fingerprint(ds),
        updates: p.updates,
        rehearsal_fraction: None,
        rehearsal_fingerprint: None,
        continued_from: None,
    };
    Ok(p.finish(gazetteer, meta))
}

/// Number of replayed documents per epoch.
fn rehearsal_count(fraction: f64, tune_len: usize, prev_len: usize) -> usize {
    let raw = fraction * tune_len as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(prev_len)
}

/// Resumes training from the averaged weights of `model` on `tune`, replaying
/// a seeded sample of `prev` documents in every epoch.
pub fn continue_training(
    model: &TaggerModel,
    tune: &Dataset,
    prev: &Dataset,
    cfg: &TrainConfig,
) -> Result<TaggerModel, TaggerError> {
    cfg.validate()?;
    if tune.documents.is_empty() {
        return Err(TaggerError::Training(format!(
            "tune set {} has no documents",
            tune.name
        )));
    }
    let mut gazetteer = model.gazetteer.clone();
    gazetteer.extend_from(tune);
    let mut classes: BTreeSet<String> = model
        .tags
        .iter()
        .filter_map(|t| t.class().map(str::to_string))
        .collect();
    classes.extend(data_classes(tune)?);
    classes.extend(data_classes(prev)?);
    let mut p = Perceptron::new(tag_inventory(classes.iter().map(String::as_str)));
    p.seed_weights(model);
    let tune_docs = tune
        .documents
        .iter()
        .map(|d| p.prepare(d, &gazetteer))
        .collect::<Result<Vec<_>, _>>()?;
    let k = rehearsal_count(
        cfg.rehearsal_fraction,
        tune_docs.len(),
        prev.documents.len(),
    );
    let prev_docs = if k > 0 {
        prev.documents
            .iter()
            .map(|d| p.prepare(d, &gazetteer))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.epochs {
        let mut order: Vec<(bool, usize)> = (0..tune_docs.len()).map(|i| (false, i)).collect();
        if k > 0 {
            order.extend(
                index::sample(&mut rng, prev_docs.len(), k)
                    .into_iter()
                    .map(|i| (true, i)),
            );
        }
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for (replay, i) in order {
            p.step(if replay { &prev_docs[i] } else { &tune_docs[i] });
        }
    }
    let meta = TrainMeta {
        epochs: cfg.epochs,
        seed: cfg.seed,
        shuffle: cfg.shuffle,
        dataset_fingerprint: dataset_fingerprint(tune),
        updates: p.updates,
        rehearsal_fraction: Some(cfg.rehearsal_fraction),
        rehearsal_fingerprint: Some(dataset_fingerprint(prev)),
        continued_from: model.train_meta.clone().map(Box::new),
    };
    Ok(p.finish(gazetteer, meta))
}

/// Decodes a document with a model; see [`TaggerModel::decode`].
pub fn decode(model: &TaggerModel, doc: &Document) -> TagSequence {
    model.decode(doc)
}
