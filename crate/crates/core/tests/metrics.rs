mod common;

use std::collections::BTreeMap;

use common::random;
use mcner::corpus::{class_counts, label_to_class, Dataset, TagSequence};
use mcner::metrics::{count_matches, evaluate, EvalMode};
use mcner::tagger::load_predictions;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [EvalMode; 3] = [
    EvalMode::TokenStrict,
    EvalMode::TokenClass,
    EvalMode::EntityExact,
];

fn worked() -> (Vec<TagSequence>, Vec<TagSequence>) {
    let gold = common::load("worked_example/gold.json");
    let pred = load_predictions(
        &common::read_fixture("worked_example/pred.jsonl"),
        &gold,
        None,
    )
    .unwrap();
    (gold.tag_sequences().unwrap(), pred)
}

#[test]
fn worked_example_token_modes() {
    let (gold, pred) = worked();
    let strict = evaluate(&gold, &pred, EvalMode::TokenStrict).unwrap();
    // COVID-19 is three tokens (B I I), all false positives for DRUG.
    assert_eq!(strict.counts["DRUG"].tp, 1);
    assert_eq!(strict.counts["DRUG"].fp, 4);
    assert_eq!(strict.counts["DRUG"].fn_, 1);
    assert_eq!(strict.counts["ASSESSMENT"].tp, 1);
    let class = evaluate(&gold, &pred, EvalMode::TokenClass).unwrap();
    assert_eq!(class.counts, strict.counts);
}

#[test]
fn worked_example_report_renders_from_json() {
    let (gold, pred) = worked();
    let report = evaluate(&gold, &pred, EvalMode::EntityExact).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["overall"]["f1"], 0.6);
    assert_eq!(json["per_class"]["DRUG"]["precision"], 0.333333);
    let table = report.render_table();
    assert!(table.contains("OVERALL"));
    assert!(table.contains("60.00"), "{table}");
}

fn counts_map(
    gold: &[TagSequence],
    pred: &[TagSequence],
    mode: EvalMode,
) -> BTreeMap<String, (usize, usize, usize)> {
    count_matches(gold, pred, mode)
        .unwrap()
        .per_class
        .into_iter()
        .map(|(c, k)| (c, (k.tp, k.fp, k.fn_)))
        .filter(|(_, k)| *k != (0, 0, 0))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn brute_force_oracle_agrees(seed in any::<u64>(), valid in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gold, pred) = random::corpus(&mut rng, valid);
        for mode in MODES {
            if mode == EvalMode::EntityExact && !valid {
                continue;
            }
            let mut oracle = random::brute_counts(&gold, &pred, mode);
            oracle.retain(|_, k| *k != (0, 0, 0));
            prop_assert_eq!(counts_map(&gold, &pred, mode), oracle);
        }
    }

    #[test]
    fn scores_are_bounded_by_harmonic_mean(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gold, pred) = random::corpus(&mut rng, true);
        for mode in MODES {
            let r = evaluate(&gold, &pred, mode).unwrap();
            for m in r.per_class.values().chain([&r.overall, &r.micro]) {
                for v in [m.precision, m.recall, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            for m in r.per_class.values() {
                if m.precision > 0.0 && m.recall > 0.0 {
                    prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
                    prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
                }
            }
        }
    }

    #[test]
    fn document_order_does_not_matter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gold, mut pred) = random::corpus(&mut rng, true);
        let mut shuffled_gold = gold.clone();
        shuffled_gold.shuffle(&mut rng);
        pred.shuffle(&mut rng);
        for mode in MODES {
            let a = evaluate(&gold, &pred, mode).unwrap();
            let b = evaluate(&shuffled_gold, &pred, mode).unwrap();
            prop_assert_eq!(a.to_json(), b.to_json());
        }
    }

    #[test]
    fn token_class_dominates_token_strict(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gold, pred) = random::corpus(&mut rng, false);
        let strict = count_matches(&gold, &pred, EvalMode::TokenStrict).unwrap();
        let class = count_matches(&gold, &pred, EvalMode::TokenClass).unwrap();
        for (c, k) in &strict.per_class {
            prop_assert!(class.per_class.get(c).map_or(0, |x| x.tp) >= k.tp);
        }
    }

    #[test]
    fn self_evaluation_is_perfect(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = (0..3).map(|i| random::document(&mut rng, format!("d{i}"))).collect();
        let ds = Dataset::new("r", docs).unwrap();
        prop_assume!(ds.entity_count() > 0);
        let gold = ds.tag_sequences().unwrap();
        for mode in MODES {
            prop_assert_eq!(evaluate(&gold, &gold, mode).unwrap().overall.f1, 1.0);
        }
        let entity = evaluate(&gold, &gold, EvalMode::EntityExact).unwrap();
        for (label, c) in class_counts(&ds).classes {
            prop_assert_eq!(entity.per_class[&label_to_class(&label)].support, c.count);
        }
    }
}
