mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use rulelens::blackbox::{relabel, train_forest, ForestParams, ThresholdModel};
use rulelens::data::{Feature, FeatureSchema, LabeledDataset, Record, Value};
use rulelens::global::{
    build_dendrogram, collect_local, cpar_predict, fidelity, globalize, q_bic, score_cuts, Dendrogram, LocalConfig,
};
use rulelens::neighborhood::NeighborhoodConfig;
use rulelens::rule::{parse_rule, Rule};
use rulelens::surrogate::SurrogateParams;
use rulelens::synth;

fn check_structure(d: &Dendrogram, rules: &[Rule]) -> Result<(), TestCaseError> {
    prop_assert_eq!(d.n_leaves(), rules.len());
    for class in 0..2u8 {
        let leaves = d.nodes().iter().filter(|n| n.is_leaf() && n.rule.consequent == class).count();
        let internal = d.nodes().iter().filter(|n| !n.is_leaf() && n.rule.consequent == class).count();
        prop_assert_eq!(internal, leaves.saturating_sub(1));
        let roots = d.roots().iter().filter(|&&r| d.node(r).rule.consequent == class).count();
        prop_assert_eq!(roots, (leaves > 0) as usize);
    }
    for (id, n) in d.nodes().iter().enumerate() {
        if let Some(m) = &n.merge {
            for child in [m.left, m.right] {
                prop_assert!(d.node(child).cover.is_subset(&n.cover));
                prop_assert_eq!(d.node(child).parent, Some(id));
                prop_assert!(d.effective_height(child) <= d.effective_height(id));
            }
        }
    }
    Ok(())
}

fn check_partition(d: &Dendrogram, nodes: &[usize]) -> Result<(), TestCaseError> {
    let mut seen = vec![0usize; d.nodes().len()];
    for &n in nodes {
        for leaf in d.leaves_under(n) {
            seen[leaf] += 1;
        }
    }
    for (id, n) in d.nodes().iter().enumerate() {
        prop_assert_eq!(seen[id], n.is_leaf() as usize, "node {}", id);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dendrogram_and_cuts(rules in proptest::collection::btree_set(rule(), 1..25), data in dataset(30..80)) {
        let rules: Vec<Rule> = rules.into_iter().collect();
        let d = build_dendrogram(&rules, &data).unwrap();
        check_structure(&d, &rules)?;
        let cuts = score_cuts(&d, &data);
        prop_assert_eq!(cuts[0].nodes.len(), rules.len());
        for c in &cuts {
            check_partition(&d, &c.nodes)?;
        }
        let (again, global) = globalize(&rules, &data).unwrap();
        prop_assert_eq!(again.to_dot(data.schema()), d.to_dot(data.schema()));
        prop_assert!(global.rules.len() <= rules.len());
        prop_assert!(global.q >= cuts[0].q);
        check_partition(&d, &global.nodes)?;
    }

    #[test]
    fn duplicate_rule_never_raises_q(rules in proptest::collection::vec(rule(), 1..10), data in dataset(10..60)) {
        let q = q_bic(&rules, &data).unwrap();
        let mut more = rules.clone();
        more.push(rules[0].clone());
        prop_assert!(q_bic(&more, &data).unwrap() <= q);
    }
}

fn line() -> LabeledDataset {
    let schema = Arc::new(FeatureSchema::new(vec![Feature::continuous("x1", 0.0, 1.0)]).unwrap());
    let records: Vec<Record> = (0..100).map(|i| Record::new(vec![Value::Num(i as f64 / 99.0)])).collect();
    let labels = records.iter().map(|r| (r.get(0).as_num() > 0.5) as u8).collect();
    LabeledDataset::new(schema, records, labels).unwrap()
}

#[test]
fn fewer_rules_win_at_equal_fidelity() {
    let d = line();
    let one = vec![parse_rule("x1 > 0.5 -> class = 1", d.schema()).unwrap()];
    let ten: Vec<Rule> = (0..10)
        .map(|i| parse_rule(&format!("x1 > 0.5, x1 <= {} -> class = 1", 0.55 + 0.05 * i as f64), d.schema()).unwrap())
        .collect();
    assert_eq!(fidelity(&one, 0, &d), 1.0);
    assert_eq!(fidelity(&ten, 0, &d), 1.0);
    assert!(q_bic(&one, &d).unwrap() > q_bic(&ten, &d).unwrap());
}

#[test]
fn uncovered_records_fall_back_to_default() {
    let d = line();
    let rule = vec![parse_rule("x1 > 2 -> class = 1", d.schema()).unwrap()];
    assert_eq!(cpar_predict(&rule, &d.records()[90], 0, &d), 0);
    let majority = d.class_counts()[0] as f64 / d.len() as f64;
    assert_eq!(fidelity(&rule, 0, &d), majority);
}

#[test]
fn threshold_black_box_gives_few_threshold_rules() {
    let schema = Arc::new(
        FeatureSchema::new(vec![Feature::continuous("x1", 0.0, 1.0), Feature::continuous("x2", 0.0, 1.0)]).unwrap(),
    );
    let records: Vec<Record> = (0..200)
        .map(|i| Record::new(vec![Value::Num(0.4 + 0.2 * (i % 20) as f64 / 19.0), Value::Num((i / 20) as f64 / 9.0)]))
        .collect();
    let data = LabeledDataset::new(schema, records.clone(), vec![0; 200]).unwrap();
    let oracle = ThresholdModel { feature: 0, threshold: 0.5 };
    let relabeled = relabel(&oracle, &data).unwrap();
    let cfg = LocalConfig { neighborhood: NeighborhoodConfig::default(), surrogate: SurrogateParams::default(), jobs: 0 };
    let local = collect_local(&oracle, &relabeled, &cfg).unwrap();
    // every neighborhood puts its midpoint threshold somewhere slightly
    // different, so the distinct local rules only collapse at the global step
    let (_, global) = globalize(&local.rules, &relabeled).unwrap();
    assert!(global.rules.len() <= 10, "{}", global.rules.len());
    assert!(global.fidelity >= 0.95, "{}", global.fidelity);
    for r in local.rules.iter().chain(&global.rules) {
        assert_eq!(r.len(), 1);
        let iv = r.premise.interval_on(0).expect("rule on x1");
        let t = if iv.upper.is_finite() { iv.upper } else { iv.lower };
        assert!((t - 0.5).abs() < 0.1, "{t}");
    }
}

#[test]
fn pipeline_is_deterministic() {
    let d = synth::credit_dataset(60, 41);
    let model = train_forest(&d, &ForestParams { n_trees: 20, seed: 1, ..ForestParams::default() }).unwrap();
    let relabeled = relabel(&model, &d).unwrap();
    let cfg = LocalConfig {
        neighborhood: NeighborhoodConfig { seed: 3, ..Default::default() },
        surrogate: SurrogateParams::default(),
        jobs: 2,
    };
    let run = || {
        let local = collect_local(&model, &relabeled, &cfg).unwrap();
        let (dendro, global) = globalize(&local.rules, &relabeled).unwrap();
        (global.to_rule_file(relabeled.schema()), dendro.to_dot(relabeled.schema()))
    };
    assert_eq!(run(), run());
}
