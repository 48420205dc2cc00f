use std::sync::Arc;

use rulelens::blackbox::{train_forest, ConstantModel, ForestParams, ThresholdModel};
use rulelens::data::{Feature, FeatureSchema, Record, Value};
use rulelens::neighborhood::{gen_genetic, gen_uniform, generate, Method, NeighborhoodConfig, NeighborhoodWarning};
use rulelens::synth;

fn plane() -> Arc<FeatureSchema> {
    Arc::new(
        FeatureSchema::new(vec![Feature::continuous("x1", 0.0, 1.0), Feature::continuous("x2", 0.0, 1.0)]).unwrap(),
    )
}

fn point(a: f64, b: f64) -> Record {
    Record::new(vec![Value::Num(a), Value::Num(b)])
}

#[test]
fn genetic_is_closer_than_uniform() {
    let d = synth::credit_dataset(400, 21);
    let model = train_forest(&d, &ForestParams { n_trees: 30, seed: 1, ..ForestParams::default() }).unwrap();
    let schema = d.schema();
    let mut wins = 0;
    for seed in 0..20u64 {
        let x = &d.records()[seed as usize];
        let cfg = NeighborhoodConfig { seed, ..NeighborhoodConfig::default() };
        let g = gen_genetic(x, schema, &cfg, &model).unwrap();
        let u = gen_uniform(x, schema, &NeighborhoodConfig { method: Method::Uniform, ..cfg }, &model).unwrap();
        wins += (g.mean_distance(schema) < u.mean_distance(schema)) as usize;
    }
    assert!(wins >= 18, "genetic closer in {wins}/20");
}

#[test]
fn genetic_balances_classes_near_a_boundary() {
    let s = plane();
    let oracle = ThresholdModel { feature: 0, threshold: 0.5 };
    for seed in 0..5 {
        let n = gen_genetic(&point(0.45, 0.5), &s, &NeighborhoodConfig { seed, ..Default::default() }, &oracle).unwrap();
        assert_eq!(n.warning, None);
        let b = n.class_balance();
        assert!((0.3..=0.7).contains(&b), "seed {seed}: balance {b}");
    }
}

#[test]
fn elitism_never_loses_the_best() {
    let s = plane();
    let oracle = ThresholdModel { feature: 0, threshold: 0.5 };
    let n = gen_genetic(&point(0.4, 0.2), &s, &NeighborhoodConfig { seed: 3, ..Default::default() }, &oracle).unwrap();
    let trace = n.trace.unwrap();
    assert_eq!(trace.best_same.len(), 21);
    for series in [&trace.best_same, &trace.best_diff] {
        assert!(series.windows(2).all(|w| w[1] >= w[0]), "{series:?}");
    }
}

#[test]
fn constant_black_box_is_flagged() {
    let s = plane();
    let n = gen_genetic(&point(0.3, 0.3), &s, &NeighborhoodConfig::default(), &ConstantModel(1)).unwrap();
    assert_eq!(n.warning, Some(NeighborhoodWarning::LocallyConstant));
    assert!(n.labels.iter().all(|&l| l == 1));
}

#[test]
fn neighborhoods_stay_in_the_domain_and_repeat() {
    let d = synth::credit_dataset(50, 22);
    let oracle = rulelens::blackbox::FnOracle(synth::credit_decision);
    for method in [Method::Uniform, Method::Genetic] {
        let cfg = NeighborhoodConfig { size: 200, method, seed: 9, ..Default::default() };
        let a = generate(&d.records()[0], d.schema(), &cfg, &oracle).unwrap();
        assert!(a.len() >= cfg.size);
        for r in &a.records {
            d.schema().check(r).unwrap();
        }
        assert_eq!(a, generate(&d.records()[0], d.schema(), &cfg, &oracle).unwrap());
    }
}
