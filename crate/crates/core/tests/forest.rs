use std::io::{BufReader, BufWriter};
use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulelens::blackbox::{connect_external, serve, train_forest, Endpoint, ForestModel, ForestParams, Oracle};
use rulelens::data::{Feature, FeatureSchema, LabeledDataset, Record, Value};
use rulelens::synth;
use rulelens::tree::{DecisionTree, Node, SplitTest, TreeParams};

fn step_data(n: usize, seed: u64) -> LabeledDataset {
    let schema = Arc::new(
        FeatureSchema::new(vec![
            Feature::continuous("x1", 0.0, 1.0),
            Feature::continuous("x2", 0.0, 1.0),
            Feature::categorical("c", &["a", "b", "c"]),
        ])
        .unwrap(),
    );
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let records: Vec<Record> = (0..n)
        .map(|_| Record::new(vec![Value::Num(g.gen()), Value::Num(g.gen()), Value::Cat(g.gen_range(0..3))]))
        .collect();
    let labels = records.iter().map(|r| (r.get(0).as_num() > 0.5) as u8).collect();
    LabeledDataset::new(schema, records, labels).unwrap()
}

#[test]
fn learns_a_step_function() {
    let train = step_data(500, 1);
    let model = train_forest(&train, &ForestParams { n_trees: 50, seed: 7, ..ForestParams::default() }).unwrap();
    let test = step_data(1000, 2);
    assert!(model.accuracy(&test) >= 0.99, "{}", model.accuracy(&test));
}

#[test]
fn stump_splits_near_the_step() {
    let d = step_data(1000, 3);
    let idx: Vec<usize> = (0..d.len()).collect();
    let params = TreeParams { max_depth: 1, min_leaf: 1, features_per_split: None };
    let t = DecisionTree::fit(d.schema(), d.records(), d.labels(), &idx, &params, &mut ChaCha8Rng::seed_from_u64(0));
    match &t.nodes()[0] {
        Node::Split { feature: 0, test: SplitTest::Threshold(th), .. } => assert!((th - 0.5).abs() < 0.01, "{th}"),
        other => panic!("unexpected root {other:?}"),
    }
}

#[test]
fn same_seed_same_forest() {
    let d = synth::credit_dataset(300, 4);
    let p = ForestParams { n_trees: 10, seed: 5, ..ForestParams::default() };
    let a = train_forest(&d, &p).unwrap();
    assert_eq!(a.dump(), train_forest(&d, &p).unwrap().dump());
    let b = train_forest(&d, &ForestParams { seed: 6, ..p }).unwrap();
    assert_ne!(a.dump(), b.dump());
}

#[test]
fn dump_round_trip_predicts_the_same() {
    let d = synth::credit_dataset(300, 8);
    let a = train_forest(&d, &ForestParams { n_trees: 15, seed: 1, ..ForestParams::default() }).unwrap();
    let b = ForestModel::from_dump(&a.dump()).unwrap();
    for r in synth::credit_dataset(500, 9).records() {
        assert_eq!(a.vote(r), b.vote(r));
    }
}

#[test]
fn one_tree_forest_is_that_tree() {
    let d = synth::credit_dataset(300, 10);
    let m = train_forest(&d, &ForestParams { n_trees: 1, seed: 2, ..ForestParams::default() }).unwrap();
    for r in synth::credit_dataset(300, 11).records() {
        assert_eq!(m.vote(r), m.trees()[0].predict(r));
    }
}

#[test]
fn single_class_data_is_rejected() {
    let d = step_data(50, 12);
    let ones = d.with_labels(vec![1; 50]).unwrap();
    assert!(train_forest(&ones, &ForestParams::default()).is_err());
}

#[test]
fn external_oracle_over_tcp_matches_in_process() {
    let d = synth::credit_dataset(400, 13);
    let model = train_forest(&d, &ForestParams { n_trees: 20, seed: 3, ..ForestParams::default() }).unwrap();
    let schema = d.schema().as_ref().clone();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let served = model.clone();
    let server_schema = schema.clone();
    let server = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        serve(&served, &server_schema, reader, BufWriter::new(stream)).unwrap();
    });

    let remote = connect_external(&Endpoint::Tcp(addr), &schema, Duration::from_secs(10)).unwrap();
    let probes = synth::credit_dataset(1000, 14);
    let local: Vec<u8> = probes.records().iter().map(|r| model.vote(r)).collect();
    let batched = remote.predict_batch(&probes.records()[..500]).unwrap();
    let single: Vec<u8> = probes.records()[500..].iter().map(|r| remote.predict(r).unwrap()).collect();
    assert_eq!(batched, local[..500]);
    assert_eq!(single, local[500..]);
    drop(remote);
    server.join().unwrap();
}
