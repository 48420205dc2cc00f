//! A small synthetic credit-scoring table for demos and benchmarks.

use std::sync::Arc;

use rand::Rng;

use crate::data::{Feature, FeatureSchema, Label, LabeledDataset, Record, Value};
use crate::rng;

/// Five continuous and three categorical features, binary target `approved`.
pub fn credit_schema() -> FeatureSchema {
    FeatureSchema::new(vec![
        Feature::continuous("age", 18.0, 80.0),
        Feature::continuous("income", 0.0, 200.0),
        Feature::continuous("debt", 0.0, 100.0),
        Feature::continuous("tenure", 0.0, 40.0),
        Feature::continuous("score", 300.0, 850.0),
        Feature::categorical("housing", &["own", "rent", "free"]),
        Feature::categorical("purpose", &["car", "education", "business", "home"]),
        Feature::categorical("employment", &["employed", "self", "unemployed"]),
    ])
    .expect("static schema is valid")
    .with_target("approved")
    .with_class_names("no", "yes")
}

/// Ground-truth decision used to label generated records.
pub fn credit_decision(r: &Record) -> Label {
    let v = |i: usize| r.get(i).as_num();
    let c = |i: usize| r.get(i).as_cat();
    let (age, income, debt, tenure, score) = (v(0), v(1), v(2), v(3), v(4));
    let (housing, purpose, employment) = (c(5), c(6), c(7));
    let affordable = debt <= 40.0 && income > 30.0;
    let approved = if employment == 2 {
        score > 700.0 && housing == 0
    } else if score > 650.0 {
        affordable || tenure > 10.0
    } else if score > 550.0 {
        affordable && (housing == 0 || income > 90.0 || (purpose == 1 && age < 30.0))
    } else {
        false
    };
    approved as Label
}

/// `n` records drawn from a fixed distribution and labeled by
/// [`credit_decision`].
pub fn credit_dataset(n: usize, seed: u64) -> LabeledDataset {
    let schema = Arc::new(credit_schema());
    let mut g = rng::stream(seed, "synth.credit", 0);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let age: f64 = g.gen_range(18.0..80.0);
        let income: f64 = g.gen_range(5.0..200.0);
        let debt: f64 = g.gen_range(0.0..100.0);
        let tenure: f64 = g.gen_range(0.0..(age - 18.0).clamp(0.5, 40.0));
        let score: f64 = g.gen_range(300.0..850.0);
        let round = |x: f64, step: f64| (x / step).round() * step;
        records.push(Record::new(vec![
            Value::Num(round(age, 1.0)),
            Value::Num(round(income, 0.5)),
            Value::Num(round(debt, 0.5)),
            Value::Num(round(tenure, 1.0)),
            Value::Num(round(score, 1.0)),
            Value::Cat(weighted(&mut g, &[0.5, 0.35, 0.15])),
            Value::Cat(weighted(&mut g, &[0.35, 0.2, 0.15, 0.3])),
            Value::Cat(weighted(&mut g, &[0.7, 0.2, 0.1])),
        ]));
    }
    let labels = records.iter().map(credit_decision).collect();
    LabeledDataset::new(schema, records, labels).expect("generated records fit the schema")
}

fn weighted<R: Rng>(g: &mut R, p: &[f64]) -> u32 {
    let u: f64 = g.gen();
    let mut acc = 0.0;
    for (i, w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i as u32;
        }
    }
    (p.len() - 1) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_mixed() {
        let a = credit_dataset(500, 3);
        assert_eq!(a, credit_dataset(500, 3));
        let [no, yes] = a.class_counts();
        assert!(no > 100 && yes > 100, "{no} {yes}");
        for r in a.records() {
            a.schema().check(r).unwrap();
        }
    }
}
