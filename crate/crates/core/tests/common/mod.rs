#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use rulelens::data::{Feature, FeatureSchema, Label, LabeledDataset, Record, Value};
use rulelens::rule::{Interval, LinearConstraint, Predicate, Premise, Relation, Rule};

/// Three continuous features on [0, 10] and two categoricals, one with a
/// space inside a value.
pub fn schema() -> Arc<FeatureSchema> {
    Arc::new(
        FeatureSchema::new(vec![
            Feature::continuous("x0", 0.0, 10.0),
            Feature::continuous("x1", 0.0, 10.0),
            Feature::continuous("x2", 0.0, 10.0),
            Feature::categorical("c0", &["a", "b", "c"]),
            Feature::categorical("c1", &["u", "v w", "x"]),
        ])
        .unwrap()
        .with_target("y"),
    )
}

/// Values on a half-unit grid so records land on interval endpoints often.
pub fn grid() -> impl Strategy<Value = f64> {
    (0..=20i32).prop_map(|k| k as f64 * 0.5)
}

pub fn record() -> impl Strategy<Value = Record> {
    (grid(), grid(), grid(), 0..3u32, 0..3u32).prop_map(|(a, b, c, d, e)| {
        Record::new(vec![Value::Num(a), Value::Num(b), Value::Num(c), Value::Cat(d), Value::Cat(e)])
    })
}

pub fn interval() -> impl Strategy<Value = Interval> {
    (0..3usize, grid(), grid(), any::<bool>(), any::<bool>(), 0..3u8).prop_filter_map(
        "empty interval",
        |(f, a, b, lc, uc, shape)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            match shape {
                0 => Interval::new(f, lo, hi, lc, uc).ok().filter(|iv| !iv.is_empty()),
                1 => Some(if lc { Interval::at_least(f, lo) } else { Interval::above(f, lo) }),
                _ => Some(if uc { Interval::at_most(f, hi) } else { Interval::below(f, hi) }),
            }
        },
    )
}

fn relation() -> impl Strategy<Value = Relation> {
    prop_oneof![Just(Relation::Le), Just(Relation::Lt), Just(Relation::Ge), Just(Relation::Gt)]
}

pub fn linear() -> impl Strategy<Value = LinearConstraint> {
    (proptest::collection::vec((0..3usize, -3..=3i32), 1..3), relation(), -10..=20i32).prop_filter_map(
        "degenerate constraint",
        |(terms, rel, t)| {
            let terms: Vec<(usize, f64)> = terms.into_iter().map(|(f, c)| (f, c as f64)).collect();
            LinearConstraint::new(terms, rel, t as f64).ok().filter(|lc| !lc.terms().is_empty())
        },
    )
}

pub fn predicate() -> impl Strategy<Value = Predicate> {
    prop_oneof![
        4 => interval().prop_map(Predicate::Interval),
        3 => (3..5usize, 0..3u32).prop_map(|(f, v)| Predicate::eq(f, v)),
        1 => linear().prop_map(Predicate::Linear),
    ]
}

/// Satisfiable premises without linear constraints.
pub fn simple_premise() -> impl Strategy<Value = Premise> {
    let p = prop_oneof![
        interval().prop_map(Predicate::Interval),
        (3..5usize, 0..3u32).prop_map(|(f, v)| Predicate::eq(f, v)),
    ];
    proptest::collection::vec(p, 0..4).prop_filter_map("conflict", |ps| Premise::new(&schema(), ps).ok())
}

pub fn premise() -> impl Strategy<Value = Premise> {
    proptest::collection::vec(predicate(), 0..4).prop_filter_map("conflict", |ps| Premise::new(&schema(), ps).ok())
}

pub fn rule() -> impl Strategy<Value = Rule> {
    (premise(), 0..2u8).prop_map(|(p, c)| Rule::new(p, c).unwrap())
}

pub fn dataset(n: std::ops::Range<usize>) -> impl Strategy<Value = LabeledDataset> {
    proptest::collection::vec((record(), 0..2u8), n).prop_map(|rows| {
        let (records, labels): (Vec<Record>, Vec<Label>) = rows.into_iter().unzip();
        LabeledDataset::new(schema(), records, labels).unwrap()
    })
}

pub fn cover(p: &Premise, records: &[Record]) -> Vec<bool> {
    records.iter().map(|r| p.matches(r)).collect()
}
