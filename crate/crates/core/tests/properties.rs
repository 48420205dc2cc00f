mod common;

use common::*;
use fixedbitset::FixedBitSet;
use proptest::prelude::*;
use rulelens::algebra::{composition_bound, compose_background, merge, subsumes, BackgroundRule};
use rulelens::global::jaccard;
use rulelens::rule::{format_rule, measure, parse_rule, Predicate, Premise, Rule};

proptest! {
    #[test]
    fn measure_identities(r in rule(), d in dataset(1..60)) {
        let m = measure(&r, &d).unwrap();
        prop_assert!(0.0 <= m.support && m.support <= m.coverage && m.coverage <= 1.0);
        if let Some(c) = m.confidence {
            prop_assert!((c * m.coverage - m.support).abs() <= 1e-12);
        } else {
            prop_assert_eq!(m.coverage, 0.0);
        }
        if let Some(mi) = m.mi_score {
            prop_assert!((0.0..=1.0).contains(&mi));
        }
        prop_assert!((0.0..=1.0).contains(&m.p_value));
    }

    #[test]
    fn dropping_a_predicate_never_shrinks_the_cover(p in premise(), d in dataset(1..60)) {
        let full = cover(&p, d.records());
        for i in 0..p.len() {
            let weaker = cover(&p.without(i), d.records());
            prop_assert!(full.iter().zip(&weaker).all(|(&a, &b)| !a || b));
        }
    }

    #[test]
    fn interval_intersection_covers_the_intersection(a in interval(), b in interval(), d in dataset(1..80)) {
        let s = schema();
        let b = rulelens::rule::Interval { feature: a.feature, ..b };
        let pa = Premise::new(&s, vec![Predicate::Interval(a)]).unwrap();
        let pb = Premise::new(&s, vec![Predicate::Interval(b)]).unwrap();
        let (ca, cb) = (cover(&pa, d.records()), cover(&pb, d.records()));
        match Premise::new(&s, vec![Predicate::Interval(a), Predicate::Interval(b)]) {
            Ok(both) => {
                prop_assert_eq!(both.len(), 1);
                let c = cover(&both, d.records());
                for i in 0..c.len() {
                    prop_assert_eq!(c[i], ca[i] && cb[i]);
                }
            }
            // rejected only when the intervals are disjoint
            Err(_) => prop_assert!(a.intersect(&b).is_none()),
        }
    }

    #[test]
    fn format_then_parse_is_identity(r in rule()) {
        let s = schema();
        let text = format_rule(&r, &s);
        prop_assert_eq!(parse_rule(&text, &s).unwrap(), r, "{}", text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn merge_subsumes_both_operands(p1 in premise(), p2 in premise(), c in 0..2u8, d in dataset(20..80)) {
        let (r1, r2) = (Rule::new(p1, c).unwrap(), Rule::new(p2, c).unwrap());
        let m = merge(&r1, &r2).unwrap();
        prop_assert_eq!(m.consequent, c);
        for r in d.records() {
            if r1.covers(r) || r2.covers(r) {
                prop_assert!(m.covers(r));
            }
        }
        prop_assert_eq!(&merge(&r2, &r1).unwrap(), &m);
        prop_assert_eq!(&merge(&r1, &r1).unwrap(), &r1);
        prop_assert_eq!(&merge(&r1, &m).unwrap(), &m);
    }

    #[test]
    fn subsumption_is_sound(
        general in premise(),
        extra in premise(),
        other in premise(),
        probes in proptest::collection::vec(record(), 1000),
    ) {
        let s = schema();
        let mut preds: Vec<Predicate> = general.predicates().to_vec();
        preds.extend(extra.predicates().iter().cloned());
        // a strengthened copy gives positive cases; `other` mostly negative ones
        let candidates: Vec<Premise> = Premise::new(&s, preds).ok().into_iter().chain([other]).collect();
        for specific in candidates {
            let res = subsumes(&s, &general, &specific).unwrap();
            if res.subsumes {
                for r in &probes {
                    prop_assert!(!specific.matches(r) || general.matches(r));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn composition_bound_is_sound(a in simple_premise(), c in simple_premise(), b in 0..2u8, d in dataset(1..120)) {
        let decision = Rule::new(a.clone(), b).unwrap();
        let comp = compose_background(&decision, &BackgroundRule { premise: a.clone(), implied: c.clone() }, &d).unwrap();
        let n_c = d.records().iter().filter(|r| c.matches(r)).count();
        let n_cb = d.records().iter().zip(d.labels()).filter(|(r, &l)| c.matches(r) && l == b).count();
        match comp.confidence_lower_bound {
            None => prop_assert_eq!(n_c, 0),
            Some(bound) => {
                let truth = n_cb as f64 / n_c as f64;
                prop_assert!(truth >= bound - 1e-15, "conf {} < bound {}", truth, bound);
                prop_assert_eq!(Some(bound), composition_bound(comp.n_a, comp.n_ab, comp.n_ac, comp.n_c));
            }
        }
    }
}

fn bits(v: &[bool]) -> FixedBitSet {
    let mut b = FixedBitSet::with_capacity(v.len());
    v.iter().enumerate().filter(|(_, &x)| x).for_each(|(i, _)| b.insert(i));
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn jaccard_is_a_metric(
        a in proptest::collection::vec(any::<bool>(), 40),
        b in proptest::collection::vec(any::<bool>(), 40),
        c in proptest::collection::vec(any::<bool>(), 40),
    ) {
        let (a, b, c) = (bits(&a), bits(&b), bits(&c));
        let d = jaccard;
        for x in [&a, &b, &c] {
            // two empty covers count as disjoint
            prop_assert_eq!(d(x, x), if x.is_clear() { 1.0 } else { 0.0 });
        }
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!(d(&b, &c) <= d(&b, &a) + d(&a, &c) + 1e-12);
        prop_assert!(d(&a, &b) <= d(&a, &c) + d(&c, &b) + 1e-12);
        prop_assert!((0.0..=1.0).contains(&d(&a, &b)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_and_sidecar_round_trip(d in dataset(1..40)) {
        use rulelens::data::{FeatureSchema, LabeledDataset};
        let spec = FeatureSchema::read_sidecar(d.schema().to_sidecar().as_bytes()).unwrap();
        let back = LabeledDataset::from_csv(d.to_csv().unwrap().as_bytes(), &spec).unwrap();
        prop_assert_eq!(back.records(), d.records());
        prop_assert_eq!(back.labels(), d.labels());
        prop_assert_eq!(back.schema().to_sidecar(), d.schema().to_sidecar());
    }
}
