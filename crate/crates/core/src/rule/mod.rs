//! Rule language: predicates, conjunctive premises and classification rules.

mod measures;
mod text;

use std::cmp::Ordering;
use std::fmt;

use crate::data::{FeatureKind, FeatureSchema, Label, Record, Value};
use crate::error::{Error, Result};

pub use measures::{
    measure, significance_test, significance_test_counts, Contingency, RuleMeasures,
};
pub use text::{format_premise, format_rule, parse_rule, parse_rules, RuleDisplay};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Relation {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }

    /// True for `<=`/`<`.
    pub fn is_upper(self) -> bool {
        matches!(self, Relation::Le | Relation::Lt)
    }
}

/// Numeric range on one continuous feature. Infinite bounds are always open.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub feature: usize,
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl Interval {
    pub fn new(feature: usize, lower: f64, upper: f64, lower_closed: bool, upper_closed: bool) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() {
            return Err(Error::Premise("NaN interval bound".into()));
        }
        if lower.is_infinite() && upper.is_infinite() {
            return Err(Error::Premise("interval needs at least one finite bound".into()));
        }
        if lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::Premise(format!("interval lower {lower} exceeds upper {upper}")));
        }
        Ok(Interval {
            feature,
            lower: lower + 0.0,
            upper: upper + 0.0,
            lower_closed: lower_closed && lower.is_finite(),
            upper_closed: upper_closed && upper.is_finite(),
        })
    }

    /// `feature <= t`
    pub fn at_most(feature: usize, t: f64) -> Self {
        Interval::new(feature, f64::NEG_INFINITY, t, false, true).expect("finite threshold")
    }

    /// `feature < t`
    pub fn below(feature: usize, t: f64) -> Self {
        Interval::new(feature, f64::NEG_INFINITY, t, false, false).expect("finite threshold")
    }

    /// `feature > t`
    pub fn above(feature: usize, t: f64) -> Self {
        Interval::new(feature, t, f64::INFINITY, false, false).expect("finite threshold")
    }

    /// `feature >= t`
    pub fn at_least(feature: usize, t: f64) -> Self {
        Interval::new(feature, t, f64::INFINITY, true, false).expect("finite threshold")
    }

    /// `feature in [lo, hi]`
    pub fn closed(feature: usize, lo: f64, hi: f64) -> Result<Self> {
        Interval::new(feature, lo, hi, true, true)
    }

    pub fn contains_value(&self, x: f64) -> bool {
        let lo_ok = if self.lower_closed { x >= self.lower } else { x > self.lower };
        let hi_ok = if self.upper_closed { x <= self.upper } else { x < self.upper };
        lo_ok && hi_ok
    }

    /// True if no real number satisfies the interval.
    pub fn is_empty(&self) -> bool {
        self.lower > self.upper || (self.lower == self.upper && !(self.lower_closed && self.upper_closed))
    }

    /// Intersection, or `None` when it is empty.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        debug_assert_eq!(self.feature, other.feature);
        let (lower, lower_closed) = match self.lower.partial_cmp(&other.lower).unwrap() {
            Ordering::Greater => (self.lower, self.lower_closed),
            Ordering::Less => (other.lower, other.lower_closed),
            Ordering::Equal => (self.lower, self.lower_closed && other.lower_closed),
        };
        let (upper, upper_closed) = match self.upper.partial_cmp(&other.upper).unwrap() {
            Ordering::Less => (self.upper, self.upper_closed),
            Ordering::Greater => (other.upper, other.upper_closed),
            Ordering::Equal => (self.upper, self.upper_closed && other.upper_closed),
        };
        let out = Interval { feature: self.feature, lower, upper, lower_closed, upper_closed };
        if out.is_empty() {
            None
        } else {
            Some(out)
        }
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        debug_assert_eq!(self.feature, other.feature);
        let (lower, lower_closed) = match self.lower.partial_cmp(&other.lower).unwrap() {
            Ordering::Less => (self.lower, self.lower_closed),
            Ordering::Greater => (other.lower, other.lower_closed),
            Ordering::Equal => (self.lower, self.lower_closed || other.lower_closed),
        };
        let (upper, upper_closed) = match self.upper.partial_cmp(&other.upper).unwrap() {
            Ordering::Greater => (self.upper, self.upper_closed),
            Ordering::Less => (other.upper, other.upper_closed),
            Ordering::Equal => (self.upper, self.upper_closed || other.upper_closed),
        };
        Interval { feature: self.feature, lower, upper, lower_closed, upper_closed }
    }

    /// True if every value in `inner` lies in `self`.
    pub fn contains(&self, inner: &Interval) -> bool {
        let lower_ok = self.lower < inner.lower
            || (self.lower == inner.lower && (self.lower_closed || !inner.lower_closed));
        let upper_ok = self.upper > inner.upper
            || (self.upper == inner.upper && (self.upper_closed || !inner.upper_closed));
        lower_ok && upper_ok
    }

    /// Whole real line, used only transiently when folding conditions.
    pub(crate) fn unbounded(feature: usize) -> Interval {
        Interval {
            feature,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            lower_closed: false,
            upper_closed: false,
        }
    }

    pub(crate) fn is_unbounded(&self) -> bool {
        self.lower.is_infinite() && self.upper.is_infinite()
    }
}

/// `sum(coef * feature) relation threshold` over continuous features.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub threshold: f64,
}

impl LinearConstraint {
    /// Zero coefficients are dropped and repeated features summed.
    pub fn new(terms: Vec<(usize, f64)>, relation: Relation, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::Premise("linear threshold must be finite".into()));
        }
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (f, c) in terms {
            if !c.is_finite() {
                return Err(Error::Premise("linear coefficient must be finite".into()));
            }
            match merged.iter_mut().find(|(g, _)| *g == f) {
                Some(t) => t.1 += c,
                None => merged.push((f, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        if merged.is_empty() {
            return Err(Error::Premise("linear constraint has no nonzero coefficient".into()));
        }
        merged.sort_by_key(|&(f, _)| f);
        for t in &mut merged {
            t.1 += 0.0;
        }
        Ok(LinearConstraint { terms: merged, relation, threshold: threshold + 0.0 })
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn lhs(&self, record: &Record) -> f64 {
        self.terms.iter().map(|&(f, c)| c * record.get(f).as_num()).sum()
    }

    pub fn holds(&self, record: &Record) -> bool {
        self.relation.holds(self.lhs(record), self.threshold)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    CategoricalEq { feature: usize, value: u32 },
    Interval(Interval),
    Linear(LinearConstraint),
}

impl Predicate {
    pub fn eq(feature: usize, value: u32) -> Self {
        Predicate::CategoricalEq { feature, value }
    }

    pub fn holds(&self, record: &Record) -> bool {
        match self {
            Predicate::CategoricalEq { feature, value } => record.get(*feature) == Value::Cat(*value),
            Predicate::Interval(iv) => iv.contains_value(record.get(iv.feature).as_num()),
            Predicate::Linear(lc) => lc.holds(record),
        }
    }

    /// Single feature constrained, `None` for linear constraints.
    pub fn feature(&self) -> Option<usize> {
        match self {
            Predicate::CategoricalEq { feature, .. } => Some(*feature),
            Predicate::Interval(iv) => Some(iv.feature),
            Predicate::Linear(_) => None,
        }
    }

    fn features(&self) -> Vec<usize> {
        match self {
            Predicate::Linear(lc) => lc.terms.iter().map(|t| t.0).collect(),
            p => vec![p.feature().unwrap()],
        }
    }

    fn rank(&self) -> (u8, usize) {
        match self {
            Predicate::CategoricalEq { feature, .. } => (0, *feature),
            Predicate::Interval(iv) => (0, iv.feature),
            Predicate::Linear(lc) => (1, lc.terms[0].0),
        }
    }
}

impl Eq for Predicate {}

impl PartialOrd for Predicate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Predicate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank()).then_with(|| match (self, other) {
            (Predicate::CategoricalEq { value: a, .. }, Predicate::CategoricalEq { value: b, .. }) => a.cmp(b),
            (Predicate::Interval(a), Predicate::Interval(b)) => a
                .lower
                .total_cmp(&b.lower)
                .then(a.lower_closed.cmp(&b.lower_closed))
                .then(a.upper.total_cmp(&b.upper))
                .then(a.upper_closed.cmp(&b.upper_closed)),
            (Predicate::Linear(a), Predicate::Linear(b)) => {
                for (x, y) in a.terms.iter().zip(&b.terms) {
                    let c = x.0.cmp(&y.0).then(x.1.total_cmp(&y.1));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                a.terms
                    .len()
                    .cmp(&b.terms.len())
                    .then(a.relation.cmp(&b.relation))
                    .then(a.threshold.total_cmp(&b.threshold))
            }
            (Predicate::CategoricalEq { .. }, _) => Ordering::Less,
            (_, Predicate::CategoricalEq { .. }) => Ordering::Greater,
            (Predicate::Interval(_), _) => Ordering::Less,
            (_, Predicate::Interval(_)) => Ordering::Greater,
        })
    }
}

impl std::hash::Hash for Predicate {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            Predicate::CategoricalEq { feature, value } => {
                state.write_u8(0);
                state.write_usize(*feature);
                state.write_u32(*value);
            }
            Predicate::Interval(iv) => {
                state.write_u8(1);
                state.write_usize(iv.feature);
                state.write_u64(iv.lower.to_bits());
                state.write_u64(iv.upper.to_bits());
                state.write_u8(iv.lower_closed as u8 | (iv.upper_closed as u8) << 1);
            }
            Predicate::Linear(lc) => {
                state.write_u8(2);
                for &(f, c) in &lc.terms {
                    state.write_usize(f);
                    state.write_u64(c.to_bits());
                }
                lc.relation.hash(state);
                state.write_u64(lc.threshold.to_bits());
            }
        }
    }
}

/// Conjunction of predicates in canonical order: single-feature predicates
/// by schema position, then linear constraints. The empty premise is true.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Premise {
    predicates: Vec<Predicate>,
}

impl Premise {
    pub fn empty() -> Self {
        Premise::default()
    }

    /// Validates predicates against the schema, intersects intervals on the
    /// same feature and deduplicates. Conflicting categorical equalities or
    /// an empty interval intersection make the premise unsatisfiable, which
    /// is rejected.
    pub fn new(schema: &FeatureSchema, predicates: Vec<Predicate>) -> Result<Self> {
        let mut cats: Vec<Option<u32>> = vec![None; schema.len()];
        let mut ivs: Vec<Option<Interval>> = vec![None; schema.len()];
        let mut linear: Vec<LinearConstraint> = Vec::new();
        for p in predicates {
            for f in p.features() {
                if f >= schema.len() {
                    return Err(Error::Schema(format!("feature index {f} out of range")));
                }
            }
            match p {
                Predicate::CategoricalEq { feature, value } => {
                    match &schema.feature(feature).kind {
                        FeatureKind::Categorical { values } if (value as usize) < values.len() => {}
                        FeatureKind::Categorical { .. } => {
                            return Err(Error::Premise(format!(
                                "category {value} out of range for `{}`",
                                schema.feature(feature).name
                            )))
                        }
                        FeatureKind::Continuous { .. } => {
                            return Err(Error::Premise(format!(
                                "`{}` is continuous, equality needs a categorical feature",
                                schema.feature(feature).name
                            )))
                        }
                    }
                    match cats[feature] {
                        Some(v) if v != value => {
                            return Err(Error::Premise(format!(
                                "conflicting values for `{}`",
                                schema.feature(feature).name
                            )))
                        }
                        _ => cats[feature] = Some(value),
                    }
                }
                Predicate::Interval(iv) => {
                    if schema.feature(iv.feature).is_categorical() {
                        return Err(Error::Premise(format!(
                            "`{}` is categorical, intervals need a continuous feature",
                            schema.feature(iv.feature).name
                        )));
                    }
                    let merged = match ivs[iv.feature] {
                        Some(prev) => prev.intersect(&iv).ok_or_else(|| {
                            Error::Premise(format!(
                                "empty interval intersection on `{}`",
                                schema.feature(iv.feature).name
                            ))
                        })?,
                        None => iv,
                    };
                    ivs[iv.feature] = Some(merged);
                }
                Predicate::Linear(lc) => {
                    if let Some(&(f, _)) = lc.terms.iter().find(|(f, _)| schema.feature(*f).is_categorical()) {
                        return Err(Error::Premise(format!(
                            "linear constraint on categorical `{}`",
                            schema.feature(f).name
                        )));
                    }
                    linear.push(lc);
                }
            }
        }
        let mut out = Vec::new();
        for f in 0..schema.len() {
            if let Some(v) = cats[f] {
                out.push(Predicate::eq(f, v));
            }
            if let Some(iv) = ivs[f] {
                if !iv.is_unbounded() {
                    out.push(Predicate::Interval(iv));
                }
            }
        }
        let mut lin: Vec<Predicate> = linear.into_iter().map(Predicate::Linear).collect();
        lin.sort();
        lin.dedup();
        out.extend(lin);
        Ok(Premise { predicates: out })
    }

    /// Sorts already-consistent predicates into canonical order. Callers
    /// guarantee at most one predicate per feature.
    pub(crate) fn from_consistent(mut predicates: Vec<Predicate>) -> Self {
        predicates.sort();
        predicates.dedup();
        Premise { predicates }
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// Coverage test without schema validation; see [`covers`].
    pub fn matches(&self, record: &Record) -> bool {
        self.predicates.iter().all(|p| p.holds(record))
    }

    pub fn interval_on(&self, feature: usize) -> Option<&Interval> {
        self.predicates.iter().find_map(|p| match p {
            Predicate::Interval(iv) if iv.feature == feature => Some(iv),
            _ => None,
        })
    }

    pub fn category_on(&self, feature: usize) -> Option<u32> {
        self.predicates.iter().find_map(|p| match p {
            Predicate::CategoricalEq { feature: f, value } if *f == feature => Some(*value),
            _ => None,
        })
    }

    pub fn linear(&self) -> impl Iterator<Item = &LinearConstraint> {
        self.predicates.iter().filter_map(|p| match p {
            Predicate::Linear(lc) => Some(lc),
            _ => None,
        })
    }

    /// Copy without the predicate at `index`.
    pub fn without(&self, index: usize) -> Premise {
        let mut predicates = self.predicates.clone();
        predicates.remove(index);
        Premise { predicates }
    }

    /// Checks every referenced feature exists with a matching kind.
    pub fn check(&self, schema: &FeatureSchema) -> Result<()> {
        Premise::new(schema, self.predicates.clone()).map(|_| ())
    }
}

/// Checked coverage: validates the premise and the record against `schema`.
pub fn covers(premise: &Premise, schema: &FeatureSchema, record: &Record) -> Result<bool> {
    premise.check(schema)?;
    schema.check(record)?;
    Ok(premise.matches(record))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub premise: Premise,
    pub consequent: Label,
}

impl Rule {
    pub fn new(premise: Premise, consequent: Label) -> Result<Self> {
        if consequent > 1 {
            return Err(Error::Premise(format!("consequent {consequent} is not binary")));
        }
        Ok(Rule { premise, consequent })
    }

    pub fn covers(&self, record: &Record) -> bool {
        self.premise.matches(record)
    }

    pub fn len(&self) -> usize {
        self.premise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.premise.is_empty()
    }

    pub fn display<'a>(&'a self, schema: &'a FeatureSchema) -> RuleDisplay<'a> {
        RuleDisplay { rule: self, schema }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Feature;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::continuous("CreditBalance", 0.0, 1000.0),
            Feature::continuous("SavingBalance", 0.0, 1000.0),
            Feature::categorical("housing", &["own", "rent"]),
        ])
        .unwrap()
    }

    fn rec(c: f64, s: f64, h: u32) -> Record {
        Record::new(vec![Value::Num(c), Value::Num(s), Value::Cat(h)])
    }

    #[test]
    fn empty_premise_covers_everything() {
        let s = schema();
        assert!(covers(&Premise::empty(), &s, &rec(1.0, 2.0, 0)).unwrap());
    }

    #[test]
    fn linear_constraint_strictness() {
        let s = schema();
        let lc = LinearConstraint::new(vec![(0, 1.0), (1, 1.0)], Relation::Lt, 200.0).unwrap();
        let p = Premise::new(&s, vec![Predicate::Linear(lc)]).unwrap();
        assert!(!covers(&p, &s, &rec(150.0, 100.0, 0)).unwrap());
        assert!(covers(&p, &s, &rec(50.0, 100.0, 0)).unwrap());
        // boundary: 200 < 200 is false, exactly
        assert!(!p.matches(&rec(100.0, 100.0, 0)));
    }

    #[test]
    fn intervals_on_same_feature_are_intersected() {
        let s = schema();
        let p = Premise::new(
            &s,
            vec![
                Predicate::Interval(Interval::at_most(0, 500.0)),
                Predicate::Interval(Interval::above(0, 100.0)),
            ],
        )
        .unwrap();
        assert_eq!(p.len(), 1);
        let iv = p.interval_on(0).unwrap();
        assert_eq!((iv.lower, iv.upper, iv.lower_closed, iv.upper_closed), (100.0, 500.0, false, true));
    }

    #[test]
    fn contradictions_are_rejected() {
        let s = schema();
        assert!(Premise::new(&s, vec![Predicate::eq(2, 0), Predicate::eq(2, 1)]).is_err());
        assert!(Premise::new(
            &s,
            vec![
                Predicate::Interval(Interval::below(0, 10.0)),
                Predicate::Interval(Interval::at_least(0, 10.0))
            ]
        )
        .is_err());
        assert!(Premise::new(&s, vec![Predicate::Interval(Interval::at_most(2, 1.0))]).is_err());
        assert!(Premise::new(&s, vec![Predicate::eq(0, 0)]).is_err());
    }

    #[test]
    fn interval_validation() {
        assert!(Interval::new(0, f64::NEG_INFINITY, f64::INFINITY, false, false).is_err());
        assert!(Interval::new(0, 2.0, 1.0, true, true).is_err());
        assert!(LinearConstraint::new(vec![(0, 0.0)], Relation::Le, 1.0).is_err());
    }

    #[test]
    fn covers_reports_schema_mismatch() {
        let s = schema();
        let other = FeatureSchema::new(vec![Feature::continuous("x", 0.0, 1.0)]).unwrap();
        let p = Premise::new(&s, vec![Predicate::eq(2, 0)]).unwrap();
        assert!(covers(&p, &other, &Record::new(vec![Value::Num(0.5)])).is_err());
    }

    #[test]
    fn canonical_order_ignores_input_order() {
        let s = schema();
        let a = Premise::new(&s, vec![Predicate::eq(2, 1), Predicate::Interval(Interval::at_most(0, 3.0))]).unwrap();
        let b = Premise::new(&s, vec![Predicate::Interval(Interval::at_most(0, 3.0)), Predicate::eq(2, 1)]).unwrap();
        assert_eq!(a, b);
    }
}
