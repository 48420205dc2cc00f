//! Operators over rules: syntactic subsumption, pairwise merge, affine
//! generalization into parameterized rules, and composition with background
//! knowledge.

use std::fmt;

use crate::data::{format_num, FeatureSchema, Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::rule::{format_premise, Interval, LinearConstraint, Predicate, Premise, Relation, Rule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubsumptionMethod {
    Syntactic,
    Undecided,
}

/// Outcome of a subsumption check. `subsumes` is only ever true when a
/// syntactic witness was found; absence of a witness is `Undecided`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubsumptionResult {
    pub subsumes: bool,
    pub method: SubsumptionMethod,
}

impl SubsumptionResult {
    const YES: Self = SubsumptionResult { subsumes: true, method: SubsumptionMethod::Syntactic };
    const UNKNOWN: Self = SubsumptionResult { subsumes: false, method: SubsumptionMethod::Undecided };
}

/// Does every record covered by `specific` also satisfy `general`?
/// Sound but incomplete.
pub fn subsumes(schema: &FeatureSchema, general: &Premise, specific: &Premise) -> Result<SubsumptionResult> {
    general.check(schema)?;
    specific.check(schema)?;
    let witnessed = general.predicates().iter().all(|g| implied_by(g, specific));
    Ok(if witnessed { SubsumptionResult::YES } else { SubsumptionResult::UNKNOWN })
}

fn implied_by(general: &Predicate, specific: &Premise) -> bool {
    match general {
        Predicate::CategoricalEq { feature, value } => specific.category_on(*feature) == Some(*value),
        Predicate::Interval(g) => specific.interval_on(g.feature).is_some_and(|s| g.contains(s)),
        Predicate::Linear(g) => specific.linear().any(|s| linear_implies(s, g)),
    }
}

/// `s => g` when s's coefficients are a positive multiple of g's and the
/// thresholds are ordered the right way.
fn linear_implies(s: &LinearConstraint, g: &LinearConstraint) -> bool {
    let (st, gt) = (s.terms(), g.terms());
    if st.len() != gt.len() || s.relation.is_upper() != g.relation.is_upper() {
        return false;
    }
    let (s0, g0) = (st[0].1, gt[0].1);
    // lambda = s0 / g0 must be positive
    if (s0 > 0.0) != (g0 > 0.0) {
        return false;
    }
    let proportional = st
        .iter()
        .zip(gt)
        .all(|(a, b)| a.0 == b.0 && a.1 * g0 == b.1 * s0);
    if !proportional {
        return false;
    }
    // s: L rel_s ts/lambda, compare ts*g0/s0 against tg without dividing
    let (lhs, rhs) = if s0 > 0.0 {
        (s.threshold * g0, g.threshold * s0)
    } else {
        (g.threshold * s0, s.threshold * g0)
    };
    // lhs ~ scaled bound of s, rhs ~ scaled bound of g (same orientation)
    let s_strict = matches!(s.relation, Relation::Lt | Relation::Gt);
    let g_strict = matches!(g.relation, Relation::Lt | Relation::Gt);
    let tight_ok = !g_strict || s_strict;
    if s.relation.is_upper() {
        lhs < rhs || (lhs == rhs && tight_ok)
    } else {
        lhs > rhs || (lhs == rhs && tight_ok)
    }
}

/// Minimal conjunctive generalization of two same-class rules: equal
/// categorical tests are kept, interval pairs become their hull, identical
/// linear constraints are kept, everything else is dropped.
pub fn merge(r1: &Rule, r2: &Rule) -> Result<Rule> {
    if r1.consequent != r2.consequent {
        return Err(Error::ConsequentMismatch(r1.consequent, r2.consequent));
    }
    if r1 == r2 {
        return Ok(r1.clone());
    }
    let mut out = Vec::new();
    for p in r1.premise.predicates() {
        match p {
            Predicate::CategoricalEq { feature, value } => {
                if r2.premise.category_on(*feature) == Some(*value) {
                    out.push(p.clone());
                }
            }
            Predicate::Interval(a) => {
                if let Some(b) = r2.premise.interval_on(a.feature) {
                    let h = a.hull(b);
                    if !h.is_unbounded() {
                        out.push(Predicate::Interval(h));
                    }
                }
            }
            Predicate::Linear(_) => {
                if r2.premise.predicates().contains(p) {
                    out.push(p.clone());
                }
            }
        }
    }
    Rule::new(Premise::from_consistent(out), r1.consequent)
}

/// `base, f <= a, g <= sum - a` for `a` in `[a_lo, a_hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamRule {
    pub base: Premise,
    pub param_feature: usize,
    pub dual_feature: usize,
    pub sum: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub consequent: Label,
}

impl ParamRule {
    pub fn instantiate(&self, a: f64) -> Result<Rule> {
        if !(self.a_lo <= a && a <= self.a_hi) {
            return Err(Error::ParamOutOfRange { value: a, lo: self.a_lo, hi: self.a_hi });
        }
        let mut preds = self.base.predicates().to_vec();
        preds.push(Predicate::Interval(Interval::at_most(self.param_feature, a)));
        preds.push(Predicate::Interval(Interval::at_most(self.dual_feature, self.sum - a)));
        Rule::new(Premise::from_consistent(preds), self.consequent)
    }

    pub fn display<'a>(&'a self, schema: &'a FeatureSchema) -> ParamRuleDisplay<'a> {
        ParamRuleDisplay { rule: self, schema }
    }
}

pub fn param_instantiate(p: &ParamRule, a: f64) -> Result<Rule> {
    p.instantiate(a)
}

pub struct ParamRuleDisplay<'a> {
    rule: &'a ParamRule,
    schema: &'a FeatureSchema,
}

impl fmt::Display for ParamRuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.rule;
        let s = self.schema;
        let base = format_premise(&p.base, s);
        if !base.is_empty() {
            write!(f, "{base}, ")?;
        }
        write!(
            f,
            "{} <= a, {} <= {}-a, {} <= a <= {} -> {} = {}",
            s.feature(p.param_feature).name,
            s.feature(p.dual_feature).name,
            format_num(p.sum),
            format_num(p.a_lo),
            format_num(p.a_hi),
            s.target(),
            s.class_name(p.consequent)
        )
    }
}

/// Upper-bound-only threshold (`feature <= t`), if that is the predicate.
fn upper_bound(p: &Predicate) -> Option<(usize, f64)> {
    match p {
        Predicate::Interval(iv) if iv.lower == f64::NEG_INFINITY && iv.upper_closed => Some((iv.feature, iv.upper)),
        _ => None,
    }
}

/// Folds two rules that trade off two upper bounds with a constant sum into
/// one parameterized rule. Fails when the rules do not have exactly that
/// shape, in which case [`merge`] is the fallback.
pub fn affine_generalize(r1: &Rule, r2: &Rule) -> Result<ParamRule> {
    let not_affine = |m: &str| Error::NotAffine(m.to_string());
    if r1.consequent != r2.consequent {
        return Err(not_affine("consequents differ"));
    }
    let p1 = r1.premise.predicates();
    let p2 = r2.premise.predicates();
    let only_in = |a: &[Predicate], b: &[Predicate]| -> Vec<Predicate> {
        a.iter().filter(|p| !b.contains(p)).cloned().collect()
    };
    let d1 = only_in(p1, p2);
    let d2 = only_in(p2, p1);

    let (f, g) = if d1.is_empty() && d2.is_empty() {
        let uppers: Vec<usize> = p1.iter().filter_map(upper_bound).map(|(f, _)| f).collect();
        if uppers.len() < 2 {
            return Err(not_affine("fewer than two upper-bound predicates"));
        }
        (uppers[0], uppers[1])
    } else {
        let mut feats: Vec<usize> = Vec::new();
        for p in d1.iter().chain(&d2) {
            let (feat, _) = upper_bound(p).ok_or_else(|| not_affine("differing predicate is not an upper bound"))?;
            if !feats.contains(&feat) {
                feats.push(feat);
            }
        }
        if feats.len() != 2 || d1.len() != 2 || d2.len() != 2 {
            return Err(not_affine("rules must differ on exactly two upper-bounded features"));
        }
        feats.sort_unstable();
        (feats[0], feats[1])
    };

    let bound = |ps: &[Predicate], feat: usize| -> Result<f64> {
        ps.iter()
            .filter_map(upper_bound)
            .find(|&(x, _)| x == feat)
            .map(|(_, t)| t)
            .ok_or_else(|| not_affine("missing upper bound"))
    };
    let (tf1, tg1) = (bound(p1, f)?, bound(p1, g)?);
    let (tf2, tg2) = (bound(p2, f)?, bound(p2, g)?);
    let sum = tf1 + tg1;
    if tf2 + tg2 != sum {
        return Err(not_affine("bound sums differ"));
    }
    if sum - tf1 != tg1 || sum - tf2 != tg2 {
        return Err(not_affine("bounds are not exactly representable as sum - a"));
    }
    let base: Vec<Predicate> = p1.iter().filter(|p| p.feature() != Some(f) && p.feature() != Some(g)).cloned().collect();
    Ok(ParamRule {
        base: Premise::from_consistent(base),
        param_feature: f,
        dual_feature: g,
        sum,
        a_lo: tf1.min(tf2),
        a_hi: tf1.max(tf2),
        consequent: r1.consequent,
    })
}

/// Background fact `premise -> implied`, e.g. `ZIP = c -> MinorityNeighborhood = yes`.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundRule {
    pub premise: Premise,
    pub implied: Premise,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Composition {
    /// `implied -> decision class`
    pub rule: Rule,
    /// Lower bound on the composed rule's confidence, `None` when the
    /// implied premise covers nothing.
    pub confidence_lower_bound: Option<f64>,
    pub n_a: usize,
    pub n_ab: usize,
    pub n_ac: usize,
    pub n_c: usize,
}

/// Set-theoretic confidence bound for `C -> B` from counts: since
/// `|C and B| >= |A and B| - |A minus C|`, conf >= (n_ab - (n_a - n_ac)) / n_c.
pub fn composition_bound(n_a: usize, n_ab: usize, n_ac: usize, n_c: usize) -> Option<f64> {
    if n_c == 0 {
        return None;
    }
    let witnessed = n_ab as f64 - (n_a as f64 - n_ac as f64);
    Some((witnessed / n_c as f64).max(0.0))
}

/// Maps `A -> B` plus background `A -> C` into `C -> B` with a confidence
/// lower bound counted over `data`.
pub fn compose_background(decision: &Rule, background: &BackgroundRule, data: &LabeledDataset) -> Result<Composition> {
    if decision.premise != background.premise {
        return Err(Error::Premise("decision and background rules must share their premise".into()));
    }
    background.implied.check(data.schema())?;
    let a = &decision.premise;
    let c = &background.implied;
    let (mut n_a, mut n_ab, mut n_ac, mut n_c) = (0, 0, 0, 0);
    for (r, &l) in data.records().iter().zip(data.labels()) {
        let in_a = a.matches(r);
        let in_c = c.matches(r);
        n_a += in_a as usize;
        n_ab += (in_a && l == decision.consequent) as usize;
        n_ac += (in_a && in_c) as usize;
        n_c += in_c as usize;
    }
    Ok(Composition {
        rule: Rule::new(c.clone(), decision.consequent)?,
        confidence_lower_bound: composition_bound(n_a, n_ab, n_ac, n_c),
        n_a,
        n_ab,
        n_ac,
        n_c,
    })
}
