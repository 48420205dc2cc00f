//! Local surrogate trees and the rules read off them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blackbox::Oracle;
use crate::data::{FeatureKind, FeatureSchema, Label, Record, Value};
use crate::error::Result;
use crate::neighborhood::{self, Neighborhood, NeighborhoodConfig, NeighborhoodWarning};
use crate::rule::{format_rule, Interval, Predicate, Premise, Rule};
use crate::tree::{Condition, DecisionTree, SplitTest, TreeParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SurrogateParams {
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams { min_leaf: 5, max_depth: 8 }
    }
}

/// CART on the neighborhood with every feature considered at every split.
pub fn fit_tree(n: &Neighborhood, schema: &FeatureSchema, params: &SurrogateParams) -> DecisionTree {
    let idx: Vec<usize> = (0..n.len()).collect();
    let tp = TreeParams { max_depth: params.max_depth, min_leaf: params.min_leaf, features_per_split: None };
    // no feature sampling, so the generator is never drawn from
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    DecisionTree::fit(schema, &n.records, &n.labels, &idx, &tp, &mut unused)
}

/// Folds path conditions into a premise. Continuous tests become one
/// interval per feature and `= c` tests are kept. Negative categorical tests
/// (`!= c`) are handled by `negatives`: `None` drops them, `Some(x)` pins the
/// feature to `x`'s value when it passes them, or else to the first
/// category that does.
fn fold_conditions(schema: &FeatureSchema, conds: &[Condition], negatives: Option<&Record>) -> Option<Premise> {
    let m = schema.len();
    let mut ivs: Vec<Interval> = (0..m).map(Interval::unbounded).collect();
    let mut eq: Vec<Option<u32>> = vec![None; m];
    let mut excluded: Vec<Vec<u32>> = vec![Vec::new(); m];
    for c in conds {
        match (c.test, c.satisfied) {
            (SplitTest::Threshold(t), true) => ivs[c.feature] = ivs[c.feature].intersect(&Interval::at_most(c.feature, t))?,
            (SplitTest::Threshold(t), false) => ivs[c.feature] = ivs[c.feature].intersect(&Interval::above(c.feature, t))?,
            (SplitTest::Category(v), true) => eq[c.feature] = Some(v),
            (SplitTest::Category(v), false) => excluded[c.feature].push(v),
        }
    }
    let mut preds = Vec::new();
    for f in 0..m {
        if !ivs[f].is_unbounded() {
            preds.push(Predicate::Interval(ivs[f]));
        }
        if let Some(v) = eq[f] {
            preds.push(Predicate::eq(f, v));
        } else if !excluded[f].is_empty() {
            if let Some(x) = negatives {
                let own = x.get(f).as_cat();
                let pick = if !excluded[f].contains(&own) {
                    own
                } else {
                    let card = match &schema.feature(f).kind {
                        FeatureKind::Categorical { values } => values.len() as u32,
                        FeatureKind::Continuous { .. } => unreachable!(),
                    };
                    (0..card).find(|v| !excluded[f].contains(v))?
                };
                preds.push(Predicate::eq(f, pick));
            }
        }
    }
    Some(Premise::from_consistent(preds))
}

/// Conjunction of the tests along `x`'s root-to-leaf path.
pub fn extract_rule(tree: &DecisionTree, schema: &FeatureSchema, x: &Record) -> Rule {
    let leaf = tree.leaf_of(x);
    let (_, conds) = tree.paths().into_iter().find(|(l, _)| *l == leaf).expect("leaf is on some path");
    let premise = fold_conditions(schema, &conds, None).expect("x satisfies its own path");
    Rule { premise, consequent: tree.leaf_class(leaf) }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Counterfactual {
    pub rule: Rule,
    /// Number of path tests `x` fails.
    pub changes: usize,
}

/// Opposite-label leaves reachable with the fewest failed path tests.
pub fn extract_counterfactuals(tree: &DecisionTree, schema: &FeatureSchema, x: &Record, label: Label) -> Vec<Counterfactual> {
    let mut all: Vec<Counterfactual> = Vec::new();
    for (leaf, conds) in tree.paths() {
        let class = tree.leaf_class(leaf);
        if class == label {
            continue;
        }
        let changes = conds.iter().filter(|c| !c.holds(x)).count();
        if let Some(premise) = fold_conditions(schema, &conds, Some(x)) {
            all.push(Counterfactual { rule: Rule { premise, consequent: class }, changes });
        }
    }
    let Some(min) = all.iter().map(|c| c.changes).min() else {
        return Vec::new();
    };
    let mut best: Vec<Counterfactual> = all.into_iter().filter(|c| c.changes == min).collect();
    best.sort_by(|a, b| a.rule.cmp(&b.rule));
    best.dedup_by(|a, b| a.rule == b.rule);
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub instance: Record,
    /// Black-box label of the instance.
    pub label: Label,
    pub rule: Rule,
    pub counterfactuals: Vec<Counterfactual>,
    /// Agreement of the surrogate with the black box on the neighborhood.
    pub fidelity: f64,
    pub neighborhood_size: usize,
    /// The surrogate predicts a different class than the black box at `x`.
    pub unfaithful_at_x: bool,
    pub locally_constant: bool,
    pub surrogate: DecisionTree,
}

impl Explanation {
    pub fn flags(&self) -> Vec<&'static str> {
        let mut f = Vec::new();
        if self.unfaithful_at_x {
            f.push("unfaithful-at-x");
        }
        if self.locally_constant {
            f.push("locally-constant");
        }
        f
    }

    /// Factual rule, `CF[k]` counterfactual lines, then `# key=value` trailers.
    pub fn dump(&self, schema: &FeatureSchema) -> String {
        let mut out = format_rule(&self.rule, schema);
        out.push('\n');
        for cf in &self.counterfactuals {
            out.push_str(&format!("CF[{}] {}\n", cf.changes, format_rule(&cf.rule, schema)));
        }
        let flags = self.flags();
        out.push_str(&format!("# label={}\n", schema.class_name(self.label)));
        out.push_str(&format!("# fidelity={}\n", self.fidelity));
        out.push_str(&format!("# neighborhood={}\n", self.neighborhood_size));
        out.push_str(&format!("# flags={}\n", if flags.is_empty() { "none".to_string() } else { flags.join(",") }));
        out
    }
}

/// Surrogate fitted to an existing neighborhood.
pub fn explain_neighborhood(n: &Neighborhood, schema: &FeatureSchema, params: &SurrogateParams) -> Explanation {
    let x = &n.origin;
    let tree = fit_tree(n, schema, params);
    let agree = n.records.iter().zip(&n.labels).filter(|(r, &l)| tree.predict(r) == l).count();
    let rule = extract_rule(&tree, schema, x);
    let counterfactuals = extract_counterfactuals(&tree, schema, x, n.origin_label);
    Explanation {
        instance: x.clone(),
        label: n.origin_label,
        unfaithful_at_x: rule.consequent != n.origin_label,
        rule,
        counterfactuals,
        fidelity: agree as f64 / n.len().max(1) as f64,
        neighborhood_size: n.len(),
        locally_constant: n.warning == Some(NeighborhoodWarning::LocallyConstant),
        surrogate: tree,
    }
}

/// Full local pipeline: query the label, build the neighborhood, fit the
/// surrogate, read off the factual and counterfactual rules.
pub fn explain(
    oracle: &dyn Oracle,
    schema: &FeatureSchema,
    x: &Record,
    cfg: &NeighborhoodConfig,
    params: &SurrogateParams,
) -> Result<Explanation> {
    let n = neighborhood::generate(x, schema, cfg, oracle)?;
    Ok(explain_neighborhood(&n, schema, params))
}

/// Draws a record uniformly from the region a premise describes, clipped to
/// the schema's ranges. `None` if the region misses the schema's domain or
/// holds a linear constraint.
pub fn sample_in_premise<R: rand::Rng>(premise: &Premise, schema: &FeatureSchema, rng: &mut R) -> Option<Record> {
    if premise.linear().next().is_some() {
        return None;
    }
    let mut values = Vec::with_capacity(schema.len());
    for (i, f) in schema.features().iter().enumerate() {
        let v = match &f.kind {
            FeatureKind::Categorical { values } => match premise.category_on(i) {
                Some(c) => Value::Cat(c),
                None => Value::Cat(rng.gen_range(0..values.len()) as u32),
            },
            FeatureKind::Continuous { min, max } => {
                let (mut lo, mut hi) = (*min, *max);
                if let Some(iv) = premise.interval_on(i) {
                    lo = lo.max(iv.lower);
                    hi = hi.min(iv.upper);
                }
                if lo > hi {
                    return None;
                }
                let mut x = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                // open bounds: nudge off the excluded endpoint
                if let Some(iv) = premise.interval_on(i) {
                    for _ in 0..64 {
                        if iv.contains_value(x) {
                            break;
                        }
                        x = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                    }
                    if !iv.contains_value(x) {
                        return None;
                    }
                }
                Value::Num(x)
            }
        };
        values.push(v);
    }
    Some(Record::new(values))
}
