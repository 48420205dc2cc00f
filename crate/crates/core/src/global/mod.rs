//! From local explanations to a compact global rule set.
//!
//! Every training record is explained locally, duplicate factual rules are
//! dropped, and the survivors are merged bottom-up in a dendrogram. Each
//! horizontal cut of the dendrogram is a candidate rule set; the one with
//! the best BIC score as a voting classifier of the black-box labels wins.

mod dendrogram;
mod score;

use std::collections::HashMap;

use fixedbitset::FixedBitSet;

use crate::blackbox::Oracle;
use crate::data::{format_num, FeatureSchema, Label, LabeledDataset, Record};
use crate::error::Result;
use crate::neighborhood::NeighborhoodConfig;
use crate::rng::derive_seed;
use crate::rule::{format_rule, Rule};
use crate::surrogate::{explain, Explanation, SurrogateParams};

pub use dendrogram::{build_dendrogram, DendroNode, Dendrogram, Merge};
pub use score::{cpar_predict, fidelity, laplace_accuracy, q_bic, TOP_K};

use score::{q_from, Scorer, Voter};

/// Records covered by `rule`, as a bitset over `records`.
pub fn cover_of(rule: &Rule, records: &[Record]) -> FixedBitSet {
    let mut c = FixedBitSet::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if rule.covers(r) {
            c.insert(i);
        }
    }
    c
}

/// `1 - |a ∩ b| / |a ∪ b|`, and 1 when both sets are empty.
pub fn jaccard(a: &FixedBitSet, b: &FixedBitSet) -> f64 {
    let union = a.union_count(b);
    if union == 0 {
        1.0
    } else {
        1.0 - a.intersection_count(b) as f64 / union as f64
    }
}

/// Jaccard distance between the records two rules cover.
pub fn jaccard_distance(r1: &Rule, r2: &Rule, data: &LabeledDataset) -> f64 {
    jaccard(&cover_of(r1, data.records()), &cover_of(r2, data.records()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalConfig {
    pub neighborhood: NeighborhoodConfig,
    pub surrogate: SurrogateParams,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

#[derive(Clone, Debug)]
pub struct LocalCollection {
    /// One per record, in dataset order.
    pub explanations: Vec<Explanation>,
    /// Distinct factual rules of the unflagged explanations, sorted.
    pub rules: Vec<Rule>,
    /// Explanations left out because they carry a flag: the surrogate
    /// disagreed at the instance, or the black box never changed its answer
    /// in the neighborhood.
    pub flagged: usize,
}

/// Explains every record. Record `i` uses its own seed derived from the
/// configured one, so results do not depend on scheduling.
pub fn collect_local(oracle: &dyn Oracle, data: &LabeledDataset, cfg: &LocalConfig) -> Result<LocalCollection> {
    let schema = data.schema().as_ref();
    let one = |i: usize| -> Result<Explanation> {
        let mut n = cfg.neighborhood;
        n.seed = instance_seed(cfg.neighborhood.seed, i);
        explain(oracle, schema, &data.records()[i], &n, &cfg.surrogate)
    };

    #[cfg(feature = "parallel")]
    let explanations: Vec<Explanation> = {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..data.len()).into_par_iter().map(one).collect::<Result<Vec<_>>>())?
    };
    #[cfg(not(feature = "parallel"))]
    let explanations: Vec<Explanation> = (0..data.len()).map(one).collect::<Result<Vec<_>>>()?;

    let flagged = explanations.iter().filter(|e| !e.flags().is_empty()).count();
    Ok(LocalCollection { rules: dedupe_rules(&explanations), explanations, flagged })
}

/// Seed used for the explanation of record `index`.
pub fn instance_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, "local", index as u64)
}

/// Distinct factual rules of the unflagged explanations in canonical order.
/// When every explanation is flagged but some are merely locally constant,
/// those are used instead: a black box that never changes its answer is
/// best described by its constant rule.
pub fn dedupe_rules(explanations: &[Explanation]) -> Vec<Rule> {
    let mut rules: Vec<Rule> =
        explanations.iter().filter(|e| e.flags().is_empty()).map(|e| e.rule.clone()).collect();
    if rules.is_empty() {
        rules = explanations.iter().filter(|e| !e.unfaithful_at_x).map(|e| e.rule.clone()).collect();
    }
    rules.sort();
    rules.dedup();
    rules
}

/// Score of one horizontal cut.
#[derive(Clone, Debug, PartialEq)]
pub struct CutCandidate {
    /// `-inf` for the all-leaves cut.
    pub height: f64,
    pub nodes: Vec<usize>,
    pub q: f64,
    pub fidelity: f64,
}

/// Scores the all-leaves cut and the cut at every distinct merge height,
/// in ascending height order. The last candidate is the all-roots cut.
pub fn score_cuts(d: &Dendrogram, relabeled: &LabeledDataset) -> Vec<CutCandidate> {
    let labels = relabeled.labels();
    let voters: Vec<Voter> =
        d.nodes().iter().map(|n| Voter::new(n.cover.clone(), n.rule.consequent, labels)).collect();
    // identical rules in one cut vote once
    let mut first: HashMap<&Rule, usize> = HashMap::new();
    let canon: Vec<usize> = d.nodes().iter().enumerate().map(|(i, n)| *first.entry(&n.rule).or_insert(i)).collect();
    let scorer = Scorer::new(labels, relabeled.majority_label());

    let mut heights = vec![f64::NEG_INFINITY];
    heights.extend(d.cut_heights());
    let eval = |h: f64| -> CutCandidate {
        let nodes = d.cut(h);
        let mut ids: Vec<usize> = nodes.iter().map(|&i| canon[i]).collect();
        ids.sort_unstable();
        ids.dedup();
        let vs: Vec<&Voter> = ids.iter().map(|&i| &voters[i]).collect();
        let s = scorer.score(&vs);
        CutCandidate { height: h, q: q_from(nodes.len(), relabeled.len(), s.log_likelihood), fidelity: s.fidelity, nodes }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        heights.par_iter().map(|&h| eval(h)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    heights.iter().map(|&h| eval(h)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalExplanation {
    pub rules: Vec<Rule>,
    /// Dendrogram nodes the rules come from.
    pub nodes: Vec<usize>,
    pub height: f64,
    pub q: f64,
    pub fidelity: f64,
    pub default_class: Label,
}

impl GlobalExplanation {
    /// Rule count and total predicate count.
    pub fn complexity(&self) -> (usize, usize) {
        (self.rules.len(), self.rules.iter().map(Rule::len).sum())
    }

    /// Rule text file with a `# q=.. fidelity=.. k=.. default=..` header.
    pub fn to_rule_file(&self, schema: &FeatureSchema) -> String {
        let mut out = format!(
            "# q={} fidelity={} k={} default={}\n",
            format_num(self.q),
            format_num(self.fidelity),
            self.rules.len(),
            schema.class_name(self.default_class)
        );
        for r in &self.rules {
            out.push_str(&format_rule(r, schema));
            out.push('\n');
        }
        out
    }

    pub fn predict(&self, record: &Record, relabeled: &LabeledDataset) -> Label {
        cpar_predict(&self.rules, record, self.default_class, relabeled)
    }
}

/// Picks the cut with the largest q; ties go to fewer rules, then the
/// lower cut.
pub fn select_cut(d: &Dendrogram, relabeled: &LabeledDataset) -> GlobalExplanation {
    let cands = score_cuts(d, relabeled);
    explanation_from(d, relabeled, &cands[choose(&cands)])
}

/// Index of the winning candidate.
pub fn choose(cands: &[CutCandidate]) -> usize {
    let mut best = 0;
    for (i, c) in cands.iter().enumerate().skip(1) {
        let b = &cands[best];
        if c.q > b.q || (c.q == b.q && c.nodes.len() < b.nodes.len()) {
            best = i;
        }
    }
    best
}

pub fn explanation_from(d: &Dendrogram, relabeled: &LabeledDataset, cand: &CutCandidate) -> GlobalExplanation {
    GlobalExplanation {
        rules: cand.nodes.iter().map(|&i| d.node(i).rule.clone()).collect(),
        nodes: cand.nodes.clone(),
        height: cand.height,
        q: cand.q,
        fidelity: cand.fidelity,
        default_class: relabeled.majority_label(),
    }
}

/// Dendrogram plus selected cut for a set of local rules.
pub fn globalize(rules: &[Rule], relabeled: &LabeledDataset) -> Result<(Dendrogram, GlobalExplanation)> {
    let d = build_dendrogram(rules, relabeled)?;
    let g = select_cut(&d, relabeled);
    Ok((d, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Feature, Value};
    use crate::rule::parse_rule;
    use std::sync::Arc;

    fn bits(n: usize, ones: &[usize]) -> FixedBitSet {
        let mut b = FixedBitSet::with_capacity(n);
        ones.iter().for_each(|&i| b.insert(i));
        b
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&bits(6, &[1, 2, 3]), &bits(6, &[2, 3, 4])), 0.5);
        assert_eq!(jaccard(&bits(6, &[1, 2]), &bits(6, &[1, 2])), 0.0);
        assert_eq!(jaccard(&bits(6, &[1]), &bits(6, &[2])), 1.0);
        assert_eq!(jaccard(&bits(6, &[]), &bits(6, &[])), 1.0);
    }

    fn line_data(n: usize) -> LabeledDataset {
        let s = Arc::new(FeatureSchema::new(vec![Feature::continuous("x", 0.0, 1.0)]).unwrap().with_target("y"));
        let recs: Vec<Record> = (0..n).map(|i| Record::new(vec![Value::Num(i as f64 / n as f64)])).collect();
        let labels = recs.iter().map(|r| (r.get(0).as_num() > 0.5) as Label).collect();
        LabeledDataset::new(s, recs, labels).unwrap()
    }

    fn rules(d: &LabeledDataset, texts: &[&str]) -> Vec<Rule> {
        texts.iter().map(|t| parse_rule(t, d.schema()).unwrap()).collect()
    }

    #[test]
    fn single_rule_dendrogram() {
        let d = line_data(10);
        let rs = rules(&d, &["x > 0.5 -> y = 1"]);
        let (dg, g) = globalize(&rs, &d).unwrap();
        assert_eq!(dg.merges(), 0);
        assert_eq!(dg.roots(), &[0]);
        assert_eq!(g.rules, rs);
    }

    #[test]
    fn closest_pair_merges_first() {
        // covers over x = 0.00..0.19: r1 = {0..9}, r2 = {0..11} (d = 1/6),
        // r3 = {15..19}; both distances to r3 are 1
        let d = line_data(20);
        let rs = rules(&d, &["x <= 0.45 -> y = 0", "x <= 0.55 -> y = 0", "x > 0.7 -> y = 0"]);
        let dg = build_dendrogram(&rs, &d).unwrap();
        let first = dg.node(3).merge.unwrap();
        assert_eq!((first.left, first.right), (0, 1));
        assert!((first.height - (1.0 - 10.0 / 12.0)).abs() < 1e-12);
        assert_eq!(dg.merges(), 2);
        assert_eq!(dg.node(4).merge.unwrap().height, 1.0);
        assert_eq!(dg.roots(), &[4]);
        assert_eq!(dg.cut(f64::NEG_INFINITY), vec![0, 1, 2]);
        assert_eq!(dg.cut(0.5), vec![3, 2]);
        assert_eq!(dg.cut(1.0), vec![4]);
    }

    #[test]
    fn equal_cover_merge_is_selected() {
        // the two class-1 rules cover the same records, so merging them
        // keeps the likelihood and drops a rule
        let d = line_data(20);
        let rs = rules(&d, &["x <= 0.5 -> y = 0", "x > 0.5 -> y = 1", "x >= 0.55 -> y = 1"]);
        let (dg, g) = globalize(&rs, &d).unwrap();
        assert_eq!(dg.node(3).merge.unwrap().height, 0.0);
        assert_eq!(g.height, 0.0);
        assert_eq!(g.rules.len(), 2);
        assert_eq!(g.fidelity, 1.0);
    }

    #[test]
    fn rule_file_header() {
        let d = line_data(20);
        let rs = rules(&d, &["x <= 0.5 -> y = 0", "x > 0.5 -> y = 1"]);
        let (_, g) = globalize(&rs, &d).unwrap();
        let text = g.to_rule_file(d.schema());
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# q="));
        assert!(text.contains(" k=2 default=0\n"));
        assert_eq!(crate::rule::parse_rules(&text, d.schema()).unwrap(), g.rules);
    }

    #[test]
    fn dot_export() {
        let d = line_data(20);
        let rs = rules(&d, &["x <= 0.45 -> y = 0", "x <= 0.55 -> y = 0"]);
        let dg = build_dendrogram(&rs, &d).unwrap();
        let dot = dg.to_dot(d.schema());
        assert!(dot.starts_with("digraph dendrogram {\n"));
        assert!(dot.contains("n2 [label=\"h="));
        assert!(dot.contains("n2 -> n0;\n  n2 -> n1;\n"));
    }
}
