//! CART classification trees with Gini impurity.
//!
//! Continuous splits test `value <= t` with `t` the midpoint between
//! consecutive distinct sorted values; categorical splits are one-vs-rest
//! (`value == c`). The left child always holds the records satisfying the
//! test. Ties in gain go to the lowest feature index, then the lowest
//! threshold or category.

use rand::seq::index::sample;
use rand::Rng;

use crate::data::{format_num, FeatureSchema, Label, Record, Value};
use crate::error::{Error, Result};

const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitTest {
    Threshold(f64),
    Category(u32),
}

impl SplitTest {
    pub fn passes(&self, v: Value) -> bool {
        match (*self, v) {
            (SplitTest::Threshold(t), Value::Num(x)) => x <= t,
            (SplitTest::Category(c), Value::Cat(x)) => x == c,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf { class: Label, counts: [usize; 2] },
    Split { feature: usize, test: SplitTest, left: usize, right: usize },
}

/// One step on a root-to-leaf path: the test at a node and which side was taken.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Condition {
    pub feature: usize,
    pub test: SplitTest,
    pub satisfied: bool,
}

impl Condition {
    pub fn holds(&self, record: &Record) -> bool {
        self.test.passes(record.get(self.feature)) == self.satisfied
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Random feature subset size per split; `None` tries every feature.
    pub features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 8, min_leaf: 5, features_per_split: None }
    }
}

/// Array-backed binary tree, root at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

fn majority(counts: [usize; 2]) -> Label {
    if counts[1] > counts[0] {
        1
    } else {
        0
    }
}

fn gini(n0: usize, n1: usize) -> f64 {
    let n = (n0 + n1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = n0 as f64 / n;
    let p1 = n1 as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

struct Best {
    gain: f64,
    feature: usize,
    test: SplitTest,
}

impl DecisionTree {
    /// Fits on `records[i]` for `i` in `sample` (repeats allowed, as in a
    /// bootstrap). `rng` is only drawn from when `features_per_split` is set.
    pub fn fit<R: Rng>(
        schema: &FeatureSchema,
        records: &[Record],
        labels: &[Label],
        sample_idx: &[usize],
        params: &TreeParams,
        rng: &mut R,
    ) -> DecisionTree {
        let min_leaf = params.min_leaf.max(1);
        let mut nodes: Vec<Node> = Vec::new();
        // (node slot, indices, depth)
        let mut stack: Vec<(usize, Vec<usize>, usize)> = Vec::new();
        nodes.push(Node::Leaf { class: 0, counts: [0, 0] });
        stack.push((0, sample_idx.to_vec(), 0));

        while let Some((slot, idx, depth)) = stack.pop() {
            let mut counts = [0usize; 2];
            for &i in &idx {
                counts[labels[i] as usize] += 1;
            }
            let leaf = Node::Leaf { class: majority(counts), counts };
            let pure = counts[0] == 0 || counts[1] == 0;
            if pure || idx.len() < 2 * min_leaf || depth >= params.max_depth {
                nodes[slot] = leaf;
                continue;
            }
            let features: Vec<usize> = match params.features_per_split {
                Some(k) if k < schema.len() => {
                    let mut f = sample(rng, schema.len(), k.max(1)).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => (0..schema.len()).collect(),
            };
            match best_split(schema, records, labels, &idx, counts, &features, min_leaf) {
                Some(best) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        idx.iter().partition(|&&i| best.test.passes(records[i].get(best.feature)));
                    let left = nodes.len();
                    nodes.push(Node::Leaf { class: 0, counts: [0, 0] });
                    let right = nodes.len();
                    nodes.push(Node::Leaf { class: 0, counts: [0, 0] });
                    nodes[slot] = Node::Split { feature: best.feature, test: best.test, left, right };
                    // right first so the left subtree gets lower ids when popped
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
                None => nodes[slot] = leaf,
            }
        }
        DecisionTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_of(&self, record: &Record) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split { feature, test, left, right } => {
                    at = if test.passes(record.get(*feature)) { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, record: &Record) -> Label {
        match &self.nodes[self.leaf_of(record)] {
            Node::Leaf { class, .. } => *class,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Leaf node ids in left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        self.paths().into_iter().map(|(leaf, _)| leaf).collect()
    }

    /// Every leaf with the conditions along its path from the root.
    pub fn paths(&self) -> Vec<(usize, Vec<Condition>)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((at, conds)) = stack.pop() {
            match &self.nodes[at] {
                Node::Leaf { .. } => out.push((at, conds)),
                Node::Split { feature, test, left, right } => {
                    let mut r = conds.clone();
                    r.push(Condition { feature: *feature, test: *test, satisfied: false });
                    let mut l = conds;
                    l.push(Condition { feature: *feature, test: *test, satisfied: true });
                    stack.push((*right, r));
                    stack.push((*left, l));
                }
            }
        }
        out
    }

    pub fn leaf_class(&self, leaf: usize) -> Label {
        match &self.nodes[leaf] {
            Node::Leaf { class, .. } => *class,
            Node::Split { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    /// Plain-text dump, one node per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Leaf { class, counts } => {
                    out.push_str(&format!("node {id} leaf {class} {} {}\n", counts[0], counts[1]))
                }
                Node::Split { feature, test: SplitTest::Threshold(t), left, right } => {
                    out.push_str(&format!("node {id} split {feature} le {} {left} {right}\n", format_num(*t)))
                }
                Node::Split { feature, test: SplitTest::Category(c), left, right } => {
                    out.push_str(&format!("node {id} split {feature} eq {c} {left} {right}\n"))
                }
            }
        }
        out
    }

    /// Parses the node lines written by [`DecisionTree::dump`].
    pub fn parse_dump<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<DecisionTree> {
        let bad = |l: &str| Error::Config(format!("bad tree line `{l}`"));
        let mut nodes = Vec::new();
        for line in lines {
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() < 3 || tok[0] != "node" || tok[1].parse::<usize>().ok() != Some(nodes.len()) {
                return Err(bad(line));
            }
            let num = |i: usize| tok.get(i).and_then(|t| t.parse::<usize>().ok()).ok_or_else(|| bad(line));
            let node = match tok[2] {
                "leaf" => Node::Leaf {
                    class: tok.get(3).and_then(|t| t.parse().ok()).filter(|&c: &u8| c <= 1).ok_or_else(|| bad(line))?,
                    counts: [num(4)?, num(5)?],
                },
                "split" => {
                    let feature = num(3)?;
                    let test = match tok.get(4) {
                        Some(&"le") => SplitTest::Threshold(tok.get(5).and_then(|t| t.parse().ok()).ok_or_else(|| bad(line))?),
                        Some(&"eq") => SplitTest::Category(tok.get(5).and_then(|t| t.parse().ok()).ok_or_else(|| bad(line))?),
                        _ => return Err(bad(line)),
                    };
                    Node::Split { feature, test, left: num(6)?, right: num(7)? }
                }
                _ => return Err(bad(line)),
            };
            nodes.push(node);
        }
        if nodes.is_empty() {
            return Err(Error::Config("tree dump has no nodes".into()));
        }
        for n in &nodes {
            if let Node::Split { left, right, .. } = n {
                if *left >= nodes.len() || *right >= nodes.len() {
                    return Err(Error::Config("tree dump references a missing node".into()));
                }
            }
        }
        Ok(DecisionTree { nodes })
    }

    /// Hand-built tree, mainly for tests.
    pub fn from_nodes(nodes: Vec<Node>) -> DecisionTree {
        assert!(!nodes.is_empty());
        DecisionTree { nodes }
    }
}

fn best_split(
    schema: &FeatureSchema,
    records: &[Record],
    labels: &[Label],
    idx: &[usize],
    counts: [usize; 2],
    features: &[usize],
    min_leaf: usize,
) -> Option<Best> {
    let n = idx.len();
    let parent = gini(counts[0], counts[1]);
    let mut best: Option<Best> = None;
    let mut consider = |gain: f64, feature: usize, test: SplitTest| {
        if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Best { gain, feature, test });
        }
    };
    let weighted = |l: [usize; 2], r: [usize; 2]| {
        let nl = (l[0] + l[1]) as f64;
        let nr = (r[0] + r[1]) as f64;
        parent - (nl * gini(l[0], l[1]) + nr * gini(r[0], r[1])) / n as f64
    };

    for &f in features {
        if schema.feature(f).is_categorical() {
            let card = match &schema.feature(f).kind {
                crate::data::FeatureKind::Categorical { values } => values.len(),
                _ => unreachable!(),
            };
            let mut per_cat = vec![[0usize; 2]; card];
            for &i in idx {
                per_cat[records[i].get(f).as_cat() as usize][labels[i] as usize] += 1;
            }
            for (c, l) in per_cat.iter().enumerate() {
                let nl = l[0] + l[1];
                if nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let r = [counts[0] - l[0], counts[1] - l[1]];
                consider(weighted(*l, r), f, SplitTest::Category(c as u32));
            }
        } else {
            let mut sorted: Vec<(f64, Label)> = idx.iter().map(|&i| (records[i].get(f).as_num(), labels[i])).collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut l = [0usize; 2];
            for k in 0..n - 1 {
                l[sorted[k].1 as usize] += 1;
                let (a, b) = (sorted[k].0, sorted[k + 1].0);
                if a == b {
                    continue;
                }
                let nl = k + 1;
                if nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let mut t = a + (b - a) / 2.0;
                if t >= b {
                    t = a;
                }
                let r = [counts[0] - l[0], counts[1] - l[1]];
                consider(weighted(l, r), f, SplitTest::Threshold(t));
            }
        }
    }
    best
}
