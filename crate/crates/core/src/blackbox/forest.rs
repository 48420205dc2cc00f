//! Bagged CART ensemble used as the reference black box.

use rand::Rng;

use super::Oracle;
use crate::data::{Label, LabeledDataset, Record};
use crate::error::{Error, OracleError, Result};
use crate::rng;
use crate::data::Value;
use crate::tree::{DecisionTree, Node, SplitTest, TreeParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: 16, seed: 0 }
    }
}

const LEAF: u8 = 0;
const NUM: u8 = 1;
const CAT: u8 = 2;

/// Compact node for the prediction hot path. Leaves keep their class in
/// `left`; categorical tests keep the category in `value`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct PackedNode {
    value: f64,
    feature: u32,
    left: u32,
    right: u32,
    kind: u8,
}

/// Every tree's nodes in one array, children addressed absolutely.
#[derive(Clone, Debug, PartialEq)]
struct Packed {
    nodes: Vec<PackedNode>,
    roots: Vec<u32>,
}

impl Packed {
    fn new(trees: &[DecisionTree]) -> Self {
        let mut nodes = Vec::new();
        let mut roots = Vec::with_capacity(trees.len());
        for t in trees {
            let base = nodes.len() as u32;
            roots.push(base);
            nodes.extend(t.nodes().iter().map(|n| match n {
                Node::Leaf { class, .. } => PackedNode { value: 0.0, feature: 0, left: *class as u32, right: 0, kind: LEAF },
                Node::Split { feature, test, left, right } => {
                    let (value, kind) = match test {
                        SplitTest::Threshold(t) => (*t, NUM),
                        SplitTest::Category(c) => (*c as f64, CAT),
                    };
                    PackedNode { value, feature: *feature as u32, left: base + *left as u32, right: base + *right as u32, kind }
                }
            }));
        }
        Packed { nodes, roots }
    }

    fn tree_predict(&self, root: u32, values: &[Value]) -> Label {
        let mut at = root as usize;
        loop {
            let n = &self.nodes[at];
            let pass = match (n.kind, values[n.feature as usize]) {
                (LEAF, _) => return n.left as Label,
                (NUM, Value::Num(x)) => x <= n.value,
                (CAT, Value::Cat(c)) => c as f64 == n.value,
                _ => false,
            };
            at = if pass { n.left } else { n.right } as usize;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
    packed: Packed,
    max_depth: usize,
    features_per_split: usize,
    seed: u64,
    n_features: usize,
}

impl ForestModel {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn features_per_split(&self) -> usize {
        self.features_per_split
    }

    /// Majority vote, ties to class 0. Stops as soon as the outcome is fixed.
    pub fn vote(&self, record: &Record) -> Label {
        let n = self.packed.roots.len();
        let (mut ones, mut zeros) = (0, 0);
        for &root in &self.packed.roots {
            if self.packed.tree_predict(root, record.values()) == 1 {
                ones += 1;
                if 2 * ones > n {
                    return 1;
                }
            } else {
                zeros += 1;
                if 2 * zeros >= n {
                    return 0;
                }
            }
        }
        0
    }

    pub fn accuracy(&self, data: &LabeledDataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data.records().iter().zip(data.labels()).filter(|(r, &l)| self.vote(r) == l).count();
        hits as f64 / data.len() as f64
    }

    pub fn dump(&self) -> String {
        let mut out = format!(
            "forest {} {} {} {} {}\n",
            self.trees.len(),
            self.max_depth,
            self.features_per_split,
            self.seed,
            self.n_features
        );
        for (i, t) in self.trees.iter().enumerate() {
            out.push_str(&format!("tree {i}\n"));
            out.push_str(&t.dump());
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<ForestModel> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Config("empty forest dump".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let num = |i: usize| -> Result<u64> {
            h.get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Config(format!("bad forest header `{header}`")))
        };
        if h.first() != Some(&"forest") {
            return Err(Error::Config(format!("bad forest header `{header}`")));
        }
        let (n_trees, max_depth, fps, seed, n_features) = (num(1)?, num(2)?, num(3)?, num(4)?, num(5)?);
        let mut trees = Vec::new();
        let mut current: Vec<&str> = Vec::new();
        for line in lines {
            if line.starts_with("tree ") {
                if !current.is_empty() {
                    trees.push(DecisionTree::parse_dump(current.drain(..))?);
                }
            } else {
                current.push(line);
            }
        }
        if !current.is_empty() {
            trees.push(DecisionTree::parse_dump(current)?);
        }
        if trees.len() as u64 != n_trees {
            return Err(Error::Config(format!("forest dump has {} trees, header says {n_trees}", trees.len())));
        }
        Ok(ForestModel {
            packed: Packed::new(&trees),
            trees,
            max_depth: max_depth as usize,
            features_per_split: fps as usize,
            seed,
            n_features: n_features as usize,
        })
    }
}

impl Oracle for ForestModel {
    fn predict(&self, record: &Record) -> Result<Label, OracleError> {
        if record.len() != self.n_features {
            return Err(OracleError::SchemaMismatch(format!(
                "record has {} values, model expects {}",
                record.len(),
                self.n_features
            )));
        }
        Ok(self.vote(record))
    }
}

fn fit_one(data: &LabeledDataset, params: &ForestParams, fps: usize, i: usize) -> DecisionTree {
    let mut rng = rng::stream(params.seed, "forest", i as u64);
    let n = data.len();
    let bag: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let tp = TreeParams { max_depth: params.max_depth, min_leaf: 1, features_per_split: Some(fps) };
    DecisionTree::fit(data.schema(), data.records(), data.labels(), &bag, &tp, &mut rng)
}

/// Bootstrap-aggregated CART trees with `ceil(sqrt(m))` candidate features per
/// split. Each tree draws from its own seeded stream, so the result does not
/// depend on thread scheduling.
pub fn train_forest(data: &LabeledDataset, params: &ForestParams) -> Result<ForestModel> {
    if data.len() < 2 {
        return Err(Error::Training("need at least two records".into()));
    }
    let [zeros, ones] = data.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(Error::Training("training data contains a single class".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::Training("n_trees must be positive".into()));
    }
    let m = data.schema().len();
    let fps = ((m as f64).sqrt().ceil() as usize).max(1);

    #[cfg(feature = "parallel")]
    let trees: Vec<DecisionTree> = {
        use rayon::prelude::*;
        (0..params.n_trees).into_par_iter().map(|i| fit_one(data, params, fps, i)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees: Vec<DecisionTree> = (0..params.n_trees).map(|i| fit_one(data, params, fps, i)).collect();

    Ok(ForestModel { packed: Packed::new(&trees), trees, max_depth: params.max_depth, features_per_split: fps, seed: params.seed, n_features: m })
}
