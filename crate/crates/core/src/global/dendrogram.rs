//! Bottom-up merging of local rules, one tree per consequent class.

use std::cmp::Ordering;
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;

use super::{cover_of, jaccard};
use crate::algebra::merge;
use crate::data::{format_num, FeatureSchema, LabeledDataset};
use crate::error::{Error, Result};
use crate::rule::{format_rule, Rule};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Jaccard distance between the children when they were merged.
    pub height: f64,
}

#[derive(Clone, Debug)]
pub struct DendroNode {
    pub rule: Rule,
    /// Records of the reference dataset the rule covers.
    pub cover: FixedBitSet,
    /// `None` for leaves.
    pub merge: Option<Merge>,
    pub parent: Option<usize>,
}

impl DendroNode {
    pub fn is_leaf(&self) -> bool {
        self.merge.is_none()
    }
}

/// Leaves come first, in input order; merge nodes follow in creation order,
/// class 0 before class 1.
#[derive(Clone, Debug)]
pub struct Dendrogram {
    nodes: Vec<DendroNode>,
    roots: Vec<usize>,
    n_leaves: usize,
    /// Running maximum of merge heights from the leaves up. Merge heights
    /// need not increase towards the root, and cutting on this value keeps
    /// every cut a partition of the leaves.
    effective: Vec<f64>,
}

impl Dendrogram {
    pub fn nodes(&self) -> &[DendroNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &DendroNode {
        &self.nodes[id]
    }

    /// One root per class present, class 0 first.
    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> usize {
        self.nodes.len() - self.n_leaves
    }

    /// `-inf` for leaves.
    pub fn effective_height(&self, id: usize) -> f64 {
        self.effective[id]
    }

    /// Distinct effective merge heights, ascending.
    pub fn cut_heights(&self) -> Vec<f64> {
        let mut h: Vec<f64> = self.effective[self.n_leaves..].to_vec();
        h.sort_by(f64::total_cmp);
        h.dedup();
        h
    }

    /// Maximal nodes whose effective height is at most `h`. `-inf` gives the
    /// leaves; the largest height gives the roots.
    pub fn cut(&self, h: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.roots.iter().rev().copied().collect();
        while let Some(id) = stack.pop() {
            match self.nodes[id].merge {
                Some(m) if self.effective[id] > h => {
                    stack.push(m.right);
                    stack.push(m.left);
                }
                _ => out.push(id),
            }
        }
        out
    }

    /// Leaves below `id`, or `id` itself for a leaf.
    pub fn leaves_under(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            match self.nodes[n].merge {
                Some(m) => {
                    stack.push(m.right);
                    stack.push(m.left);
                }
                None => out.push(n),
            }
        }
        out
    }

    /// Graphviz digraph; merge nodes are labeled `h=<height> | <rule>`.
    pub fn to_dot(&self, schema: &FeatureSchema) -> String {
        let mut out = String::from("digraph dendrogram {\n  node [shape=box];\n");
        for (id, n) in self.nodes.iter().enumerate() {
            let text = escape(&format_rule(&n.rule, schema));
            let label = match n.merge {
                Some(m) => format!("h={} | {text}", format_num(m.height)),
                None => text,
            };
            let _ = writeln!(out, "  n{id} [label=\"{label}\"];");
        }
        for (id, n) in self.nodes.iter().enumerate() {
            if let Some(m) = n.merge {
                let _ = writeln!(out, "  n{id} -> n{};", m.left);
                let _ = writeln!(out, "  n{id} -> n{};", m.right);
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Repeatedly merges the closest pair of same-class rules until one rule per
/// class remains. Distances are Jaccard distances between cover sets, and a
/// merged rule's cover is recomputed on the dataset. Equal distances are
/// resolved by the lexicographic order of the pair's rule texts.
pub fn build_dendrogram(rules: &[Rule], data: &LabeledDataset) -> Result<Dendrogram> {
    if rules.is_empty() {
        return Err(Error::Empty("rule set"));
    }
    let schema = data.schema();
    let mut nodes: Vec<DendroNode> = rules
        .iter()
        .map(|r| DendroNode { rule: r.clone(), cover: cover_of(r, data.records()), merge: None, parent: None })
        .collect();
    let mut texts: Vec<String> = rules.iter().map(|r| format_rule(r, schema)).collect();
    let mut effective = vec![f64::NEG_INFINITY; rules.len()];
    let mut roots = Vec::new();

    for class in 0..=1u8 {
        let members: Vec<usize> = (0..rules.len()).filter(|&i| rules[i].consequent == class).collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len();
        let mut slot: Vec<Option<usize>> = members.iter().map(|&i| Some(i)).collect();
        let mut dist = vec![0.0; m * m];
        for a in 0..m {
            for b in a + 1..m {
                let d = jaccard(&nodes[members[a]].cover, &nodes[members[b]].cover);
                dist[a * m + b] = d;
                dist[b * m + a] = d;
            }
        }
        let pair_key = |texts: &[String], x: usize, y: usize| -> (usize, usize) {
            if texts[x] <= texts[y] {
                (x, y)
            } else {
                (y, x)
            }
        };
        for _ in 1..m {
            let mut best: Option<(f64, usize, usize)> = None;
            for a in 0..m {
                let Some(na) = slot[a] else { continue };
                for b in a + 1..m {
                    let Some(nb) = slot[b] else { continue };
                    let d = dist[a * m + b];
                    let better = match best {
                        None => true,
                        Some((bd, ba, bb)) => match d.total_cmp(&bd) {
                            Ordering::Less => true,
                            Ordering::Greater => false,
                            Ordering::Equal => {
                                let (p, q) = pair_key(&texts, na, nb);
                                let (bp, bq) = pair_key(&texts, slot[ba].unwrap(), slot[bb].unwrap());
                                (&texts[p], &texts[q]) < (&texts[bp], &texts[bq])
                            }
                        },
                    };
                    if better {
                        best = Some((d, a, b));
                    }
                }
            }
            let (height, a, b) = best.expect("at least two active slots");
            let (left, right) = (slot[a].unwrap(), slot[b].unwrap());
            let rule = merge(&nodes[left].rule, &nodes[right].rule)?;
            let cover = cover_of(&rule, data.records());
            let id = nodes.len();
            nodes[left].parent = Some(id);
            nodes[right].parent = Some(id);
            texts.push(format_rule(&rule, schema));
            effective.push(height.max(effective[left]).max(effective[right]));
            nodes.push(DendroNode { rule, cover, merge: Some(Merge { left, right, height }), parent: None });
            slot[a] = Some(id);
            slot[b] = None;
            for c in 0..m {
                if let (true, Some(nc)) = (c != a, slot[c]) {
                    let d = jaccard(&nodes[id].cover, &nodes[nc].cover);
                    dist[a * m + c] = d;
                    dist[c * m + a] = d;
                }
            }
        }
        roots.push(slot.iter().flatten().copied().next().expect("one slot remains"));
    }
    Ok(Dendrogram { nodes, roots, n_leaves: rules.len(), effective })
}
