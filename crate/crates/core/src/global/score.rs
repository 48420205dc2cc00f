//! CPAR-style weighted voting, the BIC quality score and fidelity.

use std::collections::HashSet;

use fixedbitset::FixedBitSet;

use super::cover_of;
use crate::data::{Label, LabeledDataset, Record};
use crate::error::{Error, Result};

/// Rules voting for a class: the best few by Laplace accuracy are averaged.
pub const TOP_K: usize = 5;

/// `(n_correct + 1) / (n_covered + 2)` over the dataset.
pub fn laplace_accuracy(cover: &FixedBitSet, consequent: Label, labels: &[Label]) -> f64 {
    let covered = cover.count_ones(..);
    let correct = cover.ones().filter(|&i| labels[i] == consequent).count();
    (correct as f64 + 1.0) / (covered as f64 + 2.0)
}

/// A rule reduced to what voting needs.
#[derive(Clone, Debug)]
pub(crate) struct Voter {
    pub class: Label,
    pub laplace: f64,
    pub cover: FixedBitSet,
}

impl Voter {
    pub fn new(cover: FixedBitSet, class: Label, labels: &[Label]) -> Self {
        Voter { class, laplace: laplace_accuracy(&cover, class, labels), cover }
    }
}

/// Top-k Laplace accuracies per class among the covering rules.
#[derive(Default)]
struct Ballot {
    votes: [Vec<f64>; 2],
}

impl Ballot {
    fn cast(&mut self, class: Label, laplace: f64) {
        self.votes[class as usize].push(laplace);
    }

    fn finish(&mut self) {
        for v in &mut self.votes {
            v.sort_by(|a, b| b.total_cmp(a));
            v.truncate(TOP_K);
        }
    }

    fn covered(&self) -> bool {
        !self.votes[0].is_empty() || !self.votes[1].is_empty()
    }

    fn mass(&self, class: usize) -> f64 {
        self.votes[class].iter().sum()
    }

    fn average(&self, class: usize) -> f64 {
        let v = &self.votes[class];
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    fn winner(&self, default: Label) -> Label {
        if !self.covered() {
            return default;
        }
        let (a0, a1) = (self.average(0), self.average(1));
        if a0 > a1 {
            0
        } else if a1 > a0 {
            1
        } else {
            default
        }
    }

    /// Smoothed probability of `class` from the summed vote masses.
    fn probability(&self, class: Label) -> f64 {
        let (v0, v1) = (self.mass(0), self.mass(1));
        let v = if class == 0 { v0 } else { v1 };
        (v + 1.0) / (v0 + v1 + 2.0)
    }
}

/// Likelihood and agreement of a voter set against the dataset labels.
pub(crate) struct Scorer<'a> {
    labels: &'a [Label],
    default: Label,
    p_default: f64,
}

pub(crate) struct Score {
    pub log_likelihood: f64,
    pub fidelity: f64,
}

impl<'a> Scorer<'a> {
    pub fn new(labels: &'a [Label], default: Label) -> Self {
        let n = labels.len();
        let n_default = labels.iter().filter(|&&l| l == default).count();
        Scorer { labels, default, p_default: (n_default as f64 + 1.0) / (n as f64 + 2.0) }
    }

    fn ballot(voters: &[&Voter], i: usize) -> Ballot {
        let mut b = Ballot::default();
        for v in voters {
            if v.cover.contains(i) {
                b.cast(v.class, v.laplace);
            }
        }
        b.finish();
        b
    }

    pub fn score(&self, voters: &[&Voter]) -> Score {
        let mut ll = 0.0;
        let mut agree = 0usize;
        for (i, &y) in self.labels.iter().enumerate() {
            let b = Self::ballot(voters, i);
            let p = if b.covered() {
                b.probability(y)
            } else if y == self.default {
                self.p_default
            } else {
                1.0 - self.p_default
            };
            ll += p.ln();
            agree += (b.winner(self.default) == y) as usize;
        }
        let n = self.labels.len();
        Score { log_likelihood: ll, fidelity: if n == 0 { 0.0 } else { agree as f64 / n as f64 } }
    }
}

/// `-(k ln n - 2 ln L)`; `k` counts every listed rule.
pub(crate) fn q_from(k: usize, n: usize, log_likelihood: f64) -> f64 {
    -(k as f64 * (n as f64).ln() - 2.0 * log_likelihood)
}

/// Voters for the distinct rules of a list; repeats vote once.
fn voters(rules: &[crate::rule::Rule], data: &LabeledDataset) -> Vec<Voter> {
    let mut seen = HashSet::new();
    rules
        .iter()
        .filter(|r| seen.insert(*r))
        .map(|r| Voter::new(cover_of(r, data.records()), r.consequent, data.labels()))
        .collect()
}

/// Class chosen by weighted voting of the covering rules; `default` when
/// nothing covers the record or the class averages tie.
pub fn cpar_predict(rules: &[crate::rule::Rule], record: &Record, default: Label, data: &LabeledDataset) -> Label {
    let mut seen = HashSet::new();
    let mut b = Ballot::default();
    for r in rules.iter().filter(|r| seen.insert(*r)) {
        if r.covers(record) {
            let cover = cover_of(r, data.records());
            b.cast(r.consequent, laplace_accuracy(&cover, r.consequent, data.labels()));
        }
    }
    b.finish();
    b.winner(default)
}

/// Quality of a rule set as a classifier of the relabeled data: negated BIC
/// with the number of rules as complexity. Larger is better.
pub fn q_bic(rules: &[crate::rule::Rule], relabeled: &LabeledDataset) -> Result<f64> {
    if rules.is_empty() {
        return Err(Error::Empty("rule set"));
    }
    let vs = voters(rules, relabeled);
    let refs: Vec<&Voter> = vs.iter().collect();
    let s = Scorer::new(relabeled.labels(), relabeled.majority_label()).score(&refs);
    Ok(q_from(rules.len(), relabeled.len(), s.log_likelihood))
}

/// Share of records where the voted class equals the black-box label.
pub fn fidelity(rules: &[crate::rule::Rule], default: Label, relabeled: &LabeledDataset) -> f64 {
    let vs = voters(rules, relabeled);
    let refs: Vec<&Voter> = vs.iter().collect();
    Scorer::new(relabeled.labels(), default).score(&refs).fidelity
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_vote_average() {
        let mut b = Ballot::default();
        for (c, l) in [(0, 0.9), (0, 0.8), (1, 0.95), (1, 0.6)] {
            b.cast(c, l);
        }
        b.finish();
        assert!((b.average(0) - 0.85).abs() < 1e-12);
        assert!((b.average(1) - 0.775).abs() < 1e-12);
        assert_eq!(b.winner(1), 0);
    }

    #[test]
    fn only_top_five_count() {
        let mut b = Ballot::default();
        for l in [0.1, 0.9, 0.9, 0.9, 0.9, 0.9] {
            b.cast(1, l);
        }
        b.cast(0, 0.85);
        b.finish();
        assert_eq!(b.votes[1].len(), 5);
        assert_eq!(b.winner(0), 1);
    }

    #[test]
    fn empty_ballot_and_ties_go_to_default() {
        let mut b = Ballot::default();
        b.finish();
        assert_eq!(b.winner(1), 1);
        assert_eq!(b.probability(0), 0.5);
        b.cast(0, 0.7);
        b.cast(1, 0.7);
        b.finish();
        assert_eq!(b.winner(1), 1);
        assert_eq!(b.winner(0), 0);
    }

    #[test]
    fn laplace_counts() {
        let mut c = FixedBitSet::with_capacity(4);
        c.insert(0);
        c.insert(1);
        c.insert(2);
        assert!((laplace_accuracy(&c, 1, &[1, 1, 0, 1]) - 3.0 / 5.0).abs() < 1e-15);
    }
}
