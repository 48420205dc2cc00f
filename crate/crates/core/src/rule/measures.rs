use super::Rule;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::stats::{chi2_sf_df1, entropy_bits};

/// 2x2 table of (rule covers) x (label equals consequent).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Contingency {
    pub covered_match: usize,
    pub covered_miss: usize,
    pub uncovered_match: usize,
    pub uncovered_miss: usize,
}

impl Contingency {
    pub fn new(covered_match: usize, covered_miss: usize, uncovered_match: usize, uncovered_miss: usize) -> Self {
        Contingency { covered_match, covered_miss, uncovered_match, uncovered_miss }
    }

    pub fn of(rule: &Rule, data: &LabeledDataset) -> Self {
        let mut t = Contingency::new(0, 0, 0, 0);
        for (r, &l) in data.records().iter().zip(data.labels()) {
            match (rule.covers(r), l == rule.consequent) {
                (true, true) => t.covered_match += 1,
                (true, false) => t.covered_miss += 1,
                (false, true) => t.uncovered_match += 1,
                (false, false) => t.uncovered_miss += 1,
            }
        }
        t
    }

    pub fn total(&self) -> usize {
        self.covered_match + self.covered_miss + self.uncovered_match + self.uncovered_miss
    }

    pub fn covered(&self) -> usize {
        self.covered_match + self.covered_miss
    }

    pub fn matching(&self) -> usize {
        self.covered_match + self.uncovered_match
    }
}

/// Statistics of a rule A -> B over a dataset. `None` marks an undefined
/// measure, kept distinct from zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuleMeasures {
    pub support: f64,
    pub coverage: f64,
    pub confidence: Option<f64>,
    pub lift: Option<f64>,
    pub mi_score: Option<f64>,
    pub p_value: f64,
}

impl RuleMeasures {
    pub fn from_counts(t: Contingency) -> Result<Self> {
        let n = t.total();
        if n == 0 {
            return Err(Error::Empty("dataset"));
        }
        let nf = n as f64;
        let support = t.covered_match as f64 / nf;
        let coverage = t.covered() as f64 / nf;
        let p_b = t.matching() as f64 / nf;
        let confidence = (t.covered() > 0).then(|| t.covered_match as f64 / t.covered() as f64);
        let lift = match confidence {
            Some(c) if p_b > 0.0 => Some(c / p_b),
            _ => None,
        };

        let h_a = entropy_bits(&[t.covered(), n - t.covered()]);
        let h_b = entropy_bits(&[t.matching(), n - t.matching()]);
        let h_ab = entropy_bits(&[t.covered_match, t.covered_miss, t.uncovered_match, t.uncovered_miss]);
        let denom = h_a.min(h_b);
        let mi_score = (denom > 0.0).then(|| ((h_a + h_b - h_ab) / denom).clamp(0.0, 1.0));

        Ok(RuleMeasures {
            support,
            coverage,
            confidence,
            lift,
            mi_score,
            p_value: significance_test_counts(t),
        })
    }
}

pub fn measure(rule: &Rule, data: &LabeledDataset) -> Result<RuleMeasures> {
    RuleMeasures::from_counts(Contingency::of(rule, data))
}

/// Chi-square independence test (1 df) on the covers x label-matches table.
pub fn significance_test(rule: &Rule, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(significance_test_counts(Contingency::of(rule, data)))
}

/// Pearson chi-square p-value with Yates correction whenever an expected
/// cell count is below 5. A zero marginal gives p = 1.
pub fn significance_test_counts(t: Contingency) -> f64 {
    let n = t.total() as f64;
    let row1 = t.covered() as f64;
    let row2 = (t.uncovered_match + t.uncovered_miss) as f64;
    let col1 = t.matching() as f64;
    let col2 = (t.covered_miss + t.uncovered_miss) as f64;
    if row1 == 0.0 || row2 == 0.0 || col1 == 0.0 || col2 == 0.0 {
        return 1.0;
    }
    let min_expected = [row1 * col1, row1 * col2, row2 * col1, row2 * col2]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        / n;
    let ad = t.covered_match as f64 * t.uncovered_miss as f64;
    let bc = t.covered_miss as f64 * t.uncovered_match as f64;
    let mut diff = (ad - bc).abs();
    if min_expected < 5.0 {
        diff = (diff - n / 2.0).max(0.0);
    }
    let stat = n * diff * diff / (row1 * row2 * col1 * col2);
    chi2_sf_df1(stat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Feature, FeatureSchema, Record, Value};
    use crate::rule::{Interval, Predicate, Premise};
    use std::sync::Arc;

    /// 10 records; premise `x <= 3.5` covers x = 0..=3, labels chosen so 3
    /// of the covered and 5 overall are 1.
    fn ten_records() -> (Rule, LabeledDataset) {
        let schema = Arc::new(FeatureSchema::new(vec![Feature::continuous("x", 0.0, 9.0)]).unwrap());
        let records = (0..10).map(|i| Record::new(vec![Value::Num(i as f64)])).collect();
        let labels = vec![1, 1, 1, 0, 1, 1, 0, 0, 0, 0];
        let data = LabeledDataset::new(schema.clone(), records, labels).unwrap();
        let premise = Premise::new(&schema, vec![Predicate::Interval(Interval::at_most(0, 3.5))]).unwrap();
        (Rule::new(premise, 1).unwrap(), data)
    }

    #[test]
    fn counts_on_ten_record_table() {
        let (rule, data) = ten_records();
        let m = measure(&rule, &data).unwrap();
        assert!((m.support - 0.3).abs() < 1e-12);
        assert!((m.coverage - 0.4).abs() < 1e-12);
        assert!((m.confidence.unwrap() - 0.75).abs() < 1e-12);
        assert!((m.lift.unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn identical_indicators_give_full_mi() {
        let m = RuleMeasures::from_counts(Contingency::new(30, 0, 0, 70)).unwrap();
        assert!((m.mi_score.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_counts() {
        let m = RuleMeasures::from_counts(Contingency::new(20, 20, 20, 20)).unwrap();
        assert!((m.lift.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.mi_score.unwrap(), 0.0);
        assert!((m.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_coverage_is_undefined_not_zero() {
        let m = RuleMeasures::from_counts(Contingency::new(0, 0, 4, 6)).unwrap();
        assert_eq!(m.coverage, 0.0);
        assert_eq!(m.confidence, None);
        assert_eq!(m.lift, None);
        assert_eq!(m.mi_score, None);
        assert_eq!(m.p_value, 1.0);
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(RuleMeasures::from_counts(Contingency::new(0, 0, 0, 0)).is_err());
    }

    #[test]
    fn perfect_association_is_significant() {
        assert!(significance_test_counts(Contingency::new(50, 0, 0, 50)) < 1e-3);
        assert!((significance_test_counts(Contingency::new(25, 25, 25, 25)) - 1.0).abs() < 1e-9);
    }
}
