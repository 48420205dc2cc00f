//! The black box being explained: anything that maps a record to a label.

mod forest;
pub mod protocol;

use std::sync::atomic::{AtomicU64, Ordering};

use crate::data::{Label, LabeledDataset, Record, Value};
use crate::error::{OracleError, Result};

pub use forest::{train_forest, ForestModel, ForestParams};
pub use protocol::{connect_external, serve, Endpoint, ExternalOracle};

/// Query access to a classifier. Implementations must be deterministic: the
/// same record always gets the same label.
pub trait Oracle: Send + Sync {
    fn predict(&self, record: &Record) -> Result<Label, OracleError>;

    fn predict_batch(&self, records: &[Record]) -> Result<Vec<Label>, OracleError> {
        records.iter().map(|r| self.predict(r)).collect()
    }

    /// False when calls are funneled one at a time through a shared transport.
    fn concurrency_safe(&self) -> bool {
        true
    }
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn predict(&self, record: &Record) -> Result<Label, OracleError> {
        (**self).predict(record)
    }

    fn predict_batch(&self, records: &[Record]) -> Result<Vec<Label>, OracleError> {
        (**self).predict_batch(records)
    }

    fn concurrency_safe(&self) -> bool {
        (**self).concurrency_safe()
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn predict(&self, record: &Record) -> Result<Label, OracleError> {
        (**self).predict(record)
    }

    fn predict_batch(&self, records: &[Record]) -> Result<Vec<Label>, OracleError> {
        (**self).predict_batch(records)
    }

    fn concurrency_safe(&self) -> bool {
        (**self).concurrency_safe()
    }
}

/// `1[x_feature > threshold]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdModel {
    pub feature: usize,
    pub threshold: f64,
}

impl Oracle for ThresholdModel {
    fn predict(&self, record: &Record) -> Result<Label, OracleError> {
        match record.values().get(self.feature) {
            Some(Value::Num(x)) => Ok((*x > self.threshold) as Label),
            _ => Err(OracleError::SchemaMismatch(format!("feature {} is not numeric", self.feature))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstantModel(pub Label);

impl Oracle for ConstantModel {
    fn predict(&self, _record: &Record) -> Result<Label, OracleError> {
        Ok(self.0)
    }
}

/// Wraps a plain function.
pub struct FnOracle<F>(pub F);

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&Record) -> Label + Send + Sync,
{
    fn predict(&self, record: &Record) -> Result<Label, OracleError> {
        Ok((self.0)(record))
    }
}

/// Counts every record sent to the inner oracle.
pub struct CountingOracle<O> {
    inner: O,
    queries: AtomicU64,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle { inner, queries: AtomicU64::new(0) }
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn predict(&self, record: &Record) -> Result<Label, OracleError> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.inner.predict(record)
    }

    fn predict_batch(&self, records: &[Record]) -> Result<Vec<Label>, OracleError> {
        self.queries.fetch_add(records.len() as u64, Ordering::Relaxed);
        self.inner.predict_batch(records)
    }

    fn concurrency_safe(&self) -> bool {
        self.inner.concurrency_safe()
    }
}

/// Replaces the dataset's labels with the oracle's predictions.
pub fn relabel(oracle: &dyn Oracle, data: &LabeledDataset) -> Result<LabeledDataset> {
    let labels = oracle.predict_batch(data.records())?;
    data.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Feature, FeatureSchema};
    use std::sync::Arc;

    fn data() -> LabeledDataset {
        let s = Arc::new(FeatureSchema::new(vec![Feature::continuous("x", 0.0, 1.0)]).unwrap());
        let recs = [0.1, 0.6, 0.9].iter().map(|&x| Record::new(vec![Value::Num(x)])).collect();
        LabeledDataset::new(s, recs, vec![1, 0, 1]).unwrap()
    }

    #[test]
    fn relabel_with_constant() {
        let d = relabel(&ConstantModel(0), &data()).unwrap();
        assert_eq!(d.labels(), &[0, 0, 0]);
    }

    #[test]
    fn relabel_with_identity_of_labels_is_noop() {
        let d = data();
        let lookup: Vec<(f64, Label)> =
            d.records().iter().zip(d.labels()).map(|(r, &l)| (r.get(0).as_num(), l)).collect();
        let oracle = FnOracle(move |r: &Record| {
            lookup.iter().find(|(x, _)| *x == r.get(0).as_num()).unwrap().1
        });
        assert_eq!(relabel(&oracle, &d).unwrap().labels(), d.labels());
    }

    #[test]
    fn threshold_and_counting() {
        let c = CountingOracle::new(ThresholdModel { feature: 0, threshold: 0.5 });
        let d = relabel(&c, &data()).unwrap();
        assert_eq!(d.labels(), &[0, 1, 1]);
        assert_eq!(c.queries(), 3);
    }
}
