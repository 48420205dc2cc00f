//! Turning an `--oracle` spec into something that answers queries.

use std::str::FromStr;
use std::time::Duration;

use rulelens::blackbox::{connect_external, train_forest, ConstantModel, Endpoint, ForestModel, ForestParams, Oracle, ThresholdModel};
use rulelens::data::LabeledDataset;
use rulelens::rng;
use rulelens::Error;

use crate::error::{read, usage, CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum OracleSpec {
    /// Forest trained on a seeded 80% split of the data.
    Builtin,
    /// Forest dump written by `train`.
    Model(std::path::PathBuf),
    External(Endpoint),
    Threshold { feature: String, threshold: f64 },
    Constant(String),
}

impl FromStr for OracleSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "builtin" {
            return Ok(OracleSpec::Builtin);
        }
        if let Some(p) = s.strip_prefix("model:") {
            return Ok(OracleSpec::Model(p.into()));
        }
        if let Some(e) = Endpoint::parse(s) {
            return Ok(OracleSpec::External(e));
        }
        if let Some(rest) = s.strip_prefix("threshold:") {
            let (f, t) = rest.rsplit_once(':').ok_or_else(|| usage("expected threshold:<feature>:<t>"))?;
            let threshold = t.parse().map_err(|_| usage(format!("bad threshold `{t}`")))?;
            return Ok(OracleSpec::Threshold { feature: f.to_string(), threshold });
        }
        if let Some(c) = s.strip_prefix("constant:") {
            return Ok(OracleSpec::Constant(c.to_string()));
        }
        Err(usage(format!("unknown oracle `{s}`")))
    }
}

/// Seeded 80/20 split of record indices: `(train, holdout)`.
pub fn split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let idx = rng::permutation(seed, "split", n);
    let cut = (n * 4).div_ceil(5);
    let (a, b) = idx.split_at(cut.min(n));
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// The builtin black box for a dataset.
pub fn builtin_forest(data: &LabeledDataset, params: &ForestParams) -> Result<ForestModel> {
    let (train, _) = split(data.len(), params.seed);
    Ok(train_forest(&data.subset(&train), params)?)
}

pub fn load(spec: &OracleSpec, data: &LabeledDataset, params: &ForestParams) -> Result<Box<dyn Oracle>> {
    let schema = data.schema();
    Ok(match spec {
        OracleSpec::Builtin => Box::new(builtin_forest(data, params)?),
        OracleSpec::Model(p) => {
            let m = ForestModel::from_dump(&read(p)?)?;
            if m.trees().is_empty() {
                return Err(Error::Config("model has no trees".into()).into());
            }
            Box::new(m)
        }
        OracleSpec::External(e) => Box::new(connect_external(e, schema, Duration::from_secs(30))?),
        OracleSpec::Threshold { feature, threshold } => {
            let f = schema.index_of(feature).ok_or_else(|| Error::UnknownFeature(feature.clone()))?;
            if schema.feature(f).is_categorical() {
                return Err(usage(format!("threshold oracle needs a continuous feature, `{feature}` is categorical")));
            }
            Box::new(ThresholdModel { feature: f, threshold: *threshold })
        }
        OracleSpec::Constant(c) => {
            let l = schema.parse_label(c).ok_or_else(|| usage(format!("unknown class `{c}`")))?;
            Box::new(ConstantModel(l))
        }
    })
}
