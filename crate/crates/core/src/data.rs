//! Tabular data model: feature schemas, records and labeled datasets.
//!
//! Categorical values are stored as indices into the feature's value set so
//! records stay `Copy`-cheap and hashable; the schema maps them back to text.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Binary class label, always 0 or 1.
pub type Label = u8;

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureKind {
    Categorical { values: Vec<String> },
    Continuous { min: f64, max: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn categorical(name: impl Into<String>, values: &[&str]) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Categorical {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
        }
    }

    pub fn continuous(name: impl Into<String>, min: f64, max: f64) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Continuous { min, max },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }

    /// Width of a continuous range, `None` for categoricals.
    pub fn range(&self) -> Option<f64> {
        match self.kind {
            FeatureKind::Continuous { min, max } => Some(max - min),
            FeatureKind::Categorical { .. } => None,
        }
    }
}

/// Ordered feature list plus the name of the target column and its two
/// class names (default `"0"` and `"1"`).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    target: String,
    class_names: [String; 2],
    index: HashMap<String, usize>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let mut index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            if f.name.trim().is_empty() {
                return Err(Error::Schema(format!("feature {i} has an empty name")));
            }
            if index.insert(f.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            match &f.kind {
                FeatureKind::Categorical { values } => {
                    if values.is_empty() {
                        return Err(Error::Schema(format!("`{}` has an empty value set", f.name)));
                    }
                    let mut seen = std::collections::HashSet::new();
                    for v in values {
                        if !seen.insert(v) {
                            return Err(Error::Schema(format!(
                                "`{}` lists category `{v}` twice",
                                f.name
                            )));
                        }
                    }
                }
                FeatureKind::Continuous { min, max } => {
                    if !(min <= max) || !min.is_finite() || !max.is_finite() {
                        return Err(Error::Schema(format!(
                            "`{}` has invalid range [{min}, {max}]",
                            f.name
                        )));
                    }
                }
            }
        }
        Ok(FeatureSchema {
            features,
            target: "class".to_string(),
            class_names: ["0".to_string(), "1".to_string()],
            index,
        })
    }

    pub fn with_target(mut self, name: impl Into<String>) -> Self {
        self.target = name.into();
        self
    }

    pub fn with_class_names(mut self, zero: impl Into<String>, one: impl Into<String>) -> Self {
        self.class_names = [zero.into(), one.into()];
        self
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &Feature {
        &self.features[i]
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn class_name(&self, label: Label) -> &str {
        &self.class_names[label as usize]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn category_index(&self, feature: usize, value: &str) -> Option<u32> {
        match &self.features[feature].kind {
            FeatureKind::Categorical { values } => {
                values.iter().position(|v| v == value).map(|p| p as u32)
            }
            FeatureKind::Continuous { .. } => None,
        }
    }

    pub fn category_name(&self, feature: usize, value: u32) -> &str {
        match &self.features[feature].kind {
            FeatureKind::Categorical { values } => &values[value as usize],
            FeatureKind::Continuous { .. } => panic!("feature {feature} is continuous"),
        }
    }

    /// Parses a class label given either as its class name or as `0`/`1`.
    pub fn parse_label(&self, text: &str) -> Option<Label> {
        let t = text.trim();
        if t == self.class_names[0] {
            Some(0)
        } else if t == self.class_names[1] {
            Some(1)
        } else {
            match t {
                "0" => Some(0),
                "1" => Some(1),
                _ => None,
            }
        }
    }

    /// Per-feature kinds as sent in the oracle handshake (`c`/`n`).
    pub fn kinds_signature(&self) -> String {
        self.features
            .iter()
            .map(|f| if f.is_categorical() { "c" } else { "n" })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Checks that `record` has the right arity and in-domain categoricals.
    pub fn check(&self, record: &Record) -> Result<()> {
        if record.len() != self.len() {
            return Err(Error::Schema(format!(
                "record has {} values, schema has {} features",
                record.len(),
                self.len()
            )));
        }
        for (i, (f, v)) in self.features.iter().zip(record.values()).enumerate() {
            match (&f.kind, v) {
                (FeatureKind::Categorical { values }, Value::Cat(c)) => {
                    if (*c as usize) >= values.len() {
                        return Err(Error::Schema(format!(
                            "category index {c} out of range for `{}`",
                            f.name
                        )));
                    }
                }
                (FeatureKind::Continuous { .. }, Value::Num(x)) => {
                    if x.is_nan() {
                        return Err(Error::Schema(format!("NaN in feature `{}`", f.name)));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!("value {i} has the wrong kind for `{}`", f.name)))
                }
            }
        }
        Ok(())
    }

    /// Parses one value per feature from text fields.
    pub fn parse_record<S: AsRef<str>>(&self, fields: &[S]) -> Result<Record> {
        if fields.len() != self.len() {
            return Err(Error::Schema(format!(
                "expected {} values, got {}",
                self.len(),
                fields.len()
            )));
        }
        let mut values = Vec::with_capacity(self.len());
        for (i, raw) in fields.iter().enumerate() {
            let raw = raw.as_ref().trim();
            let f = &self.features[i];
            let v = match &f.kind {
                FeatureKind::Categorical { .. } => {
                    let c = self.category_index(i, raw).ok_or_else(|| {
                        Error::Schema(format!("`{raw}` is not a category of `{}`", f.name))
                    })?;
                    Value::Cat(c)
                }
                FeatureKind::Continuous { .. } => {
                    let x: f64 = raw.parse().map_err(|_| {
                        Error::Schema(format!("`{raw}` is not a number (feature `{}`)", f.name))
                    })?;
                    if x.is_nan() {
                        return Err(Error::Schema(format!("NaN in feature `{}`", f.name)));
                    }
                    Value::Num(x)
                }
            };
            values.push(v);
        }
        Ok(Record::new(values))
    }

    /// Text form of one value, categoricals verbatim.
    pub fn format_value(&self, feature: usize, value: Value) -> String {
        match value {
            Value::Cat(c) => self.category_name(feature, c).to_string(),
            Value::Num(x) => format_num(x),
        }
    }

    /// Reads the sidecar schema format: one `name\t(c|n)[\tcategories]` line
    /// per feature. Continuous lines may carry an explicit `min,max` range;
    /// otherwise the range is filled in from data. An optional
    /// `@target\tname[\tzero,one]` line names the target column and classes.
    pub fn read_sidecar<R: Read>(reader: R) -> Result<SchemaSpec> {
        let mut spec = SchemaSpec::default();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols[0] == "@target" {
                let name = cols
                    .get(1)
                    .ok_or_else(|| Error::Schema(format!("line {}: @target needs a name", lineno + 1)))?;
                spec.target = Some(name.to_string());
                if let Some(names) = cols.get(2) {
                    let parts: Vec<&str> = names.split(',').collect();
                    if parts.len() != 2 {
                        return Err(Error::Schema(format!(
                            "line {}: expected two class names",
                            lineno + 1
                        )));
                    }
                    spec.class_names = Some([parts[0].to_string(), parts[1].to_string()]);
                }
                continue;
            }
            if cols.len() < 2 {
                return Err(Error::Schema(format!("line {}: expected name<TAB>kind", lineno + 1)));
            }
            let name = cols[0].to_string();
            let kind = match cols[1] {
                "c" => {
                    let cats = cols.get(2).ok_or_else(|| {
                        Error::Schema(format!("line {}: categorical `{name}` needs categories", lineno + 1))
                    })?;
                    SidecarKind::Categorical(cats.split(',').map(|s| s.to_string()).collect())
                }
                "n" => match cols.get(2) {
                    Some(r) => {
                        let parts: Vec<&str> = r.split(',').collect();
                        let bad = || Error::Schema(format!("line {}: bad range `{r}`", lineno + 1));
                        if parts.len() != 2 {
                            return Err(bad());
                        }
                        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
                        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
                        SidecarKind::Continuous(Some((lo, hi)))
                    }
                    None => SidecarKind::Continuous(None),
                },
                other => {
                    return Err(Error::Schema(format!(
                        "line {}: unknown kind `{other}` (expected c or n)",
                        lineno + 1
                    )))
                }
            };
            spec.features.push((name, kind));
        }
        if spec.features.is_empty() {
            return Err(Error::Schema("schema file lists no features".into()));
        }
        Ok(spec)
    }

    /// Writes the sidecar format read by [`FeatureSchema::read_sidecar`].
    pub fn to_sidecar(&self) -> String {
        let mut out = String::new();
        for f in &self.features {
            match &f.kind {
                FeatureKind::Categorical { values } => {
                    out.push_str(&format!("{}\tc\t{}\n", f.name, values.join(",")));
                }
                FeatureKind::Continuous { min, max } => {
                    out.push_str(&format!("{}\tn\t{},{}\n", f.name, format_num(*min), format_num(*max)));
                }
            }
        }
        out.push_str(&format!(
            "@target\t{}\t{},{}\n",
            self.target, self.class_names[0], self.class_names[1]
        ));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SidecarKind {
    Categorical(Vec<String>),
    Continuous(Option<(f64, f64)>),
}

/// Schema as declared in a sidecar file, before continuous ranges are known.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SchemaSpec {
    pub features: Vec<(String, SidecarKind)>,
    pub target: Option<String>,
    pub class_names: Option<[String; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Cat(u32),
    Num(f64),
}

impl Value {
    pub fn as_num(self) -> f64 {
        match self {
            Value::Num(x) => x,
            Value::Cat(c) => panic!("expected a numeric value, found category {c}"),
        }
    }

    pub fn as_cat(self) -> u32 {
        match self {
            Value::Cat(c) => c,
            Value::Num(x) => panic!("expected a category, found {x}"),
        }
    }

    fn key(self) -> u64 {
        match self {
            Value::Cat(c) => c as u64,
            // -0.0 and 0.0 compare equal, so they must hash equal too
            Value::Num(x) if x == 0.0 => 0,
            Value::Num(x) => x.to_bits(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    values: Vec<Value>,
}

impl Record {
    pub fn new(values: Vec<Value>) -> Self {
        Record { values }
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn get(&self, i: usize) -> Value {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, v: Value) {
        self.values[i] = v;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Eq for Record {}

impl std::hash::Hash for Record {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        for v in &self.values {
            state.write_u64(v.key());
        }
    }
}

/// Records plus binary labels over a shared schema.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    schema: Arc<FeatureSchema>,
    records: Vec<Record>,
    labels: Vec<Label>,
}

impl LabeledDataset {
    pub fn new(schema: Arc<FeatureSchema>, records: Vec<Record>, labels: Vec<Label>) -> Result<Self> {
        if records.len() != labels.len() {
            return Err(Error::Schema(format!(
                "{} records but {} labels",
                records.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Schema(format!("label {l} is not binary")));
        }
        for r in &records {
            schema.check(r)?;
        }
        Ok(LabeledDataset { schema, records, labels })
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Self> {
        LabeledDataset::new(self.schema.clone(), self.records.clone(), labels)
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Majority label, ties to 0.
    pub fn majority_label(&self) -> Label {
        let [zeros, ones] = self.class_counts();
        if ones > zeros {
            1
        } else {
            0
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        LabeledDataset {
            schema: self.schema.clone(),
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Loads a CSV file (header row) together with its sidecar schema.
    pub fn load(csv_path: &Path, schema_path: &Path) -> Result<Self> {
        let spec = FeatureSchema::read_sidecar(std::fs::File::open(schema_path)?)?;
        let file = std::fs::File::open(csv_path)?;
        Self::from_csv(file, &spec)
    }

    /// Parses CSV data against a sidecar spec. The label column is the
    /// declared target, or else the single header column not named in the
    /// schema.
    pub fn from_csv<R: Read>(reader: R, spec: &SchemaSpec) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
        let mut col_of = Vec::with_capacity(spec.features.len());
        for (name, _) in &spec.features {
            let c = header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("CSV header lacks feature `{name}`")))?;
            col_of.push(c);
        }
        let target_col = match &spec.target {
            Some(t) => header
                .iter()
                .position(|h| h == t)
                .ok_or_else(|| Error::Schema(format!("CSV header lacks target `{t}`")))?,
            None => {
                let extra: Vec<usize> = (0..header.len()).filter(|c| !col_of.contains(c)).collect();
                if extra.len() != 1 {
                    return Err(Error::Schema(format!(
                        "cannot infer the label column: {} unnamed columns",
                        extra.len()
                    )));
                }
                extra[0]
            }
        };

        let mut rows: Vec<Vec<String>> = Vec::new();
        for row in rdr.records() {
            let row = row?;
            rows.push(row.iter().map(|s| s.to_string()).collect());
        }

        let mut features = Vec::with_capacity(spec.features.len());
        for (j, (name, kind)) in spec.features.iter().enumerate() {
            let feature = match kind {
                SidecarKind::Categorical(values) => Feature {
                    name: name.clone(),
                    kind: FeatureKind::Categorical { values: values.clone() },
                },
                SidecarKind::Continuous(range) => {
                    let (lo, hi) = match range {
                        Some(r) => *r,
                        None => {
                            let mut lo = f64::INFINITY;
                            let mut hi = f64::NEG_INFINITY;
                            for row in &rows {
                                if let Ok(x) = row[col_of[j]].parse::<f64>() {
                                    lo = lo.min(x);
                                    hi = hi.max(x);
                                }
                            }
                            if lo > hi {
                                (0.0, 0.0)
                            } else {
                                (lo, hi)
                            }
                        }
                    };
                    Feature::continuous(name.clone(), lo, hi)
                }
            };
            features.push(feature);
        }
        let mut schema = FeatureSchema::new(features)?.with_target(header[target_col].clone());
        if let Some([a, b]) = &spec.class_names {
            schema = schema.with_class_names(a.clone(), b.clone());
        }

        let mut records = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let fields: Vec<&str> = col_of.iter().map(|&c| row[c].as_str()).collect();
            let rec = schema
                .parse_record(&fields)
                .map_err(|e| Error::Schema(format!("data row {}: {e}", i + 1)))?;
            let label = schema.parse_label(&row[target_col]).ok_or_else(|| {
                Error::Schema(format!("data row {}: label `{}` is not binary", i + 1, row[target_col]))
            })?;
            records.push(rec);
            labels.push(label);
        }
        LabeledDataset::new(Arc::new(schema), records, labels)
    }

    /// CSV text with a header row; the inverse of [`LabeledDataset::from_csv`].
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.schema.features().iter().map(|f| f.name.as_str()).collect();
        header.push(self.schema.target());
        w.write_record(&header)?;
        for (r, &l) in self.records.iter().zip(&self.labels) {
            let mut row: Vec<String> = (0..r.len()).map(|i| self.schema.format_value(i, r.get(i))).collect();
            row.push(self.schema.class_name(l).to_string());
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn format_num(x: f64) -> String {
    format!("{x}")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Cat(c) => write!(f, "#{c}"),
            Value::Num(x) => write!(f, "{x}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::continuous("age", 18.0, 90.0),
            Feature::categorical("housing", &["own", "rent", "free"]),
        ])
        .unwrap()
    }

    #[test]
    fn rejects_duplicate_names_and_bad_ranges() {
        let dup = FeatureSchema::new(vec![
            Feature::continuous("a", 0.0, 1.0),
            Feature::continuous("a", 0.0, 1.0),
        ]);
        assert!(dup.is_err());
        assert!(FeatureSchema::new(vec![Feature::continuous("a", 2.0, 1.0)]).is_err());
        assert!(FeatureSchema::new(vec![Feature::categorical("c", &[])]).is_err());
    }

    #[test]
    fn record_checks() {
        let s = schema();
        assert!(s.check(&Record::new(vec![Value::Num(30.0), Value::Cat(2)])).is_ok());
        assert!(s.check(&Record::new(vec![Value::Num(30.0), Value::Cat(3)])).is_err());
        assert!(s.check(&Record::new(vec![Value::Cat(0), Value::Cat(0)])).is_err());
        assert!(s.check(&Record::new(vec![Value::Num(30.0)])).is_err());
    }

    #[test]
    fn labels_must_be_binary() {
        let s = Arc::new(schema());
        let r = Record::new(vec![Value::Num(30.0), Value::Cat(0)]);
        assert!(LabeledDataset::new(s.clone(), vec![r.clone()], vec![2]).is_err());
        assert!(LabeledDataset::new(s, vec![r], vec![]).is_err());
    }

    #[test]
    fn csv_round_trip_with_sidecar() {
        let sidecar = "age\tn\nhousing\tc\town,rent,free\n";
        let csv_text = "age,housing,decision\n30,own,0\n45.5,rent,1\n22,free,1\n";
        let spec = FeatureSchema::read_sidecar(sidecar.as_bytes()).unwrap();
        let data = LabeledDataset::from_csv(csv_text.as_bytes(), &spec).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.labels(), &[0, 1, 1]);
        assert_eq!(data.schema().target(), "decision");
        assert_eq!(
            data.schema().feature(0).kind,
            FeatureKind::Continuous { min: 22.0, max: 45.5 }
        );
        assert_eq!(data.to_csv().unwrap(), csv_text);
    }

    #[test]
    fn csv_rejects_unknown_category() {
        let spec = FeatureSchema::read_sidecar("housing\tc\town,rent\n".as_bytes()).unwrap();
        let err = LabeledDataset::from_csv("housing,y\nboat,1\n".as_bytes(), &spec).unwrap_err();
        assert!(err.to_string().contains("boat"));
    }

    #[test]
    fn target_line_sets_class_names() {
        let sidecar = "x\tn\t0,10\n@target\tCredit\tno,yes\n";
        let spec = FeatureSchema::read_sidecar(sidecar.as_bytes()).unwrap();
        let data = LabeledDataset::from_csv("x,Credit,junk\n1,yes,z\n2,no,z\n".as_bytes(), &spec).unwrap();
        assert_eq!(data.labels(), &[1, 0]);
        assert_eq!(data.schema().class_name(0), "no");
        assert_eq!(data.schema().feature(0).kind, FeatureKind::Continuous { min: 0.0, max: 10.0 });
    }

    #[test]
    fn record_hash_treats_signed_zero_alike() {
        use std::collections::HashSet;
        let a = Record::new(vec![Value::Num(0.0)]);
        let b = Record::new(vec![Value::Num(-0.0)]);
        let set: HashSet<Record> = [a, b].into_iter().collect();
        assert_eq!(set.len(), 1);
    }
}
