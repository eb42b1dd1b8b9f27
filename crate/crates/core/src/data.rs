//! Dataset ingestion, schema handling, splitting, bootstrap sampling, and
//! the negative-class feature profile used by the simulated attacker.
//!
//! Data files are RFC-4180-style CSV with a header row. The schema is a
//! separate line-oriented file: one `name,kind[,cat1|cat2|...]` line per
//! feature plus a `label,<column>,<positive_string>` line. All types here
//! are immutable after construction and safe to share across threads.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Binary class label. Positive means malicious.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => write!(f, "positive"),
            Label::Negative => write!(f, "negative"),
        }
    }
}

/// Kind of a feature column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    /// Category names, in declaration order. Values are stored as indices
    /// into this list.
    Categorical(Vec<String>),
}

impl FeatureKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, FeatureKind::Numeric)
    }

    pub fn categories(&self) -> Option<&[String]> {
        match self {
            FeatureKind::Numeric => None,
            FeatureKind::Categorical(c) => Some(c),
        }
    }
}

/// One feature column: name plus kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
}

/// Declarative description of a dataset: ordered features, the label
/// column, and which label string counts as positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
    label_column: String,
    positive_label: String,
}

impl FeatureSchema {
    pub fn new(
        features: Vec<FeatureDef>,
        label_column: impl Into<String>,
        positive_label: impl Into<String>,
    ) -> Result<Self> {
        let label_column = label_column.into();
        let mut seen = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            if let Some(_prev) = seen.insert(f.name.clone(), i) {
                return Err(Error::Schema(format!("duplicate feature name '{}'", f.name)));
            }
            if f.name == label_column {
                return Err(Error::Schema(format!(
                    "label column '{label_column}' must not be listed among features"
                )));
            }
            if let FeatureKind::Categorical(cats) = &f.kind {
                if cats.is_empty() {
                    return Err(Error::Schema(format!(
                        "feature '{}' has an empty category list",
                        f.name
                    )));
                }
            }
        }
        Ok(Self {
            features,
            label_column,
            positive_label: positive_label.into(),
        })
    }

    /// Convenience constructor for an all-numeric schema.
    pub fn numeric(names: &[&str], label_column: &str, positive_label: &str) -> Result<Self> {
        Self::new(
            names
                .iter()
                .map(|n| FeatureDef {
                    name: (*n).to_string(),
                    kind: FeatureKind::Numeric,
                })
                .collect(),
            label_column,
            positive_label,
        )
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn positive_label(&self) -> &str {
        &self.positive_label
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Parse the line-oriented schema format:
    ///
    /// ```text
    /// word_freq_make,numeric
    /// protocol,categorical,tcp|udp|icmp
    /// label,is_spam,1
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut features = Vec::new();
        let mut label: Option<(String, String)> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let first = parts.next().unwrap_or("").trim();
            let second = parts.next().map(str::trim);
            let third = parts.next().map(str::trim);
            if first == "label" {
                match (second, third) {
                    (Some(col), Some(pos)) if !col.is_empty() && !pos.is_empty() => {
                        if label.is_some() {
                            return Err(Error::Schema(format!(
                                "line {}: duplicate label declaration",
                                lineno + 1
                            )));
                        }
                        label = Some((col.to_string(), pos.to_string()));
                    }
                    _ => {
                        return Err(Error::Schema(format!(
                            "line {}: label line must be 'label,<column>,<positive_string>'",
                            lineno + 1
                        )))
                    }
                }
                continue;
            }
            let kind = match (second, third) {
                (Some("numeric"), None) => FeatureKind::Numeric,
                (Some("categorical"), Some(cats)) => {
                    let cats: Vec<String> = cats
                        .split('|')
                        .map(|c| c.trim().to_string())
                        .filter(|c| !c.is_empty())
                        .collect();
                    if cats.is_empty() {
                        return Err(Error::Schema(format!(
                            "line {}: categorical feature '{}' needs at least one category",
                            lineno + 1,
                            first
                        )));
                    }
                    FeatureKind::Categorical(cats)
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "line {}: expected 'name,numeric' or 'name,categorical,a|b|...'",
                        lineno + 1
                    )))
                }
            };
            features.push(FeatureDef {
                name: first.to_string(),
                kind,
            });
        }
        let (label_column, positive_label) =
            label.ok_or_else(|| Error::Schema("schema file has no label line".into()))?;
        if features.is_empty() {
            return Err(Error::Schema("schema file declares no features".into()));
        }
        Self::new(features, label_column, positive_label)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Render in the same line-oriented format accepted by [`parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.features {
            match &f.kind {
                FeatureKind::Numeric => out.push_str(&format!("{},numeric\n", f.name)),
                FeatureKind::Categorical(cats) => {
                    out.push_str(&format!("{},categorical,{}\n", f.name, cats.join("|")))
                }
            }
        }
        out.push_str(&format!(
            "label,{},{}\n",
            self.label_column, self.positive_label
        ));
        out
    }
}

/// A single feature value. Categorical values are indices into the schema
/// category list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Num(f64),
    Cat(usize),
}

impl Value {
    pub fn as_num(self) -> f64 {
        match self {
            Value::Num(v) => v,
            Value::Cat(_) => panic!("categorical value used as numeric"),
        }
    }

    pub fn as_cat(self) -> usize {
        match self {
            Value::Cat(c) => c,
            Value::Num(_) => panic!("numeric value used as categorical"),
        }
    }
}

/// One row of feature values in schema order.
pub type Instance = Vec<Value>;

/// Schema-typed instance table with binary labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    rows: Vec<Instance>,
    labels: Vec<Label>,
}

impl Dataset {
    /// Build a dataset from parts, validating every value against the schema.
    pub fn new(schema: Arc<FeatureSchema>, rows: Vec<Instance>, labels: Vec<Label>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::BadParam(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.n_features() {
                return Err(Error::BadParam(format!(
                    "row {}: {} values for {} schema features",
                    r + 1,
                    row.len(),
                    schema.n_features()
                )));
            }
            for (j, (v, f)) in row.iter().zip(schema.features()).enumerate() {
                match (v, &f.kind) {
                    (Value::Num(x), FeatureKind::Numeric) => {
                        if !x.is_finite() {
                            return Err(Error::NonFinite {
                                row: r + 1,
                                column: schema.features()[j].name.clone(),
                            });
                        }
                    }
                    (Value::Cat(c), FeatureKind::Categorical(cats)) => {
                        if *c >= cats.len() {
                            return Err(Error::UnknownCategory {
                                row: r + 1,
                                column: f.name.clone(),
                                value: format!("#{c}"),
                            });
                        }
                    }
                    _ => {
                        return Err(Error::BadParam(format!(
                            "row {}: value kind mismatch in column '{}'",
                            r + 1,
                            f.name
                        )))
                    }
                }
            }
        }
        Ok(Self {
            schema,
            rows,
            labels,
        })
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &Instance {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn rows(&self) -> &[Instance] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn count_label(&self, l: Label) -> usize {
        self.labels.iter().filter(|&&x| x == l).count()
    }

    pub fn positives(&self) -> usize {
        self.count_label(Label::Positive)
    }

    /// Indices of rows carrying the given label.
    pub fn indices_with_label(&self, l: Label) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.labels[i] == l).collect()
    }

    /// New dataset holding copies of the selected rows.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Write as CSV in schema order with the label column last.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.schema.features().iter().map(|f| f.name.as_str()).collect();
        header.push(self.schema.label_column());
        w.write_record(&header)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = Vec::with_capacity(row.len() + 1);
            for (v, f) in row.iter().zip(self.schema.features()) {
                match (v, &f.kind) {
                    (Value::Num(x), _) => rec.push(format!("{x}")),
                    (Value::Cat(c), FeatureKind::Categorical(cats)) => rec.push(cats[*c].clone()),
                    (Value::Cat(_), FeatureKind::Numeric) => unreachable!("validated at build"),
                }
            }
            rec.push(match label {
                Label::Positive => self.schema.positive_label().to_string(),
                Label::Negative => negative_label_string(&self.schema),
            });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn negative_label_string(schema: &FeatureSchema) -> String {
    // Any stable string distinct from the positive label works on re-load.
    if schema.positive_label() == "0" {
        "1".to_string()
    } else {
        "0".to_string()
    }
}

/// Load a CSV file against a schema. Columns may appear in any order in the
/// file; the returned dataset is in schema order. The file must contain at
/// least one row of each class.
pub fn load_dataset(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let position_of = |name: &str| -> Option<usize> { headers.iter().position(|h| h == name) };

    let mut feature_cols = Vec::with_capacity(schema.n_features());
    for f in schema.features() {
        feature_cols
            .push(position_of(&f.name).ok_or_else(|| Error::MissingColumn(f.name.clone()))?);
    }
    let label_col = position_of(schema.label_column())
        .ok_or_else(|| Error::MissingColumn(schema.label_column().to_string()))?;

    let mut rows: Vec<Instance> = Vec::new();
    let mut labels: Vec<Label> = Vec::new();
    let mut negative_string: Option<String> = None;

    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let rownum = r + 1; // 1-based, excluding the header
        let mut row: Instance = Vec::with_capacity(schema.n_features());
        for (f, &col) in schema.features().iter().zip(&feature_cols) {
            let cell = record.get(col).unwrap_or("");
            match &f.kind {
                FeatureKind::Numeric => {
                    let v: f64 = cell.parse().map_err(|_| Error::BadNumeric {
                        row: rownum,
                        column: f.name.clone(),
                        value: cell.to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            row: rownum,
                            column: f.name.clone(),
                        });
                    }
                    row.push(Value::Num(v));
                }
                FeatureKind::Categorical(cats) => {
                    let idx = cats.iter().position(|c| c == cell).ok_or_else(|| {
                        Error::UnknownCategory {
                            row: rownum,
                            column: f.name.clone(),
                            value: cell.to_string(),
                        }
                    })?;
                    row.push(Value::Cat(idx));
                }
            }
        }
        let label_cell = record.get(label_col).unwrap_or("");
        let label = if label_cell == schema.positive_label() {
            Label::Positive
        } else {
            match &negative_string {
                Some(neg) if neg == label_cell => Label::Negative,
                Some(_) => {
                    return Err(Error::UnknownLabel {
                        row: rownum,
                        value: label_cell.to_string(),
                    })
                }
                None => {
                    negative_string = Some(label_cell.to_string());
                    Label::Negative
                }
            }
        };
        rows.push(row);
        labels.push(label);
    }

    let ds = Dataset::new(Arc::new(schema.clone()), rows, labels)?;
    if ds.positives() == 0 || ds.count_label(Label::Negative) == 0 {
        return Err(Error::MissingClass);
    }
    Ok(ds)
}

/// Uniform random partition without replacement. The union of the two
/// parts equals the input, deterministic per seed.
pub fn split_train_test(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::BadFraction(train_fraction));
    }
    let n = d.n_rows();
    if n < 2 {
        return Err(Error::BadParam(
            "dataset too small to split into nonempty parts".into(),
        ));
    }
    let n_train = (((n as f64) * train_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed));
    let (train_idx, test_idx) = order.split_at(n_train);
    let mut train_idx = train_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((d.subset(&train_idx), d.subset(&test_idx)))
}

/// Stratified variant of [`split_train_test`]: the fraction is applied
/// within each class independently.
pub fn split_train_test_stratified(
    d: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::BadFraction(train_fraction));
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (stream, label) in [(0u64, Label::Positive), (1u64, Label::Negative)] {
        let mut idx = d.indices_with_label(label);
        idx.shuffle(&mut rng_from(crate::rng::derive(seed, stream)));
        let k = ((idx.len() as f64) * train_fraction).round() as usize;
        let k = k.clamp(1, idx.len().saturating_sub(1).max(1));
        train_idx.extend_from_slice(&idx[..k.min(idx.len())]);
        test_idx.extend_from_slice(&idx[k.min(idx.len())..]);
    }
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::BadParam(
            "dataset too small for a stratified split".into(),
        ));
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((d.subset(&train_idx), d.subset(&test_idx)))
}

/// Group-key split: rows sharing a key never straddle the partition.
/// `train_fraction` applies to the number of distinct keys. Generalizes
/// time-based splits such as "first 10 days for training".
pub fn split_by_group(
    d: &Dataset,
    row_keys: &[u64],
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if row_keys.len() != d.n_rows() {
        return Err(Error::BadParam("one group key per row required".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::BadFraction(train_fraction));
    }
    let mut keys: Vec<u64> = row_keys.to_vec();
    keys.sort_unstable();
    keys.dedup();
    if keys.len() < 2 {
        return Err(Error::BadParam(
            "group split needs at least two distinct keys".into(),
        ));
    }
    keys.shuffle(&mut rng_from(seed));
    let k = (((keys.len() as f64) * train_fraction).round() as usize).clamp(1, keys.len() - 1);
    let train_keys: std::collections::HashSet<u64> = keys[..k].iter().copied().collect();
    let train_idx: Vec<usize> = (0..d.n_rows())
        .filter(|&i| train_keys.contains(&row_keys[i]))
        .collect();
    let test_idx: Vec<usize> = (0..d.n_rows())
        .filter(|&i| !train_keys.contains(&row_keys[i]))
        .collect();
    Ok((d.subset(&train_idx), d.subset(&test_idx)))
}

/// Uniform sample with replacement of the requested size.
pub fn bootstrap_sample(d: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    if d.is_empty() {
        return Err(Error::BadParam("cannot bootstrap an empty dataset".into()));
    }
    if size == 0 {
        return Err(Error::BadParam("bootstrap size must be positive".into()));
    }
    let mut rng = rng_from(seed);
    let n = d.n_rows();
    let idx: Vec<usize> = (0..size)
        .map(|_| rand::Rng::gen_range(&mut rng, 0..n))
        .collect();
    Ok(d.subset(&idx))
}

/// Per-feature substitution values learned from benign traffic: the mean of
/// each numeric feature and the mode of each categorical feature over
/// negative instances.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeProfile {
    values: Vec<Value>,
}

impl NegativeProfile {
    pub fn value(&self, feature: usize) -> Value {
        self.values[feature]
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }
}

/// Compute the [`NegativeProfile`] of a dataset.
pub fn negative_profile(d: &Dataset) -> Result<NegativeProfile> {
    let neg: Vec<usize> = d.indices_with_label(Label::Negative);
    if neg.is_empty() {
        return Err(Error::NoNegativeInstances);
    }
    let mut values = Vec::with_capacity(d.n_features());
    for (j, f) in d.schema().features().iter().enumerate() {
        match &f.kind {
            FeatureKind::Numeric => {
                let sum: f64 = neg.iter().map(|&i| d.row(i)[j].as_num()).sum();
                values.push(Value::Num(sum / neg.len() as f64));
            }
            FeatureKind::Categorical(cats) => {
                let mut counts = vec![0usize; cats.len()];
                for &i in &neg {
                    counts[d.row(i)[j].as_cat()] += 1;
                }
                // Ties break toward the earlier category in schema order.
                let mode = counts
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                values.push(Value::Cat(mode));
            }
        }
    }
    Ok(NegativeProfile { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn mixed_schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                FeatureDef {
                    name: "duration".into(),
                    kind: FeatureKind::Numeric,
                },
                FeatureDef {
                    name: "protocol".into(),
                    kind: FeatureKind::Categorical(vec!["tcp".into(), "udp".into(), "icmp".into()]),
                },
            ],
            "class",
            "attack",
        )
        .unwrap()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn schema_round_trip() {
        let s = mixed_schema();
        let parsed = FeatureSchema::parse(&s.to_text()).unwrap();
        assert_eq!(s, parsed);
    }

    #[test]
    fn schema_rejects_duplicates_and_label_overlap() {
        assert!(FeatureSchema::numeric(&["a", "a"], "y", "1").is_err());
        assert!(FeatureSchema::numeric(&["a", "y"], "y", "1").is_err());
    }

    #[test]
    fn load_reorders_columns_to_schema_order() {
        let f = write_temp("class,protocol,duration\nattack,udp,1.5\nnormal,tcp,0.5\n");
        let ds = load_dataset(f.path(), &mixed_schema()).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.row(0)[0], Value::Num(1.5));
        assert_eq!(ds.row(0)[1], Value::Cat(1));
        assert_eq!(ds.label(0), Label::Positive);
        assert_eq!(ds.label(1), Label::Negative);
    }

    #[test]
    fn load_rejects_header_only_file() {
        let f = write_temp("duration,protocol,class\n");
        let err = load_dataset(f.path(), &mixed_schema()).unwrap_err();
        assert!(matches!(err, Error::MissingClass), "{err}");
    }

    #[test]
    fn load_reports_unknown_category_with_row() {
        let f = write_temp("duration,protocol,class\n1.0,tcp,attack\n2.0,gre,normal\n3.0,udp,normal\n");
        let err = load_dataset(f.path(), &mixed_schema()).unwrap_err();
        match err {
            Error::UnknownCategory { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "protocol");
                assert_eq!(value, "gre");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn load_reports_bad_numeric_and_missing_column() {
        let f = write_temp("duration,protocol,class\nxyz,tcp,attack\n1.0,udp,normal\n");
        let err = load_dataset(f.path(), &mixed_schema()).unwrap_err();
        assert!(matches!(err, Error::BadNumeric { row: 1, .. }), "{err}");

        let f = write_temp("protocol,class\ntcp,attack\n");
        let err = load_dataset(f.path(), &mixed_schema()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "duration"));
    }

    #[test]
    fn load_rejects_third_label_string() {
        let f = write_temp("duration,protocol,class\n1.0,tcp,attack\n2.0,udp,normal\n3.0,udp,weird\n");
        let err = load_dataset(f.path(), &mixed_schema()).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { row: 3, .. }), "{err}");
    }

    fn tiny_numeric(n_pos: usize, n_neg: usize) -> Dataset {
        let schema = Arc::new(FeatureSchema::numeric(&["x"], "y", "1").unwrap());
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_pos {
            rows.push(vec![Value::Num(100_000.0 + i as f64)]);
            labels.push(Label::Positive);
        }
        for i in 0..n_neg {
            rows.push(vec![Value::Num(i as f64)]);
            labels.push(Label::Negative);
        }
        Dataset::new(schema, rows, labels).unwrap()
    }

    #[test]
    fn split_is_a_partition_and_deterministic() {
        let d = tiny_numeric(6, 4);
        let (tr1, te1) = split_train_test(&d, 0.5, 99).unwrap();
        let (tr2, te2) = split_train_test(&d, 0.5, 99).unwrap();
        assert_eq!(tr1.rows(), tr2.rows());
        assert_eq!(te1.rows(), te2.rows());
        assert_eq!(tr1.n_rows() + te1.n_rows(), d.n_rows());
        // Every input row appears exactly once across the two parts
        // (row values here are unique by construction).
        let mut seen: Vec<f64> = tr1
            .rows()
            .iter()
            .chain(te1.rows())
            .map(|r| r[0].as_num())
            .collect();
        seen.sort_by(f64::total_cmp);
        let mut expect: Vec<f64> = d.rows().iter().map(|r| r[0].as_num()).collect();
        expect.sort_by(f64::total_cmp);
        assert_eq!(seen, expect);
    }

    #[test]
    fn split_differs_across_seeds() {
        let d = tiny_numeric(5, 5);
        let mut any_diff = false;
        for s in 0..20u64 {
            let (a, _) = split_train_test(&d, 0.7, s).unwrap();
            let (b, _) = split_train_test(&d, 0.7, s + 1000).unwrap();
            if a.rows() != b.rows() {
                any_diff = true;
                break;
            }
        }
        assert!(any_diff, "20 seed pairs produced identical partitions");
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let d = tiny_numeric(3, 3);
        assert!(matches!(split_train_test(&d, 0.0, 1), Err(Error::BadFraction(_))));
        assert!(matches!(split_train_test(&d, 1.0, 1), Err(Error::BadFraction(_))));
    }

    #[test]
    fn stratified_split_preserves_class_ratios() {
        let d = tiny_numeric(10, 30);
        let (tr, te) = split_train_test_stratified(&d, 0.5, 7).unwrap();
        assert_eq!(tr.positives(), 5);
        assert_eq!(te.positives(), 5);
        assert_eq!(tr.n_rows(), 20);
    }

    #[test]
    fn group_split_never_straddles_a_key() {
        let d = tiny_numeric(4, 4);
        let keys = vec![0, 0, 1, 1, 2, 2, 3, 3];
        let (tr, te) = split_by_group(&d, &keys, 0.5, 3).unwrap();
        assert_eq!(tr.n_rows() % 2, 0);
        assert_eq!(te.n_rows() % 2, 0);
        assert_eq!(tr.n_rows() + te.n_rows(), 8);
    }

    #[test]
    fn bootstrap_of_single_row_repeats_it() {
        let d = tiny_numeric(1, 1).subset(&[0]);
        let b = bootstrap_sample(&d, 5, 42).unwrap();
        assert_eq!(b.n_rows(), 5);
        assert!(b.rows().iter().all(|r| r == d.row(0)));
    }

    #[test]
    fn bootstrap_is_deterministic_per_seed() {
        let d = tiny_numeric(10, 10);
        let a = bootstrap_sample(&d, 20, 5).unwrap();
        let b = bootstrap_sample(&d, 20, 5).unwrap();
        assert_eq!(a.rows(), b.rows());
        assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn bootstrap_distinct_fraction_near_632() {
        let d = tiny_numeric(100, 100);
        let n = d.n_rows();
        let mut total = 0.0;
        for seed in 0..100u64 {
            let b = bootstrap_sample(&d, n, seed).unwrap();
            let mut vals: Vec<f64> = b.rows().iter().map(|r| r[0].as_num()).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            total += vals.len() as f64 / n as f64;
        }
        let mean = total / 100.0;
        let expect = 1.0 - (-1.0f64).exp();
        assert!(
            (mean - expect).abs() < 0.03,
            "distinct fraction {mean} not within 0.03 of {expect}"
        );
    }

    #[test]
    fn negative_profile_means_and_modes() {
        let schema = Arc::new(mixed_schema());
        let rows = vec![
            vec![Value::Num(9.0), Value::Cat(2)], // positive, ignored
            vec![Value::Num(2.0), Value::Cat(0)],
            vec![Value::Num(4.0), Value::Cat(0)],
            vec![Value::Num(0.0), Value::Cat(1)],
        ];
        let labels = vec![
            Label::Positive,
            Label::Negative,
            Label::Negative,
            Label::Negative,
        ];
        let d = Dataset::new(schema, rows, labels).unwrap();
        let p = negative_profile(&d).unwrap();
        assert_eq!(p.value(0), Value::Num(2.0));
        assert_eq!(p.value(1), Value::Cat(0));
    }

    #[test]
    fn negative_profile_requires_negatives() {
        let schema = Arc::new(FeatureSchema::numeric(&["x"], "y", "1").unwrap());
        let d = Dataset::new(schema, vec![vec![Value::Num(1.0)]], vec![Label::Positive]).unwrap();
        assert!(matches!(negative_profile(&d), Err(Error::NoNegativeInstances)));
    }

    #[test]
    fn negative_profile_is_permutation_invariant() {
        let d = tiny_numeric(3, 7);
        let p1 = negative_profile(&d).unwrap();
        let rev: Vec<usize> = (0..d.n_rows()).rev().collect();
        let p2 = negative_profile(&d.subset(&rev)).unwrap();
        assert_eq!(p1, p2);
    }
}
