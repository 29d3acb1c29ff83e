//! Tabular classification datasets: CSV loading, label encoding and
//! stratified train/test splitting.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

/// Dense feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Row-major, `n_rows * n_features` values.
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_count: usize,
    class_names: Vec<String>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset and checks its invariants.
    pub fn new(
        name: impl Into<String>,
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Dataset> {
        let class_names = (0..class_count).map(|c| c.to_string()).collect();
        let ds = Dataset {
            name: name.into(),
            features,
            n_features,
            labels,
            class_count,
            class_names,
            feature_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Dataset> {
        if names.len() != self.class_count {
            return Err(Error::LengthMismatch(format!(
                "{} class names for {} classes",
                names.len(),
                self.class_count
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Dataset> {
        if names.len() != self.n_features {
            return Err(Error::LengthMismatch(format!(
                "{} feature names for {} features",
                names.len(),
                self.n_features
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    /// Checks shape, label range, class coverage and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, found {}",
                self.class_count
            )));
        }
        if self.n_features == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if self.features.len() != self.labels.len() * self.n_features {
            return Err(Error::LengthMismatch(format!(
                "{} feature values for {} rows of {} features",
                self.features.len(),
                self.labels.len(),
                self.n_features
            )));
        }
        if self.labels.len() < self.class_count {
            return Err(Error::InvalidDataset(format!(
                "{} rows cannot cover {} classes",
                self.labels.len(),
                self.class_count
            )));
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}, column {}",
                pos / self.n_features,
                pos % self.n_features
            )));
        }
        let counts = self.class_counts_checked()?;
        if let Some(c) = counts.iter().position(|&k| k == 0) {
            return Err(Error::InvalidDataset(format!("class {c} has no instances")));
        }
        Ok(())
    }

    fn class_counts_checked(&self) -> Result<Vec<usize>> {
        let mut counts = vec![0; self.class_count];
        for (i, &y) in self.labels.iter().enumerate() {
            if y >= self.class_count {
                return Err(Error::InvalidDataset(format!(
                    "label {y} at row {i} outside 0..{}",
                    self.class_count
                )));
            }
            counts[y] += 1;
        }
        Ok(counts)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Maps a label id back to its original class name.
    pub fn decode_label(&self, label: usize) -> Option<&str> {
        self.class_names.get(label).map(String::as_str)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Copies the given rows into a new dataset that keeps the class space.
    /// The result may miss classes, so it is not revalidated.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        Dataset {
            name: self.name.clone(),
            features,
            n_features: self.n_features,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            class_count: self.class_count,
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Selects the label column of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

impl LabelColumn {
    /// A bare integer is read as a zero-based index, anything else as a name.
    pub fn parse(s: &str) -> LabelColumn {
        match s.trim() {
            "" | "last" => LabelColumn::Last,
            t => match t.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(t.to_string()),
            },
        }
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => write!(f, "{n}"),
            LabelColumn::Last => write!(f, "last"),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "na" | "NaN" | "nan" | "null")
}

/// Loads a comma-separated file.
///
/// Columns where every cell parses as a finite number stay numeric; any other
/// column is ordinally encoded with its distinct values sorted
/// lexicographically. Labels are numbered in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let mut records: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push(rec.iter().map(str::to_string).collect());
    }

    let header = if has_header {
        if records.is_empty() {
            return Err(Error::Empty("csv file has no header"));
        }
        Some(records.remove(0))
    } else {
        None
    };
    if records.is_empty() {
        return Err(Error::Empty("csv file has no data rows"));
    }

    let width = header.as_ref().map_or(records[0].len(), Vec::len);
    if width < 2 {
        return Err(Error::InvalidDataset(
            "need at least one feature column and a label column".into(),
        ));
    }
    let data_offset = usize::from(has_header) + 1;
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Ragged {
                path: path.to_path_buf(),
                row: i + data_offset,
                found: rec.len(),
                expected: width,
            });
        }
    }

    let label_idx = match label {
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => return Err(Error::LabelColumn(i.to_string())),
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::LabelColumn(name.clone()))?,
    };
    let column_name = |c: usize| -> String { header.as_ref().map_or_else(|| c.to_string(), |h| h[c].clone()) };

    for (i, rec) in records.iter().enumerate() {
        if let Some(c) = rec.iter().position(|cell| is_missing(cell)) {
            return Err(Error::MissingValue {
                path: path.to_path_buf(),
                row: i + data_offset,
                column: column_name(c),
            });
        }
    }

    let feature_cols: Vec<usize> = (0..width).filter(|&c| c != label_idx).collect();
    let n = records.len();
    let m = feature_cols.len();
    let mut features = vec![0.0; n * m];
    for (j, &c) in feature_cols.iter().enumerate() {
        let parsed: Option<Vec<f64>> = records
            .iter()
            .map(|r| r[c].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match parsed {
            Some(values) => {
                for (i, v) in values.into_iter().enumerate() {
                    features[i * m + j] = v;
                }
            }
            None => {
                let levels: BTreeSet<&str> = records.iter().map(|r| r[c].as_str()).collect();
                let code: HashMap<&str, f64> = levels.into_iter().enumerate().map(|(k, s)| (s, k as f64)).collect();
                for (i, r) in records.iter().enumerate() {
                    features[i * m + j] = code[r[c].as_str()];
                }
            }
        }
    }

    let mut class_names: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(n);
    for r in &records {
        let name = &r[label_idx];
        let id = match class_names.iter().position(|c| c == name) {
            Some(id) => id,
            None => {
                class_names.push(name.clone());
                class_names.len() - 1
            }
        };
        labels.push(id);
    }
    if class_names.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "{}: only one class present",
            path.display()
        )));
    }

    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    let class_count = class_names.len();
    let mut ds = Dataset::new(name, features, m, labels, class_count)?.with_class_names(class_names)?;
    if let Some(h) = header {
        ds = ds.with_feature_names(feature_cols.iter().map(|&c| h[c].clone()).collect())?;
    }
    Ok(ds)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// A train/test partition of a dataset.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    /// Row indices into the source dataset, in train order.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// False when the split fell back to plain shuffling.
    pub stratified: bool,
}

fn train_count(fraction: f64, n: usize) -> usize {
    // The epsilon absorbs representation error such as 0.8 * 5 = 4.000...01.
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Splits `ds` into train and test sets.
///
/// Each class contributes `floor(train_fraction * n_c)` rows to train and the
/// rest to test. When some class has fewer than two rows, or would put no row
/// into train, the split falls back to a plain shuffle of all rows.
pub fn stratified_split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut rng = seed::rng(seed, &[]);
    let counts = ds.class_counts();
    let stratified = counts.iter().all(|&k| k >= 2 && train_count(train_fraction, k) >= 1);

    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    if stratified {
        for c in 0..ds.class_count() {
            let mut rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels()[i] == c).collect();
            rows.shuffle(&mut rng);
            let k = train_count(train_fraction, rows.len());
            train_rows.extend_from_slice(&rows[..k]);
            test_rows.extend_from_slice(&rows[k..]);
        }
        train_rows.shuffle(&mut rng);
        test_rows.shuffle(&mut rng);
    } else {
        let mut rows: Vec<usize> = (0..ds.n_rows()).collect();
        rows.shuffle(&mut rng);
        let k = train_count(train_fraction, rows.len()).max(1);
        test_rows = rows.split_off(k);
        train_rows = rows;
    }

    Ok(SplitPair {
        train: ds.subset(&train_rows),
        test: ds.subset(&test_rows),
        seed,
        train_rows,
        test_rows,
        stratified,
    })
}
