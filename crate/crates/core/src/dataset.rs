//! Labeled data, CSV ingestion, preprocessing and stratified splitting.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

/// An `n x p` feature matrix with class labels in `1..=n_classes`.
///
/// Every class in `1..=n_classes` is represented at least once and all
/// features are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    pub feature_names: Option<Vec<String>>,
    pub name: String,
    /// `label_map[k - 1]` is the raw label that was encoded as `k`.
    pub label_map: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset; the number of classes is the largest label.
    pub fn new(name: impl Into<String>, features: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().copied().max().unwrap_or(0);
        Self::with_classes(name, features, labels, n_classes)
    }

    /// Builds a dataset with an explicit label universe `1..=n_classes`.
    pub fn with_classes(
        name: impl Into<String>,
        features: DMatrix<f64>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let (n, p) = features.shape();
        if n < 2 {
            return Err(Error::invalid(format!("a dataset needs at least 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(Error::invalid("a dataset needs at least 1 feature"));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
        }
        if let Some(idx) = features.iter().position(|v| !v.is_finite()) {
            // column-major storage
            return Err(Error::Cell {
                row: idx % n + 1,
                column: format!("{}", idx / n + 1),
                message: "non-finite value".into(),
            });
        }
        let mut seen = vec![false; n_classes];
        for &y in &labels {
            if y == 0 || y > n_classes {
                return Err(Error::invalid(format!("label {y} outside 1..={n_classes}")));
            }
            seen[y - 1] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::ClassTooSmall { class: k + 1, count: 0, required: 1 });
        }
        Ok(Self {
            features,
            labels,
            n_classes,
            feature_names: None,
            name: name.into(),
            label_map: (1..=n_classes).map(|k| k.to_string()).collect(),
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Row `i` copied into a contiguous vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    /// Row indices of class `k`, in row order.
    pub fn class_rows(&self, k: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &y)| (y == k).then_some(i))
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }

    /// The rows of class `k` as a matrix.
    pub fn class_matrix(&self, k: usize) -> DMatrix<f64> {
        self.features.select_rows(self.class_rows(k).iter())
    }

    /// A dataset made of the given rows, keeping the label universe and
    /// metadata. Fails if some class ends up empty.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let features = self.features.select_rows(rows.iter());
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        let mut out = Self::with_classes(self.name.clone(), features, labels, self.n_classes)?;
        out.feature_names = self.feature_names.clone();
        out.label_map = self.label_map.clone();
        Ok(out)
    }

    /// Raw label for an encoded one.
    pub fn decode_label(&self, k: usize) -> Option<&str> {
        k.checked_sub(1).and_then(|i| self.label_map.get(i)).map(String::as_str)
    }

    fn with_features(&self, features: DMatrix<f64>) -> Self {
        Self { features, ..self.clone() }
    }
}

/// Reads a headered CSV where `label_column` holds the class and every other
/// column is a numeric feature.
///
/// Distinct raw labels are sorted (numerically when they all parse as
/// numbers, lexically otherwise) and encoded as `1..=G` in that order.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_csv(file, label_column, &name)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, label_column: &str, name: &str) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Csv(format!("label column {label_column:?} not found in header")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter_map(|(j, h)| (j != label_idx).then(|| h.clone()))
        .collect();
    if feature_names.is_empty() {
        return Err(Error::Csv("no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(Error::Csv(format!(
                "row {} has {} fields, header has {}",
                r + 1,
                record.len(),
                headers.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                raw_labels.push(cell.trim().to_string());
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::Cell {
                row: r + 1,
                column: headers[j].clone(),
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Cell {
                    row: r + 1,
                    column: headers[j].clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
    }

    let n = raw_labels.len();
    let p = feature_names.len();
    let distinct = sorted_distinct(&raw_labels);
    if distinct.len() < 2 {
        return Err(Error::TooFewClasses);
    }
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|raw| distinct.iter().position(|d| d == raw).unwrap() + 1)
        .collect();
    let mut counts = vec![0usize; distinct.len()];
    for &y in &labels {
        counts[y - 1] += 1;
    }
    if let Some(k) = counts.iter().position(|&c| c < 2) {
        return Err(Error::ClassTooSmall { class: k + 1, count: counts[k], required: 2 });
    }

    let features = DMatrix::from_row_slice(n, p, &values);
    let mut ds = LabeledDataset::with_classes(name, features, labels, distinct.len())?;
    ds.feature_names = Some(feature_names);
    ds.label_map = distinct;
    Ok(ds)
}

fn sorted_distinct(raw: &[String]) -> Vec<String> {
    let set: BTreeSet<&String> = raw.iter().collect();
    let mut distinct: Vec<String> = set.into_iter().cloned().collect();
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(keys) = numeric {
        let mut paired: Vec<(f64, String)> = keys.into_iter().zip(distinct).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        distinct = paired.into_iter().map(|(_, s)| s).collect();
    }
    distinct
}

/// Log-transforms every cell, then centers each row at its own median.
pub fn normalize_log_median(ds: &LabeledDataset) -> Result<LabeledDataset> {
    let (n, p) = ds.features.shape();
    let mut out = ds.features.clone();
    for i in 0..n {
        for j in 0..p {
            let v = out[(i, j)];
            if v <= 0.0 {
                return Err(Error::Cell {
                    row: i + 1,
                    column: ds
                        .feature_names
                        .as_ref()
                        .map(|f| f[j].clone())
                        .unwrap_or_else(|| (j + 1).to_string()),
                    message: format!("log-median normalization needs positive values, found {v}"),
                });
            }
            out[(i, j)] = v.ln();
        }
        let row: Vec<f64> = out.row(i).iter().copied().collect();
        let med = crate::estimators::median(&row);
        for j in 0..p {
            out[(i, j)] -= med;
        }
    }
    Ok(ds.with_features(out))
}

/// Class indicators, counts and observed proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMembership {
    /// `n x G` zero/one matrix with `w[(i, k - 1)] = 1` iff row `i` is in class `k`.
    pub indicators: DMatrix<f64>,
    pub counts: Vec<usize>,
    pub proportions: Vec<f64>,
}

pub fn class_membership(ds: &LabeledDataset) -> ClassMembership {
    let n = ds.n_rows();
    let g = ds.n_classes();
    let mut indicators = DMatrix::zeros(n, g);
    for (i, &y) in ds.labels.iter().enumerate() {
        indicators[(i, y - 1)] = 1.0;
    }
    let counts = ds.class_counts();
    let proportions = counts.iter().map(|&c| c as f64 / n as f64).collect();
    ClassMembership { indicators, counts, proportions }
}

/// One replication of the train/test protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPlan {
    pub train_fraction: f64,
    pub seed: u64,
    pub replication_index: u64,
}

impl SplitPlan {
    pub fn new(seed: u64, replication_index: u64) -> Self {
        Self { train_fraction: 2.0 / 3.0, seed, replication_index }
    }

    pub fn replication_seed(&self) -> u64 {
        derive_seed(self.seed, self.replication_index)
    }
}

/// Row indices of a split, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Number of training rows drawn from a class of size `n_k`.
pub fn train_count(n_k: usize, fraction: f64) -> usize {
    // the small slack keeps exact products such as 9 * 2/3 from rounding up
    (fraction * n_k as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Stratified split: each class contributes `ceil(fraction * n_k)` rows to
/// the training part, picked by a seeded shuffle of that class's rows.
pub fn split_indices(ds: &LabeledDataset, plan: &SplitPlan) -> Result<SplitIndices> {
    if !(plan.train_fraction > 0.0 && plan.train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {} outside (0, 1)", plan.train_fraction)));
    }
    let mut rng = rng_from_seed(plan.replication_seed());
    let mut train = Vec::with_capacity(ds.n_rows());
    let mut test = Vec::with_capacity(ds.n_rows());
    for k in 1..=ds.n_classes() {
        let mut rows = ds.class_rows(k);
        let n_k = rows.len();
        let m = train_count(n_k, plan.train_fraction);
        if m == 0 || m >= n_k {
            return Err(Error::ClassTooSmall { class: k, count: n_k, required: 2 });
        }
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..m]);
        test.extend_from_slice(&rows[m..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn split(ds: &LabeledDataset, plan: &SplitPlan) -> Result<(LabeledDataset, LabeledDataset)> {
    let idx = split_indices(ds, plan)?;
    Ok((ds.subset(&idx.train)?, ds.subset(&idx.test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn csv(text: &str) -> Result<LabeledDataset> {
        read_csv(text.as_bytes(), "y", "t")
    }

    #[test]
    fn labels_are_sorted_and_reencoded() {
        let ds = csv("x,y\n1.0,a\n2.0,b\n3.0,a\n4.0,b\n").unwrap();
        assert_eq!(ds.labels(), &[1, 2, 1, 2]);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.decode_label(2), Some("b"));

        let ds = csv("y,x\n10,1\n9,2\n10,3\n9,4\n").unwrap();
        assert_eq!(ds.labels(), &[2, 1, 2, 1]);
        assert_eq!(ds.label_map, vec!["9", "10"]);
    }

    #[test]
    fn three_rows_two_labels_is_a_class_size_error() {
        // {a, b, a} encodes fine but class b has a single row
        let err = csv("x,y\n1,a\n2,b\n3,a\n").unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { class: 2, count: 1, .. }), "{err}");
    }

    #[test]
    fn single_label_is_rejected() {
        let err = csv("x,y\n1,a\n2,a\n3,a\n").unwrap_err();
        assert_eq!(err.to_string(), "fewer than 2 classes");
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let err = csv("x1,x2,y\n1,2,a\n3,NaN,b\n1,1,a\n2,2,b\n").unwrap_err();
        match err {
            Error::Cell { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "x2");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(csv("x,y\n1,a\nabc,b\n").unwrap_err().to_string().contains("row 2"));
    }

    #[test]
    fn missing_file_and_missing_label_column() {
        assert!(matches!(load_csv("/nonexistent/file.csv", "y"), Err(Error::Io { .. })));
        assert!(matches!(csv("x,z\n1,a\n"), Err(Error::Csv(_))));
    }

    #[test]
    fn log_median_rows() {
        let e = std::f64::consts::E;
        let features = DMatrix::from_row_slice(2, 3, &[1.0, e, e * e, 5.0, 5.0, 5.0]);
        let ds = LabeledDataset::new("t", features, vec![1, 2]).unwrap();
        let out = normalize_log_median(&ds).unwrap();
        let expect = [-1.0, 0.0, 1.0];
        for j in 0..3 {
            assert!((out.features()[(0, j)] - expect[j]).abs() < 1e-12);
            assert_eq!(out.features()[(1, j)], 0.0);
        }
    }

    #[test]
    fn log_median_rejects_nonpositive() {
        let features = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let ds = LabeledDataset::new("t", features, vec![1, 2]).unwrap();
        match normalize_log_median(&ds).unwrap_err() {
            Error::Cell { row, column, .. } => assert_eq!((row, column.as_str()), (2, "1")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn membership_counts() {
        let ds = LabeledDataset::new("t", DMatrix::zeros(3, 1), vec![1, 2, 1]).unwrap();
        let m = class_membership(&ds);
        assert_eq!(m.counts, vec![2, 1]);
        assert!((m.proportions[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.proportions[1] - 1.0 / 3.0).abs() < 1e-15);

        let ds = LabeledDataset::new("t", DMatrix::zeros(3, 1), vec![1, 2, 3]).unwrap();
        assert_eq!(class_membership(&ds).indicators, DMatrix::identity(3, 3));

        let ds = LabeledDataset::new("t", DMatrix::zeros(4, 1), vec![1; 4]).unwrap();
        assert_eq!(class_membership(&ds).proportions, vec![1.0]);
    }

    #[test]
    fn split_sizes() {
        let ds = LabeledDataset::new("t", DMatrix::zeros(9, 1), vec![1; 9]).unwrap();
        let idx = split_indices(&ds, &SplitPlan::new(1, 0)).unwrap();
        assert_eq!((idx.train.len(), idx.test.len()), (6, 3));

        let mut labels = vec![1; 40];
        labels.extend(vec![2; 22]);
        let ds = LabeledDataset::new("colon", DMatrix::zeros(62, 1), labels).unwrap();
        let (train, test) = split(&ds, &SplitPlan::new(5, 3)).unwrap();
        assert_eq!(train.class_counts(), vec![27, 15]);
        assert_eq!(test.class_counts(), vec![13, 7]);
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let ds = LabeledDataset::new("t", DMatrix::zeros(30, 1), (0..30).map(|i| i % 2 + 1).collect()).unwrap();
        let a = split_indices(&ds, &SplitPlan::new(11, 4)).unwrap();
        let b = split_indices(&ds, &SplitPlan::new(11, 4)).unwrap();
        let c = split_indices(&ds, &SplitPlan::new(11, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_empty_side() {
        let ds = LabeledDataset::new("t", DMatrix::zeros(3, 1), vec![1, 1, 2]).unwrap();
        assert!(split(&ds, &SplitPlan::new(0, 0)).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_and_stratifies(
            sizes in proptest::collection::vec(3usize..30, 1..4),
            seed in any::<u64>(),
            rep in 0u64..1000,
        ) {
            let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat_n(k + 1, c)).collect();
            let n = labels.len();
            let ds = LabeledDataset::new("p", DMatrix::from_fn(n, 1, |i, _| i as f64), labels).unwrap();
            let idx = split_indices(&ds, &SplitPlan::new(seed, rep)).unwrap();
            let mut all: Vec<usize> = idx.train.iter().chain(&idx.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());

            let train = ds.subset(&idx.train).unwrap();
            let tc = train.class_counts();
            for (k, &n_k) in sizes.iter().enumerate() {
                let full = n_k as f64 / n as f64;
                let part = tc[k] as f64 / idx.train.len() as f64;
                prop_assert!((full - part).abs() <= 1.0 / n_k as f64 + 1e-12);
            }
        }

        #[test]
        fn label_encoding_round_trips(raw in proptest::collection::vec(prop_oneof!["a", "b", "c", "zz"], 8..20)) {
            let mut raw = raw;
            // two rows per class at least
            raw.extend(["a", "a", "b", "b"].iter().map(|s| s.to_string()));
            let mut text = String::from("x,y\n");
            for (i, r) in raw.iter().enumerate() {
                text.push_str(&format!("{i},{r}\n"));
            }
            match csv(&text) {
                Ok(ds) => {
                    for (i, r) in raw.iter().enumerate() {
                        prop_assert_eq!(ds.decode_label(ds.labels()[i]), Some(r.as_str()));
                    }
                }
                Err(Error::ClassTooSmall { .. }) => {}
                Err(e) => prop_assert!(false, "{}", e),
            }
        }

        #[test]
        fn log_median_rows_have_zero_median(rows in proptest::collection::vec(proptest::collection::vec(0.01f64..1e4, 5), 2..6)) {
            let n = rows.len();
            let flat: Vec<f64> = rows.concat();
            let ds = LabeledDataset::new("p", DMatrix::from_row_slice(n, 5, &flat), vec![1; n]).unwrap();
            let out = normalize_log_median(&ds).unwrap();
            for i in 0..n {
                let med = crate::estimators::median(&out.row(i));
                prop_assert!(med.abs() < 1e-12);
            }
        }
    }
}
