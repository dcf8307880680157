//! Tabular classification datasets: CSV loading, stratified train/test
//! splits, cross-validation folds, and train-driven min-max scaling.
//!
//! A [`Dataset`] is immutable after construction and shared behind an
//! `Arc`, so any number of evaluation workers can read it concurrently.
//! [`DatasetView`]s are cheap index lists over a shared dataset.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};

/// Where the class label lives in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    First,
    Last,
    Named(String),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "first" => LabelColumn::First,
            "last" => LabelColumn::Last,
            other => LabelColumn::Named(other.to_string()),
        })
    }
}

impl std::fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelColumn::First => write!(f, "first"),
            LabelColumn::Last => write!(f, "last"),
            LabelColumn::Named(name) => write!(f, "{name}"),
        }
    }
}

/// An immutable numeric feature matrix with integer class labels.
///
/// Labels are re-coded to `0..class_count` in first-appearance order;
/// the original label text is kept in `class_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Vec<f64>, // row-major, n x d
    labels: Vec<u32>,
    n: usize,
    d: usize,
    class_count: usize,
    class_names: Vec<String>,
}

pub type SharedDataset = Arc<Dataset>;

impl Dataset {
    /// Builds a dataset from parts, checking every invariant: finite
    /// features, contiguous labels, at least two classes.
    pub fn from_parts(
        name: impl Into<String>,
        features: Vec<f64>,
        labels: Vec<u32>,
        d: usize,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        let n = labels.len();
        let invalid = |reason: String| Error::InvalidDataset {
            name: name.clone(),
            reason,
        };
        if d == 0 {
            return Err(invalid("feature count must be at least 1".into()));
        }
        if features.len() != n * d {
            return Err(invalid(format!(
                "feature matrix has {} values, expected {}x{}",
                features.len(),
                n,
                d
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite value at row {}, feature {}",
                pos / d,
                pos % d
            )));
        }
        let class_count = class_names.len();
        if class_count < 2 {
            return Err(invalid("at least two classes are required".into()));
        }
        if n < class_count {
            return Err(invalid(format!(
                "{n} instances cannot cover {class_count} classes"
            )));
        }
        let mut seen = vec![false; class_count];
        for &l in &labels {
            let l = l as usize;
            if l >= class_count {
                return Err(invalid(format!("label {l} out of range 0..{class_count}")));
            }
            seen[l] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(invalid("labels are not contiguous 0..class_count".into()));
        }
        Ok(Dataset {
            name,
            features,
            labels,
            n,
            d,
            class_count,
            class_names,
        })
    }

    pub fn into_shared(self) -> SharedDataset {
        Arc::new(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn instance_count(&self) -> usize {
        self.n
    }

    pub fn feature_count(&self) -> usize {
        self.d
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    /// Writes the dataset as a headered CSV with the label in the last
    /// column, the format `load_dataset` reads back.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = String::new();
        for j in 0..self.d {
            out.push_str(&format!("f{},", j + 1));
        }
        out.push_str("label\n");
        for i in 0..self.n {
            for v in self.row(i) {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&self.class_names[self.label(i) as usize]);
            out.push('\n');
        }
        let mut file = File::create(path).map_err(io_err)?;
        file.write_all(out.as_bytes()).map_err(io_err)
    }
}

/// Loads a headered CSV file, re-coding labels by first appearance.
///
/// Every feature cell must parse as a finite number; violations are
/// reported with their 1-based row (excluding the header) and column.
pub fn load_dataset(path: &Path, label: &LabelColumn) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?
        .clone();
    let width = headers.len();
    let label_idx = match label {
        LabelColumn::First => 0,
        LabelColumn::Last => width.saturating_sub(1),
        LabelColumn::Named(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingLabelColumn {
                path: path.to_path_buf(),
                name: name.clone(),
            })?,
    };
    if width < 2 {
        return Err(Error::NoFeatures {
            path: path.to_path_buf(),
        });
    }
    let d = width - 1;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_ids: HashMap<String, u32> = HashMap::new();
    let mut class_names = Vec::new();

    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        if record.len() != width {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row,
                expected: width,
                got: record.len(),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                let text = cell.to_string();
                if text.is_empty() {
                    return Err(Error::BadCell {
                        path: path.to_path_buf(),
                        row,
                        column: col + 1,
                        value: text,
                    });
                }
                let next_id = class_ids.len() as u32;
                let id = *class_ids.entry(text.clone()).or_insert_with(|| {
                    class_names.push(text);
                    next_id
                });
                labels.push(id);
            } else {
                let value: f64 = cell.parse().map_err(|_| Error::BadCell {
                    path: path.to_path_buf(),
                    row,
                    column: col + 1,
                    value: cell.to_string(),
                })?;
                if !value.is_finite() {
                    return Err(Error::BadCell {
                        path: path.to_path_buf(),
                        row,
                        column: col + 1,
                        value: cell.to_string(),
                    });
                }
                features.push(value);
            }
        }
    }

    if class_names.len() < 2 {
        return Err(Error::SingleClass {
            path: path.to_path_buf(),
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Dataset::from_parts(name, features, labels, d, class_names)
}

/// Per-row fold ids, parallel to a view's row list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    ids: Vec<usize>,
    count: usize,
}

#[cfg(test)]
impl FoldAssignment {
    pub(crate) fn for_test(ids: Vec<usize>, count: usize) -> Self {
        FoldAssignment { ids, count }
    }
}

/// An ordered selection of dataset rows, optionally carrying fold ids.
#[derive(Debug, Clone)]
pub struct DatasetView {
    data: SharedDataset,
    rows: Vec<usize>,
    folds: Option<FoldAssignment>,
}

impl DatasetView {
    /// A view over every row of the dataset, in order.
    pub fn full(data: SharedDataset) -> Self {
        let rows = (0..data.instance_count()).collect();
        DatasetView {
            data,
            rows,
            folds: None,
        }
    }

    /// A view over the given rows; rows must be distinct and in range.
    pub fn new(data: SharedDataset, rows: Vec<usize>) -> Result<Self> {
        let n = data.instance_count();
        let mut seen = vec![false; n];
        for &r in &rows {
            if r >= n {
                return Err(Error::InvalidView(format!("row {r} out of range 0..{n}")));
            }
            if seen[r] {
                return Err(Error::InvalidView(format!("row {r} appears twice")));
            }
            seen[r] = true;
        }
        Ok(DatasetView {
            data,
            rows,
            folds: None,
        })
    }

    pub fn dataset(&self) -> &SharedDataset {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn feature_count(&self) -> usize {
        self.data.feature_count()
    }

    /// Feature row of the `i`-th view element.
    pub fn feature(&self, i: usize) -> &[f64] {
        self.data.row(self.rows[i])
    }

    /// Label of the `i`-th view element.
    pub fn label(&self, i: usize) -> u32 {
        self.data.label(self.rows[i])
    }

    pub fn fold_count(&self) -> Option<usize> {
        self.folds.as_ref().map(|f| f.count)
    }

    pub fn fold_of(&self, i: usize) -> Option<usize> {
        self.folds.as_ref().map(|f| f.ids[i])
    }

    #[cfg(test)]
    pub(crate) fn set_folds_for_test(&mut self, folds: FoldAssignment) {
        self.folds = Some(folds);
    }

    fn class_groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.data.class_count()];
        for (i, &row) in self.rows.iter().enumerate() {
            groups[self.data.label(row) as usize].push(i);
        }
        groups
    }

    /// Assigns stratified fold ids: rows are dealt class by class onto a
    /// single rotating cursor, so global fold sizes differ by at most one
    /// and each class spreads as evenly as the arithmetic allows. Classes
    /// smaller than the fold count degrade to the same round-robin deal.
    pub fn assign_folds(&self, folds: usize, seed: u64) -> Result<DatasetView> {
        if folds < 2 {
            return Err(Error::InvalidArgument(format!(
                "fold count must be at least 2, got {folds}"
            )));
        }
        if folds > self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot assign {folds} folds over {} rows",
                self.len()
            )));
        }
        let mut ids = vec![0usize; self.len()];
        let mut cursor = 0usize;
        for (class, mut members) in self.class_groups().into_iter().enumerate() {
            let mut rng = substream(seed, class as u64, 0, Purpose::Folds);
            members.shuffle(&mut rng);
            for i in members {
                ids[i] = cursor % folds;
                cursor += 1;
            }
        }
        Ok(DatasetView {
            data: self.data.clone(),
            rows: self.rows.clone(),
            folds: Some(FoldAssignment { ids, count: folds }),
        })
    }
}

/// Splits a dataset into disjoint train/test views, stratified per class.
///
/// The train side receives `round(train_fraction * n)` rows in total,
/// apportioned to classes by largest remainder so each class lands within
/// one row of `train_fraction * class_size`. Membership is decided by a
/// seeded shuffle; row order within each view is ascending.
pub fn split_train_test(
    ds: &SharedDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(DatasetView, DatasetView)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let n = ds.instance_count();
    let mut by_class = vec![Vec::new(); ds.class_count()];
    for row in 0..n {
        by_class[ds.label(row) as usize].push(row);
    }

    let target_total = (train_fraction * n as f64).round() as usize;
    let mut base: Vec<usize> = Vec::with_capacity(by_class.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(by_class.len());
    for (class, members) in by_class.iter().enumerate() {
        let exact = train_fraction * members.len() as f64;
        let floor = exact.floor() as usize;
        base.push(floor);
        remainders.push((class, exact - floor as f64));
    }
    let mut extras = target_total.saturating_sub(base.iter().sum::<usize>());
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for (class, _) in remainders {
        if extras == 0 {
            break;
        }
        if base[class] < by_class[class].len() {
            base[class] += 1;
            extras -= 1;
        }
    }

    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (class, members) in by_class.iter().enumerate() {
        let take = base[class];
        if take == 0 {
            return Err(Error::EmptyTrainClass {
                fraction: train_fraction,
                class: class as u32,
            });
        }
        let mut shuffled = members.clone();
        let mut rng = substream(seed, class as u64, 0, Purpose::Split);
        shuffled.shuffle(&mut rng);
        train_rows.extend_from_slice(&shuffled[..take]);
        test_rows.extend_from_slice(&shuffled[take..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok((
        DatasetView::new(ds.clone(), train_rows)?,
        DatasetView::new(ds.clone(), test_rows)?,
    ))
}

/// Per-feature min/max observed on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizeParams {
    /// Maps one value into [0,1]; constant training features map to 0.
    pub fn apply(&self, feature: usize, value: f64) -> f64 {
        let (min, max) = (self.min[feature], self.max[feature]);
        if max > min {
            ((value - min) / (max - min)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Min-max scales both views using statistics from the train view only.
/// Test values falling outside the train range are clamped to [0,1].
/// Returns fresh views over a rescaled copy of the dataset; fold
/// assignments carry over unchanged.
pub fn normalize(
    train: &DatasetView,
    test: &DatasetView,
) -> Result<(DatasetView, DatasetView, NormalizeParams)> {
    if !Arc::ptr_eq(&train.data, &test.data) {
        return Err(Error::InvalidArgument(
            "train and test views must reference the same dataset".into(),
        ));
    }
    let ds = &train.data;
    let d = ds.feature_count();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for i in 0..train.len() {
        for (j, &v) in train.feature(i).iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    let params = NormalizeParams { min, max };

    let n = ds.instance_count();
    let mut features = Vec::with_capacity(n * d);
    for row in 0..n {
        for (j, &v) in ds.row(row).iter().enumerate() {
            features.push(params.apply(j, v));
        }
    }
    let scaled = Dataset::from_parts(
        ds.name().to_string(),
        features,
        (0..n).map(|i| ds.label(i)).collect(),
        d,
        ds.class_names().to_vec(),
    )?
    .into_shared();

    let remap = |view: &DatasetView| DatasetView {
        data: scaled.clone(),
        rows: view.rows.clone(),
        folds: view.folds.clone(),
    };
    Ok((remap(train), remap(test), params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn toy_dataset(labels: &[u32], classes: usize) -> SharedDataset {
        let n = labels.len();
        let features: Vec<f64> = (0..n * 2).map(|i| i as f64 / (n * 2) as f64).collect();
        let names = (0..classes).map(|c| format!("c{c}")).collect();
        Dataset::from_parts("toy", features, labels.to_vec(), 2, names)
            .unwrap()
            .into_shared()
    }

    #[test]
    fn labels_recode_by_first_appearance() {
        let f = write_temp("x,y,label\n1,2,a\n3,4,b\n5,6,a\n7,8,b\n");
        let ds = load_dataset(f.path(), &LabelColumn::Last).unwrap();
        assert_eq!(ds.instance_count(), 4);
        assert_eq!(ds.feature_count(), 2);
        assert_eq!(ds.class_count(), 2);
        assert_eq!(
            (0..4).map(|i| ds.label(i)).collect::<Vec<_>>(),
            vec![0, 1, 0, 1]
        );
        assert_eq!(ds.class_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn bad_feature_cell_names_row_and_column() {
        let f = write_temp("x,y,label\n1,2,a\n3,abc,b\n");
        let err = load_dataset(f.path(), &LabelColumn::Last).unwrap_err();
        match err {
            Error::BadCell { row, column, value, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, 2);
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_rejected() {
        let f = write_temp("x,y,label\n1,2,a\n3,b\n");
        let err = load_dataset(f.path(), &LabelColumn::Last).unwrap_err();
        match err {
            Error::RaggedRow { row, expected, got, .. } => {
                assert_eq!((row, expected, got), (2, 3, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let f = write_temp("x,label\n1,a\n2,a\n");
        assert!(matches!(
            load_dataset(f.path(), &LabelColumn::Last),
            Err(Error::SingleClass { .. })
        ));
    }

    #[test]
    fn missing_file_is_reported_with_path() {
        let err = load_dataset(Path::new("/nonexistent/x.csv"), &LabelColumn::Last).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn first_and_named_label_columns() {
        let f = write_temp("label,x,y\na,1,2\nb,3,4\n");
        let ds = load_dataset(f.path(), &LabelColumn::First).unwrap();
        assert_eq!(ds.feature_count(), 2);
        assert_eq!(ds.row(1), &[3.0, 4.0]);

        let f = write_temp("x,cls,y\n1,a,2\n3,b,4\n");
        let ds = load_dataset(f.path(), &LabelColumn::Named("cls".into())).unwrap();
        assert_eq!(ds.row(0), &[1.0, 2.0]);
        assert_eq!(ds.label(1), 1);
    }

    #[test]
    fn loading_twice_is_bit_identical() {
        let f = write_temp("x,y,label\n0.125,2.5,a\n3.75,4.0,b\n1.5,0.25,a\n");
        let a = load_dataset(f.path(), &LabelColumn::Last).unwrap();
        let b = load_dataset(f.path(), &LabelColumn::Last).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_rounding_balances_to_seven_of_ten() {
        // 5 per class at 0.7: largest remainder forces a 4/3 apportionment.
        let ds = toy_dataset(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1], 2);
        for seed in [0u64, 1, 2, 99] {
            let (train, test) = split_train_test(&ds, 0.7, seed).unwrap();
            assert_eq!(train.len(), 7);
            assert_eq!(test.len(), 3);
            let class0 = (0..train.len()).filter(|&i| train.label(i) == 0).count();
            let class1 = train.len() - class0;
            assert!(class0 >= 3 && class1 >= 3);
        }
    }

    #[test]
    fn split_is_deterministic_given_seed() {
        let ds = toy_dataset(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 2);
        let (a_train, a_test) = split_train_test(&ds, 0.7, 7).unwrap();
        let (b_train, b_test) = split_train_test(&ds, 0.7, 7).unwrap();
        assert_eq!(a_train.rows(), b_train.rows());
        assert_eq!(a_test.rows(), b_test.rows());
    }

    #[test]
    fn different_seeds_move_rows_but_not_sizes() {
        // Oracle: run both seeds and compare the realized row sets.
        let labels: Vec<u32> = (0..100).map(|i| (i * 7 % 3 == 0) as u32).collect();
        let ds = toy_dataset(&labels, 2);
        let (a, _) = split_train_test(&ds, 0.7, 1).unwrap();
        let (b, _) = split_train_test(&ds, 0.7, 2).unwrap();
        assert_eq!(a.len(), b.len());
        assert_ne!(a.rows(), b.rows());
    }

    #[test]
    fn split_proportions_within_one_per_class() {
        let labels: Vec<u32> = (0..83).map(|i| (i % 3) as u32).collect();
        let ds = toy_dataset(&labels, 3);
        let (train, _) = split_train_test(&ds, 0.7, 11).unwrap();
        for class in 0..3u32 {
            let total = labels.iter().filter(|&&l| l == class).count() as f64;
            let in_train = (0..train.len()).filter(|&i| train.label(i) == class).count() as f64;
            assert!((in_train - 0.7 * total).abs() <= 1.0);
        }
    }

    #[test]
    fn fold_sizes_balance() {
        let ds = toy_dataset(&[0, 0, 0, 1, 1, 1, 0, 1, 0], 2);
        let view = DatasetView::full(ds).assign_folds(3, 5).unwrap();
        let mut sizes = [0usize; 3];
        for i in 0..view.len() {
            sizes[view.fold_of(i).unwrap()] += 1;
        }
        assert_eq!(sizes, [3, 3, 3]);

        let ds10 = toy_dataset(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1], 2);
        let view = DatasetView::full(ds10).assign_folds(3, 5).unwrap();
        let mut sizes = vec![0usize; 3];
        for i in 0..view.len() {
            sizes[view.fold_of(i).unwrap()] += 1;
        }
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
    }

    #[test]
    fn fold_assignment_is_deterministic() {
        let ds = toy_dataset(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 2);
        let v = DatasetView::full(ds);
        let a = v.assign_folds(3, 9).unwrap();
        let b = v.assign_folds(3, 9).unwrap();
        let ids = |view: &DatasetView| (0..view.len()).map(|i| view.fold_of(i)).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
    }

    #[test]
    fn more_folds_than_rows_is_an_error() {
        let ds = toy_dataset(&[0, 1], 2);
        assert!(DatasetView::full(ds).assign_folds(3, 0).is_err());
    }

    #[test]
    fn tiny_class_degrades_round_robin() {
        // Class 1 has a single member; folds still balance globally.
        let ds = toy_dataset(&[0, 0, 0, 0, 0, 0, 0, 0, 1], 2);
        let view = DatasetView::full(ds).assign_folds(3, 2).unwrap();
        let mut sizes = [0usize; 3];
        for i in 0..view.len() {
            sizes[view.fold_of(i).unwrap()] += 1;
        }
        assert_eq!(sizes, [3, 3, 3]);
    }

    #[test]
    fn normalize_min_max_and_clamp() {
        let features = vec![2.0, 0.0, 4.0, 0.5, 6.0, 1.0, 8.0, 0.25];
        let ds = Dataset::from_parts(
            "t",
            features,
            vec![0, 0, 1, 1],
            2,
            vec!["a".into(), "b".into()],
        )
        .unwrap()
        .into_shared();
        let train = DatasetView::new(ds.clone(), vec![0, 1, 2]).unwrap();
        let test = DatasetView::new(ds, vec![3]).unwrap();
        let (train2, test2, params) = normalize(&train, &test).unwrap();
        // train column {2,4,6} -> {0, 0.5, 1}
        assert_eq!(train2.feature(0)[0], 0.0);
        assert_eq!(train2.feature(1)[0], 0.5);
        assert_eq!(train2.feature(2)[0], 1.0);
        // test value 8 with train min=2 max=6 clamps to 1
        assert_eq!(test2.feature(0)[0], 1.0);
        assert_eq!(params.apply(0, 8.0), 1.0);
    }

    #[test]
    fn constant_train_feature_maps_to_zero() {
        let features = vec![5.0, 1.0, 5.0, 2.0, 7.0, 3.0];
        let ds = Dataset::from_parts(
            "t",
            features,
            vec![0, 1, 0],
            2,
            vec!["a".into(), "b".into()],
        )
        .unwrap()
        .into_shared();
        let train = DatasetView::new(ds.clone(), vec![0, 1]).unwrap();
        let test = DatasetView::new(ds, vec![2]).unwrap();
        let (train2, test2, _) = normalize(&train, &test).unwrap();
        assert_eq!(train2.feature(0)[0], 0.0);
        assert_eq!(train2.feature(1)[0], 0.0);
        assert_eq!(test2.feature(0)[0], 0.0);
    }

    #[test]
    fn normalize_keeps_train_in_unit_interval() {
        let labels: Vec<u32> = (0..30).map(|i| (i % 2) as u32).collect();
        let n = labels.len();
        let features: Vec<f64> = (0..n * 2).map(|i| (i as f64 * 13.7) % 29.0 - 11.0).collect();
        let ds = Dataset::from_parts("t", features, labels, 2, vec!["a".into(), "b".into()])
            .unwrap()
            .into_shared();
        let (train, test) = split_train_test(&ds, 0.7, 3).unwrap();
        let (train2, _, _) = normalize(&train, &test).unwrap();
        for i in 0..train2.len() {
            for &v in train2.feature(i) {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn empty_train_class_is_an_error() {
        let ds = toy_dataset(&[0, 0, 0, 0, 0, 0, 0, 0, 0, 1], 2);
        // fraction low enough that the singleton class rounds to zero
        let err = split_train_test(&ds, 0.2, 0).unwrap_err();
        assert!(matches!(err, Error::EmptyTrainClass { class: 1, .. }));
    }
}
