//! Labelled instances, CSV ingestion and the seeded preprocessing steps that
//! feed the grid: min-max scaling, stratified partitioning, holdout splits and
//! label-noise injection.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Row index in the originating corpus. Resampled copies keep it.
    pub id: usize,
    pub features: Vec<f64>,
    pub label: usize,
}

impl Instance {
    pub fn new(id: usize, features: Vec<f64>, label: usize) -> Self {
        Instance {
            id,
            features,
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Vec<Instance>,
    num_classes: usize,
    dim: usize,
    class_names: Vec<String>,
}

/// Per-instance weights keyed by instance id.
pub type WeightTable = HashMap<usize, f64>;

impl Dataset {
    /// Builds a dataset, checking that every instance has `dim` features and
    /// a label below `num_classes`. Class names default to the indices.
    pub fn new(instances: Vec<Instance>, num_classes: usize) -> Result<Self> {
        let names = (0..num_classes).map(|c| c.to_string()).collect();
        Self::with_class_names(instances, names)
    }

    pub fn with_class_names(instances: Vec<Instance>, class_names: Vec<String>) -> Result<Self> {
        let num_classes = class_names.len();
        if num_classes == 0 {
            return Err(Error::InvalidDataset("num_classes must be positive".into()));
        }
        let dim = instances.first().map_or(0, |i| i.features.len());
        for inst in &instances {
            if inst.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: inst.features.len(),
                });
            }
            if inst.label >= num_classes {
                return Err(Error::InvalidDataset(format!(
                    "instance {} has label {} but num_classes is {}",
                    inst.id, inst.label, num_classes
                )));
            }
        }
        Ok(Dataset {
            instances,
            num_classes,
            dim,
            class_names,
        })
    }

    /// Same class set and names as `self`, different instances.
    pub fn derive(&self, instances: Vec<Instance>) -> Dataset {
        debug_assert!(instances.iter().all(|i| i.features.len() == self.dim));
        Dataset {
            dim: if instances.is_empty() { self.dim } else { instances[0].features.len() },
            instances,
            num_classes: self.num_classes,
            class_names: self.class_names.clone(),
        }
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<Instance> {
        self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn labels(&self) -> Vec<usize> {
        self.instances.iter().map(|i| i.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for inst in &self.instances {
            counts[inst.label] += 1;
        }
        counts
    }

    /// Errors with the first class that has no instance.
    pub fn require_all_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(c) => Err(Error::ClassAbsent(c)),
            None => Ok(()),
        }
    }

    /// Writes `id,f0..f{D-1},label` with a header row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim).map(|j| format!("f{j}")));
        header.push("label".into());
        w.write_record(&header)?;
        for inst in &self.instances {
            let mut row = vec![inst.id.to_string()];
            row.extend(inst.features.iter().map(|v| v.to_string()));
            row.push(self.class_names[inst.label].clone());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" | "" => LabelColumn::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

/// Loads a CSV file. The first row is treated as a header when any of its
/// feature cells fails to parse as a number. A header column named `id` is
/// skipped; ids are always the 0-based data row index.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        rows.push(rec);
    }
    parse_rows(rows, label)
}

fn parse_rows(rows: Vec<csv::StringRecord>, label: &LabelColumn) -> Result<Dataset> {
    let first = rows.first().ok_or(Error::NoRows)?;
    let arity = first.len();
    let header_cells: Vec<String> = first.iter().map(str::to_string).collect();

    let numeric = |s: &str| s.parse::<f64>().is_ok();
    let label_idx_guess = match label {
        LabelColumn::Index(i) => Some(*i),
        LabelColumn::Last => Some(arity.saturating_sub(1)),
        LabelColumn::Name(_) => None,
    };
    let has_header = match label {
        LabelColumn::Name(_) => true,
        _ => header_cells
            .iter()
            .enumerate()
            .any(|(j, c)| Some(j) != label_idx_guess && !numeric(c)),
    };

    let label_idx = match label {
        LabelColumn::Index(i) => *i,
        LabelColumn::Last => arity - 1,
        LabelColumn::Name(name) => header_cells
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?,
    };
    if label_idx >= arity {
        return Err(Error::UnknownColumn(label_idx.to_string()));
    }
    let skip_id = if has_header {
        header_cells.iter().position(|c| c == "id")
    } else {
        None
    };

    let data_rows = if has_header { &rows[1..] } else { &rows[..] };
    if data_rows.is_empty() {
        return Err(Error::NoRows);
    }

    // classes are indexed in sorted order (numerically when every label is
    // a number), so `neg`/`pos`, `0`/`1` and `-1`/`1` all put the positive
    // class at index 1 regardless of row order
    let mut class_names: Vec<String> = data_rows
        .iter()
        .filter(|r| r.len() > label_idx)
        .map(|r| r[label_idx].to_string())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if class_names.iter().all(|c| numeric(c)) {
        class_names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    let class_index: HashMap<&str, usize> = class_names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut instances = Vec::with_capacity(data_rows.len());
    let row_offset = usize::from(has_header) + 1;
    for (i, rec) in data_rows.iter().enumerate() {
        let row_no = i + row_offset;
        if rec.len() != arity {
            return Err(Error::RaggedRow {
                row: row_no,
                expected: arity,
                found: rec.len(),
            });
        }
        let mut features = Vec::with_capacity(arity - 1);
        for (j, cell) in rec.iter().enumerate() {
            if j == label_idx || Some(j) == skip_id {
                continue;
            }
            let v = cell.parse::<f64>().map_err(|_| Error::NonNumeric {
                row: row_no,
                column: j,
                value: cell.to_string(),
            })?;
            features.push(v);
        }
        instances.push(Instance::new(i, features, class_index[&rec[label_idx]]));
    }
    Dataset::with_class_names(instances, class_names)
}

/// Per-feature min-max scaling into [0,1]. Constant features become 0.
pub fn normalize_unit_range(d: &Dataset) -> Dataset {
    let dim = d.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for inst in d.instances() {
        for (j, &v) in inst.features.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let scaled = d
        .instances()
        .iter()
        .map(|inst| {
            let features = inst
                .features
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let span = hi[j] - lo[j];
                    if span > 0.0 {
                        ((v - lo[j]) / span).clamp(0.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            Instance::new(inst.id, features, inst.label)
        })
        .collect();
    d.derive(scaled)
}

/// Relabels to a binary problem: `positive` becomes class 1, every other
/// class becomes 0.
pub fn one_vs_all(d: &Dataset, positive: usize) -> Result<Dataset> {
    if positive >= d.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "class {positive} out of range"
        )));
    }
    let instances = d
        .instances()
        .iter()
        .map(|i| Instance::new(i.id, i.features.clone(), usize::from(i.label == positive)))
        .collect();
    Dataset::with_class_names(
        instances,
        vec![
            format!("not-{}", d.class_names()[positive]),
            d.class_names()[positive].clone(),
        ],
    )
}

fn shuffled_by_class(d: &Dataset, rng: &mut rng::Rng) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); d.num_classes()];
    for (pos, inst) in d.instances().iter().enumerate() {
        by_class[inst.label].push(pos);
    }
    for group in &mut by_class {
        group.shuffle(rng);
    }
    by_class
}

/// Disjoint stratified partition into `parts` datasets. Classes are dealt
/// round-robin with a running offset, so per-class counts and part sizes
/// both differ by at most one.
pub fn stratified_partition(d: &Dataset, parts: usize, seed: u64) -> Result<Vec<Dataset>> {
    if parts == 0 || parts > d.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} instances into {} parts",
            d.len(),
            parts
        )));
    }
    let mut rng = rng::from_seed(seed);
    let by_class = shuffled_by_class(d, &mut rng);
    let mut buckets: Vec<Vec<Instance>> = vec![Vec::new(); parts];
    let mut cursor = 0usize;
    for group in by_class {
        for pos in group {
            buckets[cursor % parts].push(d.instances()[pos].clone());
            cursor += 1;
        }
    }
    Ok(buckets.into_iter().map(|b| d.derive(b)).collect())
}

/// Stratified train/validation split. The validation size is
/// `round(fraction * n)`, allotted to classes by largest remainder.
pub fn holdout_split(d: &Dataset, validation_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {validation_fraction} outside (0,1)"
        )));
    }
    let n = d.len();
    let k = (validation_fraction * n as f64).round() as usize;
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {validation_fraction} of {n} instances leaves an empty split"
        )));
    }
    let mut rng = rng::from_seed(seed);
    let by_class = shuffled_by_class(d, &mut rng);
    let quotas: Vec<f64> = by_class
        .iter()
        .map(|g| g.len() as f64 * k as f64 / n as f64)
        .collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = k - take.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for c in order {
        if remaining == 0 {
            break;
        }
        if take[c] < by_class[c].len() {
            take[c] += 1;
            remaining -= 1;
        }
    }
    let mut train = Vec::with_capacity(n - k);
    let mut validation = Vec::with_capacity(k);
    for (c, group) in by_class.iter().enumerate() {
        for (j, &pos) in group.iter().enumerate() {
            let inst = d.instances()[pos].clone();
            if j < take[c] {
                validation.push(inst);
            } else {
                train.push(inst);
            }
        }
    }
    train.sort_by_key(|i| i.id);
    validation.sort_by_key(|i| i.id);
    Ok((d.derive(train), d.derive(validation)))
}

/// Reassigns the labels of exactly `round(fraction * n)` distinct instances,
/// each uniformly among the other classes.
pub fn inject_label_noise(d: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if d.num_classes() < 2 {
        return Err(Error::InvalidArgument("label noise needs at least two classes".into()));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("noise fraction {fraction} outside [0,1]")));
    }
    let n = d.len();
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut rng = rng::from_seed(seed);
    let chosen = index::sample(&mut rng, n, k);
    let mut instances = d.instances().to_vec();
    let c = d.num_classes();
    for pos in chosen.iter() {
        let old = instances[pos].label;
        let r = rng.random_range(0..c - 1);
        instances[pos].label = if r >= old { r + 1 } else { r };
    }
    Ok(d.derive(instances))
}

/// Stratified k-fold split: returns (train, test) per fold.
pub fn stratified_folds(d: &Dataset, folds: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    let parts = stratified_partition(d, folds, seed)?;
    Ok((0..folds)
        .map(|f| {
            let mut train: Vec<Instance> = parts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != f)
                .flat_map(|(_, p)| p.instances().iter().cloned())
                .collect();
            train.sort_by_key(|i| i.id);
            (d.derive(train), parts[f].clone())
        })
        .collect())
}

/// Writes a `key=value` metadata sidecar.
pub fn write_metadata(path: impl AsRef<Path>, entries: &BTreeMap<String, String>) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    for (k, v) in entries {
        writeln!(f, "{k}={v}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn two_class(n: usize) -> Dataset {
        let inst = (0..n)
            .map(|i| Instance::new(i, vec![i as f64, (i * 7 % 5) as f64], i % 2))
            .collect();
        Dataset::new(inst, 2).unwrap()
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_rows_with_label_mapping() {
        let f = write_tmp("x,y,class\n1,2,a\n3,4,b\n5,6,a\n");
        let d = load_csv(f.path(), &LabelColumn::Name("class".into())).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.num_classes(), 2);
        assert_eq!(d.labels(), vec![0, 1, 0]);
        assert_eq!(d.instances()[2].id, 2);
        assert_eq!(d.instances()[1].features, vec![3.0, 4.0]);
    }

    #[test]
    fn headerless_file_uses_last_column() {
        let f = write_tmp("1,2,a\n3,4,b\n");
        let d = load_csv(f.path(), &LabelColumn::Last).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.class_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn class_indices_follow_sorted_labels() {
        let f = write_tmp("1,pos\n2,neg\n");
        assert_eq!(load_csv(f.path(), &LabelColumn::Last).unwrap().labels(), vec![1, 0]);
        let f = write_tmp("1,1\n2,-1\n3,10\n");
        let d = load_csv(f.path(), &LabelColumn::Last).unwrap();
        assert_eq!(d.class_names(), &["-1".to_string(), "1".to_string(), "10".to_string()]);
        assert_eq!(d.labels(), vec![1, 0, 2]);
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_tmp("");
        let err = load_csv(f.path(), &LabelColumn::Last).unwrap_err();
        assert_eq!(err.to_string(), "no rows");
    }

    #[test]
    fn ragged_row_is_reported_with_its_number() {
        let f = write_tmp("1,2,a\n3,b\n5,6,a\n");
        match load_csv(f.path(), &LabelColumn::Last).unwrap_err() {
            Error::RaggedRow { row, expected, found } => {
                assert_eq!((row, expected, found), (2, 3, 2));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_numeric_cell_is_reported() {
        let f = write_tmp("x,y,c\n1,2,a\n3,oops,b\n");
        match load_csv(f.path(), &LabelColumn::Last).unwrap_err() {
            Error::NonNumeric { row, column, .. } => assert_eq!((row, column), (3, 1)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn written_csv_reloads_without_the_id_column() {
        let d = two_class(6);
        let f = tempfile::NamedTempFile::new().unwrap();
        d.write_csv(f.path()).unwrap();
        let back = load_csv(f.path(), &LabelColumn::Name("label".into())).unwrap();
        assert_eq!(back.dim(), 2);
        assert_eq!(back.len(), 6);
        assert_eq!(back.instances()[3].features, d.instances()[3].features);
    }

    #[test]
    fn min_max_scaling() {
        let inst = vec![
            Instance::new(0, vec![2.0, 5.0, 0.0], 0),
            Instance::new(1, vec![4.0, 5.0, 0.5], 1),
            Instance::new(2, vec![6.0, 5.0, 1.0], 0),
        ];
        let d = Dataset::new(inst, 2).unwrap();
        let n = normalize_unit_range(&d);
        let col = |j: usize| n.instances().iter().map(|i| i.features[j]).collect::<Vec<_>>();
        assert_eq!(col(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(col(1), vec![0.0, 0.0, 0.0]);
        assert_eq!(col(2), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_unit_range(&n), n);
    }

    #[test]
    fn partition_of_balanced_hundred() {
        let d = two_class(100);
        let parts = stratified_partition(&d, 4, 11).unwrap();
        let mut seen = HashSet::new();
        for p in &parts {
            for c in p.class_counts() {
                assert!(c == 12 || c == 13, "count {c}");
            }
            for i in p.instances() {
                assert!(seen.insert(i.id));
            }
        }
        assert_eq!(seen.len(), 100);
        assert_eq!(parts, stratified_partition(&d, 4, 11).unwrap());
    }

    #[test]
    fn single_part_is_the_whole_dataset() {
        let d = two_class(10);
        let parts = stratified_partition(&d, 1, 3).unwrap();
        let mut ids: Vec<_> = parts[0].instances().iter().map(|i| i.id).collect();
        ids.sort();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        assert!(stratified_partition(&d, 11, 3).is_err());
    }

    #[test]
    fn holdout_sizes() {
        let d = two_class(100);
        let (train, val) = holdout_split(&d, 0.1, 5).unwrap();
        assert_eq!((train.len(), val.len()), (90, 10));
        assert_eq!(val.class_counts(), vec![5, 5]);
        assert_eq!((train.clone(), val.clone()), holdout_split(&d, 0.1, 5).unwrap());

        let tiny = two_class(2);
        let (t, v) = holdout_split(&tiny, 0.5, 1).unwrap();
        assert_eq!((t.len(), v.len()), (1, 1));
        assert!(holdout_split(&tiny, 0.1, 1).is_err());
    }

    #[test]
    fn noise_changes_exact_count() {
        let d = two_class(1000);
        assert_eq!(inject_label_noise(&d, 0.0, 1).unwrap(), d);
        let noisy = inject_label_noise(&d, 0.1, 1).unwrap();
        let changed = d
            .instances()
            .iter()
            .zip(noisy.instances())
            .filter(|(a, b)| a.label != b.label)
            .count();
        assert_eq!(changed, 100);
        let flipped = inject_label_noise(&d, 1.0, 1).unwrap();
        assert!(d
            .instances()
            .iter()
            .zip(flipped.instances())
            .all(|(a, b)| a.label != b.label && a.id == b.id));
    }

    #[test]
    fn multiclass_noise_never_keeps_the_label() {
        let inst = (0..300).map(|i| Instance::new(i, vec![0.0], i % 3)).collect();
        let d = Dataset::new(inst, 3).unwrap();
        let noisy = inject_label_noise(&d, 0.5, 9).unwrap();
        let changed = d
            .instances()
            .iter()
            .zip(noisy.instances())
            .filter(|(a, b)| a.label != b.label)
            .count();
        assert_eq!(changed, 150);
    }

    #[test]
    fn folds_cover_the_data() {
        let d = two_class(50);
        let folds = stratified_folds(&d, 5, 2).unwrap();
        let mut test_ids: Vec<usize> = folds
            .iter()
            .flat_map(|(_, t)| t.instances().iter().map(|i| i.id))
            .collect();
        test_ids.sort();
        assert_eq!(test_ids, (0..50).collect::<Vec<_>>());
        for (train, test) in &folds {
            assert_eq!(train.len() + test.len(), 50);
        }
    }
}
