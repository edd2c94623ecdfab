//! Datasets: synthetic Gaussian clusters, Dirichlet non-iid partitioning
//! into client shards, and CSV ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, stream_rng, Stream};

/// Row-major feature matrix plus class labels.
///
/// A dataset handed to training or evaluation holds at least one sample;
/// the type itself tolerates zero rows so that an empty shard can be
/// represented and rejected where it matters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    input_dim: usize,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, input_dim: usize, classes: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::config("input dimension must be at least 1"));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * input_dim,
                got: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::config(format!("label {bad} out of range for {classes} classes")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("features must be finite"));
        }
        Ok(Dataset {
            features,
            labels,
            input_dim,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Copies the given rows, in order, into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            input_dim: self.input_dim,
            classes: self.classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Per-column min-max scaling to [0, 1]. Constant columns map to 0.
    pub fn normalize_min_max(&mut self) {
        let n = self.len();
        if n == 0 {
            return;
        }
        for c in 0..self.input_dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for r in 0..n {
                let v = self.features[r * self.input_dim + c];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let range = hi - lo;
            for r in 0..n {
                let v = &mut self.features[r * self.input_dim + c];
                *v = if range > 0.0 { (*v - lo) / range } else { 0.0 };
            }
        }
    }
}

/// Gaussian class clusters: each class gets a seeded mean drawn from a
/// standard normal per coordinate, samples are `mean + spread * N(0, I)`.
/// Features are min-max normalized afterwards.
pub fn generate_synthetic(classes: usize, per_class: usize, input_dim: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::field("data.classes", "must be at least 2"));
    }
    if per_class < 1 {
        return Err(Error::field("data.per_class", "must be at least 1"));
    }
    if input_dim < 1 {
        return Err(Error::field("data.input_dim", "must be at least 1"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::field("data.spread", "must be a non-negative finite number"));
    }
    let mut rng = stream_rng(seed, Stream::Data, &[]);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..input_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();

    let mut features = Vec::with_capacity(classes * per_class * input_dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            for &m in mean {
                let noise: f64 = rng.sample(StandardNormal);
                features.push(m + spread * noise);
            }
            labels.push(class);
        }
    }
    let mut ds = Dataset::new(features, labels, input_dim, classes)?;
    ds.normalize_min_max();
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub alpha: f64,
    pub num_clients: usize,
    pub seed: u64,
}

fn dirichlet_sample<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::field("partition.alpha", e.to_string()))?;
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        Ok(draws.into_iter().map(|g| g / total).collect())
    } else {
        // every gamma draw underflowed; fall back to the Dirichlet mean
        Ok(vec![1.0 / k as f64; k])
    }
}

/// Splits `data` into `spec.num_clients` disjoint shards. For every class,
/// the share of that class held by each client is drawn from `Dir(alpha)`.
///
/// Shards that end up empty each receive one sample of the globally most
/// common class, taken from the shard holding the most of that class.
pub fn partition_dirichlet(data: &Dataset, spec: &PartitionSpec) -> Result<Vec<Dataset>> {
    let m = spec.num_clients;
    if !(spec.alpha > 0.0 && spec.alpha.is_finite()) {
        return Err(Error::field("partition.alpha", "must be positive"));
    }
    if m < 2 {
        return Err(Error::field("clients", "at least 2 clients are required"));
    }
    if m > data.len() {
        return Err(Error::config(format!(
            "cannot partition {} samples into {} non-empty shards",
            data.len(),
            m
        )));
    }

    let mut rng = stream_rng(spec.seed, Stream::Partition, &[]);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.classes()];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }

    let mut shards: Vec<Vec<usize>> = vec![Vec::new(); m];
    for members in by_class.iter_mut() {
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let props = dirichlet_sample(spec.alpha, m, &mut rng)?;
        let n_c = members.len();
        let mut cum = 0.0;
        let mut start = 0;
        for (client, p) in props.iter().enumerate() {
            cum += p;
            let end = if client == m - 1 {
                n_c
            } else {
                ((cum * n_c as f64).round() as usize).clamp(start, n_c)
            };
            shards[client].extend_from_slice(&members[start..end]);
            start = end;
        }
    }

    repair_empty_shards(data, &mut shards);

    Ok(shards
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            data.subset(&idx)
        })
        .collect())
}

fn repair_empty_shards(data: &Dataset, shards: &mut [Vec<usize>]) {
    let counts = data.class_counts();
    let common = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| c)
        .unwrap_or(0);

    let empties: Vec<usize> = (0..shards.len()).filter(|&i| shards[i].is_empty()).collect();
    for target in empties {
        // donor: most samples of the common class, ties to the lowest id,
        // never drained below one sample
        let donor = (0..shards.len())
            .filter(|&i| shards[i].len() > 1)
            .filter_map(|i| {
                let held = shards[i].iter().filter(|&&s| data.label(s) == common).count();
                (held > 0).then_some((i, held))
            })
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .or_else(|| (0..shards.len()).filter(|&i| shards[i].len() > 1).max_by_key(|&i| (shards[i].len(), std::cmp::Reverse(i))));
        let Some(donor) = donor else { break };
        let pos = shards[donor]
            .iter()
            .rposition(|&s| data.label(s) == common)
            .unwrap_or(shards[donor].len() - 1);
        let sample = shards[donor].remove(pos);
        shards[target].push(sample);
    }
}

/// Loads a CSV file with a header row. `label_column` names the class
/// column; every other column must be numeric. Labels are re-indexed
/// densely from 0: numerically when every label parses as an integer,
/// lexicographically otherwise.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(1, format!("{other:?}")),
        })?;

    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(parse_err(1, "empty file: header row required".into()));
    }
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| parse_err(1, format!("label column `{label_column}` not found in header")))?;
    let input_dim = headers.len() - 1;
    if input_dim == 0 {
        return Err(parse_err(1, "no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        // header is line 1
        let line = row_no as u64 + 2;
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(line);
            parse_err(line, e.to_string())
        })?;
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                raw_labels.push(field.trim().to_string());
            } else {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line, format!("non-numeric value `{field}` in column `{}`", &headers[col])))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("non-finite value in column `{}`", &headers[col])));
                }
                features.push(v);
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }

    let index = dense_label_index(&raw_labels);
    let labels: Vec<usize> = raw_labels.iter().map(|l| index[l]).collect();
    let mut ds = Dataset::new(features, labels, input_dim, index.len())?;
    ds.normalize_min_max();
    Ok(ds)
}

fn dense_label_index(raw: &[String]) -> BTreeMap<String, usize> {
    let mut distinct: Vec<&String> = raw.iter().collect();
    distinct.sort();
    distinct.dedup();
    let numeric: Option<Vec<i64>> = distinct.iter().map(|s| s.parse::<i64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut pairs: Vec<(i64, &String)> = nums.into_iter().zip(distinct).collect();
        pairs.sort();
        pairs.into_iter().enumerate().map(|(i, (_, s))| (s.clone(), i)).collect()
    } else {
        distinct.into_iter().enumerate().map(|(i, s)| (s.clone(), i)).collect()
    }
}

/// Writes `data` as CSV with columns `x0..x{d-1}` followed by `label`.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::config(format!("{other:?}")),
    })?;
    let mut header: Vec<String> = (0..data.input_dim()).map(|c| format!("x{c}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.label(i).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Label-flipped copy: class `c` becomes `classes - 1 - c`.
pub fn flip_labels(data: &Dataset) -> Dataset {
    let mut out = data.clone();
    let k = out.classes;
    for l in out.labels.iter_mut() {
        *l = k - 1 - *l;
    }
    out
}

/// Deterministically shuffled copy of a dataset.
pub fn shuffled(data: &Dataset, seed: u64) -> Dataset {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut seeded_rng(seed));
    data.subset(&idx)
}
