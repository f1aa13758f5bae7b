//! Dataset ingestion: synthetic Gaussian blobs, delimited text, and
//! IDX-style binary files, all normalized, shuffled with a seeded RNG, and
//! split into train/validation subsets.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::rng::normal;

#[derive(Debug, Clone)]
pub struct Dataset {
    /// [n_samples x n_features], standardized per feature.
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    /// Copy out the rows at the given indices.
    pub fn gather(&self, indices: &[usize]) -> Result<(Matrix, Vec<usize>)> {
        let mut x = Matrix::zeros(indices.len(), self.n_features());
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return Err(Error::Index(format!("row {} of {}", i, self.len())));
            }
            let src = self.x.row_slice(i);
            for c in 0..src.len() {
                x.set(r, c, src[c]);
            }
            labels.push(self.labels[i]);
        }
        Ok((x, labels))
    }
}

#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Dataset,
    pub val: Dataset,
}

/// Where samples come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Gaussian class clusters with unit within-class spread; `separation`
    /// scales the distance between class centers.
    SyntheticBlobs {
        n_samples: usize,
        n_features: usize,
        n_classes: usize,
        separation: f64,
    },
    /// One sample per line: feature values then an integer label, split by
    /// `delimiter`.
    DelimitedText { path: String, delimiter: char },
    /// IDX-format feature and label files (the MNIST container format).
    IdxBinary { features: String, labels: String },
}

impl DataSource {
    /// The default desk-scale task: 2000 samples, 16 features, 4 classes,
    /// centers close enough that extra model capacity pays.
    pub fn default_blobs() -> DataSource {
        DataSource::SyntheticBlobs {
            n_samples: 2000,
            n_features: 16,
            n_classes: 4,
            separation: 0.55,
        }
    }
}

/// Load a source, standardize features, shuffle with the seed, and split.
/// The same seed always produces the same membership.
pub fn ingest(source: &DataSource, split_fraction: f64, rng: &mut ChaCha8Rng) -> Result<DataSplit> {
    if !(0.0 < split_fraction && split_fraction < 1.0) {
        return Err(Error::config(format!(
            "split fraction {} outside (0, 1)",
            split_fraction
        )));
    }
    let (mut x, labels, n_classes) = match source {
        DataSource::SyntheticBlobs { n_samples, n_features, n_classes, separation } => {
            synth_blobs(*n_samples, *n_features, *n_classes, *separation, rng)?
        }
        DataSource::DelimitedText { path, delimiter } => read_delimited(path, *delimiter)?,
        DataSource::IdxBinary { features, labels } => read_idx(features, labels)?,
    };
    if labels.is_empty() {
        return Err(Error::config("source produced no samples"));
    }
    standardize(&mut x);
    if !x.all_finite() {
        return Err(Error::NumericDomain("non-finite features after normalization".into()));
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(rng);
    let n_train = ((labels.len() as f64) * split_fraction).round() as usize;
    if n_train == 0 || n_train == labels.len() {
        return Err(Error::config("split leaves one side empty"));
    }
    let full = Dataset { x, labels, n_classes };
    let (train_x, train_y) = full.gather(&order[..n_train])?;
    let (val_x, val_y) = full.gather(&order[n_train..])?;
    Ok(DataSplit {
        train: Dataset { x: train_x, labels: train_y, n_classes },
        val: Dataset { x: val_x, labels: val_y, n_classes },
    })
}

fn synth_blobs(
    n_samples: usize,
    n_features: usize,
    n_classes: usize,
    separation: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Matrix, Vec<usize>, usize)> {
    if n_classes < 2 || n_features == 0 || n_samples < n_classes {
        return Err(Error::config("blobs need >= 2 classes, >= 1 feature, and enough samples"));
    }
    let mut centers = Matrix::zeros(n_classes, n_features);
    for i in 0..centers.len() {
        centers.as_mut_slice()[i] = normal(rng) * separation;
    }
    let mut x = Matrix::zeros(n_samples, n_features);
    let mut labels = Vec::with_capacity(n_samples);
    for r in 0..n_samples {
        let class = rng.gen_range(0..n_classes);
        for c in 0..n_features {
            x.set(r, c, centers.get(class, c) + normal(rng));
        }
        labels.push(class);
    }
    Ok((x, labels, n_classes))
}

fn read_delimited(path: &str, delimiter: char) -> Result<(Matrix, Vec<usize>, usize)> {
    let file = File::open(Path::new(path))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delimiter).map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: "need at least one feature and a label".into(),
            });
        }
        let mut feats = Vec::with_capacity(fields.len() - 1);
        for f in &fields[..fields.len() - 1] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value {:?}", f),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: lineno, msg: "non-finite feature".into() });
            }
            feats.push(v);
        }
        if let Some(first) = rows.first() {
            if feats.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("{} features, expected {}", feats.len(), first.len()),
                });
            }
        }
        let label: usize = fields[fields.len() - 1].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label {:?}", fields[fields.len() - 1]),
        })?;
        rows.push(feats);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::config(format!("{}: no samples", path)));
    }
    let n_classes = labels.iter().max().unwrap() + 1;
    if n_classes < 2 {
        return Err(Error::contract("labels span fewer than 2 classes"));
    }
    let cols = rows[0].len();
    let mut x = Matrix::zeros(rows.len(), cols);
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            x.set(r, c, v);
        }
    }
    Ok((x, labels, n_classes))
}

fn read_idx(features_path: &str, labels_path: &str) -> Result<(Matrix, Vec<usize>, usize)> {
    let feats = read_idx_file(features_path)?;
    let labs = read_idx_file(labels_path)?;
    if labs.dims.len() != 1 {
        return Err(Error::checkpoint(format!(
            "{}: label file must be rank 1",
            labels_path
        )));
    }
    let n = labs.dims[0];
    if feats.dims.is_empty() || feats.dims[0] != n {
        return Err(Error::checkpoint(format!(
            "{} and {} disagree on sample count",
            features_path, labels_path
        )));
    }
    let per: usize = feats.dims[1..].iter().product::<usize>().max(1);
    let mut x = Matrix::zeros(n, per);
    for i in 0..n * per {
        // bytes scale to [0,1]; standardization follows
        x.as_mut_slice()[i] = feats.bytes[i] as f64 / 255.0;
    }
    let labels: Vec<usize> = labs.bytes.iter().map(|&b| b as usize).collect();
    let n_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    if n_classes < 2 {
        return Err(Error::contract("labels span fewer than 2 classes"));
    }
    Ok((x, labels, n_classes))
}

struct IdxFile {
    dims: Vec<usize>,
    bytes: Vec<u8>,
}

fn read_idx_file(path: &str) -> Result<IdxFile> {
    let mut f = File::open(Path::new(path))?;
    let mut head = [0u8; 4];
    f.read_exact(&mut head)?;
    if head[0] != 0 || head[1] != 0 || head[2] != 0x08 {
        return Err(Error::checkpoint(format!(
            "{}: not an unsigned-byte IDX file",
            path
        )));
    }
    let rank = head[3] as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut d = [0u8; 4];
        f.read_exact(&mut d)?;
        dims.push(u32::from_be_bytes(d) as usize);
    }
    let total: usize = dims.iter().product();
    let mut bytes = vec![0u8; total];
    f.read_exact(&mut bytes)?;
    Ok(IdxFile { dims, bytes })
}

/// Per-feature standardization to zero mean, unit variance. Constant
/// features become zeros.
fn standardize(x: &mut Matrix) {
    let (rows, cols) = x.shape();
    for c in 0..cols {
        let mut mean = 0.0;
        for r in 0..rows {
            mean += x.get(r, c);
        }
        mean /= rows as f64;
        let mut var = 0.0;
        for r in 0..rows {
            let d = x.get(r, c) - mean;
            var += d * d;
        }
        var /= rows as f64;
        let sd = var.sqrt();
        for r in 0..rows {
            let v = if sd > 0.0 { (x.get(r, c) - mean) / sd } else { 0.0 };
            x.set(r, c, v);
        }
    }
}

/// Least-squares one-vs-all linear classifier: fit on train, score on val.
/// The oracle confirming a split is learnable at all.
pub fn least_squares_probe(split: &DataSplit) -> Result<f64> {
    let train = &split.train;
    let d = train.n_features() + 1; // bias column
    let k = train.n_classes;
    let n = train.len();

    // normal equations with a small ridge for conditioning
    let mut xtx = vec![vec![0.0f64; d]; d];
    let mut xty = vec![vec![0.0f64; k]; d];
    let feat = |row: usize, col: usize| -> f64 {
        if col < d - 1 { train.x.get(row, col) } else { 1.0 }
    };
    for r in 0..n {
        for i in 0..d {
            let fi = feat(r, i);
            if fi == 0.0 {
                continue;
            }
            for j in 0..d {
                xtx[i][j] += fi * feat(r, j);
            }
            xty[i][train.labels[r]] += fi;
        }
    }
    for (i, row) in xtx.iter_mut().enumerate() {
        row[i] += 1e-6 * n as f64;
    }

    // Gauss-Jordan solve of xtx * W = xty
    let mut a = xtx;
    let mut b = xty;
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::NumericDomain("singular normal equations".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = 1.0 / a[col][col];
        for j in 0..d {
            a[col][j] *= inv;
        }
        for j in 0..k {
            b[col][j] *= inv;
        }
        for row in 0..d {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..d {
                a[row][j] -= factor * a[col][j];
            }
            for j in 0..k {
                b[row][j] -= factor * b[col][j];
            }
        }
    }

    let val = &split.val;
    let mut correct = 0usize;
    for r in 0..val.len() {
        let mut best = (0usize, f64::NEG_INFINITY);
        for class in 0..k {
            let mut score = b[d - 1][class]; // bias
            for c in 0..val.n_features() {
                score += val.x.get(r, c) * b[c][class];
            }
            if score > best.1 {
                best = (class, score);
            }
        }
        if best.0 == val.labels[r] {
            correct += 1;
        }
    }
    Ok(correct as f64 / val.len() as f64)
}
