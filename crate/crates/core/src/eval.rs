//! Nearest-neighbour classification of learned features and the metrics
//! reported for it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{parallel_enabled, DenseMatrix};
use crate::rng::Rng;

/// Features (one sample per column) with integer class labels `0..C`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    /// Class count inferred as `max(label) + 1`.
    pub fn new(features: DenseMatrix, labels: Vec<usize>) -> Result<Self> {
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::with_classes(features, labels, num_classes)
    }

    pub fn with_classes(features: DenseMatrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != features.cols() {
            return Err(Error::mismatch("labels vs feature columns", features.cols(), labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(LabeledDataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_columns(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// k-nearest-neighbour prediction under Euclidean distance.
///
/// Neighbours at equal distance are ranked by training index; a tied vote
/// goes to the lowest class index.
pub fn knn_predict(train: &LabeledDataset, test: &DenseMatrix, k: usize) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if test.rows() != train.features.rows() {
        return Err(Error::mismatch("knn feature dimension", train.features.rows(), test.rows()));
    }
    if k == 0 || k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            train.len()
        )));
    }
    let predict = |j: usize| predict_one(train, test.col(j), k);
    Ok(if parallel_enabled() {
        (0..test.cols()).into_par_iter().map(predict).collect()
    } else {
        (0..test.cols()).map(predict).collect()
    })
}

fn predict_one(train: &LabeledDataset, x: &[f64], k: usize) -> usize {
    let mut ranked: Vec<(f64, usize)> = train
        .features
        .columns()
        .enumerate()
        .map(|(i, c)| (squared_distance(c, x), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut votes = vec![0usize; train.num_classes];
    for &(_, i) in &ranked[..k] {
        votes[train.labels[i]] += 1;
    }
    // max_by_key keeps the last maximum, so scan explicitly for the first
    let mut best = 0;
    for (class, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = class;
        }
    }
    best
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::mismatch("prediction vs truth length", truth.len(), pred.len()));
    }
    if truth.is_empty() {
        return Err(Error::Empty("label vector"));
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Mean per-class recall over the classes present in `truth`.
pub fn macro_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let classes = truth.iter().max().map_or(0, |m| m + 1);
    let mut total = 0.0;
    let mut present = 0;
    for c in 0..classes {
        if let Some(s) = sens_spec(pred, truth, c)?.sensitivity {
            total += s;
            present += 1;
        }
    }
    Ok(total / present as f64)
}

/// One-vs-rest rates for a single class. `None` marks a rate whose
/// denominator is zero: sensitivity when the class never occurs in `truth`,
/// specificity when every sample belongs to it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensSpec {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

pub fn sens_spec(pred: &[usize], truth: &[usize], class: usize) -> Result<SensSpec> {
    check_lengths(pred, truth)?;
    let (mut tp, mut fn_, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (t == class, p == class) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(SensSpec {
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
    })
}

/// `counts[truth][pred]`.
pub fn confusion_matrix(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<Vec<Vec<usize>>> {
    check_lengths(pred, truth)?;
    let mut counts = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {} out of range for {num_classes} classes",
                p.max(t)
            )));
        }
        counts[t][p] += 1;
    }
    Ok(counts)
}

/// `‖X − X̂‖²_F / ‖X‖²_F`.
pub fn nmse(x_true: &DenseMatrix, x_hat: &DenseMatrix) -> Result<f64> {
    if x_true.shape() != x_hat.shape() {
        return Err(Error::InvalidArgument(format!(
            "nmse shape mismatch: {:?} vs {:?}",
            x_true.shape(),
            x_hat.shape()
        )));
    }
    let energy = x_true.frobenius_norm_sq();
    if energy == 0.0 {
        return Err(Error::Undefined("nmse of an all-zero reference".into()));
    }
    Ok((x_true - x_hat).frobenius_norm_sq() / energy)
}

/// Per-class training count: `⌈fraction · count⌉`, kept within
/// `1..=count−1` so both sides of the split see every class.
pub fn train_count(count: usize, fraction: f64) -> usize {
    let n = (fraction * count as f64 - 1e-9).ceil() as usize;
    n.clamp(1, count - 1)
}

/// Stratified random split of sample indices.
///
/// Each class's indices are shuffled (classes in increasing order, one
/// Fisher–Yates pass each) and the first [`train_count`] go to training.
/// Both returned index lists are sorted ascending.
pub fn split_indices(labels: &[usize], fraction: f64, rng: &mut Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {} sample(s); splitting needs at least 2",
                members.len()
            )));
        }
        rng.shuffle(members);
        let n_train = train_count(members.len(), fraction);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(dataset: &LabeledDataset, fraction: f64, rng: &mut Rng) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(dataset.labels(), fraction, rng)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}
