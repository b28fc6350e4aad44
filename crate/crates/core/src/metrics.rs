//! Diagnostics recorded during training: smoothness (SMV), feature
//! overcorrelation, accuracy, overfitting gap and first-layer gradient size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::model::Model;

/// Above this many rows SMV switches from the exact double sum to sampling.
pub const SMV_EXACT_MAX_NODES: usize = 4000;

/// Number of ordered pairs drawn by the sampled SMV estimator.
pub const SMV_SAMPLE_PAIRS: usize = 20_000;

/// Metrics of one training epoch.
///
/// `smv` and `corr` are only present on epochs where representation
/// diagnostics were requested; they are comparatively expensive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub loss: f64,
    pub acc_train: f64,
    pub acc_val: f64,
    pub acc_test: f64,
    pub smv: Option<f64>,
    pub corr: Option<f64>,
    pub grad_l1_mean: f64,
}

/// Rows scaled to unit length; zero rows stay zero.
fn normalized_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    out
}

fn half_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_rows(x: &Matrix) -> Result<()> {
    if x.rows() < 2 {
        return Err(Error::shape("smv", format!("needs at least 2 rows, got {}", x.rows())));
    }
    Ok(())
}

/// Exact SMV: mean of `½‖x̂_i − x̂_j‖` over all ordered pairs `i ≠ j`.
pub fn smv_exact(x: &Matrix) -> Result<f64> {
    check_rows(x)?;
    let xn = normalized_rows(x);
    let n = xn.rows();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = xn.row(i);
            (i + 1..n).map(|j| half_distance(ri, xn.row(j))).sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(2.0 * total / (n * (n - 1)) as f64)
}

/// SMV estimated from `pairs` uniformly drawn ordered pairs `i ≠ j`.
pub fn smv_sampled(x: &Matrix, pairs: usize, seed: u64) -> Result<f64> {
    check_rows(x)?;
    if pairs == 0 {
        return Err(Error::Config("sampled SMV needs at least one pair".into()));
    }
    let xn = normalized_rows(x);
    let n = xn.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..pairs {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        total += half_distance(xn.row(i), xn.row(j));
    }
    Ok(total / pairs as f64)
}

/// SMV, exact up to [`SMV_EXACT_MAX_NODES`] rows and sampled (seed 0) above.
///
/// A zero row normalizes to the zero vector, so it sits at distance ½ from any
/// nonzero row and 0 from another zero row.
pub fn smv(x: &Matrix) -> Result<f64> {
    if x.rows() <= SMV_EXACT_MAX_NODES {
        smv_exact(x)
    } else {
        smv_sampled(x, SMV_SAMPLE_PAIRS, 0)
    }
}

/// Mean absolute Pearson correlation over ordered pairs of distinct columns.
///
/// Columns whose entries are all equal have no defined correlation and
/// contribute 0 to every pair they appear in.
pub fn corr(x: &Matrix) -> Result<f64> {
    let (n, d) = x.shape();
    if d < 2 || n < 2 {
        return Err(Error::shape(
            "corr",
            format!("needs at least 2 rows and 2 columns, got {n}x{d}"),
        ));
    }
    let cols: Vec<Option<Vec<f64>>> = (0..d)
        .map(|c| {
            let col: Vec<f64> = (0..n).map(|r| x.get(r, c)).collect();
            if col.iter().all(|&v| v == col[0]) {
                return None;
            }
            let mean = col.iter().sum::<f64>() / n as f64;
            let centered: Vec<f64> = col.iter().map(|v| v - mean).collect();
            let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
            Some(centered.into_iter().map(|v| v / norm).collect())
        })
        .collect();
    let mut total = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            if let (Some(a), Some(b)) = (&cols[i], &cols[j]) {
                let p: f64 = a.iter().zip(b).map(|(u, v)| u * v).sum();
                total += p.abs().min(1.0);
            }
        }
    }
    Ok(2.0 * total / (d * (d - 1)) as f64)
}

/// Index of the largest entry, the lowest index winning ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Fraction of masked nodes whose arg-max logit equals the label.
pub fn accuracy(logits: &Matrix, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if labels.len() != logits.rows() || mask.len() != logits.rows() {
        return Err(Error::shape(
            "accuracy",
            format!(
                "{} logit rows, {} labels, {} mask entries",
                logits.rows(),
                labels.len(),
                mask.len()
            ),
        ));
    }
    let mut total = 0usize;
    let mut correct = 0usize;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        total += 1;
        if argmax(logits.row(i)) == labels[i] {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(correct as f64 / total as f64)
}

/// Mean absolute gradient of the first attention layer's transform.
///
/// `grads` is aligned with `model.params()`.
pub fn grad_first_layer_mean_abs(grads: &[Matrix], model: &Model) -> Result<f64> {
    let idx = model.first_attention_weight();
    let name = &model.param_names()[idx];
    let g = grads.get(idx).ok_or_else(|| Error::MissingGradient(name.clone()))?;
    if g.shape() != model.params()[idx].shape() {
        return Err(Error::MissingGradient(format!(
            "{name} (gradient shape {:?})",
            g.shape()
        )));
    }
    Ok(g.mean_abs())
}

/// Train accuracy minus test accuracy.
pub fn overfit_gap(trace: &EpochTrace) -> f64 {
    trace.acc_train - trace.acc_test
}
