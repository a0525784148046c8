//! Ranking quality of predicted scores against ground-truth accuracies
//! across a model zoo.
//!
//! Ties are resolved toward the lower index for top-k selection and
//! argmax. Kendall's tau is the tau-a form with `sign(0) = 0`, so ties
//! shrink its magnitude.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub r5: f64,
    pub tau5: f64,
    pub tau: f64,
    pub top1_acc: f64,
    pub oracle: f64,
}

fn check_pair(acc: &[f64], scores: &[f64], min: usize) -> Result<()> {
    if acc.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: acc.len(),
            got: scores.len(),
        });
    }
    if acc.len() < min {
        return Err(Error::InsufficientData {
            needed: min,
            got: acc.len(),
        });
    }
    if acc.iter().chain(scores).any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("NaN in ranking input".into()));
    }
    Ok(())
}

fn sign_cmp(a: f64, b: f64) -> i32 {
    match a.partial_cmp(&b) {
        Some(Ordering::Greater) => 1,
        Some(Ordering::Less) => -1,
        _ => 0,
    }
}

/// Indices of the `k` largest values, largest first; ties prefer the lower
/// index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Indices in both top-5 sets, ascending.
fn top5_overlap(acc: &[f64], scores: &[f64]) -> Vec<usize> {
    let truth = top_k_indices(acc, 5);
    let mut both: Vec<usize> = top_k_indices(scores, 5)
        .into_iter()
        .filter(|i| truth.contains(i))
        .collect();
    both.sort_unstable();
    both
}

fn tau_over(acc: &[f64], scores: &[f64], idx: &[usize]) -> f64 {
    let m = idx.len();
    let mut sum = 0i64;
    for (p, &i) in idx.iter().enumerate() {
        for &j in &idx[p + 1..] {
            sum += (sign_cmp(acc[i], acc[j]) * sign_cmp(scores[i], scores[j])) as i64;
        }
    }
    2.0 * sum as f64 / (m * (m - 1)) as f64
}

pub fn top5_recall(acc: &[f64], scores: &[f64]) -> Result<f64> {
    check_pair(acc, scores, 5)?;
    Ok(top5_overlap(acc, scores).len() as f64 / 5.0)
}

pub fn kendall_tau(acc: &[f64], scores: &[f64]) -> Result<f64> {
    check_pair(acc, scores, 2)?;
    let all: Vec<usize> = (0..acc.len()).collect();
    Ok(tau_over(acc, scores, &all))
}

/// Kendall's tau over the models in both top-5 sets; 0 when fewer than two
/// models are shared.
pub fn kendall_tau_top5(acc: &[f64], scores: &[f64]) -> Result<f64> {
    check_pair(acc, scores, 5)?;
    let shared = top5_overlap(acc, scores);
    if shared.len() < 2 {
        return Ok(0.0);
    }
    Ok(tau_over(acc, scores, &shared))
}

/// Ground-truth accuracy of the highest-scored model.
pub fn top1_accuracy(acc: &[f64], scores: &[f64]) -> Result<f64> {
    check_pair(acc, scores, 1)?;
    Ok(acc[top_k_indices(scores, 1)[0]])
}

pub fn oracle(acc: &[f64]) -> Result<f64> {
    if acc.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(acc.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

pub fn ranking_metrics(acc: &[f64], scores: &[f64]) -> Result<RankingMetrics> {
    Ok(RankingMetrics {
        r5: top5_recall(acc, scores)?,
        tau5: kendall_tau_top5(acc, scores)?,
        tau: kendall_tau(acc, scores)?,
        top1_acc: top1_accuracy(acc, scores)?,
        oracle: oracle(acc)?,
    })
}
