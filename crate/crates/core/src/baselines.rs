//! Training-free comparison scores: entropy, confidence, rotation
//! prediction, soft neighborhood density and dispersion.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{normalize_bundle, DatasetBundle, EmbeddingMatrix, ValidationReport};
use crate::error::{Error, Result};
use crate::zeroshot::{argmax, cosine_matrix, dot, softmax_probs, softmax_row, SimilarityMatrix};

pub const DEFAULT_SND_TAU: f64 = 0.05;
pub const DEFAULT_KMEANS_ITERS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub snd_tau: f64,
    pub ds_seed: u64,
    pub normalize: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            snd_tau: DEFAULT_SND_TAU,
            ds_seed: 0,
            normalize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineScores {
    /// Mean Shannon entropy of the temperature-1 zero-shot probabilities.
    pub ent_raw: f64,
    /// `-ent_raw`, oriented so that larger predicts higher accuracy.
    pub ent: f64,
    pub conf: f64,
    pub snd: f64,
    /// `-inf` when every cluster center coincides.
    pub ds: f64,
    pub rot: Option<f64>,
}

fn entropy(row: &[f64]) -> f64 {
    row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

/// Mean natural-log entropy of the probability rows.
pub fn mean_entropy(probs: &SimilarityMatrix) -> f64 {
    if probs.rows() == 0 {
        return 0.0;
    }
    probs.iter_rows().map(entropy).sum::<f64>() / probs.rows() as f64
}

/// Negated mean entropy.
pub fn entropy_score(probs: &SimilarityMatrix) -> f64 {
    -mean_entropy(probs)
}

/// Mean of the per-row maximum probability.
pub fn confidence_score(probs: &SimilarityMatrix) -> f64 {
    if probs.rows() == 0 {
        return 0.0;
    }
    probs
        .iter_rows()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / probs.rows() as f64
}

/// Fraction of rotated images whose nearest rotation prompt is the
/// rotation actually applied. Row `4i + r` holds image `i` at angle `r`.
pub fn rotation_score(rot_visual: &EmbeddingMatrix, rot_textual: &EmbeddingMatrix) -> Result<f64> {
    if rot_textual.rows() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: rot_textual.rows(),
        });
    }
    if rot_visual.rows() == 0 || !rot_visual.rows().is_multiple_of(4) {
        return Err(Error::InvalidParameter(format!(
            "rot_visual needs a positive multiple of 4 rows, got {}",
            rot_visual.rows()
        )));
    }
    let sim = cosine_matrix(rot_visual, rot_textual)?;
    let hits = sim
        .iter_rows()
        .enumerate()
        .filter(|(i, row)| argmax(row) == i % 4)
        .count();
    Ok(hits as f64 / rot_visual.rows() as f64)
}

/// Soft neighborhood density: mean entropy of each image's softmax
/// distribution (temperature `tau`) over its cosine similarities to every
/// other image.
pub fn snd_score(visual: &EmbeddingMatrix, tau: f64) -> Result<f64> {
    let n = visual.rows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "snd temperature must be positive, got {tau}"
        )));
    }
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let vi = visual.row(i);
            let sims: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| dot(vi, visual.row(j)))
                .collect();
            let mut probs = vec![0.0; sims.len()];
            softmax_row(&sims, tau, &mut probs);
            entropy(&probs)
        })
        .collect();
    Ok(per_row.iter().sum::<f64>() / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Sum of squared distances to assigned centers after each assignment
    /// step.
    pub objective: Vec<f64>,
}

fn sq_dist(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y;
            d * d
        })
        .sum()
}

fn nearest(point: &[f32], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn to_f64(row: &[f32]) -> Vec<f64> {
    row.iter().map(|&v| v as f64).collect()
}

/// k-means++ seeding followed by Lloyd iterations until the assignment no
/// longer changes or `max_iters` is reached. Clusters that empty out are
/// re-seeded at the point farthest from its current center.
pub fn kmeans(features: &EmbeddingMatrix, k: usize, seed: u64, max_iters: usize) -> Result<KMeans> {
    let n = features.rows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if k > n {
        return Err(Error::InsufficientData { needed: k, got: n });
    }
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers = Vec::with_capacity(k);
    centers.push(to_f64(features.row(rng.gen_range(0..n))));
    let mut closest: Vec<f64> = features
        .iter_rows()
        .map(|r| sq_dist(r, &centers[0]))
        .collect();
    while centers.len() < k {
        let next = match WeightedIndex::new(&closest) {
            Ok(dist) => dist.sample(&mut rng),
            // every point already sits on a center
            Err(_) => rng.gen_range(0..n),
        };
        let center = to_f64(features.row(next));
        for (c, r) in closest.iter_mut().zip(features.iter_rows()) {
            *c = c.min(sq_dist(r, &center));
        }
        centers.push(center);
    }

    let mut assignments = vec![usize::MAX; n];
    let mut objective = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let nearest_all: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| nearest(features.row(i), &centers))
            .collect();
        objective.push(nearest_all.iter().map(|p| p.1).sum());
        let next: Vec<usize> = nearest_all.iter().map(|p| p.0).collect();
        let changed = next != assignments;
        assignments = next;
        if !changed {
            break;
        }

        let d = features.cols();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums[c].iter_mut().zip(features.row(i)) {
                *s += v as f64;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centers[c] = sums[c].iter().map(|s| s * inv).collect();
                continue;
            }
            let far = (0..n)
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| {
                    nearest_all[a]
                        .1
                        .total_cmp(&nearest_all[b].1)
                        .then(b.cmp(&a))
                })
                .expect("k <= n leaves a candidate point");
            taken[far] = true;
            centers[c] = to_f64(features.row(far));
        }
    }

    Ok(KMeans {
        assignments,
        centers,
        iterations,
        objective,
    })
}

/// `ln( Σ_k n_k ‖μ̄ − μ_k‖² / (k − 1) )` where `μ̄` is the mean of the
/// cluster centers. Returns `-inf` when the weighted spread is zero.
pub fn dispersion_from_clusters(assignments: &[usize], centers: &[Vec<f64>]) -> Result<f64> {
    let k = centers.len();
    if k < 2 {
        return Err(Error::InsufficientData { needed: 2, got: k });
    }
    let d = centers[0].len();
    let mut counts = vec![0usize; k];
    for &a in assignments {
        if a >= k {
            return Err(Error::InvalidParameter(format!(
                "cluster index {a} outside [0, {k})"
            )));
        }
        counts[a] += 1;
    }
    let mut grand = vec![0.0; d];
    for c in centers {
        for (g, v) in grand.iter_mut().zip(c) {
            *g += v / k as f64;
        }
    }
    let spread: f64 = centers
        .iter()
        .zip(&counts)
        .map(|(c, &n)| {
            n as f64
                * c.iter()
                    .zip(&grand)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
        })
        .sum();
    Ok((spread / (k - 1) as f64).ln())
}

pub fn dispersion_score(visual: &EmbeddingMatrix, k: usize, seed: u64) -> Result<f64> {
    if k < 2 {
        return Err(Error::InsufficientData { needed: 2, got: k });
    }
    let km = kmeans(visual, k, seed, DEFAULT_KMEANS_ITERS)?;
    dispersion_from_clusters(&km.assignments, &km.centers)
}

/// Every baseline for one bundle. Labels, if present, are never read.
pub fn baseline_scores(
    bundle: &DatasetBundle,
    config: &BaselineConfig,
) -> Result<(BaselineScores, ValidationReport)> {
    let (normalized, mut report) = if config.normalize {
        normalize_bundle(bundle)
    } else {
        (bundle.clone(), ValidationReport::new())
    };
    let b = &normalized;
    let sim = cosine_matrix(&b.visual, &b.textual)?;
    let probs = softmax_probs(&sim, 1.0)?;
    let ent_raw = mean_entropy(&probs);

    let k = b.num_classes().min(b.num_images());
    if k < b.num_classes() {
        report.warn(format!(
            "dispersion score clustered into {k} groups: fewer images than classes"
        ));
    }
    let ds = dispersion_score(&b.visual, k, config.ds_seed)?;
    if ds == f64::NEG_INFINITY {
        report.warn("dispersion score is -inf: all cluster centers coincide");
    }
    let rot = match (&b.rot_visual, &b.rot_textual) {
        (Some(v), Some(t)) => Some(rotation_score(v, t)?),
        _ => None,
    };
    Ok((
        BaselineScores {
            ent_raw,
            ent: -ent_raw,
            conf: confidence_score(&probs),
            snd: snd_score(&b.visual, config.snd_tau)?,
            ds,
            rot,
        },
        report,
    ))
}
