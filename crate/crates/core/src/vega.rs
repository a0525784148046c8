//! The alignment score: node similarity plus edge similarity between the
//! textual and visual class graphs of one model on one dataset.

use serde::{Deserialize, Serialize};

use crate::bundle::{normalize_bundle, DatasetBundle, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graphs::{
    build_textual_graph, build_visual_graph, cluster_stats, CovMode, EdgeTransform, SquareMatrix,
    DEFAULT_SHRINKAGE,
};
use crate::zeroshot::{cosine_matrix, pseudo_labels, softmax_row, PseudoLabels, SimilarityMatrix};

pub const DEFAULT_TEMPERATURE: f64 = 0.05;

/// Knobs that fully determine a score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VegaConfig {
    /// Softmax temperature for node similarity.
    pub t: f64,
    pub cov_mode: CovMode,
    pub edge_transform: EdgeTransform,
    pub shrinkage: f64,
    /// L2-normalize features before scoring.
    pub normalize: bool,
    /// Leave self-edges out of the edge correlation.
    pub exclude_diagonal: bool,
}

impl Default for VegaConfig {
    fn default() -> Self {
        Self {
            t: DEFAULT_TEMPERATURE,
            cov_mode: CovMode::Diag,
            edge_transform: EdgeTransform::BhCoefficient,
            shrinkage: DEFAULT_SHRINKAGE,
            normalize: true,
            exclude_diagonal: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VegaScore {
    pub s_n: f64,
    pub s_e: f64,
    pub s: f64,
    pub active_classes: usize,
    pub config: VegaConfig,
}

/// Mean over images of the softmax probability (temperature `t`) assigned
/// to each image's pseudo-label.
///
/// This equals the cluster-size weighted mean of the per-cluster average
/// probabilities, normalized by the number of images, so it lies in
/// `[1/K, 1]`.
pub fn node_similarity_from(sim: &SimilarityMatrix, pseudo: &PseudoLabels, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {t}"
        )));
    }
    let n = sim.rows();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if pseudo.assignments.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pseudo.assignments.len(),
        });
    }
    let mut probs = vec![0.0; sim.cols()];
    let total: f64 = (0..n)
        .map(|i| {
            softmax_row(sim.row(i), t, &mut probs);
            probs[pseudo.assignments[i]]
        })
        .sum();
    Ok(total / n as f64)
}

pub fn node_similarity(
    visual: &EmbeddingMatrix,
    textual: &EmbeddingMatrix,
    pseudo: &PseudoLabels,
    t: f64,
) -> Result<f64> {
    node_similarity_from(&cosine_matrix(visual, textual)?, pseudo, t)
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.is_empty() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn flatten(m: &SquareMatrix, exclude_diagonal: bool) -> Vec<f64> {
    let n = m.size();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !exclude_diagonal || i != j)
        .map(|(i, j)| m.get(i, j))
        .collect()
}

/// `0.5 * pearson(E_T, E_V) + 0.5` over the flattened matrices. Zero
/// variance on either side yields 0.5.
pub fn edge_similarity(
    textual_edges: &SquareMatrix,
    visual_edges: &SquareMatrix,
    exclude_diagonal: bool,
) -> Result<f64> {
    if textual_edges.size() != visual_edges.size() {
        return Err(Error::DimensionMismatch {
            expected: textual_edges.size(),
            got: visual_edges.size(),
        });
    }
    if textual_edges.size() < 2 {
        return Err(Error::TooFewActiveClasses {
            active: textual_edges.size(),
        });
    }
    let corr = pearson(
        &flatten(textual_edges, exclude_diagonal),
        &flatten(visual_edges, exclude_diagonal),
    )
    .unwrap_or(0.0);
    Ok(0.5 * corr + 0.5)
}

/// Everything about a score that does not depend on the temperature.
#[derive(Clone, Debug)]
pub struct AlignmentParts {
    pub similarity: SimilarityMatrix,
    pub pseudo: PseudoLabels,
    pub s_e: f64,
    pub active_classes: usize,
}

/// Runs the zero-shot head and both graphs on features that are already
/// in their final (normalized or raw) form.
pub fn alignment_parts(
    visual: &EmbeddingMatrix,
    textual: &EmbeddingMatrix,
    config: &VegaConfig,
) -> Result<AlignmentParts> {
    let similarity = cosine_matrix(visual, textual)?;
    let pseudo = pseudo_labels(&similarity);
    let stats = cluster_stats(visual, &pseudo, config.cov_mode, config.shrinkage)?;
    let visual_graph = build_visual_graph(stats, config.edge_transform)?;
    let active = visual_graph.active_classes();
    let textual_edges = build_textual_graph(textual).edges.select(&active);
    let s_e = edge_similarity(&textual_edges, &visual_graph.edges, config.exclude_diagonal)?;
    Ok(AlignmentParts {
        similarity,
        pseudo,
        s_e,
        active_classes: active.len(),
    })
}

impl AlignmentParts {
    pub fn score(&self, config: &VegaConfig) -> Result<VegaScore> {
        let s_n = node_similarity_from(&self.similarity, &self.pseudo, config.t)?;
        Ok(VegaScore {
            s_n,
            s_e: self.s_e,
            s: s_n + self.s_e,
            active_classes: self.active_classes,
            config: *config,
        })
    }
}

/// Scores one bundle. Labels, if present, are never read.
pub fn vega_score(bundle: &DatasetBundle, config: &VegaConfig) -> Result<VegaScore> {
    let parts = if config.normalize {
        let (b, _) = normalize_bundle(bundle);
        alignment_parts(&b.visual, &b.textual, config)?
    } else {
        alignment_parts(&bundle.visual, &bundle.textual, config)?
    };
    parts.score(config)
}

/// Scores at each temperature, reusing the temperature-independent parts.
pub fn temperature_sweep(
    bundle: &DatasetBundle,
    config: &VegaConfig,
    temperatures: &[f64],
) -> Result<Vec<VegaScore>> {
    let parts = if config.normalize {
        let (b, _) = normalize_bundle(bundle);
        alignment_parts(&b.visual, &b.textual, config)?
    } else {
        alignment_parts(&bundle.visual, &bundle.textual, config)?
    };
    temperatures
        .iter()
        .map(|&t| parts.score(&VegaConfig { t, ..*config }))
        .collect()
}
