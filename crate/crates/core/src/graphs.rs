//! Class-structure graphs for the two modalities.
//!
//! The textual graph has one node per class feature and cosine edges. The
//! visual graph models each pseudo-labeled cluster of image features as a
//! Gaussian and connects clusters by their Bhattacharyya distance (or the
//! corresponding coefficient `exp(-distance)`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::zeroshot::{dot, PseudoLabels};

/// Absolute ridge added to every shrunk covariance diagonal.
pub const COVARIANCE_FLOOR: f64 = 1e-6;

/// Default relative shrinkage intensity.
pub const DEFAULT_SHRINKAGE: f64 = 1e-2;

/// Dense symmetric `n x n` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_vec(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        Ok(Self { n, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        Self { n, values }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Sub-matrix over the given indices, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            for &j in idx {
                values.push(self.get(i, j));
            }
        }
        Self {
            n: idx.len(),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextualGraph {
    pub nodes: EmbeddingMatrix,
    pub edges: SquareMatrix,
}

/// Cosine edges between unit-norm class features.
pub fn build_textual_graph(textual: &EmbeddingMatrix) -> TextualGraph {
    let k = textual.rows();
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let c = dot(textual.row(i), textual.row(j));
            values[i * k + j] = c;
            values[j * k + i] = c;
        }
    }
    TextualGraph {
        nodes: textual.clone(),
        edges: SquareMatrix { n: k, values },
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovMode {
    Full,
    #[default]
    Diag,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeTransform {
    /// Raw Bhattacharyya distance.
    BhDistance,
    /// Bhattacharyya coefficient, `exp(-distance)`.
    #[default]
    BhCoefficient,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Covariance {
    /// Row-major `D x D`.
    Full(Vec<f64>),
    Diag(Vec<f64>),
}

impl Covariance {
    pub fn mode(&self) -> CovMode {
        match self {
            Covariance::Full(_) => CovMode::Full,
            Covariance::Diag(_) => CovMode::Diag,
        }
    }
}

/// One node of the visual graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassGaussian {
    pub mean: Vec<f64>,
    pub covariance: Covariance,
    pub count: usize,
    log_det: f64,
}

impl ClassGaussian {
    /// Fails when the covariance is not positive definite.
    pub fn new(mean: Vec<f64>, covariance: Covariance, count: usize) -> Result<Self> {
        let d = mean.len();
        let log_det = match &covariance {
            Covariance::Full(c) => {
                if c.len() != d * d {
                    return Err(Error::DimensionMismatch {
                        expected: d * d,
                        got: c.len(),
                    });
                }
                cholesky(c, d)?.log_det()
            }
            Covariance::Diag(v) => {
                if v.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: v.len(),
                    });
                }
                diag_log_det(v)?
            }
        };
        Ok(Self {
            mean,
            covariance,
            count,
            log_det,
        })
    }

    fn inactive(dims: usize, mode: CovMode) -> Self {
        let covariance = match mode {
            CovMode::Full => Covariance::Full(vec![0.0; dims * dims]),
            CovMode::Diag => Covariance::Diag(vec![0.0; dims]),
        };
        Self {
            mean: vec![0.0; dims],
            covariance,
            count: 0,
            log_det: f64::NEG_INFINITY,
        }
    }

    pub fn is_active(&self) -> bool {
        self.count > 0
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }
}

fn diag_log_det(v: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (pivot, &x) in v.iter().enumerate() {
        if x.is_nan() || x <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot, value: x });
        }
        acc += x.ln();
    }
    Ok(acc)
}

/// Lower-triangular Cholesky factor.
struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

fn cholesky(a: &[f64], n: usize) -> Result<Cholesky> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if diag.is_nan() || diag <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(Cholesky { n, lower: l })
}

impl Cholesky {
    fn log_det(&self) -> f64 {
        2.0 * (0..self.n)
            .map(|i| self.lower[i * self.n + i].ln())
            .sum::<f64>()
    }

    /// `bᵀ A⁻¹ b` via forward substitution.
    fn inv_quad(&self, b: &[f64]) -> f64 {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s = b[i] - row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum::<f64>();
            y[i] = s / self.lower[i * n + i];
        }
        y.iter().map(|v| v * v).sum()
    }
}

/// Fits one Gaussian per pseudo-labeled cluster.
///
/// Covariances are the biased (divide by `N_k`) estimate, shrunk as
/// `Σ + (shrinkage · tr(Σ)/D + COVARIANCE_FLOOR) · I`. In diagonal mode only
/// the diagonal is kept before shrinking. Empty clusters come back inactive.
pub fn cluster_stats(
    visual: &EmbeddingMatrix,
    pseudo: &PseudoLabels,
    mode: CovMode,
    shrinkage: f64,
) -> Result<Vec<ClassGaussian>> {
    if pseudo.assignments.len() != visual.rows() {
        return Err(Error::DimensionMismatch {
            expected: visual.rows(),
            got: pseudo.assignments.len(),
        });
    }
    if !(shrinkage >= 0.0 && shrinkage.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "shrinkage must be non-negative, got {shrinkage}"
        )));
    }
    let d = visual.cols();
    let k = pseudo.num_classes();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in pseudo.assignments.iter().enumerate() {
        if c >= k {
            return Err(Error::InvalidParameter(format!(
                "pseudo-label {c} outside [0, {k})"
            )));
        }
        members[c].push(i);
    }

    members
        .par_iter()
        .map(|rows| {
            if rows.is_empty() {
                return Ok(ClassGaussian::inactive(d, mode));
            }
            let n = rows.len() as f64;
            let mut mean = vec![0.0; d];
            for &i in rows {
                for (m, &v) in mean.iter_mut().zip(visual.row(i)) {
                    *m += v as f64;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);

            let covariance = match mode {
                CovMode::Diag => {
                    let mut var = vec![0.0; d];
                    for &i in rows {
                        for ((s, &v), m) in var.iter_mut().zip(visual.row(i)).zip(&mean) {
                            let c = v as f64 - m;
                            *s += c * c;
                        }
                    }
                    var.iter_mut().for_each(|s| *s /= n);
                    let ridge = shrinkage * var.iter().sum::<f64>() / d as f64 + COVARIANCE_FLOOR;
                    var.iter_mut().for_each(|s| *s += ridge);
                    Covariance::Diag(var)
                }
                CovMode::Full => {
                    let mut cov = vec![0.0; d * d];
                    let mut centered = vec![0.0; d];
                    for &i in rows {
                        for ((c, &v), m) in centered.iter_mut().zip(visual.row(i)).zip(&mean) {
                            *c = v as f64 - m;
                        }
                        for a in 0..d {
                            let ca = centered[a];
                            for b in a..d {
                                cov[a * d + b] += ca * centered[b];
                            }
                        }
                    }
                    for a in 0..d {
                        for b in a..d {
                            let v = cov[a * d + b] / n;
                            cov[a * d + b] = v;
                            cov[b * d + a] = v;
                        }
                    }
                    let trace: f64 = (0..d).map(|a| cov[a * d + a]).sum();
                    let ridge = shrinkage * trace / d as f64 + COVARIANCE_FLOOR;
                    for a in 0..d {
                        cov[a * d + a] += ridge;
                    }
                    Covariance::Full(cov)
                }
            };
            ClassGaussian::new(mean, covariance, rows.len())
        })
        .collect()
}

/// Bhattacharyya distance between two Gaussians,
/// `(1/8) Δᵀ Σ⁻¹ Δ + (1/2) ln(|Σ| / sqrt(|Σa| |Σb|))` with `Σ = (Σa + Σb) / 2`.
pub fn bhattacharyya(a: &ClassGaussian, b: &ClassGaussian) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            got: b.dims(),
        });
    }
    if !a.is_active() || !b.is_active() {
        return Err(Error::InvalidParameter(
            "Bhattacharyya distance needs two non-empty clusters".into(),
        ));
    }
    let delta: Vec<f64> = a.mean.iter().zip(&b.mean).map(|(x, y)| x - y).collect();
    let value = match (&a.covariance, &b.covariance) {
        (Covariance::Diag(va), Covariance::Diag(vb)) => {
            let mut quad = 0.0;
            let mut log_det = 0.0;
            for ((&x, &y), &dm) in va.iter().zip(vb).zip(&delta) {
                let s = 0.5 * (x + y);
                quad += dm * dm / s;
                log_det += s.ln();
            }
            quad / 8.0 + 0.5 * (log_det - 0.5 * (a.log_det + b.log_det))
        }
        (Covariance::Full(ca), Covariance::Full(cb)) => {
            let d = a.dims();
            let avg: Vec<f64> = ca.iter().zip(cb).map(|(x, y)| 0.5 * (x + y)).collect();
            let chol = cholesky(&avg, d)?;
            chol.inv_quad(&delta) / 8.0 + 0.5 * (chol.log_det() - 0.5 * (a.log_det + b.log_det))
        }
        _ => {
            return Err(Error::InvalidParameter(
                "covariance modes differ between Gaussians".into(),
            ))
        }
    };
    // rounding can leave identical Gaussians a hair below zero
    Ok(value.max(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisualGraph {
    pub gaussians: Vec<ClassGaussian>,
    /// Edges over active classes only, in class order.
    pub edges: SquareMatrix,
    pub active_mask: Vec<bool>,
}

impl VisualGraph {
    /// Original class indices of the active clusters.
    pub fn active_classes(&self) -> Vec<usize> {
        active_indices(&self.active_mask)
    }
}

pub(crate) fn active_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &a)| a.then_some(i))
        .collect()
}

/// Pairwise Bhattacharyya edges between every pair of active clusters.
pub fn build_visual_graph(
    gaussians: Vec<ClassGaussian>,
    transform: EdgeTransform,
) -> Result<VisualGraph> {
    let active_mask: Vec<bool> = gaussians.iter().map(ClassGaussian::is_active).collect();
    let active = active_indices(&active_mask);
    let n = active.len();
    if n < 2 {
        return Err(Error::TooFewActiveClasses { active: n });
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let dists = pairs
        .par_iter()
        .map(|&(i, j)| bhattacharyya(&gaussians[active[i]], &gaussians[active[j]]))
        .collect::<Result<Vec<f64>>>()?;
    let mut values = vec![0.0; n * n];
    for (&(i, j), &dist) in pairs.iter().zip(&dists) {
        let e = match transform {
            EdgeTransform::BhDistance => dist,
            EdgeTransform::BhCoefficient => (-dist).exp(),
        };
        values[i * n + j] = e;
        values[j * n + i] = e;
    }
    Ok(VisualGraph {
        gaussians,
        edges: SquareMatrix { n, values },
        active_mask,
    })
}
