//! Zero-shot classification head: cosine similarities between image and
//! class features, pseudo-labels, temperature softmax and accuracy.

use rayon::prelude::*;

use crate::bundle::EmbeddingMatrix;
use crate::error::{Error, Result};

/// `N x K` matrix of image-to-class cosine similarities, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.cols + k]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }
}

/// Pseudo-label per image plus the resulting cluster sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoLabels {
    pub assignments: Vec<usize>,
    pub counts: Vec<usize>,
}

impl PseudoLabels {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Dot products of every visual row against every textual row. For unit
/// rows these are cosine similarities.
pub fn cosine_matrix(
    visual: &EmbeddingMatrix,
    textual: &EmbeddingMatrix,
) -> Result<SimilarityMatrix> {
    if visual.cols() != textual.cols() {
        return Err(Error::DimensionMismatch {
            expected: textual.cols(),
            got: visual.cols(),
        });
    }
    let k = textual.rows();
    let mut values = vec![0.0; visual.rows() * k];
    if k > 0 {
        values.par_chunks_mut(k).enumerate().for_each(|(i, out)| {
            let v = visual.row(i);
            for (c, o) in out.iter_mut().enumerate() {
                *o = dot(v, textual.row(c));
            }
        });
    }
    SimilarityMatrix::from_vec(visual.rows(), k, values)
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn pseudo_labels(sim: &SimilarityMatrix) -> PseudoLabels {
    let mut counts = vec![0; sim.cols()];
    let assignments = sim
        .iter_rows()
        .map(|row| {
            let k = argmax(row);
            counts[k] += 1;
            k
        })
        .collect();
    PseudoLabels {
        assignments,
        counts,
    }
}

/// Softmax of `row / temperature` written into `out`, max-subtracted.
pub(crate) fn softmax_row(row: &[f64], temperature: f64, out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = ((v - max) / temperature).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Row-wise softmax of `sim / temperature`. Returns an `N x K` matrix of
/// probabilities.
pub fn softmax_probs(sim: &SimilarityMatrix, temperature: f64) -> Result<SimilarityMatrix> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let k = sim.cols();
    let mut values = vec![0.0; sim.rows() * k];
    if k > 0 {
        values
            .par_chunks_mut(k)
            .enumerate()
            .for_each(|(i, out)| softmax_row(sim.row(i), temperature, out));
    }
    SimilarityMatrix::from_vec(sim.rows(), k, values)
}

/// Fraction of images whose pseudo-label equals the ground truth.
pub fn zero_shot_accuracy(pseudo: &PseudoLabels, labels: Option<&[usize]>) -> Result<f64> {
    let labels = labels.ok_or(Error::MissingLabels("zero-shot accuracy"))?;
    if labels.len() != pseudo.assignments.len() {
        return Err(Error::DimensionMismatch {
            expected: pseudo.assignments.len(),
            got: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let hits = pseudo
        .assignments
        .iter()
        .zip(labels)
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f32]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    fn sim(rows: &[&[f64]]) -> SimilarityMatrix {
        let k = rows[0].len();
        SimilarityMatrix::from_vec(rows.len(), k, rows.concat()).unwrap()
    }

    #[test]
    fn cosine_identity_orthogonal_antipodal() {
        let v = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let t = m(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        let s = cosine_matrix(&v, &t).unwrap();
        assert_eq!(s.row(0), &[1.0, -1.0]);
        assert_eq!(s.row(1), &[0.0, 0.0]);
        assert!(matches!(
            cosine_matrix(&v, &m(&[&[1.0, 0.0, 0.0]])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn argmax_and_ties() {
        let p = pseudo_labels(&sim(&[&[0.2, 0.9], &[0.5, 0.5]]));
        assert_eq!(p.assignments, vec![1, 0]);

        let p = pseudo_labels(&sim(&[
            &[0.0, 0.1, 0.3],
            &[0.2, 0.1, 0.5],
            &[-1.0, 0.0, 0.1],
        ]));
        assert_eq!(p.counts, vec![0, 0, 3]);
    }

    #[test]
    fn softmax_examples() {
        let s = sim(&[&[1.0, 1.0, 1.0], &[1.0, 0.0, 0.5]]);
        let p = softmax_probs(&s, 0.7).unwrap();
        for v in p.row(0) {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }

        let p = softmax_probs(&sim(&[&[1.0, 0.0]]), 0.05).unwrap();
        let expected = 20f64.exp() / (20f64.exp() + 1.0);
        assert!((p.get(0, 0) - expected).abs() < 1e-15);
        assert!((p.get(0, 0) - (1.0 - 2.061e-9)).abs() < 1e-12);

        let p = softmax_probs(&s, 1e4).unwrap();
        for v in p.row(1) {
            assert!((v - 1.0 / 3.0).abs() < 1e-3);
        }

        assert!(softmax_probs(&s, 0.0).is_err());
        assert!(softmax_probs(&s, -1.0).is_err());
    }

    #[test]
    fn accuracy_counting() {
        let p = PseudoLabels {
            assignments: vec![0, 1, 1, 0],
            counts: vec![2, 2],
        };
        assert_eq!(zero_shot_accuracy(&p, Some(&[0, 1, 1, 1])).unwrap(), 0.75);
        assert_eq!(zero_shot_accuracy(&p, Some(&[1, 0, 0, 1])).unwrap(), 0.0);
        assert!(matches!(
            zero_shot_accuracy(&p, None),
            Err(Error::MissingLabels(_))
        ));
    }

    #[test]
    fn aligned_visual_is_perfectly_classified() {
        let t = m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let v = m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let p = pseudo_labels(&cosine_matrix(&v, &t).unwrap());
        assert_eq!(zero_shot_accuracy(&p, Some(&[1, 2, 0])).unwrap(), 1.0);
    }
}
