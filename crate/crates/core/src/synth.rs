//! Synthetic bundles and model zoos with a controllable degree of
//! visual-textual alignment.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, using separate streams for each ingredient:
//!
//! | stream | draws                                    | seed            |
//! |--------|------------------------------------------|-----------------|
//! | 0      | class anchors                            | `seed`          |
//! | 1      | true-class shuffle and label noise       | `seed`          |
//! | 2      | image noise                              | per-model seed  |
//! | 3      | rotation prompt anchors                  | `seed`          |
//! | 4      | rotated-image noise                      | per-model seed  |
//!
//! An image of class `y` is `normalize(α·anchor_y + (1−α)·g + σ·h)` with
//! `g`, `h` standard Gaussian vectors. Class anchors are
//! `normalize(√ρ·c + √(1−ρ)·z_k)` around a shared Gaussian direction `c`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{DatasetBundle, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::zeroshot::{cosine_matrix, pseudo_labels, zero_shot_accuracy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub classes: usize,
    pub dims: usize,
    pub images: usize,
    /// Weight on the class anchor versus isotropic noise, in `[0, 1]`.
    pub alpha: f64,
    /// Scale of the additional per-image jitter.
    pub spread: f64,
    /// Shared component between class anchors, in `[0, 1]`.
    pub anchor_correlation: f64,
    /// Fraction of recorded labels replaced by a uniformly drawn class.
    pub label_noise: f64,
    pub seed: u64,
    /// Also emit rotation tensors for the rotation baseline.
    pub with_rotations: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            dims: 32,
            images: 500,
            alpha: 0.5,
            spread: 0.1,
            anchor_correlation: 0.0,
            label_noise: 0.0,
            seed: 0,
            with_rotations: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )))
            }
        };
        unit("alpha", self.alpha)?;
        unit("anchor_correlation", self.anchor_correlation)?;
        unit("label_noise", self.label_noise)?;
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spread must be non-negative, got {}",
                self.spread
            )));
        }
        if self.classes < 2 {
            return Err(Error::InvalidParameter("need at least 2 classes".into()));
        }
        if self.dims < 2 {
            return Err(Error::InvalidParameter("need at least 2 dimensions".into()));
        }
        if self.images < self.classes {
            return Err(Error::InvalidParameter(format!(
                "need at least as many images ({}) as classes ({})",
                self.images, self.classes
            )));
        }
        Ok(())
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalized_f32(v: &[f64]) -> Vec<f32> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / norm) as f32).collect()
}

/// `count` correlated unit anchors.
fn anchors(rng: &mut ChaCha8Rng, count: usize, d: usize, rho: f64) -> Vec<Vec<f64>> {
    let shared = gaussian(rng, d);
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    (0..count)
        .map(|_| {
            let z = gaussian(rng, d);
            let v: Vec<f64> = shared.iter().zip(&z).map(|(s, z)| a * s + b * z).collect();
            normalized_f32(&v).into_iter().map(f64::from).collect()
        })
        .collect()
}

fn noisy_image(rng: &mut ChaCha8Rng, anchor: &[f64], alpha: f64, spread: f64) -> Vec<f32> {
    let g = gaussian(rng, anchor.len());
    let h = gaussian(rng, anchor.len());
    let v: Vec<f64> = anchor
        .iter()
        .zip(g.iter().zip(&h))
        .map(|(&a, (&g, &h))| alpha * a + (1.0 - alpha) * g + spread * h)
        .collect();
    normalized_f32(&v)
}

fn to_matrix(rows: &[Vec<f32>], d: usize) -> EmbeddingMatrix {
    EmbeddingMatrix::new(rows.len(), d, rows.concat()).expect("finite synthetic features")
}

/// Shared class structure: anchors, true classes and recorded labels.
struct Scaffold {
    anchors: Vec<Vec<f64>>,
    true_classes: Vec<usize>,
    labels: Vec<usize>,
    rot_anchors: Option<Vec<Vec<f64>>>,
}

fn scaffold(cfg: &SynthConfig) -> Scaffold {
    let (k, n, d) = (cfg.classes, cfg.images, cfg.dims);
    let anchors = anchors(&mut rng(cfg.seed, 0), k, d, cfg.anchor_correlation);

    let mut label_rng = rng(cfg.seed, 1);
    let mut true_classes: Vec<usize> = (0..n).map(|i| i % k).collect();
    true_classes.shuffle(&mut label_rng);
    let mut labels = true_classes.clone();
    let flipped = (cfg.label_noise * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut label_rng);
    for &i in &order[..flipped.min(n)] {
        labels[i] = label_rng.gen_range(0..k);
    }

    let rot_anchors = cfg
        .with_rotations
        .then(|| anchors_for_rotation(cfg.seed, d));
    Scaffold {
        anchors,
        true_classes,
        labels,
        rot_anchors,
    }
}

fn anchors_for_rotation(seed: u64, d: usize) -> Vec<Vec<f64>> {
    anchors(&mut rng(seed, 3), 4, d, 0.0)
}

fn realize(
    cfg: &SynthConfig,
    scaffold: &Scaffold,
    noise_seed: u64,
    model_id: String,
) -> DatasetBundle {
    let d = cfg.dims;
    let mut noise = rng(noise_seed, 2);
    let visual: Vec<Vec<f32>> = scaffold
        .true_classes
        .iter()
        .map(|&y| noisy_image(&mut noise, &scaffold.anchors[y], cfg.alpha, cfg.spread))
        .collect();
    let textual: Vec<Vec<f32>> = scaffold
        .anchors
        .iter()
        .map(|a| a.iter().map(|&v| v as f32).collect())
        .collect();

    let (rot_visual, rot_textual) = match &scaffold.rot_anchors {
        Some(rot) => {
            let mut noise = rng(noise_seed, 4);
            let rows: Vec<Vec<f32>> = (0..cfg.images)
                .flat_map(|_| 0..4)
                .map(|r| noisy_image(&mut noise, &rot[r], cfg.alpha, cfg.spread))
                .collect();
            let prompts: Vec<Vec<f32>> = rot
                .iter()
                .map(|a| a.iter().map(|&v| v as f32).collect())
                .collect();
            (Some(to_matrix(&rows, d)), Some(to_matrix(&prompts, d)))
        }
        None => (None, None),
    };

    DatasetBundle {
        model_id,
        dataset_id: format!(
            "synth-k{}-d{}-n{}-s{}",
            cfg.classes, d, cfg.images, cfg.seed
        ),
        class_names: (0..cfg.classes).map(|k| format!("class_{k:03}")).collect(),
        visual: to_matrix(&visual, d),
        textual: to_matrix(&textual, d),
        textual_templates: None,
        labels: Some(scaffold.labels.clone()),
        rot_visual,
        rot_textual,
    }
}

/// One synthetic bundle, a pure function of `cfg`.
pub fn generate_bundle(cfg: &SynthConfig) -> Result<DatasetBundle> {
    cfg.validate()?;
    let scaffold = scaffold(cfg);
    Ok(realize(
        cfg,
        &scaffold,
        cfg.seed,
        format!("synth-a{:.3}-s{}", cfg.alpha, cfg.seed),
    ))
}

#[derive(Clone, Debug)]
pub struct ZooMember {
    pub bundle: DatasetBundle,
    pub alpha: f64,
    /// Zero-shot accuracy against the recorded labels.
    pub accuracy: f64,
}

/// Ground-truth zero-shot accuracy of a labeled bundle.
pub fn bundle_accuracy(bundle: &DatasetBundle) -> Result<f64> {
    let sim = cosine_matrix(&bundle.visual, &bundle.textual)?;
    zero_shot_accuracy(&pseudo_labels(&sim), bundle.labels.as_deref())
}

/// `n_models` bundles over one dataset: shared anchors and labels, alignment
/// evenly spaced over `alpha_range`, member `m` drawing image noise from
/// seed `base.seed + m`.
pub fn generate_zoo(
    n_models: usize,
    base: &SynthConfig,
    alpha_range: (f64, f64),
) -> Result<Vec<ZooMember>> {
    if n_models < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: n_models,
        });
    }
    let (lo, hi) = alpha_range;
    for a in [lo, hi] {
        SynthConfig {
            alpha: a,
            ..base.clone()
        }
        .validate()?;
    }
    base.validate()?;
    let scaffold = scaffold(base);
    (0..n_models)
        .into_par_iter()
        .map(|m| {
            let alpha = lo + (hi - lo) * m as f64 / (n_models - 1) as f64;
            let cfg = SynthConfig {
                alpha,
                ..base.clone()
            };
            let bundle = realize(
                &cfg,
                &scaffold,
                base.seed.wrapping_add(m as u64),
                format!("model_{m:02}"),
            );
            let accuracy = bundle_accuracy(&bundle)?;
            Ok(ZooMember {
                bundle,
                alpha,
                accuracy,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_alignment_is_perfectly_accurate() {
        let cfg = SynthConfig {
            alpha: 1.0,
            spread: 0.0,
            label_noise: 0.0,
            classes: 7,
            images: 70,
            ..SynthConfig::default()
        };
        let b = generate_bundle(&cfg).unwrap();
        b.validate().unwrap();
        assert_eq!(bundle_accuracy(&b).unwrap(), 1.0);
    }

    #[test]
    fn same_seed_same_bundle() {
        let cfg = SynthConfig {
            with_rotations: true,
            images: 40,
            ..SynthConfig::default()
        };
        let a = generate_bundle(&cfg).unwrap();
        assert_eq!(a, generate_bundle(&cfg).unwrap());
        assert_eq!(a.rot_visual.as_ref().unwrap().rows(), 160);
        let other = generate_bundle(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.visual, other.visual);
    }

    #[test]
    fn label_noise_flips_the_requested_fraction() {
        let cfg = SynthConfig {
            label_noise: 0.5,
            classes: 2,
            images: 400,
            alpha: 1.0,
            spread: 0.0,
            ..SynthConfig::default()
        };
        let acc = bundle_accuracy(&generate_bundle(&cfg).unwrap()).unwrap();
        // 200 labels redrawn, about half of them land on the other class
        assert!((acc - 0.75).abs() < 0.08, "accuracy {acc}");
    }

    #[test]
    fn out_of_range_parameters() {
        for cfg in [
            SynthConfig {
                alpha: 1.5,
                ..SynthConfig::default()
            },
            SynthConfig {
                label_noise: -0.1,
                ..SynthConfig::default()
            },
            SynthConfig {
                anchor_correlation: 2.0,
                ..SynthConfig::default()
            },
            SynthConfig {
                spread: -1.0,
                ..SynthConfig::default()
            },
            SynthConfig {
                images: 5,
                classes: 10,
                ..SynthConfig::default()
            },
            SynthConfig {
                dims: 1,
                ..SynthConfig::default()
            },
        ] {
            assert!(matches!(
                generate_bundle(&cfg),
                Err(Error::InvalidParameter(_))
            ));
        }
        assert!(generate_zoo(1, &SynthConfig::default(), (0.1, 0.9)).is_err());
        assert!(generate_zoo(3, &SynthConfig::default(), (0.1, 1.9)).is_err());
    }

    #[test]
    fn zoo_shares_anchors_and_labels() {
        let base = SynthConfig {
            images: 50,
            ..SynthConfig::default()
        };
        let zoo = generate_zoo(4, &base, (0.2, 0.8)).unwrap();
        assert_eq!(zoo.len(), 4);
        for m in &zoo[1..] {
            assert_eq!(m.bundle.textual, zoo[0].bundle.textual);
            assert_eq!(m.bundle.labels, zoo[0].bundle.labels);
        }
        assert!((zoo[3].alpha - 0.8).abs() < 1e-12);
        // member 0 reproduces a standalone bundle at the same alpha
        let solo = generate_bundle(&SynthConfig { alpha: 0.2, ..base }).unwrap();
        assert_eq!(solo.visual, zoo[0].bundle.visual);
    }
}
