use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use vega_core::baselines::rotation_score;
use vega_core::bundle::{l2_normalize, DatasetBundle, EmbeddingMatrix};
use vega_core::synth::{bundle_accuracy, generate_bundle, generate_zoo, SynthConfig};
use vega_core::{vega_score, VegaConfig};

const GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn gaussian_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> EmbeddingMatrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f32, _>(StandardNormal))
        .collect();
    l2_normalize(&EmbeddingMatrix::new(rows, cols, data).unwrap()).0
}

fn bundle(visual: EmbeddingMatrix, textual: EmbeddingMatrix) -> DatasetBundle {
    let k = textual.rows();
    DatasetBundle {
        model_id: "m".into(),
        dataset_id: "d".into(),
        class_names: (0..k).map(|c| format!("c{c}")).collect(),
        visual,
        textual,
        textual_templates: None,
        labels: None,
        rot_visual: None,
        rot_textual: None,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn aligned_bundle_beats_pure_noise() {
    let (k, d) = (8, 16);
    let mut anchors = vec![0.0f32; k * d];
    for c in 0..k {
        anchors[c * d + c] = 1.0;
    }
    let anchors = EmbeddingMatrix::new(k, d, anchors).unwrap();
    let aligned = vega_score(
        &bundle(anchors.clone(), anchors.clone()),
        &VegaConfig::default(),
    )
    .unwrap();
    assert!(aligned.s_n > 0.99, "s_n = {}", aligned.s_n);

    let mut wins = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = gaussian_rows(&mut rng, k, d);
        let s = vega_score(&bundle(noise, anchors.clone()), &VegaConfig::default()).unwrap();
        if s.s < aligned.s {
            wins += 1;
        }
    }
    assert!(wins >= 19, "aligned won {wins}/20");
}

#[test]
fn median_score_degrades_with_alpha() {
    let medians: Vec<f64> = GRID
        .iter()
        .map(|&alpha| {
            let scores = (0..20)
                .map(|seed| {
                    let b = generate_bundle(&SynthConfig {
                        images: 200,
                        alpha,
                        seed,
                        ..Default::default()
                    })
                    .unwrap();
                    vega_score(&b, &VegaConfig::default()).unwrap().s
                })
                .collect();
            median(scores)
        })
        .collect();
    for w in medians.windows(2) {
        assert!(w[1] >= w[0], "medians over alpha grid: {medians:?}");
    }
}

#[test]
fn mean_accuracy_non_decreasing_in_alpha() {
    let means: Vec<f64> = GRID
        .iter()
        .map(|&alpha| {
            (0..10)
                .map(|seed| {
                    let b = generate_bundle(&SynthConfig {
                        alpha,
                        seed,
                        ..Default::default()
                    })
                    .unwrap();
                    bundle_accuracy(&b).unwrap()
                })
                .sum::<f64>()
                / 10.0
        })
        .collect();
    for w in means.windows(2) {
        assert!(w[1] >= w[0], "mean accuracy over alpha grid: {means:?}");
    }
}

#[test]
fn zero_alignment_is_chance() {
    let mean = (0..10)
        .map(|seed| {
            let b = generate_bundle(&SynthConfig {
                classes: 10,
                dims: 256,
                alpha: 0.0,
                seed,
                ..Default::default()
            })
            .unwrap();
            bundle_accuracy(&b).unwrap()
        })
        .sum::<f64>()
        / 10.0;
    assert!((mean - 0.1).abs() <= 0.05, "mean accuracy {mean}");
}

#[test]
fn zoo_accuracies_spread() {
    let zoo = generate_zoo(20, &SynthConfig::default(), (0.1, 0.9)).unwrap();
    let acc: Vec<f64> = zoo.iter().map(|m| m.accuracy).collect();
    let lo = acc.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo > 0.3, "accuracy range [{lo}, {hi}]");
}

#[test]
fn paired_alpha_ordering() {
    let wins = (0..20)
        .filter(|&seed| {
            let zoo = generate_zoo(
                2,
                &SynthConfig {
                    seed,
                    ..Default::default()
                },
                (0.1, 0.9),
            )
            .unwrap();
            assert_eq!((zoo[0].alpha, zoo[1].alpha), (0.1, 0.9));
            zoo[1].accuracy > zoo[0].accuracy
        })
        .count();
    assert!(wins >= 19, "higher alpha won {wins}/20");
}

#[test]
fn rotation_chance_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 2000;
    let rot_visual = gaussian_rows(&mut rng, 4 * n, 16);
    let mut prompts = vec![0.0f32; 4 * 16];
    for r in 0..4 {
        prompts[r * 16 + r] = 1.0;
    }
    let rot_textual = EmbeddingMatrix::new(4, 16, prompts).unwrap();
    let score = rotation_score(&rot_visual, &rot_textual).unwrap();
    assert!((score - 0.25).abs() <= 0.05, "rot = {score}");
}
