use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vega_core::baselines::{kmeans, snd_score};
use vega_core::bundle::{l2_normalize, load_bundle, write_bundle, DatasetBundle, EmbeddingMatrix};
use vega_core::graphs::{bhattacharyya, ClassGaussian, Covariance};
use vega_core::metrics::{kendall_tau, oracle, top1_accuracy, top5_recall};
use vega_core::vega::pearson;
use vega_core::zeroshot::{cosine_matrix, pseudo_labels, softmax_probs, zero_shot_accuracy};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = EmbeddingMatrix> {
    prop::collection::vec(-5.0f32..5.0, rows * cols)
        .prop_map(move |d| EmbeddingMatrix::new(rows, cols, d).unwrap())
}

fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn brute_snd(v: &EmbeddingMatrix, tau: f64) -> f64 {
    let n = v.rows();
    let cos = |i: usize, j: usize| -> f64 {
        v.row(i)
            .iter()
            .zip(v.row(j))
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum()
    };
    let mut total = 0.0;
    for i in 0..n {
        let z: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| (cos(i, j) / tau).exp())
            .sum();
        for j in (0..n).filter(|&j| j != i) {
            let p = (cos(i, j) / tau).exp() / z;
            if p > 0.0 {
                total -= p * p.ln();
            }
        }
    }
    total / n as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_is_idempotent(m in matrix(6, 5)) {
        let (once, _) = l2_normalize(&m);
        let (twice, _) = l2_normalize(&once);
        for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-7);
        }
        for row in once.iter_rows() {
            let norm: f64 = row.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_and_are_shift_invariant(
        row in prop::collection::vec(-1.0f64..1.0, 2..12),
        shift in -3.0f64..3.0,
        t in 0.01f64..2.0,
    ) {
        let k = row.len();
        let a = vega_core::zeroshot::SimilarityMatrix::from_vec(1, k, row.clone()).unwrap();
        let b = vega_core::zeroshot::SimilarityMatrix::from_vec(
            1, k, row.iter().map(|v| v + shift).collect()).unwrap();
        let pa = softmax_probs(&a, t).unwrap();
        let pb = softmax_probs(&b, t).unwrap();
        prop_assert!((pa.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        for (x, y) in pa.row(0).iter().zip(pb.row(0)) {
            prop_assert!((x - y).abs() < 1e-7);
        }
    }

    #[test]
    fn image_permutation_permutes_pseudo_labels(
        v in matrix(12, 4), t in matrix(3, 4), seed in any::<u64>(),
    ) {
        let (v, _) = l2_normalize(&v);
        let (t, _) = l2_normalize(&t);
        let mut order: Vec<usize> = (0..12).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let p = pseudo_labels(&cosine_matrix(&v, &t).unwrap());
        let q = pseudo_labels(&cosine_matrix(&v.select_rows(&order), &t).unwrap());
        for (j, &i) in order.iter().enumerate() {
            prop_assert_eq!(q.assignments[j], p.assignments[i]);
        }
        let permuted: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        prop_assert_eq!(
            zero_shot_accuracy(&p, Some(&labels)).unwrap(),
            zero_shot_accuracy(&q, Some(&permuted)).unwrap()
        );
    }

    #[test]
    fn class_permutation_keeps_accuracy_and_counts(
        v in matrix(15, 4), t in matrix(4, 4), labels in prop::collection::vec(0usize..4, 15),
    ) {
        let (v, _) = l2_normalize(&v);
        let (t, _) = l2_normalize(&t);
        let order = [2usize, 0, 3, 1];
        // class order[j] becomes class j
        let mut inverse = [0usize; 4];
        for (j, &c) in order.iter().enumerate() {
            inverse[c] = j;
        }
        let p = pseudo_labels(&cosine_matrix(&v, &t).unwrap());
        let q = pseudo_labels(&cosine_matrix(&v, &t.select_rows(&order)).unwrap());
        let relabeled: Vec<usize> = labels.iter().map(|&l| inverse[l]).collect();
        prop_assert_eq!(
            zero_shot_accuracy(&p, Some(&labels)).unwrap(),
            zero_shot_accuracy(&q, Some(&relabeled)).unwrap()
        );
        let mut a = p.counts.clone();
        let mut b = q.counts.clone();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn kendall_invariant_under_increasing_maps(
        acc in prop::collection::vec(0.0f64..1.0, 2..15),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = acc.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tau = kendall_tau(&acc, &scores).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 1.0).collect();
        prop_assert_eq!(tau, kendall_tau(&acc, &mapped).unwrap());
        let mapped_acc: Vec<f64> = acc.iter().map(|a| a * a * a).collect();
        prop_assert_eq!(tau, kendall_tau(&mapped_acc, &scores).unwrap());
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert_eq!(tau, -kendall_tau(&acc, &negated).unwrap());
    }

    #[test]
    fn recall_invariant_and_top1_bounded(
        acc in prop::collection::vec(0.0f64..1.0, 5..15),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = acc.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mapped: Vec<f64> = scores.iter().map(|s| s.atan() * 10.0).collect();
        prop_assert_eq!(top5_recall(&acc, &scores).unwrap(), top5_recall(&acc, &mapped).unwrap());
        prop_assert!(top1_accuracy(&acc, &scores).unwrap() <= oracle(&acc).unwrap());
    }

    #[test]
    fn pearson_matches_textbook_formula(
        x in prop::collection::vec(-10.0f64..10.0, 3..40),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + rng.gen_range(-5.0..5.0)).collect();
        let expected = brute_pearson(&x, &y);
        if let Some(got) = pearson(&x, &y) {
            prop_assert!((got - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn bhattacharyya_symmetric_and_non_negative(
        m1 in prop::collection::vec(-2.0f64..2.0, 3),
        m2 in prop::collection::vec(-2.0f64..2.0, 3),
        v1 in prop::collection::vec(0.05f64..3.0, 3),
        v2 in prop::collection::vec(0.05f64..3.0, 3),
    ) {
        let full = |v: &[f64]| {
            let mut c = vec![0.0; 9];
            for i in 0..3 { c[i * 3 + i] = v[i]; }
            Covariance::Full(c)
        };
        let a = ClassGaussian::new(m1.clone(), Covariance::Diag(v1.clone()), 5).unwrap();
        let b = ClassGaussian::new(m2.clone(), Covariance::Diag(v2.clone()), 5).unwrap();
        let fa = ClassGaussian::new(m1, full(&v1), 5).unwrap();
        let fb = ClassGaussian::new(m2, full(&v2), 5).unwrap();
        let ab = bhattacharyya(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - bhattacharyya(&b, &a).unwrap()).abs() < 1e-9);
        prop_assert!((ab - bhattacharyya(&fa, &fb).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn snd_matches_double_loop(v in matrix(20, 6), tau in 0.05f64..1.0) {
        let (v, _) = l2_normalize(&v);
        let got = snd_score(&v, tau).unwrap();
        prop_assert!((got - brute_snd(&v, tau)).abs() < 1e-6);
    }

    #[test]
    fn kmeans_objective_never_increases(v in matrix(40, 3), k in 2usize..6, seed in any::<u64>()) {
        let km = kmeans(&v, k, seed, 100).unwrap();
        for w in km.objective.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
        }
        prop_assert_eq!(km, kmeans(&v, k, seed, 100).unwrap());
    }

    #[test]
    fn arbitrary_bytes_never_panic(payload in prop::collection::vec(any::<u8>(), 0..200), manifest in ".{0,80}") {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("tensors")).unwrap();
        std::fs::write(dir.path().join("manifest.json"), manifest).unwrap();
        std::fs::write(dir.path().join("tensors/visual.bin"), &payload).unwrap();
        prop_assert!(load_bundle(dir.path()).is_err());
    }
}

#[test]
fn corrupted_payloads_are_structured_errors() {
    let bundle = vega_core::generate_bundle(&vega_core::SynthConfig {
        classes: 3,
        dims: 4,
        images: 9,
        with_rotations: true,
        ..Default::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&bundle, dir.path()).unwrap();
        let name =
            ["visual", "textual", "labels", "rot_visual", "rot_textual"][rng.gen_range(0..5)];
        let path = dir.path().join(format!("tensors/{name}.bin"));
        let mut bytes = std::fs::read(&path).unwrap();
        match rng.gen_range(0..3) {
            0 => bytes.truncate(rng.gen_range(0..bytes.len())),
            1 => bytes.extend((0..rng.gen_range(1..9)).map(|_| rng.gen::<u8>())),
            _ => {
                for _ in 0..4 {
                    let i = rng.gen_range(0..bytes.len());
                    bytes[i] = rng.gen();
                }
            }
        }
        std::fs::write(&path, &bytes).unwrap();
        // flipped bytes may still decode to a valid bundle; either way no panic
        let _ = load_bundle(dir.path());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn round_trip_is_bit_exact(
        v in matrix(7, 3), t in matrix(3, 3),
        labels in prop::option::of(prop::collection::vec(0usize..3, 7)),
    ) {
        let b = DatasetBundle {
            model_id: "rt".into(),
            dataset_id: "ds".into(),
            class_names: vec!["a".into(), "b".into(), "c".into()],
            visual: v,
            textual: t,
            textual_templates: None,
            labels,
            rot_visual: None,
            rot_textual: None,
        };
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&b, dir.path()).unwrap();
        let back = load_bundle(dir.path()).unwrap();
        let bits = |m: &EmbeddingMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.visual), bits(&b.visual));
        prop_assert_eq!(back, b);
    }
}
