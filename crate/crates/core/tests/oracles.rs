mod common;

use proptest::prelude::*;

use libnet_core::analysis::mean_pairwise_cosine;
use libnet_core::dataio::{decode_library, encode_library};
use libnet_core::vecmath::{stable_softmax, DEFAULT_TEMPERATURE};
use libnet_core::{
    auroc, confusion_index, cpl_with_top_a, train_head, ActivationRecord, LibraryNetwork,
};

fn records(stream: &[Vec<f64>]) -> Vec<ActivationRecord> {
    stream
        .iter()
        .enumerate()
        .map(|(i, v)| ActivationRecord::new(i as u64, v.clone()))
        .collect()
}

fn answered(stream: &[Vec<f64>], answers: &[usize]) -> Vec<ActivationRecord> {
    records(stream)
        .into_iter()
        .zip(answers)
        .map(|(r, &a)| r.with_answer(a))
        .collect()
}

fn weights(head: &libnet_core::PredictionHead) -> Vec<Vec<f64>> {
    (0..head.num_classes())
        .map(|c| {
            (0..head.library_size())
                .map(|n| head.weight(c, n))
                .collect()
        })
        .collect()
}

#[test]
fn gaussian_build_matches_naive_sizes() {
    let mut rng = common::rng(7);
    let stream: Vec<Vec<f64>> = (0..200).map(|_| common::gaussian(&mut rng, 32)).collect();
    let recs = records(&stream);
    for theta in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
        let lib = LibraryNetwork::build(&recs, theta).unwrap();
        assert_eq!(
            lib.size(),
            common::build(&stream, theta).len(),
            "theta {theta}"
        );
    }
}

#[test]
fn ten_record_head_matches_double_loop() {
    use rand::Rng;
    let mut rng = common::rng(3);
    let stream: Vec<Vec<f64>> = (0..4).map(|_| common::gaussian(&mut rng, 8)).collect();
    let lib = LibraryNetwork::build(&records(&stream), 1.0).unwrap();
    assert_eq!(lib.size(), 4);
    let rows = common::build(&stream, 1.0);
    let train: Vec<(Vec<f64>, usize)> = (0..10)
        .map(|_| (common::gaussian(&mut rng, 8), rng.random_range(0..3)))
        .collect();
    let (xs, answers): (Vec<_>, Vec<_>) = train.iter().cloned().unzip();
    let head = train_head(&lib, &answered(&xs, &answers), 3, DEFAULT_TEMPERATURE, 3).unwrap();
    let naive = common::train(&rows, &train, 3, DEFAULT_TEMPERATURE);
    for (ours, theirs) in weights(&head).iter().flatten().zip(naive.iter().flatten()) {
        assert!((ours - theirs).abs() <= 1e-9);
    }
}

#[test]
fn random_head_likelihood_matches_naive() {
    use rand::Rng;
    let mut rng = common::rng(11);
    let stream = common::clustered_stream(&mut rng, 12, 60);
    let lib = LibraryNetwork::build(&records(&stream), 0.7).unwrap();
    let rows = common::build(&stream, 0.7);
    let answers: Vec<usize> = (0..stream.len()).map(|_| rng.random_range(0..10)).collect();
    let head = train_head(&lib, &answered(&stream, &answers), 10, 0.05, 8).unwrap();
    let w = weights(&head);
    for _ in 0..50 {
        let probe = common::gaussian(&mut rng, 12);
        let ours = head.likelihood(&lib, &probe).unwrap();
        let theirs = common::likelihood(&w, &rows, &probe, 8);
        for (a, b) in ours.values.iter().zip(&theirs) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert_eq!(ours.argmax_class, common::first_argmax(&theirs));
    }
}

#[test]
fn loaded_library_responds_like_the_original() {
    let mut rng = common::rng(5);
    let stream = common::clustered_stream(&mut rng, 24, 150);
    let lib = LibraryNetwork::build(&records(&stream), 0.8).unwrap();
    let loaded = decode_library(&encode_library(&lib).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let probe = common::gaussian(&mut rng, 24);
        let a = lib.respond(&probe).unwrap().activations;
        let b = loaded.respond(&probe).unwrap().activations;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    assert!(worst < 1e-6, "max difference {worst}");
}

/// AUROC by sweeping a threshold over every observed score and integrating
/// the (FPR, TPR) curve with trapezoids. Normal scores count as positives.
fn trapezoid_auroc(normal: &[f64], adversarial: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = normal.iter().chain(adversarial).copied().collect();
    cuts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    cuts.dedup();
    let rate =
        |pop: &[f64], t: f64| pop.iter().filter(|&&s| s >= t).count() as f64 / pop.len() as f64;
    let (mut fpr, mut tpr, mut area) = (0.0, 0.0, 0.0);
    for t in cuts {
        let (f, p) = (rate(adversarial, t), rate(normal, t));
        area += (f - fpr) * (p + tpr) / 2.0;
        fpr = f;
        tpr = p;
    }
    area
}

fn scores(seed: u64, n: usize, levels: u32) -> Vec<f64> {
    use rand::Rng;
    let mut rng = common::rng(seed);
    (0..n)
        .map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auroc_matches_trapezoid_sweep(
        seed in any::<u64>(),
        n in 1usize..=500,
        a in 1usize..=500,
        levels in 2u32..1000,
    ) {
        let normal = scores(seed, n, levels);
        let adversarial = scores(seed ^ 0xA5A5, a, levels);
        let ours = auroc(&normal, &adversarial).unwrap().auroc;
        prop_assert!((ours - trapezoid_auroc(&normal, &adversarial)).abs() <= 1e-12);
    }

    #[test]
    fn build_invariants(seed in any::<u64>(), dim in 1usize..24, len in 1usize..120, theta in 0.05f64..=1.0) {
        let mut rng = common::rng(seed);
        let stream = common::clustered_stream(&mut rng, dim, len);
        let recs = records(&stream);
        let lib = LibraryNetwork::build(&recs, theta).unwrap();
        prop_assert!(lib.size() >= 1 && lib.size() <= len);
        prop_assert_eq!(&lib, &LibraryNetwork::build(&recs, theta).unwrap());

        let mut open = LibraryNetwork::new(theta, dim).unwrap();
        for x in &stream {
            let before = open.size();
            let (r, inserted) = open.present(x).unwrap();
            prop_assert_eq!(inserted, before == 0 || r.max_value < theta);
            prop_assert_eq!(open.size(), before + usize::from(inserted));
        }
    }

    #[test]
    fn head_bounds_and_top_k_monotonicity(seed in any::<u64>(), dim in 2usize..16, len in 1usize..50) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let stream = common::clustered_stream(&mut rng, dim, len);
        let answers: Vec<usize> = (0..len).map(|_| rng.random_range(0..5)).collect();
        let recs = answered(&stream, &answers);
        let lib = LibraryNetwork::build(&recs, 0.8).unwrap();
        let head = train_head(&lib, &recs, 5, DEFAULT_TEMPERATURE, 3).unwrap();
        prop_assert!(head.weights().iter().all(|w| w.abs() <= len as f64));
        let top1 = head.evaluate_accuracy(&lib, &recs, 1).unwrap().accuracy;
        let top3 = head.evaluate_accuracy(&lib, &recs, 3).unwrap().accuracy;
        prop_assert!(top3 >= top1);
        prop_assert_eq!(head.evaluate_accuracy(&lib, &recs, 5).unwrap().accuracy, 1.0);
    }

    #[test]
    fn confusion_matches_ratio_form(seed in any::<u64>(), dim in 2usize..12, len in 1usize..40) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let stream = common::clustered_stream(&mut rng, dim, len);
        let answers: Vec<usize> = (0..len).map(|_| rng.random_range(0..4)).collect();
        let recs: Vec<ActivationRecord> = answered(&stream, &answers)
            .into_iter()
            .map(|r| { let l = rng.random_range(0..4); r.with_label(l) })
            .collect();
        let lib = LibraryNetwork::build(&recs, 0.6).unwrap();
        let head = train_head(&lib, &recs, 4, 0.1, 3).unwrap();
        let matrix = confusion_index(&head, &lib, &recs).unwrap();

        let (w, rows) = (weights(&head), common::build(&stream, 0.6));
        let mut sums = [[0.0; 4]; 4];
        let mut trials = [0usize; 4];
        for r in &recs {
            let p = common::likelihood(&w, &rows, &r.features, 3);
            let d1 = r.true_label.unwrap();
            if common::first_argmax(&p) == d1 {
                trials[d1] += 1;
                for (sum, p2) in sums[d1].iter_mut().zip(&p) {
                    *sum += p2.exp() / p[d1].exp();
                }
            }
        }
        for (d1, row) in sums.iter().enumerate() {
            for (d2, sum) in row.iter().enumerate() {
                match matrix.get(d1, d2) {
                    None => prop_assert_eq!(trials[d1], 0),
                    Some(v) => prop_assert!((v - sum / trials[d1] as f64).abs() <= 1e-9),
                }
            }
        }
    }

    #[test]
    fn cpl_ignores_layer_order_and_likelihood_shift(
        seed in any::<u64>(),
        layers in 2usize..6,
        shift in -50.0f64..50.0,
    ) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let likelihoods: Vec<Vec<f64>> = (0..layers)
            .map(|_| (0..10).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let probs: Vec<Vec<f64>> = likelihoods.iter().map(|p| stable_softmax(p).unwrap()).collect();
        let (base, pairs) = mean_pairwise_cosine(&probs).unwrap();
        prop_assert_eq!(pairs, layers * (layers - 1) / 2);
        prop_assert!((0.0..=1.0).contains(&base));

        let mut reversed = probs.clone();
        reversed.reverse();
        prop_assert!((mean_pairwise_cosine(&reversed).unwrap().0 - base).abs() <= 1e-12);

        let mut shifted = likelihoods.clone();
        let victim = rng.random_range(0..layers);
        shifted[victim].iter_mut().for_each(|x| *x += shift);
        let shifted: Vec<Vec<f64>> = shifted.iter().map(|p| stable_softmax(p).unwrap()).collect();
        prop_assert!((mean_pairwise_cosine(&shifted).unwrap().0 - base).abs() <= 1e-9);
    }

    #[test]
    fn cpl_over_libraries_ignores_layer_order(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let mut fitted = Vec::new();
        let mut probes = Vec::new();
        for dim in [6, 9, 4] {
            let stream = common::clustered_stream(&mut rng, dim, 30);
            let answers: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
            let recs = answered(&stream, &answers);
            let lib = LibraryNetwork::build(&recs, 0.7).unwrap();
            let head = train_head(&lib, &recs, 3, 0.2, 20).unwrap();
            fitted.push((head, lib));
            probes.push(common::gaussian(&mut rng, dim));
        }
        let pairs: Vec<_> = fitted.iter().map(|(h, l)| (h, l)).collect();
        let feats: Vec<&[f64]> = probes.iter().map(Vec::as_slice).collect();
        let forward = cpl_with_top_a(0, &pairs, &feats, 20).unwrap().value;
        let order = [2, 0, 1];
        let pairs2: Vec<_> = order.iter().map(|&i| pairs[i]).collect();
        let feats2: Vec<&[f64]> = order.iter().map(|&i| feats[i]).collect();
        let permuted = cpl_with_top_a(0, &pairs2, &feats2, 20).unwrap().value;
        prop_assert!((forward - permuted).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&forward));
    }
}
