use proptest::prelude::*;
use specseg::channel::{
    channel_entropy, channel_histogram, channel_std, dcr_select, entropy_scores, ncr_select, DEFAULT_BINS,
};
use specseg::eval::{f_score, instance_miou, variance_ratio_mr};
use specseg::pipeline::{fgbg_segment, instance_segment, post_process};
use specseg::similarity::{bray_curtis, build_affinity, chebyshev, metric_sim, AffinityMatrix, MetricKind};
use specseg::spectral::{laplacian, smallest_eigenpairs, Normalization};
use specseg::synth::{generate, planted_scene, PlantedParams};
use specseg::{io, FeatureMap, FgBgConfig, InstanceConfig, LabelMask};

fn feature_map(max_side: usize, max_c: usize) -> impl Strategy<Value = FeatureMap> {
    (2..=max_side, 2..=max_side, 1..=max_c).prop_flat_map(|(h, w, c)| {
        prop::collection::vec(-1.0f64..1.0, h * w * c).prop_map(move |d| FeatureMap::new(h, w, c, d).unwrap())
    })
}

fn affinity(max_n: usize) -> impl Strategy<Value = AffinityMatrix> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..1.0, n * n).prop_map(move |mut v| {
            for i in 0..n {
                for j in 0..i {
                    v[i * n + j] = v[j * n + i];
                }
            }
            AffinityMatrix::new(n, v).unwrap()
        })
    })
}

fn vec_pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|n| {
        (prop::collection::vec(-2.0f64..2.0, n), prop::collection::vec(-2.0f64..2.0, n))
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_round_trip(fm in feature_map(5, 5)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.npy");
        io::save_tensor(&fm, &path).unwrap();
        let back = io::load_tensor(&path).unwrap();
        prop_assert_eq!(&back, &fm);
        for h in 0..fm.height() {
            for w in 0..fm.width() {
                for c in 0..fm.channels() {
                    prop_assert_eq!(back.get(h, w, c), fm.data()[(h * fm.width() + w) * fm.channels() + c]);
                }
            }
        }
        let bytes = std::fs::read(&path).unwrap();
        io::save_tensor(&back, &path).unwrap();
        prop_assert_eq!(bytes, std::fs::read(&path).unwrap());
    }

    #[test]
    fn mask_round_trip(h in 1usize..6, w in 1usize..6, big in any::<bool>(), seed in any::<u32>()) {
        let top = if big { 70_000 } else { 255 };
        let labels = (0..h * w).map(|i| (seed as usize).wrapping_mul(i + 7) as u32 % (top + 1)).collect();
        let mask = LabelMask::new(h, w, labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.npy");
        io::save_mask(&mask, &path).unwrap();
        prop_assert_eq!(io::load_mask(&path).unwrap(), mask);
    }

    #[test]
    fn entropy_is_bounded(fm in feature_map(6, 4), bins in 2usize..40) {
        for c in 0..fm.channels() {
            let e = channel_entropy(&channel_histogram(&fm, c, bins).unwrap());
            prop_assert!(e >= 0.0 && e <= (bins as f64).log2() + 1e-12);
        }
    }

    #[test]
    fn reductions_are_nested(fm in feature_map(5, 8)) {
        let c = fm.channels();
        let (full, kept) = ncr_select(&fm, c, DEFAULT_BINS).unwrap();
        prop_assert_eq!(&full, &fm);
        prop_assert_eq!(kept, (0..c).collect::<Vec<_>>());
        let (full, _) = dcr_select(&fm, c).unwrap();
        prop_assert_eq!(&full, &fm);
        for m in 1..c {
            let (_, small) = ncr_select(&fm, m, DEFAULT_BINS).unwrap();
            let (_, large) = ncr_select(&fm, m + 1, DEFAULT_BINS).unwrap();
            prop_assert!(small.iter().all(|i| large.contains(i)));
            let (_, small) = dcr_select(&fm, m).unwrap();
            let (_, large) = dcr_select(&fm, m + 1).unwrap();
            prop_assert!(small.iter().all(|i| large.contains(i)));
        }
    }

    #[test]
    fn shift_leaves_channel_scores_unchanged(
        ints in prop::collection::vec(-64i32..64, 16),
        beta in -32i32..32,
    ) {
        // dyadic values keep the shift exact
        let base: Vec<f64> = ints.iter().map(|&k| f64::from(k) / 8.0).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + f64::from(beta)).collect();
        let a = FeatureMap::new(4, 4, 1, base).unwrap();
        let b = FeatureMap::new(4, 4, 1, shifted).unwrap();
        prop_assert_eq!(channel_histogram(&a, 0, 30).unwrap(), channel_histogram(&b, 0, 30).unwrap());
        prop_assert_eq!(channel_std(&a, 0).unwrap(), channel_std(&b, 0).unwrap());
    }

    #[test]
    fn kernels_are_symmetric_and_nonnegative((u, t) in vec_pair(12)) {
        for kind in MetricKind::ALL {
            if kind == MetricKind::Mahalanobis {
                continue;
            }
            let a = metric_sim(kind, &u, &t, None).unwrap();
            let b = metric_sim(kind, &t, &u, None).unwrap();
            prop_assert_eq!(a, b, "{}", kind);
            prop_assert!(a >= 0.0 && a.is_finite(), "{} gave {}", kind, a);
        }
    }

    #[test]
    fn kernels_peak_at_identity((u, t) in vec_pair(12)) {
        // BoC grows with the Chebyshev distance, DOT is unbounded, Mahalanobis needs a covariance
        for kind in MetricKind::ALL {
            if matches!(kind, MetricKind::Dot | MetricKind::Boc | MetricKind::Mahalanobis) {
                continue;
            }
            let same = metric_sim(kind, &u, &u, None).unwrap();
            let other = metric_sim(kind, &u, &t, None).unwrap();
            prop_assert!(other <= same + 1e-12, "{}: {} > {}", kind, other, same);
        }
    }

    #[test]
    fn bray_curtis_scale_invariance((u, t) in vec_pair(12), j in -8i32..8) {
        let alpha = 2f64.powi(j);
        let su: Vec<f64> = u.iter().map(|x| alpha * x).collect();
        let st: Vec<f64> = t.iter().map(|x| alpha * x).collect();
        prop_assert_eq!(bray_curtis(&u, &t).unwrap().0, bray_curtis(&su, &st).unwrap().0);
        prop_assert_eq!(alpha * chebyshev(&u, &t).unwrap().0, chebyshev(&su, &st).unwrap().0);
    }

    #[test]
    fn full_mask_equals_no_mask(fm in feature_map(4, 3), idx in 0usize..9) {
        let kind = MetricKind::ALL[idx];
        let ones = LabelMask::new(fm.height(), fm.width(), vec![1; fm.pixels()]).unwrap();
        let (a, na) = build_affinity(&fm, kind, None).unwrap();
        let (b, nb) = build_affinity(&fm, kind, Some(&ones)).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(na, nb);
    }

    #[test]
    fn eigenpairs_satisfy_their_bounds(w in affinity(20), normalized in any::<bool>()) {
        let norm_kind = if normalized { Normalization::SymmetricNormalized } else { Normalization::Unnormalized };
        let lap = laplacian(&w, norm_kind);
        let n = lap.n();
        let seg = smallest_eigenpairs(&lap, n).unwrap();
        let scale = lap.inf_norm();
        for i in 0..n {
            let y = seg.vector(i);
            let lam = seg.value(i);
            prop_assert!((norm(y) - 1.0).abs() < 1e-10);
            let residual: f64 = (0..n)
                .map(|r| {
                    let ly: f64 = (0..n).map(|c| lap.get(r, c) * y[c]).sum();
                    (ly - lam * y[r]).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            prop_assert!(residual <= 1e-8 * (1.0 + lam.abs()) * scale, "residual {}", residual);
            for j in 0..i {
                let dot: f64 = y.iter().zip(seg.vector(j)).map(|(a, b)| a * b).sum();
                prop_assert!(dot.abs() < 1e-8, "y{} . y{} = {}", i, j, dot);
            }
            // sign canon
            let big = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let first = y.iter().position(|v| v.abs() == big).unwrap();
            prop_assert!(y[first] > 0.0);
        }
        prop_assert!(seg.values().windows(2).all(|p| p[0] <= p[1]));
        if normalized {
            prop_assert!(seg.value(0) >= -1e-9 && seg.value(n - 1) <= 2.0 + 1e-9);
        } else {
            prop_assert!(seg.value(0) >= -1e-9 * scale);
        }
        let again = smallest_eigenpairs(&lap, n).unwrap();
        prop_assert_eq!(again, seg);
    }

    #[test]
    fn scaling_weights(w in affinity(12), j in 1i32..4) {
        let alpha = 4f64.powi(j);
        let scaled = w.scaled(alpha);
        let a = laplacian(&w, Normalization::SymmetricNormalized);
        let b = laplacian(&scaled, Normalization::SymmetricNormalized);
        prop_assert_eq!(a.matrix(), b.matrix());

        let k = w.n().min(3);
        let a = smallest_eigenpairs(&laplacian(&w, Normalization::Unnormalized), k).unwrap();
        let b = smallest_eigenpairs(&laplacian(&scaled, Normalization::Unnormalized), k).unwrap();
        for i in 0..k {
            prop_assert!((alpha * a.value(i) - b.value(i)).abs() < 1e-9 * alpha * (1.0 + a.value(i).abs()));
        }
        // a simple y_1 is determined up to sign, which the canon fixes
        if k == 3 && a.value(2) - a.value(1) > 1e-3 && a.value(1) - a.value(0) > 1e-3 {
            for (x, y) in a.vector(1).iter().zip(b.vector(1)) {
                prop_assert!((x - y).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn f_score_never_drops_when_a_correct_pixel_is_added(
        bits in prop::collection::vec(any::<(bool, bool)>(), 16),
    ) {
        let pred = LabelMask::new(4, 4, bits.iter().map(|b| u32::from(b.0)).collect()).unwrap();
        let gt = LabelMask::new(4, 4, bits.iter().map(|b| u32::from(b.1)).collect()).unwrap();
        prop_assert_eq!(f_score(&gt, &gt).unwrap(), 1.0);
        let base = f_score(&pred, &gt).unwrap();
        for p in 0..16 {
            if gt.labels()[p] == 1 && pred.labels()[p] == 0 {
                let mut better = pred.clone();
                better.labels_mut()[p] = 1;
                prop_assert!(f_score(&better, &gt).unwrap() >= base);
            }
        }
    }

    #[test]
    fn miou_ignores_label_values(
        gt_labels in prop::collection::vec(0u32..4, 20),
        pred_labels in prop::collection::vec(0u32..5, 20),
        shift in 1u32..50,
    ) {
        let gt = LabelMask::new(4, 5, gt_labels.clone()).unwrap();
        prop_assume!(!gt.instance_labels().is_empty());
        let pred = LabelMask::new(4, 5, pred_labels.clone()).unwrap();
        let base = instance_miou(&pred, &gt).unwrap().mean_iou;
        // reversed, shifted prediction ids
        let relabel = |l: u32| if l == 0 { 0 } else { 100 - l + shift };
        let pred2 = LabelMask::new(4, 5, pred_labels.iter().map(|&l| relabel(l)).collect()).unwrap();
        prop_assert!((instance_miou(&pred2, &gt).unwrap().mean_iou - base).abs() < 1e-12);
        let gt2 = LabelMask::new(4, 5, gt_labels.iter().map(|&l| relabel(l)).collect()).unwrap();
        prop_assert!((instance_miou(&pred, &gt2).unwrap().mean_iou - base).abs() < 1e-12);
    }

    #[test]
    fn post_process_fixes_wide_stripes(widths in prop::collection::vec(3usize..6, 1..5), rows in 5usize..10) {
        // vertical stripes at least 3 wide are fixed points of the 5x5 median
        let mut labels_row = Vec::new();
        for (i, &w) in widths.iter().enumerate() {
            labels_row.extend(std::iter::repeat_n((i % 2) as u32, w));
        }
        let cols = labels_row.len();
        let labels: Vec<u32> = (0..rows).flat_map(|_| labels_row.clone()).collect();
        let mask = LabelMask::new(rows, cols, labels).unwrap();
        let once = post_process(&mask);
        prop_assert_eq!(post_process(&once), once);
    }
}

#[test]
fn boc_is_steadier_than_cosine_under_spikes() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_pcg::Pcg32::seed_from_u64(6);
    let v: Vec<f64> = (0..128).map(|_| rng.random_range(0.0..1.0)).collect();
    let delta = 10.0 * v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut boc = Vec::new();
    let mut cos = Vec::new();
    for _ in 0..100 {
        let spiked = |rng: &mut rand_pcg::Pcg32| {
            let mut p = v.clone();
            for i in rand::seq::index::sample(rng, 128, 5) {
                p[i] += if rng.random_bool(0.5) { delta } else { -delta };
            }
            p
        };
        let ps = [v.clone(), spiked(&mut rng), spiked(&mut rng)];
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            boc.push(metric_sim(MetricKind::Boc, &ps[a], &ps[b], None).unwrap());
            let d: f64 = ps[a].iter().zip(&ps[b]).map(|(x, y)| x * y).sum();
            cos.push(d / (norm(&ps[a]) * norm(&ps[b])));
        }
    }
    // variance of the values after dividing them by their mean
    let dispersion = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x / m - 1.0).powi(2)).sum::<f64>() / xs.len() as f64
    };
    assert!(dispersion(&boc) < dispersion(&cos), "{} vs {}", dispersion(&boc), dispersion(&cos));
}

fn small_scene(seed: u64, instances: usize) -> specseg::Scene {
    let params = PlantedParams { size: 16, channels: 24, ..PlantedParams::default() };
    generate(&planted_scene(&params, instances, seed, false).unwrap()).unwrap()
}

#[test]
fn pipeline_is_deterministic_and_stays_in_foreground() {
    for seed in 0..4 {
        let scene = small_scene(seed, 2 + seed as usize % 3);
        let cfg = FgBgConfig::for_channels(24);
        let a = fgbg_segment(&scene.features, &cfg).unwrap();
        assert_eq!(a, fgbg_segment(&scene.features, &cfg).unwrap());
        let k = scene.instances.instance_labels().len();
        let icfg = InstanceConfig::for_channels(24, k);
        let res = instance_segment(&scene.features, &scene.foreground, &icfg).unwrap();
        for (l, f) in res.mask.labels().iter().zip(scene.foreground.labels()) {
            assert!(*f != 0 || *l == 0);
        }
        assert_eq!(res, instance_segment(&scene.features, &scene.foreground, &icfg).unwrap());
    }
}

#[test]
fn channel_order_does_not_matter() {
    let scene = small_scene(5, 3);
    let fm = &scene.features;
    let c = fm.channels();
    let ent: Vec<f64> = entropy_scores(fm, DEFAULT_BINS).unwrap().iter().map(|s| s.score).collect();
    let mut distinct = ent.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    assert_eq!(distinct.len(), c, "fixture needs distinct entropies");

    let perm: Vec<usize> = (0..c).map(|i| (i * 7 + 3) % c).collect();
    let permuted = fm.select_channels(&perm).unwrap();
    let cfg = FgBgConfig::for_channels(c);
    assert_eq!(fgbg_segment(fm, &cfg).unwrap().mask, fgbg_segment(&permuted, &cfg).unwrap().mask);
    let icfg = InstanceConfig::for_channels(c, 3);
    assert_eq!(
        instance_segment(fm, &scene.foreground, &icfg).unwrap().mask,
        instance_segment(&permuted, &scene.foreground, &icfg).unwrap().mask
    );
}

#[test]
fn mr_ignores_instance_ids() {
    let scene = small_scene(2, 3);
    let a = variance_ratio_mr(&scene.features, &scene.instances, MetricKind::Boc, 10, 4).unwrap();
    let swapped: Vec<u32> = scene.instances.labels().iter().map(|&l| if l == 0 { 0 } else { 10 - l }).collect();
    let swapped = LabelMask::new(16, 16, swapped).unwrap();
    assert_eq!(a, variance_ratio_mr(&scene.features, &swapped, MetricKind::Boc, 10, 4).unwrap());
}

#[test]
fn synthetic_ground_truth_is_consistent() {
    for seed in 0..5 {
        let spec = planted_scene(&PlantedParams::default(), 2 + seed as usize % 3, seed, seed % 2 == 0).unwrap();
        let scene = generate(&spec).unwrap();
        assert_eq!(scene.foreground, scene.instances.to_binary());
        let ent: Vec<f64> = entropy_scores(&scene.features, DEFAULT_BINS).unwrap().iter().map(|s| s.score).collect();
        let noise_min = spec.noise.channels.iter().map(|&c| ent[c]).fold(f64::INFINITY, f64::min);
        let signal_max = (0..384).filter(|c| !spec.noise.channels.contains(c)).map(|c| ent[c]).fold(0.0, f64::max);
        assert!(noise_min > signal_max, "seed {seed}: {noise_min} <= {signal_max}");
    }
}
