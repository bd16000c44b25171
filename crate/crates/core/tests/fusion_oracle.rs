mod common;

use common::bridge::*;
use common::SplitMix;
use mrefsr::dataset::{make_synthetic_candidates, synthetic_scene, Distortion, SyntheticSpec};
use mrefsr::fusion::{lr_weight_field, normalized_weights, weights_from_areas, PreparedMasks};
use mrefsr::{
    adaptive_weight_mask, binary_masks, fuse, global_weights, masked_fuse, naive_fuse,
    BinaryMask, CandidateSet, FusionConfig, ImagePlane, RgbImage, WeightMask,
};
use proptest::prelude::*;

const EPS: f64 = 1e-12;
const NORM: f64 = 255.0;

fn oracle_of(set: &CandidateSet, beta: f64, beta_g: f64) -> common::OracleFusion {
    let lr = rgb_to_grids(set.lr_input());
    let cands: Vec<_> = set.candidates().iter().map(rgb_to_grids).collect();
    common::fuse(&lr, &cands, beta, beta_g, EPS, NORM)
}

fn check_against_oracle(set: &CandidateSet, beta: f64, beta_g: f64) -> f64 {
    let report = fuse(set, &FusionConfig::with_betas(beta, beta_g)).unwrap();
    let oracle = oracle_of(set, beta, beta_g);
    assert_eq!(report.mask_areas, oracle.areas, "beta={beta} beta_g={beta_g}");
    max_abs_diff(&report.fused, &grids_to_rgb(&oracle.fused))
}

#[test]
fn weight_mask_with_corrupted_block_matches_oracle() {
    let mut rng = SplitMix(11);
    let (lr, mut cands) = random_instance(&mut rng, 8, 8, 4, 1);
    let mut planes = rgb_to_grids(&cands[0]);
    for plane in planes.iter_mut() {
        for row in plane.iter_mut().skip(12).take(4) {
            for v in row.iter_mut().skip(20).take(4) {
                *v = 255.0 - *v;
            }
        }
    }
    cands[0] = grids_to_rgb(&planes);
    for beta in [30.0, 300.0, 810.0] {
        let cfg = FusionConfig::with_betas(beta, 0.0);
        let got = adaptive_weight_mask(&cands[0], &lr, &cfg).unwrap();
        let oracle = common::fuse(
            &rgb_to_grids(&lr),
            &[rgb_to_grids(&cands[0])],
            beta,
            0.0,
            EPS,
            NORM,
        );
        let err = max_abs_diff_grid(&plane_to_grid(&got.weights), &oracle.weights[0]);
        assert!(err < 1e-9, "beta={beta}: {err}");
        let (lo, hi) = got.weights.min_max();
        assert!(lo >= EPS && hi <= 1.0);
    }
}

#[test]
fn masked_fuse_matches_oracle() {
    let mut rng = SplitMix(5);
    let cands: Vec<RgbImage> = (0..3).map(|_| random_rgb(&mut rng, 8, 8)).collect();
    let masks: Vec<WeightMask> = (0..3)
        .map(|i| WeightMask {
            weights: random_plane(&mut rng, 8, 8, 0.01, 1.0),
            source_index: i,
        })
        .collect();
    let got = masked_fuse(&cands, &masks).unwrap();
    for ch in 0..3 {
        for y in 0..8 {
            for x in 0..8 {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..3 {
                    let w = masks[i].weights.get(x, y);
                    num += w * cands[i].planes()[ch].get(x, y);
                    den += w;
                }
                assert!((got.planes()[ch].get(x, y) - num / den).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn binary_masks_match_scalar_argmax() {
    let mut rng = SplitMix(23);
    let masks: Vec<WeightMask> = (0..3)
        .map(|i| WeightMask {
            weights: random_plane(&mut rng, 4, 4, 0.0, 1.0),
            source_index: i,
        })
        .collect();
    let bin = binary_masks(&masks).unwrap();
    for y in 0..4 {
        for x in 0..4 {
            let vals: Vec<f64> = masks.iter().map(|m| m.weights.get(x, y)).collect();
            let best = (0..3)
                .max_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
                .unwrap();
            for (i, b) in bin.iter().enumerate() {
                assert_eq!(b.mask.get(x, y), if i == best { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn global_weights_direct_evaluation() {
    let bin: Vec<BinaryMask> = [10usize, 6, 0]
        .iter()
        .enumerate()
        .map(|(i, &ones)| BinaryMask {
            mask: ImagePlane::from_fn(4, 4, |x, y| if y * 4 + x < ones { 1.0 } else { 0.0 }),
            source_index: i,
        })
        .collect();
    let w = global_weights(&bin, 0.5).unwrap();
    let total: f64 = w.iter().sum();
    let normalized: Vec<f64> = w.iter().map(|v| v / total).collect();
    let expected = [0.8756005950630876, 0.11849965453500959, 0.005899750401902781];
    for (g, e) in normalized.iter().zip(expected) {
        assert!((g - e).abs() < 1e-12);
    }
    // Shifting by the max area only rescales all weights by a common factor.
    let raw: Vec<f64> = [10.0f64, 6.0, 0.0].iter().map(|a| (0.5 * a).exp()).collect();
    let raw_total: f64 = raw.iter().sum();
    for (g, r) in normalized.iter().zip(&raw) {
        assert!((g - r / raw_total).abs() < 1e-12);
    }
    assert_eq!(global_weights(&bin, 0.0).unwrap(), vec![1.0; 3]);
}

#[test]
fn synthetic_set_matches_end_to_end_oracle() {
    let gt = synthetic_scene(32, 32, 77);
    let spec = SyntheticSpec {
        scale: 4,
        seed: 77,
        distortions: vec![
            Distortion::Noise { amplitude: 12.0 },
            Distortion::Blur { sigma: 2.5 },
            Distortion::Noise { amplitude: 45.0 },
        ],
    };
    let s = make_synthetic_candidates(&gt, 3, &spec).unwrap();
    for (beta, beta_g) in [(0.0, 0.0), (30.0, 0.0), (300.0, 0.5), (810.0, 8.0), (0.0, 2.0)] {
        let err = check_against_oracle(&s.set, beta, beta_g);
        assert!(err < 1e-9, "beta={beta} beta_g={beta_g}: {err}");
    }
}

#[test]
fn bicubic_upsample_is_an_optimum_of_the_mask() {
    // A plain bicubic enlargement of the LR input downsamples back to
    // (nearly) the LR input, so the mask cannot tell it apart from a good
    // reconstruction.
    let gt = synthetic_scene(64, 64, 8);
    let lr = mrefsr::dataset::make_lr(&gt, 4).unwrap();
    let up = mrefsr::resample_rgb(&lr, 64, 64).unwrap();
    let m = adaptive_weight_mask(&up, &lr, &FusionConfig::with_betas(810.0, 0.0)).unwrap();
    let mean = m.weights.samples().iter().sum::<f64>() / m.weights.len() as f64;
    assert!(mean > 0.97, "mean weight {mean}");
}

fn set_strategy() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 2usize..=6, 2usize..=6, 1usize..=4)
}

fn grid_point() -> impl Strategy<Value = (f64, f64)> {
    (
        prop::sample::select(vec![0.0, 30.0, 90.0, 180.0, 300.0, 450.0, 630.0, 810.0]),
        prop::sample::select(vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0]),
    )
}

fn build(seed: u64, w: usize, h: usize, n: usize) -> CandidateSet {
    let mut rng = SplitMix(seed);
    let (lr, cands) = random_instance(&mut rng, w, h, 4, n);
    CandidateSet::new(lr, cands, 4).unwrap()
}

/// Every candidate carries a brightness offset and noise everywhere, so
/// masks stay below the upper clamp and rarely tie.
fn noisy_set(seed: u64, w: usize, h: usize, n: usize) -> CandidateSet {
    let mut rng = SplitMix(seed);
    let (lr, _) = random_instance(&mut rng, w, h, 4, 1);
    let base = mrefsr::resample_rgb(&lr, w * 4, h * 4).unwrap();
    let cands = (0..n)
        .map(|_| {
            let amp = rng.uniform(5.0, 30.0);
            let offset = rng.uniform(20.0, 45.0) * if rng.below(2) == 0 { 1.0 } else { -1.0 };
            base.map_planes(|p| {
                let samples = p
                    .samples()
                    .iter()
                    .map(|v| (v + offset + rng.uniform(-amp, amp)).clamp(0.0, 255.0))
                    .collect();
                ImagePlane::new(p.width(), p.height(), samples).unwrap()
            })
        })
        .collect();
    CandidateSet::new(lr, cands, 4).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_equivalence((seed, w, h, n) in set_strategy(), (beta, beta_g) in grid_point()) {
        let set = build(seed, w, h, n);
        let err = check_against_oracle(&set, beta, beta_g);
        prop_assert!(err < 1e-9, "err {}", err);
    }

    #[test]
    fn combined_weights_partition_unity((seed, w, h, n) in set_strategy(), (beta, beta_g) in grid_point()) {
        let set = build(seed, w, h, n);
        let prepared = PreparedMasks::compute(&set, &FusionConfig::with_betas(beta, beta_g)).unwrap();
        let global = weights_from_areas(&prepared.areas, beta_g).unwrap();
        let planes = normalized_weights(&prepared.weight_masks, &global).unwrap();
        for p in 0..planes[0].len() {
            let s: f64 = planes.iter().map(|q| q.samples()[p]).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
        // Binary masks form a one-hot partition.
        for p in 0..planes[0].len() {
            let s: f64 = prepared.binary_masks.iter().map(|b| b.mask.samples()[p]).sum();
            prop_assert_eq!(s, 1.0);
        }
        let total: f64 = prepared.areas.iter().sum();
        prop_assert_eq!(total, planes[0].len() as f64);
    }

    #[test]
    fn fused_within_candidate_range((seed, w, h, n) in set_strategy(), (beta, beta_g) in grid_point()) {
        let set = build(seed, w, h, n);
        let fused = fuse(&set, &FusionConfig::with_betas(beta, beta_g)).unwrap().fused;
        for ch in 0..3 {
            for (p, &v) in fused.planes()[ch].samples().iter().enumerate() {
                let vals = set.candidates().iter().map(|c| c.planes()[ch].samples()[p]);
                let (lo, hi) = vals.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn zero_betas_are_naive((seed, w, h, n) in set_strategy()) {
        let set = build(seed, w, h, n);
        let fused = fuse(&set, &FusionConfig::with_betas(0.0, 0.0)).unwrap().fused;
        prop_assert!(max_abs_diff(&fused, &naive_fuse(&set)) < 1e-12);
    }

    #[test]
    fn identical_candidates_idempotent(seed in any::<u64>(), n in 1usize..5, (beta, beta_g) in grid_point()) {
        let mut rng = SplitMix(seed);
        let (lr, cands) = random_instance(&mut rng, 4, 4, 4, 1);
        let set = CandidateSet::new(lr, vec![cands[0].clone(); n], 4).unwrap();
        let fused = fuse(&set, &FusionConfig::with_betas(beta, beta_g)).unwrap().fused;
        prop_assert!(max_abs_diff(&fused, &cands[0]) < 1e-12);
    }

    #[test]
    fn large_beta_g_selects_largest_area(seed in any::<u64>(), beta in prop::sample::select(vec![0.0, 30.0, 300.0, 810.0])) {
        let set = build(seed, 4, 4, 3);
        let report = fuse(&set, &FusionConfig::with_betas(beta, 50.0)).unwrap();
        let mut sorted = report.mask_areas.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assume!(sorted[0] > sorted[1]);
        let best = report.mask_areas.iter().position(|&a| a == sorted[0]).unwrap();
        prop_assert!(max_abs_diff(&report.fused, &set.candidates()[best]) < 1e-6);
    }

    #[test]
    fn permutation_equivariance(seed in any::<u64>(), (beta, beta_g) in grid_point()) {
        prop_assume!(beta > 0.0);
        let set = noisy_set(seed, 4, 4, 3);
        let cfg = FusionConfig { export_masks: true, ..FusionConfig::with_betas(beta, beta_g) };
        let report = fuse(&set, &cfg).unwrap();
        // Tie-free masks at every pixel and distinct areas.
        let masks = report.weight_masks.as_ref().unwrap();
        for p in 0..masks[0].weights.len() {
            let mut v: Vec<f64> = masks.iter().map(|m| m.weights.samples()[p]).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assume!(v.windows(2).all(|w| w[1] > w[0]));
        }
        let mut areas = report.mask_areas.clone();
        areas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assume!(areas.windows(2).all(|w| w[0] != w[1]));

        let order = [2, 0, 1];
        let permuted = fuse(&set.permuted(&order).unwrap(), &cfg).unwrap();
        prop_assert!(max_abs_diff(&permuted.fused, &report.fused) < 1e-9);
        for (k, &src) in order.iter().enumerate() {
            prop_assert_eq!(permuted.mask_areas[k], report.mask_areas[src]);
            prop_assert!((permuted.global_weights[k] - report.global_weights[src]).abs() < 1e-15);
        }
    }

    #[test]
    fn penalty_is_monotone(seed in any::<u64>()) {
        let set = build(seed, 4, 4, 1);
        let cand = &set.candidates()[0];
        let mut previous: Option<ImagePlane> = None;
        for beta in [0.0, 30.0, 90.0, 180.0, 300.0, 450.0, 630.0, 810.0] {
            let m = lr_weight_field(cand, set.lr_input(), &FusionConfig::with_betas(beta, 0.0)).unwrap();
            if let Some(prev) = &previous {
                for (a, b) in m.samples().iter().zip(prev.samples()) {
                    prop_assert!(*a <= *b);
                }
            }
            previous = Some(m);
        }
    }
}
