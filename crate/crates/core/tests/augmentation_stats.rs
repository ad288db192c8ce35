//! Distributional checks of the random augmentations.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use voxelforge::augment::{
    apply_policy_traced, channel_drop, channel_rescale, channel_shift, gaussian_noise, random_flip,
    AugmentPolicy, RESCALE_RANGE, SHIFT_RANGE,
};
use voxelforge::preprocess::random_crop_offset;
use voxelforge::rng::{seeded, stream};
use voxelforge::volio::{generate_phantom, labelmap_to_regions, Volume4D};

fn chi_square_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64)
        .unwrap()
        .cdf(stat)
}

/// Kolmogorov-Smirnov distance to U(lo, hi).
fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn ramp(channels: usize) -> Volume4D {
    let n = channels * 27;
    Volume4D::new(
        [channels, 3, 3, 3],
        [1.0; 3],
        (0..n).map(|i| 1.0 + i as f32).collect(),
    )
    .unwrap()
}

#[test]
fn rescale_ratio_is_constant_per_channel_and_in_range() {
    let v = ramp(4);
    for s in 0..1000 {
        let (out, f) = channel_rescale(&v, &mut stream(1, &[s])).unwrap();
        for c in 0..4 {
            assert!((RESCALE_RANGE.0..=RESCALE_RANGE.1).contains(&f[c]));
            for (o, i) in out.channel(c).iter().zip(v.channel(c)) {
                assert!(((o / i) - f[c]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn shift_constants_are_uniform() {
    let v = ramp(4);
    let mut xs = Vec::new();
    for s in 0..2500 {
        let (out, c) = channel_shift(&v, &mut stream(2, &[s])).unwrap();
        for ch in 0..4 {
            let d: Vec<f32> = out
                .channel(ch)
                .iter()
                .zip(v.channel(ch))
                .map(|(o, i)| o - i)
                .collect();
            assert!(d.iter().all(|x| (x - d[0]).abs() < 1e-5));
            xs.push(c[ch] as f64);
        }
    }
    let d = ks_uniform(xs.clone(), SHIFT_RANGE.0 as f64, SHIFT_RANGE.1 as f64);
    // critical value of the KS statistic at alpha = 0.01
    assert!(d < 1.628 / (xs.len() as f64).sqrt(), "KS distance {d}");
}

#[test]
fn noise_moments() {
    let v = Volume4D::zeros([4, 50, 50, 100], [1.0; 3]).unwrap();
    let out = gaussian_noise(&v, 0.1, &mut seeded(3)).unwrap();
    let n = out.data().len() as f64;
    let mean = out.data().iter().map(|&x| x as f64).sum::<f64>() / n;
    let sd = (out
        .data()
        .iter()
        .map(|&x| (x as f64 - mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    assert!(mean.abs() < 3.0 * 0.1 / n.sqrt(), "mean {mean}");
    assert!((sd - 0.1).abs() < 0.005, "std {sd}");
    assert_eq!(
        gaussian_noise(&ramp(2), 0.0, &mut seeded(3)).unwrap(),
        ramp(2)
    );
}

#[test]
fn dropped_channel_is_uniform() {
    let v = ramp(4);
    let mut counts = [0u64; 4];
    for s in 0..10_000 {
        let (out, c) = channel_drop(&v, &mut stream(4, &[s])).unwrap();
        counts[c] += 1;
        for ch in 0..4 {
            let zero = out.channel(ch).iter().all(|&x| x == 0.0);
            assert_eq!(zero, ch == c);
        }
    }
    assert!(chi_square_p(&counts) > 0.001, "{counts:?}");
    assert!(channel_drop(&ramp(1), &mut seeded(0)).is_err());
}

#[test]
fn crop_offsets_are_uniform() {
    let mut counts = [0u64; 27];
    for s in 0..10_000 {
        let o = random_crop_offset([130; 3], [128; 3], &mut stream(5, &[s]));
        assert!(o.iter().all(|&x| x <= 2));
        counts[o[0] * 9 + o[1] * 3 + o[2]] += 1;
    }
    assert!(chi_square_p(&counts) > 0.001, "{counts:?}");
    assert_eq!(
        random_crop_offset([128; 3], [128; 3], &mut seeded(0)),
        [0; 3]
    );
}

#[test]
fn flip_axes_are_fair_coins_and_keep_region_volumes() {
    let (v, l) = generate_phantom(6, [16, 16, 16]).unwrap();
    let before = labelmap_to_regions(&l);
    let mut counts = [0u64; 8];
    for s in 0..2000 {
        let (img, lab, axes) = random_flip(&v, Some(&l), &mut stream(6, &[s])).unwrap();
        counts[axes
            .iter()
            .enumerate()
            .map(|(i, &a)| (a as usize) << i)
            .sum::<usize>()] += 1;
        let after = labelmap_to_regions(&lab.unwrap());
        for r in voxelforge::volio::Region::ALL {
            let c = |m: &[bool]| m.iter().filter(|&&b| b).count();
            assert_eq!(c(before.get(r)), c(after.get(r)));
        }
        assert_eq!(img.spatial(), v.spatial());
    }
    assert!(chi_square_p(&counts) > 0.001, "{counts:?}");
}

#[test]
fn policy_fire_rates_match_probabilities() {
    let v = ramp(4);
    let l = voxelforge::volio::LabelMap::zeros([3, 3, 3], [1.0; 3]).unwrap();
    let trials = 10_000;
    for policy in [AugmentPolicy::pipeline_a(), AugmentPolicy::pipeline_b()] {
        let mut fired = [0u64; 5];
        for s in 0..trials {
            let (img, lab, t) = apply_policy_traced(&v, &l, &policy, &mut stream(7, &[s])).unwrap();
            assert_eq!(img.spatial(), v.spatial());
            assert_eq!(img.spacing(), v.spacing());
            assert!(lab.labels().iter().all(|&x| x == 0));
            fired[0] += t.rescale.is_some() as u64;
            fired[1] += t.shift.is_some() as u64;
            fired[2] += t.noise as u64;
            fired[3] += t.dropped_channel.is_some() as u64;
            fired[4] += t.flip_axes.is_some() as u64;
        }
        let ps = [
            policy.p_rescale,
            policy.p_shift,
            policy.p_noise,
            policy.p_drop,
            policy.p_flip,
        ];
        for (f, p) in fired.iter().zip(ps) {
            let rate = *f as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((rate - p).abs() <= 4.5 * se + 1e-12, "rate {rate} vs p {p}");
        }
    }
    let none = apply_policy_traced(&v, &l, &AugmentPolicy::none(), &mut seeded(1)).unwrap();
    assert_eq!(none.0, v);
}

#[test]
fn augmentation_is_deterministic_per_seed() {
    let (v, l) = generate_phantom(8, [16, 16, 16]).unwrap();
    let a = apply_policy_traced(&v, &l, &AugmentPolicy::pipeline_a(), &mut seeded(9)).unwrap();
    let b = apply_policy_traced(&v, &l, &AugmentPolicy::pipeline_a(), &mut seeded(9)).unwrap();
    assert_eq!(a, b);
}
