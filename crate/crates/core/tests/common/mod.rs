//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voxelforge::train::TrainingCase;
use voxelforge::volio::LabelMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mask(r: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<bool> {
    (0..n).map(|_| r.gen_bool(density)).collect()
}

pub fn random_labelmap(r: &mut ChaCha8Rng, dims: [usize; 3]) -> LabelMap {
    let n = dims.iter().product();
    let labels = (0..n).map(|_| [0u8, 1, 2, 4][r.gen_range(0..4)]).collect();
    LabelMap::new(dims, [1.0; 3], labels).unwrap()
}

pub fn idx(dims: [usize; 3], z: usize, y: usize, x: usize) -> usize {
    (z * dims[1] + y) * dims[2] + x
}

/// (tp, fp, fn, tn) by walking every coordinate.
pub fn brute_counts(pred: &[bool], reference: &[bool], dims: [usize; 3]) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for z in 0..dims[0] {
        for y in 0..dims[1] {
            for x in 0..dims[2] {
                let i = idx(dims, z, y, x);
                match (pred[i], reference[i]) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => tn += 1,
                }
            }
        }
    }
    (tp, fp, fn_, tn)
}

pub fn brute_dice(tp: u64, fp: u64, fn_: u64) -> f64 {
    if tp + fp + fn_ == 0 {
        1.0
    } else {
        (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
    }
}

pub fn ratio_or_one(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Surface voxels: in the mask with a face neighbour outside it or outside the grid.
pub fn brute_surface(mask: &[bool], dims: [usize; 3]) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    let offsets: [[isize; 3]; 6] = [
        [-1, 0, 0],
        [1, 0, 0],
        [0, -1, 0],
        [0, 1, 0],
        [0, 0, -1],
        [0, 0, 1],
    ];
    for z in 0..dims[0] {
        for y in 0..dims[1] {
            for x in 0..dims[2] {
                if !mask[idx(dims, z, y, x)] {
                    continue;
                }
                let open = offsets.iter().any(|o| {
                    let p = [z as isize + o[0], y as isize + o[1], x as isize + o[2]];
                    if (0..3).any(|a| p[a] < 0 || p[a] >= dims[a] as isize) {
                        return true;
                    }
                    !mask[idx(dims, p[0] as usize, p[1] as usize, p[2] as usize)]
                });
                if open {
                    out.push([z, y, x]);
                }
            }
        }
    }
    out
}

/// Directed distances by comparing every pair of surface voxels.
pub fn brute_directed(from: &[[usize; 3]], to: &[[usize; 3]], spacing: [f64; 3]) -> Vec<f64> {
    from.iter()
        .map(|a| {
            to.iter()
                .map(|b| {
                    let d: f64 = (0..3)
                        .map(|k| ((a[k] as f64 - b[k] as f64) * spacing[k]).powi(2))
                        .sum();
                    d.sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// 95th percentile by nearest rank, computed with integer arithmetic.
pub fn rank95(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let k = (95 * n + 99) / 100;
    v[k.max(1) - 1]
}

pub fn brute_hd95(pred: &[bool], reference: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> f64 {
    let (sp, sr) = (brute_surface(pred, dims), brute_surface(reference, dims));
    match (sp.is_empty(), sr.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => {
            let d: f64 = (0..3).map(|k| (dims[k] as f64 * spacing[k]).powi(2)).sum();
            d.sqrt()
        }
        _ => {
            rank95(brute_directed(&sp, &sr, spacing)).max(rank95(brute_directed(&sr, &sp, spacing)))
        }
    }
}

/// Small prepared phantom cases for quick training runs.
pub fn phantom_cases(n: u64, dims: [usize; 3]) -> Vec<TrainingCase> {
    use voxelforge::preprocess::{prepare_case, NormMode};
    (0..n)
        .map(|i| {
            let (v, l) = voxelforge::volio::generate_phantom(100 + i, dims).unwrap();
            let p = prepare_case(&v, Some(&l), NormMode::MinMaxClip).unwrap();
            TrainingCase {
                id: format!("case_{i:03}"),
                image: p.image,
                labels: p.labels.unwrap(),
            }
        })
        .collect()
}
