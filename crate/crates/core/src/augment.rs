//! On-the-fly training augmentations.
//!
//! [`apply_policy`] fires each augmentation independently with its policy
//! probability, always in the order rescale, shift, noise, drop, flip.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::volio::{flat_index, Dims3, LabelMap, Volume4D};

pub const RESCALE_RANGE: (f32, f32) = (0.9, 1.1);
pub const SHIFT_RANGE: (f32, f32) = (-0.1, 0.1);
pub const NOISE_SIGMA: f32 = 0.1;
/// Noise probability for both pipelines; no published value exists.
pub const DEFAULT_NOISE_PROBABILITY: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentPolicy {
    pub p_rescale: f64,
    pub p_shift: f64,
    pub p_noise: f64,
    pub p_drop: f64,
    pub p_flip: f64,
    pub noise_sigma: f32,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self::pipeline_a()
    }
}

impl AugmentPolicy {
    pub fn pipeline_a() -> Self {
        AugmentPolicy {
            p_rescale: 0.8,
            p_shift: 0.0,
            p_noise: DEFAULT_NOISE_PROBABILITY,
            p_drop: 0.16,
            p_flip: 0.8,
            noise_sigma: NOISE_SIGMA,
        }
    }

    pub fn pipeline_b() -> Self {
        AugmentPolicy {
            p_rescale: 0.2,
            p_shift: 0.2,
            p_noise: DEFAULT_NOISE_PROBABILITY,
            p_drop: 0.0,
            p_flip: 0.5,
            noise_sigma: NOISE_SIGMA,
        }
    }

    pub fn none() -> Self {
        AugmentPolicy {
            p_rescale: 0.0,
            p_shift: 0.0,
            p_noise: 0.0,
            p_drop: 0.0,
            p_flip: 0.0,
            noise_sigma: NOISE_SIGMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ps = [
            ("p_rescale", self.p_rescale),
            ("p_shift", self.p_shift),
            ("p_noise", self.p_noise),
            ("p_drop", self.p_drop),
            ("p_flip", self.p_flip),
        ];
        for (name, p) in ps {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {p} is not in [0,1]"
                )));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Which augmentations fired, and with what parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentTrace {
    pub rescale: Option<Vec<f32>>,
    pub shift: Option<Vec<f32>>,
    pub noise: bool,
    pub dropped_channel: Option<usize>,
    pub flip_axes: Option<[bool; 3]>,
}

fn map_channels(v: &Volume4D, mut f: impl FnMut(usize, f32) -> f32) -> Result<Volume4D> {
    let n = v.data().len() / v.channels();
    let data = v
        .data()
        .iter()
        .enumerate()
        .map(|(i, &x)| f(i / n, x))
        .collect();
    v.with_data(data)
}

pub fn channel_rescale_with(v: &Volume4D, factors: &[f32]) -> Result<Volume4D> {
    if factors.len() != v.channels() {
        return Err(Error::Shape(
            "one rescale factor per channel required".into(),
        ));
    }
    map_channels(v, |c, x| x * factors[c])
}

/// Multiply each channel by its own factor drawn from U(0.9, 1.1).
pub fn channel_rescale(v: &Volume4D, rng: &mut Rng) -> Result<(Volume4D, Vec<f32>)> {
    let f: Vec<f32> = (0..v.channels())
        .map(|_| rng.gen_range(RESCALE_RANGE.0..RESCALE_RANGE.1))
        .collect();
    Ok((channel_rescale_with(v, &f)?, f))
}

pub fn channel_shift_with(v: &Volume4D, shifts: &[f32]) -> Result<Volume4D> {
    if shifts.len() != v.channels() {
        return Err(Error::Shape("one shift per channel required".into()));
    }
    map_channels(v, |c, x| x + shifts[c])
}

/// Add a per-channel constant drawn from U(-0.1, 0.1).
pub fn channel_shift(v: &Volume4D, rng: &mut Rng) -> Result<(Volume4D, Vec<f32>)> {
    let s: Vec<f32> = (0..v.channels())
        .map(|_| rng.gen_range(SHIFT_RANGE.0..SHIFT_RANGE.1))
        .collect();
    Ok((channel_shift_with(v, &s)?, s))
}

/// Add i.i.d. N(0, sigma²) noise to every voxel.
pub fn gaussian_noise(v: &Volume4D, sigma: f32, rng: &mut Rng) -> Result<Volume4D> {
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    let normal = Normal::new(0.0f32, sigma)
        .map_err(|e| Error::InvalidArgument(format!("noise sigma: {e}")))?;
    map_channels(v, |_, x| x + normal.sample(rng))
}

pub fn channel_drop_with(v: &Volume4D, channel: usize) -> Result<Volume4D> {
    if channel >= v.channels() {
        return Err(Error::InvalidArgument(format!(
            "channel {channel} out of range"
        )));
    }
    map_channels(v, |c, x| if c == channel { 0.0 } else { x })
}

/// Zero one uniformly chosen channel.
pub fn channel_drop(v: &Volume4D, rng: &mut Rng) -> Result<(Volume4D, usize)> {
    if v.channels() < 2 {
        return Err(Error::InvalidArgument(
            "channel drop needs at least two channels".into(),
        ));
    }
    let c = rng.gen_range(0..v.channels());
    Ok((channel_drop_with(v, c)?, c))
}

/// Reverse the selected (z, y, x) axes of one channel.
pub fn flip_channel<T: Copy>(data: &[T], dims: Dims3, axes: [bool; 3]) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for z in 0..dims[0] {
        let sz = if axes[0] { dims[0] - 1 - z } else { z };
        for y in 0..dims[1] {
            let sy = if axes[1] { dims[1] - 1 - y } else { y };
            let row = flat_index(dims, sz, sy, 0);
            if axes[2] {
                out.extend(data[row..row + dims[2]].iter().rev());
            } else {
                out.extend_from_slice(&data[row..row + dims[2]]);
            }
        }
    }
    out
}

pub fn flip_with(
    v: &Volume4D,
    lm: Option<&LabelMap>,
    axes: [bool; 3],
) -> Result<(Volume4D, Option<LabelMap>)> {
    let dims = v.spatial();
    if let Some(l) = lm {
        if l.spatial() != dims {
            return Err(Error::Shape(format!(
                "image {:?} and labelmap {:?} differ",
                dims,
                l.spatial()
            )));
        }
    }
    let mut data = Vec::with_capacity(v.data().len());
    for c in 0..v.channels() {
        data.extend(flip_channel(v.channel(c), dims, axes));
    }
    let img = v.with_data(data)?;
    let labels = lm
        .map(|l| LabelMap::new(dims, l.spacing(), flip_channel(l.labels(), dims, axes)))
        .transpose()?;
    Ok((img, labels))
}

/// Flip each spatial axis independently with probability ½; image and labels
/// move together.
pub fn random_flip(
    v: &Volume4D,
    lm: Option<&LabelMap>,
    rng: &mut Rng,
) -> Result<(Volume4D, Option<LabelMap>, [bool; 3])> {
    let axes = [rng.gen_bool(0.5), rng.gen_bool(0.5), rng.gen_bool(0.5)];
    let (img, labels) = flip_with(v, lm, axes)?;
    Ok((img, labels, axes))
}

/// Run the policy and report what fired.
pub fn apply_policy_traced(
    v: &Volume4D,
    lm: &LabelMap,
    policy: &AugmentPolicy,
    rng: &mut Rng,
) -> Result<(Volume4D, LabelMap, AugmentTrace)> {
    policy.validate()?;
    let mut trace = AugmentTrace::default();
    let mut img = v.clone();
    let mut labels = lm.clone();
    if rng.gen_bool(policy.p_rescale) {
        let (out, f) = channel_rescale(&img, rng)?;
        img = out;
        trace.rescale = Some(f);
    }
    if rng.gen_bool(policy.p_shift) {
        let (out, s) = channel_shift(&img, rng)?;
        img = out;
        trace.shift = Some(s);
    }
    if rng.gen_bool(policy.p_noise) {
        img = gaussian_noise(&img, policy.noise_sigma, rng)?;
        trace.noise = true;
    }
    if rng.gen_bool(policy.p_drop) {
        let (out, c) = channel_drop(&img, rng)?;
        img = out;
        trace.dropped_channel = Some(c);
    }
    if rng.gen_bool(policy.p_flip) {
        let (out, l, axes) = random_flip(&img, Some(&labels), rng)?;
        img = out;
        labels = l.expect("labels were supplied");
        trace.flip_axes = Some(axes);
    }
    Ok((img, labels, trace))
}

pub fn apply_policy(
    v: &Volume4D,
    lm: &LabelMap,
    policy: &AugmentPolicy,
    rng: &mut Rng,
) -> Result<(Volume4D, LabelMap)> {
    apply_policy_traced(v, lm, policy, rng).map(|(v, l, _)| (v, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::volio::generate_phantom;

    fn phantom() -> (Volume4D, LabelMap) {
        generate_phantom(11, [16, 16, 16]).unwrap()
    }

    #[test]
    fn unit_factor_and_zero_shift_are_identity() {
        let (v, _) = phantom();
        assert_eq!(channel_rescale_with(&v, &[1.0; 4]).unwrap(), v);
        assert_eq!(channel_shift_with(&v, &[0.0; 4]).unwrap(), v);
        assert_eq!(gaussian_noise(&v, 0.0, &mut rng::seeded(0)).unwrap(), v);
    }

    #[test]
    fn shift_is_constant_per_channel() {
        let (v, _) = phantom();
        let (out, s) = channel_shift(&v, &mut rng::seeded(3)).unwrap();
        for c in 0..4 {
            for (a, b) in v.channel(c).iter().zip(out.channel(c)) {
                assert!((b - a - s[c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn drop_zeroes_exactly_one_channel() {
        let (v, _) = phantom();
        let (out, c) = channel_drop(&v, &mut rng::seeded(4)).unwrap();
        for k in 0..4 {
            if k == c {
                assert!(out.channel(k).iter().all(|&x| x == 0.0));
            } else {
                assert_eq!(out.channel(k), v.channel(k));
            }
        }
        let (twice, _) = channel_drop(&out, &mut rng::seeded(5)).unwrap();
        let zeroed = (0..4)
            .filter(|&k| twice.channel(k).iter().all(|&x| x == 0.0))
            .count();
        assert!(zeroed <= 2);
        let single = Volume4D::zeros([1, 2, 2, 2], [1.0; 3]).unwrap();
        assert!(channel_drop(&single, &mut rng::seeded(0)).is_err());
    }

    #[test]
    fn flips_are_involutions() {
        let (v, lm) = phantom();
        for axes in [
            [true, false, false],
            [false, true, false],
            [false, false, true],
            [true, true, true],
        ] {
            let (f, fl) = flip_with(&v, Some(&lm), axes).unwrap();
            let (b, bl) = flip_with(&f, fl.as_ref(), axes).unwrap();
            assert_eq!(b, v);
            assert_eq!(bl.unwrap(), lm);
            for label in [0, 1, 2, 4] {
                assert_eq!(fl.as_ref().unwrap().count(label), lm.count(label));
            }
        }
        let (same, _) = flip_with(&v, None, [false; 3]).unwrap();
        assert_eq!(same, v);
        let wrong = LabelMap::zeros([8, 8, 8], [1.0; 3]).unwrap();
        assert!(flip_with(&v, Some(&wrong), [true; 3]).is_err());
    }

    #[test]
    fn empty_policy_is_identity_and_runs_are_deterministic() {
        let (v, lm) = phantom();
        let (a, b) = apply_policy(&v, &lm, &AugmentPolicy::none(), &mut rng::seeded(1)).unwrap();
        assert_eq!(a, v);
        assert_eq!(b, lm);
        let p = AugmentPolicy::pipeline_a();
        let r1 = apply_policy(&v, &lm, &p, &mut rng::seeded(9)).unwrap();
        let r2 = apply_policy(&v, &lm, &p, &mut rng::seeded(9)).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.0.spatial(), v.spatial());
        assert_eq!(r1.0.spacing(), v.spacing());
    }

    #[test]
    fn published_probabilities() {
        let a = AugmentPolicy::pipeline_a();
        assert_eq!(
            (a.p_rescale, a.p_shift, a.p_drop, a.p_flip),
            (0.8, 0.0, 0.16, 0.8)
        );
        let b = AugmentPolicy::pipeline_b();
        assert_eq!(
            (b.p_rescale, b.p_shift, b.p_drop, b.p_flip),
            (0.2, 0.2, 0.0, 0.5)
        );
        assert_eq!(a.noise_sigma, 0.1);
        let mut bad = a;
        bad.p_flip = 1.5;
        assert!(bad.validate().is_err());
    }
}
