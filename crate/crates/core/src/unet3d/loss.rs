//! Soft Dice losses and the deep-supervision total.
//!
//! For each output channel `n`, with `S` the prediction and `R` the target,
//! summed over batch and voxels:
//!
//! ```text
//! term_n = (2·Σ S·R + ε) / (Σ D + ε)      D = S² + R²  (squared)
//!                                           D = S + R    (plain)
//! loss   = 1 − mean_n term_n
//! ```

use serde::{Deserialize, Serialize};

use super::model::UNetOutputs;
use crate::error::{Error, Result};
use crate::tensornet::{BackwardCtx, BackwardOp, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiceVariant {
    /// Squared terms in the denominator (pipeline A).
    SquaredDenom,
    /// Plain sums in the denominator (pipeline B).
    PlainDenom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiceLossSpec {
    pub variant: DiceVariant,
    pub epsilon: f64,
    /// Multiply the overlap term by 2. Turning this off gives the
    /// single-overlap form, whose minimum for a perfect prediction is ½.
    pub doubled_numerator: bool,
}

impl Default for DiceLossSpec {
    fn default() -> Self {
        DiceLossSpec {
            variant: DiceVariant::SquaredDenom,
            epsilon: 1.0,
            doubled_numerator: true,
        }
    }
}

impl DiceLossSpec {
    pub fn squared() -> Self {
        Self::default()
    }

    pub fn plain() -> Self {
        DiceLossSpec {
            variant: DiceVariant::PlainDenom,
            ..Self::default()
        }
    }

    fn numerator_factor(&self) -> f64 {
        if self.doubled_numerator {
            2.0
        } else {
            1.0
        }
    }
}

fn check(pred: &Tensor, target: &Tensor, spec: &DiceLossSpec) -> Result<()> {
    if !(spec.epsilon > 0.0) {
        return Err(Error::InvalidArgument("dice epsilon must be > 0".into()));
    }
    if pred.dims() != target.dims() {
        return Err(Error::Shape(format!(
            "prediction {:?} and target {:?} differ",
            pred.dims(),
            target.dims()
        )));
    }
    if pred.data().iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument(
            "dice prediction outside [0,1]".into(),
        ));
    }
    Ok(())
}

/// Per-channel (Σ S·R, Σ D).
fn channel_sums(pred: &Tensor, target: &Tensor, variant: DiceVariant) -> Vec<(f64, f64)> {
    let [n, c, ..] = pred.dims();
    (0..c)
        .map(|ch| {
            let (mut inter, mut denom) = (0.0, 0.0);
            for b in 0..n {
                for (&s, &r) in pred.plane(b, ch).iter().zip(target.plane(b, ch)) {
                    inter += s * r;
                    denom += match variant {
                        DiceVariant::SquaredDenom => s * s + r * r,
                        DiceVariant::PlainDenom => s + r,
                    };
                }
            }
            (inter, denom)
        })
        .collect()
}

/// Per-channel soft Dice terms (1 = perfect).
pub fn dice_terms(pred: &Tensor, target: &Tensor, spec: &DiceLossSpec) -> Result<Vec<f64>> {
    check(pred, target, spec)?;
    let k = spec.numerator_factor();
    Ok(channel_sums(pred, target, spec.variant)
        .into_iter()
        .map(|(i, d)| (k * i + spec.epsilon) / (d + spec.epsilon))
        .collect())
}

pub fn dice_loss_value(pred: &Tensor, target: &Tensor, spec: &DiceLossSpec) -> Result<f64> {
    let terms = dice_terms(pred, target, spec)?;
    Ok(1.0 - terms.iter().sum::<f64>() / terms.len() as f64)
}

struct DiceLossOp {
    spec: DiceLossSpec,
    target: Tensor,
}

impl BackwardOp for DiceLossOp {
    fn name(&self) -> &'static str {
        "dice_loss"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>> {
        let pred = ctx.inputs[0];
        let g = ctx.grad_output.item();
        let [n, c, ..] = pred.dims();
        let k = self.spec.numerator_factor();
        let eps = self.spec.epsilon;
        let sums = channel_sums(pred, &self.target, self.spec.variant);
        let mut out = Tensor::zeros(pred.dims());
        for (ch, &(inter, denom)) in sums.iter().enumerate() {
            let num = k * inter + eps;
            let den = denom + eps;
            // d(term)/dS = (k·R·den − num·dD/dS) / den²
            let scale = -g / c as f64 / (den * den);
            for b in 0..n {
                let target = self.target.plane(b, ch);
                let s_plane = pred.plane(b, ch);
                for ((o, &s), &r) in out.plane_mut(b, ch).iter_mut().zip(s_plane).zip(target) {
                    let dd = match self.spec.variant {
                        DiceVariant::SquaredDenom => 2.0 * s,
                        DiceVariant::PlainDenom => 1.0,
                    };
                    *o = scale * (k * r * den - num * dd);
                }
            }
        }
        Ok(vec![Some(out)])
    }
}

impl Tape {
    /// Scalar soft Dice loss of `pred` against a fixed binary `target`.
    pub fn dice_loss(&mut self, pred: Var, target: &Tensor, spec: &DiceLossSpec) -> Result<Var> {
        let value = dice_loss_value(self.value(pred), target, spec)?;
        Ok(self.push(
            Tensor::scalar(value),
            &[pred],
            Box::new(DiceLossOp {
                spec: *spec,
                target: target.clone(),
            }),
        ))
    }
}

pub fn dice_loss(tape: &mut Tape, pred: Var, target: &Tensor, spec: &DiceLossSpec) -> Result<Var> {
    tape.dice_loss(pred, target, spec)
}

/// Unweighted sum of the main and the four auxiliary Dice losses.
pub fn total_loss(
    tape: &mut Tape,
    outputs: &UNetOutputs,
    target: &Tensor,
    spec: &DiceLossSpec,
) -> Result<Var> {
    let mut acc = tape.dice_loss(outputs.main, target, spec)?;
    for &a in &outputs.aux {
        let l = tape.dice_loss(a, target, spec)?;
        acc = tape.add(acc, l)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_channel(vals: &[f64]) -> Tensor {
        Tensor::new([1, 1, 1, 1, vals.len()], vals.to_vec()).unwrap()
    }

    #[test]
    fn empty_target_and_prediction_is_zero_loss() {
        let z = Tensor::zeros([1, 3, 2, 2, 2]);
        assert_eq!(
            dice_loss_value(&z, &z, &DiceLossSpec::squared()).unwrap(),
            0.0
        );
        assert_eq!(
            dice_loss_value(&z, &z, &DiceLossSpec::plain()).unwrap(),
            0.0
        );
    }

    #[test]
    fn single_overlap_form_bottoms_out_near_half() {
        let t = Tensor::filled([1, 1, 10, 10, 10], 1.0);
        let spec = DiceLossSpec {
            doubled_numerator: false,
            ..Default::default()
        };
        let l = dice_loss_value(&t, &t, &spec).unwrap();
        assert!((l - (1.0 - 1001.0 / 2001.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = one_channel(&[0.5, 1.2]);
        let t = one_channel(&[1.0, 0.0]);
        assert!(dice_loss_value(&p, &t, &DiceLossSpec::default()).is_err());
        let q = one_channel(&[0.5]);
        assert!(dice_loss_value(&q, &t, &DiceLossSpec::default()).is_err());
    }

    #[test]
    fn monotone_between_target_and_inverse() {
        let t = one_channel(&[1.0, 0.0, 1.0, 1.0, 0.0]);
        let inv = t.map(|v| 1.0 - v);
        for spec in [DiceLossSpec::squared(), DiceLossSpec::plain()] {
            let good = dice_loss_value(&t, &t, &spec).unwrap();
            let bad = dice_loss_value(&inv, &t, &spec).unwrap();
            assert!(good < bad);
            assert!((0.0..=1.0).contains(&bad));
        }
    }
}
