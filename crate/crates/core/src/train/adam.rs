use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensornet::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Anything that can turn gradients into a parameter update.
pub trait Optimizer {
    fn name(&self) -> &'static str;
    fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor], lr: f64) -> Result<()>;
    /// Forget all accumulated state.
    fn reset(&mut self);
}

/// Bias-corrected Adam moments for a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params
            .into_iter()
            .map(|p| Tensor::zeros(p.dims()))
            .collect();
        AdamState {
            config,
            v: m.clone(),
            m,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }
}

/// One Adam update in place.
///
/// Every gradient is checked before any parameter moves, so a non-finite
/// gradient leaves both parameters and state untouched.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "optimizer tracks {} tensors, got {} parameters and {} gradients",
            state.m.len(),
            params.len(),
            grads.len()
        )));
    }
    for (i, ((p, g), m)) in params.iter().zip(grads).zip(&state.m).enumerate() {
        if p.dims() != m.dims() || g.dims() != m.dims() {
            return Err(Error::Shape(format!(
                "tensor {i}: parameter {:?}, gradient {:?}, state {:?}",
                p.dims(),
                g.dims(),
                m.dims()
            )));
        }
        if let Some(pos) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient of tensor {i} at element {pos} is {} (optimizer step {})",
                g.data()[pos],
                state.step + 1
            )));
        }
    }
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "learning rate {lr} must be finite and >= 0"
        )));
    }
    state.step += 1;
    let AdamConfig {
        beta1,
        beta2,
        eps,
        weight_decay,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let pd = p.data_mut();
        for (((w, &gi), mi), vi) in pd
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            let gi = gi + weight_decay * *w;
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *w -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

impl Optimizer for AdamState {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor], lr: f64) -> Result<()> {
        adam_step(params, grads, self, lr)
    }

    fn reset(&mut self) {
        for t in self.m.iter_mut().chain(self.v.iter_mut()) {
            t.data_mut().fill(0.0);
        }
        self.step = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(vals: &[f64]) -> Tensor {
        Tensor::new([1, 1, 1, 1, vals.len()], vals.to_vec()).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = one(&[1.0, -2.0]);
        let g = one(&[0.0, 0.0]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]);
        adam_step(&mut [&mut p], &[&g], &mut st, 1e-3).unwrap();
        assert_eq!(p.data(), &[1.0, -2.0]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = one(&[0.0, 0.0, 0.0]);
        let g = one(&[3.0, -0.5, 1e-2]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]);
        adam_step(&mut [&mut p], &[&g], &mut st, 0.1).unwrap();
        for (&w, &gi) in p.data().iter().zip(g.data()) {
            let expect = -0.1 * gi / (gi.abs() + 1e-8);
            assert!((w - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut p = one(&[1.0, 1.0]);
        let g = one(&[0.5, f64::NAN]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]);
        let err = adam_step(&mut [&mut p], &[&g], &mut st, 1e-3).unwrap_err();
        assert_eq!(err.class(), "non_finite");
        assert_eq!(p.data(), &[1.0, 1.0]);
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn reset_clears_state() {
        let mut p = one(&[1.0]);
        let g = one(&[1.0]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]);
        st.step(&mut [&mut p], &[&g], 1e-3).unwrap();
        st.reset();
        assert_eq!(st.step_count(), 0);
        assert_eq!(st.first_moments()[0].data(), &[0.0]);
    }
}
