//! Finite-difference verification of tape gradients.

use rand::seq::index::sample;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub h: f64,
    /// Maximum accepted relative error.
    pub tol: f64,
    /// Lower bound on the relative-error denominator, so exact zeros compare
    /// absolutely.
    pub floor: f64,
    /// Check at most this many coordinates per parameter (sampled), `None` for all.
    pub max_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            h: 1e-3,
            tol: 1e-4,
            floor: 1e-6,
            max_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mismatch {
    pub param: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub worst: Option<Mismatch>,
    pub passed: bool,
}

/// Compare tape gradients of the scalar `f(params)` against central
/// differences. `f` must build its graph on the tape it is given and be
/// deterministic.
pub fn grad_check<F>(f: F, params: &[Tensor], opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.constant(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if tape.value(out).numel() != 1 {
        return Err(Error::Shape("grad_check needs a scalar function".into()));
    }
    let grads = tape.backward(out)?;

    let mut rng = rng::seeded(opts.seed);
    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        worst: None,
        passed: true,
    };
    for (pi, v) in vars.iter().enumerate() {
        let n = params[pi].numel();
        let zeros;
        let analytic = match grads.get(*v) {
            Some(g) => g,
            None => {
                zeros = Tensor::zeros(params[pi].dims());
                &zeros
            }
        };
        let indices: Vec<usize> = match opts.max_per_param {
            Some(k) if k < n => {
                let mut s = sample(&mut rng, n, k).into_vec();
                s.sort_unstable();
                s
            }
            _ => (0..n).collect(),
        };
        for i in indices {
            let orig = work[pi].data()[i];
            work[pi].data_mut()[i] = orig + opts.h;
            let up = eval(&work)?;
            work[pi].data_mut()[i] = orig - opts.h;
            let down = eval(&work)?;
            work[pi].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * opts.h);
            let a = analytic.data()[i];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(opts.floor);
            report.checked += 1;
            report.max_abs_err = report.max_abs_err.max(abs);
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(rel);
                report.worst = Some(Mismatch {
                    param: pi,
                    index: i,
                    analytic: a,
                    numeric,
                    rel_err: rel,
                });
            }
        }
    }
    report.passed = report.max_rel_err <= opts.tol;
    Ok(report)
}
