//! The two training pipelines.
//!
//! Pipeline A trains with a flat-then-cosine schedule, then runs SWA cycles
//! and returns the average of the snapshots. Pipeline B trains with cosine
//! annealing over its whole budget and returns the checkpoint with the lowest
//! validation loss.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState, Optimizer};
use super::data::{image_tensor, target_tensor, TrainingCase};
use super::folds::select_best_epoch;
use super::schedule::{cosine_decay, cosine_lr, swa_cycle_lr, IterationUnit, ScheduleA, ScheduleB};
use super::swa::{swa_update, SwaState};
use crate::augment::{apply_policy, AugmentPolicy};
use crate::error::{Error, Result};
use crate::preprocess::{pad_to_multiple, random_crop_patch, PaddingRecord};
use crate::rng::{self, Rng};
use crate::tensornet::Tensor;
use crate::unet3d::{
    build_model, forward, total_loss, ArchConfig, DiceLossSpec, ModelParams, SPATIAL_MULTIPLE,
};
use crate::volio::{Dims3, LabelMap, Volume4D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pipeline {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub pipeline: Pipeline,
    pub arch: ArchConfig,
    /// Defaults to squared denominators for A and plain sums for B.
    pub dice: Option<DiceLossSpec>,
    /// Defaults to the pipeline's own augmentation probabilities.
    pub augment: Option<AugmentPolicy>,
    pub schedule_a: ScheduleA,
    pub schedule_b: ScheduleB,
    pub adam: AdamConfig,
    pub patch: Dims3,
    /// Every epoch count is divided by this (minimum 1 epoch).
    pub toy_scale_factor: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            pipeline: Pipeline::A,
            arch: ArchConfig::default(),
            dice: None,
            augment: None,
            schedule_a: ScheduleA::default(),
            schedule_b: ScheduleB::default(),
            adam: AdamConfig::default(),
            patch: [128; 3],
            toy_scale_factor: 1,
        }
    }
}

impl TrainConfig {
    pub fn dice_spec(&self) -> DiceLossSpec {
        self.dice.unwrap_or(match self.pipeline {
            Pipeline::A => DiceLossSpec::squared(),
            Pipeline::B => DiceLossSpec::plain(),
        })
    }

    pub fn augment_policy(&self) -> AugmentPolicy {
        self.augment.unwrap_or(match self.pipeline {
            Pipeline::A => AugmentPolicy::pipeline_a(),
            Pipeline::B => AugmentPolicy::pipeline_b(),
        })
    }

    /// Defaults filled in and epoch counts scaled; `toy_scale_factor` becomes 1.
    pub fn resolved(&self) -> TrainConfig {
        let f = self.toy_scale_factor.max(1);
        TrainConfig {
            dice: Some(self.dice_spec()),
            augment: Some(self.augment_policy()),
            schedule_a: self.schedule_a.toy_scaled(f),
            schedule_b: self.schedule_b.toy_scaled(f),
            toy_scale_factor: 1,
            ..self.clone()
        }
    }

    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.toy_scale_factor == 0 {
            errors.push("train.toy_scale_factor must be >= 1".into());
        }
        if let Err(e) = self.arch.validate() {
            errors.push(format!("train.arch: {e}"));
        }
        if let Err(e) = self.augment_policy().validate() {
            errors.push(format!("train.augment: {e}"));
        }
        if !(self.dice_spec().epsilon > 0.0) {
            errors.push("train.dice.epsilon must be > 0".into());
        }
        if self
            .patch
            .iter()
            .any(|&p| p == 0 || p % SPATIAL_MULTIPLE != 0)
        {
            errors.push(format!(
                "train.patch {:?} must be positive multiples of {SPATIAL_MULTIPLE}",
                self.patch
            ));
        }
        let r = self.resolved();
        r.schedule_a.validate(errors);
        r.schedule_b.validate(errors);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Main,
    Swa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<usize>,
    pub lr: f64,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_loss: Option<f64>,
    pub snapshot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub seed: u64,
    /// Fully resolved configuration (defaults filled, epochs scaled).
    pub config: TrainConfig,
    pub optimizer: String,
    pub parameter_count: usize,
    pub train_cases: Vec<String>,
    pub validation_cases: Vec<String>,
    pub epochs: Vec<EpochRecord>,
    /// Global epoch indices at whose end the optimizer state was cleared.
    pub optimizer_resets: Vec<usize>,
    pub snapshot_epochs: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_validation_loss: Option<f64>,
    /// Loss of the returned model on each full training case, for filtering.
    pub case_losses: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub manifest: TrainManifest,
}

// stream keys
const KEY_INIT: u64 = 0;
const KEY_ORDER: u64 = 1;
const KEY_SAMPLE: u64 = 2;

/// Loss and gradients for one batch, followed by an optimizer update.
fn train_step(
    params: &mut ModelParams,
    opt: &mut dyn Optimizer,
    batch: &[(Volume4D, LabelMap)],
    spec: &DiceLossSpec,
    lr: f64,
) -> Result<f64> {
    let x = image_tensor(&batch.iter().map(|(v, _)| v).collect::<Vec<_>>())?;
    let y = target_tensor(&batch.iter().map(|(_, l)| l).collect::<Vec<_>>())?;
    let mut tape = crate::tensornet::Tape::new();
    let vars = params.load(&mut tape, true);
    let xv = tape.constant(x);
    let out = forward(&params.config, &vars, &mut tape, xv)?;
    let loss = total_loss(&mut tape, &out, &y, spec)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("training loss is {value}")));
    }
    let mut grads = tape.backward(loss)?;
    let g: Vec<Tensor> = vars
        .vars()
        .iter()
        .map(|&v| {
            grads
                .take(v)
                .unwrap_or_else(|| Tensor::zeros(tape.value(v).dims()))
        })
        .collect();
    drop(tape);
    let mut ps: Vec<&mut Tensor> = params.tensors_mut().collect();
    opt.step(&mut ps, &g.iter().collect::<Vec<_>>(), lr)?;
    Ok(value)
}

/// Total loss of the frozen model on a whole case, padded to a multiple of 8.
pub fn case_loss(params: &ModelParams, case: &TrainingCase, spec: &DiceLossSpec) -> Result<f64> {
    let (img, rec) = pad_to_multiple(&case.image, SPATIAL_MULTIPLE)?;
    let labels = pad_labels(&case.labels, &rec)?;
    let x = image_tensor(&[&img])?;
    let y = target_tensor(&[&labels])?;
    let mut tape = crate::tensornet::Tape::new();
    let vars = params.load(&mut tape, false);
    let xv = tape.constant(x);
    let out = forward(&params.config, &vars, &mut tape, xv)?;
    let loss = total_loss(&mut tape, &out, &y, spec)?;
    Ok(tape.value(loss).item())
}

fn pad_labels(lm: &LabelMap, rec: &PaddingRecord) -> Result<LabelMap> {
    LabelMap::new(rec.padded, lm.spacing(), rec.pad_channel(lm.labels(), 0))
}

fn mean_case_loss(
    params: &ModelParams,
    cases: &[TrainingCase],
    spec: &DiceLossSpec,
) -> Result<f64> {
    let mut sum = 0.0;
    for c in cases {
        sum += case_loss(params, c, spec)?;
    }
    Ok(sum / cases.len() as f64)
}

/// Augmented random patch of `case` drawn from its own stream.
fn sample(case: &TrainingCase, cfg: &TrainConfig, rng: &mut Rng) -> Result<(Volume4D, LabelMap)> {
    let (v, l) = random_crop_patch(&case.image, &case.labels, cfg.patch, rng)?;
    apply_policy(&v, &l, &cfg.augment_policy(), rng)
}

fn with_context(e: Error, epoch: usize, step: usize) -> Error {
    match e {
        Error::NonFinite(m) => Error::NonFinite(format!("epoch {epoch}, step {step}: {m}")),
        other => other,
    }
}

struct Trainer<'a> {
    cfg: TrainConfig,
    seed: u64,
    cases: &'a [TrainingCase],
    spec: DiceLossSpec,
    params: ModelParams,
    opt: AdamState,
    step: usize,
}

impl Trainer<'_> {
    /// One pass over the training cases in a seeded order, `batch` at a time.
    fn epoch(&mut self, epoch: usize, lr: f64, batch: usize) -> Result<f64> {
        let mut order: Vec<usize> = (0..self.cases.len()).collect();
        order.shuffle(&mut rng::stream(self.seed, &[KEY_ORDER, epoch as u64]));
        let mut total = 0.0;
        let mut n = 0;
        for chunk in order.chunks(batch) {
            total += self.run_batch(epoch, chunk, lr)? * chunk.len() as f64;
            n += chunk.len();
        }
        Ok(total / n as f64)
    }

    fn run_batch(&mut self, epoch: usize, idx: &[usize], lr: f64) -> Result<f64> {
        let step = self.step;
        let batch = idx
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let mut r = rng::stream(self.seed, &[KEY_SAMPLE, step as u64, j as u64]);
                sample(&self.cases[i], &self.cfg, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        let loss = train_step(&mut self.params, &mut self.opt, &batch, &self.spec, lr)
            .map_err(|e| with_context(e, epoch, step))?;
        log::debug!("epoch {epoch} step {step} lr {lr:.3e} loss {loss:.5}");
        self.step += 1;
        Ok(loss)
    }
}

fn start<'a>(cases: &'a [TrainingCase], cfg: &TrainConfig, seed: u64) -> Result<Trainer<'a>> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut errors = Vec::new();
    cfg.validate(&mut errors);
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let cfg = cfg.resolved();
    let params = build_model(&cfg.arch, &mut rng::stream(seed, &[KEY_INIT]))?;
    let opt = AdamState::new(cfg.adam, params.tensors());
    Ok(Trainer {
        spec: cfg.dice_spec(),
        cfg,
        seed,
        cases,
        params,
        opt,
        step: 0,
    })
}

fn manifest(t: &Trainer<'_>, validation: &[TrainingCase]) -> TrainManifest {
    TrainManifest {
        seed: t.seed,
        config: t.cfg.clone(),
        optimizer: t.opt.name().to_string(),
        parameter_count: t.params.parameter_count(),
        train_cases: t.cases.iter().map(|c| c.id.clone()).collect(),
        validation_cases: validation.iter().map(|c| c.id.clone()).collect(),
        epochs: Vec::new(),
        optimizer_resets: Vec::new(),
        snapshot_epochs: Vec::new(),
        selected_epoch: None,
        selected_validation_loss: None,
        case_losses: Vec::new(),
    }
}

fn finish(
    params: ModelParams,
    mut m: TrainManifest,
    cases: &[TrainingCase],
    spec: &DiceLossSpec,
) -> Result<TrainOutcome> {
    for c in cases {
        m.case_losses
            .push((c.id.clone(), case_loss(&params, c, spec)?));
    }
    Ok(TrainOutcome {
        params,
        manifest: m,
    })
}

/// Flat-then-cosine training followed by SWA cycles; returns the snapshot mean.
///
/// `validation` is optional here; when given, its loss is recorded for the
/// final model only.
pub fn train_pipeline_a(
    cases: &[TrainingCase],
    validation: &[TrainingCase],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    let mut t = start(cases, cfg, seed)?;
    let s = t.cfg.schedule_a;
    let mut m = manifest(&t, validation);
    for e in 0..s.epochs_total {
        let lr = cosine_lr(e, &s)?;
        let loss = t.epoch(e, lr, 1)?;
        log::info!("pipeline A epoch {e} lr {lr:.3e} loss {loss:.5}");
        m.epochs.push(EpochRecord {
            epoch: e,
            phase: Phase::Main,
            cycle: None,
            lr,
            train_loss: loss,
            validation_loss: None,
            snapshot: false,
        });
    }
    t.opt.reset();
    m.optimizer_resets.push(s.epochs_total);
    let mut swa = SwaState::new();
    let mut e = s.epochs_total;
    for cycle in 0..s.swa.cycles {
        for ce in 0..s.swa.cycle_epochs {
            let lr = swa_cycle_lr(ce, &s.swa)?;
            let loss = t.epoch(e, lr, 1)?;
            let snap = s.swa.is_snapshot_epoch(ce);
            if snap {
                swa_update(&mut swa, t.params.tensors())?;
                m.snapshot_epochs.push(e);
            }
            log::info!("pipeline A swa cycle {cycle} epoch {e} lr {lr:.3e} loss {loss:.5}");
            m.epochs.push(EpochRecord {
                epoch: e,
                phase: Phase::Swa,
                cycle: Some(cycle),
                lr,
                train_loss: loss,
                validation_loss: None,
                snapshot: snap,
            });
            e += 1;
        }
    }
    let params = if swa.count() == 0 {
        t.params.clone()
    } else {
        let names = t.params.entries().iter().map(|(n, _)| n.clone());
        ModelParams::from_named(t.params.config, names.zip(swa.into_mean()).collect())?
    };
    if !validation.is_empty() {
        let v = mean_case_loss(&params, validation, &t.spec)?;
        if let Some(last) = m.epochs.last_mut() {
            last.validation_loss = Some(v);
        }
    }
    let spec = t.spec;
    finish(params, m, cases, &spec)
}

/// Cosine-annealed training; returns the iteration with the lowest
/// validation loss (earliest on ties).
pub fn train_pipeline_b(
    cases: &[TrainingCase],
    validation: &[TrainingCase],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    if validation.is_empty() {
        return Err(Error::InvalidArgument(
            "pipeline B needs a non-empty validation fold".into(),
        ));
    }
    let mut t = start(cases, cfg, seed)?;
    let s = t.cfg.schedule_b;
    let mut m = manifest(&t, validation);
    let mut best: Option<(f64, ModelParams)> = None;
    let mut val_losses = Vec::with_capacity(s.epochs_max);
    for it in 0..s.epochs_max {
        let lr = cosine_decay(it, s.lr0, 0, s.epochs_max)?;
        let loss = match s.unit {
            IterationUnit::Epochs => t.epoch(it, lr, s.batch)?,
            IterationUnit::Steps => {
                let mut r = rng::stream(seed, &[KEY_ORDER, it as u64]);
                let idx = index::sample(&mut r, cases.len(), s.batch.min(cases.len())).into_vec();
                t.run_batch(it, &idx, lr)?
            }
        };
        let v = mean_case_loss(&t.params, validation, &t.spec)?;
        if best.as_ref().map_or(true, |(b, _)| v < *b) {
            best = Some((v, t.params.clone()));
        }
        val_losses.push(v);
        log::info!("pipeline B iteration {it} lr {lr:.3e} loss {loss:.5} validation {v:.5}");
        m.epochs.push(EpochRecord {
            epoch: it,
            phase: Phase::Main,
            cycle: None,
            lr,
            train_loss: loss,
            validation_loss: Some(v),
            snapshot: false,
        });
    }
    let (bv, params) = best.expect("at least one iteration");
    m.selected_epoch = select_best_epoch(&val_losses);
    m.selected_validation_loss = Some(bv);
    let spec = t.spec;
    finish(params, m, cases, &spec)
}

/// Dispatch on `cfg.pipeline`.
pub fn train(
    cases: &[TrainingCase],
    validation: &[TrainingCase],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    match cfg.pipeline {
        Pipeline::A => train_pipeline_a(cases, validation, cfg, seed),
        Pipeline::B => train_pipeline_b(cases, validation, cfg, seed),
    }
}
