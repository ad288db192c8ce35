use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::Serialize;

use super::config::{Command, RunConfig};
use super::jobs::parallel_map;
use crate::error::{Error, Result};
use crate::infer::{infer_case, merge_labelmaps, CaseInference, Ensemble, TtaTransform};
use crate::metrics::{aggregate, evaluate_case, CaseMetrics, MetricReport};
use crate::preprocess::{prepare_case, BBox};
use crate::rng;
use crate::tensornet::write_checkpoint;
use crate::train::{k_fold_split, train, FoldSplit, TrainManifest, TrainingCase};
use crate::volio::{generate_phantom, read_segvol, write_segvol, LabelMap, SegVol, Volume4D};

pub const IMAGES_DIR: &str = "images";
pub const LABELS_DIR: &str = "labels";
pub const SEGV_EXT: &str = "segv";

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `*.segv` files in `dir`, keyed by filename stem.
pub fn list_cases(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(SEGV_EXT) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.insert(stem.to_string(), path);
        }
    }
    Ok(out)
}

/// Pair two directories by stem; any unmatched ID is an error.
fn pair_cases(a: &Path, b: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let (ma, mb) = (list_cases(a)?, list_cases(b)?);
    let only_a: Vec<&str> = ma
        .keys()
        .filter(|k| !mb.contains_key(*k))
        .map(String::as_str)
        .collect();
    let only_b: Vec<&str> = mb
        .keys()
        .filter(|k| !ma.contains_key(*k))
        .map(String::as_str)
        .collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "case sets differ: missing from {}: [{}]; missing from {}: [{}]",
            b.display(),
            only_a.join(", "),
            a.display(),
            only_b.join(", ")
        )));
    }
    Ok(ma
        .into_iter()
        .map(|(k, pa)| {
            let pb = mb[&k].clone();
            (k, pa, pb)
        })
        .collect())
}

fn read_image(p: &Path) -> Result<Volume4D> {
    read_segvol(p)?.into_image()
}

fn read_labels(p: &Path) -> Result<LabelMap> {
    read_segvol(p)?.into_labels()
}

fn collect<R>(results: Vec<Result<R>>) -> Result<Vec<R>> {
    results.into_iter().collect()
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    config: &'a RunConfig,
    command: &'static str,
    #[serde(flatten)]
    body: T,
}

fn write_manifest<T: Serialize>(
    cfg: &RunConfig,
    cmd: Command,
    name: &str,
    body: T,
) -> Result<PathBuf> {
    let path = cfg.output_dir.join(name);
    write_json(
        &path,
        &Manifest {
            config: cfg,
            command: cmd.name(),
            body,
        },
    )?;
    Ok(path)
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.expect("validated")
}

/// Seed for case or fold `i`, independent of processing order.
fn derived_seed(seed: u64, i: usize) -> u64 {
    rng::stream(seed, &[i as u64]).next_u64()
}

#[derive(Serialize)]
struct PhantomBody {
    cases: Vec<PhantomCase>,
}

#[derive(Serialize)]
struct PhantomCase {
    case: String,
    seed: u64,
}

pub fn cmd_phantom(cfg: &RunConfig, jobs: usize) -> Result<String> {
    let (img_dir, lab_dir) = (
        cfg.output_dir.join(IMAGES_DIR),
        cfg.output_dir.join(LABELS_DIR),
    );
    create_dir(&img_dir)?;
    create_dir(&lab_dir)?;
    let ids: Vec<usize> = (0..cfg.phantom.cases).collect();
    let cases = collect(parallel_map(&ids, jobs, |&i| {
        let case = format!("case_{i:03}");
        let s = derived_seed(seed(cfg), i);
        let (v, l) = generate_phantom(s, cfg.phantom.dims)?;
        write_segvol(
            &SegVol::Image(v),
            img_dir.join(format!("{case}.{SEGV_EXT}")),
        )?;
        write_segvol(
            &SegVol::Labels(l),
            lab_dir.join(format!("{case}.{SEGV_EXT}")),
        )?;
        Ok(PhantomCase { case, seed: s })
    }))?;
    let n = cases.len();
    write_manifest(
        cfg,
        Command::Phantom,
        "phantom_manifest.json",
        PhantomBody { cases },
    )?;
    Ok(format!(
        "phantom: wrote {n} cases to {}",
        cfg.output_dir.display()
    ))
}

#[derive(Serialize)]
struct PreprocessCase {
    case: String,
    original_dims: [usize; 3],
    bbox: BBox,
}

#[derive(Serialize)]
struct PreprocessBody {
    cases: Vec<PreprocessCase>,
}

pub fn cmd_preprocess(cfg: &RunConfig, jobs: usize) -> Result<String> {
    let images = list_cases(cfg.data.images.as_deref().expect("validated"))?;
    let labels = match &cfg.data.labels {
        Some(d) => Some(list_cases(d)?),
        None => None,
    };
    let root = cfg.output_dir.join("preprocessed");
    let (img_dir, lab_dir) = (root.join(IMAGES_DIR), root.join(LABELS_DIR));
    create_dir(&img_dir)?;
    if labels.is_some() {
        create_dir(&lab_dir)?;
    }
    let items: Vec<(&String, &PathBuf)> = images.iter().collect();
    let cases = collect(parallel_map(&items, jobs, |&(id, path)| {
        let v = read_image(path)?;
        let lm = match &labels {
            Some(m) => {
                let p = m
                    .get(id)
                    .ok_or_else(|| Error::InvalidArgument(format!("no labelmap for case {id}")))?;
                Some(read_labels(p)?)
            }
            None => None,
        };
        let prep = prepare_case(&v, lm.as_ref(), cfg.preprocess.mode)?;
        write_segvol(
            &SegVol::Image(prep.image),
            img_dir.join(format!("{id}.{SEGV_EXT}")),
        )?;
        if let Some(l) = prep.labels {
            write_segvol(&SegVol::Labels(l), lab_dir.join(format!("{id}.{SEGV_EXT}")))?;
        }
        Ok(PreprocessCase {
            case: id.clone(),
            original_dims: prep.original_dims,
            bbox: prep.bbox,
        })
    }))?;
    let n = cases.len();
    write_manifest(
        cfg,
        Command::Preprocess,
        "preprocess_manifest.json",
        PreprocessBody { cases },
    )?;
    Ok(format!("preprocess: wrote {n} cases to {}", root.display()))
}

/// Read and prepare every case of `data.images` and `data.labels`.
pub fn load_training_cases(cfg: &RunConfig, jobs: usize) -> Result<Vec<TrainingCase>> {
    let pairs = pair_cases(
        cfg.data.images.as_deref().expect("validated"),
        cfg.data.labels.as_deref().expect("validated"),
    )?;
    collect(parallel_map(&pairs, jobs, |(id, ip, lp)| {
        let prep = prepare_case(
            &read_image(ip)?,
            Some(&read_labels(lp)?),
            cfg.preprocess.mode,
        )?;
        Ok(TrainingCase {
            id: id.clone(),
            image: prep.image,
            labels: prep.labels.expect("labels were supplied"),
        })
    }))
}

#[derive(Serialize)]
struct FoldRun {
    fold: usize,
    seed: u64,
    checkpoint: PathBuf,
    run: TrainManifest,
}

#[derive(Serialize)]
struct TrainBody {
    split: FoldSplit,
    folds: Vec<FoldRun>,
}

pub fn cmd_train(cfg: &RunConfig, jobs: usize) -> Result<String> {
    let cases = load_training_cases(cfg, jobs)?;
    let ids: Vec<String> = cases.iter().map(|c| c.id.clone()).collect();
    let split = k_fold_split(&ids, cfg.folds.count, seed(cfg))?;
    if let Some(k) = split.folds.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!(
            "fold {k} is empty: {} cases cannot fill {} folds",
            ids.len(),
            cfg.folds.count
        )));
    }
    let ck_dir = cfg.output_dir.join("checkpoints");
    create_dir(&ck_dir)?;
    let folds: Vec<usize> = match &cfg.folds.only {
        Some(only) => only.clone(),
        None => (0..cfg.folds.count).collect(),
    };
    let by_id = |list: &[String]| -> Vec<TrainingCase> {
        list.iter()
            .filter_map(|id| cases.iter().find(|c| &c.id == id).cloned())
            .collect()
    };
    let runs = collect(parallel_map(&folds, jobs, |&k| {
        let (tr, va) = split.train_val(k);
        let s = derived_seed(seed(cfg), k);
        log::info!(
            "fold {k}: {} training and {} validation cases",
            tr.len(),
            va.len()
        );
        let out = train(&by_id(&tr), &by_id(&va), &cfg.train, s)?;
        let checkpoint = ck_dir.join(format!("fold_{k}.tnpk"));
        write_checkpoint(out.params.entries(), &checkpoint)?;
        Ok(FoldRun {
            fold: k,
            seed: s,
            checkpoint,
            run: out.manifest,
        })
    }))?;
    let n = runs.len();
    write_manifest(
        cfg,
        Command::Train,
        "train_manifest.json",
        TrainBody { split, folds: runs },
    )?;
    Ok(format!(
        "train: wrote {n} fold checkpoints to {}",
        ck_dir.display()
    ))
}

#[derive(Serialize)]
struct InferBody {
    checkpoints: Vec<PathBuf>,
    transforms: Vec<TtaTransform>,
    threshold: f64,
    cases: Vec<CaseInference>,
}

pub fn cmd_infer(cfg: &RunConfig, jobs: usize) -> Result<String> {
    let ens: Ensemble = cfg.infer.ensemble.load(&cfg.arch_for_inference())?;
    let images = list_cases(cfg.data.images.as_deref().expect("validated"))?;
    let out_dir = cfg.output_dir.join("predictions");
    create_dir(&out_dir)?;
    let items: Vec<(&String, &PathBuf)> = images.iter().collect();
    let cases = collect(parallel_map(&items, jobs, |&(id, path)| {
        let (labels, info) = infer_case(&ens, id, &read_image(path)?, cfg.preprocess.mode)?;
        write_segvol(
            &SegVol::Labels(labels),
            out_dir.join(format!("{id}.{SEGV_EXT}")),
        )?;
        Ok(info)
    }))?;
    let transforms = if ens.tta {
        crate::infer::enumerate_tta()
    } else {
        vec![TtaTransform::IDENTITY]
    };
    let passes = cases.first().map_or(0, |c| c.forward_passes);
    let n = cases.len();
    write_manifest(
        cfg,
        Command::Infer,
        "infer_manifest.json",
        InferBody {
            checkpoints: cfg.infer.ensemble.checkpoints.clone(),
            transforms,
            threshold: ens.threshold,
            cases,
        },
    )?;
    Ok(format!(
        "infer: wrote {n} labelmaps to {} ({passes} predictions per case)",
        out_dir.display()
    ))
}

#[derive(Serialize)]
struct CaseList {
    cases: Vec<String>,
}

pub fn cmd_merge(cfg: &RunConfig, jobs: usize) -> Result<String> {
    let pairs = pair_cases(
        cfg.merge.a_dir.as_deref().expect("validated"),
        cfg.merge.b_dir.as_deref().expect("validated"),
    )?;
    let out_dir = cfg.output_dir.join("merged");
    create_dir(&out_dir)?;
    let ids = collect(parallel_map(&pairs, jobs, |(id, pa, pb)| {
        let merged = merge_labelmaps(&read_labels(pa)?, &read_labels(pb)?)?;
        write_segvol(
            &SegVol::Labels(merged),
            out_dir.join(format!("{id}.{SEGV_EXT}")),
        )?;
        Ok(id.clone())
    }))?;
    let n = ids.len();
    write_manifest(
        cfg,
        Command::Merge,
        "merge_manifest.json",
        CaseList { cases: ids },
    )?;
    Ok(format!(
        "merge: wrote {n} labelmaps to {}",
        out_dir.display()
    ))
}

pub fn cmd_evaluate(cfg: &RunConfig, jobs: usize) -> Result<String> {
    let pairs = pair_cases(
        cfg.evaluate.pred_dir.as_deref().expect("validated"),
        cfg.evaluate.ref_dir.as_deref().expect("validated"),
    )?;
    let cases: Vec<CaseMetrics> = collect(parallel_map(&pairs, jobs, |(id, pp, rp)| {
        let reference = read_labels(rp)?;
        let spacing = reference.header().spacing_f64();
        evaluate_case(id, &read_labels(pp)?, &reference, spacing)
    }))?;
    let report: MetricReport = aggregate(&cases)?;
    create_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("report.json"), &report)?;
    let table = report.to_table();
    let txt = cfg.output_dir.join("report.txt");
    fs::write(&txt, &table).map_err(|e| Error::io(&txt, e))?;
    Ok(format!("evaluate: {} cases\n{table}", cases.len()))
}
