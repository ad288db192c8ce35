use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infer::EnsembleSpec;
use crate::preprocess::PreprocConfig;
use crate::train::{TrainConfig, FOLDS};
use crate::unet3d::ArchConfig;
use crate::volio::{Dims3, PHANTOM_MIN_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub cases: usize,
    pub dims: Dims3,
}

impl Default for PhantomSection {
    fn default() -> Self {
        PhantomSection {
            cases: 5,
            dims: [32, 32, 32],
        }
    }
}

/// Where raw cases live: `images/<id>.segv` and `labels/<id>.segv`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldSection {
    pub count: usize,
    /// Train only these folds; all when absent.
    pub only: Option<Vec<usize>>,
}

impl Default for FoldSection {
    fn default() -> Self {
        FoldSection {
            count: FOLDS,
            only: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferSection {
    pub ensemble: EnsembleSpec,
    /// Defaults to `train.arch`.
    pub arch: Option<ArchConfig>,
}

impl Default for InferSection {
    fn default() -> Self {
        InferSection {
            ensemble: EnsembleSpec::default(),
            arch: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeSection {
    pub a_dir: Option<PathBuf>,
    pub b_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub pred_dir: Option<PathBuf>,
    pub ref_dir: Option<PathBuf>,
}

/// One JSON document drives every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub phantom: PhantomSection,
    pub data: DataSection,
    pub preprocess: PreprocConfig,
    pub folds: FoldSection,
    pub train: TrainConfig,
    pub infer: InferSection,
    pub merge: MergeSection,
    pub evaluate: EvaluateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            output_dir: PathBuf::from("voxelforge-out"),
            phantom: PhantomSection::default(),
            data: DataSection::default(),
            preprocess: PreprocConfig::default(),
            folds: FoldSection::default(),
            train: TrainConfig::default(),
            infer: InferSection::default(),
            merge: MergeSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Phantom,
    Preprocess,
    Train,
    Infer,
    Merge,
    Evaluate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Phantom => "phantom",
            Command::Preprocess => "preprocess",
            Command::Train => "train",
            Command::Infer => "infer",
            Command::Merge => "merge",
            Command::Evaluate => "evaluate",
        }
    }
}

fn require_dir(errors: &mut Vec<String>, field: &str, p: &Option<PathBuf>) {
    match p {
        None => errors.push(format!("{field} is required")),
        Some(p) if !p.is_dir() => {
            errors.push(format!("{field} {} is not a directory", p.display()))
        }
        Some(_) => {}
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn arch_for_inference(&self) -> ArchConfig {
        self.infer.arch.unwrap_or(self.train.arch)
    }

    /// Every problem relevant to `cmd`, collected in one pass.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        let mut e = Vec::new();
        if self.seed.is_none() {
            e.push("seed is required (set it in the config or pass --seed)".into());
        }
        match cmd {
            Command::Phantom => {
                if self.phantom.cases == 0 {
                    e.push("phantom.cases must be >= 1".into());
                }
                if self.phantom.dims.iter().any(|&d| d < PHANTOM_MIN_DIM) {
                    e.push(format!(
                        "phantom.dims components must be >= {PHANTOM_MIN_DIM}"
                    ));
                }
            }
            Command::Preprocess => {
                self.preprocess.validate(&mut e);
                require_dir(&mut e, "data.images", &self.data.images);
                if self.data.labels.is_some() {
                    require_dir(&mut e, "data.labels", &self.data.labels);
                }
            }
            Command::Train => {
                self.train.validate(&mut e);
                require_dir(&mut e, "data.images", &self.data.images);
                require_dir(&mut e, "data.labels", &self.data.labels);
                if self.folds.count < 2 {
                    e.push("folds.count must be >= 2".into());
                }
                if let Some(only) = &self.folds.only {
                    for &k in only.iter().filter(|&&k| k >= self.folds.count) {
                        e.push(format!("folds.only entry {k} is not below folds.count"));
                    }
                }
            }
            Command::Infer => {
                self.infer.ensemble.validate(&mut e);
                if let Err(err) = self.arch_for_inference().validate() {
                    e.push(format!("infer.arch: {err}"));
                }
                for p in self
                    .infer
                    .ensemble
                    .checkpoints
                    .iter()
                    .filter(|p| !p.is_file())
                {
                    e.push(format!("checkpoint {} does not exist", p.display()));
                }
                require_dir(&mut e, "data.images", &self.data.images);
            }
            Command::Merge => {
                require_dir(&mut e, "merge.a_dir", &self.merge.a_dir);
                require_dir(&mut e, "merge.b_dir", &self.merge.b_dir);
            }
            Command::Evaluate => {
                require_dir(&mut e, "evaluate.pred_dir", &self.evaluate.pred_dir);
                require_dir(&mut e, "evaluate.ref_dir", &self.evaluate.ref_dir);
            }
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_are_collected_together() {
        let mut cfg = RunConfig::default();
        cfg.train.toy_scale_factor = 0;
        match cfg.validate(Command::Train).unwrap_err() {
            Error::Config(list) => {
                assert!(list.len() >= 4, "{list:?}");
                assert!(list.iter().any(|m| m.contains("seed")));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_fields_rejected_and_defaults_filled() {
        assert!(RunConfig::from_json(r#"{"sed": 3}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"seed": 3, "train": {"pipeline": "B"}}"#).unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.train.schedule_b.batch, 3);
        assert_eq!(cfg.phantom.cases, 5);
    }
}
