use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::degradation::{MaskFamily, MaskSpec};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Variant};
use crate::training::TrainConfig;

/// Mask families crossed with acceleration ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSet {
    pub families: Vec<MaskFamily>,
    pub ratios: Vec<f64>,
}

impl TaskSet {
    pub fn new(families: &[MaskFamily], ratios: &[f64]) -> Self {
        TaskSet {
            families: families.to_vec(),
            ratios: ratios.to_vec(),
        }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.families.is_empty() || self.ratios.is_empty() {
            return Err(Error::Invalid(format!("{what}: task set is empty")));
        }
        for s in self.specs() {
            s.validate().map_err(|e| Error::Invalid(format!("{what}: {e}")))?;
        }
        Ok(())
    }

    /// Family-major list of mask specs with seed 0 (samples reseed them).
    pub fn specs(&self) -> Vec<MaskSpec> {
        self.families
            .iter()
            .flat_map(|&f| self.ratios.iter().map(move |&a| MaskSpec::new(f, a, 0)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: String,
    #[serde(default = "default_variant")]
    pub variant: Variant,
}

fn default_variant() -> Variant {
    Variant::Level
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    /// Synthetic phantoms. Train images use seeds `seed..seed+count`, test
    /// images `test_seed..test_seed+test_count`.
    Phantoms {
        count: usize,
        test_count: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_test_seed")]
        test_seed: u64,
    },
    /// `path,split` manifest; paths relative to the manifest's directory.
    Manifest {
        path: PathBuf,
        #[serde(default = "default_crop")]
        crop: usize,
    },
}

fn default_test_seed() -> u64 {
    1 << 32
}

fn default_crop() -> usize {
    320
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub train: TrainConfig,
    /// Pretraining tasks; also the trained set the model routes against.
    pub tasks: TaskSet,
    /// Finetuning tasks, defaults to `tasks`.
    #[serde(default)]
    pub finetune_tasks: Option<TaskSet>,
    /// Evaluation tasks, defaults to the finetune tasks.
    #[serde(default)]
    pub eval_tasks: Option<TaskSet>,
    pub data: DataSource,
    #[serde(default = "default_dataset")]
    pub dataset: String,
    pub output_dir: PathBuf,
    /// Error maps written per evaluation task.
    #[serde(default = "default_error_maps")]
    pub error_maps: usize,
}

fn default_dataset() -> String {
    "phantom".into()
}

fn default_error_maps() -> usize {
    2
}

impl ExperimentConfig {
    /// Parses and validates; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut c: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if c.output_dir.is_relative() {
            c.output_dir = base.join(&c.output_dir);
        }
        if let DataSource::Manifest { path: p, .. } = &mut c.data {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.tasks.validate("tasks")?;
        self.finetune_tasks().validate("finetune_tasks")?;
        self.eval_tasks().validate("eval_tasks")?;
        self.model_config()?.validate()?;
        match &self.data {
            DataSource::Phantoms { count, test_count, .. } => {
                if *count == 0 || *test_count == 0 {
                    return Err(Error::Invalid("phantom data needs count and test_count >= 1".into()));
                }
            }
            DataSource::Manifest { path, crop } => {
                if *crop == 0 {
                    return Err(Error::Invalid("crop must be positive".into()));
                }
                if !path.is_file() {
                    return Err(Error::Invalid(format!("manifest {} does not exist", path.display())));
                }
            }
        }
        if self.dataset.is_empty() || self.dataset.contains([',', '|', '\n']) {
            return Err(Error::Invalid(format!("dataset name {:?} is not a plain label", self.dataset)));
        }
        Ok(())
    }

    /// The preset with the routing table taken from the pretraining tasks.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut m = ModelConfig::preset(&self.model.preset)?;
        m.variant = self.model.variant;
        m.trained_families = self.tasks.families.clone();
        m.trained_ratios = self.tasks.ratios.clone();
        Ok(m)
    }

    pub fn finetune_tasks(&self) -> &TaskSet {
        self.finetune_tasks.as_ref().unwrap_or(&self.tasks)
    }

    pub fn eval_tasks(&self) -> &TaskSet {
        self.eval_tasks.as_ref().unwrap_or(self.finetune_tasks())
    }
}
