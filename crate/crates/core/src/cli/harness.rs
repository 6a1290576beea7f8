//! Experiment building blocks shared by the subcommands and the acceptance suite.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{DataSource, ExperimentConfig};
use crate::dataio::{derive_seed, make_sample, phantom_set, Manifest, Split};
use crate::degradation::MaskSpec;
use crate::error::{Error, Result};
use crate::metrics::{psnr, ssim, ImageResult, SsimParams};
use crate::model::{Model, ModelConfig};
use crate::numerics::Tensor;
use crate::training::{Phase, TrainConfig, Trainer};

pub const BASELINE_TAG: &str = "zero-filled";

pub struct Dataset {
    pub train: Vec<Tensor<f32>>,
    pub test: Vec<Tensor<f32>>,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let size = cfg.model_config()?.image_size;
    match &cfg.data {
        DataSource::Phantoms {
            count,
            test_count,
            seed,
            test_seed,
        } => Ok(Dataset {
            train: phantom_set(*count, size, *seed)?,
            test: phantom_set(*test_count, size, *test_seed)?,
        }),
        DataSource::Manifest { path, crop } => {
            let m = Manifest::load(path)?;
            Ok(Dataset {
                train: m.load_images(Split::Train, *crop, size)?,
                test: m.load_images(Split::Test, *crop, size)?,
            })
        }
    }
}

pub fn model_tag(config: &ModelConfig) -> String {
    format!("mript-{}", config.variant)
}

/// Fails with the list of differing fields unless `found` (from a
/// checkpoint) is the configuration `expected` describes.
pub fn check_compatible(expected: &ModelConfig, found: &ModelConfig) -> Result<()> {
    if expected == found {
        return Ok(());
    }
    let (a, b) = (serde_json::to_value(expected)?, serde_json::to_value(found)?);
    let diffs: Vec<String> = a
        .as_object()
        .into_iter()
        .flatten()
        .filter(|(k, v)| b.get(k.as_str()) != Some(v))
        .map(|(k, v)| format!("{k}: config {v}, checkpoint {}", b.get(k.as_str()).unwrap_or(&serde_json::Value::Null)))
        .collect();
    Err(Error::Invalid(format!(
        "checkpoint does not match the experiment config ({})",
        diffs.join("; ")
    )))
}

fn log_progress(phase: &str, every: usize) -> impl FnMut(&Model<f32>, usize, f64) -> bool + '_ {
    let mut window = 0.0;
    move |_, step, loss| {
        window += loss;
        if (step + 1) % every == 0 {
            log::info!("{phase} step {}: mean loss {:.5}", step + 1, window / every as f64);
            window = 0.0;
        }
        true
    }
}

/// Fresh model trained on the full task set.
pub fn pretrain(cfg: &ExperimentConfig, data: &Dataset) -> Result<Trainer> {
    let model = Model::new(cfg.model_config()?, cfg.train.seed)?;
    let mut trainer = Trainer::new(model, cfg.train.clone())?;
    let every = data.train.len().max(1);
    trainer.run(&data.train, &cfg.tasks.specs(), cfg.train.pretrain_epochs, log_progress("pretrain", every))?;
    Ok(trainer)
}

/// Continues training `model` on the finetune tasks with a fresh optimizer.
pub fn finetune(model: Model<f32>, train: &TrainConfig, tasks: &[MaskSpec], images: &[Tensor<f32>]) -> Result<Trainer> {
    let mut trainer = Trainer::new(model, train.clone())?;
    let every = images.len().max(1);
    trainer.run(images, tasks, train.epochs(Phase::Finetune), log_progress("finetune", every))?;
    Ok(trainer)
}

/// Mask for evaluating image `image` under task `task`: fixed per
/// (seed, task, image) so every model sees the same inputs.
pub fn eval_spec(task: &MaskSpec, seed: u64, task_index: usize, image: usize) -> MaskSpec {
    task.clone().with_seed(derive_seed(seed, task_index as u64, image as u64 + (1 << 40)))
}

pub struct Example {
    pub task: MaskSpec,
    pub image: usize,
    pub input: Tensor<f32>,
    pub recon: Tensor<f32>,
    pub clean: Tensor<f32>,
}

#[derive(Default)]
pub struct Evaluation {
    pub results: Vec<ImageResult>,
    pub baseline: Vec<ImageResult>,
    pub examples: Vec<Example>,
}

impl Evaluation {
    pub fn all(&self) -> Vec<ImageResult> {
        self.results.iter().chain(&self.baseline).cloned().collect()
    }
}

/// Mean over finite values, and the mean SSIM.
pub fn mean_scores(results: &[ImageResult]) -> (f64, f64) {
    let finite: Vec<f64> = results.iter().map(|r| r.psnr).filter(|p| p.is_finite()).collect();
    let p = if finite.is_empty() { f64::INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    let s = results.iter().map(|r| r.ssim).sum::<f64>() / results.len() as f64;
    (p, s)
}

/// Reconstructs every test image under every task and scores the model
/// and the zero-filled input. The first `keep` images of each task are
/// returned as examples.
pub fn evaluate(
    model: &Model<f32>,
    images: &[Tensor<f32>],
    tasks: &[MaskSpec],
    dataset: &str,
    seed: u64,
    keep: usize,
) -> Result<Evaluation> {
    if images.is_empty() {
        return Err(Error::Empty("no test images".into()));
    }
    let tag = model_tag(model.config());
    let params = SsimParams::default();
    let mut out = Evaluation::default();
    for (ti, task) in tasks.iter().enumerate() {
        let scored: Vec<_> = images
            .par_iter()
            .enumerate()
            .map(|(i, img)| -> Result<_> {
                let spec = eval_spec(task, seed, ti, i);
                let s = make_sample(img, &spec, i)?;
                let recon = model.predict(&s.input, &s.label)?;
                let m = (psnr(&recon, img)?, ssim(&recon, img, &params)?);
                let b = (psnr(&s.input, img)?, ssim(&s.input, img, &params)?);
                Ok((spec, s.input, recon, m, b))
            })
            .collect::<Result<_>>()?;
        let family = task.family.short_name().to_string();
        for (i, (spec, input, recon, m, b)) in scored.into_iter().enumerate() {
            let row = |model: &str, (psnr, ssim): (f64, f64)| ImageResult {
                dataset: dataset.to_string(),
                family: family.clone(),
                acceleration: task.acceleration,
                model: model.to_string(),
                psnr,
                ssim,
            };
            out.results.push(row(&tag, m));
            out.baseline.push(row(BASELINE_TAG, b));
            if i < keep {
                out.examples.push(Example {
                    task: spec,
                    image: i,
                    input,
                    recon,
                    clean: images[i].clone(),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityRow {
    pub size: usize,
    pub repeats: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn check_stability_sizes(sizes: &[usize], repeats: usize, available: usize) -> Result<()> {
    if sizes.is_empty() || repeats == 0 {
        return Err(Error::Invalid("stability needs at least one size and one repeat".into()));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s == 0 || s > available) {
        return Err(Error::Invalid(format!(
            "subset size {s} is outside 1..={available} available training images"
        )));
    }
    Ok(())
}

/// For each size, finetunes `pretrained` on `repeats` random subsets of
/// the training images and evaluates each run on the test set.
pub fn stability(
    cfg: &ExperimentConfig,
    pretrained: &Model<f32>,
    data: &Dataset,
    sizes: &[usize],
    repeats: usize,
) -> Result<Vec<StabilityRow>> {
    check_stability_sizes(sizes, repeats, data.train.len())?;
    let ft_tasks = cfg.finetune_tasks().specs();
    let eval_tasks = cfg.eval_tasks().specs();
    let mut rows = Vec::new();
    for &size in sizes {
        let (mut ps, mut ss) = (Vec::new(), Vec::new());
        for r in 0..repeats {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.train.seed, size as u64, r as u64 + (1 << 41)));
            let subset: Vec<Tensor<f32>> = sample(&mut rng, data.train.len(), size)
                .into_iter()
                .map(|i| data.train[i].clone())
                .collect();
            let train = TrainConfig {
                seed: derive_seed(cfg.train.seed, size as u64, r as u64),
                ..cfg.train.clone()
            };
            let trainer = finetune(pretrained.clone(), &train, &ft_tasks, &subset)?;
            let ev = evaluate(trainer.model(), &data.test, &eval_tasks, &cfg.dataset, cfg.train.seed, 0)?;
            let (p, s) = mean_scores(&ev.results);
            log::info!("stability size {size} repeat {r}: psnr {p:.3} dB, ssim {s:.4}");
            ps.push(p);
            ss.push(s);
        }
        let (psnr_mean, psnr_std) = mean_std(&ps);
        let (ssim_mean, ssim_std) = mean_std(&ss);
        rows.push(StabilityRow {
            size,
            repeats,
            psnr_mean,
            psnr_std,
            ssim_mean,
            ssim_std,
        });
    }
    Ok(rows)
}

pub fn stability_csv(rows: &[StabilityRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
