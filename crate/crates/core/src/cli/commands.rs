use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::harness::{self, Dataset};
use super::{commit, thread_setting, write_text, DirLock, ExperimentConfig};
use crate::dataio::{encode_raster, load_image, phantom_set, save_png, Manifest, ManifestRecord, Split};
use crate::degradation::{achieved_acceleration, degrade, make_mask, Mask, MaskFamily, MaskSpec};
use crate::error::{Error, Result};
use crate::metrics::{aggregate_report, error_map, psnr};
use crate::numerics::Tensor;
use crate::training::{load_checkpoint, save_checkpoint, write_loss_trace, Checkpoint};

#[derive(Debug, Parser)]
#[command(name = "mript", version, about = "Undersampled MRI reconstruction with a multi-task transformer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a sampling mask (MRIT raster plus PNG preview).
    MaskGen {
        #[arg(long)]
        family: MaskFamily,
        #[arg(long)]
        acc: f64,
        #[arg(long, default_value_t = 224)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fully sampled center fraction; family default if omitted.
        #[arg(long)]
        center_fraction: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Zero-filled reconstruction of an image under a mask.
    Degrade {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the gained error map against the clean input.
        #[arg(long)]
        error_map: Option<PathBuf>,
    },
    /// Write synthetic phantoms and a manifest.
    Phantoms {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// How many of the phantoms (taken from the end) form the test split.
        #[arg(long, default_value_t = 0)]
        test_count: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Multi-task pretraining from scratch.
    Pretrain { config: PathBuf },
    /// Finetune a checkpoint on the config's finetune tasks.
    Finetune {
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Evaluate a checkpoint on the test images.
    Eval {
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// The checkpoint is a pretrained model evaluated without finetuning.
        #[arg(long)]
        zero_shot: bool,
    },
    /// Finetune on random training subsets of several sizes and report the spread.
    Stability {
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// PNG or MRIT by extension.
fn write_image(path: &Path, image: &Tensor<f32>) -> Result<()> {
    if is_png(path) {
        commit(path, |tmp| save_png(tmp, image))
    } else {
        let bytes = encode_raster(image);
        commit(path, |tmp| fs::write(tmp, &bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e)))
    }
}

fn check_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(Error::Invalid(format!("output directory {} does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

/// Loads the config and applies `MRIPT_THREADS`.
fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(n) = thread_setting()? {
        if n == 0 {
            cfg.train.deterministic = true;
        }
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    Ok(cfg)
}

fn load_matching_checkpoint(cfg: &ExperimentConfig, path: &Path) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    harness::check_compatible(&cfg.model_config()?, ck.model.config())?;
    Ok(ck)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MaskGen {
            family,
            acc,
            size,
            seed,
            center_fraction,
            out,
        } => mask_gen(family, acc, size, seed, center_fraction, &out),
        Command::Degrade {
            input,
            mask,
            out,
            error_map,
        } => degrade_cmd(&input, &mask, &out, error_map.as_deref()),
        Command::Phantoms {
            count,
            size,
            seed,
            test_count,
            out_dir,
        } => phantoms(count, size, seed, test_count, &out_dir),
        Command::Pretrain { config } => pretrain(&config),
        Command::Finetune { config, checkpoint } => finetune(&config, &checkpoint),
        Command::Eval {
            config,
            checkpoint,
            zero_shot,
        } => eval(&config, &checkpoint, zero_shot),
        Command::Stability {
            config,
            checkpoint,
            sizes,
            repeats,
        } => stability(&config, &checkpoint, &sizes, repeats),
    }
}

fn mask_gen(family: MaskFamily, acc: f64, size: usize, seed: u64, center: Option<f64>, out: &Path) -> Result<()> {
    let mut spec = MaskSpec::new(family, acc, seed);
    if let Some(c) = center {
        spec.center_fraction = c;
    }
    check_parent(out)?;
    let mask = make_mask(&spec, (size, size))?;
    let raster = mask.to_tensor();
    write_image(out, &raster)?;
    write_image(&out.with_extension("png"), &raster)?;
    println!("achieved acceleration: {:?}", achieved_acceleration(&mask));
    Ok(())
}

fn degrade_cmd(input: &Path, mask: &Path, out: &Path, emap: Option<&Path>) -> Result<()> {
    let clean = load_image(input)?;
    let mask = Mask::from_tensor(&load_image(mask)?)?;
    check_parent(out)?;
    if let Some(p) = emap {
        check_parent(p)?;
    }
    let degraded = degrade(&clean, &mask)?;
    let quality = psnr(&degraded, &clean)?;
    write_image(out, &degraded)?;
    if let Some(p) = emap {
        write_image(p, &error_map(&degraded, &clean, 3.0)?)?;
    }
    println!("psnr_db: {quality}");
    Ok(())
}

fn phantoms(count: usize, size: usize, seed: u64, test_count: usize, out_dir: &Path) -> Result<()> {
    if count == 0 {
        return Err(Error::Invalid("count must be at least 1".into()));
    }
    if test_count > count {
        return Err(Error::Invalid(format!("test_count {test_count} exceeds count {count}")));
    }
    if size < 16 {
        return Err(Error::Invalid(format!("phantom size must be at least 16, got {size}")));
    }
    let images = phantom_set(count, size, seed)?;
    let _lock = DirLock::acquire(out_dir)?;
    let mut records = Vec::with_capacity(count);
    for (i, img) in images.iter().enumerate() {
        let name = format!("phantom_{i:05}.mrit");
        write_image(&out_dir.join(&name), img)?;
        let split = if i >= count - test_count { Split::Test } else { Split::Train };
        records.push(ManifestRecord { path: name, split });
    }
    let manifest = Manifest::new(records, out_dir)?;
    let path = out_dir.join("manifest.csv");
    commit(&path, |tmp| manifest.save(tmp))?;
    println!("{}", path.display());
    Ok(())
}

fn pretrain(config: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let data = harness::load_dataset(&cfg)?;
    let _lock = DirLock::acquire(&cfg.output_dir)?;
    log::info!(
        "pretraining on {} images, {} tasks, {} epochs",
        data.train.len(),
        cfg.tasks.specs().len(),
        cfg.train.pretrain_epochs
    );
    let trainer = harness::pretrain(&cfg, &data)?;
    let ckpt = cfg.output_dir.join("pretrain.ckpt");
    save_checkpoint(trainer.model(), Some(trainer.state()), &cfg.tasks.specs(), trainer.trace().len() as u64, &ckpt)?;
    let trace = cfg.output_dir.join("pretrain_loss.csv");
    commit(&trace, |tmp| write_loss_trace(tmp, trainer.trace()))?;
    println!("{}", ckpt.display());
    Ok(())
}

fn finetune(config: &Path, checkpoint: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let ck = load_matching_checkpoint(&cfg, checkpoint)?;
    let data = harness::load_dataset(&cfg)?;
    let _lock = DirLock::acquire(&cfg.output_dir)?;
    let tasks = cfg.finetune_tasks().specs();
    let trainer = harness::finetune(ck.model, &cfg.train, &tasks, &data.train)?;
    let ckpt = cfg.output_dir.join("finetune.ckpt");
    let step = ck.step + trainer.trace().len() as u64;
    save_checkpoint(trainer.model(), Some(trainer.state()), &tasks, step, &ckpt)?;
    let trace = cfg.output_dir.join("finetune_loss.csv");
    commit(&trace, |tmp| write_loss_trace(tmp, trainer.trace()))?;
    println!("{}", ckpt.display());
    Ok(())
}

fn eval(config: &Path, checkpoint: &Path, zero_shot: bool) -> Result<()> {
    let cfg = load_config(config)?;
    let ck = load_matching_checkpoint(&cfg, checkpoint)?;
    let data: Dataset = harness::load_dataset(&cfg)?;
    let _lock = DirLock::acquire(&cfg.output_dir)?;
    let tasks = cfg.eval_tasks().specs();
    for t in &tasks {
        log::info!("task {} {}x routes to pair {}", t.family, t.acceleration, ck.model.config().route(&crate::model::TaskLabel::new(t.family, t.acceleration)?));
    }
    let ev = harness::evaluate(&ck.model, &data.test, &tasks, &cfg.dataset, cfg.train.seed, cfg.error_maps)?;
    let mut results = ev.all();
    if zero_shot {
        let tag = harness::model_tag(ck.model.config());
        for r in results.iter_mut().filter(|r| r.model == tag) {
            r.model.push_str("-zero-shot");
        }
    }
    let report = aggregate_report(&results)?;
    let stem = if zero_shot { "zero_shot_report" } else { "report" };
    write_text(&cfg.output_dir.join(format!("{stem}.csv")), &report.to_csv()?)?;
    let md = report.to_markdown();
    write_text(&cfg.output_dir.join(format!("{stem}.md")), &md)?;

    let maps = cfg.output_dir.join("error_maps");
    if !ev.examples.is_empty() {
        fs::create_dir_all(&maps).map_err(|e| Error::io(format!("creating {}", maps.display()), e))?;
    }
    for ex in &ev.examples {
        let name = format!("{}_x{}_{:03}", ex.task.family, ex.task.acceleration, ex.image);
        write_image(&maps.join(format!("{name}_recon.png")), &ex.recon)?;
        write_image(&maps.join(format!("{name}_input.png")), &ex.input)?;
        write_image(&maps.join(format!("{name}_error.png")), &error_map(&ex.recon, &ex.clean, 3.0)?)?;
        write_image(&maps.join(format!("{name}_input_error.png")), &error_map(&ex.input, &ex.clean, 3.0)?)?;
    }
    print!("{md}");
    Ok(())
}

fn stability(config: &Path, checkpoint: &Path, sizes: &[usize], repeats: usize) -> Result<()> {
    let cfg = load_config(config)?;
    let ck = load_matching_checkpoint(&cfg, checkpoint)?;
    let data = harness::load_dataset(&cfg)?;
    harness::check_stability_sizes(sizes, repeats, data.train.len())?;
    let _lock = DirLock::acquire(&cfg.output_dir)?;
    let rows = harness::stability(&cfg, &ck.model, &data, sizes, repeats)?;
    let csv = harness::stability_csv(&rows)?;
    write_text(&cfg.output_dir.join("stability.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}
