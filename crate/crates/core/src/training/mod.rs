//! L1 objective, Adam, the multi-task training loop and checkpoints.

mod checkpoint;
mod optim;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{derive_seed, draw_task, make_sample, Sample};
use crate::degradation::MaskSpec;
use crate::error::{Error, Result};
use crate::model::{Mode, Model};
use crate::numerics::{Graph, Tensor};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use optim::{adam_step, AdamConfig, OptimState};

/// Mean absolute difference of two images.
pub fn l1_loss(pred: &Tensor<f32>, target: &Tensor<f32>) -> Result<f64> {
    if pred.dims() != target.dims() {
        return Err(Error::shape(
            "l1_loss",
            format!("{:?} vs {:?}", pred.dims(), target.dims()),
        ));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Finetune,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default = "default_betas")]
    pub betas: (f64, f64),
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub deterministic: bool,
}

fn default_betas() -> (f64, f64) {
    (0.9, 0.999)
}

fn default_eps() -> f64 {
    1e-8
}

fn default_true() -> bool {
    true
}

impl TrainConfig {
    pub fn desk() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            betas: default_betas(),
            eps: default_eps(),
            batch_size: 1,
            pretrain_epochs: 5,
            finetune_epochs: 15,
            seed: 0,
            deterministic: true,
        }
    }

    pub fn full() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            batch_size: 32,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Invalid(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::Invalid(format!("betas must lie in [0, 1), got ({b1}, {b2})")));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Invalid(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be at least 1".into()));
        }
        if self.pretrain_epochs == 0 || self.finetune_epochs == 0 {
            return Err(Error::Invalid("epoch counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            betas: self.betas,
            eps: self.eps,
        }
    }

    pub fn epochs(&self, phase: Phase) -> usize {
        match phase {
            Phase::Pretrain => self.pretrain_epochs,
            Phase::Finetune => self.finetune_epochs,
        }
    }
}

/// Mean loss and mean gradients (indexed by parameter) over `batch`.
/// Parameters no sample reached get `None`.
pub fn batch_gradients(
    model: &Model<f32>,
    batch: &[Sample],
    parallel: bool,
) -> Result<(f64, Vec<Option<Tensor<f32>>>)> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch".into()));
    }
    let one = |s: &Sample| -> Result<(f64, Vec<(usize, Tensor<f32>)>)> {
        let mut g = Graph::new();
        let x = g.constant(s.input.clone());
        let y = model.forward(&mut g, x, &s.label, Mode::Train)?;
        let t = g.constant(s.target.clone());
        let loss = g.l1(y, t)?;
        let value = g.value(loss).data()[0] as f64;
        Ok((value, g.backward(loss)?.into_tagged()))
    };
    // collect keeps batch order, so the reduction below is the same either way
    let per_sample: Vec<_> = if parallel {
        batch.par_iter().map(one).collect::<Result<_>>()?
    } else {
        batch.iter().map(one).collect::<Result<_>>()?
    };

    let n = batch.len() as f32;
    let mut grads: Vec<Option<Tensor<f32>>> = vec![None; model.params().len()];
    let mut loss = 0.0;
    for (l, tagged) in per_sample {
        loss += l;
        for (tag, g) in tagged {
            match &mut grads[tag] {
                Some(acc) => acc.add_assign(&g),
                slot => *slot = Some(g),
            }
        }
    }
    for g in grads.iter_mut().flatten() {
        for v in g.data_mut() {
            *v /= n;
        }
    }
    Ok((loss / batch.len() as f64, grads))
}

/// Owns a model and its optimizer state while training.
pub struct Trainer {
    model: Model<f32>,
    state: OptimState,
    config: TrainConfig,
    trace: Vec<f64>,
}

impl Trainer {
    pub fn new(model: Model<f32>, config: TrainConfig) -> Result<Self> {
        let state = OptimState::new(model.params());
        Self::resume(model, state, config)
    }

    pub fn resume(model: Model<f32>, state: OptimState, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if state.m.len() != model.params().len()
            || state.m.iter().zip(model.params()).any(|(m, p)| m.dims() != p.dims())
        {
            return Err(Error::Invalid("optimizer state does not match the model".into()));
        }
        Ok(Trainer {
            model,
            state,
            config,
            trace: Vec::new(),
        })
    }

    pub fn model(&self) -> &Model<f32> {
        &self.model
    }

    pub fn state(&self) -> &OptimState {
        &self.state
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Per-step losses recorded so far.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn into_parts(self) -> (Model<f32>, OptimState, Vec<f64>) {
        (self.model, self.state, self.trace)
    }

    /// Forward, backward and one Adam update over `batch`. Returns the batch loss.
    pub fn step(&mut self, batch: &[Sample]) -> Result<f64> {
        let (loss, grads) = batch_gradients(&self.model, batch, !self.config.deterministic)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at step {}", self.trace.len())));
        }
        let specs = self.model.specs().to_vec();
        let names = |i: usize| specs[i].name.clone();
        adam_step(self.model.params_mut(), &grads, &mut self.state, &self.config.adam(), &names)?;
        self.trace.push(loss);
        Ok(loss)
    }

    /// Samples for epoch `epoch`: shuffled image order, one freshly drawn task per image.
    pub fn epoch_samples(&self, images: &[Tensor<f32>], tasks: &[MaskSpec], epoch: usize) -> Result<Vec<Sample>> {
        let seed = self.config.seed;
        let mut order: Vec<usize> = (0..images.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, epoch as u64, 1)));
        let task_seed = derive_seed(seed, epoch as u64, 2);
        order
            .into_iter()
            .map(|i| make_sample(&images[i], &draw_task(tasks, task_seed, i), i))
            .collect()
    }

    /// Runs `epochs` passes over `images`, calling `on_step(step, loss)`
    /// after every update. Returning `false` from the callback stops early.
    pub fn run(
        &mut self,
        images: &[Tensor<f32>],
        tasks: &[MaskSpec],
        epochs: usize,
        mut on_step: impl FnMut(&Model<f32>, usize, f64) -> bool,
    ) -> Result<()> {
        if images.is_empty() {
            return Err(Error::Empty("no training images".into()));
        }
        if tasks.is_empty() {
            return Err(Error::Empty("empty task set".into()));
        }
        for t in tasks {
            t.validate()?;
        }
        let s = self.model.config().image_size;
        if let Some(bad) = images.iter().find(|im| im.dims() != [1, s, s]) {
            return Err(Error::shape(
                "train",
                format!("model expects [1,{s},{s}] images, got {:?}", bad.dims()),
            ));
        }
        for epoch in 0..epochs {
            let samples = self.epoch_samples(images, tasks, epoch)?;
            for batch in samples.chunks(self.config.batch_size) {
                let loss = self.step(batch)?;
                if !on_step(&self.model, self.trace.len() - 1, loss) {
                    return Ok(());
                }
            }
        }
        Ok(())
    }

    /// Full pretrain or finetune phase with the epoch count from the config.
    pub fn train(&mut self, images: &[Tensor<f32>], tasks: &[MaskSpec], phase: Phase) -> Result<()> {
        let epochs = self.config.epochs(phase);
        self.run(images, tasks, epochs, |_, _, _| true)
    }
}

/// Writes a `step,loss` CSV.
pub fn write_loss_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "loss"])?;
    for (i, l) in trace.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
