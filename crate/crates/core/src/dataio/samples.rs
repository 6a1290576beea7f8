use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::degradation::{degrade, make_mask, MaskSpec};
use crate::error::{Error, Result};
use crate::model::TaskLabel;
use crate::numerics::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Tensor<f32>,
    pub target: Tensor<f32>,
    pub label: TaskLabel,
    /// Index of the clean image this sample was derived from.
    pub source: usize,
}

/// SplitMix64 finalizer over a seed and two stream coordinates.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Task drawn for image `index`: uniform over `tasks`, with a per-sample mask seed.
pub fn draw_task(tasks: &[MaskSpec], seed: u64, index: usize) -> MaskSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index as u64, 0));
    let t = &tasks[rng.random_range(0..tasks.len())];
    t.clone().with_seed(rng.random())
}

pub fn make_sample(image: &Tensor<f32>, task: &MaskSpec, source: usize) -> Result<Sample> {
    let (h, w) = match image.dims() {
        [1, h, w] => (*h, *w),
        d => return Err(Error::shape("build_samples", format!("expected [1,H,W], got {d:?}"))),
    };
    let mask = make_mask(task, (h, w))?;
    Ok(Sample {
        input: degrade(image, &mask)?,
        target: image.clone(),
        label: TaskLabel::new(task.family, task.acceleration)?,
        source,
    })
}

/// One degraded sample per clean image, task drawn uniformly from `tasks`.
/// Element `i` depends only on `(images[i], tasks, seed, i)`.
pub fn build_samples<'a>(
    images: &'a [Tensor<f32>],
    tasks: &'a [MaskSpec],
    seed: u64,
) -> Result<impl Iterator<Item = Result<Sample>> + 'a> {
    if images.is_empty() {
        return Err(Error::Empty("no source images".into()));
    }
    if tasks.is_empty() {
        return Err(Error::Empty("empty task set".into()));
    }
    for t in tasks {
        t.validate()?;
    }
    Ok(images
        .iter()
        .enumerate()
        .map(move |(i, img)| make_sample(img, &draw_task(tasks, seed, i), i)))
}
