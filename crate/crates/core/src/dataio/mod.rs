//! File formats, preprocessing, manifests, synthetic phantoms and the
//! degraded-sample stream.

mod manifest;
mod phantom;
mod png_io;
mod preprocess;
mod raster;
mod samples;

pub use manifest::{Manifest, ManifestRecord, Split};
pub use phantom::{generate_phantom, PhantomSpec};
pub use png_io::{load_png, save_png};
pub use preprocess::{center_crop, normalize_minmax, preprocess, resize_bilinear};
pub use raster::{decode_raster, encode_raster, load_raster, save_raster};
pub use samples::{build_samples, derive_seed, draw_task, make_sample, Sample};

use std::path::Path;

use crate::error::Result;
use crate::numerics::Tensor;

/// Loads a PNG or MRIT raster by extension (anything but `.png` is read as MRIT).
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        load_png(path)
    } else {
        load_raster(path)
    }
}

/// `n` phantoms with seeds `seed, seed+1, ...`.
pub fn phantom_set(n: usize, size: usize, seed: u64) -> Result<Vec<Tensor<f32>>> {
    (0..n as u64)
        .map(|i| generate_phantom(&PhantomSpec::new(seed.wrapping_add(i), size)))
        .collect()
}
