//! Undersampling masks, the centered Fourier transform and zero-filled
//! reconstruction.

mod fourier;
mod mask;

pub use fourier::{fft2c, ifft2c, KSpace};
pub use mask::{achieved_acceleration, make_mask, Mask, MaskFamily, MaskSpec, DEFAULT_SIGMA_FRACTION};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Applies `mask` in k-space and returns the magnitude of the zero-filled
/// inverse transform, `[1,H,W]`.
pub fn degrade(image: &Tensor<f32>, mask: &Mask) -> Result<Tensor<f32>> {
    let mut k = fft2c(image)?;
    if k.dims() != mask.dims() {
        return Err(Error::shape(
            "degrade",
            format!("image {:?} vs mask {:?}", k.dims(), mask.dims()),
        ));
    }
    let (h, w) = k.dims();
    for (i, c) in k.data_mut().iter_mut().enumerate() {
        if !mask.is_kept(i / w, i % w) {
            *c = Default::default();
        }
    }
    let img = ifft2c(&k);
    Tensor::new([1, h, w], img.iter().map(|c| c.norm()).collect())
}
