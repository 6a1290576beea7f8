use rustfft::num_complex::{Complex, Complex32};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Centered, orthonormally scaled 2D spectrum. DC sits at `(H/2, W/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpace {
    height: usize,
    width: usize,
    data: Vec<Complex32>,
}

impl KSpace {
    pub fn new(height: usize, width: usize, data: Vec<Complex32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape("kspace", format!("{} values for {height}x{width}", data.len())));
        }
        Ok(KSpace { height, width, data })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[Complex32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex32] {
        &mut self.data
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr() as f64).sum()
    }
}

fn image_dims(t: &Tensor<f32>) -> Result<(usize, usize)> {
    match t.dims() {
        [1, h, w] | [h, w] => Ok((*h, *w)),
        d => Err(Error::shape("fft2c", format!("expected [1,H,W], got {d:?}"))),
    }
}

/// Moves index 0 to index `n/2` along each axis (or back when `inverse`).
fn shift2(data: &[Complex<f64>], h: usize, w: usize, inverse: bool) -> Vec<Complex<f64>> {
    let (sy, sx) = if inverse { (h - h / 2, w - w / 2) } else { (h / 2, w / 2) };
    let mut out = vec![Complex::new(0.0, 0.0); data.len()];
    for y in 0..h {
        for x in 0..w {
            out[((y + sy) % h) * w + (x + sx) % w] = data[y * w + x];
        }
    }
    out
}

/// Unnormalized 2D DFT in place (rows then columns).
fn dft2(buf: &mut [Complex<f64>], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    row_fft.process(buf);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
}

fn centered(data: Vec<Complex<f64>>, h: usize, w: usize, inverse: bool) -> Vec<Complex<f64>> {
    let mut buf = shift2(&data, h, w, true);
    dft2(&mut buf, h, w, inverse);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut out = shift2(&buf, h, w, false);
    out.iter_mut().for_each(|c| *c *= scale);
    out
}

/// Centered orthonormal forward transform of a real `[1,H,W]` image.
pub fn fft2c(image: &Tensor<f32>) -> Result<KSpace> {
    let (h, w) = image_dims(image)?;
    if h == 0 || w == 0 {
        return Err(Error::UnsupportedSize(h, w));
    }
    let data = image.data().iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    let out = centered(data, h, w, false);
    KSpace::new(h, w, out.into_iter().map(|c| Complex32::new(c.re as f32, c.im as f32)).collect())
}

/// Centered orthonormal inverse transform; returns the complex image row-major.
pub fn ifft2c(k: &KSpace) -> Vec<Complex32> {
    let data = k.data.iter().map(|c| Complex::new(c.re as f64, c.im as f64)).collect();
    centered(data, k.height, k.width, true)
        .into_iter()
        .map(|c| Complex32::new(c.re as f32, c.im as f32))
        .collect()
}
