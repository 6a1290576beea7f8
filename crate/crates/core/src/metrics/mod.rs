//! Image quality metrics and result tables.

mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Element, Tensor};

pub use report::{aggregate_report, ImageResult, MetricReport, ReportRow};

fn same_dims<T: Element>(op: &'static str, x: &Tensor<T>, y: &Tensor<T>) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", x.dims(), y.dims())));
    }
    Ok(())
}

/// Spatial height and width of a `[H,W]` or `[1,H,W]` image.
fn plane<T: Element>(op: &'static str, x: &Tensor<T>) -> Result<(usize, usize)> {
    match x.dims() {
        [h, w] | [1, h, w] => Ok((*h, *w)),
        d => Err(Error::shape(op, format!("expected [H,W] or [1,H,W], got {d:?}"))),
    }
}

/// `10·log10(max(clean)² / MSE)`. Identical images give `+inf`.
pub fn psnr<T: Element>(x: &Tensor<T>, clean: &Tensor<T>) -> Result<f64> {
    same_dims("psnr", x, clean)?;
    let peak = clean.data().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.as_f64()));
    if !(peak > 0.0) {
        return Err(Error::Invalid("psnr: reference image has no positive peak".into()));
    }
    let sse: f64 = x
        .data()
        .iter()
        .zip(clean.data())
        .map(|(&a, &b)| (a.as_f64() - b.as_f64()).powi(2))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / x.len() as f64;
    Ok(10.0 * (peak * peak / mse).log10())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SsimMode {
    /// Mean over every valid `window × window` uniform window.
    Windowed,
    /// One evaluation on whole-image moments.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub mode: SsimMode,
    pub window: usize,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
            mode: SsimMode::Windowed,
            window: 7,
        }
    }
}

impl SsimParams {
    pub fn global() -> Self {
        SsimParams {
            mode: SsimMode::Global,
            ..Self::default()
        }
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// SSIM of one region from its population moments.
fn ssim_region(x: impl Iterator<Item = (f64, f64)> + Clone, c1: f64, c2: f64) -> f64 {
    let mut n = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (a, b) in x.clone() {
        sx += a;
        sy += b;
        n += 1.0;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cxy += da * db;
    }
    let (vx, vy, cxy) = (vx / n, vy / n, cxy / n);
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

pub fn ssim<T: Element>(x: &Tensor<T>, clean: &Tensor<T>, params: &SsimParams) -> Result<f64> {
    same_dims("ssim", x, clean)?;
    let (h, w) = plane("ssim", x)?;
    let (c1, c2) = (params.c1(), params.c2());
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::Invalid("ssim constants must be positive".into()));
    }
    let (xd, yd) = (x.data(), clean.data());
    match params.mode {
        SsimMode::Global => {
            let it = xd.iter().zip(yd).map(|(&a, &b)| (a.as_f64(), b.as_f64()));
            Ok(ssim_region(it, c1, c2))
        }
        SsimMode::Windowed => {
            let k = params.window;
            if k == 0 || h < k || w < k {
                return Err(Error::Invalid(format!("ssim: {h}x{w} image is smaller than the {k}x{k} window")));
            }
            let mut values = Vec::with_capacity((h - k + 1) * (w - k + 1));
            for i in 0..=h - k {
                for j in 0..=w - k {
                    let it = (0..k * k).map(|t| {
                        let idx = (i + t / k) * w + j + t % k;
                        (xd[idx].as_f64(), yd[idx].as_f64())
                    });
                    values.push(ssim_region(it, c1, c2));
                }
            }
            // mean as first + mean deviation: exact when every window agrees
            let first = values[0];
            let dev: f64 = values.iter().map(|v| v - first).sum();
            Ok(first + dev / values.len() as f64)
        }
    }
}

/// `clamp(gain·|x − clean|, 0, 1)`.
pub fn error_map<T: Element>(x: &Tensor<T>, clean: &Tensor<T>, gain: T) -> Result<Tensor<T>> {
    same_dims("error_map", x, clean)?;
    let data = x
        .data()
        .iter()
        .zip(clean.data())
        .map(|(&a, &b)| (gain * (a - b).abs()).max(T::zero()).min(T::one()))
        .collect();
    Tensor::new(x.dims(), data)
}
