use crate::error::{Error, Result};
use crate::numerics::Tensor;

fn chw(t: &Tensor<f32>) -> Result<(usize, usize, usize)> {
    match t.dims() {
        [c, h, w] => Ok((*c, *h, *w)),
        [h, w] => Ok((1, *h, *w)),
        d => Err(Error::shape("image", format!("expected [C,H,W], got {d:?}"))),
    }
}

/// Central `size` window; offsets are `floor((dim − size) / 2)`.
pub fn center_crop(image: &Tensor<f32>, size: (usize, usize)) -> Result<Tensor<f32>> {
    let (c, h, w) = chw(image)?;
    let (th, tw) = size;
    if th == 0 || tw == 0 || th > h || tw > w {
        return Err(Error::Invalid(format!("cannot crop {th}x{tw} from {h}x{w}")));
    }
    let (oy, ox) = ((h - th) / 2, (w - tw) / 2);
    let mut out = Vec::with_capacity(c * th * tw);
    for ch in 0..c {
        for y in oy..oy + th {
            let row = (ch * h + y) * w;
            out.extend_from_slice(&image.data()[row + ox..row + ox + tw]);
        }
    }
    Tensor::new([c, th, tw], out)
}

/// Bilinear resampling at half-pixel centers: output index `i` samples
/// input coordinate `(i + 0.5)·in/out − 0.5`, clamped to the grid.
pub fn resize_bilinear(image: &Tensor<f32>, size: (usize, usize)) -> Result<Tensor<f32>> {
    let (c, h, w) = chw(image)?;
    let (th, tw) = size;
    if th == 0 || tw == 0 {
        return Err(Error::Invalid("resize target must be >= 1 per axis".into()));
    }
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let (ys, xs) = (taps(th, h), taps(tw, w));
    let mut out = Vec::with_capacity(c * th * tw);
    for ch in 0..c {
        let plane = &image.data()[ch * h * w..(ch + 1) * h * w];
        let px = |y: usize, x: usize| plane[y * w + x] as f64;
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = px(y0, x0) * (1.0 - fx) + px(y0, x1) * fx;
                let bot = px(y1, x0) * (1.0 - fx) + px(y1, x1) * fx;
                out.push((top * (1.0 - fy) + bot * fy) as f32);
            }
        }
    }
    Tensor::new([c, th, tw], out)
}

/// `(x − min) / (max − min)`; constant images map to all zeros.
pub fn normalize_minmax(image: &Tensor<f32>) -> Tensor<f32> {
    let (lo, hi) = image
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Tensor::zeros(image.dims());
    }
    image.map(|v| ((v - lo) / range).clamp(0.0, 1.0))
}

/// Standard input pipeline: center crop, bilinear resize, min-max normalize.
pub fn preprocess(image: &Tensor<f32>, crop: usize, size: usize) -> Result<Tensor<f32>> {
    let (_, h, w) = chw(image)?;
    let cropped = if h >= crop && w >= crop {
        center_crop(image, (crop, crop))?
    } else {
        // smaller sources are cropped to their largest central square
        let side = h.min(w);
        center_crop(image, (side, side))?
    };
    let resized = resize_bilinear(&cropped, (size, size))?;
    Ok(normalize_minmax(&resized))
}
