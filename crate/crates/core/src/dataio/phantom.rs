use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::preprocess::normalize_minmax;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub seed: u64,
    pub image_size: usize,
    /// Inclusive range of ellipse count, body outline included.
    pub n_ellipses: (usize, usize),
    pub intensity: (f64, f64),
}

impl PhantomSpec {
    pub fn new(seed: u64, image_size: usize) -> Self {
        PhantomSpec {
            seed,
            image_size,
            n_ellipses: (4, 8),
            intensity: (0.1, 1.0),
        }
    }
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self::new(0, 64)
    }
}

struct Ellipse {
    cy: f64,
    cx: f64,
    ay: f64,
    ax: f64,
    cos: f64,
    sin: f64,
    value: f64,
}

impl Ellipse {
    fn random(rng: &mut ChaCha8Rng, center: f64, axes: (f64, f64), value: f64) -> Self {
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        Ellipse {
            cy: rng.random_range(-center..=center),
            cx: rng.random_range(-center..=center),
            ay: rng.random_range(axes.0..axes.1),
            ax: rng.random_range(axes.0..axes.1),
            cos: theta.cos(),
            sin: theta.sin(),
            value,
        }
    }

    fn contains(&self, y: f64, x: f64) -> bool {
        let (dy, dx) = (y - self.cy, x - self.cx);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (u / self.ax).powi(2) + (v / self.ay).powi(2) <= 1.0
    }
}

/// Random filled ellipses on a faint smooth background, normalized to [0,1].
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Tensor<f32>> {
    let s = spec.image_size;
    let (lo_n, hi_n) = spec.n_ellipses;
    let (lo_i, hi_i) = spec.intensity;
    if s < 2 || lo_n == 0 || lo_n > hi_n || !(lo_i < hi_i) {
        return Err(Error::Invalid(format!("bad phantom spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = rng.random_range(lo_n..=hi_n);
    let mut shapes = vec![Ellipse::random(&mut rng, 0.05, (0.6, 0.9), hi_i)];
    for _ in 1..n {
        let v = rng.random_range(lo_i..hi_i);
        let sign = if rng.random_bool(0.7) { 1.0 } else { -0.5 };
        shapes.push(Ellipse::random(&mut rng, 0.45, (0.06, 0.35), sign * v));
    }
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.3..1.5),
                rng.random_range(0.3..1.5),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let img = Tensor::from_fn([1, s, s], |i| {
        let y = 2.0 * ((i / s) as f64 + 0.5) / s as f64 - 1.0;
        let x = 2.0 * ((i % s) as f64 + 0.5) / s as f64 - 1.0;
        let mut v: f64 = shapes.iter().filter(|e| e.contains(y, x)).map(|e| e.value).sum();
        v = v.max(0.0);
        let bg: f64 = waves.iter().map(|&(fy, fx, ph)| (fy * y * 3.0 + fx * x * 3.0 + ph).cos()).sum();
        (v + 0.03 * (bg / 3.0 + 1.0)) as f32
    });
    Ok(normalize_minmax(&img))
}
