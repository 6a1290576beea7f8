use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            betas: (0.9, 0.999),
            eps: 1e-8,
        }
    }
}

/// Adam moments. `t` counts calls; `counts[i]` counts updates of parameter
/// `i` and drives its bias correction, so a head-tail pair that sat idle
/// for many steps is corrected as if it were fresh.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub t: u64,
    pub counts: Vec<u64>,
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
}

impl OptimState {
    pub fn new(params: &[Tensor<f32>]) -> Self {
        OptimState {
            t: 0,
            counts: vec![0; params.len()],
            m: params.iter().map(|p| Tensor::zeros(p.dims())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.dims())).collect(),
        }
    }
}

/// One bias-corrected Adam update. Parameters whose gradient is `None`
/// are left untouched, moments included.
pub fn adam_step(
    params: &mut [Tensor<f32>],
    grads: &[Option<Tensor<f32>>],
    state: &mut OptimState,
    config: &AdamConfig,
    names: &dyn Fn(usize) -> String,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} params, {} grads, {} moments", params.len(), grads.len(), state.m.len()),
        ));
    }
    for (i, g) in grads.iter().enumerate() {
        if let Some(g) = g {
            if g.dims() != params[i].dims() {
                return Err(Error::shape("adam_step", format!("gradient of {} has dims {:?}", names(i), g.dims())));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter `{}`", names(i))));
            }
        }
    }
    state.t += 1;
    let (b1, b2) = config.betas;
    for (i, g) in grads.iter().enumerate() {
        let Some(g) = g else { continue };
        state.counts[i] += 1;
        let c1 = 1.0 - b1.powi(state.counts[i] as i32);
        let c2 = 1.0 - b2.powi(state.counts[i] as i32);
        let p = params[i].data_mut();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (((p, m), v), &g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g.data()) {
            let g = g as f64;
            let mn = b1 * *m as f64 + (1.0 - b1) * g;
            let vn = b2 * *v as f64 + (1.0 - b2) * g * g;
            *m = mn as f32;
            *v = vn as f32;
            let step = config.learning_rate * (mn / c1) / ((vn / c2).sqrt() + config.eps);
            *p = (*p as f64 - step) as f32;
        }
    }
    Ok(())
}
