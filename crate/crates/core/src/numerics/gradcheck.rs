//! Central finite-difference validation of recorded gradients.

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

fn eval<'a, F>(f: &F, point: Tensor<f64>) -> Result<f64>
where
    F: Fn(&mut Graph<'a, f64>, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let x = g.constant(point);
    let y = f(&mut g, x)?;
    Ok(g.value(y).sum())
}

/// Compares the backward-pass gradient of `sum(f(x))` at `point` against
/// central differences with per-component step `h·max(1, |x_i|)`.
///
/// Returns the largest `|a − b| / max(|a|, |b|, 1e-8)` over components.
pub fn grad_check<'a, F>(f: F, point: &Tensor<f64>, h: f64) -> Result<f64>
where
    F: Fn(&mut Graph<'a, f64>, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let x = g.input(point.clone());
    let y = f(&mut g, x)?;
    let loss = if g.value(y).len() == 1 { y } else { g.sum(y) };
    if !g.value(loss).is_finite() {
        return Err(Error::NonFinite("grad_check: forward value".into()));
    }
    let grads = g.backward(loss)?;
    let analytic = match grads.wrt(x) {
        Some(t) => t.data().to_vec(),
        None => vec![0.0; point.len()],
    };

    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::NonFinite(format!("grad_check: analytic gradient component {i}")));
        }
        let step = h * point.data()[i].abs().max(1.0);
        let mut plus = point.clone();
        plus.data_mut()[i] += step;
        let mut minus = point.clone();
        minus.data_mut()[i] -= step;
        let numeric = (eval(&f, plus)? - eval(&f, minus)?) / (2.0 * step);
        if !numeric.is_finite() {
            return Err(Error::NonFinite(format!("grad_check: numeric gradient component {i}")));
        }
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
