//! Shifted-window attention as one masked attention over the whole grid.
//!
//! Token pairs outside a common (cyclically shifted) window, or inside one
//! window but in different wrap-around regions, get the `MASKED` logit.
//! Allowed pairs get the relative-position bias of their offset.

use crate::numerics::kernels::MASKED;

/// Position of grid coordinate `y` after a cyclic shift by `-shift`:
/// `(window index, offset in window, region)`.
fn shifted(y: usize, grid: usize, window: usize, shift: usize) -> (usize, usize, usize) {
    let ys = (y + grid - shift) % grid;
    let region = if shift == 0 || ys < grid - window {
        0
    } else if ys < grid - shift {
        1
    } else {
        2
    };
    (ys / window, ys % window, region)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowLayout {
    pub tokens: usize,
    /// Additive mask, `[N,N]` row-major.
    pub mask: Vec<f64>,
    /// Index into the `[heads, (2w−1)²]` bias table for every `[heads,N,N]` logit.
    pub bias_index: Vec<usize>,
}

pub fn window_layout(grid: usize, window: usize, shift: usize, heads: usize) -> WindowLayout {
    let n = grid * grid;
    let span = 2 * window - 1;
    let table = span * span;
    let coords: Vec<_> = (0..n)
        .map(|i| (shifted(i / grid, grid, window, shift), shifted(i % grid, grid, window, shift)))
        .collect();
    let mut mask = vec![0.0; n * n];
    let mut rel = vec![0usize; n * n];
    for (i, &((wy, oy, ry), (wx, ox, rx))) in coords.iter().enumerate() {
        for (j, &((wy2, oy2, ry2), (wx2, ox2, rx2))) in coords.iter().enumerate() {
            if (wy, wx, ry, rx) == (wy2, wx2, ry2, rx2) {
                let dy = oy + window - 1 - oy2;
                let dx = ox + window - 1 - ox2;
                rel[i * n + j] = dy * span + dx;
            } else {
                mask[i * n + j] = MASKED;
            }
        }
    }
    let bias_index = (0..heads)
        .flat_map(|h| rel.iter().map(move |&r| h * table + r))
        .collect();
    WindowLayout {
        tokens: n,
        mask,
        bias_index,
    }
}
