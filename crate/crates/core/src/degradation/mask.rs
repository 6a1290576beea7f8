use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Sampling-pattern family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskFamily {
    CartesianRandom,
    CartesianEquispaced,
    #[serde(rename = "gaussian_1d")]
    Gaussian1D,
    #[serde(rename = "gaussian_2d")]
    Gaussian2D,
}

impl MaskFamily {
    pub const ALL: [MaskFamily; 4] = [
        MaskFamily::CartesianRandom,
        MaskFamily::CartesianEquispaced,
        MaskFamily::Gaussian1D,
        MaskFamily::Gaussian2D,
    ];

    pub fn is_cartesian(self) -> bool {
        matches!(self, MaskFamily::CartesianRandom | MaskFamily::CartesianEquispaced)
    }

    /// Column masks (everything except the 2D Gaussian point mask).
    pub fn is_1d(self) -> bool {
        self != MaskFamily::Gaussian2D
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MaskFamily::CartesianRandom => "random",
            MaskFamily::CartesianEquispaced => "equispaced",
            MaskFamily::Gaussian1D => "gaussian1d",
            MaskFamily::Gaussian2D => "gaussian2d",
        }
    }
}

impl fmt::Display for MaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for MaskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "random" | "cartesianrandom" => Ok(MaskFamily::CartesianRandom),
            "equispaced" | "cartesianequispaced" => Ok(MaskFamily::CartesianEquispaced),
            "gaussian1d" => Ok(MaskFamily::Gaussian1D),
            "gaussian2d" => Ok(MaskFamily::Gaussian2D),
            _ => Err(Error::Invalid(format!("unknown mask family `{s}`"))),
        }
    }
}

/// Description of a sampling mask; realized by [`make_mask`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub family: MaskFamily,
    pub acceleration: f64,
    pub center_fraction: f64,
    pub sigma_fraction: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
}

pub const DEFAULT_SIGMA_FRACTION: f64 = 1.0 / 6.0;

impl MaskSpec {
    /// Spec with the default center and width parameters for `family`:
    /// Cartesian families keep `0.32 / acceleration` of the columns in the
    /// center, Gaussian families only force the DC sample.
    pub fn new(family: MaskFamily, acceleration: f64, seed: u64) -> Self {
        let center_fraction = if family.is_cartesian() {
            0.32 / acceleration
        } else {
            0.0
        };
        MaskSpec {
            family,
            acceleration,
            center_fraction,
            sigma_fraction: DEFAULT_SIGMA_FRACTION,
            seed,
            offset: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.acceleration.is_finite() && self.acceleration > 1.0) {
            return Err(Error::Invalid(format!(
                "acceleration must be > 1, got {}",
                self.acceleration
            )));
        }
        if !(0.0..1.0).contains(&self.center_fraction) {
            return Err(Error::Invalid(format!(
                "center_fraction must be in [0, 1), got {}",
                self.center_fraction
            )));
        }
        if !(self.sigma_fraction.is_finite() && self.sigma_fraction > 0.0) {
            return Err(Error::Invalid(format!(
                "sigma_fraction must be > 0, got {}",
                self.sigma_fraction
            )));
        }
        if self.family.is_cartesian() && self.center_fraction * self.acceleration > 1.0 + 1e-12 {
            return Err(Error::InfeasibleMask(format!(
                "center fraction {} exceeds the 1/{} sampling budget",
                self.center_fraction, self.acceleration
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Kept {
    /// One flag per column, broadcast across rows.
    Columns(Vec<bool>),
    /// Row-major flag per k-space point.
    Points(Vec<bool>),
}

/// Realized boolean k-space mask. The DC sample (grid center) is always kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    kept: Kept,
}

impl Mask {
    fn checked(height: usize, width: usize, kept: Kept) -> Result<Self> {
        let m = Mask { height, width, kept };
        if m.kept_count() == 0 {
            return Err(Error::InfeasibleMask("mask keeps no samples".into()));
        }
        if !m.is_kept(height / 2, width / 2) {
            return Err(Error::InfeasibleMask("mask must keep the DC sample".into()));
        }
        Ok(m)
    }

    /// Column mask broadcast over `height` rows.
    pub fn from_columns(height: usize, columns: Vec<bool>) -> Result<Self> {
        let width = columns.len();
        Self::checked(height, width, Kept::Columns(columns))
    }

    pub fn from_points(height: usize, width: usize, points: Vec<bool>) -> Result<Self> {
        if points.len() != height * width {
            return Err(Error::shape("mask", format!("{} flags for {height}x{width}", points.len())));
        }
        Self::checked(height, width, Kept::Points(points))
    }

    /// Keeps every sample.
    pub fn full(height: usize, width: usize) -> Self {
        Mask {
            height,
            width,
            kept: Kept::Columns(vec![true; width]),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn is_column_mask(&self) -> bool {
        matches!(self.kept, Kept::Columns(_))
    }

    pub fn is_kept(&self, y: usize, x: usize) -> bool {
        match &self.kept {
            Kept::Columns(c) => c[x],
            Kept::Points(p) => p[y * self.width + x],
        }
    }

    /// Kept columns for a column mask, kept points otherwise.
    pub fn kept_count(&self) -> usize {
        match &self.kept {
            Kept::Columns(c) => c.iter().filter(|&&k| k).count(),
            Kept::Points(p) => p.iter().filter(|&&k| k).count(),
        }
    }

    pub fn columns(&self) -> Option<&[bool]> {
        match &self.kept {
            Kept::Columns(c) => Some(c),
            Kept::Points(_) => None,
        }
    }

    /// `[1,H,W]` raster of 0.0 / 1.0.
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_fn([1, self.height, self.width], |i| {
            let (y, x) = (i / self.width, i % self.width);
            if self.is_kept(y, x) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Inverse of [`Mask::to_tensor`]. Rasters whose rows are all equal become
    /// column masks.
    pub fn from_tensor(t: &Tensor<f32>) -> Result<Self> {
        let d = t.dims();
        let (h, w) = match d {
            [h, w] => (*h, *w),
            [1, h, w] => (*h, *w),
            _ => return Err(Error::shape("mask", format!("raster dims {d:?}"))),
        };
        let flags: Vec<bool> = t.data().iter().map(|&v| v > 0.5).collect();
        let first = &flags[..w];
        if flags.chunks(w).all(|row| row == first) {
            Self::from_columns(h, first.to_vec())
        } else {
            Self::from_points(h, w, flags)
        }
    }
}

/// Samples acquired over samples total: `W / kept columns` for column masks,
/// `H·W / kept points` otherwise.
pub fn achieved_acceleration(mask: &Mask) -> f64 {
    let total = match mask.kept {
        Kept::Columns(_) => mask.width,
        Kept::Points(_) => mask.height * mask.width,
    };
    total as f64 / mask.kept_count() as f64
}

/// Half-away-from-zero rounding to a count.
fn round_count(x: f64) -> usize {
    x.round().max(0.0) as usize
}

/// Indices of a centered block of `n` samples along an axis of length `len`.
fn center_block(len: usize, n: usize) -> std::ops::Range<usize> {
    let start = len / 2 - n / 2;
    start..start + n
}

/// Picks `count` indices from `candidates` without replacement with
/// probability proportional to `weight` (exponential-key sampling).
fn weighted_sample(candidates: &[usize], weight: impl Fn(usize) -> f64, count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = candidates
        .iter()
        .map(|&c| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / weight(c), c)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(count).map(|(_, c)| c).collect()
}

/// Realizes `spec` on an `H×W` grid.
///
/// Kept totals count the center samples inside the budget:
/// `round(W / acceleration)` columns for column families and
/// `round(H·W / acceleration)` points for the 2D Gaussian.
pub fn make_mask(spec: &MaskSpec, dims: (usize, usize)) -> Result<Mask> {
    spec.validate()?;
    let (h, w) = dims;
    if h < 16 || w < 16 {
        return Err(Error::Invalid(format!("mask dims must be >= 16, got {h}x{w}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    if spec.family == MaskFamily::Gaussian2D {
        let total = h * w;
        let target = round_count(total as f64 / spec.acceleration);
        let (ch, cw) = (round_count(spec.center_fraction * h as f64), round_count(spec.center_fraction * w as f64));
        let mut kept = vec![false; total];
        for y in center_block(h, ch) {
            for x in center_block(w, cw) {
                kept[y * w + x] = true;
            }
        }
        kept[(h / 2) * w + w / 2] = true;
        let forced = kept.iter().filter(|&&k| k).count();
        check_budget(target, ch * cw, forced, total)?;
        let candidates: Vec<usize> = (0..total).filter(|&i| !kept[i]).collect();
        let (sy, sx) = (spec.sigma_fraction * h as f64, spec.sigma_fraction * w as f64);
        let weight = |i: usize| {
            let dy = (i / w) as f64 - (h / 2) as f64;
            let dx = (i % w) as f64 - (w / 2) as f64;
            (-(dy * dy) / (2.0 * sy * sy) - (dx * dx) / (2.0 * sx * sx)).exp()
        };
        for i in weighted_sample(&candidates, weight, target - forced, &mut rng) {
            kept[i] = true;
        }
        return Mask::from_points(h, w, kept);
    }

    let target = round_count(w as f64 / spec.acceleration);
    let n_center = round_count(spec.center_fraction * w as f64);
    let mut cols = vec![false; w];
    for c in center_block(w, n_center) {
        cols[c] = true;
    }
    cols[w / 2] = true;
    let forced = cols.iter().filter(|&&k| k).count();
    check_budget(target, n_center, forced, w)?;
    let need = target - forced;
    let remaining: Vec<usize> = (0..w).filter(|&c| !cols[c]).collect();

    match spec.family {
        MaskFamily::CartesianRandom => {
            for i in index::sample(&mut rng, remaining.len(), need) {
                cols[remaining[i]] = true;
            }
        }
        MaskFamily::CartesianEquispaced => {
            // Evenly spread over the non-center columns; spacing is the
            // exact ratio so the kept total always hits the target.
            let r = remaining.len();
            let offset = spec.offset.unwrap_or(0);
            for j in 0..need {
                let pos = (offset + j * r / need.max(1)) % r;
                cols[remaining[pos]] = true;
            }
        }
        MaskFamily::Gaussian1D => {
            let sigma = spec.sigma_fraction * w as f64;
            let center = (w / 2) as f64;
            let weight = |c: usize| {
                let d = c as f64 - center;
                (-(d * d) / (2.0 * sigma * sigma)).exp()
            };
            for c in weighted_sample(&remaining, weight, need, &mut rng) {
                cols[c] = true;
            }
        }
        MaskFamily::Gaussian2D => unreachable!("handled above"),
    }
    Mask::from_columns(h, cols)
}

fn check_budget(target: usize, n_center: usize, forced: usize, total: usize) -> Result<()> {
    if target < n_center + 1 || target < forced {
        return Err(Error::InfeasibleMask(format!(
            "sampling budget {target} leaves no room beyond the {forced} forced center samples"
        )));
    }
    if target >= total {
        return Err(Error::InfeasibleMask(format!(
            "sampling budget {target} keeps all {total} samples"
        )));
    }
    Ok(())
}
