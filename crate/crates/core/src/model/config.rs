use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TaskLabel;
use crate::degradation::MaskFamily;
use crate::error::{Error, Result};

/// How head-tail pairs are shared across tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// One pair per acceleration ratio.
    Type,
    /// One pair per mask family.
    Level,
    /// One pair per (family, ratio).
    Split,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Type => "type",
            Variant::Level => "level",
            Variant::Split => "split",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type" => Ok(Variant::Type),
            "level" => Ok(Variant::Level),
            "split" => Ok(Variant::Split),
            _ => Err(Error::Invalid(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub embed_dim: usize,
    pub encoder_depth: usize,
    pub num_heads: usize,
    pub window_size: usize,
    pub shift_size: usize,
    pub decoder_depth: usize,
    pub head_channels: usize,
    pub mlp_ratio: usize,
    pub trained_families: Vec<MaskFamily>,
    pub trained_ratios: Vec<f64>,
    pub variant: Variant,
}

pub const DEFAULT_RATIOS: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];

impl ModelConfig {
    /// 64×64 images, 8×8 token grid.
    pub fn desk() -> Self {
        ModelConfig {
            image_size: 64,
            patch_size: 8,
            embed_dim: 96,
            encoder_depth: 6,
            num_heads: 4,
            window_size: 4,
            shift_size: 2,
            decoder_depth: 2,
            head_channels: 32,
            mlp_ratio: 4,
            trained_families: MaskFamily::ALL.to_vec(),
            trained_ratios: DEFAULT_RATIOS.to_vec(),
            variant: Variant::Level,
        }
    }

    /// 16×16 images; small enough for finite-difference checks in f64.
    pub fn tiny() -> Self {
        ModelConfig {
            image_size: 16,
            patch_size: 4,
            embed_dim: 16,
            encoder_depth: 2,
            num_heads: 2,
            window_size: 2,
            shift_size: 1,
            decoder_depth: 2,
            head_channels: 4,
            mlp_ratio: 2,
            ..Self::desk()
        }
    }

    /// 224×224 images, 14×14 grid, 24 encoder blocks. Width and head count
    /// follow ViT-Base.
    pub fn full() -> Self {
        ModelConfig {
            image_size: 224,
            patch_size: 16,
            embed_dim: 768,
            encoder_depth: 24,
            num_heads: 12,
            window_size: 7,
            shift_size: 3,
            decoder_depth: 2,
            head_channels: 64,
            mlp_ratio: 4,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "tiny" => Ok(Self::tiny()),
            "full" => Ok(Self::full()),
            _ => Err(Error::Invalid(format!("unknown model preset {name:?}"))),
        }
    }

    pub fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn tokens(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if [
            self.image_size,
            self.patch_size,
            self.embed_dim,
            self.num_heads,
            self.window_size,
            self.head_channels,
            self.mlp_ratio,
            self.decoder_depth,
        ]
        .contains(&0)
        {
            return bad(format!("zero-sized model dimension in {self:?}"));
        }
        if self.image_size % self.patch_size != 0 {
            return bad(format!("image_size {} not divisible by patch_size {}", self.image_size, self.patch_size));
        }
        if self.grid() % self.window_size != 0 {
            return bad(format!("grid {} not divisible by window_size {}", self.grid(), self.window_size));
        }
        if self.shift_size != 0 && self.shift_size != self.window_size / 2 {
            return bad(format!("shift_size must be 0 or {}", self.window_size / 2));
        }
        if self.embed_dim % self.num_heads != 0 {
            return bad(format!("embed_dim {} not divisible by {} heads", self.embed_dim, self.num_heads));
        }
        if self.trained_families.is_empty() || self.trained_ratios.is_empty() {
            return bad("trained task set is empty".into());
        }
        for (i, f) in self.trained_families.iter().enumerate() {
            if self.trained_families[..i].contains(f) {
                return bad(format!("family {f} listed twice"));
            }
        }
        if self.trained_ratios.iter().any(|&r| !(r > 1.0) || !r.is_finite()) {
            return bad("trained ratios must exceed 1".into());
        }
        if self.trained_ratios.windows(2).any(|w| w[0] >= w[1]) {
            return bad("trained ratios must be strictly increasing".into());
        }
        Ok(())
    }

    /// Exact ratio, else the smallest trained ratio above it, else the largest.
    pub fn resolve_ratio(&self, acceleration: f64) -> usize {
        let rs = &self.trained_ratios;
        rs.iter()
            .position(|&r| r == acceleration)
            .or_else(|| rs.iter().position(|&r| r > acceleration))
            .unwrap_or(rs.len() - 1)
    }

    /// Exact family, else Cartesian random, else the first trained family.
    pub fn resolve_family(&self, family: MaskFamily) -> usize {
        let fs = &self.trained_families;
        fs.iter()
            .position(|&f| f == family)
            .or_else(|| fs.iter().position(|&f| f == MaskFamily::CartesianRandom))
            .unwrap_or(0)
    }

    pub fn pair_keys(&self) -> Vec<PairKey> {
        let fs = &self.trained_families;
        let rs = &self.trained_ratios;
        match self.variant {
            Variant::Type => rs.iter().map(|&r| PairKey::Ratio(r)).collect(),
            Variant::Level => fs.iter().map(|&f| PairKey::Family(f)).collect(),
            Variant::Split => fs
                .iter()
                .flat_map(|&f| rs.iter().map(move |&r| PairKey::Both(f, r)))
                .collect(),
        }
    }

    pub fn route(&self, label: &TaskLabel) -> PairKey {
        let f = self.trained_families[self.resolve_family(label.family)];
        let r = self.trained_ratios[self.resolve_ratio(label.acceleration)];
        match self.variant {
            Variant::Type => PairKey::Ratio(r),
            Variant::Level => PairKey::Family(f),
            Variant::Split => PairKey::Both(f, r),
        }
    }
}

/// Identifies one head-tail pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairKey {
    Ratio(f64),
    Family(MaskFamily),
    Both(MaskFamily, f64),
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairKey::Ratio(r) => write!(f, "x{r}"),
            PairKey::Family(m) => write!(f, "{}", m.short_name()),
            PairKey::Both(m, r) => write!(f, "{}_x{r}", m.short_name()),
        }
    }
}
