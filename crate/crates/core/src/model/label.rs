use std::fmt;

use serde::{Deserialize, Serialize};

use crate::degradation::MaskFamily;
use crate::error::{Error, Result};

/// Sampling configuration an image was degraded with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskLabel {
    pub family: MaskFamily,
    pub acceleration: f64,
}

impl TaskLabel {
    pub fn new(family: MaskFamily, acceleration: f64) -> Result<Self> {
        if !(acceleration > 1.0) || !acceleration.is_finite() {
            return Err(Error::Invalid(format!("acceleration must exceed 1, got {acceleration}")));
        }
        Ok(TaskLabel { family, acceleration })
    }
}

impl fmt::Display for TaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}x", self.family.short_name(), self.acceleration)
    }
}
