//! The multi-task reconstruction network: task-specific heads and tails
//! around a shared windowed-attention encoder and a prompt decoder.

mod config;
mod label;
mod net;
mod params;
mod window;

pub use config::{ModelConfig, PairKey, Variant, DEFAULT_RATIOS};
pub use label::TaskLabel;
pub use net::{build_layout, param_count, Layout, Mode, Model, ParamCounts};
pub use params::{Init, ParamSpec};
pub use window::{window_layout, WindowLayout};
