use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::numerics::{Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// `U(−1/√fan_in, 1/√fan_in)`
    Uniform { fan_in: usize },
    /// Normal with std 0.02, resampled outside ±2 std.
    TruncNormal,
    Zeros,
    Ones,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn instantiate<T: Element>(&self, rng: &mut impl Rng) -> Tensor<T> {
        let n = self.numel();
        let data = match self.init {
            Init::Zeros => vec![T::zero(); n],
            Init::Ones => vec![T::one(); n],
            Init::Uniform { fan_in } => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect()
            }
            Init::TruncNormal => (0..n)
                .map(|_| loop {
                    let z: f64 = StandardNormal.sample(rng);
                    if z.abs() <= 2.0 {
                        break T::of(0.02 * z);
                    }
                })
                .collect(),
        };
        Tensor::new(self.dims.clone(), data).expect("param spec dims are positive")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvP {
    pub w: usize,
    pub b: usize,
}

pub type LinearP = ConvP;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormP {
    pub g: usize,
    pub b: usize,
}

/// Collects parameter specs in declaration order; indices are tags.
#[derive(Default)]
pub struct SpecBuilder {
    pub specs: Vec<ParamSpec>,
}

impl SpecBuilder {
    pub fn push(&mut self, name: impl Into<String>, dims: Vec<usize>, init: Init) -> usize {
        self.specs.push(ParamSpec {
            name: name.into(),
            dims,
            init,
        });
        self.specs.len() - 1
    }

    pub fn conv(&mut self, name: &str, out: usize, inp: usize, k: usize) -> ConvP {
        let fan_in = inp * k * k;
        ConvP {
            w: self.push(format!("{name}.w"), vec![out, inp, k, k], Init::Uniform { fan_in }),
            b: self.push(format!("{name}.b"), vec![out], Init::Uniform { fan_in }),
        }
    }

    pub fn linear(&mut self, name: &str, out: usize, inp: usize) -> LinearP {
        ConvP {
            w: self.push(format!("{name}.w"), vec![out, inp], Init::TruncNormal),
            b: self.push(format!("{name}.b"), vec![out], Init::Zeros),
        }
    }

    pub fn norm(&mut self, name: &str, d: usize) -> NormP {
        NormP {
            g: self.push(format!("{name}.g"), vec![d], Init::Ones),
            b: self.push(format!("{name}.b"), vec![d], Init::Zeros),
        }
    }
}
