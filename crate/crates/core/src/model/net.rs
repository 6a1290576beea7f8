use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{ConvP, Init, LinearP, NormP, ParamSpec, SpecBuilder};
use super::window::window_layout;
use super::{ModelConfig, PairKey, TaskLabel};
use crate::error::{Error, Result};
use crate::numerics::{Element, Graph, Tensor, Var};

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct HeadP {
    pub stem: ConvP,
    pub blocks: [(ConvP, ConvP); 2],
}

#[derive(Clone, Debug)]
pub struct TailP {
    pub up: ConvP,
    pub out: ConvP,
}

#[derive(Clone, Debug)]
pub struct AttnP {
    pub q: LinearP,
    pub k: LinearP,
    pub v: LinearP,
    pub o: LinearP,
}

#[derive(Clone, Debug)]
pub struct MlpP {
    pub fc1: LinearP,
    pub fc2: LinearP,
}

#[derive(Clone, Debug)]
pub struct EncoderBlockP {
    pub norm1: NormP,
    pub attn: AttnP,
    pub rel_bias: usize,
    pub norm2: NormP,
    pub mlp: MlpP,
    pub shifted: bool,
}

#[derive(Clone, Debug)]
pub struct DecoderLayerP {
    pub self_norm: NormP,
    pub self_attn: AttnP,
    pub p2i_norm_q: NormP,
    pub p2i_norm_kv: NormP,
    pub p2i: AttnP,
    pub mlp_norm: NormP,
    pub mlp: MlpP,
    pub i2p_norm_q: NormP,
    pub i2p_norm_kv: NormP,
    pub i2p: AttnP,
}

#[derive(Clone, Debug)]
pub struct PromptP {
    pub families: usize,
    pub ratios: usize,
    pub proj: LinearP,
}

/// Parameter indices of every component.
#[derive(Clone, Debug)]
pub struct Layout {
    pub pairs: Vec<PairKey>,
    pub heads: Vec<HeadP>,
    pub tails: Vec<TailP>,
    pub patch: ConvP,
    pub pos: usize,
    pub prompt: PromptP,
    pub encoder: Vec<EncoderBlockP>,
    pub decoder: Vec<DecoderLayerP>,
}

fn attn_spec(b: &mut SpecBuilder, name: &str, d: usize) -> AttnP {
    AttnP {
        q: b.linear(&format!("{name}.q"), d, d),
        k: b.linear(&format!("{name}.k"), d, d),
        v: b.linear(&format!("{name}.v"), d, d),
        o: b.linear(&format!("{name}.o"), d, d),
    }
}

fn mlp_spec(b: &mut SpecBuilder, name: &str, d: usize, ratio: usize) -> MlpP {
    MlpP {
        fc1: b.linear(&format!("{name}.fc1"), d * ratio, d),
        fc2: b.linear(&format!("{name}.fc2"), d, d * ratio),
    }
}

/// Parameter layout and specs for `config`, in tag order.
pub fn build_layout(config: &ModelConfig) -> Result<(Layout, Vec<ParamSpec>)> {
    config.validate()?;
    let c = config.head_channels;
    let d = config.embed_dim;
    let p = config.patch_size;
    let w = config.window_size;
    let mut b = SpecBuilder::default();
    let pairs = config.pair_keys();
    let mut heads = Vec::new();
    let mut tails = Vec::new();
    for key in &pairs {
        let n = format!("head.{key}");
        heads.push(HeadP {
            stem: b.conv(&format!("{n}.stem"), c, 1, 3),
            blocks: [0, 1].map(|i| {
                (
                    b.conv(&format!("{n}.res{i}.conv1"), c, c, 5),
                    b.conv(&format!("{n}.res{i}.conv2"), c, c, 5),
                )
            }),
        });
        let n = format!("tail.{key}");
        let up = b.conv(&format!("{n}.up"), p * p * c, d, 3);
        let out = ConvP {
            w: b.push(format!("{n}.out.w"), vec![1, c, 3, 3], Init::Uniform { fan_in: c * 9 }),
            b: b.push(format!("{n}.out.b"), vec![1], Init::Zeros),
        };
        tails.push(TailP { up, out });
    }
    let patch = b.conv("patch.proj", d, c, p);
    let pos = b.push("patch.pos", vec![config.tokens(), d], Init::TruncNormal);
    let prompt = PromptP {
        families: b.push("prompt.family", vec![config.trained_families.len(), d], Init::TruncNormal),
        ratios: b.push("prompt.ratio", vec![config.trained_ratios.len(), d], Init::TruncNormal),
        proj: b.linear("prompt.proj", d, d),
    };
    let encoder = (0..config.encoder_depth)
        .map(|i| {
            let n = format!("encoder.{i}");
            EncoderBlockP {
                norm1: b.norm(&format!("{n}.norm1"), d),
                attn: attn_spec(&mut b, &format!("{n}.attn"), d),
                rel_bias: b.push(
                    format!("{n}.rel_bias"),
                    vec![config.num_heads, (2 * w - 1) * (2 * w - 1)],
                    Init::TruncNormal,
                ),
                norm2: b.norm(&format!("{n}.norm2"), d),
                mlp: mlp_spec(&mut b, &format!("{n}.mlp"), d, config.mlp_ratio),
                shifted: i % 2 == 1 && config.shift_size > 0,
            }
        })
        .collect();
    let decoder = (0..config.decoder_depth)
        .map(|i| {
            let n = format!("decoder.{i}");
            DecoderLayerP {
                self_norm: b.norm(&format!("{n}.self_norm"), d),
                self_attn: attn_spec(&mut b, &format!("{n}.self_attn"), d),
                p2i_norm_q: b.norm(&format!("{n}.p2i_norm_q"), d),
                p2i_norm_kv: b.norm(&format!("{n}.p2i_norm_kv"), d),
                p2i: attn_spec(&mut b, &format!("{n}.p2i"), d),
                mlp_norm: b.norm(&format!("{n}.mlp_norm"), d),
                mlp: mlp_spec(&mut b, &format!("{n}.mlp"), d, config.mlp_ratio),
                i2p_norm_q: b.norm(&format!("{n}.i2p_norm_q"), d),
                i2p_norm_kv: b.norm(&format!("{n}.i2p_norm_kv"), d),
                i2p: attn_spec(&mut b, &format!("{n}.i2p"), d),
            }
        })
        .collect();
    let layout = Layout {
        pairs,
        heads,
        tails,
        patch,
        pos,
        prompt,
        encoder,
        decoder,
    };
    Ok((layout, b.specs))
}

/// Exact parameter counts per component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParamCounts {
    pub pairs: usize,
    pub heads: usize,
    pub tails: usize,
    pub patchify: usize,
    pub prompt: usize,
    pub encoder: usize,
    pub decoder: usize,
}

impl ParamCounts {
    pub fn total(&self) -> usize {
        self.heads + self.tails + self.patchify + self.prompt + self.encoder + self.decoder
    }
}

pub fn param_count(config: &ModelConfig) -> Result<ParamCounts> {
    let (layout, specs) = build_layout(config)?;
    let mut c = ParamCounts {
        pairs: layout.pairs.len(),
        ..Default::default()
    };
    for s in &specs {
        let slot = match s.name.split('.').next().unwrap_or("") {
            "head" => &mut c.heads,
            "tail" => &mut c.tails,
            "patch" => &mut c.patchify,
            "prompt" => &mut c.prompt,
            "encoder" => &mut c.encoder,
            _ => &mut c.decoder,
        };
        *slot += s.numel();
    }
    Ok(c)
}

/// Whether parameters enter the graph as differentiable leaves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Clone, Debug)]
struct WindowTensors<T: Element> {
    mask: Tensor<T>,
    bias_index: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Model<T: Element = f32> {
    config: ModelConfig,
    layout: Layout,
    specs: Vec<ParamSpec>,
    params: Vec<Tensor<T>>,
    windows: [WindowTensors<T>; 2],
}

impl<T: Element> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let (layout, specs) = build_layout(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = specs.iter().map(|s| s.instantiate(&mut rng)).collect();
        Self::assemble(config, layout, specs, params)
    }

    /// Rebuilds a model from named tensors (in any order).
    pub fn from_named(config: ModelConfig, mut named: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let (layout, specs) = build_layout(&config)?;
        let mut params = Vec::with_capacity(specs.len());
        for s in &specs {
            let pos = named
                .iter()
                .position(|(n, _)| *n == s.name)
                .ok_or_else(|| Error::MissingTensor(s.name.clone()))?;
            let (_, t) = named.swap_remove(pos);
            if t.dims() != s.dims.as_slice() {
                return Err(Error::DimMismatch {
                    name: s.name.clone(),
                    expected: s.dims.clone(),
                    found: t.dims().to_vec(),
                });
            }
            params.push(t);
        }
        if let Some((n, _)) = named.first() {
            return Err(Error::CorruptHeader(format!("unexpected tensor `{n}` for this configuration")));
        }
        Self::assemble(config, layout, specs, params)
    }

    fn assemble(config: ModelConfig, layout: Layout, specs: Vec<ParamSpec>, params: Vec<Tensor<T>>) -> Result<Self> {
        let g = config.grid();
        let n = config.tokens();
        let make = |shift: usize| -> Result<WindowTensors<T>> {
            let l = window_layout(g, config.window_size, shift, config.num_heads);
            Ok(WindowTensors {
                mask: Tensor::new([n, n], l.mask.into_iter().map(T::of).collect())?,
                bias_index: l.bias_index,
            })
        };
        let windows = [make(0)?, make(config.shift_size)?];
        Ok(Model {
            config,
            layout,
            specs,
            params,
            windows,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn param_name(&self, idx: usize) -> &str {
        &self.specs[idx].name
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.specs.iter().map(|s| s.name.as_str()).zip(&self.params)
    }

    pub fn cast<U: Element>(&self) -> Model<U> {
        let params = self.params.iter().map(|p| p.cast()).collect();
        Model::assemble(self.config.clone(), self.layout.clone(), self.specs.clone(), params)
            .expect("layout already validated")
    }

    pub fn pair_index(&self, key: &PairKey) -> Result<usize> {
        self.layout
            .pairs
            .iter()
            .position(|k| k == key)
            .ok_or_else(|| Error::UnknownPair(key.to_string()))
    }

    fn p<'a>(&'a self, g: &mut Graph<'a, T>, idx: usize, mode: Mode) -> Var {
        match mode {
            Mode::Train => g.param(&self.params[idx], idx),
            Mode::Infer => g.frozen(&self.params[idx]),
        }
    }

    fn conv<'a>(&'a self, g: &mut Graph<'a, T>, x: Var, c: ConvP, stride: usize, pad: usize, mode: Mode) -> Result<Var> {
        let (w, b) = (self.p(g, c.w, mode), self.p(g, c.b, mode));
        g.conv2d(x, w, b, stride, pad)
    }

    fn linear<'a>(&'a self, g: &mut Graph<'a, T>, x: Var, l: LinearP, mode: Mode) -> Result<Var> {
        let (w, b) = (self.p(g, l.w, mode), self.p(g, l.b, mode));
        g.linear(x, w, b)
    }

    fn norm<'a>(&'a self, g: &mut Graph<'a, T>, x: Var, n: NormP, mode: Mode) -> Result<Var> {
        let (gamma, beta) = (self.p(g, n.g, mode), self.p(g, n.b, mode));
        g.layer_norm(x, gamma, beta, LN_EPS)
    }

    fn mlp<'a>(&'a self, g: &mut Graph<'a, T>, x: Var, m: &MlpP, mode: Mode) -> Result<Var> {
        let h = self.linear(g, x, m.fc1, mode)?;
        let h = g.gelu(h);
        self.linear(g, h, m.fc2, mode)
    }

    #[allow(clippy::too_many_arguments)]
    fn attend<'a>(
        &'a self,
        g: &mut Graph<'a, T>,
        xq: Var,
        xkv: Var,
        a: &AttnP,
        bias: Option<Var>,
        mask: Option<&'a Tensor<T>>,
        mode: Mode,
    ) -> Result<Var> {
        let q = self.linear(g, xq, a.q, mode)?;
        let k = self.linear(g, xkv, a.k, mode)?;
        let v = self.linear(g, xkv, a.v, mode)?;
        let o = g.attention(q, k, v, self.config.num_heads, bias, mask)?;
        self.linear(g, o, a.o, mode)
    }

    /// `[1,S,S]` → `[C,S,S]`: 3×3 stem then two 5×5 residual blocks.
    pub fn head_forward<'a>(&'a self, g: &mut Graph<'a, T>, key: &PairKey, x: Var, mode: Mode) -> Result<Var> {
        let h = &self.layout.heads[self.pair_index(key)?];
        let mut f = self.conv(g, x, h.stem, 1, 1, mode)?;
        for &(c1, c2) in &h.blocks {
            let r = self.conv(g, f, c1, 1, 2, mode)?;
            let r = g.relu(r);
            let r = self.conv(g, r, c2, 1, 2, mode)?;
            f = g.add(f, r)?;
        }
        Ok(f)
    }

    /// `[C,S,S]` → `[N,D]` tokens (row-major over the grid) plus positions.
    pub fn patchify<'a>(&'a self, g: &mut Graph<'a, T>, features: Var, mode: Mode) -> Result<Var> {
        let (p, d, n) = (self.config.patch_size, self.config.embed_dim, self.config.tokens());
        let t = self.conv(g, features, self.layout.patch, p, 0, mode)?;
        let t = g.reshape(t, [d, n])?;
        let t = g.transpose(t)?;
        let pos = self.p(g, self.layout.pos, mode);
        g.add(t, pos)
    }

    /// `[N,D]` → `[D,g,g]`.
    pub fn unpatchify<'a>(&'a self, g: &mut Graph<'a, T>, tokens: Var) -> Result<Var> {
        let t = g.transpose(tokens)?;
        let grid = self.config.grid();
        g.reshape(t, [self.config.embed_dim, grid, grid])
    }

    /// Family token and acceleration token, `[2,D]`.
    pub fn encode_prompt<'a>(&'a self, g: &mut Graph<'a, T>, label: &TaskLabel, mode: Mode) -> Result<Var> {
        let pp = &self.layout.prompt;
        let fam = self.p(g, pp.families, mode);
        let fam = g.gather_rows(fam, vec![self.config.resolve_family(label.family)])?;
        let rat = self.p(g, pp.ratios, mode);
        let rat = g.gather_rows(rat, vec![self.config.resolve_ratio(label.acceleration)])?;
        let both = g.concat_rows(&[fam, rat])?;
        self.linear(g, both, pp.proj, mode)
    }

    pub fn encoder_block<'a>(&'a self, g: &mut Graph<'a, T>, x: Var, block: usize, mode: Mode) -> Result<Var> {
        let b = &self.layout.encoder[block];
        let win = &self.windows[b.shifted as usize];
        let n = self.config.tokens();
        let h = self.norm(g, x, b.norm1, mode)?;
        let table = self.p(g, b.rel_bias, mode);
        let bias = g.gather_flat(table, win.bias_index.clone(), vec![self.config.num_heads, n, n])?;
        let a = self.attend(g, h, h, &b.attn, Some(bias), Some(&win.mask), mode)?;
        let x = g.add(x, a)?;
        let h = self.norm(g, x, b.norm2, mode)?;
        let m = self.mlp(g, h, &b.mlp, mode)?;
        g.add(x, m)
    }

    pub fn encoder_forward<'a>(&'a self, g: &mut Graph<'a, T>, mut x: Var, mode: Mode) -> Result<Var> {
        for i in 0..self.layout.encoder.len() {
            x = self.encoder_block(g, x, i, mode)?;
        }
        Ok(x)
    }

    /// Refines image tokens `[N,D]` against prompt tokens `[2,D]`.
    pub fn decoder_forward<'a>(&'a self, g: &mut Graph<'a, T>, mut x: Var, mut prompts: Var, mode: Mode) -> Result<Var> {
        for l in &self.layout.decoder {
            let pn = self.norm(g, prompts, l.self_norm, mode)?;
            let a = self.attend(g, pn, pn, &l.self_attn, None, None, mode)?;
            prompts = g.add(prompts, a)?;

            let pq = self.norm(g, prompts, l.p2i_norm_q, mode)?;
            let xk = self.norm(g, x, l.p2i_norm_kv, mode)?;
            let a = self.attend(g, pq, xk, &l.p2i, None, None, mode)?;
            prompts = g.add(prompts, a)?;

            let pn = self.norm(g, prompts, l.mlp_norm, mode)?;
            let m = self.mlp(g, pn, &l.mlp, mode)?;
            prompts = g.add(prompts, m)?;

            let xq = self.norm(g, x, l.i2p_norm_q, mode)?;
            let pk = self.norm(g, prompts, l.i2p_norm_kv, mode)?;
            let a = self.attend(g, xq, pk, &l.i2p, None, None, mode)?;
            x = g.add(x, a)?;
        }
        Ok(x)
    }

    /// `[D,g,g]` → `[1,S,S]`. `skip` is the head output the upsampled
    /// features are added to before the final convolution.
    pub fn tail_forward<'a>(
        &'a self,
        g: &mut Graph<'a, T>,
        key: &PairKey,
        grid: Var,
        skip: Var,
        mode: Mode,
    ) -> Result<Var> {
        let t = &self.layout.tails[self.pair_index(key)?];
        let u = self.conv(g, grid, t.up, 1, 1, mode)?;
        let u = g.pixel_shuffle(u, self.config.patch_size)?;
        let u = g.add(u, skip)?;
        let u = g.relu(u);
        self.conv(g, u, t.out, 1, 1, mode)
    }

    /// Full reconstruction of a `[1,S,S]` image degraded under `label`:
    /// the input plus the routed tail's output.
    pub fn forward<'a>(&'a self, g: &mut Graph<'a, T>, image: Var, label: &TaskLabel, mode: Mode) -> Result<Var> {
        let s = self.config.image_size;
        if g.value(image).dims() != [1, s, s] {
            return Err(Error::shape(
                "forward",
                format!("image {:?}, model expects [1,{s},{s}]", g.value(image).dims()),
            ));
        }
        let key = self.config.route(label);
        let f = self.head_forward(g, &key, image, mode)?;
        let t = self.patchify(g, f, mode)?;
        let t = self.encoder_forward(g, t, mode)?;
        let prompts = self.encode_prompt(g, label, mode)?;
        let t = self.decoder_forward(g, t, prompts, mode)?;
        let grid = self.unpatchify(g, t)?;
        let correction = self.tail_forward(g, &key, grid, f, mode)?;
        // the network predicts a correction to the zero-filled input
        g.add(correction, image)
    }

    pub fn predict(&self, image: &Tensor<T>, label: &TaskLabel) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let x = g.frozen(image);
        let y = self.forward(&mut g, x, label, Mode::Infer)?;
        Ok(g.value(y).clone())
    }
}
