use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ModelConfig, ModelError};

/// Affine map `y = x W^T + b` with `W: out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Linear {
            w: Array2::zeros((out, inp)),
            b: Array1::zeros(out),
        }
    }

    fn uniform(out: usize, inp: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = (6.0 / (inp + out) as f64).sqrt();
        Linear {
            w: Array2::from_shape_fn((out, inp), |_| rng.gen_range(-a..a)),
            b: Array1::zeros(out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl LayerNormParams {
    pub fn identity(d: usize) -> Self {
        LayerNormParams {
            gamma: Array1::ones(d),
            beta: Array1::zeros(d),
        }
    }

    fn zeros(d: usize) -> Self {
        LayerNormParams {
            gamma: Array1::zeros(d),
            beta: Array1::zeros(d),
        }
    }
}

/// Multi-head self-attention projections.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

impl AttentionParams {
    pub fn zeros(d: usize) -> Self {
        AttentionParams {
            q: Linear::zeros(d, d),
            k: Linear::zeros(d, d),
            v: Linear::zeros(d, d),
            o: Linear::zeros(d, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub ln1: LayerNormParams,
    pub temporal: AttentionParams,
    pub ln2: LayerNormParams,
    pub spatial: AttentionParams,
    pub ln3: LayerNormParams,
    pub mlp: MlpParams,
}

impl BlockParams {
    pub fn zeros(d: usize, hidden: usize) -> Self {
        BlockParams {
            ln1: LayerNormParams::zeros(d),
            temporal: AttentionParams::zeros(d),
            ln2: LayerNormParams::zeros(d),
            spatial: AttentionParams::zeros(d),
            ln3: LayerNormParams::zeros(d),
            mlp: MlpParams {
                fc1: Linear::zeros(hidden, d),
                fc2: Linear::zeros(d, hidden),
            },
        }
    }

    fn init(d: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut attn = || AttentionParams {
            q: Linear::uniform(d, d, rng),
            k: Linear::uniform(d, d, rng),
            v: Linear::uniform(d, d, rng),
            o: Linear::uniform(d, d, rng),
        };
        let temporal = attn();
        let spatial = attn();
        BlockParams {
            ln1: LayerNormParams::identity(d),
            temporal,
            ln2: LayerNormParams::identity(d),
            spatial,
            ln3: LayerNormParams::identity(d),
            mlp: MlpParams {
                fc1: Linear::uniform(hidden, d, rng),
                fc2: Linear::uniform(d, hidden, rng),
            },
        }
    }
}

/// All trainable tensors. Gradients and optimiser state use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Patch projection M, `D x (P*P*3)`.
    pub patch_proj: Array2<f64>,
    /// Learned class token.
    pub cls: Array1<f64>,
    /// Positional embedding: row 0 is the class slot, row `1 + t*N + p` is patch `(p, t)`.
    pub pos: Array2<f64>,
    pub blocks: Vec<BlockParams>,
    pub ln_final: LayerNormParams,
    /// Evidence head, `D -> n_classes`.
    pub head: Linear,
    /// Imbalance head, `D -> 2` (penalisation, compensation).
    pub imbalance: Linear,
}

/// Read-only view of one named tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

macro_rules! visit_all {
    ($self:ident, $iter:ident, $as_slice:ident, $($mut_:tt)?) => {{
        fn lin<'a>(prefix: &str, l: &'a $($mut_)? Linear, out: &mut Vec<(String, Vec<usize>, &'a $($mut_)? [f64])>) {
            out.push((format!("{prefix}.w"), l.w.shape().to_vec(), l.w.$as_slice().unwrap()));
            out.push((format!("{prefix}.b"), l.b.shape().to_vec(), l.b.$as_slice().unwrap()));
        }
        fn ln<'a>(prefix: &str, l: &'a $($mut_)? LayerNormParams, out: &mut Vec<(String, Vec<usize>, &'a $($mut_)? [f64])>) {
            out.push((format!("{prefix}.gamma"), l.gamma.shape().to_vec(), l.gamma.$as_slice().unwrap()));
            out.push((format!("{prefix}.beta"), l.beta.shape().to_vec(), l.beta.$as_slice().unwrap()));
        }
        let mut out = Vec::new();
        out.push(("patch_proj".to_string(), $self.patch_proj.shape().to_vec(), $self.patch_proj.$as_slice().unwrap()));
        out.push(("cls".to_string(), $self.cls.shape().to_vec(), $self.cls.$as_slice().unwrap()));
        out.push(("pos".to_string(), $self.pos.shape().to_vec(), $self.pos.$as_slice().unwrap()));
        for (i, b) in $self.blocks.$iter().enumerate() {
            ln(&format!("blocks.{i}.ln1"), & $($mut_)? b.ln1, &mut out);
            for (name, a) in [("temporal", & $($mut_)? b.temporal), ("spatial", & $($mut_)? b.spatial)] {
                lin(&format!("blocks.{i}.{name}.q"), & $($mut_)? a.q, &mut out);
                lin(&format!("blocks.{i}.{name}.k"), & $($mut_)? a.k, &mut out);
                lin(&format!("blocks.{i}.{name}.v"), & $($mut_)? a.v, &mut out);
                lin(&format!("blocks.{i}.{name}.o"), & $($mut_)? a.o, &mut out);
            }
            ln(&format!("blocks.{i}.ln2"), & $($mut_)? b.ln2, &mut out);
            ln(&format!("blocks.{i}.ln3"), & $($mut_)? b.ln3, &mut out);
            lin(&format!("blocks.{i}.mlp.fc1"), & $($mut_)? b.mlp.fc1, &mut out);
            lin(&format!("blocks.{i}.mlp.fc2"), & $($mut_)? b.mlp.fc2, &mut out);
        }
        ln("ln_final", & $($mut_)? $self.ln_final, &mut out);
        lin("head", & $($mut_)? $self.head, &mut out);
        lin("imbalance", & $($mut_)? $self.imbalance, &mut out);
        out
    }};
}

impl ModelParams {
    /// Seeded scaled-uniform initialisation. The imbalance head starts at zero
    /// so both weights are exactly 1.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.dim;
        let small = 0.02;
        let patch_proj = Linear::uniform(d, config.patch_len(), &mut rng).w;
        let cls = Array1::from_shape_fn(d, |_| rng.gen_range(-small..small));
        let pos = Array2::from_shape_fn((config.tokens(), d), |_| rng.gen_range(-small..small));
        let blocks = (0..config.depth)
            .map(|_| BlockParams::init(d, config.hidden(), &mut rng))
            .collect();
        let head = Linear::uniform(config.n_classes, d, &mut rng);
        Ok(ModelParams {
            patch_proj,
            cls,
            pos,
            blocks,
            ln_final: LayerNormParams::identity(d),
            head,
            imbalance: Linear::zeros(2, d),
        })
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(config: &ModelConfig) -> Self {
        let d = config.dim;
        ModelParams {
            patch_proj: Array2::zeros((d, config.patch_len())),
            cls: Array1::zeros(d),
            pos: Array2::zeros((config.tokens(), d)),
            blocks: (0..config.depth).map(|_| BlockParams::zeros(d, config.hidden())).collect(),
            ln_final: LayerNormParams::zeros(d),
            head: Linear::zeros(config.n_classes, d),
            imbalance: Linear::zeros(2, d),
        }
    }

    /// Every tensor in a fixed order with a dotted name.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let raw: Vec<(String, Vec<usize>, &[f64])> = visit_all!(self, iter, as_slice,);
        raw.into_iter()
            .map(|(name, shape, data)| TensorRef { name, shape, data })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, Vec<usize>, &mut [f64])> {
        visit_all!(self, iter_mut, as_slice_mut, mut)
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        let src = other.tensors();
        for ((_, _, dst), s) in self.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s.data) {
                *d += scale * v;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}
