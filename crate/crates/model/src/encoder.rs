//! Forward and backward passes through embedding, encoder blocks and heads.

use bsa_core::ActionClass;
use ndarray::{s, Array1, Array2, Axis};
use serde::Serialize;

use crate::error::shape_err;
use crate::heads::{imbalance_head, DualHead, HeadComposition};
use crate::layers::{
    attention, attention_backward, gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward,
    sigmoid, softplus, AttentionCache, LayerNormCache, Neighbourhoods,
};
use crate::loss::{evidential_loss_with, EvidentialLoss, LossValue};
use crate::params::{BlockParams, LayerNormParams, ModelParams};
use crate::{ClipTensor, ModelConfig, ModelError};

/// Dirichlet view of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirichletOutput {
    /// Head evidence before reweighting.
    pub evidence: Vec<f64>,
    pub alpha: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// `n_classes / sum(alpha)`.
    pub uncertainty: f64,
    pub w_p: f64,
    pub w_c: f64,
}

impl DirichletOutput {
    pub fn from_evidence(
        evidence: Vec<f64>,
        w_p: f64,
        w_c: f64,
        dominant: usize,
        composition: &dyn HeadComposition,
    ) -> Self {
        let alpha: Vec<f64> = composition
            .adjust(&evidence, w_p, w_c, dominant)
            .into_iter()
            .map(|e| e + 1.0)
            .collect();
        let total: f64 = alpha.iter().sum();
        DirichletOutput {
            probabilities: alpha.iter().map(|a| a / total).collect(),
            uncertainty: alpha.len() as f64 / total,
            alpha,
            evidence,
            w_p,
            w_c,
        }
    }

    /// Highest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = j;
            }
        }
        best
    }
}

fn check_finite(x: &Array2<f64>, stage: &str) -> Result<(), ModelError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFiniteActivation { stage: stage.to_string() })
    }
}

/// Tokens `S x D`: class token (plus its positional slot) then `M x + e_pos`
/// for every patch in `(t, p)` order.
pub fn patchify_embed(clip: &ClipTensor, params: &ModelParams, config: &ModelConfig) -> Result<Array2<f64>, ModelError> {
    let patches = clip.patches(config)?;
    Ok(embed_patches(&patches, params))
}

fn embed_patches(patches: &Array2<f64>, params: &ModelParams) -> Array2<f64> {
    let d = params.cls.len();
    let mut x = Array2::zeros((patches.nrows() + 1, d));
    x.row_mut(0).assign(&params.cls);
    x.slice_mut(s![1.., ..]).assign(&patches.dot(&params.patch_proj.t()));
    x += &params.pos;
    x
}

struct BlockCache {
    ln1: LayerNormCache,
    temporal: AttentionCache,
    ln2: LayerNormCache,
    spatial: AttentionCache,
    ln3: LayerNormCache,
    h3: Array2<f64>,
    pre_act: Array2<f64>,
    act: Array2<f64>,
}

fn block_forward(x: &Array2<f64>, b: &BlockParams, nb: &Neighbourhoods, n_heads: usize) -> (Array2<f64>, BlockCache) {
    let (h1, ln1) = layer_norm(x, &b.ln1);
    let (a, temporal) = attention(&h1, &b.temporal, &nb.temporal, n_heads);
    let y = x + &a;
    let (h2, ln2) = layer_norm(&y, &b.ln2);
    let (sa, spatial) = attention(&h2, &b.spatial, &nb.spatial, n_heads);
    let z = &y + &sa;
    let (h3, ln3) = layer_norm(&z, &b.ln3);
    let pre_act = linear(&h3, &b.mlp.fc1);
    let act = pre_act.mapv(gelu);
    let out = &z + &linear(&act, &b.mlp.fc2);
    (
        out,
        BlockCache {
            ln1,
            temporal,
            ln2,
            spatial,
            ln3,
            h3,
            pre_act,
            act,
        },
    )
}

fn block_backward(
    dout: &Array2<f64>,
    c: &BlockCache,
    b: &BlockParams,
    g: &mut BlockParams,
    nb: &Neighbourhoods,
    n_heads: usize,
) -> Array2<f64> {
    let dact = linear_backward(&c.act, dout, &b.mlp.fc2, &mut g.mlp.fc2);
    let dpre = dact * &c.pre_act.mapv(gelu_grad);
    let dh3 = linear_backward(&c.h3, &dpre, &b.mlp.fc1, &mut g.mlp.fc1);
    let dz = dout + &layer_norm_backward(&dh3, &c.ln3, &b.ln3, &mut g.ln3);
    let dh2 = attention_backward(&dz, &c.spatial, &b.spatial, &mut g.spatial, &nb.spatial, n_heads);
    let dy = &dz + &layer_norm_backward(&dh2, &c.ln2, &b.ln2, &mut g.ln2);
    let dh1 = attention_backward(&dy, &c.temporal, &b.temporal, &mut g.temporal, &nb.temporal, n_heads);
    &dy + &layer_norm_backward(&dh1, &c.ln1, &b.ln1, &mut g.ln1)
}

/// One encoder block on an `(N*T + 1) x D` token matrix.
pub fn divided_attention_block(
    tokens: &Array2<f64>,
    block: &BlockParams,
    config: &ModelConfig,
) -> Result<Array2<f64>, ModelError> {
    let want = [config.tokens(), config.dim];
    if tokens.shape() != want {
        return Err(shape_err("tokens", &want, tokens.shape()));
    }
    let nb = Neighbourhoods::new(config.patches_per_frame(), config.frames);
    Ok(block_forward(tokens, block, &nb, config.n_heads).0)
}

/// Everything the backward pass needs.
pub struct ForwardCache {
    patches: Array2<f64>,
    nb: Neighbourhoods,
    blocks: Vec<BlockCache>,
    ln_final: LayerNormCache,
    theta: Array1<f64>,
    raw: Vec<f64>,
    pub output: DirichletOutput,
}

impl ForwardCache {
    /// Keys scored per token, per block: `(temporal, spatial)`.
    pub fn comparisons(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        self.blocks
            .iter()
            .map(|b| (b.temporal.comparisons.clone(), b.spatial.comparisons.clone()))
            .collect()
    }

    /// Class-token feature after the final normalisation.
    pub fn theta(&self) -> &Array1<f64> {
        &self.theta
    }
}

pub fn forward_cached(
    clip: &ClipTensor,
    params: &ModelParams,
    config: &ModelConfig,
    composition: &dyn HeadComposition,
) -> Result<ForwardCache, ModelError> {
    config.validate()?;
    let patches = clip.patches(config)?;
    let nb = Neighbourhoods::new(config.patches_per_frame(), config.frames);
    let mut x = embed_patches(&patches, params);
    check_finite(&x, "embedding")?;
    let mut blocks = Vec::with_capacity(params.blocks.len());
    for (i, b) in params.blocks.iter().enumerate() {
        let (out, cache) = block_forward(&x, b, &nb, config.n_heads);
        check_finite(&out, &format!("block {i}"))?;
        blocks.push(cache);
        x = out;
    }
    let cls_row = x.slice(s![0..1, ..]).to_owned();
    let (theta, ln_final) = layer_norm(&cls_row, &params.ln_final);
    let theta = theta.row(0).to_owned();
    let raw: Vec<f64> = (params.head.w.dot(&theta) + &params.head.b).to_vec();
    let evidence: Vec<f64> = raw.iter().map(|&r| softplus(r)).collect();
    let (w_p, w_c) = imbalance_head(theta.view(), &params.imbalance);
    let output = DirichletOutput::from_evidence(evidence, w_p, w_c, config.dominant_index, composition);
    if !output.alpha.iter().all(|a| a.is_finite()) || !w_p.is_finite() || !w_c.is_finite() {
        return Err(ModelError::NonFiniteActivation { stage: "heads".into() });
    }
    Ok(ForwardCache {
        patches,
        nb,
        blocks,
        ln_final,
        theta,
        raw,
        output,
    })
}

/// Forward pass with the dual-head composition.
pub fn forward(clip: &ClipTensor, params: &ModelParams, config: &ModelConfig) -> Result<DirichletOutput, ModelError> {
    forward_with(clip, params, config, &DualHead)
}

pub fn forward_with(
    clip: &ClipTensor,
    params: &ModelParams,
    config: &ModelConfig,
    composition: &dyn HeadComposition,
) -> Result<DirichletOutput, ModelError> {
    Ok(forward_cached(clip, params, config, composition)?.output)
}

/// Class index with the highest probability, lowest index on ties.
pub fn predict(clip: &ClipTensor, params: &ModelParams, config: &ModelConfig) -> Result<usize, ModelError> {
    Ok(forward(clip, params, config)?.argmax())
}

/// [`predict`] mapped onto the action taxonomy; needs a ten-class model.
pub fn predict_action(clip: &ClipTensor, params: &ModelParams, config: &ModelConfig) -> Result<ActionClass, ModelError> {
    let k = predict(clip, params, config)?;
    ActionClass::from_index(k).ok_or(ModelError::LabelOutOfRange {
        label: k,
        n_classes: bsa_core::NUM_CLASSES,
    })
}

/// Parameter gradients given `dL/d alpha`.
pub fn backward(
    cache: &ForwardCache,
    d_alpha: &[f64],
    params: &ModelParams,
    config: &ModelConfig,
    composition: &dyn HeadComposition,
) -> ModelParams {
    let mut g = ModelParams::zeros_like(config);
    let out = &cache.output;
    let (de, dwp, dwc) = composition.backward(d_alpha, &out.evidence, out.w_p, out.w_c, config.dominant_index);

    // evidence head
    let dr = Array1::from_iter(de.iter().zip(&cache.raw).map(|(d, &r)| d * sigmoid(r)));
    let theta2 = cache.theta.view().insert_axis(Axis(0)).to_owned();
    let dr2 = dr.view().insert_axis(Axis(0)).to_owned();
    let mut dtheta = linear_backward(&theta2, &dr2, &params.head, &mut g.head);

    // imbalance head: w = 2 sigmoid(z), dw/dz = w (1 - w/2)
    let dz = Array1::from_vec(vec![dwp * out.w_p * (1.0 - out.w_p / 2.0), dwc * out.w_c * (1.0 - out.w_c / 2.0)]);
    let dz2 = dz.view().insert_axis(Axis(0)).to_owned();
    dtheta += &linear_backward(&theta2, &dz2, &params.imbalance, &mut g.imbalance);

    let dcls = layer_norm_backward(&dtheta, &cache.ln_final, &params.ln_final, &mut g.ln_final);
    let mut dx = Array2::zeros((config.tokens(), config.dim));
    dx.row_mut(0).assign(&dcls.row(0));
    for (i, (b, c)) in params.blocks.iter().zip(&cache.blocks).enumerate().rev() {
        dx = block_backward(&dx, c, b, &mut g.blocks[i], &cache.nb, config.n_heads);
    }

    g.pos += &dx;
    g.cls += &dx.row(0);
    g.patch_proj += &dx.slice(s![1.., ..]).t().dot(&cache.patches);
    g
}

/// Loss on one labelled clip with its full parameter gradient.
#[allow(clippy::too_many_arguments)]
pub fn loss_and_grad(
    clip: &ClipTensor,
    target: usize,
    params: &ModelParams,
    config: &ModelConfig,
    composition: &dyn HeadComposition,
    risk: &dyn EvidentialLoss,
    epoch: usize,
    anneal_epochs: usize,
) -> Result<(LossValue, ModelParams, DirichletOutput), ModelError> {
    let cache = forward_cached(clip, params, config, composition)?;
    let loss = evidential_loss_with(risk, &cache.output.alpha, target, epoch, anneal_epochs)?;
    let grads = backward(&cache, &loss.grad, params, config, composition);
    Ok((loss, grads, cache.output))
}

/// Identity normalisation, handy for oracles.
pub fn identity_norm(d: usize) -> LayerNormParams {
    LayerNormParams::identity(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::SingleHead;
    use ndarray::Array4;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> ModelConfig {
        ModelConfig {
            patch: 2,
            dim: 8,
            depth: 1,
            n_heads: 2,
            n_classes: 10,
            dominant_index: 3,
            frames: 2,
            height: 4,
            width: 4,
            mlp_ratio: 2,
        }
    }

    fn fixture_clip(seed: u64) -> ClipTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ClipTensor::new(Array4::from_shape_fn((2, 4, 4, 3), |_| rng.gen())).unwrap()
    }

    #[test]
    fn unit_weights_match_single_head() {
        let cfg = small();
        let params = ModelParams::init(&cfg, 3).unwrap();
        let clip = fixture_clip(1);
        let dual = forward(&clip, &params, &cfg).unwrap();
        let single = forward_with(&clip, &params, &cfg, &SingleHead).unwrap();
        assert_eq!((dual.w_p, dual.w_c), (1.0, 1.0));
        assert_eq!(dual.probabilities, single.probabilities);
    }

    #[test]
    fn hand_applied_reweighting() {
        let mut e = vec![0.0; 10];
        e[..3].copy_from_slice(&[4.0, 1.0, 1.0]);
        let out = DirichletOutput::from_evidence(e, 0.5, 1.0, 0, &DualHead);
        let mut want = vec![1.0; 10];
        want[..3].copy_from_slice(&[3.0, 2.0, 2.0]);
        assert_eq!(out.alpha, want);
        for (p, a) in out.probabilities.iter().zip(&want) {
            assert!((p - a / 14.0).abs() < 1e-15);
        }
    }

    #[test]
    fn vacuous_evidence_is_uniform() {
        let out = DirichletOutput::from_evidence(vec![0.0; 10], 1.3, 0.7, 3, &DualHead);
        assert!(out.alpha.iter().all(|&a| a == 1.0));
        assert!(out.probabilities.iter().all(|&p| (p - 0.1).abs() < 1e-15));
        assert_eq!(out.uncertainty, 1.0);
        assert_eq!(out.argmax(), 0);
    }

    #[test]
    fn one_hot_probabilities_pick_their_class() {
        let mut e = vec![0.0; 10];
        e[3] = 1e6;
        assert_eq!(DirichletOutput::from_evidence(e, 1.0, 1.0, 3, &DualHead).argmax(), 3);
    }

    #[test]
    fn predict_is_argmax_of_forward() {
        let cfg = small();
        let mut params = ModelParams::init(&cfg, 9).unwrap();
        params.head.b[7] = 0.4;
        for seed in 0..5 {
            let clip = fixture_clip(seed);
            let out = forward(&clip, &params, &cfg).unwrap();
            let sum: f64 = out.probabilities.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(out.uncertainty > 0.0 && out.uncertainty <= 1.0);
            let best = (0..10)
                .max_by(|&a, &b| out.probabilities[a].total_cmp(&out.probabilities[b]).then(b.cmp(&a)))
                .unwrap();
            assert_eq!(predict(&clip, &params, &cfg).unwrap(), best);
        }
    }

    #[test]
    fn non_finite_input_is_reported() {
        let cfg = small();
        let params = ModelParams::init(&cfg, 0).unwrap();
        let mut clip = fixture_clip(0);
        clip.frames[[0, 0, 0, 0]] = f64::NAN;
        assert!(matches!(
            forward(&clip, &params, &cfg),
            Err(ModelError::NonFiniteActivation { .. })
        ));
    }

    proptest! {
        #[test]
        fn dominant_probability_rises_with_penalisation_weight(
            e in proptest::collection::vec(0.0f64..20.0, 10),
            w_c in 0.05f64..1.95,
            w_lo in 0.05f64..1.9,
            step in 0.01f64..0.1,
        ) {
            prop_assume!(e[3] > 1e-3);
            let lo = DirichletOutput::from_evidence(e.clone(), w_lo, w_c, 3, &DualHead);
            let hi = DirichletOutput::from_evidence(e, w_lo + step, w_c, 3, &DualHead);
            prop_assert!(hi.probabilities[3] > lo.probabilities[3]);
        }
    }
}
