//! Row-wise building blocks with hand-written backward passes. Activations are
//! `rows x features` matrices; parameter gradients accumulate into a
//! same-shaped parameter struct.

use ndarray::{Array1, Array2, Axis, Zip};

use crate::params::{AttentionParams, LayerNormParams, Linear};

pub const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

pub fn linear(x: &Array2<f64>, l: &Linear) -> Array2<f64> {
    x.dot(&l.w.t()) + &l.b
}

/// Accumulates parameter gradients and returns `dL/dx`.
pub fn linear_backward(x: &Array2<f64>, dy: &Array2<f64>, l: &Linear, grad: &mut Linear) -> Array2<f64> {
    grad.w += &dy.t().dot(x);
    grad.b += &dy.sum_axis(Axis(0));
    dy.dot(&l.w)
}

pub struct LayerNormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

pub fn layer_norm(x: &Array2<f64>, p: &LayerNormParams) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mu = row.sum() / d;
        row -= mu;
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *inv = 1.0 / (var + LN_EPS).sqrt();
        row *= *inv;
    }
    let y = &xhat * &p.gamma + &p.beta;
    (y, LayerNormCache { xhat, inv_std })
}

pub fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LayerNormCache,
    p: &LayerNormParams,
    grad: &mut LayerNormParams,
) -> Array2<f64> {
    grad.gamma += &(dy * &cache.xhat).sum_axis(Axis(0));
    grad.beta += &dy.sum_axis(Axis(0));
    let dxhat = dy * &p.gamma;
    let d = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let g = dxhat.row(i);
        let xh = cache.xhat.row(i);
        let mean_g = g.sum() / d;
        let mean_gx = g.dot(&xh) / d;
        let inv = cache.inv_std[i];
        Zip::from(dx.row_mut(i))
            .and(&g)
            .and(&xh)
            .for_each(|o, &gi, &xi| *o = inv * (gi - mean_g - xi * mean_gx));
    }
    dx
}

/// Tanh-approximated GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Which keys each query token may see.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbourhoods {
    pub temporal: Vec<Vec<usize>>,
    pub spatial: Vec<Vec<usize>>,
}

impl Neighbourhoods {
    /// Token 0 is the class token and token `1 + t*n + p` is patch `p` of frame `t`.
    /// Patches see the class token plus the same patch in every frame
    /// (temporal) or every patch of the same frame (spatial). The class token
    /// sees everything in both stages.
    pub fn new(n: usize, t: usize) -> Self {
        let s = n * t + 1;
        let all: Vec<usize> = (0..s).collect();
        let mut temporal = vec![all.clone()];
        let mut spatial = vec![all];
        for ti in 0..t {
            for p in 0..n {
                let mut tn = vec![0];
                tn.extend((0..t).map(|tt| 1 + tt * n + p));
                temporal.push(tn);
                let mut sn = vec![0];
                sn.extend((0..n).map(|pp| 1 + ti * n + pp));
                spatial.push(sn);
            }
        }
        Neighbourhoods { temporal, spatial }
    }
}

pub struct AttentionCache {
    h: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Softmax weights, `[query][head * |nb| + j]`.
    weights: Vec<Vec<f64>>,
    ctx: Array2<f64>,
    /// Keys scored per query token.
    pub comparisons: Vec<usize>,
}

/// Multi-head attention restricted to `nb`.
pub fn attention(
    h: &Array2<f64>,
    p: &AttentionParams,
    nb: &[Vec<usize>],
    n_heads: usize,
) -> (Array2<f64>, AttentionCache) {
    let (s, d) = h.dim();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = linear(h, &p.q);
    let k = linear(h, &p.k);
    let v = linear(h, &p.v);
    let mut ctx = Array2::zeros((s, d));
    let mut weights = Vec::with_capacity(s);
    let mut comparisons = vec![0; s];
    for i in 0..s {
        let keys = &nb[i];
        let m = keys.len();
        comparisons[i] = m;
        let mut w = vec![0.0; n_heads * m];
        for hd in 0..n_heads {
            let cols = hd * dh..(hd + 1) * dh;
            let qi = q.slice(ndarray::s![i, cols.clone()]);
            let row = &mut w[hd * m..(hd + 1) * m];
            for (slot, &j) in row.iter_mut().zip(keys) {
                *slot = qi.dot(&k.slice(ndarray::s![j, cols.clone()])) * scale;
            }
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in row.iter_mut() {
                *x = (*x - mx).exp();
                z += *x;
            }
            let mut out = ctx.slice_mut(ndarray::s![i, cols.clone()]);
            for (x, &j) in row.iter_mut().zip(keys) {
                *x /= z;
                out.scaled_add(*x, &v.slice(ndarray::s![j, cols.clone()]));
            }
        }
        weights.push(w);
    }
    let y = linear(&ctx, &p.o);
    (
        y,
        AttentionCache {
            h: h.clone(),
            q,
            k,
            v,
            weights,
            ctx,
            comparisons,
        },
    )
}

pub fn attention_backward(
    dy: &Array2<f64>,
    cache: &AttentionCache,
    p: &AttentionParams,
    grad: &mut AttentionParams,
    nb: &[Vec<usize>],
    n_heads: usize,
) -> Array2<f64> {
    let (s, d) = cache.h.dim();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let dctx = linear_backward(&cache.ctx, dy, &p.o, &mut grad.o);
    let mut dq = Array2::zeros((s, d));
    let mut dk = Array2::zeros((s, d));
    let mut dv = Array2::zeros((s, d));
    let mut da = Vec::new();
    for i in 0..s {
        let keys = &nb[i];
        let m = keys.len();
        for hd in 0..n_heads {
            let cols = hd * dh..(hd + 1) * dh;
            let w = &cache.weights[i][hd * m..(hd + 1) * m];
            let g = dctx.slice(ndarray::s![i, cols.clone()]);
            da.clear();
            for (&a, &j) in w.iter().zip(keys) {
                da.push(g.dot(&cache.v.slice(ndarray::s![j, cols.clone()])));
                dv.slice_mut(ndarray::s![j, cols.clone()]).scaled_add(a, &g);
            }
            let mean: f64 = w.iter().zip(&da).map(|(a, g)| a * g).sum();
            let qi = cache.q.slice(ndarray::s![i, cols.clone()]).to_owned();
            for ((&a, &g), &j) in w.iter().zip(&da).zip(keys) {
                let ds = a * (g - mean) * scale;
                dq.slice_mut(ndarray::s![i, cols.clone()])
                    .scaled_add(ds, &cache.k.slice(ndarray::s![j, cols.clone()]));
                dk.slice_mut(ndarray::s![j, cols.clone()]).scaled_add(ds, &qi);
            }
        }
    }
    let mut dh_in = linear_backward(&cache.h, &dq, &p.q, &mut grad.q);
    dh_in += &linear_backward(&cache.h, &dk, &p.k, &mut grad.k);
    dh_in += &linear_backward(&cache.h, &dv, &p.v, &mut grad.v);
    dh_in
}
