//! Compact transformer encoder trained from scratch, exposing per-layer,
//! per-head self-attention weight matrices.
//!
//! Standard post-norm residual blocks, except that the final layer computes
//! its attention weights only: nothing downstream consumes its hidden
//! states, so its value/output projections and feed-forward sublayer are off
//! the computation path. Softmax and normalization statistics accumulate in
//! f64; parameters and activations are f32.

mod params;

pub use params::{LayerNormParams, LayerParams, ParamSet};

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedExample, PAD_ID};
use crate::error::{RauError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub max_positions: usize,
    pub vocab_size: usize,
    pub dropout: f32,
}

impl EncoderConfig {
    /// Desk-scale default, trainable in minutes on CPU. The 12/12/768
    /// fidelity setting remains expressible through the same fields.
    pub fn desk_default(vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            layers: 4,
            heads: 4,
            model_dim: 128,
            max_positions: 128,
            vocab_size,
            dropout: 0.1,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }

    pub fn ff_dim(&self) -> usize {
        4 * self.model_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0
            || self.heads == 0
            || self.model_dim == 0
            || self.max_positions == 0
            || self.vocab_size == 0
        {
            return Err(RauError::Config("encoder counts must be >= 1".into()));
        }
        if self.model_dim % self.heads != 0 {
            return Err(RauError::Config(format!(
                "model_dim {} not divisible by heads {}",
                self.model_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(RauError::Config(format!(
                "dropout {} outside [0,1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Per-layer, per-head T×T attention weight matrices, post-softmax and
/// pre-dropout. Every row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStack {
    weights: Vec<Vec<Array2<f32>>>,
}

impl AttentionStack {
    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn heads(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn get(&self, layer: usize, head: usize) -> Result<&Array2<f32>> {
        self.weights
            .get(layer)
            .and_then(|l| l.get(head))
            .ok_or_else(|| {
                RauError::IndexOutOfRange(format!(
                    "layer {layer} head {head} outside {}x{} stack",
                    self.layers(),
                    self.heads()
                ))
            })
    }
}

const LN_EPS: f64 = 1e-5;

struct LnCache {
    xhat: Array2<f32>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &Array2<f32>, p: &LayerNormParams) -> (Array2<f32>, LnCache) {
    let (t, d) = x.dim();
    let mut xhat = Array2::zeros((t, d));
    let mut y = Array2::zeros((t, d));
    let mut inv_std = Vec::with_capacity(t);
    for r in 0..t {
        let row = x.row(r);
        let mut mean = 0f64;
        for &v in row {
            mean += v as f64;
        }
        mean /= d as f64;
        let mut var = 0f64;
        for &v in row {
            let diff = v as f64 - mean;
            var += diff * diff;
        }
        var /= d as f64;
        let istd = 1.0 / (var + LN_EPS).sqrt();
        inv_std.push(istd);
        for c in 0..d {
            let xh = ((x[[r, c]] as f64 - mean) * istd) as f32;
            xhat[[r, c]] = xh;
            y[[r, c]] = p.gamma[c] * xh + p.beta[c];
        }
    }
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f32>,
    cache: &LnCache,
    p: &LayerNormParams,
    grad: &mut LayerNormParams,
) -> Array2<f32> {
    let (t, d) = dy.dim();
    let mut dx = Array2::zeros((t, d));
    for r in 0..t {
        let mut mean_dxh = 0f64;
        let mut mean_dxh_xh = 0f64;
        for c in 0..d {
            let xh = cache.xhat[[r, c]];
            grad.gamma[c] += dy[[r, c]] * xh;
            grad.beta[c] += dy[[r, c]];
            let dxh = (dy[[r, c]] * p.gamma[c]) as f64;
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh as f64;
        }
        mean_dxh /= d as f64;
        mean_dxh_xh /= d as f64;
        let istd = cache.inv_std[r];
        for c in 0..d {
            let dxh = (dy[[r, c]] * p.gamma[c]) as f64;
            let xh = cache.xhat[[r, c]] as f64;
            dx[[r, c]] = ((dxh - mean_dxh - xh * mean_dxh_xh) * istd) as f32;
        }
    }
    dx
}

fn masked_row_softmax(scores: &Array2<f32>, pad_mask: &[bool]) -> Result<Array2<f32>> {
    let (rows, cols) = scores.dim();
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        let mut max = f64::NEG_INFINITY;
        for c in 0..cols {
            if !pad_mask[c] {
                max = max.max(scores[[r, c]] as f64);
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(RauError::NumericError(
                "softmax row has no unmasked position".into(),
            ));
        }
        let mut denom = 0f64;
        for c in 0..cols {
            if !pad_mask[c] {
                denom += ((scores[[r, c]] as f64) - max).exp();
            }
        }
        for c in 0..cols {
            if !pad_mask[c] {
                out[[r, c]] = ((((scores[[r, c]] as f64) - max).exp()) / denom) as f32;
            }
        }
    }
    Ok(out)
}

/// ds = a ⊙ (da − Σ_cols da⊙a), row-wise. Masked columns have a = 0 and
/// therefore zero gradient.
fn softmax_backward(a: &Array2<f32>, da: &Array2<f32>) -> Array2<f32> {
    let (rows, cols) = a.dim();
    let mut ds = Array2::zeros((rows, cols));
    for r in 0..rows {
        let mut dot = 0f64;
        for c in 0..cols {
            dot += (da[[r, c]] as f64) * (a[[r, c]] as f64);
        }
        for c in 0..cols {
            ds[[r, c]] = a[[r, c]] * (da[[r, c]] - dot as f32);
        }
    }
    ds
}

fn attention_weights_views(
    q: &ArrayView2<f32>,
    k: &ArrayView2<f32>,
    pad_mask: &[bool],
) -> Result<Array2<f32>> {
    if q.dim() != k.dim() || q.nrows() != pad_mask.len() {
        return Err(RauError::ShapeError(format!(
            "attention inputs {:?} vs {:?} with mask len {}",
            q.dim(),
            k.dim(),
            pad_mask.len()
        )));
    }
    if q.iter().chain(k.iter()).any(|v| !v.is_finite()) {
        return Err(RauError::NumericError(
            "non-finite attention input".into(),
        ));
    }
    let dk = q.ncols();
    let scale = 1.0 / (dk as f32).sqrt();
    let scores = q.dot(&k.t()) * scale;
    let weights = masked_row_softmax(&scores, pad_mask)?;
    for r in 0..weights.nrows() {
        let sum: f32 = weights.row(r).sum();
        if !(sum - 1.0).abs().is_finite() || (sum - 1.0).abs() > 1e-5 {
            return Err(RauError::NumericError(format!(
                "attention row {r} sums to {sum}"
            )));
        }
    }
    Ok(weights)
}

/// softmax(QKᵀ/√d_k) row-wise, with PAD columns forced to zero weight.
pub fn attention_weights(
    q: &Array2<f32>,
    k: &Array2<f32>,
    pad_mask: &[bool],
) -> Result<Array2<f32>> {
    attention_weights_views(&q.view(), &k.view(), pad_mask)
}

struct LayerCache {
    x: Array2<f32>,
    q: Array2<f32>,
    k: Array2<f32>,
    v: Option<Array2<f32>>,
    /// Post-dropout attention per head, as used for the value aggregation.
    attn_dropped: Option<Vec<Array2<f32>>>,
    attn_masks: Option<Vec<Array2<f32>>>,
    ctx: Option<Array2<f32>>,
    o_mask: Option<Array2<f32>>,
    ln1: Option<LnCache>,
    y: Option<Array2<f32>>,
    relu: Option<Array2<f32>>,
    z_mask: Option<Array2<f32>>,
    ln2: Option<LnCache>,
}

/// Recorded intermediates from one forward pass.
pub struct ForwardCache {
    t: usize,
    ids: Vec<u32>,
    segments: Vec<u8>,
    emb_ln: LnCache,
    emb_mask: Option<Array2<f32>>,
    layers: Vec<LayerCache>,
}

fn apply_dropout(
    x: Array2<f32>,
    rate: f32,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> (Array2<f32>, Option<Array2<f32>>) {
    match rng {
        Some(r) if rate > 0.0 => {
            use rand::Rng;
            let keep = 1.0 / (1.0 - rate);
            let mask = Array2::from_shape_fn(x.dim(), |_| {
                if r.random::<f32>() < rate {
                    0.0
                } else {
                    keep
                }
            });
            (&x * &mask, Some(mask))
        }
        _ => (x, None),
    }
}

fn masked(x: &Array2<f32>, mask: &Option<Array2<f32>>) -> Array2<f32> {
    match mask {
        Some(m) => x * m,
        None => x.clone(),
    }
}

/// Full forward pass. Returns all L×I attention weight matrices plus the
/// cache needed by `backward`. Dropout is active only when `dropout_rng` is
/// provided and the configured rate is positive.
pub fn forward_cached(
    ex: &EncodedExample,
    params: &ParamSet,
    cfg: &EncoderConfig,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(AttentionStack, ForwardCache)> {
    cfg.validate()?;
    let t = ex.len();
    if t == 0 {
        return Err(RauError::ShapeError("empty sequence".into()));
    }
    if t > cfg.max_positions {
        return Err(RauError::TooLong {
            actual: t,
            max: cfg.max_positions,
        });
    }
    for &id in &ex.ids {
        if id as usize >= cfg.vocab_size {
            return Err(RauError::IndexOutOfRange(format!(
                "token id {id} outside vocab of {}",
                cfg.vocab_size
            )));
        }
    }
    let d = cfg.model_dim;
    let dk = cfg.head_dim();
    let pad_mask: Vec<bool> = ex.ids.iter().map(|&id| id == PAD_ID).collect();

    let mut e = Array2::zeros((t, d));
    for pos in 0..t {
        let tok = params.token_emb.row(ex.ids[pos] as usize);
        let pe = params.pos_emb.row(pos);
        let se = params.seg_emb.row(ex.segment_ids[pos].min(1) as usize);
        for c in 0..d {
            e[[pos, c]] = tok[c] + pe[c] + se[c];
        }
    }
    let (h, emb_ln) = layer_norm(&e, &params.emb_ln);
    let (mut x, emb_mask) = apply_dropout(h, cfg.dropout, &mut dropout_rng);

    let mut stack = Vec::with_capacity(cfg.layers);
    let mut layer_caches = Vec::with_capacity(cfg.layers);

    for l in 0..cfg.layers {
        let lp = &params.layers[l];
        let q = x.dot(&lp.wq) + &lp.bq;
        let k = x.dot(&lp.wk) + &lp.bk;
        let mut heads = Vec::with_capacity(cfg.heads);
        for i in 0..cfg.heads {
            let qi = q.slice(s![.., i * dk..(i + 1) * dk]);
            let ki = k.slice(s![.., i * dk..(i + 1) * dk]);
            heads.push(attention_weights_views(&qi, &ki, &pad_mask)?);
        }

        if l + 1 == cfg.layers {
            layer_caches.push(LayerCache {
                x: x.clone(),
                q,
                k,
                v: None,
                attn_dropped: None,
                attn_masks: None,
                ctx: None,
                o_mask: None,
                ln1: None,
                y: None,
                relu: None,
                z_mask: None,
                ln2: None,
            });
            stack.push(heads);
            break;
        }

        let v = x.dot(&lp.wv) + &lp.bv;
        let mut ctx = Array2::zeros((t, d));
        let mut attn_dropped = Vec::with_capacity(cfg.heads);
        let mut attn_masks = Vec::with_capacity(cfg.heads);
        for (i, a) in heads.iter().enumerate() {
            let (a_dropped, mask) = apply_dropout(a.clone(), cfg.dropout, &mut dropout_rng);
            let vi = v.slice(s![.., i * dk..(i + 1) * dk]);
            ctx.slice_mut(s![.., i * dk..(i + 1) * dk])
                .assign(&a_dropped.dot(&vi));
            attn_dropped.push(a_dropped);
            attn_masks.push(mask.unwrap_or_else(|| Array2::zeros((0, 0))));
        }
        let has_attn_masks = attn_masks.iter().all(|m| m.nrows() > 0);

        let o = ctx.dot(&lp.wo) + &lp.bo;
        let (o_dropped, o_mask) = apply_dropout(o, cfg.dropout, &mut dropout_rng);
        let r1 = &x + &o_dropped;
        let (y, ln1) = layer_norm(&r1, &lp.ln1);
        let pre1 = y.dot(&lp.w1) + &lp.b1;
        let relu = pre1.mapv(|v| v.max(0.0));
        let z = relu.dot(&lp.w2) + &lp.b2;
        let (z_dropped, z_mask) = apply_dropout(z, cfg.dropout, &mut dropout_rng);
        let r2 = &y + &z_dropped;
        let (x_next, ln2) = layer_norm(&r2, &lp.ln2);
        if x_next.iter().any(|v| !v.is_finite()) {
            return Err(RauError::NumericError(format!(
                "non-finite activation after layer {l}"
            )));
        }

        layer_caches.push(LayerCache {
            x: std::mem::replace(&mut x, x_next),
            q,
            k,
            v: Some(v),
            attn_dropped: Some(attn_dropped),
            attn_masks: has_attn_masks.then_some(attn_masks),
            ctx: Some(ctx),
            o_mask,
            ln1: Some(ln1),
            y: Some(y),
            relu: Some(relu),
            z_mask,
            ln2: Some(ln2),
        });
        stack.push(heads);
    }

    Ok((
        AttentionStack { weights: stack },
        ForwardCache {
            t,
            ids: ex.ids.clone(),
            segments: ex.segment_ids.clone(),
            emb_ln,
            emb_mask,
            layers: layer_caches,
        },
    ))
}

/// Inference-mode forward: attention weights only, no cache, no dropout.
pub fn forward(
    ex: &EncodedExample,
    params: &ParamSet,
    cfg: &EncoderConfig,
) -> Result<AttentionStack> {
    forward_cached(ex, params, cfg, None).map(|(stack, _)| stack)
}

/// Reverse-mode pass. `d_attn` carries the loss gradient w.r.t. selected
/// attention weight matrices as (layer, head, T×T gradient) entries; every
/// parameter not on the path to those matrices keeps a zero gradient.
pub fn backward(
    d_attn: &[(usize, usize, Array2<f32>)],
    stack: &AttentionStack,
    cache: &ForwardCache,
    params: &ParamSet,
    cfg: &EncoderConfig,
) -> Result<ParamSet> {
    let t = cache.t;
    let d = cfg.model_dim;
    let dk = cfg.head_dim();

    let mut da: Vec<Vec<Option<Array2<f32>>>> = (0..cfg.layers)
        .map(|_| (0..cfg.heads).map(|_| None).collect())
        .collect();
    for (layer, head, grad) in d_attn {
        if *layer >= cfg.layers || *head >= cfg.heads {
            return Err(RauError::IndexOutOfRange(format!(
                "gradient for layer {layer} head {head} outside {}x{}",
                cfg.layers, cfg.heads
            )));
        }
        if grad.dim() != (t, t) {
            return Err(RauError::ShapeError(format!(
                "attention gradient {:?} expected ({t},{t})",
                grad.dim()
            )));
        }
        match &mut da[*layer][*head] {
            Some(acc) => *acc += grad,
            slot => *slot = Some(grad.clone()),
        }
    }

    let mut grads = ParamSet::zeros(cfg);
    let mut dx_out = Array2::zeros((t, d));

    for l in (0..cfg.layers).rev() {
        let lp = &params.layers[l];
        let lc = &cache.layers[l];
        let gl = &mut grads.layers[l];
        let last = l + 1 == cfg.layers;
        let mut d_heads = std::mem::take(&mut da[l]);
        let mut dx_in = Array2::zeros((t, d));

        if !last {
            let dr2 = layer_norm_backward(
                &dx_out,
                lc.ln2.as_ref().expect("full layer cache"),
                &lp.ln2,
                &mut gl.ln2,
            );
            let dz = masked(&dr2, &lc.z_mask);
            let relu = lc.relu.as_ref().expect("full layer cache");
            let y = lc.y.as_ref().expect("full layer cache");
            gl.w2 += &relu.t().dot(&dz);
            gl.b2 += &dz.sum_axis(Axis(0));
            let mut dpre1 = dz.dot(&lp.w2.t());
            Zip::from(&mut dpre1).and(relu).for_each(|g, &r| {
                if r <= 0.0 {
                    *g = 0.0;
                }
            });
            gl.w1 += &y.t().dot(&dpre1);
            gl.b1 += &dpre1.sum_axis(Axis(0));
            let dy = &dr2 + &dpre1.dot(&lp.w1.t());
            let dr1 = layer_norm_backward(
                &dy,
                lc.ln1.as_ref().expect("full layer cache"),
                &lp.ln1,
                &mut gl.ln1,
            );
            dx_in += &dr1;

            let d_out = masked(&dr1, &lc.o_mask);
            let ctx = lc.ctx.as_ref().expect("full layer cache");
            gl.wo += &ctx.t().dot(&d_out);
            gl.bo += &d_out.sum_axis(Axis(0));
            let dctx = d_out.dot(&lp.wo.t());

            let v = lc.v.as_ref().expect("full layer cache");
            let dropped = lc.attn_dropped.as_ref().expect("full layer cache");
            let mut dv = Array2::zeros((t, d));
            for i in 0..cfg.heads {
                let cols = s![.., i * dk..(i + 1) * dk];
                let dctx_i = dctx.slice(cols);
                let vi = v.slice(cols);
                let mut da_i = dctx_i.dot(&vi.t());
                dv.slice_mut(cols).assign(&dropped[i].t().dot(&dctx_i));
                if let Some(masks) = &lc.attn_masks {
                    da_i *= &masks[i];
                }
                match &mut d_heads[i] {
                    Some(acc) => *acc += &da_i,
                    slot => *slot = Some(da_i),
                }
            }
            gl.wv += &lc.x.t().dot(&dv);
            gl.bv += &dv.sum_axis(Axis(0));
            dx_in += &dv.dot(&lp.wv.t());
        }

        if d_heads.iter().any(Option::is_some) {
            let scale = 1.0 / (dk as f32).sqrt();
            let mut dq_full = Array2::zeros((t, d));
            let mut dk_full = Array2::zeros((t, d));
            for (i, d_head) in d_heads.iter().enumerate() {
                let Some(da_i) = d_head else { continue };
                let a = stack.get(l, i)?;
                let ds = softmax_backward(a, da_i);
                let cols = s![.., i * dk..(i + 1) * dk];
                let qi = lc.q.slice(cols);
                let ki = lc.k.slice(cols);
                dq_full.slice_mut(cols).assign(&(ds.dot(&ki) * scale));
                dk_full.slice_mut(cols).assign(&(ds.t().dot(&qi) * scale));
            }
            gl.wq += &lc.x.t().dot(&dq_full);
            gl.bq += &dq_full.sum_axis(Axis(0));
            gl.wk += &lc.x.t().dot(&dk_full);
            gl.bk += &dk_full.sum_axis(Axis(0));
            dx_in += &dq_full.dot(&lp.wq.t());
            dx_in += &dk_full.dot(&lp.wk.t());
        }

        dx_out = dx_in;
    }

    let dh0 = masked(&dx_out, &cache.emb_mask);
    let de = layer_norm_backward(&dh0, &cache.emb_ln, &params.emb_ln, &mut grads.emb_ln);
    for pos in 0..t {
        let id = cache.ids[pos] as usize;
        let seg = cache.segments[pos].min(1) as usize;
        for c in 0..d {
            grads.token_emb[[id, c]] += de[[pos, c]];
            grads.pos_emb[[pos, c]] += de[[pos, c]];
            grads.seg_emb[[seg, c]] += de[[pos, c]];
        }
    }
    Ok(grads)
}
