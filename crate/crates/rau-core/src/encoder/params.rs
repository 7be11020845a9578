use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::EncoderConfig;

/// Standard normal via Box-Muller, kept local so initialization is
/// reproducible under one RNG stream.
pub(crate) fn sample_normal<R: Rng>(rng: &mut R) -> f32 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32
}

pub(crate) fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f32) -> Array2<f32> {
    Array2::from_shape_fn((rows, cols), |_| sample_normal(rng) * std)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gamma: Array1<f32>,
    pub beta: Array1<f32>,
}

impl LayerNormParams {
    fn ones(dim: usize) -> LayerNormParams {
        LayerNormParams {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
        }
    }

    fn zeros(dim: usize) -> LayerNormParams {
        LayerNormParams {
            gamma: Array1::zeros(dim),
            beta: Array1::zeros(dim),
        }
    }
}

/// One encoder layer. Every layer carries the full tensor set; in the final
/// layer only the query/key projections sit on the computation path, so the
/// value, output, feed-forward, and norm tensors there keep zero gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f32>,
    pub bq: Array1<f32>,
    pub wk: Array2<f32>,
    pub bk: Array1<f32>,
    pub wv: Array2<f32>,
    pub bv: Array1<f32>,
    pub wo: Array2<f32>,
    pub bo: Array1<f32>,
    pub w1: Array2<f32>,
    pub b1: Array1<f32>,
    pub w2: Array2<f32>,
    pub b2: Array1<f32>,
    pub ln1: LayerNormParams,
    pub ln2: LayerNormParams,
}

/// All encoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub token_emb: Array2<f32>,
    pub pos_emb: Array2<f32>,
    pub seg_emb: Array2<f32>,
    pub emb_ln: LayerNormParams,
    pub layers: Vec<LayerParams>,
}

pub const INIT_STD: f32 = 0.02;

impl ParamSet {
    /// Seeded initialization: weights N(0, 0.02), biases zero, norm gains one.
    pub fn init(cfg: &EncoderConfig, rng: &mut ChaCha8Rng) -> ParamSet {
        let d = cfg.model_dim;
        let ff = cfg.ff_dim();
        let layer = |rng: &mut ChaCha8Rng| LayerParams {
            wq: normal_matrix(rng, d, d, INIT_STD),
            bq: Array1::zeros(d),
            wk: normal_matrix(rng, d, d, INIT_STD),
            bk: Array1::zeros(d),
            wv: normal_matrix(rng, d, d, INIT_STD),
            bv: Array1::zeros(d),
            wo: normal_matrix(rng, d, d, INIT_STD),
            bo: Array1::zeros(d),
            w1: normal_matrix(rng, d, ff, INIT_STD),
            b1: Array1::zeros(ff),
            w2: normal_matrix(rng, ff, d, INIT_STD),
            b2: Array1::zeros(d),
            ln1: LayerNormParams::ones(d),
            ln2: LayerNormParams::ones(d),
        };
        ParamSet {
            token_emb: normal_matrix(rng, cfg.vocab_size, d, INIT_STD),
            pos_emb: normal_matrix(rng, cfg.max_positions, d, INIT_STD),
            seg_emb: normal_matrix(rng, 2, d, INIT_STD),
            emb_ln: LayerNormParams::ones(d),
            layers: (0..cfg.layers).map(|_| layer(rng)).collect(),
        }
    }

    /// Same-shaped parameter set of zeros; the gradient container.
    pub fn zeros(cfg: &EncoderConfig) -> ParamSet {
        let d = cfg.model_dim;
        let ff = cfg.ff_dim();
        let layer = || LayerParams {
            wq: Array2::zeros((d, d)),
            bq: Array1::zeros(d),
            wk: Array2::zeros((d, d)),
            bk: Array1::zeros(d),
            wv: Array2::zeros((d, d)),
            bv: Array1::zeros(d),
            wo: Array2::zeros((d, d)),
            bo: Array1::zeros(d),
            w1: Array2::zeros((d, ff)),
            b1: Array1::zeros(ff),
            w2: Array2::zeros((ff, d)),
            b2: Array1::zeros(d),
            ln1: LayerNormParams::zeros(d),
            ln2: LayerNormParams::zeros(d),
        };
        ParamSet {
            token_emb: Array2::zeros((cfg.vocab_size, d)),
            pos_emb: Array2::zeros((cfg.max_positions, d)),
            seg_emb: Array2::zeros((2, d)),
            emb_ln: LayerNormParams::zeros(d),
            layers: (0..cfg.layers).map(|_| layer()).collect(),
        }
    }

    /// Named flat views over every tensor, in a fixed order shared with
    /// `flat_views_mut`. Shapes are reported for the checkpoint manifest.
    pub fn flat_views(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let mut out = Vec::new();
        push2(&mut out, "enc.token_emb", &self.token_emb);
        push2(&mut out, "enc.pos_emb", &self.pos_emb);
        push2(&mut out, "enc.seg_emb", &self.seg_emb);
        push1(&mut out, "enc.emb_ln.gamma", &self.emb_ln.gamma);
        push1(&mut out, "enc.emb_ln.beta", &self.emb_ln.beta);
        for (l, layer) in self.layers.iter().enumerate() {
            let p = |suffix: &str| format!("enc.layer{l}.{suffix}");
            push2(&mut out, &p("wq"), &layer.wq);
            push1(&mut out, &p("bq"), &layer.bq);
            push2(&mut out, &p("wk"), &layer.wk);
            push1(&mut out, &p("bk"), &layer.bk);
            push2(&mut out, &p("wv"), &layer.wv);
            push1(&mut out, &p("bv"), &layer.bv);
            push2(&mut out, &p("wo"), &layer.wo);
            push1(&mut out, &p("bo"), &layer.bo);
            push2(&mut out, &p("w1"), &layer.w1);
            push1(&mut out, &p("b1"), &layer.b1);
            push2(&mut out, &p("w2"), &layer.w2);
            push1(&mut out, &p("b2"), &layer.b2);
            push1(&mut out, &p("ln1.gamma"), &layer.ln1.gamma);
            push1(&mut out, &p("ln1.beta"), &layer.ln1.beta);
            push1(&mut out, &p("ln2.gamma"), &layer.ln2.gamma);
            push1(&mut out, &p("ln2.beta"), &layer.ln2.beta);
        }
        out
    }

    /// Mutable flat views, same order as `flat_views`.
    pub fn flat_views_mut(&mut self) -> Vec<(String, Vec<usize>, &mut [f32])> {
        let mut out = Vec::new();
        push2_mut(&mut out, "enc.token_emb", &mut self.token_emb);
        push2_mut(&mut out, "enc.pos_emb", &mut self.pos_emb);
        push2_mut(&mut out, "enc.seg_emb", &mut self.seg_emb);
        push1_mut(&mut out, "enc.emb_ln.gamma", &mut self.emb_ln.gamma);
        push1_mut(&mut out, "enc.emb_ln.beta", &mut self.emb_ln.beta);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let p = |suffix: &str| format!("enc.layer{l}.{suffix}");
            push2_mut(&mut out, &p("wq"), &mut layer.wq);
            push1_mut(&mut out, &p("bq"), &mut layer.bq);
            push2_mut(&mut out, &p("wk"), &mut layer.wk);
            push1_mut(&mut out, &p("bk"), &mut layer.bk);
            push2_mut(&mut out, &p("wv"), &mut layer.wv);
            push1_mut(&mut out, &p("bv"), &mut layer.bv);
            push2_mut(&mut out, &p("wo"), &mut layer.wo);
            push1_mut(&mut out, &p("bo"), &mut layer.bo);
            push2_mut(&mut out, &p("w1"), &mut layer.w1);
            push1_mut(&mut out, &p("b1"), &mut layer.b1);
            push2_mut(&mut out, &p("w2"), &mut layer.w2);
            push1_mut(&mut out, &p("b2"), &mut layer.b2);
            push1_mut(&mut out, &p("ln1.gamma"), &mut layer.ln1.gamma);
            push1_mut(&mut out, &p("ln1.beta"), &mut layer.ln1.beta);
            push1_mut(&mut out, &p("ln2.gamma"), &mut layer.ln2.gamma);
            push1_mut(&mut out, &p("ln2.beta"), &mut layer.ln2.beta);
        }
        out
    }

    /// `self += other * scale`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f32) {
        let views = other.flat_views();
        for ((_, _, dst), (_, _, src)) in self.flat_views_mut().into_iter().zip(views) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * scale;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flat_views()
            .iter()
            .all(|(_, _, data)| data.iter().all(|v| v.is_finite()))
    }
}

fn push1<'a>(out: &mut Vec<(String, Vec<usize>, &'a [f32])>, name: &str, a: &'a Array1<f32>) {
    out.push((name.to_string(), vec![a.len()], a.as_slice().unwrap()));
}

fn push2<'a>(out: &mut Vec<(String, Vec<usize>, &'a [f32])>, name: &str, a: &'a Array2<f32>) {
    let shape = a.shape().to_vec();
    out.push((name.to_string(), shape, a.as_slice().unwrap()));
}

fn push1_mut<'a>(
    out: &mut Vec<(String, Vec<usize>, &'a mut [f32])>,
    name: &str,
    a: &'a mut Array1<f32>,
) {
    let shape = vec![a.len()];
    out.push((name.to_string(), shape, a.as_slice_mut().unwrap()));
}

fn push2_mut<'a>(
    out: &mut Vec<(String, Vec<usize>, &'a mut [f32])>,
    name: &str,
    a: &'a mut Array2<f32>,
) {
    let shape = a.shape().to_vec();
    out.push((name.to_string(), shape, a.as_slice_mut().unwrap()));
}
