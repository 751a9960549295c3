use rand::Rng;

use super::{Graph, ParamId, ParamStore, Var};
use crate::error::{Error, Result};

/// Affine map `x · W + b` with `W: [in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let weight = store.add_uniform(format!("{name}.weight"), &[d_in, d_out], d_in, rng);
        let bias = store.add_const(format!("{name}.bias"), &[d_out], 0.0);
        Self { weight, bias }
    }

    /// A linear map with all weights and biases zero.
    pub fn zeros(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Self {
        let weight = store.add_const(format!("{name}.weight"), &[d_in, d_out], 0.0);
        let bias = store.add_const(format!("{name}.bias"), &[d_out], 0.0);
        Self { weight, bias }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }
}

/// Learnable per-column gain and bias around a row normalization.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Self {
        let gain = store.add_const(format!("{name}.gain"), &[d], 1.0);
        let bias = store.add_const(format!("{name}.bias"), &[d], 0.0);
        Self { gain, bias }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let gain = g.param(store, self.gain);
        let bias = g.param(store, self.bias);
        g.layer_norm(x, gain, bias)
    }
}

/// Pre-norm encoder layer: multi-head scaled dot-product self-attention with
/// residual, then a two-layer relu feed-forward with residual. No mask.
#[derive(Debug, Clone)]
pub struct AttentionBlock {
    pub heads: usize,
    pub d: usize,
    pub norm_attn: LayerNorm,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub norm_ff: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
}

impl AttentionBlock {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d: usize, heads: usize, ff: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || d % heads != 0 {
            return Err(Error::InvalidConfig(format!("width {d} not divisible by {heads} heads")));
        }
        Ok(Self {
            heads,
            d,
            norm_attn: LayerNorm::new(store, &format!("{name}.norm_attn"), d),
            query: Linear::new(store, &format!("{name}.query"), d, d, rng),
            key: Linear::new(store, &format!("{name}.key"), d, d, rng),
            value: Linear::new(store, &format!("{name}.value"), d, d, rng),
            output: Linear::new(store, &format!("{name}.output"), d, d, rng),
            norm_ff: LayerNorm::new(store, &format!("{name}.norm_ff"), d),
            ff_in: Linear::new(store, &format!("{name}.ff_in"), d, ff, rng),
            ff_out: Linear::new(store, &format!("{name}.ff_out"), ff, d, rng),
        })
    }

    /// `x: [N, d]` → `[N, d]`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        match g.shape(x) {
            [_, d] if *d == self.d => {}
            s => return Err(Error::shape("self_attention", &[s, &[self.d]])),
        }
        let xn = self.norm_attn.forward(g, store, x)?;
        let q = self.query.forward(g, store, xn)?;
        let k = self.key.forward(g, store, xn)?;
        let v = self.value.forward(g, store, xn)?;
        let dh = self.d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_lastdim(q, h * dh, (h + 1) * dh)?;
            let kh = g.slice_lastdim(k, h * dh, (h + 1) * dh)?;
            let vh = g.slice_lastdim(v, h * dh, (h + 1) * dh)?;
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let scores = g.scalar_mul(scores, scale);
            let attn = g.softmax_lastdim(scores);
            heads.push(g.matmul(attn, vh)?);
        }
        let merged = g.concat_lastdim(&heads)?;
        let attended = self.output.forward(g, store, merged)?;
        let x1 = g.add(x, attended)?;
        let x1n = self.norm_ff.forward(g, store, x1)?;
        let hidden = self.ff_in.forward(g, store, x1n)?;
        let hidden = g.relu(hidden);
        let ff = self.ff_out.forward(g, store, hidden)?;
        g.add(x1, ff)
    }

    /// Parameters in a fixed order, for copying between models.
    pub fn params(&self) -> [ParamId; 16] {
        [
            self.norm_attn.gain,
            self.norm_attn.bias,
            self.query.weight,
            self.query.bias,
            self.key.weight,
            self.key.bias,
            self.value.weight,
            self.value.bias,
            self.output.weight,
            self.output.bias,
            self.norm_ff.gain,
            self.norm_ff.bias,
            self.ff_in.weight,
            self.ff_in.bias,
            self.ff_out.weight,
            self.ff_out.bias,
        ]
    }
}

/// Free-function form of [`AttentionBlock::forward`].
pub fn multi_head_self_attention(g: &mut Graph, store: &ParamStore, block: &AttentionBlock, x: Var) -> Result<Var> {
    block.forward(g, store, x)
}
