use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::featurize::{CellFeatures, Featurizer};
use crate::error::{Error, Result};
use crate::table::{LogicalLocation, Quad};
use crate::tensor::{AttentionBlock, Checkpoint, Graph, LayerNorm, Linear, ParamId, ParamStore, Tensor, Var};

pub const REGRESSOR_COMPONENT: &str = "regressor";

/// Initial bias of the relu output heads, so that no output starts in the
/// dead region.
const HEAD_BIAS: f64 = 1.0;

/// Base regressor, optionally followed by a stacking regressor that sees the
/// base prediction projected back to feature width.
#[derive(Debug, Clone)]
pub struct CascadeRegressor {
    pub config: ModelConfig,
    pub featurizer: Featurizer,
    pub base_blocks: Vec<AttentionBlock>,
    pub base_norm: LayerNorm,
    pub base_head: Linear,
    pub stack: Option<StackRegressor>,
}

#[derive(Debug, Clone)]
pub struct StackRegressor {
    /// `W_s: [4, d]`.
    pub proj: ParamId,
    pub blocks: Vec<AttentionBlock>,
    pub norm: LayerNorm,
    pub head: Linear,
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub features: CellFeatures,
    pub h_tilde: Var,
    pub l_base: Var,
    /// Same node as `l_base` when stacking is disabled.
    pub l_stack: Var,
}

/// Output of [`CascadeRegressor::predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalPrediction {
    pub l_base: Vec<[f64; 4]>,
    pub l_stack: Vec<[f64; 4]>,
    pub rounded: Vec<LogicalLocation>,
    /// Per cell: whether a start/end pair had to be swapped.
    pub repaired: Vec<bool>,
    /// Tape length of the forward pass.
    pub tape_nodes: usize,
}

fn head(store: &mut ParamStore, name: &str, d: usize, rng: &mut ChaCha8Rng) -> Linear {
    let lin = Linear::new(store, name, d, 4, rng);
    store.get_mut(lin.bias).value.data_mut().fill(HEAD_BIAS);
    lin
}

impl CascadeRegressor {
    /// Builds a freshly initialized model, registering its parameters in
    /// `store`.
    pub fn new(config: &ModelConfig, store: &mut ParamStore, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d;
        let featurizer = Featurizer::new(store, "featurizer", d, config.pe_frequency_base, &mut rng)?;
        let base_blocks = (0..config.layers_base)
            .map(|i| AttentionBlock::new(store, &format!("base.block{i}"), d, config.heads, config.ff_width, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let base_norm = LayerNorm::new(store, "base.norm", d);
        let base_head = head(store, "base.head", d, &mut rng);
        let stack = if config.enable_stacking {
            let proj = store.add_uniform("stack.proj", &[4, d], 4, &mut rng);
            let blocks = (0..config.layers_stack)
                .map(|i| AttentionBlock::new(store, &format!("stack.block{i}"), d, config.heads, config.ff_width, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let norm = LayerNorm::new(store, "stack.norm", d);
            Some(StackRegressor { proj, blocks, norm, head: head(store, "stack.head", d, &mut rng) })
        } else {
            None
        };
        Ok(Self { config: config.clone(), featurizer, base_blocks, base_norm, base_head, stack })
    }

    pub fn base_regress(&self, g: &mut Graph, store: &ParamStore, h: Var) -> Result<(Var, Var)> {
        let mut x = h;
        for block in &self.base_blocks {
            x = block.forward(g, store, x)?;
        }
        let normed = self.base_norm.forward(g, store, x)?;
        let out = self.base_head.forward(g, store, normed)?;
        Ok((x, g.relu(out)))
    }

    /// Identity on `l_base` when stacking is disabled.
    pub fn stack_regress(&self, g: &mut Graph, store: &ParamStore, h_tilde: Var, l_base: Var) -> Result<Var> {
        let Some(stack) = &self.stack else {
            return Ok(l_base);
        };
        let ws = g.param(store, stack.proj);
        let projected = g.matmul(l_base, ws)?;
        let mut x = g.add(projected, h_tilde)?;
        for block in &stack.blocks {
            x = block.forward(g, store, x)?;
        }
        let x = stack.norm.forward(g, store, x)?;
        let out = stack.head.forward(g, store, x)?;
        Ok(g.relu(out))
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, quads: &[Quad], image_size: [f64; 2]) -> Result<Forward> {
        let features = self.featurizer.forward(g, store, quads, image_size)?;
        let (h_tilde, l_base) = self.base_regress(g, store, features.h)?;
        let l_stack = self.stack_regress(g, store, h_tilde, l_base)?;
        Ok(Forward { features, h_tilde, l_base, l_stack })
    }

    /// One forward pass without gradient bookkeeping.
    pub fn predict(&self, store: &ParamStore, quads: &[Quad], image_size: [f64; 2]) -> Result<LogicalPrediction> {
        let mut g = Graph::inference();
        let fwd = self.forward(&mut g, store, quads, image_size)?;
        let rows = |v: Var| -> Vec<[f64; 4]> {
            g.value(v).data().chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect()
        };
        let l_base = rows(fwd.l_base);
        let l_stack = rows(fwd.l_stack);
        let (rounded, repaired) = l_stack.iter().map(|r| round_to_logical(*r)).unzip();
        Ok(LogicalPrediction { l_base, l_stack, rounded, repaired, tape_nodes: g.len() })
    }

    /// Parameters of the stacking regressor, empty when disabled.
    pub fn stack_params(&self) -> Vec<ParamId> {
        let Some(s) = &self.stack else { return Vec::new() };
        let mut p = vec![s.proj, s.norm.gain, s.norm.bias, s.head.weight, s.head.bias];
        p.extend(s.blocks.iter().flat_map(|b| b.params()));
        p
    }

    pub fn base_params(&self) -> Vec<ParamId> {
        let mut p = self.featurizer.params();
        p.extend(self.base_blocks.iter().flat_map(|b| b.params()));
        p.extend([self.base_norm.gain, self.base_norm.bias, self.base_head.weight, self.base_head.bias]);
        p
    }

    pub fn checkpoint(&self, store: &ParamStore) -> Checkpoint {
        let cfg = serde_json::to_value(&self.config).expect("config serializes");
        Checkpoint::from_store(REGRESSOR_COMPONENT, cfg, store)
    }

    pub fn save(&self, store: &ParamStore, path: impl AsRef<Path>) -> Result<()> {
        self.checkpoint(store).save(path)
    }

    /// Rebuilds the model described by the checkpoint's own config.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, ParamStore)> {
        ck.expect_component(REGRESSOR_COMPONENT)?;
        let config: ModelConfig =
            serde_json::from_value(ck.config.clone()).map_err(|e| Error::Checkpoint(format!("bad config: {e}")))?;
        let mut store = ParamStore::new();
        let model = Self::new(&config, &mut store, 0)?;
        ck.load_into(&mut store, false)?;
        Ok((model, store))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, ParamStore)> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Loads a checkpoint and checks it against an expected architecture.
    pub fn load_expecting(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<(Self, ParamStore)> {
        let (model, store) = Self::load(path)?;
        let diff = model.config.architecture_diff(expected);
        if !diff.is_empty() {
            return Err(Error::ConfigMismatch(diff));
        }
        Ok((model, store))
    }
}

/// Rounds half up, clamps at zero and swaps inverted start/end pairs.
/// Returns the location and whether a swap happened.
pub fn round_to_logical(l: [f64; 4]) -> (LogicalLocation, bool) {
    let r = l.map(|v| (v + 0.5).floor().max(0.0) as usize);
    let (rs, re, rswap) = if r[0] > r[1] { (r[1], r[0], true) } else { (r[0], r[1], false) };
    let (cs, ce, cswap) = if r[2] > r[3] { (r[3], r[2], true) } else { (r[2], r[3], false) };
    (LogicalLocation::new(rs, re, cs, ce), rswap || cswap)
}

/// Flattens locations to an `[N, 4]` tensor.
pub fn locations_tensor(locs: &[LogicalLocation]) -> Tensor {
    let data = locs.iter().flat_map(|l| l.to_array().map(|v| v as f64)).collect();
    Tensor::new(vec![locs.len(), 4], data).expect("N x 4")
}
