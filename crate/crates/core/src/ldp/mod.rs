//! Logical-distance pre-training: an encoder with the regressor's shape
//! learns signed row/column grid differences between word pairs, and its
//! weights then seed both regressors of a fresh cascade model.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regressor::{CascadeRegressor, Featurizer, LrSchedule, ModelConfig};
use crate::synth::{DatasetRecord, WordBox};
use crate::table::Quad;
use crate::tensor::{Adam, AdamConfig, AttentionBlock, Checkpoint, Graph, LayerNorm, Linear, ParamStore, Tensor, Var};

pub const LDP_COMPONENT: &str = "ldp";

/// Featurizer and encoder shaped like the base regressor, plus a linear head
/// over concatenated pair features.
#[derive(Debug, Clone)]
pub struct LdpModel {
    pub config: ModelConfig,
    pub featurizer: Featurizer,
    pub encoder: Vec<AttentionBlock>,
    pub norm: LayerNorm,
    pub head: Linear,
}

impl LdpModel {
    /// The encoder depth is `config.layers_base`.
    pub fn new(config: &ModelConfig, store: &mut ParamStore, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d;
        let featurizer = Featurizer::new(store, "featurizer", d, config.pe_frequency_base, &mut rng)?;
        let encoder = (0..config.layers_base)
            .map(|i| AttentionBlock::new(store, &format!("encoder.block{i}"), d, config.heads, config.ff_width, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let norm = LayerNorm::new(store, "pair_norm", d);
        let head = Linear::new(store, "pair_head", 2 * d, 2, &mut rng);
        Ok(Self { config: config.clone(), featurizer, encoder, norm, head })
    }

    /// Encoded per-box features `[N, d]`.
    pub fn encode(&self, g: &mut Graph, store: &ParamStore, quads: &[Quad], image_size: [f64; 2]) -> Result<Var> {
        let mut x = self.featurizer.forward(g, store, quads, image_size)?.h;
        for block in &self.encoder {
            x = block.forward(g, store, x)?;
        }
        Ok(x)
    }

    pub fn checkpoint(&self, store: &ParamStore) -> Checkpoint {
        let cfg = serde_json::to_value(&self.config).expect("config serializes");
        Checkpoint::from_store(LDP_COMPONENT, cfg, store)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, ParamStore)> {
        ck.expect_component(LDP_COMPONENT)?;
        let config: ModelConfig =
            serde_json::from_value(ck.config.clone()).map_err(|e| Error::Checkpoint(format!("bad config: {e}")))?;
        let mut store = ParamStore::new();
        let model = Self::new(&config, &mut store, 0)?;
        ck.load_into(&mut store, false)?;
        Ok((model, store))
    }
}

pub fn word_quads(words: &[WordBox]) -> Vec<Quad> {
    words.iter().map(|w| w.bbox.to_quad()).collect()
}

/// Predicted `(row_dist, col_dist)` for each `(a, b)` pair, shape `[P, 2]`.
pub fn ldp_forward(
    g: &mut Graph,
    store: &ParamStore,
    model: &LdpModel,
    words: &[Quad],
    image_size: [f64; 2],
    pairs: &[(usize, usize)],
) -> Result<Var> {
    if let Some(&(a, b)) = pairs.iter().find(|(a, b)| *a >= words.len() || *b >= words.len()) {
        return Err(Error::InvalidConfig(format!("pair ({a}, {b}) out of range for {} words", words.len())));
    }
    let enc = model.encode(g, store, words, image_size)?;
    let enc = model.norm.forward(g, store, enc)?;
    let left: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let right: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let fa = g.embedding_lookup(enc, &left)?;
    let fb = g.embedding_lookup(enc, &right)?;
    let joined = g.concat_lastdim(&[fa, fb])?;
    model.head.forward(g, store, joined)
}

/// Mean absolute error over pairs and both axes.
pub fn ldp_loss(g: &mut Graph, pred: Var, labels: &[[f64; 2]]) -> Result<Var> {
    let target = g.constant(Tensor::new(vec![labels.len(), 2], labels.concat())?);
    let diff = g.sub(pred, target)?;
    let s = g.abs_sum(diff);
    Ok(g.scalar_mul(s, 1.0 / (2 * labels.len().max(1)) as f64))
}

/// Word boxes and labelled pairs of one record.
#[derive(Debug, Clone)]
pub struct LdpSample {
    pub words: Vec<Quad>,
    pub image_size: [f64; 2],
    pub pairs: Vec<(usize, usize)>,
    pub labels: Vec<[f64; 2]>,
}

impl LdpSample {
    pub fn from_record(r: &DatasetRecord) -> Result<Self> {
        let (Some(words), Some(pairs)) = (&r.words, &r.ldp_pairs) else {
            return Err(Error::InvalidConfig(format!(
                "record {:?} has no word boxes or distance labels",
                r.id.as_deref().unwrap_or("?")
            )));
        };
        if words.is_empty() || pairs.is_empty() {
            return Err(Error::Empty("record without words or pairs"));
        }
        Ok(Self {
            words: word_quads(words),
            image_size: r.table.image_size,
            pairs: pairs.iter().map(|p| (p.a, p.b)).collect(),
            labels: pairs.iter().map(|p| [p.row_dist as f64, p.col_dist as f64]).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr: LrSchedule,
    pub adam: AdamConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 1,
            seed: 0,
            lr: LrSchedule { initial: 1e-3, decay_at: vec![], factor: 1.0, warmup_fraction: 0.05 },
            adam: AdamConfig::pretraining(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Mean absolute error per axis on held-out samples.
pub fn ldp_mae(model: &LdpModel, store: &ParamStore, samples: &[LdpSample]) -> Result<[f64; 2]> {
    let mut sum = [0.0; 2];
    let mut n = 0usize;
    for s in samples {
        let mut g = Graph::inference();
        let pred = ldp_forward(&mut g, store, model, &s.words, s.image_size, &s.pairs)?;
        for (p, l) in g.value(pred).data().chunks(2).zip(&s.labels) {
            sum[0] += (p[0] - l[0]).abs();
            sum[1] += (p[1] - l[1]).abs();
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    Ok([sum[0] / n, sum[1] / n])
}

pub struct PretrainOutcome {
    pub model: LdpModel,
    pub store: ParamStore,
    pub history: Vec<PretrainLog>,
}

pub fn pretrain(
    corpus: &[DatasetRecord],
    model_cfg: &ModelConfig,
    cfg: &PretrainConfig,
    mut on_epoch: impl FnMut(&PretrainLog),
) -> Result<PretrainOutcome> {
    let samples: Vec<LdpSample> = corpus.iter().map(LdpSample::from_record).collect::<Result<_>>()?;
    if samples.is_empty() {
        return Err(Error::Empty("pre-training corpus"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
    }
    let mut store = ParamStore::new();
    let model = LdpModel::new(model_cfg, &mut store, cfg.seed)?;
    let adam = Adam::new(cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1d9_0000_0000_0002);
    let total_steps = samples.len().div_ceil(cfg.batch_size) * cfg.epochs;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut last_finite = f64::NAN;
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut lr = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for &i in batch {
                let s = &samples[i];
                let mut g = Graph::new();
                let pred = ldp_forward(&mut g, &store, &model, &s.words, s.image_size, &s.pairs)?;
                let loss = ldp_loss(&mut g, pred, &s.labels)?;
                let value = g.value(loss).item();
                if !value.is_finite() {
                    return Err(Error::Diverged { epoch, last_finite_loss: last_finite });
                }
                last_finite = value;
                total += value;
                let scaled = g.scalar_mul(loss, 1.0 / batch.len() as f64);
                g.backward(scaled)?;
                g.accumulate_param_grads(&mut store);
            }
            lr = cfg.lr.rate(epoch, cfg.epochs, step, total_steps);
            adam.step(&mut store, lr);
            step += 1;
        }
        let log = PretrainLog { epoch, lr, loss: total / samples.len() as f64 };
        log::info!("pretrain epoch {epoch}: loss {:.4}", log.loss);
        on_epoch(&log);
        history.push(log);
    }
    Ok(PretrainOutcome { model, store, history })
}

fn transfer_diff(ldp: &ModelConfig, fine: &ModelConfig) -> Vec<String> {
    let mut diff = Vec::new();
    let mut check = |name: &str, a: String, b: String| {
        if a != b {
            diff.push(format!("{name}: {a} vs {b}"));
        }
    };
    check("d", ldp.d.to_string(), fine.d.to_string());
    check("heads", ldp.heads.to_string(), fine.heads.to_string());
    check("ff_width", ldp.ff_width.to_string(), fine.ff_width.to_string());
    check("pe_frequency_base", ldp.pe_frequency_base.to_string(), fine.pe_frequency_base.to_string());
    check("layers_base", ldp.layers_base.to_string(), fine.layers_base.to_string());
    if fine.enable_stacking {
        check("layers_stack", ldp.layers_base.to_string(), fine.layers_stack.to_string());
    }
    diff
}

/// Builds a fresh regressor for `fine_cfg` and overwrites its featurizer and
/// both encoder stacks with the pre-trained weights. Output heads and the
/// stacking projection keep their fresh initialization.
pub fn transfer(ldp: &Checkpoint, fine_cfg: &ModelConfig, seed: u64) -> Result<(CascadeRegressor, ParamStore)> {
    let (ldp_model, ldp_store) = LdpModel::from_checkpoint(ldp)?;
    let diff = transfer_diff(&ldp_model.config, fine_cfg);
    if !diff.is_empty() {
        return Err(Error::ConfigMismatch(diff));
    }
    let mut store = ParamStore::new();
    let model = CascadeRegressor::new(fine_cfg, &mut store, seed)?;
    let copy = |store: &mut ParamStore, from: crate::tensor::ParamId, to: crate::tensor::ParamId| {
        store.get_mut(to).value = ldp_store.get(from).value.clone();
    };
    for (from, to) in ldp_model.featurizer.params().into_iter().zip(model.featurizer.params()) {
        copy(&mut store, from, to);
    }
    let stack_blocks = model.stack.as_ref().map(|s| s.blocks.as_slice()).unwrap_or(&[]);
    for (i, block) in ldp_model.encoder.iter().enumerate() {
        for target in [model.base_blocks.get(i), stack_blocks.get(i)].into_iter().flatten() {
            for (from, to) in block.params().into_iter().zip(target.params()) {
                copy(&mut store, from, to);
            }
        }
    }
    Ok((model, store))
}

pub fn transfer_from_file(path: impl AsRef<Path>, fine_cfg: &ModelConfig, seed: u64) -> Result<(CascadeRegressor, ParamStore)> {
    transfer(&Checkpoint::load(path)?, fine_cfg, seed)
}
