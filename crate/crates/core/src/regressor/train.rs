use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::losses::{adjacent_pairs_of, loss_total, AdjacentPairs, LossToggles};
use super::model::CascadeRegressor;
use crate::error::{Error, Result};
use crate::synth::DatasetRecord;
use crate::table::{LogicalLocation, Point, Quad};
use crate::tensor::{Adam, AdamConfig, Graph, ParamStore};

/// One table prepared for training: input quads aligned with ground truth.
#[derive(Debug, Clone)]
pub struct Sample {
    pub quads: Vec<Quad>,
    pub image_size: [f64; 2],
    pub gt: Vec<LogicalLocation>,
    pub pairs: AdjacentPairs,
}

impl Sample {
    pub fn from_record(r: &DatasetRecord) -> Result<Self> {
        let quads = r.input_quads();
        if quads.len() != r.table.len() {
            return Err(Error::InvalidConfig(format!(
                "record {:?}: {} detections for {} cells",
                r.id.as_deref().unwrap_or("?"),
                quads.len(),
                r.table.len()
            )));
        }
        if quads.is_empty() {
            return Err(Error::Empty("table without cells"));
        }
        let gt = r.table.locations();
        let pairs = adjacent_pairs_of(&gt);
        Ok(Self { quads, image_size: r.table.image_size, gt, pairs })
    }
}

pub fn samples_from(records: &[DatasetRecord]) -> Result<Vec<Sample>> {
    records.iter().map(Sample::from_record).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Tables per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Std-dev in pixels of extra corner noise redrawn every epoch; 0 disables.
    pub augment_sigma: f64,
    /// Evaluate on the held-out set every this many epochs (and always after
    /// the last one).
    pub eval_every: usize,
    /// Fraction of all optimizer steps over which the weight of the
    /// inter-cell hinge rises linearly from 0 to 1.
    pub inter_ramp: f64,
    /// Horizon, in epochs, of the moving average of weights used for
    /// held-out evaluation and kept as the final model; 0 disables it.
    pub average_epochs: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 1, seed: 0, adam: AdamConfig::default(), augment_sigma: 0.0, eval_every: 1, inter_ramp: 0.1, average_epochs: 0.5 }
    }
}

/// Cell-level accuracy of rounded predictions against aligned ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct AccuracyReport {
    /// Both row indices correct.
    pub a_r: f64,
    /// Both column indices correct.
    pub a_c: f64,
    /// All four indices correct.
    pub acc: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heldout: Option<AccuracyReport>,
}

pub struct TrainOutcome {
    pub model: CascadeRegressor,
    pub store: ParamStore,
    pub history: Vec<EpochLog>,
}

pub fn evaluate(model: &CascadeRegressor, store: &ParamStore, samples: &[Sample]) -> Result<AccuracyReport> {
    let (mut rows, mut cols, mut all, mut n) = (0usize, 0usize, 0usize, 0usize);
    for s in samples {
        let p = model.predict(store, &s.quads, s.image_size)?;
        for (pred, gt) in p.rounded.iter().zip(&s.gt) {
            let r = pred.start_row == gt.start_row && pred.end_row == gt.end_row;
            let c = pred.start_col == gt.start_col && pred.end_col == gt.end_col;
            rows += r as usize;
            cols += c as usize;
            all += (r && c) as usize;
            n += 1;
        }
    }
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    Ok(AccuracyReport { a_r: frac(rows), a_c: frac(cols), acc: frac(all), cells: n })
}

fn jitter(quads: &[Quad], image_size: [f64; 2], normal: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<Quad> {
    let [w, h] = image_size;
    quads
        .iter()
        .map(|q| {
            Quad(q.0.map(|p| {
                Point::new((p.x + normal.sample(rng)).clamp(0.0, w), (p.y + normal.sample(rng)).clamp(0.0, h))
            }))
        })
        .collect()
}

/// Bias-corrected exponential moving average of all parameter values.
struct WeightAverage {
    decay: f64,
    steps: i32,
    shadow: Vec<Vec<f64>>,
}

impl WeightAverage {
    fn new(store: &ParamStore, decay: f64) -> Self {
        Self { decay, steps: 0, shadow: store.iter().map(|p| vec![0.0; p.value.numel()]).collect() }
    }

    fn update(&mut self, store: &ParamStore) {
        self.steps = self.steps.saturating_add(1);
        for (sh, p) in self.shadow.iter_mut().zip(store.iter()) {
            for (a, v) in sh.iter_mut().zip(p.value.data()) {
                *a = self.decay * *a + (1.0 - self.decay) * v;
            }
        }
    }

    /// Writes the averaged weights into `store` and returns the live ones.
    fn swap_in(&self, store: &mut ParamStore) -> Vec<Vec<f64>> {
        let correction = 1.0 - self.decay.powi(self.steps);
        store
            .iter_mut()
            .zip(&self.shadow)
            .map(|(p, sh)| {
                let live = p.value.data().to_vec();
                for (v, a) in p.value.data_mut().iter_mut().zip(sh) {
                    *v = a / correction;
                }
                live
            })
            .collect()
    }

    fn restore(store: &mut ParamStore, live: Vec<Vec<f64>>) {
        for (p, v) in store.iter_mut().zip(live) {
            p.value.data_mut().copy_from_slice(&v);
        }
    }
}

fn inter_weight(ramp: f64, step: usize, total_steps: usize) -> f64 {
    let span = ramp * total_steps as f64;
    if span <= 0.0 {
        1.0
    } else {
        (step as f64 / span).min(1.0)
    }
}

/// Trains a freshly initialized model.
pub fn train(
    train: &[DatasetRecord],
    heldout: &[DatasetRecord],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    let mut store = ParamStore::new();
    let model = CascadeRegressor::new(model_cfg, &mut store, cfg.seed)?;
    let history = fit(&model, &mut store, &samples_from(train)?, &samples_from(heldout)?, cfg, on_epoch)?;
    Ok(TrainOutcome { model, store, history })
}

/// Optimizes `model`'s parameters in place. Deterministic given `cfg.seed`
/// and the initial weights.
pub fn fit(
    model: &CascadeRegressor,
    store: &mut ParamStore,
    train: &[Sample],
    heldout: &[Sample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if cfg.batch_size == 0 || cfg.eval_every == 0 {
        return Err(Error::InvalidConfig("batch_size and eval_every must be at least 1".into()));
    }
    let toggles = LossToggles {
        inter: model.config.enable_inter,
        intra: model.config.enable_intra,
        variant: model.config.inter_variant,
    };
    let adam = Adam::new(cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_7a61_e000_0001);
    let normal = Normal::new(0.0, cfg.augment_sigma.max(0.0)).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut last_finite = f64::NAN;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    let decay = (1.0 - 1.0 / (cfg.average_epochs * steps_per_epoch as f64)).max(0.0);
    let mut average = (cfg.average_epochs > 0.0 && decay > 0.0).then(|| WeightAverage::new(store, decay));
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut lr = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for &i in batch {
                let s = &train[i];
                let quads = if cfg.augment_sigma > 0.0 {
                    jitter(&s.quads, s.image_size, &normal, &mut rng)
                } else {
                    s.quads.clone()
                };
                let mut g = Graph::new();
                let fwd = model.forward(&mut g, store, &quads, s.image_size)?;
                let parts = loss_total(&mut g, fwd.l_base, fwd.l_stack, &s.gt, &s.pairs, toggles)?;
                let ramp = inter_weight(cfg.inter_ramp, step, total_steps);
                let total = match parts.inter {
                    Some(inter) if ramp < 1.0 => {
                        let held_back = g.scalar_mul(inter, 1.0 - ramp);
                        g.sub(parts.total, held_back)?
                    }
                    _ => parts.total,
                };
                let value = g.value(total).item();
                if !value.is_finite() {
                    return Err(Error::Diverged { epoch, last_finite_loss: last_finite });
                }
                last_finite = value;
                epoch_loss += value;
                let scaled = g.scalar_mul(total, 1.0 / batch.len() as f64);
                g.backward(scaled)?;
                g.accumulate_param_grads(store);
            }
            lr = model.config.lr.rate(epoch, cfg.epochs, step, total_steps);
            adam.step(store, lr);
            if let Some(avg) = &mut average {
                avg.update(store);
            }
            step += 1;
        }
        let last = epoch + 1 == cfg.epochs;
        let heldout_report = if !heldout.is_empty() && ((epoch + 1) % cfg.eval_every == 0 || last) {
            let live = average.as_ref().map(|avg| avg.swap_in(store));
            let report = evaluate(model, store, heldout);
            if let Some(live) = live {
                WeightAverage::restore(store, live);
            }
            Some(report?)
        } else {
            None
        };
        if last {
            if let Some(avg) = &average {
                avg.swap_in(store);
            }
        }
        let log = EpochLog { epoch, lr, train_loss: epoch_loss / train.len() as f64, heldout: heldout_report };
        log::info!("epoch {epoch}: loss {:.4} lr {lr:.2e}", log.train_loss);
        on_epoch(&log);
        history.push(log);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn average_of_constant_weights_is_exact() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap());
        let mut avg = WeightAverage::new(&store, 0.9);
        avg.update(&store);
        let live = avg.swap_in(&mut store);
        assert_eq!(store.get(id).value.data(), &[1.0, -2.0, 0.5]);
        WeightAverage::restore(&mut store, live);

        store.get_mut(id).value.data_mut().fill(3.0);
        avg.update(&store);
        let live = avg.swap_in(&mut store);
        let want = (0.9 * 0.1 * 1.0 + 0.1 * 3.0) / (1.0 - 0.81);
        assert!((store.get(id).value.data()[0] - want).abs() < 1e-12);
        WeightAverage::restore(&mut store, live);
        assert_eq!(store.get(id).value.data(), &[3.0; 3]);
    }

    #[test]
    fn inter_weight_ramps_then_holds() {
        assert_eq!(inter_weight(0.0, 0, 10), 1.0);
        assert_eq!(inter_weight(0.5, 0, 10), 0.0);
        assert_eq!(inter_weight(0.5, 4, 10), 0.8);
        assert_eq!(inter_weight(0.5, 9, 10), 1.0);
    }
}
