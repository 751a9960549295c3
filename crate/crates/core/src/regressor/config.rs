use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which pair of coordinates the inter-cell hinge compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InterVariant {
    /// Horizontal pairs compare columns, vertical pairs compare rows. Vanishes
    /// on every valid labelling.
    #[default]
    Ordered,
    /// Horizontal pairs compare rows, vertical pairs compare columns. Kept for
    /// comparison; it is nonzero on correct labels whenever same-row
    /// neighbours exist.
    Literal,
}

/// Step-decay learning rate with optional linear warm-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    /// Fractions of the epoch budget at which the rate is multiplied by
    /// `factor`.
    pub decay_at: Vec<f64>,
    pub factor: f64,
    /// Fraction of all optimizer steps spent ramping up linearly from zero.
    pub warmup_fraction: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { initial: 1e-3, decay_at: vec![0.7, 0.9], factor: 0.1, warmup_fraction: 0.0 }
    }
}

impl LrSchedule {
    pub fn rate(&self, epoch: usize, epochs: usize, step: usize, total_steps: usize) -> f64 {
        let mut lr = self.initial;
        for &frac in &self.decay_at {
            if epoch >= (frac * epochs as f64).round() as usize {
                lr *= self.factor;
            }
        }
        let warm = (self.warmup_fraction * total_steps as f64).ceil() as usize;
        if step < warm {
            lr *= (step + 1) as f64 / warm as f64;
        }
        lr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d: usize,
    pub heads: usize,
    /// Hidden width of each attention block's feed-forward layer.
    pub ff_width: usize,
    pub layers_base: usize,
    pub layers_stack: usize,
    pub pe_frequency_base: f64,
    pub enable_stacking: bool,
    pub enable_inter: bool,
    pub enable_intra: bool,
    pub inter_variant: InterVariant,
    pub lr: LrSchedule,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 64,
            heads: 4,
            ff_width: 128,
            layers_base: 3,
            layers_stack: 3,
            pe_frequency_base: 10000.0,
            enable_stacking: true,
            enable_inter: true,
            enable_intra: true,
            inter_variant: InterVariant::Ordered,
            lr: LrSchedule::default(),
        }
    }
}

impl ModelConfig {
    /// The full-width preset (d = 256).
    pub fn wide() -> Self {
        Self { d: 256, heads: 8, ff_width: 512, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d % 4 != 0 {
            return Err(Error::InvalidConfig(format!("d = {} must be a positive multiple of 4", self.d)));
        }
        if self.heads == 0 || self.d % self.heads != 0 {
            return Err(Error::InvalidConfig(format!("d = {} not divisible by heads = {}", self.d, self.heads)));
        }
        if self.layers_base == 0 {
            return Err(Error::InvalidConfig("layers_base must be at least 1".into()));
        }
        if self.enable_stacking && self.layers_stack == 0 {
            return Err(Error::InvalidConfig("layers_stack must be at least 1 when stacking is enabled".into()));
        }
        if self.ff_width == 0 {
            return Err(Error::InvalidConfig("ff_width must be at least 1".into()));
        }
        if !(self.pe_frequency_base > 0.0) || !(self.lr.initial > 0.0) {
            return Err(Error::InvalidConfig("frequency base and learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Architecture fields that must agree between a checkpoint and the model
    /// it is loaded into, as `(name, value)` pairs.
    pub fn architecture(&self) -> Vec<(&'static str, String)> {
        vec![
            ("d", self.d.to_string()),
            ("heads", self.heads.to_string()),
            ("ff_width", self.ff_width.to_string()),
            ("layers_base", self.layers_base.to_string()),
            ("layers_stack", if self.enable_stacking { self.layers_stack } else { 0 }.to_string()),
            ("pe_frequency_base", self.pe_frequency_base.to_string()),
            ("enable_stacking", self.enable_stacking.to_string()),
        ]
    }

    /// Names of architecture fields that differ from `other`.
    pub fn architecture_diff(&self, other: &Self) -> Vec<String> {
        self.architecture()
            .into_iter()
            .zip(other.architecture())
            .filter(|(a, b)| a.1 != b.1)
            .map(|(a, b)| format!("{}: {} vs {}", a.0, a.1, b.1))
            .collect()
    }
}

/// Rows of the objective/architecture ablation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ablation {
    /// L1 only, cascade.
    #[serde(rename = "1a")]
    A1a,
    /// L1 + inter, cascade.
    #[serde(rename = "1b")]
    A1b,
    /// L1 + intra, cascade.
    #[serde(rename = "1c")]
    A1c,
    /// All objectives, cascade.
    #[serde(rename = "1d")]
    A1d,
    /// All objectives, one regressor with twice the layers.
    #[serde(rename = "2b")]
    A2b,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [Ablation::A1a, Ablation::A1b, Ablation::A1c, Ablation::A1d, Ablation::A2b];

    pub fn id(self) -> &'static str {
        match self {
            Ablation::A1a => "1a",
            Ablation::A1b => "1b",
            Ablation::A1c => "1c",
            Ablation::A1d => "1d",
            Ablation::A2b => "2b",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ablation '{s}' (expected 1a, 1b, 1c, 1d or 2b)")))
    }

    /// Applies the row's toggles to `base`; layer counts follow `base`.
    pub fn apply(self, base: &ModelConfig) -> ModelConfig {
        let mut cfg = base.clone();
        let (inter, intra) = match self {
            Ablation::A1a => (false, false),
            Ablation::A1b => (true, false),
            Ablation::A1c => (false, true),
            Ablation::A1d | Ablation::A2b => (true, true),
        };
        cfg.enable_inter = inter;
        cfg.enable_intra = intra;
        cfg.enable_stacking = true;
        if self == Ablation::A2b {
            cfg.enable_stacking = false;
            cfg.layers_base = base.layers_base + base.layers_stack;
            cfg.layers_stack = 0;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_decays_at_fractions() {
        let s = LrSchedule { initial: 1e-4, ..LrSchedule::default() };
        assert_eq!(s.rate(0, 100, 0, 1000), 1e-4);
        assert_eq!(s.rate(69, 100, 0, 1000), 1e-4);
        assert!((s.rate(70, 100, 0, 1000) - 1e-5).abs() < 1e-18);
        assert!((s.rate(95, 100, 0, 1000) - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn warmup_is_linear() {
        let s = LrSchedule { initial: 1.0, decay_at: vec![], factor: 1.0, warmup_fraction: 0.05 };
        assert!((s.rate(0, 1, 0, 100) - 0.2).abs() < 1e-12);
        assert!((s.rate(0, 1, 4, 100) - 1.0).abs() < 1e-12);
        assert_eq!(s.rate(0, 1, 50, 100), 1.0);
    }

    #[test]
    fn ablation_rows() {
        let base = ModelConfig::default();
        let a = Ablation::A1a.apply(&base);
        assert!(!a.enable_inter && !a.enable_intra && a.enable_stacking);
        let b = Ablation::A2b.apply(&base);
        assert!(!b.enable_stacking && b.layers_base == 6 && b.enable_inter && b.enable_intra);
        assert_eq!(Ablation::parse("1c").unwrap(), Ablation::A1c);
        assert!(Ablation::parse("3a").is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(ModelConfig { d: 30, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { heads: 3, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { layers_base: 0, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig::wide().validate().is_ok());
    }
}
