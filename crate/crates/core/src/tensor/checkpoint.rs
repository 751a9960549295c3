use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "tablelogic-weights";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// JSON weight file: parameter name → shape + flat values, plus the model
/// configuration and a component tag (`"regressor"` or `"ldp"`).
///
/// Parameters are kept in a sorted map and floats are written in shortest
/// round-trip form, so save → load → save is byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub component: String,
    pub config: serde_json::Value,
    pub params: BTreeMap<String, ParamEntry>,
}

impl Checkpoint {
    pub fn from_store(component: &str, config: serde_json::Value, store: &ParamStore) -> Self {
        let params = store
            .iter()
            .map(|p| {
                (p.name.clone(), ParamEntry { shape: p.value.shape().to_vec(), values: p.value.data().to_vec() })
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            component: component.to_string(),
            config,
            params,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec(self).expect("checkpoint serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_slice(bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn expect_component(&self, component: &str) -> Result<()> {
        if self.component == component {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "expected a `{component}` checkpoint, found `{}`",
                self.component
            )))
        }
    }

    /// Copies every stored parameter into `store` by name. Names missing from
    /// the checkpoint or with a different shape are errors; extra checkpoint
    /// entries are errors unless `allow_extra`.
    pub fn load_into(&self, store: &mut ParamStore, allow_extra: bool) -> Result<()> {
        let mut missing = Vec::new();
        for p in store.iter_mut() {
            match self.params.get(&p.name) {
                Some(e) if e.shape == p.value.shape() => {
                    p.value = Tensor::new(e.shape.clone(), e.values.clone())?;
                    p.reset_state();
                }
                Some(e) => {
                    return Err(Error::Checkpoint(format!(
                        "parameter {} has shape {:?}, checkpoint has {:?}",
                        p.name,
                        p.value.shape(),
                        e.shape
                    )))
                }
                None => missing.push(p.name.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Checkpoint(format!("missing parameters: {}", missing.join(", "))));
        }
        if !allow_extra {
            let extra: Vec<&str> =
                self.params.keys().filter(|k| store.id(k).is_none()).map(String::as_str).collect();
            if !extra.is_empty() {
                return Err(Error::Checkpoint(format!("unexpected parameters: {}", extra.join(", "))));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn byte_stable_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut s = ParamStore::new();
        s.add_uniform("b.weight", &[3, 5], 3, &mut rng);
        s.add_uniform("a.weight", &[7], 7, &mut rng);
        let ck = Checkpoint::from_store("regressor", serde_json::json!({"d": 4}), &s);
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        let mut fresh = ParamStore::new();
        fresh.add_const("b.weight", &[3, 5], 0.0);
        fresh.add_const("a.weight", &[7], 0.0);
        back.load_into(&mut fresh, false).unwrap();
        assert_eq!(fresh.by_name("b.weight").unwrap().value, s.by_name("b.weight").unwrap().value);
    }

    #[test]
    fn shape_mismatch_named() {
        let mut s = ParamStore::new();
        s.add_const("w", &[2, 2], 1.0);
        let ck = Checkpoint::from_store("regressor", serde_json::Value::Null, &s);
        let mut other = ParamStore::new();
        other.add_const("w", &[2, 3], 0.0);
        let err = ck.load_into(&mut other, false).unwrap_err().to_string();
        assert!(err.contains("w"), "{err}");
        assert!(Checkpoint::from_bytes(b"{\"format\":\"x\"}").is_err());
    }
}
