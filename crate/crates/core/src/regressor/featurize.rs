use rand::Rng;

use super::embed::positional_embedding_2d;
use crate::error::{Error, Result};
use crate::table::{Point, Quad};
use crate::tensor::{Graph, Linear, ParamId, ParamStore, Tensor, Var};

/// Geometric values per cell: center, size, four corner offsets.
const RAW_GEO: usize = 12;

/// Inputs of the geometry MLP: the raw values scaled by image size, then the
/// same values standardized over the cells of the table.
pub const GEO_FEATURES: usize = 2 * RAW_GEO;

/// Added to the per-table spread before dividing, so near-constant columns
/// (equal widths up to jitter) stay small instead of amplifying noise.
const SPREAD_FLOOR: f64 = 0.01;

/// Fused per-cell features for one table.
#[derive(Debug, Clone)]
pub struct CellFeatures {
    /// `[N, d]` on the graph.
    pub h: Var,
    pub centers: Vec<Point>,
    pub corners: Vec<[Point; 4]>,
}

/// Geometry MLP plus position-embedded corners combined with learnable
/// scalar weights `w_1..w_4`.
#[derive(Debug, Clone)]
pub struct Featurizer {
    pub d: usize,
    pub pe_base: f64,
    pub geo_in: Linear,
    pub geo_out: Linear,
    pub corner_weights: [ParamId; 4],
}

impl Featurizer {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d: usize, pe_base: f64, rng: &mut R) -> Result<Self> {
        if d == 0 || d % 4 != 0 {
            return Err(Error::InvalidConfig(format!("feature width {d} is not a positive multiple of 4")));
        }
        Ok(Self {
            d,
            pe_base,
            geo_in: Linear::new(store, &format!("{name}.geo_in"), GEO_FEATURES, d, rng),
            geo_out: Linear::new(store, &format!("{name}.geo_out"), d, d, rng),
            corner_weights: std::array::from_fn(|k| store.add_const(format!("{name}.corner_weight{k}"), &[1], 0.25)),
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = vec![self.geo_in.weight, self.geo_in.bias, self.geo_out.weight, self.geo_out.bias];
        p.extend(self.corner_weights);
        p
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, quads: &[Quad], image_size: [f64; 2]) -> Result<CellFeatures> {
        if quads.is_empty() {
            return Err(Error::Empty("featurize needs at least one cell"));
        }
        let [w, h] = image_size;
        let mut raw = Vec::with_capacity(quads.len() * RAW_GEO);
        let mut pe: [Vec<f64>; 4] = Default::default();
        let mut centers = Vec::with_capacity(quads.len());
        for (i, q) in quads.iter().enumerate() {
            if !q.is_finite() {
                return Err(Error::InvalidConfig(format!("cell {i} has non-finite corners")));
            }
            if q.area() == 0.0 {
                log::warn!("cell {i} has a zero-area quad; using its center only");
            }
            let c = q.center();
            let b = q.bbox();
            raw.extend([c.x / w, c.y / h, b.width() / w, b.height() / h]);
            for p in q.corners() {
                raw.extend([(p.x - c.x) / w, (p.y - c.y) / h]);
            }
            for (k, p) in q.corners().iter().enumerate() {
                pe[k].extend(positional_embedding_2d(p.x / w, p.y / h, self.d, self.pe_base)?);
            }
            centers.push(c);
        }
        let n = quads.len();
        let geo = with_standardized(&raw, n);
        let geo = g.constant(Tensor::new(vec![n, GEO_FEATURES], geo)?);
        let hidden = self.geo_in.forward(g, store, geo)?;
        let hidden = g.relu(hidden);
        let mut feat = self.geo_out.forward(g, store, hidden)?;
        for (k, corner_pe) in pe.into_iter().enumerate() {
            let e = g.constant(Tensor::new(vec![n, self.d], corner_pe)?);
            let wk = g.param(store, self.corner_weights[k]);
            let weighted = g.scale_by(e, wk)?;
            feat = g.add(feat, weighted)?;
        }
        Ok(CellFeatures { h: feat, centers, corners: quads.iter().map(|q| *q.corners()).collect() })
    }
}

/// Appends to every row of `raw` (`n × RAW_GEO`) its column-wise z-scores.
fn with_standardized(raw: &[f64], n: usize) -> Vec<f64> {
    let mut mean = [0.0; RAW_GEO];
    let mut spread = [0.0; RAW_GEO];
    for row in raw.chunks(RAW_GEO) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n as f64);
    }
    for row in raw.chunks(RAW_GEO) {
        for k in 0..RAW_GEO {
            spread[k] += (row[k] - mean[k]).powi(2) / n as f64;
        }
    }
    let mut out = Vec::with_capacity(n * GEO_FEATURES);
    for row in raw.chunks(RAW_GEO) {
        out.extend_from_slice(row);
        out.extend((0..RAW_GEO).map(|k| (row[k] - mean[k]) / (spread[k].sqrt() + SPREAD_FLOOR)));
    }
    out
}
