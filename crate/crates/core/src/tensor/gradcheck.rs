use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, ParamStore, Var};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub h: f64,
    /// Pass threshold on the worst relative error.
    pub tolerance: f64,
    /// Above this many coordinates, a per-parameter random subsample is used.
    pub max_coords: usize,
    /// Relative error is `|a - n| / max(|a|, |n|, floor)`.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-5, tolerance: 1e-4, max_coords: 10_000, floor: 1e-4, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub worst_rel_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    pub checked: usize,
    /// Coordinates skipped because a ±h step crossed a relu/hinge/abs kink.
    pub skipped_kinks: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.worst_rel_error < self.tolerance
    }
}

/// Compares analytic parameter gradients of `loss_fn` against central finite
/// differences.
///
/// `loss_fn` must build a fresh graph on the given tape and return the scalar
/// loss. A coordinate is skipped when either perturbed evaluation lands on a
/// different side of any kink than the unperturbed one.
pub fn finite_diff_check<F>(store: &mut ParamStore, mut loss_fn: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph, &ParamStore) -> Result<Var>,
{
    store.zero_grad();
    let mut g = Graph::new();
    let loss = loss_fn(&mut g, store)?;
    let base_sig = g.kink_signature();
    g.backward(loss)?;
    g.accumulate_param_grads(store);
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.clone()).collect();
    store.zero_grad();

    let total = store.numel();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let ids: Vec<_> = store.ids().collect();
    let mut report = GradCheckReport {
        worst_rel_error: 0.0,
        worst_param: None,
        worst_index: 0,
        checked: 0,
        skipped_kinks: 0,
        tolerance: opts.tolerance,
    };
    let mut eval = |store: &ParamStore| -> Result<(f64, u64)> {
        let mut g = Graph::inference();
        let l = loss_fn(&mut g, store)?;
        Ok((g.value(l).item(), g.kink_signature()))
    };
    for (pi, &id) in ids.iter().enumerate() {
        let n = store.get(id).value.numel();
        let coords: Vec<usize> = if total <= opts.max_coords {
            (0..n).collect()
        } else {
            let want = ((n as f64 * opts.max_coords as f64 / total as f64).round() as usize).max(n.min(8));
            let mut picked = sample(&mut rng, n, want.min(n)).into_vec();
            picked.sort_unstable();
            picked
        };
        for k in coords {
            let orig = store.get(id).value.data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + opts.h;
            let (fp, sp) = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig - opts.h;
            let (fm, sm) = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig;
            if sp != base_sig || sm != base_sig {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * opts.h);
            let a = analytic[pi][k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            report.checked += 1;
            if rel > report.worst_rel_error || report.worst_param.is_none() {
                report.worst_rel_error = rel;
                report.worst_param = Some(store.get(id).name.clone());
                report.worst_index = k;
            }
        }
    }
    Ok(report)
}
