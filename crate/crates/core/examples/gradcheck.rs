//! Checks the full model's analytic gradients against central differences
//! for each objective combination.

use tablelogic::regressor::{adjacent_pairs_of, loss_total, Ablation, CascadeRegressor, LossToggles, ModelConfig};
use tablelogic::synth::{generate_table, GenConfig};
use tablelogic::tensor::{finite_diff_check, GradCheckOptions, ParamStore};

fn main() -> tablelogic::Result<()> {
    let table = generate_table(&GenConfig { seed: 4, rows_range: (2, 3), cols_range: (2, 3), ..GenConfig::default() }, 0);
    let base = ModelConfig { d: 16, heads: 2, ff_width: 32, layers_base: 2, layers_stack: 2, ..ModelConfig::default() };
    let quads = table.quads();
    let gt = table.locations();
    let pairs = adjacent_pairs_of(&gt);

    for row in Ablation::ALL {
        let cfg = row.apply(&base);
        let mut store = ParamStore::new();
        let model = CascadeRegressor::new(&cfg, &mut store, 0)?;
        let toggles = LossToggles { inter: cfg.enable_inter, intra: cfg.enable_intra, variant: cfg.inter_variant };
        let report = finite_diff_check(
            &mut store,
            |g, store| {
                let f = model.forward(g, store, &quads, table.image_size)?;
                Ok(loss_total(g, f.l_base, f.l_stack, &gt, &pairs, toggles)?.total)
            },
            GradCheckOptions::default(),
        )?;
        println!(
            "{}: {} coordinates, worst relative error {:.2e} in {} ({} skipped at kinks) {}",
            row.id(),
            report.checked,
            report.worst_rel_error,
            report.worst_param.as_deref().unwrap_or("-"),
            report.skipped_kinks,
            if report.passed() { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}
