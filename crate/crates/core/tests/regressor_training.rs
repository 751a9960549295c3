mod common;

use proptest::prelude::*;

use tablelogic::regressor::{
    adjacent_pairs_of, build_adjacent_pairs, evaluate, fit, loss_inter, loss_intra, loss_log, loss_total,
    locations_tensor, samples_from, train, CascadeRegressor, InterVariant, LossToggles, ModelConfig, TrainConfig,
};
use tablelogic::synth::{generate_record, generate_table, GenConfig};
use tablelogic::table::{adjacency_triplets, Axis};
use tablelogic::tensor::{Graph, ParamStore};

fn small() -> ModelConfig {
    ModelConfig { d: 16, heads: 2, ff_width: 32, layers_base: 1, layers_stack: 1, ..ModelConfig::default() }
}

fn desk_model() -> ModelConfig {
    ModelConfig { d: 32, heads: 4, ff_width: 64, ..ModelConfig::default() }
}

fn one_table() -> Vec<tablelogic::regressor::Sample> {
    let cfg = GenConfig { seed: 2, rows_range: (3, 4), cols_range: (3, 4), span_prob: 0.2, ..GenConfig::default() };
    samples_from(&[generate_record(&cfg, 0, 0)]).unwrap()
}

fn overfit(epochs: usize, seed: u64) -> (CascadeRegressor, ParamStore, f64) {
    let samples = one_table();
    let mut store = ParamStore::new();
    let model = CascadeRegressor::new(&desk_model(), &mut store, seed).unwrap();
    let tc = TrainConfig { epochs, seed, eval_every: epochs, ..TrainConfig::default() };
    let history = fit(&model, &mut store, &samples, &samples, &tc, |_| {}).unwrap();
    (model, store, history.last().unwrap().train_loss)
}

#[test]
fn two_hundred_steps_reproduce_the_table() {
    let s = &one_table()[0];
    for seed in 0..3 {
        let (model, store, _) = overfit(200, seed);
        let pred = model.predict(&store, &s.quads, s.image_size).unwrap();
        assert_eq!(pred.rounded, s.gt, "seed {seed}");
        assert!(pred.repaired.iter().all(|r| !r));
    }
}

#[test]
fn memorization_drives_loss_below_five_hundredths() {
    let (_, _, loss) = overfit(800, 0);
    assert!(loss < 0.05, "loss {loss}");
}

#[test]
fn same_seed_same_weights() {
    let cfg = GenConfig { seed: 3, ..GenConfig::default() };
    let records: Vec<_> = (0..6).map(|i| generate_record(&cfg, i, 0)).collect();
    let tc = TrainConfig { epochs: 2, seed: 5, augment_sigma: 1.0, ..TrainConfig::default() };
    let run = || {
        let out = train(&records, &records[..2], &small(), &tc, |_| {}).unwrap();
        serde_json::to_vec(&out.model.checkpoint(&out.store)).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn heldout_report_counts_cells() {
    let cfg = GenConfig { seed: 4, ..GenConfig::default() };
    let records: Vec<_> = (0..5).map(|i| generate_record(&cfg, i, 0)).collect();
    let samples = samples_from(&records).unwrap();
    let mut store = ParamStore::new();
    let model = CascadeRegressor::new(&small(), &mut store, 1).unwrap();
    let r = evaluate(&model, &store, &samples).unwrap();
    assert_eq!(r.cells, records.iter().map(|r| r.table.len()).sum::<usize>());
    assert!(r.acc <= r.a_r.min(r.a_c) + 1e-12);
}

#[test]
fn literal_variant_penalizes_ground_truth() {
    // Two cells side by side on one row: the literal pairing compares row
    // coordinates of horizontal neighbours, which coincide.
    let t = common::random_table(0, 1, 2, 0.0, 0.0);
    let gt = t.locations();
    let pairs = adjacent_pairs_of(&gt);
    let mut g = Graph::inference();
    let l = g.constant(locations_tensor(&gt));
    let ordered = loss_inter(&mut g, l, &pairs, InterVariant::Ordered).unwrap();
    let literal = loss_inter(&mut g, l, &pairs, InterVariant::Literal).unwrap();
    assert_eq!(g.value(ordered).item(), 0.0);
    assert!(g.value(literal).item() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn losses_vanish_on_ground_truth(seed in any::<u64>(), index in 0u64..1000, span in 0.0f64..0.6) {
        let t = generate_table(&GenConfig { seed, span_prob: span, ..GenConfig::default() }, index);
        let gt = t.locations();
        let pairs = build_adjacent_pairs(&t);
        let mut g = Graph::inference();
        let l = g.constant(locations_tensor(&gt));
        let inter = loss_inter(&mut g, l, &pairs, InterVariant::Ordered).unwrap();
        let intra = loss_intra(&mut g, l, &gt).unwrap();
        let log = loss_log(&mut g, l, l, &gt).unwrap();
        prop_assert_eq!(g.value(inter).item(), 0.0);
        prop_assert_eq!(g.value(intra).item(), 0.0);
        prop_assert_eq!(g.value(log).item(), 0.0);
    }

    #[test]
    fn ordered_pairs_agree_with_triplets(seed in any::<u64>(), rows in 1usize..=7, cols in 1usize..=7, hole in prop_oneof![Just(0.0), Just(0.2)]) {
        let t = common::random_table(seed, rows, cols, 0.3, hole);
        let gt = t.locations();
        let pairs = build_adjacent_pairs(&t);
        let mut from_pairs: Vec<(usize, usize, Axis)> = pairs.horizontal.iter().map(|&(i, j)| (i.min(j), i.max(j), Axis::Horizontal))
            .chain(pairs.vertical.iter().map(|&(i, j)| (i.min(j), i.max(j), Axis::Vertical)))
            .collect();
        from_pairs.sort();
        let mut triplets: Vec<_> = adjacency_triplets(&t).into_iter().map(|x| (x.a, x.b, x.axis)).collect();
        triplets.sort();
        prop_assert_eq!(from_pairs, triplets);
        for &(i, j) in &pairs.horizontal {
            prop_assert_eq!(gt[i].start_col, gt[j].end_col + 1);
        }
        for &(i, j) in &pairs.vertical {
            prop_assert_eq!(gt[i].start_row, gt[j].end_row + 1);
        }
    }

    #[test]
    fn total_is_sum_of_enabled_parts(seed in any::<u64>(), inter in any::<bool>(), intra in any::<bool>(), shift in -2.0f64..2.0) {
        let t = common::random_table(seed, 4, 4, 0.3, 0.0);
        let gt = t.locations();
        let pairs = adjacent_pairs_of(&gt);
        let mut g = Graph::inference();
        let mut moved = locations_tensor(&gt);
        for (k, v) in moved.data_mut().iter_mut().enumerate() {
            *v += shift * ((k % 3) as f64 - 1.0);
        }
        let lb = g.constant(locations_tensor(&gt));
        let ls = g.constant(moved);
        let parts = loss_total(&mut g, lb, ls, &gt, &pairs, LossToggles { inter, intra, variant: InterVariant::Ordered }).unwrap();
        let mut expected = g.value(parts.log).item();
        prop_assert_eq!(parts.inter.is_some(), inter);
        prop_assert_eq!(parts.intra.is_some(), intra);
        for v in [parts.inter, parts.intra].into_iter().flatten() {
            expected += g.value(v).item();
        }
        prop_assert!((g.value(parts.total).item() - expected).abs() < 1e-12);
    }
}
