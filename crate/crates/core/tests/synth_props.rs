use proptest::prelude::*;

use tablelogic::metrics::match_cells;
use tablelogic::synth::{
    cluster_to_grid, generate_record, generate_table, generate_word_boxes, ldp_labels, perturb_quads, read_dataset,
    recover_word_grid, write_dataset, GenConfig,
};
use tablelogic::table::validate_table;

#[test]
fn seven_three_twice_is_byte_identical() {
    let cfg = GenConfig { seed: 7, ..GenConfig::default() };
    let a = serde_json::to_vec(&generate_record(&cfg, 3, 64)).unwrap();
    let b = serde_json::to_vec(&generate_record(&cfg, 3, 64)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn generation_independent_of_thread() {
    let cfg = GenConfig { seed: 5, span_prob: 0.3, ..GenConfig::default() };
    let serial: Vec<String> = (0..16).map(|i| serde_json::to_string(&generate_record(&cfg, i, 32)).unwrap()).collect();
    let handles: Vec<_> = (0..16u64)
        .rev()
        .map(|i| {
            let cfg = cfg.clone();
            std::thread::spawn(move || serde_json::to_string(&generate_record(&cfg, i, 32)).unwrap())
        })
        .collect();
    let mut threaded: Vec<String> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    threaded.reverse();
    assert_eq!(serial, threaded);
}

#[test]
fn perturbation_std_over_many_corners() {
    let cfg = GenConfig { seed: 1, ..GenConfig::default() };
    let mut diffs = Vec::new();
    let mut index = 0;
    while diffs.len() < 2000 {
        let t = generate_table(&cfg, index);
        let p = perturb_quads(&t, 2.0, index);
        for (a, b) in t.cells.iter().zip(&p.cells) {
            for (u, v) in a.quad.0.iter().zip(b.quad.0.iter()) {
                diffs.push(v.x - u.x);
                diffs.push(v.y - u.y);
                assert!((0.0..=t.image_size[0]).contains(&v.x) && (0.0..=t.image_size[1]).contains(&v.y));
            }
            assert_eq!(a.logical, b.logical);
        }
        index += 1;
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((1.7..=2.3).contains(&std), "std {std} over {} coordinates", diffs.len());
    assert!(mean.abs() < 0.2);
}

#[test]
fn clustering_recovers_generator_grid() {
    let cfg = GenConfig { seed: 13, ..GenConfig::default() };
    let (mut hit, mut total) = (0usize, 0usize);
    for i in 0..100 {
        let t = generate_table(&cfg, i);
        let truth = generate_word_boxes(&t, &cfg, i);
        let mut words = truth.clone();
        recover_word_grid(&mut words);
        for (a, b) in truth.iter().zip(&words) {
            total += 1;
            hit += usize::from((a.grid_row, a.grid_col) == (b.grid_row, b.grid_col));
        }
    }
    assert!(hit as f64 >= 0.99 * total as f64, "{hit}/{total}");
}

#[test]
fn dataset_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.ndjson");
    let cfg = GenConfig { seed: 8, ..GenConfig::default() };
    let records: Vec<_> = (0..100).map(|i| generate_record(&cfg, i, 128)).collect();
    write_dataset(&path, &records).unwrap();
    assert_eq!(read_dataset(&path).unwrap(), records);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_tables_always_validate(seed in any::<u64>(), index in any::<u64>(), span in 0.0f64..0.95, max_span in 1usize..5) {
        let cfg = GenConfig { seed, span_prob: span, max_span, rows_range: (1, 10), cols_range: (1, 10), ..GenConfig::default() };
        let t = generate_table(&cfg, index);
        prop_assert!(validate_table(&t).is_empty());
        if max_span == 1 {
            prop_assert_eq!(t.len(), t.n_rows * t.n_cols);
        }
    }

    #[test]
    fn cluster_indices_monotone_in_position(centers in prop::collection::vec(0.0f64..500.0, 1..40), thr in 0.5f64..50.0) {
        let idx = cluster_to_grid(&centers, thr);
        let mut order: Vec<usize> = (0..centers.len()).collect();
        order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
        prop_assert_eq!(idx[order[0]], 0);
        for w in order.windows(2) {
            let step = idx[w[1]] - idx[w[0]];
            prop_assert!(step <= 1);
            prop_assert_eq!(step == 1, centers[w[1]] - centers[w[0]] > thr);
        }
    }

    #[test]
    fn labels_are_grid_differences(seed in any::<u64>(), index in 0u64..500, max_pairs in 1usize..300) {
        let cfg = GenConfig { seed, ..GenConfig::default() };
        let rec = generate_record(&cfg, index, max_pairs);
        let words = rec.words.unwrap();
        let labels = rec.ldp_pairs.unwrap();
        prop_assert_eq!(labels.len(), max_pairs.min(words.len() * words.len()));
        for l in &labels {
            prop_assert_eq!(l.row_dist, words[l.a].grid_row as i64 - words[l.b].grid_row as i64);
            prop_assert_eq!(l.col_dist, words[l.a].grid_col as i64 - words[l.b].grid_col as i64);
        }
        let again = ldp_labels(&words, max_pairs, seed);
        prop_assert_eq!(again.len(), labels.len());
        for w in &words {
            let cell = rec.table.cell(w.cell_id).unwrap();
            prop_assert!(cell.quad.bbox().contains(&w.bbox));
        }
    }

    #[test]
    fn small_jitter_matches_every_cell_to_its_source(seed in any::<u64>(), index in 0u64..1000, sigma in 0.0f64..0.5) {
        let cfg = GenConfig { seed, span_prob: 0.2, ..GenConfig::default() };
        let t = generate_table(&cfg, index);
        let noisy = perturb_quads(&t, sigma, seed ^ index);
        let m = match_cells(&noisy.quads(), &t.quads(), 0.5);
        prop_assert_eq!(m.pairs.len(), t.len());
        prop_assert!(m.pairs.iter().all(|p| p.pred == p.gt));
    }
}
