mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tablelogic::regressor::{Ablation, ModelConfig};
use tablelogic::synth::{generate_table, GenConfig};
use tablelogic::tensor::{
    finite_diff_check, multi_head_self_attention, AttentionBlock, GradCheckOptions, Graph, Linear, ParamStore, Tensor,
};

fn values(store: &ParamStore, lin: &Linear) -> (Vec<f64>, Vec<f64>) {
    (store.get(lin.weight).value.data().to_vec(), store.get(lin.bias).value.data().to_vec())
}

/// Row normalization with the 1e-5 variance guard, then gain and bias.
fn norm(x: &[Vec<f64>], gain: &[f64], bias: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            row.iter().zip(gain).zip(bias).map(|((v, g), b)| (v - mean) / (var + 1e-5).sqrt() * g + b).collect()
        })
        .collect()
}

/// `x[n×i] · w[i×o] + b`, written out.
fn affine(x: &[Vec<f64>], w: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    let o = b.len();
    x.iter()
        .map(|row| (0..o).map(|j| b[j] + row.iter().enumerate().map(|(k, v)| v * w[k * o + j]).sum::<f64>()).collect())
        .collect()
}

#[test]
fn two_tokens_two_heads_by_hand() {
    let (d, heads, ff) = (8, 2, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut store = ParamStore::new();
    let block = AttentionBlock::new(&mut store, "blk", d, heads, ff, &mut rng).unwrap();
    for id in block.params() {
        for v in store.get_mut(id).value.data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    let x: Vec<Vec<f64>> = (0..2).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();

    let lin = |l: &Linear, input: &[Vec<f64>]| {
        let (w, b) = values(&store, l);
        affine(input, &w, &b)
    };
    let ln = |l: &tablelogic::tensor::LayerNorm, input: &[Vec<f64>]| {
        norm(input, store.get(l.gain).value.data(), store.get(l.bias).value.data())
    };
    let xn = ln(&block.norm_attn, &x);
    let q = lin(&block.query, &xn);
    let k = lin(&block.key, &xn);
    let v = lin(&block.value, &xn);
    let dh = d / heads;
    let mut merged = vec![vec![0.0; d]; 2];
    for h in 0..heads {
        let cols = h * dh..(h + 1) * dh;
        for i in 0..2 {
            let scores: Vec<f64> = (0..2)
                .map(|j| cols.clone().map(|c| q[i][c] * k[j][c]).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            let m = scores[0].max(scores[1]);
            let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z = e[0] + e[1];
            for c in cols.clone() {
                merged[i][c] = (e[0] * v[0][c] + e[1] * v[1][c]) / z;
            }
        }
    }
    let attended = lin(&block.output, &merged);
    let x1: Vec<Vec<f64>> = (0..2).map(|i| (0..d).map(|c| x[i][c] + attended[i][c]).collect()).collect();
    let hidden: Vec<Vec<f64>> = lin(&block.ff_in, &ln(&block.norm_ff, &x1)).into_iter().map(|r| r.into_iter().map(|v| v.max(0.0)).collect()).collect();
    let ffo = lin(&block.ff_out, &hidden);
    let expected: Vec<f64> = (0..2).flat_map(|i| (0..d).map(|c| x1[i][c] + ffo[i][c]).collect::<Vec<_>>()).collect();

    let mut g = Graph::inference();
    let xv = g.constant(Tensor::matrix(&x).unwrap());
    let y = multi_head_self_attention(&mut g, &store, &block, xv).unwrap();
    for (a, b) in g.value(y).data().iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn corner_weight_gradients_match_differences() {
    let cfg = ModelConfig { d: 16, heads: 2, ff_width: 32, layers_base: 1, layers_stack: 1, ..ModelConfig::default() };
    let t = generate_table(&GenConfig { seed: 4, rows_range: (2, 3), cols_range: (2, 3), ..GenConfig::default() }, 0);
    let report = common::model_gradcheck(&cfg, &t, 2).unwrap();
    assert!(report.passed(), "{report:?}");
    assert!(report.checked > 0);
}

#[test]
fn broken_backward_rule_is_caught_and_named() {
    use tablelogic::regressor::{loss_log, CascadeRegressor};
    let cfg = ModelConfig { d: 8, heads: 2, ff_width: 16, layers_base: 1, layers_stack: 1, ..ModelConfig::default() };
    let t = generate_table(&GenConfig { seed: 1, rows_range: (2, 2), cols_range: (2, 2), ..GenConfig::default() }, 0);
    let mut store = ParamStore::new();
    let model = CascadeRegressor::new(&cfg, &mut store, 0).unwrap();
    let (quads, gt) = (t.quads(), t.locations());
    let report = finite_diff_check(
        &mut store,
        |g, s| {
            g.inject_backward_fault("scale_by");
            let f = model.forward(g, s, &quads, t.image_size)?;
            loss_log(g, f.l_base, f.l_stack, &gt)
        },
        GradCheckOptions::default(),
    )
    .unwrap();
    assert!(!report.passed());
    assert!(report.worst_param.as_deref().unwrap().starts_with("featurizer.corner_weight"), "{report:?}");
}

#[test]
fn all_objective_rows_pass_small_gradcheck() {
    let base = ModelConfig { d: 8, heads: 2, ff_width: 16, layers_base: 1, layers_stack: 1, ..ModelConfig::default() };
    let t = generate_table(&GenConfig { seed: 6, span_prob: 0.5, rows_range: (3, 3), cols_range: (3, 3), ..GenConfig::default() }, 2);
    for row in Ablation::ALL {
        let report = common::model_gradcheck(&row.apply(&base), &t, 1).unwrap();
        assert!(report.passed(), "{}: {report:?}", row.id());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn attention_stack_gradients(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let block = AttentionBlock::new(&mut store, "blk", 8, 2, 12, &mut rng).unwrap();
        let head = Linear::new(&mut store, "head", 8, 2, &mut rng);
        let x = Tensor::new(vec![n, 8], (0..n * 8).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let target = Tensor::new(vec![n, 2], (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let report = finite_diff_check(
            &mut store,
            |g, s| {
                let xv = g.constant(x.clone());
                let y = block.forward(g, s, xv)?;
                let y = head.forward(g, s, y)?;
                let t = g.constant(target.clone());
                let diff = g.sub(y, t)?;
                let hinge = g.max_with_zero(diff);
                let l1 = g.abs_sum(diff);
                let m = g.mean(hinge);
                g.add(l1, m)
            },
            GradCheckOptions { seed, ..GradCheckOptions::default() },
        ).unwrap();
        prop_assert!(report.passed(), "{:?}", report);
    }

    #[test]
    fn softmax_rows_sum_to_one(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..9, scale in 0.0f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.random_range(-scale..=scale)).collect()).unwrap();
        let mut g = Graph::inference();
        let xv = g.constant(x);
        let s = g.softmax_lastdim(xv);
        for r in 0..rows {
            let row = g.value(s).row(r);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn forward_is_bitwise_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let block = AttentionBlock::new(&mut store, "blk", 8, 4, 16, &mut rng).unwrap();
        let x = Tensor::new(vec![5, 8], (0..40).map(|_| rng.random_range(-1e3..1e3)).collect()).unwrap();
        let run = || {
            let mut g = Graph::inference();
            let xv = g.constant(x.clone());
            let y = block.forward(&mut g, &store, xv).unwrap();
            g.value(y).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        let a = run();
        prop_assert!(a.iter().all(|b| f64::from_bits(*b).is_finite()));
        prop_assert_eq!(a, run());
    }
}
