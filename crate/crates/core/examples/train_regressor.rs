//! Trains the cascade regressor on a generated corpus and reports held-out
//! accuracy per epoch.
//!
//! ```text
//! cargo run --release --example train_regressor -- [tables] [epochs] [d]
//! ```

use std::time::Instant;

use tablelogic::regressor::{train, ModelConfig, TrainConfig};
use tablelogic::synth::{generate_record, GenConfig};

fn main() -> tablelogic::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let tables = args.first().copied().unwrap_or(400);
    let epochs = args.get(1).copied().unwrap_or(10);
    let d = args.get(2).copied().unwrap_or(32);

    let gen = GenConfig { seed: 11, ..GenConfig::default() };
    let records: Vec<_> = (0..tables as u64 + 200).map(|i| generate_record(&gen, i, 0)).collect();
    let (train_set, heldout) = records.split_at(tables);

    let model = ModelConfig { d, heads: 4, ff_width: 2 * d, ..ModelConfig::default() };
    let cfg = TrainConfig { epochs, seed: 1, ..TrainConfig::default() };
    let start = Instant::now();
    let outcome = train(train_set, heldout, &model, &cfg, |log| {
        let acc = log.heldout.map(|r| format!("acc {:.3} (rows {:.3}, cols {:.3})", r.acc, r.a_r, r.a_c));
        println!(
            "epoch {:3}  loss {:8.4}  lr {:.1e}  {}  [{:.0}s]",
            log.epoch,
            log.train_loss,
            log.lr,
            acc.unwrap_or_default(),
            start.elapsed().as_secs_f64()
        );
    })?;
    println!("parameters: {}", outcome.store.numel());
    Ok(())
}
