//! Pre-trains the encoder on word-pair distances, copies it into a fresh
//! regressor and compares fine-tuning against training from scratch.
//!
//! ```text
//! cargo run --release --example ldp_pretrain_transfer -- [pretrain tables] [pretrain epochs] [train tables] [epochs]
//! ```

use std::time::Instant;

use tablelogic::ldp::{pretrain, transfer, PretrainConfig};
use tablelogic::regressor::{fit, samples_from, train, ModelConfig, TrainConfig};
use tablelogic::synth::{generate_record, GenConfig};

fn main() -> tablelogic::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let pre_tables = args.first().copied().unwrap_or(300) as u64;
    let pre_epochs = args.get(1).copied().unwrap_or(3);
    let tables = args.get(2).copied().unwrap_or(200) as u64;
    let epochs = args.get(3).copied().unwrap_or(5);

    let model = ModelConfig { d: 32, heads: 4, ff_width: 64, ..ModelConfig::default() };
    let start = Instant::now();

    let words = GenConfig { seed: 12, ..GenConfig::default() };
    let corpus: Vec<_> = (0..pre_tables).map(|i| generate_record(&words, i, 256)).collect();
    let pre = pretrain(&corpus, &model, &PretrainConfig { epochs: pre_epochs, ..PretrainConfig::default() }, |l| {
        println!("pretrain epoch {:2}  loss {:.4}  [{:.0}s]", l.epoch, l.loss, start.elapsed().as_secs_f64());
    })?;
    let ckpt = pre.model.checkpoint(&pre.store);

    let gen = GenConfig { seed: 11, ..GenConfig::default() };
    let records: Vec<_> = (0..tables + 100).map(|i| generate_record(&gen, i, 0)).collect();
    let (train_set, heldout) = records.split_at(tables as usize);
    let cfg = TrainConfig { epochs, seed: 0, ..TrainConfig::default() };

    let scratch = train(train_set, heldout, &model, &cfg, |_| {})?;
    let (ft_model, mut ft_store) = transfer(&ckpt, &model, cfg.seed)?;
    let finetuned = fit(&ft_model, &mut ft_store, &samples_from(train_set)?, &samples_from(heldout)?, &cfg, |_| {})?;

    println!("epoch  scratch  fine-tuned");
    for (a, b) in scratch.history.iter().zip(&finetuned) {
        let acc = |l: &tablelogic::regressor::EpochLog| l.heldout.map_or(f64::NAN, |r| r.acc);
        println!("{:5}  {:7.3}  {:10.3}", a.epoch, acc(a), acc(b));
    }
    println!("[{:.0}s]", start.elapsed().as_secs_f64());
    Ok(())
}
