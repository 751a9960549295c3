use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use super::convert::markup_to_table;
use super::manifest::{digest_inputs, RunManifest};
use super::*;
use crate::error::{Error, Result};
use crate::ldp::{pretrain, transfer_from_file, PretrainConfig};
use crate::metrics::evaluate_dataset;
use crate::regressor::{
    fit, samples_from, train, Ablation, AccuracyReport, CascadeRegressor, EpochLog, InterVariant, LrSchedule,
    ModelConfig, TrainConfig,
};
use crate::synth::{generate_record, read_dataset, write_dataset, DatasetRecord, GenConfig};
use crate::table::{adjacency_triplets, to_markup, to_markup_with_text, validate_table, Table};
use crate::tensor::AdamConfig;

fn resolve_out(out: &Option<PathBuf>, default_name: &str) -> PathBuf {
    match out {
        Some(p) => p.clone(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) => PathBuf::from(dir).join(default_name),
            None => PathBuf::from(default_name),
        },
    }
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

struct Run<'a> {
    command: &'static str,
    argv: &'a [String],
    started: Instant,
}

impl Run<'_> {
    fn finish(&self, config: Value, seeds: Vec<u64>, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
        let (inputs, input_hash) = digest_inputs(inputs)?;
        let manifest = RunManifest {
            command: self.command.to_string(),
            argv: self.argv.to_vec(),
            config,
            seeds,
            inputs,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
            input_hash,
        };
        manifest.write(outputs[0])?;
        Ok(())
    }
}

fn write_ndjson<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for item in items {
        serde_json::to_writer(&mut w, item).expect("value serializes");
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn model_config(args: &ModelArgs, inter: InterArg) -> Result<ModelConfig> {
    let cfg = ModelConfig {
        d: args.d,
        heads: args.heads,
        ff_width: args.ff.unwrap_or(2 * args.d),
        layers_base: args.layers,
        layers_stack: args.layers,
        inter_variant: match inter {
            InterArg::Ordered => InterVariant::Ordered,
            InterArg::Literal => InterVariant::Literal,
        },
        lr: LrSchedule { initial: args.lr, ..LrSchedule::default() },
        ..ModelConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn train_config(args: &ModelArgs, seed: u64, augment: f64) -> TrainConfig {
    TrainConfig { epochs: args.epochs, batch_size: args.batch, seed, augment_sigma: augment, ..TrainConfig::default() }
}

fn print_epoch(log: &EpochLog) {
    match log.heldout {
        Some(r) => eprintln!("epoch {:4}  loss {:.4}  held-out acc {:.4}", log.epoch, log.train_loss, r.acc),
        None => eprintln!("epoch {:4}  loss {:.4}", log.epoch, log.train_loss),
    }
}

/// Runs a parsed command. `argv` (without the program name) is recorded in
/// the manifest so the run can be replayed.
pub fn execute(cli: Cli, argv: &[String]) -> Result<()> {
    let started = Instant::now();
    let run = |command| Run { command, argv, started };
    match cli.command {
        Command::Generate(a) => generate(a, run("generate")),
        Command::Pretrain(a) => cmd_pretrain(a, run("pretrain")),
        Command::Train(a) => cmd_train(a, None, run("train")),
        Command::Finetune(a) => cmd_train(a.train, Some(a.init_from), run("finetune")),
        Command::Predict(a) => predict(a, run("predict")),
        Command::Eval(a) => eval(a, run("eval")),
        Command::Convert(a) => convert(a, run("convert")),
        Command::Validate(a) => validate(a, run("validate")),
        Command::Ablate(a) => ablate(a, run("ablate")),
        Command::Replay(a) => replay(&a.manifest),
    }
}

fn replay(path: &Path) -> Result<()> {
    let manifest = RunManifest::read(path)?;
    let cli = Cli::try_parse_from(std::iter::once("tablelogic".to_string()).chain(manifest.argv.iter().cloned()))
        .map_err(|e| Error::InvalidConfig(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::InvalidConfig("a manifest cannot replay another replay".into()));
    }
    execute(cli, &manifest.argv)
}

fn generate(a: GenerateArgs, run: Run) -> Result<()> {
    let cfg = GenConfig {
        rows_range: a.rows,
        cols_range: a.cols,
        span_prob: a.span_prob,
        max_span: a.max_span,
        jitter_sigma: a.jitter,
        image_size: a.image,
        words_per_cell_range: a.words,
        seed: a.seed,
        ..GenConfig::default()
    };
    cfg.validate()?;
    let out = resolve_out(&a.out, "corpus.ndjson");
    let records: Vec<DatasetRecord> = (0..a.count as u64).map(|i| generate_record(&cfg, i, a.max_pairs)).collect();
    write_dataset(&out, &records)?;
    println!("{} records -> {}", records.len(), out.display());
    let config = json!({ "generator": cfg, "count": a.count, "max_pairs": a.max_pairs });
    run.finish(config, vec![a.seed], &[], &[&out])
}

fn cmd_pretrain(a: PretrainArgs, run: Run) -> Result<()> {
    let model_cfg = model_config(&a.model, InterArg::Ordered)?;
    let cfg = PretrainConfig {
        epochs: a.model.epochs,
        batch_size: a.model.batch,
        seed: a.seed,
        lr: LrSchedule { initial: a.model.lr, decay_at: vec![], factor: 1.0, warmup_fraction: a.warmup },
        adam: AdamConfig::pretraining(),
    };
    let out = resolve_out(&a.out, "ldp.json");
    let corpus = read_dataset(&a.data)?;
    let outcome = pretrain(&corpus, &model_cfg, &cfg, |l| eprintln!("epoch {:4}  loss {:.4}", l.epoch, l.loss))?;
    outcome.model.checkpoint(&outcome.store).save(&out)?;
    let log = sidecar(&out, ".metrics.ndjson");
    write_ndjson(&log, &outcome.history)?;
    let config = json!({ "model": model_cfg, "pretrain": cfg });
    run.finish(config, vec![a.seed], &[&a.data], &[&out, &log])
}

fn cmd_train(a: TrainArgs, init_from: Option<PathBuf>, run: Run) -> Result<()> {
    let mut model_cfg = model_config(&a.model, a.inter_variant)?;
    if let Some(id) = &a.ablation {
        model_cfg = Ablation::parse(id)?.apply(&model_cfg);
    }
    let cfg = train_config(&a.model, a.seed, a.augment);
    let out = resolve_out(&a.out, "model.json");
    let metrics_path = a.metrics_out.clone().unwrap_or_else(|| sidecar(&out, ".metrics.ndjson"));
    let data = read_dataset(&a.data)?;
    let heldout = match &a.heldout {
        Some(p) => read_dataset(p)?,
        None => Vec::new(),
    };
    let (model, store, history) = match &init_from {
        None => {
            let o = train(&data, &heldout, &model_cfg, &cfg, print_epoch)?;
            (o.model, o.store, o.history)
        }
        Some(ckpt) => {
            let (model, mut store) = transfer_from_file(ckpt, &model_cfg, a.seed)?;
            let history = fit(&model, &mut store, &samples_from(&data)?, &samples_from(&heldout)?, &cfg, print_epoch)?;
            (model, store, history)
        }
    };
    model.save(&store, &out)?;
    write_ndjson(&metrics_path, &history)?;
    let mut inputs: Vec<&Path> = vec![&a.data];
    inputs.extend(a.heldout.as_deref());
    inputs.extend(init_from.as_deref());
    let config = json!({ "model": model_cfg, "train": cfg, "ablation": a.ablation });
    run.finish(config, vec![a.seed], &inputs, &[&out, &metrics_path])
}

/// Rebuilds a table from input quads and predicted logical locations.
pub(crate) fn predicted_table(record: &DatasetRecord, model: &CascadeRegressor, store: &crate::tensor::ParamStore) -> Result<Table> {
    let quads = record.input_quads();
    let pred = model.predict(store, &quads, record.table.image_size)?;
    let mut t = Table::from_locations(record.table.image_size, quads.into_iter().zip(pred.rounded));
    for (cell, src) in t.cells.iter_mut().zip(&record.table.cells) {
        cell.id = src.id;
    }
    Ok(t)
}

fn predict(a: PredictArgs, run: Run) -> Result<()> {
    let (model, store) = CascadeRegressor::load(&a.ckpt)?;
    let records = read_dataset(&a.data)?;
    let out = resolve_out(&a.out, "predictions.ndjson");
    let preds = records
        .iter()
        .map(|r| Ok(DatasetRecord { id: r.id.clone(), ..DatasetRecord::from_table(predicted_table(r, &model, &store)?) }))
        .collect::<Result<Vec<_>>>()?;
    write_dataset(&out, &preds)?;
    println!("{} tables -> {}", preds.len(), out.display());
    run.finish(json!({ "model": model.config }), vec![], &[&a.ckpt, &a.data], &[&out])
}

fn metric_fields(m: MetricArg) -> &'static [&'static str] {
    match m {
        MetricArg::Detection => &["detection_p", "detection_r", "detection_f1"],
        MetricArg::Adjacency => &["adjacency_p", "adjacency_r", "adjacency_f1"],
        MetricArg::Logical => &["logical_accuracy", "logical_accuracy_spanning", "spanning_count"],
        MetricArg::Teds => &["teds"],
        MetricArg::Bleu => &["bleu"],
    }
}

fn eval(a: EvalArgs, run: Run) -> Result<()> {
    if !(a.iou > 0.0 && a.iou <= 1.0) {
        return Err(Error::InvalidConfig(format!("IoU threshold {} not in (0, 1]", a.iou)));
    }
    let pred = read_dataset(&a.pred)?;
    let gt = read_dataset(&a.gt)?;
    let mut mismatched = Vec::new();
    for k in 0..pred.len().max(gt.len()) {
        let id = |r: Option<&DatasetRecord>| match r {
            None => "<missing>".to_string(),
            Some(r) => r.id.clone().unwrap_or_else(|| format!("#{k}")),
        };
        let (p, g) = (id(pred.get(k)), id(gt.get(k)));
        if p != g {
            mismatched.push(format!("{p} vs {g}"));
        }
    }
    if !mismatched.is_empty() {
        return Err(Error::IdMismatch(mismatched));
    }
    let report = evaluate_dataset(pred.iter().map(|r| &r.table).zip(gt.iter().map(|r| &r.table)), a.iou)?;
    let mut value = serde_json::to_value(report).expect("report serializes");
    if !a.metric.is_empty() {
        let keep: Vec<&str> = a.metric.iter().flat_map(|m| metric_fields(*m).iter().copied()).collect();
        if let Value::Object(map) = &mut value {
            map.retain(|k, _| k == "tables" || keep.contains(&k.as_str()));
        }
    }
    let out = resolve_out(&a.out, "report.json");
    write_json(&out, &value)?;
    if a.metric.is_empty() {
        println!("{report}");
    } else {
        println!("{}", serde_json::to_string_pretty(&value).expect("report serializes"));
    }
    run.finish(json!({ "iou": a.iou, "metric": format!("{:?}", a.metric) }), vec![], &[&a.pred, &a.gt], &[&out])
}

enum Source {
    Records(Vec<DatasetRecord>),
    Markup(Vec<String>),
}

fn read_source(path: &Path) -> Result<Source> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.trim_start().chars().next();
    if first == Some('<') {
        return Ok(Source::Markup(text.lines().map(str::to_string).collect()));
    }
    if first.is_none() {
        return Ok(Source::Records(Vec::new()));
    }
    Ok(Source::Records(read_dataset(path)?))
}

fn convert(a: ConvertArgs, run: Run) -> Result<()> {
    let records = match read_source(&a.input)? {
        Source::Records(r) => r,
        Source::Markup(lines) => lines
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                markup_to_table(l).map(DatasetRecord::from_table).map_err(|e| Error::Schema {
                    path: a.input.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?,
    };
    let (default, ext) = match a.to {
        ConvertTarget::Markup => ("converted.markup", "markup"),
        ConvertTarget::Adjacency => ("converted.adjacency.ndjson", "adjacency"),
        ConvertTarget::Json => ("converted.ndjson", "json"),
    };
    let out = resolve_out(&a.out, default);
    match a.to {
        ConvertTarget::Markup => {
            let mut s = String::new();
            for r in &records {
                let has_text = r.table.cells.iter().any(|c| c.text.is_some());
                s.push_str(&if has_text { to_markup_with_text(&r.table) } else { to_markup(&r.table) });
                s.push('\n');
            }
            std::fs::write(&out, s).map_err(|e| Error::io(&out, e))?;
        }
        ConvertTarget::Adjacency => {
            let rows: Vec<Value> =
                records.iter().map(|r| json!({ "id": r.id, "triplets": adjacency_triplets(&r.table) })).collect();
            write_ndjson(&out, &rows)?;
        }
        ConvertTarget::Json => write_dataset(&out, &records)?,
    }
    println!("{} tables -> {}", records.len(), out.display());
    run.finish(json!({ "to": ext }), vec![], &[&a.input], &[&out])
}

fn validate(a: ValidateArgs, run: Run) -> Result<()> {
    let records = read_dataset(&a.input)?;
    let mut invalid = Vec::new();
    for (k, r) in records.iter().enumerate() {
        let v = validate_table(&r.table);
        if !v.is_empty() {
            let id = r.id.clone().unwrap_or_else(|| format!("#{k}"));
            for violation in &v {
                eprintln!("{id}: {violation}");
            }
            invalid.push(json!({ "id": id, "line": k + 1, "violations": v }));
        }
    }
    let out = resolve_out(&a.out, "validation.json");
    let n_invalid = invalid.len();
    write_json(&out, &json!({ "records": records.len(), "invalid": n_invalid, "details": invalid }))?;
    println!("{} records, {} invalid", records.len(), n_invalid);
    run.finish(json!({}), vec![], &[&a.input], &[&out])?;
    if n_invalid > 0 {
        return Err(Error::InvalidConfig(format!("{n_invalid} of {} records failed validation", records.len())));
    }
    Ok(())
}

/// Median of a non-empty list (mean of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ablate(a: AblateArgs, run: Run) -> Result<()> {
    let base = model_config(&a.model, InterArg::Ordered)?;
    let rows: Vec<Ablation> = if a.rows.is_empty() {
        Ablation::ALL.to_vec()
    } else {
        a.rows.iter().map(|r| Ablation::parse(r)).collect::<Result<_>>()?
    };
    let data = read_dataset(&a.data)?;
    let heldout = read_dataset(&a.heldout)?;
    let mut table = Vec::new();
    for row in rows {
        let cfg = row.apply(&base);
        let mut runs = Vec::new();
        for &seed in &a.seeds {
            let tc = TrainConfig { eval_every: a.model.epochs.max(1), ..train_config(&a.model, seed, 0.0) };
            let o = train(&data, &heldout, &cfg, &tc, |_| {})?;
            let r: AccuracyReport = o.history.last().and_then(|l| l.heldout).unwrap_or_default();
            eprintln!("{} seed {seed}: acc {:.4}", row.id(), r.acc);
            runs.push(json!({ "seed": seed, "a_c": r.a_c, "a_r": r.a_r, "acc": r.acc }));
        }
        let col = |k: &str| median(&runs.iter().map(|r| r[k].as_f64().unwrap_or(f64::NAN)).collect::<Vec<_>>());
        table.push(json!({
            "id": row.id(),
            "l1": true,
            "inter": cfg.enable_inter,
            "intra": cfg.enable_intra,
            "cascade": cfg.enable_stacking,
            "base": cfg.layers_base,
            "stacking": if cfg.enable_stacking { cfg.layers_stack } else { 0 },
            "a_c": col("a_c"),
            "a_r": col("a_r"),
            "acc": col("acc"),
            "runs": runs,
        }));
    }
    let out = resolve_out(&a.out, "ablation.json");
    write_json(&out, &json!({ "model": base, "seeds": a.seeds, "rows": table }))?;
    println!("ablation matrix -> {}", out.display());
    run.finish(json!({ "model": base, "epochs": a.model.epochs }), a.seeds.clone(), &[&a.data, &a.heldout], &[&out])
}
