use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;

use baps_core::adapter::write_checkpoint;
use baps_core::dataset::{augment, sample_point_prompt, SegmentationSample};
use baps_core::metrics::{dice_score, BIN_THRESHOLD};
use baps_core::{BlackboxOracle, CoreError};
use baps_zoo::{write_trace_csv, Optimizer, ParamVector, RngStream, TraceRow, ZooError};

use crate::config::{Mode, RunConfig};
use crate::pipeline::{build_oracle, dataset_shape, load_dataset, Adapter, BatchObjective, PreparedItem};
use crate::HarnessError;

pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_SHUFFLE: u64 = 2;
pub(crate) const STREAM_AUGMENT: u64 = 3;
pub(crate) const STREAM_OPTIMIZER: u64 = 4;
pub(crate) const STREAM_VAL_PROMPTS: u64 = 5;
pub(crate) const STREAM_EVAL_PROMPTS: u64 = 6;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRACE_FILE: &str = "trace.csv";
pub const VAL_FILE: &str = "val.csv";
pub const TRAIN_SUMMARY_FILE: &str = "train_summary.txt";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub best_params: ParamVector,
    pub final_params: ParamVector,
    pub trace: Vec<TraceRow>,
    /// `(epoch, validation Dice)`; epoch 0 is the initial weights.
    pub val_history: Vec<(usize, f64)>,
    pub best_epoch: usize,
    pub best_val_dice: f64,
    /// The bare segmenter on the same validation prompts.
    pub zeroshot_val_dice: f64,
    pub iterations: u64,
    /// Segment calls made by the training objective (validation excluded).
    pub oracle_calls: u64,
    pub wall_clock: Duration,
}

/// Mean Dice of `items` under `weights`.
pub fn mean_dice(
    adapter: &Adapter,
    weights: &[f64],
    items: &[PreparedItem],
    oracle: &dyn BlackboxOracle,
) -> Result<f64, HarnessError> {
    let masks = adapter.predict_all(weights, items, oracle)?;
    let mut total = 0.0;
    for (m, item) in masks.iter().zip(items) {
        total += dice_score(m, &item.gt, BIN_THRESHOLD)?;
    }
    Ok(total / items.len() as f64)
}

/// Validation items with prompts fixed for the whole run.
pub(crate) fn prepare_fixed(
    adapter: &Adapter,
    samples: &[SegmentationSample],
    stream: &RngStream,
) -> Result<Vec<PreparedItem>, HarnessError> {
    samples
        .iter()
        .map(|s| {
            let point = sample_point_prompt(&s.gt, &mut stream.split(s.sample_id))?;
            adapter.prepare(s.image.clone(), point, s.gt.clone())
        })
        .collect()
}

fn prepare_training_item(
    adapter: &Adapter,
    s: &SegmentationSample,
    stream: &mut RngStream,
) -> Result<PreparedItem, HarnessError> {
    let (image, gt) = augment(&s.image, &s.gt, stream)?;
    let (image, gt) = if gt.count() == 0 {
        // rotation pushed the whole shape out of frame
        (s.image.clone(), s.gt.clone())
    } else {
        (image, gt)
    };
    let point = sample_point_prompt(&gt, stream)?;
    adapter.prepare(image, point, gt)
}

fn classify(err: ZooError, iteration: u64) -> HarnessError {
    match err {
        ZooError::NonFiniteLoss { .. } | ZooError::NonFiniteParams { .. } => HarnessError::Divergence {
            iteration,
            reason: err.to_string(),
        },
        ZooError::Oracle(inner) => match inner.downcast::<HarnessError>() {
            Ok(e) => weights_diverged(*e, iteration),
            Err(other) => HarnessError::Oracle(baps_core::OracleError::Remote(other.to_string())),
        },
        other => other.into(),
    }
}

fn weights_diverged(err: HarnessError, iteration: u64) -> HarnessError {
    match err {
        HarnessError::Model(CoreError::NonFiniteWeights) => HarnessError::Divergence {
            iteration,
            reason: "non-finite prompt weights".into(),
        },
        other => other,
    }
}

/// Trains the prompt generator for `cfg.epochs` epochs, one optimizer step per
/// full batch, and keeps the weights with the best validation Dice.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    let started = Instant::now();
    let opt_cfg = match (&cfg.optimizer, cfg.mode) {
        (Some(o), Mode::Vpt | Mode::Baps) => o.clone(),
        _ => return Err(HarnessError::Config("training needs mode vpt or baps".into())),
    };
    let data = load_dataset(cfg)?;
    let (h, w, c) = dataset_shape(&data)?;
    let adapter = Adapter::new(cfg.mode, h, w, c, cfg.encoder_seed)?;
    let root = RngStream::new(cfg.seed);

    let oracle = build_oracle(cfg)?;
    let val_oracle = build_oracle(cfg)?;
    let val_items = prepare_fixed(&adapter, &data.val, &root.split(STREAM_VAL_PROMPTS))?;
    let bare = Adapter::new(Mode::Zeroshot, h, w, c, cfg.encoder_seed)?;
    let bare_items = prepare_fixed(&bare, &data.val, &root.split(STREAM_VAL_PROMPTS))?;
    let zeroshot_val_dice = mean_dice(&bare, &[], &bare_items, val_oracle.as_ref())?;

    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join(CONFIG_FILE), cfg.to_toml())?;
    let checkpoint = cfg.out.join(CHECKPOINT_FILE);

    let init = adapter
        .init_params(root.split(STREAM_INIT).seed())
        .expect("trainable mode");
    let mut best_params = init.clone();
    let mut best_val_dice = mean_dice(&adapter, &init, &val_items, val_oracle.as_ref())?;
    let mut best_epoch = 0;
    let mut val_history = vec![(0, best_val_dice)];
    write_checkpoint(&checkpoint, &init)?;

    let mut optimizer = Optimizer::new(opt_cfg.variant, opt_cfg.hp, init, root.split(STREAM_OPTIMIZER).seed())?;
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let shuffle = root.split(STREAM_SHUFFLE);
    let augment_stream = root.split(STREAM_AUGMENT);
    let mut failure = None;

    'epochs: for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut shuffle.split(epoch as u64));
        let epoch_aug = augment_stream.split(epoch as u64);
        for batch in order.chunks_exact(cfg.batch_size) {
            let items = batch
                .iter()
                .map(|&i| {
                    let s = &data.train[i];
                    prepare_training_item(&adapter, s, &mut epoch_aug.split(s.sample_id))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let objective = BatchObjective {
                adapter: &adapter,
                items: &items,
                oracle: oracle.as_ref(),
            };
            match optimizer.step(&objective) {
                Ok(row) => trace.push(row),
                Err(e) => {
                    failure = Some(classify(e, trace.len() as u64));
                    break 'epochs;
                }
            }
        }
        let dice = match mean_dice(&adapter, optimizer.params(), &val_items, val_oracle.as_ref()) {
            Ok(d) => d,
            Err(e) => {
                failure = Some(weights_diverged(e, trace.len() as u64));
                break;
            }
        };
        val_history.push((epoch, dice));
        if dice > best_val_dice {
            best_val_dice = dice;
            best_epoch = epoch;
            best_params = optimizer.params().clone();
            write_checkpoint(&checkpoint, &best_params)?;
        }
    }

    let outcome = TrainOutcome {
        checkpoint,
        best_params,
        final_params: optimizer.params().clone(),
        iterations: trace.len() as u64,
        trace,
        val_history,
        best_epoch,
        best_val_dice,
        zeroshot_val_dice,
        oracle_calls: oracle.call_count(),
        wall_clock: started.elapsed(),
    };
    write_outputs(cfg, &outcome, failure.as_ref())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(outcome),
    }
}

fn write_outputs(cfg: &RunConfig, out: &TrainOutcome, failure: Option<&HarnessError>) -> Result<(), HarnessError> {
    write_trace_csv(&out.trace, fs::File::create(cfg.out.join(TRACE_FILE))?)?;

    let mut val = csv::Writer::from_path(cfg.out.join(VAL_FILE))?;
    val.write_record(["epoch", "val_dice"])?;
    for (epoch, dice) in &out.val_history {
        val.write_record([epoch.to_string(), dice.to_string()])?;
    }
    val.flush()?;

    let mut summary = fs::File::create(cfg.out.join(TRAIN_SUMMARY_FILE))?;
    writeln!(summary, "mode: {}", cfg.mode)?;
    if let Some(opt) = &cfg.optimizer {
        writeln!(summary, "optimizer: {}", opt.variant)?;
    }
    writeln!(summary, "iterations: {}", out.iterations)?;
    writeln!(summary, "oracle calls: {}", out.oracle_calls)?;
    writeln!(summary, "best epoch: {}", out.best_epoch)?;
    writeln!(summary, "best validation dice: {:.4}", out.best_val_dice)?;
    writeln!(summary, "initial validation dice: {:.4}", out.val_history[0].1)?;
    writeln!(summary, "zero-shot validation dice: {:.4}", out.zeroshot_val_dice)?;
    writeln!(summary, "wall clock: {:.1}s", out.wall_clock.as_secs_f64())?;
    if let Some(e) = failure {
        writeln!(summary, "aborted: {e}")?;
    }
    Ok(())
}
