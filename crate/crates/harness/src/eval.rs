use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use baps_core::adapter::read_checkpoint;
use baps_core::dataset::fingerprint;
use baps_core::metrics::{dice_score, hd95, BIN_THRESHOLD};
use baps_zoo::{RngStream, Variant};

use crate::config::{Mode, RunConfig};
use crate::pipeline::{build_oracle, dataset_shape, load_dataset, Adapter};
use crate::train::{prepare_fixed, STREAM_EVAL_PROMPTS};
use crate::HarnessError;

pub const EVAL_CSV_FILE: &str = "eval.csv";
pub const REPORT_FILE: &str = "report.toml";
pub const EVAL_SUMMARY_FILE: &str = "eval_summary.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub repeat: usize,
    pub sample_id: u64,
    pub x: usize,
    pub y: usize,
    pub dice: f64,
    pub hd95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub repeat: usize,
    pub dice_mean: f64,
    pub hd95_mean: f64,
}

/// Test-split scores. Aggregates are means over repeats of the per-repeat
/// means; the spreads are population standard deviations across repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Variant>,
    pub config_fingerprint: String,
    pub dataset_fingerprint: String,
    pub dice_mean: f64,
    pub dice_std: f64,
    pub hd95_mean: f64,
    pub hd95_std: f64,
    pub oracle_calls: u64,
    /// Not persisted in `report.toml`, which must be reproducible.
    #[serde(skip)]
    pub wall_clock_secs: f64,
    pub repeats: Vec<RepeatSummary>,
    pub samples: Vec<SampleResult>,
}

impl EvalReport {
    /// Row label such as `baps/spsa-geass`.
    pub fn label(&self) -> String {
        match self.optimizer {
            Some(v) => format!("{}/{}", self.mode, v),
            None => self.mode.to_string(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            fs::read_to_string(path).map_err(|e| HarnessError::Data(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scores the test split `cfg.eval_repeats` times, each time with fresh
/// seeded point prompts. Modes other than zeroshot need a checkpoint.
pub fn evaluate(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<EvalReport, HarnessError> {
    cfg.validate()?;
    let started = Instant::now();
    let data = load_dataset(cfg)?;
    let (h, w, c) = dataset_shape(&data)?;
    let adapter = Adapter::new(cfg.mode, h, w, c, cfg.encoder_seed)?;

    let weights = match (cfg.mode, checkpoint) {
        (Mode::Zeroshot, _) => Vec::new(),
        (_, None) => {
            return Err(HarnessError::Config(format!("mode {} needs a checkpoint", cfg.mode)));
        }
        (_, Some(path)) => {
            let w = read_checkpoint(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
            if w.len() != adapter.param_count() {
                return Err(HarnessError::Data(format!(
                    "checkpoint holds {} parameters, mode {} expects {}",
                    w.len(),
                    cfg.mode,
                    adapter.param_count()
                )));
            }
            w
        }
    };

    let oracle = build_oracle(cfg)?;
    let root = RngStream::new(cfg.seed).split(STREAM_EVAL_PROMPTS);
    let mut samples = Vec::new();
    let mut repeats = Vec::new();
    for r in 0..cfg.eval_repeats {
        let items = prepare_fixed(&adapter, &data.test, &root.split(r as u64))?;
        let masks = adapter.predict_all(&weights, &items, oracle.as_ref())?;
        let mut dices = Vec::with_capacity(items.len());
        let mut hds = Vec::with_capacity(items.len());
        for ((mask, item), s) in masks.iter().zip(&items).zip(&data.test) {
            let dice = dice_score(mask, &item.gt, BIN_THRESHOLD)?;
            let hd = hd95(mask, &item.gt, BIN_THRESHOLD)?;
            dices.push(dice);
            hds.push(hd);
            samples.push(SampleResult {
                repeat: r,
                sample_id: s.sample_id,
                x: item.point.x,
                y: item.point.y,
                dice,
                hd95: hd,
            });
        }
        repeats.push(RepeatSummary {
            repeat: r,
            dice_mean: mean_std(&dices).0,
            hd95_mean: mean_std(&hds).0,
        });
    }
    let (dice_mean, dice_std) = mean_std(&repeats.iter().map(|r| r.dice_mean).collect::<Vec<_>>());
    let (hd95_mean, hd95_std) = mean_std(&repeats.iter().map(|r| r.hd95_mean).collect::<Vec<_>>());

    Ok(EvalReport {
        mode: cfg.mode,
        optimizer: cfg.optimizer.as_ref().map(|o| o.variant),
        config_fingerprint: cfg.fingerprint(),
        dataset_fingerprint: fingerprint(&data),
        dice_mean,
        dice_std,
        hd95_mean,
        hd95_std,
        oracle_calls: oracle.call_count(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
        repeats,
        samples,
    })
}

/// Writes `eval.csv`, `report.toml` and `eval_summary.txt` into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let mut csv = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(dir.join(EVAL_CSV_FILE))?;
    csv.write_record(["repeat", "sample_id", "x", "y", "dice", "hd95"])?;
    for s in &report.samples {
        csv.serialize(s)?;
    }
    csv.flush()?;
    fs::write(dir.join(REPORT_FILE), report.to_toml())?;

    let mut summary = fs::File::create(dir.join(EVAL_SUMMARY_FILE))?;
    writeln!(summary, "{}", report.label())?;
    writeln!(summary, "dice: {:.4} ± {:.4}", report.dice_mean, report.dice_std)?;
    writeln!(summary, "hd95: {:.3} ± {:.3}", report.hd95_mean, report.hd95_std)?;
    writeln!(summary, "repeats: {}", report.repeats.len())?;
    writeln!(summary, "oracle calls: {}", report.oracle_calls)?;
    writeln!(summary, "wall clock: {:.1}s", report.wall_clock_secs)?;
    Ok(())
}
