//! Prompt construction per mode and the batch objective handed to the
//! zero-order optimizer.

use std::path::Path;
use std::process::Command;

use rand::Rng;

use baps_blackbox::{make_oracle, SubprocessOracle};
use baps_core::adapter::{
    apply_prompt, embed_prompt, vpt_prompt, DecoderArch, FrozenEncoder, ImageEmbedding, PromptEmbedding, VisualPrompt,
    DEFAULT_GAMMA,
};
use baps_core::dataset::{self, Dataset, SegmentationSample, Split};
use baps_core::metrics::total_loss;
use baps_core::{BinaryMask, BlackboxOracle, CoreError, Image, PointPrompt, SoftMask};
use baps_zoo::{LossOracle, ParamVector, RngStream, ZooError};

use crate::config::{DataSource, Mode, OracleMode, RunConfig};
use crate::HarnessError;

const ENCODER_FEATURES: usize = 16;

/// Maps (weights, image, point) to the residual prompt for one mode.
pub struct Adapter {
    mode: Mode,
    shape: (usize, usize, usize),
    encoder: Option<FrozenEncoder>,
    arch: Option<DecoderArch>,
}

/// An (image, point, label) triple with the frozen embeddings precomputed.
pub struct PreparedItem {
    pub image: Image,
    pub point: PointPrompt,
    pub gt: BinaryMask,
    embeddings: Option<(ImageEmbedding, PromptEmbedding)>,
}

impl Adapter {
    pub fn new(
        mode: Mode,
        height: usize,
        width: usize,
        channels: usize,
        encoder_seed: u64,
    ) -> Result<Self, HarnessError> {
        let (encoder, arch) = if mode == Mode::Baps {
            let encoder = FrozenEncoder::new(height, width, channels, ENCODER_FEATURES, encoder_seed)?;
            let mut arch = DecoderArch::for_image(height, width, channels);
            arch.image_features = ENCODER_FEATURES;
            (Some(encoder), Some(arch))
        } else {
            (None, None)
        };
        Ok(Self {
            mode,
            shape: (height, width, channels),
            encoder,
            arch,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn arch(&self) -> Option<&DecoderArch> {
        self.arch.as_ref()
    }

    /// Number of trainable parameters (0 for zeroshot).
    pub fn param_count(&self) -> usize {
        match (self.mode, &self.arch) {
            (Mode::Baps, Some(arch)) => arch.param_count(),
            (Mode::Vpt, _) => self.shape.0 * self.shape.1 * self.shape.2,
            _ => 0,
        }
    }

    /// Initial trainable weights, uniform in `[-0.01, 0.01]`.
    pub fn init_params(&self, seed: u64) -> Option<ParamVector> {
        match (self.mode, &self.arch) {
            (Mode::Baps, Some(arch)) => Some(arch.init_weights(seed)),
            (Mode::Vpt, _) => {
                let mut rng = RngStream::new(seed);
                let values = (0..self.param_count())
                    .map(|_| rng.random_range(-0.01..=0.01))
                    .collect();
                Some(ParamVector::new(values).expect("finite init"))
            }
            _ => None,
        }
    }

    pub fn prepare(&self, image: Image, point: PointPrompt, gt: BinaryMask) -> Result<PreparedItem, HarnessError> {
        if image.shape() != self.shape {
            return Err(HarnessError::Data(format!(
                "image shape {:?} does not match the configured {:?}",
                image.shape(),
                self.shape
            )));
        }
        let embeddings = match (&self.encoder, &self.arch) {
            (Some(enc), Some(arch)) => Some((
                enc.encode(&image)?,
                embed_prompt(point, self.shape.0, self.shape.1, arch.prompt_dim)?,
            )),
            _ => None,
        };
        Ok(PreparedItem {
            image,
            point,
            gt,
            embeddings,
        })
    }

    fn shared_prompt(&self, weights: &[f64]) -> Result<Option<VisualPrompt>, CoreError> {
        match self.mode {
            Mode::Vpt => {
                let (h, w, c) = self.shape;
                vpt_prompt(weights, h, w, c, DEFAULT_GAMMA).map(Some)
            }
            _ => Ok(None),
        }
    }

    fn item_prompt(
        &self,
        weights: &[f64],
        shared: &Option<VisualPrompt>,
        item: &PreparedItem,
    ) -> Result<Option<VisualPrompt>, CoreError> {
        match (self.mode, &self.arch, &item.embeddings) {
            (Mode::Baps, Some(arch), Some((img_emb, p_emb))) => arch.decode(weights, img_emb, p_emb).map(Some),
            (Mode::Vpt, _, _) => Ok(shared.clone()),
            _ => Ok(None),
        }
    }

    /// Prompted image handed to the segmenter.
    pub fn prompted_image(&self, weights: &[f64], item: &PreparedItem) -> Result<Image, HarnessError> {
        let shared = self.shared_prompt(weights)?;
        self.prompted_with(weights, &shared, item)
    }

    fn prompted_with(
        &self,
        weights: &[f64],
        shared: &Option<VisualPrompt>,
        item: &PreparedItem,
    ) -> Result<Image, HarnessError> {
        Ok(match self.item_prompt(weights, shared, item)? {
            Some(vp) => apply_prompt(&item.image, &vp)?,
            None => item.image.clone(),
        })
    }

    /// Segmenter output for each item, in order.
    pub fn predict_all(
        &self,
        weights: &[f64],
        items: &[PreparedItem],
        oracle: &dyn BlackboxOracle,
    ) -> Result<Vec<SoftMask>, HarnessError> {
        let shared = self.shared_prompt(weights)?;
        items
            .iter()
            .map(|item| {
                let img = self.prompted_with(weights, &shared, item)?;
                Ok(oracle.segment(&img, item.point)?)
            })
            .collect()
    }
}

/// Mean BCE + Dice loss over `items`, each segmented from its prompted image
/// with its original point.
pub fn batch_loss(
    adapter: &Adapter,
    weights: &[f64],
    items: &[PreparedItem],
    oracle: &dyn BlackboxOracle,
) -> Result<f64, HarnessError> {
    if items.is_empty() {
        return Err(HarnessError::Data("empty batch".into()));
    }
    let masks = adapter.predict_all(weights, items, oracle)?;
    let mut total = 0.0;
    for (mask, item) in masks.iter().zip(items) {
        total += total_loss(mask, &item.gt)?;
    }
    Ok(total / items.len() as f64)
}

/// `batch_loss` over a fixed batch, as seen by the optimizer.
pub struct BatchObjective<'a> {
    pub adapter: &'a Adapter,
    pub items: &'a [PreparedItem],
    pub oracle: &'a dyn BlackboxOracle,
}

impl LossOracle for BatchObjective<'_> {
    fn evaluate(&self, phi: &[f64]) -> Result<f64, ZooError> {
        batch_loss(self.adapter, phi, self.items, self.oracle).map_err(|e| ZooError::Oracle(Box::new(e)))
    }
}

pub fn build_oracle(cfg: &RunConfig) -> Result<Box<dyn BlackboxOracle>, HarnessError> {
    let params = cfg.grower_params()?;
    match cfg.oracle {
        OracleMode::InProcess => Ok(make_oracle(params)),
        OracleMode::Subprocess => {
            let program = match &cfg.oracle_command {
                Some(p) => p.clone(),
                None => std::env::current_exe()?,
            };
            let mut cmd = Command::new(program);
            cmd.arg("blackbox-serve")
                .arg("--tolerance")
                .arg(cfg.tolerance.to_string())
                .arg("--sigma")
                .arg(cfg.sigma.to_string())
                .arg("--connectivity")
                .arg(cfg.connectivity.to_string());
            let oracle = SubprocessOracle::spawn(cmd)
                .map_err(|e| HarnessError::Config(format!("cannot start oracle subprocess: {e}")))?;
            Ok(Box::new(oracle))
        }
    }
}

pub fn split_path(dir: &Path, split: Split) -> std::path::PathBuf {
    dir.join(format!("{}.bin", split.name()))
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset, HarnessError> {
    match &cfg.data {
        DataSource::Generate(spec) => Ok(dataset::generate(spec)?),
        DataSource::Dir(dir) => {
            let read = |split: Split| -> Result<Vec<SegmentationSample>, HarnessError> {
                let path = split_path(dir, split);
                let file = std::fs::File::open(&path)
                    .map_err(|e| HarnessError::Data(format!("cannot open {}: {e}", path.display())))?;
                dataset::read_split(std::io::BufReader::new(file))
                    .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
            };
            let data = Dataset {
                train: read(Split::Train)?,
                val: read(Split::Val)?,
                test: read(Split::Test)?,
            };
            if data.train.len() < cfg.batch_size {
                return Err(HarnessError::Config(format!(
                    "batch_size {} exceeds the {} training samples",
                    cfg.batch_size,
                    data.train.len()
                )));
            }
            Ok(data)
        }
    }
}

/// Image shape shared by every sample of the dataset.
pub fn dataset_shape(data: &Dataset) -> Result<(usize, usize, usize), HarnessError> {
    let first = data
        .train
        .first()
        .or(data.test.first())
        .ok_or_else(|| HarnessError::Data("dataset is empty".into()))?;
    let shape = first.image.shape();
    for split in Split::ALL {
        if let Some(s) = data.split(split).iter().find(|s| s.image.shape() != shape) {
            return Err(HarnessError::Data(format!(
                "sample {} has shape {:?}, expected {shape:?}",
                s.sample_id,
                s.image.shape()
            )));
        }
    }
    Ok(shape)
}
