//! Run configuration, stored as a flat TOML table. Every hyperparameter is a
//! top-level key (`alpha`, `c`, `beta`, `k1`, `cooldown`, `eta1`, `eta2`,
//! `grad_threshold`, `batch_size`, ...).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use baps_blackbox::GrowerParams;
use baps_core::dataset::DatasetSpec;
use baps_zoo::{Variant, ZooHyperparams};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The segmenter on its own.
    Zeroshot,
    /// One learned prompt shared by every image.
    Vpt,
    /// Image- and point-conditioned prompt from the trainable decoder.
    Baps,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Zeroshot => "zeroshot",
            Mode::Vpt => "vpt",
            Mode::Baps => "baps",
        }
    }

    /// Position in the expected quality ordering.
    pub fn rank(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zeroshot" => Ok(Mode::Zeroshot),
            "vpt" => Ok(Mode::Vpt),
            "baps" => Ok(Mode::Baps),
            _ => Err(format!("unknown mode `{s}` (expected zeroshot, vpt or baps)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    InProcess,
    Subprocess,
}

impl FromStr for OracleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in-process" => Ok(OracleMode::InProcess),
            "subprocess" => Ok(OracleMode::Subprocess),
            _ => Err(format!("unknown oracle mode `{s}` (expected in-process or subprocess)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub variant: Variant,
    pub hp: ZooHyperparams,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Generate(DatasetSpec),
    /// Directory holding `train.bin`, `val.bin`, `test.bin`.
    Dir(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// Absent exactly when `mode` is zeroshot.
    pub optimizer: Option<OptimizerConfig>,
    pub batch_size: usize,
    pub epochs: usize,
    pub eval_repeats: usize,
    pub seed: u64,
    pub encoder_seed: u64,
    pub data: DataSource,
    pub out: PathBuf,
    pub oracle: OracleMode,
    pub oracle_command: Option<PathBuf>,
    pub tolerance: f64,
    pub sigma: f64,
    pub connectivity: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_mode(Mode::Baps)
    }
}

impl RunConfig {
    pub fn for_mode(mode: Mode) -> Self {
        let optimizer = (mode != Mode::Zeroshot).then(|| OptimizerConfig {
            variant: Variant::SpsaGeass,
            hp: ZooHyperparams::default(),
        });
        Self {
            mode,
            optimizer,
            batch_size: 32,
            epochs: 30,
            eval_repeats: 3,
            seed: 0,
            encoder_seed: 0,
            data: DataSource::Generate(DatasetSpec::default()),
            out: PathBuf::from("runs"),
            oracle: OracleMode::InProcess,
            oracle_command: None,
            tolerance: 0.15,
            sigma: 1.0,
            connectivity: 4,
        }
    }

    pub fn grower_params(&self) -> Result<GrowerParams, HarnessError> {
        GrowerParams::new(self.tolerance as f32, self.sigma as f32, self.connectivity).map_err(HarnessError::Config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        match (&self.optimizer, self.mode) {
            (Some(_), Mode::Zeroshot) => return bad("mode zeroshot takes no optimizer settings".into()),
            (None, Mode::Vpt | Mode::Baps) => return bad(format!("mode {} needs an optimizer", self.mode)),
            _ => {}
        }
        if let Some(opt) = &self.optimizer {
            opt.hp.validate()?;
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.eval_repeats == 0 {
            return bad("eval_repeats must be positive".into());
        }
        if let DataSource::Generate(spec) = &self.data {
            spec.validate()?;
            if self.batch_size > spec.n_train {
                return bad(format!(
                    "batch_size {} exceeds the {} training samples",
                    self.batch_size, spec.n_train
                ));
            }
        }
        self.grower_params()?;
        Ok(())
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self, HarnessError> {
        let mode = raw.mode.unwrap_or(Mode::Baps);
        let mut cfg = Self::for_mode(mode);
        let optimizer_keys = [
            raw.optimizer.is_some(),
            raw.c.is_some(),
            raw.alpha.is_some(),
            raw.beta.is_some(),
            raw.k1.is_some(),
            raw.cooldown.is_some(),
            raw.eta1.is_some(),
            raw.eta2.is_some(),
            raw.grad_threshold.is_some(),
        ];
        if mode == Mode::Zeroshot && optimizer_keys.iter().any(|&k| k) {
            return Err(HarnessError::Config("mode zeroshot takes no optimizer settings".into()));
        }
        if let Some(opt) = &mut cfg.optimizer {
            let hp = &mut opt.hp;
            opt.variant = raw.optimizer.unwrap_or(opt.variant);
            hp.c = raw.c.unwrap_or(hp.c);
            hp.alpha = raw.alpha.unwrap_or(hp.alpha);
            hp.beta = raw.beta.unwrap_or(hp.beta);
            hp.k1 = raw.k1.unwrap_or(hp.k1);
            hp.cooldown = raw.cooldown.unwrap_or(hp.cooldown);
            hp.eta1 = raw.eta1.unwrap_or(hp.eta1);
            hp.eta2 = raw.eta2.unwrap_or(hp.eta2);
            hp.grad_threshold = raw.grad_threshold.unwrap_or(hp.grad_threshold);
        }

        let spec_keys = [
            raw.n_train.is_some(),
            raw.n_val.is_some(),
            raw.n_test.is_some(),
            raw.height.is_some(),
            raw.width.is_some(),
            raw.channels.is_some(),
            raw.noise_std.is_some(),
            raw.ramp_strength.is_some(),
            raw.data_seed.is_some(),
        ];
        cfg.data = match raw.data_dir {
            Some(dir) => {
                if spec_keys.iter().any(|&k| k) {
                    return Err(HarnessError::Config(
                        "data_dir cannot be combined with generator settings".into(),
                    ));
                }
                DataSource::Dir(dir)
            }
            None => {
                let d = DatasetSpec::default();
                DataSource::Generate(DatasetSpec {
                    n_train: raw.n_train.unwrap_or(d.n_train),
                    n_val: raw.n_val.unwrap_or(d.n_val),
                    n_test: raw.n_test.unwrap_or(d.n_test),
                    height: raw.height.unwrap_or(d.height),
                    width: raw.width.unwrap_or(d.width),
                    channels: raw.channels.unwrap_or(d.channels),
                    noise_std: raw.noise_std.unwrap_or(d.noise_std),
                    ramp_strength: raw.ramp_strength.unwrap_or(d.ramp_strength),
                    seed: raw.data_seed.unwrap_or(d.seed),
                })
            }
        };

        cfg.batch_size = raw.batch_size.unwrap_or(cfg.batch_size);
        cfg.epochs = raw.epochs.unwrap_or(cfg.epochs);
        cfg.eval_repeats = raw.eval_repeats.unwrap_or(cfg.eval_repeats);
        cfg.seed = raw.seed.unwrap_or(cfg.seed);
        cfg.encoder_seed = raw.encoder_seed.unwrap_or(cfg.encoder_seed);
        cfg.out = raw.out.unwrap_or(cfg.out);
        cfg.oracle = raw.oracle.unwrap_or(cfg.oracle);
        cfg.oracle_command = raw.oracle_command;
        cfg.tolerance = raw.tolerance.unwrap_or(cfg.tolerance);
        cfg.sigma = raw.sigma.unwrap_or(cfg.sigma);
        cfg.connectivity = raw.connectivity.unwrap_or(cfg.connectivity);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_raw(&self) -> RawConfig {
        let mut raw = RawConfig {
            mode: Some(self.mode),
            batch_size: Some(self.batch_size),
            epochs: Some(self.epochs),
            eval_repeats: Some(self.eval_repeats),
            seed: Some(self.seed),
            encoder_seed: Some(self.encoder_seed),
            out: Some(self.out.clone()),
            oracle: Some(self.oracle),
            oracle_command: self.oracle_command.clone(),
            tolerance: Some(self.tolerance),
            sigma: Some(self.sigma),
            connectivity: Some(self.connectivity),
            ..RawConfig::default()
        };
        if let Some(opt) = &self.optimizer {
            raw.optimizer = Some(opt.variant);
            raw.c = Some(opt.hp.c);
            raw.alpha = Some(opt.hp.alpha);
            raw.beta = Some(opt.hp.beta);
            raw.k1 = Some(opt.hp.k1);
            raw.cooldown = Some(opt.hp.cooldown);
            raw.eta1 = Some(opt.hp.eta1);
            raw.eta2 = Some(opt.hp.eta2);
            raw.grad_threshold = Some(opt.hp.grad_threshold);
        }
        match &self.data {
            DataSource::Dir(dir) => raw.data_dir = Some(dir.clone()),
            DataSource::Generate(spec) => {
                raw.n_train = Some(spec.n_train);
                raw.n_val = Some(spec.n_val);
                raw.n_test = Some(spec.n_test);
                raw.height = Some(spec.height);
                raw.width = Some(spec.width);
                raw.channels = Some(spec.channels);
                raw.noise_std = Some(spec.noise_std);
                raw.ramp_strength = Some(spec.ramp_strength);
                raw.data_seed = Some(spec.seed);
            }
        }
        raw
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("flat config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_raw(RawConfig::load(path)?)
    }

    /// Hash of everything that influences results; output location and
    /// oracle transport are excluded.
    pub fn fingerprint(&self) -> String {
        let mut raw = self.to_raw();
        raw.out = None;
        raw.oracle = None;
        raw.oracle_command = None;
        let text = toml::to_string(&raw).expect("flat config serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The on-disk form: every key optional, unknown keys rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Variant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k1: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cooldown: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_repeats: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_val: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramp_strength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_command: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<u8>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Keys set in `other` replace those in `self`.
    pub fn merge(mut self, other: RawConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            mode,
            optimizer,
            c,
            alpha,
            beta,
            k1,
            cooldown,
            eta1,
            eta2,
            grad_threshold,
            batch_size,
            epochs,
            eval_repeats,
            seed,
            encoder_seed,
            data_dir,
            n_train,
            n_val,
            n_test,
            height,
            width,
            channels,
            noise_std,
            ramp_strength,
            data_seed,
            out,
            oracle,
            oracle_command,
            tolerance,
            sigma,
            connectivity
        );
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.eval_repeats, 3);
        let opt = cfg.optimizer.unwrap();
        assert_eq!(opt.variant, Variant::SpsaGeass);
        assert_eq!(opt.hp, ZooHyperparams::default());
    }

    #[test]
    fn toml_round_trip() {
        for mode in [Mode::Zeroshot, Mode::Vpt, Mode::Baps] {
            let mut cfg = RunConfig::for_mode(mode);
            cfg.seed = 17;
            cfg.sigma = 0.7;
            let text = cfg.to_toml();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg, "{text}");
        }
        let cfg = RunConfig {
            data: DataSource::Dir("some/dir".into()),
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn hyperparameter_names_are_keys() {
        let text = RunConfig::default().to_toml();
        for key in [
            "alpha",
            "c",
            "beta",
            "k1",
            "cooldown",
            "eta1",
            "eta2",
            "grad_threshold",
            "batch_size",
            "epochs",
            "eval_repeats",
        ] {
            assert!(text.lines().any(|l| l.starts_with(&format!("{key} = "))), "{key}");
        }
    }

    #[test]
    fn zeroshot_rejects_optimizer_keys() {
        let err = RunConfig::from_toml("mode = \"zeroshot\"\nalpha = 0.1\n").unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
        assert!(RunConfig::from_toml("mode = \"zeroshot\"\n").is_ok());
    }

    #[test]
    fn unknown_and_invalid_keys_rejected() {
        assert!(RunConfig::from_toml("learning_rate = 0.1\n").is_err());
        assert!(RunConfig::from_toml("beta = 1.5\n").is_err());
        assert!(RunConfig::from_toml("batch_size = 0\n").is_err());
        assert!(RunConfig::from_toml("data_dir = \"x\"\nn_train = 5\n").is_err());
        assert!(RunConfig::from_toml("connectivity = 6\n").is_err());
    }

    #[test]
    fn fingerprint_ignores_output_location() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = "elsewhere".into();
        b.oracle = OracleMode::Subprocess;
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn merge_overrides() {
        let base = RawConfig::parse("alpha = 0.1\nseed = 3\n").unwrap();
        let over = RawConfig {
            seed: Some(9),
            ..RawConfig::default()
        };
        let merged = base.merge(over);
        assert_eq!(merged.alpha, Some(0.1));
        assert_eq!(merged.seed, Some(9));
    }
}
