//! Orchestration of blackbox visual-prompt adaptation: configuration,
//! training with zero-order optimizers, evaluation, report comparison.

pub mod compare;
pub mod config;
mod error;
pub mod eval;
pub mod pipeline;
pub mod train;

pub use compare::{compare, Comparison, ComparisonRow, Step};
pub use config::{DataSource, Mode, OptimizerConfig, OracleMode, RawConfig, RunConfig};
pub use error::HarnessError;
pub use eval::{evaluate, write_report, EvalReport, RepeatSummary, SampleResult};
pub use pipeline::{batch_loss, build_oracle, load_dataset, Adapter, BatchObjective, PreparedItem};
pub use train::{mean_dice, train, TrainOutcome};
