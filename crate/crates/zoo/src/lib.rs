//! Zero-order optimization over an opaque scalar loss.
//!
//! Three variants share one estimator:
//!
//! * [`Variant::Spsa`]: plain simultaneous-perturbation descent, `φ ← φ − α·ĝ(φ)`.
//! * [`Variant::SpsaGc`]: momentum with the gradient estimated at the lookahead
//!   point `φ + β·m`.
//! * [`Variant::SpsaGeass`]: `SpsaGc` plus a strike/cooldown controller that
//!   multiplies the step and probe sizes after a run of low-magnitude estimates.
//!
//! Every iteration costs exactly two loss evaluations. All randomness is drawn
//! from an explicit [`RngStream`], so runs are reproducible from a seed.

mod error;
pub mod geass;
pub mod objective;
mod params;
pub mod runner;
pub mod spsa;
mod stream;

pub use error::ZooError;
pub use geass::{geass_update, GeassCounters, GeassDecision};
pub use objective::{
    benchmark_by_name, multimodal_basin, quadratic, rosenbrock, BenchmarkFunction, Counted, FnLoss, LossOracle,
};
pub use params::{GradientEstimate, ParamVector, Perturbation};
pub use runner::{run_optimizer, write_trace_csv, Optimizer, RunOutcome, TraceRow, TRACE_HEADER};
pub use spsa::{
    sample_perturbation, spsa_estimate, spsa_gc_step, spsa_probe, spsa_step, OptimizerState, Probe, StepOutcome,
    Variant, ZooHyperparams,
};
pub use stream::RngStream;
