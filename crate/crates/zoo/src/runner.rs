use std::io::Write;

use serde::Serialize;

use crate::geass::geass_update;
use crate::objective::LossOracle;
use crate::spsa::{spsa_gc_step, spsa_step, OptimizerState, StepOutcome, Variant, ZooHyperparams};
use crate::{GradientEstimate, ParamVector, RngStream, ZooError};

/// One row of an optimization trace. `loss` is the mean of the two probe
/// losses of that iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: u64,
    pub loss: f64,
    pub grad_rms: f64,
    pub alpha_eff: f64,
    pub c_eff: f64,
    pub strike: u32,
    pub boost_active: bool,
}

/// Iterative driver owning parameters, state and the perturbation stream.
#[derive(Clone, Debug)]
pub struct Optimizer {
    variant: Variant,
    hp: ZooHyperparams,
    params: ParamVector,
    state: OptimizerState,
    last_grad: Option<GradientEstimate>,
    rng: RngStream,
}

impl Optimizer {
    pub fn new(variant: Variant, hp: ZooHyperparams, phi0: ParamVector, seed: u64) -> Result<Self, ZooError> {
        hp.validate()?;
        let state = OptimizerState::new(phi0.dim());
        Ok(Self {
            variant,
            hp,
            params: phi0,
            state,
            last_grad: None,
            rng: RngStream::new(seed),
        })
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Runs one iteration (two oracle calls). On error nothing but the
    /// perturbation stream advances.
    pub fn step<L: LossOracle + ?Sized>(&mut self, loss: &L) -> Result<TraceRow, ZooError> {
        let out: StepOutcome = match self.variant {
            Variant::Spsa => spsa_step(loss, &self.params, &self.state, &self.hp, &mut self.rng)?,
            Variant::SpsaGc => spsa_gc_step(
                loss,
                &self.params,
                &self.state,
                &self.hp,
                self.hp.alpha,
                self.hp.c,
                &mut self.rng,
            )?,
            Variant::SpsaGeass => {
                // the boost decision for this iteration uses the previous
                // iteration's estimate; iteration 0 runs at base values
                let mut state = self.state.clone();
                let (alpha_eff, c_eff) = match &self.last_grad {
                    Some(g) => {
                        let d = geass_update(state.geass, g, &self.hp);
                        state.geass = d.counters;
                        (d.alpha_eff, d.c_eff)
                    }
                    None => (self.hp.alpha, self.hp.c),
                };
                spsa_gc_step(loss, &self.params, &state, &self.hp, alpha_eff, c_eff, &mut self.rng)?
            }
        };

        let row = TraceRow {
            iteration: self.state.iteration,
            loss: out.probe.mean_loss(),
            grad_rms: out.probe.grad.rms_magnitude(),
            alpha_eff: out.alpha_eff,
            c_eff: out.c_eff,
            strike: out.state.geass.strike,
            boost_active: out.state.geass.boost_active,
        };
        self.params = out.params;
        self.state = out.state;
        self.last_grad = Some(out.probe.grad);
        Ok(row)
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trace: Vec<TraceRow>,
    pub final_params: ParamVector,
    /// Set when the oracle failed mid-run; `trace` then holds the iterations
    /// completed before the failure.
    pub error: Option<ZooError>,
}

pub fn run_optimizer<L: LossOracle + ?Sized>(
    variant: Variant,
    loss: &L,
    phi0: ParamVector,
    hp: &ZooHyperparams,
    budget: usize,
    seed: u64,
) -> Result<RunOutcome, ZooError> {
    if budget == 0 {
        return Err(ZooError::EmptyBudget);
    }
    let mut opt = Optimizer::new(variant, hp.clone(), phi0, seed)?;
    let mut trace = Vec::with_capacity(budget);
    let mut error = None;
    for _ in 0..budget {
        match opt.step(loss) {
            Ok(row) => trace.push(row),
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    Ok(RunOutcome {
        trace,
        final_params: opt.params,
        error,
    })
}

pub const TRACE_HEADER: [&str; 7] = [
    "iteration",
    "loss",
    "grad_rms",
    "alpha_eff",
    "c_eff",
    "strike",
    "boost_active",
];

/// Writes the header and one row per iteration. An empty trace still gets
/// its header.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<(), ZooError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
