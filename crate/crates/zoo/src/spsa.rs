//! Simultaneous-perturbation gradient estimation and the two update rules
//! built on it.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geass::GeassCounters;
use crate::objective::LossOracle;
use crate::{GradientEstimate, ParamVector, Perturbation, RngStream, ZooError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Spsa,
    SpsaGc,
    SpsaGeass,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Spsa, Variant::SpsaGc, Variant::SpsaGeass];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Spsa => "spsa",
            Variant::SpsaGc => "spsa-gc",
            Variant::SpsaGeass => "spsa-geass",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ZooError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "spsa" => Ok(Variant::Spsa),
            "spsa-gc" | "spsa_gc" => Ok(Variant::SpsaGc),
            "spsa-geass" | "spsa_geass" => Ok(Variant::SpsaGeass),
            other => Err(ZooError::InvalidHyperparams(format!(
                "unknown optimizer variant `{other}`"
            ))),
        }
    }
}

/// Optimizer hyperparameters. Defaults: `c = 0.01`, `alpha = 0.01`,
/// `beta = 0.9`, `k1 = 3`, `cooldown = 2`, `eta1 = eta2 = 100`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZooHyperparams {
    /// Perturbation step.
    pub c: f64,
    /// Learning rate.
    pub alpha: f64,
    /// Momentum weight.
    pub beta: f64,
    /// Consecutive low-gradient iterations tolerated before a boost.
    pub k1: u32,
    /// Number of boosted iterations.
    pub cooldown: u32,
    /// Learning-rate multiplier while boosted.
    pub eta1: f64,
    /// Perturbation-step multiplier while boosted.
    pub eta2: f64,
    /// RMS gradient magnitude below which an iteration counts as a strike.
    pub grad_threshold: f64,
}

impl Default for ZooHyperparams {
    fn default() -> Self {
        Self {
            c: 0.01,
            alpha: 0.01,
            beta: 0.9,
            k1: 3,
            cooldown: 2,
            eta1: 100.0,
            eta2: 100.0,
            grad_threshold: 1e-3,
        }
    }
}

impl ZooHyperparams {
    pub fn validate(&self) -> Result<(), ZooError> {
        let bad = |msg: &str| Err(ZooError::InvalidHyperparams(msg.to_string()));
        if !(self.c > 0.0 && self.c <= 1.0) {
            return bad("c must lie in (0, 1]");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad("beta must lie in [0, 1)");
        }
        if self.k1 == 0 || self.cooldown == 0 {
            return bad("k1 and cooldown must be positive");
        }
        if !(self.eta1 > 0.0 && self.eta1.is_finite() && self.eta2 > 0.0 && self.eta2.is_finite()) {
            return bad("eta1 and eta2 must be positive");
        }
        if !(self.grad_threshold >= 0.0 && self.grad_threshold.is_finite()) {
            return bad("grad_threshold must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub iteration: u64,
    pub momentum: Vec<f64>,
    pub geass: GeassCounters,
}

impl OptimizerState {
    pub fn new(dim: usize) -> Self {
        Self {
            iteration: 0,
            momentum: vec![0.0; dim],
            geass: GeassCounters::default(),
        }
    }
}

/// Draws `d` entries uniformly from `[-1, -0.5] ∪ [0.5, 1]`.
pub fn sample_perturbation(d: usize, rng: &mut RngStream) -> Result<Perturbation, ZooError> {
    if d == 0 {
        return Err(ZooError::InvalidDimension);
    }
    let values = (0..d)
        .map(|_| {
            let magnitude = rng.random_range(0.5..=1.0);
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    Perturbation::new(values)
}

/// Both probe losses and the gradient estimate built from them.
#[derive(Clone, Debug)]
pub struct Probe {
    pub grad: GradientEstimate,
    pub loss_plus: f64,
    pub loss_minus: f64,
}

impl Probe {
    /// Mean of the two probe losses; the cheapest loss reading available
    /// without spending a third evaluation.
    pub fn mean_loss(&self) -> f64 {
        0.5 * (self.loss_plus + self.loss_minus)
    }
}

/// Two-sided estimate `(L(φ + cΔ) − L(φ − cΔ)) / 2c · Δ⁻¹`. Exactly two
/// oracle calls.
pub fn spsa_probe<L: LossOracle + ?Sized>(
    loss: &L,
    phi: &[f64],
    c_eff: f64,
    delta: &Perturbation,
) -> Result<Probe, ZooError> {
    if delta.dim() != phi.len() {
        return Err(ZooError::DimensionMismatch {
            expected: phi.len(),
            got: delta.dim(),
        });
    }
    if !(c_eff > 0.0 && c_eff.is_finite()) {
        return Err(ZooError::InvalidHyperparams(format!(
            "probe step must be positive, got {c_eff}"
        )));
    }
    let plus: Vec<f64> = phi.iter().zip(delta.values()).map(|(p, d)| p + c_eff * d).collect();
    let minus: Vec<f64> = phi.iter().zip(delta.values()).map(|(p, d)| p - c_eff * d).collect();

    let loss_plus = checked_eval(loss, plus)?;
    let loss_minus = checked_eval(loss, minus)?;

    let scale = (loss_plus - loss_minus) / (2.0 * c_eff);
    let values = delta.values().iter().map(|d| scale / d).collect();
    Ok(Probe {
        grad: GradientEstimate::new(values)?,
        loss_plus,
        loss_minus,
    })
}

fn checked_eval<L: LossOracle + ?Sized>(loss: &L, point: Vec<f64>) -> Result<f64, ZooError> {
    let value = loss.evaluate(&point)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ZooError::NonFiniteLoss { value, point })
    }
}

pub fn spsa_estimate<L: LossOracle + ?Sized>(
    loss: &L,
    phi: &[f64],
    c_eff: f64,
    delta: &Perturbation,
) -> Result<GradientEstimate, ZooError> {
    spsa_probe(loss, phi, c_eff, delta).map(|p| p.grad)
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub params: ParamVector,
    pub state: OptimizerState,
    pub probe: Probe,
    pub alpha_eff: f64,
    pub c_eff: f64,
}

/// Plain SPSA: `φ' = φ − α·ĝ(φ)` with a freshly sampled perturbation.
pub fn spsa_step<L: LossOracle + ?Sized>(
    loss: &L,
    phi: &ParamVector,
    state: &OptimizerState,
    hp: &ZooHyperparams,
    rng: &mut RngStream,
) -> Result<StepOutcome, ZooError> {
    let delta = sample_perturbation(phi.dim(), rng)?;
    spsa_step_with(loss, phi, state, hp, &delta)
}

pub fn spsa_step_with<L: LossOracle + ?Sized>(
    loss: &L,
    phi: &ParamVector,
    state: &OptimizerState,
    hp: &ZooHyperparams,
    delta: &Perturbation,
) -> Result<StepOutcome, ZooError> {
    let probe = spsa_probe(loss, phi, hp.c, delta)?;
    let next: Vec<f64> = phi
        .iter()
        .zip(probe.grad.values())
        .map(|(p, g)| p - hp.alpha * g)
        .collect();
    let mut state = state.clone();
    state.iteration += 1;
    Ok(StepOutcome {
        params: ParamVector::new(next)?,
        state,
        probe,
        alpha_eff: hp.alpha,
        c_eff: hp.c,
    })
}

/// Momentum step with the estimate taken at the lookahead point:
///
/// ```text
/// m' = β·m − α·ĝ(φ + β·m)
/// φ' = φ + m'
/// ```
///
/// `alpha_eff` and `c_eff` are the (possibly boosted) step and probe sizes.
pub fn spsa_gc_step<L: LossOracle + ?Sized>(
    loss: &L,
    phi: &ParamVector,
    state: &OptimizerState,
    hp: &ZooHyperparams,
    alpha_eff: f64,
    c_eff: f64,
    rng: &mut RngStream,
) -> Result<StepOutcome, ZooError> {
    let delta = sample_perturbation(phi.dim(), rng)?;
    spsa_gc_step_with(loss, phi, state, hp, alpha_eff, c_eff, &delta)
}

pub fn spsa_gc_step_with<L: LossOracle + ?Sized>(
    loss: &L,
    phi: &ParamVector,
    state: &OptimizerState,
    hp: &ZooHyperparams,
    alpha_eff: f64,
    c_eff: f64,
    delta: &Perturbation,
) -> Result<StepOutcome, ZooError> {
    if state.momentum.len() != phi.dim() {
        return Err(ZooError::DimensionMismatch {
            expected: phi.dim(),
            got: state.momentum.len(),
        });
    }
    let lookahead: Vec<f64> = phi.iter().zip(&state.momentum).map(|(p, m)| p + hp.beta * m).collect();
    let probe = spsa_probe(loss, &lookahead, c_eff, delta)?;
    let (params, momentum) = momentum_update(phi, &state.momentum, hp.beta, alpha_eff, probe.grad.values());

    let mut state = state.clone();
    state.iteration += 1;
    state.momentum = momentum;
    Ok(StepOutcome {
        params: ParamVector::new(params)?,
        state,
        probe,
        alpha_eff,
        c_eff,
    })
}

/// The arithmetic of the momentum rule given an already-estimated gradient.
/// Returns `(φ', m')`.
pub fn momentum_update(phi: &[f64], momentum: &[f64], beta: f64, alpha: f64, grad: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m_next: Vec<f64> = momentum.iter().zip(grad).map(|(m, g)| beta * m - alpha * g).collect();
    let phi_next = phi.iter().zip(&m_next).map(|(p, m)| p + m).collect();
    (phi_next, m_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{quadratic, Counted, FnLoss};

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn perturbation_entries_in_segmented_interval() {
        let mut rng = RngStream::new(1);
        let delta = sample_perturbation(3, &mut rng).unwrap();
        assert!(delta.values().iter().all(|e| (0.5..=1.0).contains(&e.abs())));
    }

    #[test]
    fn perturbation_zero_dim_rejected() {
        let mut rng = RngStream::new(1);
        assert!(matches!(
            sample_perturbation(0, &mut rng),
            Err(ZooError::InvalidDimension)
        ));
    }

    #[test]
    fn perturbation_is_symmetric_on_average() {
        let mut rng = RngStream::new(2024);
        let delta = sample_perturbation(100_000, &mut rng).unwrap();
        let mean: f64 = delta.values().iter().sum::<f64>() / 100_000.0;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn perturbation_deterministic_per_seed() {
        let a = sample_perturbation(1, &mut RngStream::new(99)).unwrap();
        let b = sample_perturbation(1, &mut RngStream::new(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_matches_hand_arithmetic() {
        let f = quadratic(2).unwrap();
        let delta = Perturbation::new(vec![1.0, -1.0]).unwrap();
        let probe = spsa_probe(&f, &[1.0, 2.0], 0.01, &delta).unwrap();
        assert!((probe.loss_plus - 4.9802).abs() < 1e-12);
        assert!((probe.loss_minus - 5.0202).abs() < 1e-12);
        let g = probe.grad.values();
        assert!((g[0] + 2.0).abs() < 1e-9 && (g[1] - 2.0).abs() < 1e-9, "{g:?}");
    }

    #[test]
    fn estimate_vanishes_at_minimum() {
        let f = quadratic(2).unwrap();
        let delta = Perturbation::new(vec![0.7, -0.6]).unwrap();
        let g = spsa_estimate(&f, &[0.0, 0.0], 0.01, &delta).unwrap();
        assert_eq!(g.values(), &[0.0, 0.0]);
    }

    #[test]
    fn sign_pattern_average_is_exact_gradient() {
        let f = quadratic(2).unwrap();
        let mut avg = [0.0; 2];
        for s0 in [1.0, -1.0] {
            for s1 in [1.0, -1.0] {
                let delta = Perturbation::new(vec![s0, s1]).unwrap();
                let g = spsa_estimate(&f, &[1.0, 2.0], 0.01, &delta).unwrap();
                avg[0] += g.values()[0] / 4.0;
                avg[1] += g.values()[1] / 4.0;
            }
        }
        assert!((avg[0] - 2.0).abs() < 1e-9 && (avg[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn exactly_two_evaluations() {
        let f = Counted::new(quadratic(3).unwrap());
        let mut rng = RngStream::new(5);
        let delta = sample_perturbation(3, &mut rng).unwrap();
        spsa_estimate(&f, &[1.0, 1.0, 1.0], 0.01, &delta).unwrap();
        assert_eq!(f.eval_count(), 2);
    }

    #[test]
    fn non_finite_loss_reports_probe_point() {
        let f = FnLoss(|x: &[f64]| if x[0] > 1.0 { f64::NAN } else { 0.0 });
        let delta = Perturbation::new(vec![1.0]).unwrap();
        match spsa_estimate(&f, &[1.0], 0.01, &delta) {
            Err(ZooError::NonFiniteLoss { point, .. }) => assert_eq!(point, vec![1.01]),
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn plain_step_one_dim() {
        let f = quadratic(1).unwrap();
        let delta = Perturbation::new(vec![-0.8]).unwrap();
        let hp = ZooHyperparams::default();
        let out = spsa_step_with(&f, &pv(&[1.0]), &OptimizerState::new(1), &hp, &delta).unwrap();
        assert!((out.params[0] - 0.98).abs() < 1e-12);
        assert_eq!(out.state.iteration, 1);
    }

    #[test]
    fn plain_step_at_minimum_is_fixed_point() {
        let f = quadratic(2).unwrap();
        let hp = ZooHyperparams::default();
        let mut rng = RngStream::new(3);
        let out = spsa_step(&f, &pv(&[0.0, 0.0]), &OptimizerState::new(2), &hp, &mut rng).unwrap();
        assert_eq!(out.params.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn plain_spsa_converges_on_quadratic() {
        let f = quadratic(2).unwrap();
        let hp = ZooHyperparams::default();
        let mut rng = RngStream::new(17);
        let mut phi = pv(&[1.0, 2.0]);
        let mut state = OptimizerState::new(2);
        for _ in 0..500 {
            let out = spsa_step(&f, &phi, &state, &hp, &mut rng).unwrap();
            phi = out.params;
            state = out.state;
        }
        assert!(f.value(&phi) < 1e-3, "final loss {}", f.value(&phi));
    }

    #[test]
    fn momentum_first_step() {
        let (phi, m) = momentum_update(&[1.0, 2.0], &[0.0, 0.0], 0.9, 0.01, &[2.0, 4.0]);
        assert!((m[0] + 0.02).abs() < 1e-15 && (m[1] + 0.04).abs() < 1e-15);
        assert!((phi[0] - 0.98).abs() < 1e-15 && (phi[1] - 1.96).abs() < 1e-15);
    }

    #[test]
    fn momentum_two_identical_gradients() {
        let (alpha, beta, g) = (0.01, 0.9, 3.0);
        let (phi1, m1) = momentum_update(&[0.0], &[0.0], beta, alpha, &[g]);
        let (_, m2) = momentum_update(&phi1, &m1, beta, alpha, &[g]);
        assert!((m2[0] - (-alpha * g * (1.0 + beta))).abs() < 1e-15);
    }

    #[test]
    fn gc_with_zero_beta_matches_plain() {
        let f = quadratic(3).unwrap();
        let hp = ZooHyperparams {
            beta: 0.0,
            ..ZooHyperparams::default()
        };
        let phi = pv(&[0.3, -1.2, 2.0]);
        let state = OptimizerState::new(3);
        let a = spsa_step(&f, &phi, &state, &hp, &mut RngStream::new(8)).unwrap();
        let b = spsa_gc_step(&f, &phi, &state, &hp, hp.alpha, hp.c, &mut RngStream::new(8)).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn gc_estimates_at_lookahead() {
        // With β·m pushing the lookahead onto the minimum, the estimate is zero
        // and the update is pure momentum.
        let f = quadratic(1).unwrap();
        let hp = ZooHyperparams::default();
        let mut state = OptimizerState::new(1);
        state.momentum = vec![-1.0 / 0.9];
        let delta = Perturbation::new(vec![1.0]).unwrap();
        let out = spsa_gc_step_with(&f, &pv(&[1.0]), &state, &hp, hp.alpha, hp.c, &delta).unwrap();
        assert!(out.probe.grad.values()[0].abs() < 1e-9);
        assert!((out.state.momentum[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn failed_step_leaves_state_untouched() {
        let f = FnLoss(|_: &[f64]| f64::INFINITY);
        let hp = ZooHyperparams::default();
        let state = OptimizerState::new(1);
        let before = state.clone();
        let r = spsa_gc_step(&f, &pv(&[1.0]), &state, &hp, 0.01, 0.01, &mut RngStream::new(0));
        assert!(r.is_err());
        assert_eq!(state, before);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("adam".parse::<Variant>().is_err());
    }

    #[test]
    fn default_hyperparams_validate() {
        ZooHyperparams::default().validate().unwrap();
        let bad = ZooHyperparams {
            beta: 1.0,
            ..ZooHyperparams::default()
        };
        assert!(bad.validate().is_err());
    }
}
