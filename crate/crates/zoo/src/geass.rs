//! Strike/cooldown controller for escaping flat regions.
//!
//! Each iteration the most recent gradient estimate is compared against
//! `grad_threshold`. `k1` consecutive sub-threshold estimates trigger a boost:
//! for the next `cooldown` iterations (the triggering one included) the step
//! size is multiplied by `eta1` and the probe size by `eta2`. Any estimate at
//! or above the threshold resets the strike count. Estimates are ignored while
//! a boost is running.

use crate::{GradientEstimate, ZooHyperparams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GeassCounters {
    pub strike: u32,
    pub cooldown_remaining: u32,
    pub boost_active: bool,
}

impl GeassCounters {
    /// `boost_active ⇔ cooldown_remaining > 0`, `boost_active ⇒ strike = 0`,
    /// `strike <= k1`.
    pub fn is_consistent(&self, k1: u32) -> bool {
        self.boost_active == (self.cooldown_remaining > 0)
            && (!self.boost_active || self.strike == 0)
            && self.strike <= k1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeassDecision {
    pub counters: GeassCounters,
    pub alpha_eff: f64,
    pub c_eff: f64,
}

pub fn geass_update(counters: GeassCounters, grad: &GradientEstimate, hp: &ZooHyperparams) -> GeassDecision {
    let mut next = counters;
    if next.boost_active {
        next.cooldown_remaining = next.cooldown_remaining.saturating_sub(1);
        next.boost_active = next.cooldown_remaining > 0;
    } else if grad.rms_magnitude() < hp.grad_threshold {
        next.strike += 1;
        if next.strike >= hp.k1 {
            next.strike = 0;
            next.boost_active = true;
            next.cooldown_remaining = hp.cooldown;
        }
    } else {
        next.strike = 0;
    }

    let (alpha_eff, c_eff) = if next.boost_active {
        (hp.alpha * hp.eta1, hp.c * hp.eta2)
    } else {
        (hp.alpha, hp.c)
    };
    GeassDecision {
        counters: next,
        alpha_eff,
        c_eff,
    }
}
