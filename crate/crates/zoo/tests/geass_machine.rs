use std::collections::{BTreeSet, VecDeque};

use baps_zoo::{
    geass_update, run_optimizer, FnLoss, GeassCounters, GradientEstimate, ParamVector, Variant, ZooHyperparams,
};
use proptest::prelude::*;

const BELOW: f64 = 1e-6;
const ABOVE: f64 = 0.5;

fn grad(rms: f64) -> GradientEstimate {
    GradientEstimate::new(vec![rms, -rms]).unwrap()
}

/// Reference transition table written out case by case.
fn expected(strike: u32, cooldown: u32, below: bool) -> (u32, u32) {
    match (strike, cooldown, below) {
        (_, 2, _) => (0, 1),
        (_, 1, _) => (0, 0),
        (0, 0, true) => (1, 0),
        (1, 0, true) => (2, 0),
        (2, 0, true) => (0, 2),
        (3, 0, true) => (0, 2),
        (_, 0, false) => (0, 0),
        _ => unreachable!(),
    }
}

#[test]
fn exhaustive_transition_table() {
    let hp = ZooHyperparams::default();
    let mut checked = 0;
    for strike in 0..=3 {
        for cooldown in 0..=2 {
            let state = GeassCounters {
                strike,
                cooldown_remaining: cooldown,
                boost_active: cooldown > 0,
            };
            if !state.is_consistent(hp.k1) {
                continue;
            }
            for below in [false, true] {
                let g = grad(if below { BELOW } else { ABOVE });
                let d = geass_update(state, &g, &hp);
                let (s, c) = expected(strike, cooldown, below);
                assert_eq!(
                    (
                        d.counters.strike,
                        d.counters.cooldown_remaining,
                        d.counters.boost_active
                    ),
                    (s, c, c > 0),
                    "from {state:?} below={below}"
                );
                assert!(d.counters.is_consistent(hp.k1));
                if d.counters.boost_active {
                    assert_eq!(d.alpha_eff, 100.0 * hp.alpha);
                    assert_eq!(d.c_eff, 100.0 * hp.c);
                } else {
                    assert_eq!((d.alpha_eff, d.c_eff), (hp.alpha, hp.c));
                }
                checked += 1;
            }
        }
    }
    // strike 0..=3 at rest plus two boosted states, each under both inputs
    assert_eq!(checked, 12);
}

#[test]
fn reachable_states_from_rest() {
    let hp = ZooHyperparams::default();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([GeassCounters::default()]);
    while let Some(s) = queue.pop_front() {
        if !seen.insert((s.strike, s.cooldown_remaining, s.boost_active)) {
            continue;
        }
        for rms in [BELOW, ABOVE] {
            queue.push_back(geass_update(s, &grad(rms), &hp).counters);
        }
    }
    let expected: BTreeSet<_> = [(0, 0, false), (1, 0, false), (2, 0, false), (0, 2, true), (0, 1, true)]
        .into_iter()
        .collect();
    assert_eq!(seen, expected);
}

#[test]
fn threshold_itself_is_not_a_strike() {
    let hp = ZooHyperparams::default();
    let g = GradientEstimate::new(vec![hp.grad_threshold]).unwrap();
    let d = geass_update(GeassCounters::default(), &g, &hp);
    assert_eq!(d.counters.strike, 0);
}

// A constant loss gives a zero estimate every iteration, so the boost fires
// after three strikes and lasts two iterations. The decision that ends a
// cooldown is not a strike, so later cycles take five iterations.
#[test]
fn flat_loss_boost_schedule() {
    let hp = ZooHyperparams::default();
    let f = FnLoss(|_: &[f64]| 1.0);
    let out = run_optimizer(Variant::SpsaGeass, &f, ParamVector::zeros(3).unwrap(), &hp, 12, 0).unwrap();
    let boosted: Vec<bool> = out.trace.iter().map(|r| r.boost_active).collect();
    let expected = [
        false, false, false, true, true, false, false, false, true, true, false, false,
    ];
    assert_eq!(boosted, expected);
    for r in &out.trace {
        let factor = if r.boost_active { 100.0 } else { 1.0 };
        assert_eq!(r.alpha_eff, factor * hp.alpha);
        assert_eq!(r.c_eff, factor * hp.c);
    }
}

#[test]
fn non_geass_variants_never_boost() {
    let hp = ZooHyperparams::default();
    let f = FnLoss(|_: &[f64]| 1.0);
    for v in [Variant::Spsa, Variant::SpsaGc] {
        let out = run_optimizer(v, &f, ParamVector::zeros(2).unwrap(), &hp, 10, 0).unwrap();
        assert!(out.trace.iter().all(|r| !r.boost_active && r.alpha_eff == hp.alpha));
    }
}

proptest! {
    #[test]
    fn counters_stay_consistent(inputs in prop::collection::vec(any::<bool>(), 0..200), k1 in 1u32..6, cooldown in 1u32..5) {
        let hp = ZooHyperparams { k1, cooldown, ..ZooHyperparams::default() };
        let mut s = GeassCounters::default();
        let mut boosted_run = 0;
        for below in inputs {
            let d = geass_update(s, &grad(if below { BELOW } else { ABOVE }), &hp);
            prop_assert!(d.counters.is_consistent(k1));
            if d.counters.boost_active {
                boosted_run += 1;
                prop_assert!(boosted_run <= cooldown);
            } else {
                boosted_run = 0;
            }
            s = d.counters;
        }
    }

    #[test]
    fn same_seed_same_trace(seed in any::<u64>(), variant in prop::sample::select(vec![Variant::Spsa, Variant::SpsaGc, Variant::SpsaGeass])) {
        let hp = ZooHyperparams::default();
        let f = baps_zoo::rosenbrock(2).unwrap();
        let start = ParamVector::new(vec![-1.2, 1.0]).unwrap();
        let a = run_optimizer(variant, &f, start.clone(), &hp, 20, seed).unwrap();
        let b = run_optimizer(variant, &f, start, &hp, 20, seed).unwrap();
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(a.final_params, b.final_params);
    }
}
