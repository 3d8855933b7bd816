//! Scalar-loss oracles and benchmark fixtures.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::{ParamVector, ZooError};

/// Opaque scalar loss. Only values cross this boundary, never gradients.
pub trait LossOracle {
    fn evaluate(&self, phi: &[f64]) -> Result<f64, ZooError>;
}

impl<T: LossOracle + ?Sized> LossOracle for &T {
    fn evaluate(&self, phi: &[f64]) -> Result<f64, ZooError> {
        (**self).evaluate(phi)
    }
}

/// Wraps an infallible closure as an oracle.
pub struct FnLoss<F>(pub F);

impl<F: Fn(&[f64]) -> f64> LossOracle for FnLoss<F> {
    fn evaluate(&self, phi: &[f64]) -> Result<f64, ZooError> {
        Ok((self.0)(phi))
    }
}

/// Counts evaluations of the wrapped oracle.
pub struct Counted<O> {
    inner: O,
    count: AtomicU64,
}

impl<O> Counted<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn eval_count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: LossOracle> LossOracle for Counted<O> {
    fn evaluate(&self, phi: &[f64]) -> Result<f64, ZooError> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(phi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Quadratic,
    Rosenbrock,
    Rastrigin,
}

/// Standard test function with a recorded global minimum.
#[derive(Clone, Debug)]
pub struct BenchmarkFunction {
    name: &'static str,
    kind: Kind,
    dim: usize,
    global_minimum_value: f64,
    global_minimizer: ParamVector,
}

const RASTRIGIN_A: f64 = 10.0;

impl BenchmarkFunction {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn global_minimum_value(&self) -> f64 {
        self.global_minimum_value
    }

    pub fn global_minimizer(&self) -> &ParamVector {
        &self.global_minimizer
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self.kind {
            Kind::Quadratic => x.iter().map(|v| v * v).sum(),
            Kind::Rosenbrock => {
                let (x0, x1) = (x[0], x[1]);
                100.0 * (x1 - x0 * x0).powi(2) + (1.0 - x0).powi(2)
            }
            Kind::Rastrigin => x
                .iter()
                .map(|v| v * v + RASTRIGIN_A * (1.0 - (2.0 * PI * v).cos()))
                .sum(),
        }
    }

    /// Analytic gradient, for tests and diagnostics only.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            Kind::Quadratic => x.iter().map(|v| 2.0 * v).collect(),
            Kind::Rosenbrock => {
                let (x0, x1) = (x[0], x[1]);
                vec![-400.0 * x0 * (x1 - x0 * x0) - 2.0 * (1.0 - x0), 200.0 * (x1 - x0 * x0)]
            }
            Kind::Rastrigin => x
                .iter()
                .map(|v| 2.0 * v + 2.0 * PI * RASTRIGIN_A * (2.0 * PI * v).sin())
                .collect(),
        }
    }
}

impl LossOracle for BenchmarkFunction {
    fn evaluate(&self, phi: &[f64]) -> Result<f64, ZooError> {
        if phi.len() != self.dim {
            return Err(ZooError::DimensionMismatch {
                expected: self.dim,
                got: phi.len(),
            });
        }
        Ok(self.value(phi))
    }
}

/// `Σ φ_j²`, minimum 0 at the origin.
pub fn quadratic(d: usize) -> Result<BenchmarkFunction, ZooError> {
    Ok(BenchmarkFunction {
        name: "quadratic",
        kind: Kind::Quadratic,
        dim: d,
        global_minimum_value: 0.0,
        global_minimizer: ParamVector::zeros(d)?,
    })
}

/// Two-dimensional Rosenbrock valley, minimum 0 at (1, 1).
pub fn rosenbrock(d: usize) -> Result<BenchmarkFunction, ZooError> {
    if d != 2 {
        return Err(ZooError::DimensionMismatch { expected: 2, got: d });
    }
    Ok(BenchmarkFunction {
        name: "rosenbrock",
        kind: Kind::Rosenbrock,
        dim: 2,
        global_minimum_value: 0.0,
        global_minimizer: ParamVector::new(vec![1.0, 1.0])?,
    })
}

/// Rastrigin with `A = 10`: global minimum 0 at the origin and a local
/// minimum next to every integer lattice point.
pub fn multimodal_basin(d: usize) -> Result<BenchmarkFunction, ZooError> {
    Ok(BenchmarkFunction {
        name: "rastrigin",
        kind: Kind::Rastrigin,
        dim: d,
        global_minimum_value: 0.0,
        global_minimizer: ParamVector::zeros(d)?,
    })
}

pub fn benchmark_by_name(name: &str, d: usize) -> Result<BenchmarkFunction, ZooError> {
    match name.to_ascii_lowercase().as_str() {
        "quadratic" | "sphere" => quadratic(d),
        "rosenbrock" => rosenbrock(d),
        "rastrigin" | "multimodal" | "multimodal-basin" => multimodal_basin(d),
        _ => Err(ZooError::UnknownBenchmark(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_values() {
        let f = quadratic(2).unwrap();
        assert_eq!(f.value(&[0.0, 0.0]), 0.0);
        assert_eq!(f.value(&[1.0, 2.0]), 5.0);
        assert_eq!(quadratic(1).unwrap().value(&[3.0]), 9.0);
    }

    #[test]
    fn rosenbrock_values() {
        let f = rosenbrock(2).unwrap();
        assert_eq!(f.value(&[1.0, 1.0]), 0.0);
        assert_eq!(f.value(&[0.0, 0.0]), 1.0);
        assert_eq!(f.value(&[-1.0, 1.0]), 4.0);
        assert!(rosenbrock(3).is_err());
    }

    #[test]
    fn rastrigin_values() {
        let f = multimodal_basin(2).unwrap();
        assert_eq!(f.value(&[0.0, 0.0]), 0.0);
        assert!((f.value(&[1.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recorded_minima_hold() {
        for f in [
            quadratic(5).unwrap(),
            rosenbrock(2).unwrap(),
            multimodal_basin(4).unwrap(),
        ] {
            let v = f.value(f.global_minimizer());
            assert!((v - f.global_minimum_value()).abs() < 1e-12, "{}", f.name());
        }
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(benchmark_by_name("Rastrigin", 4).unwrap().dim(), 4);
        assert!(matches!(
            benchmark_by_name("ackley", 2),
            Err(ZooError::UnknownBenchmark(_))
        ));
    }

    #[test]
    fn counted_tracks_every_call() {
        let f = Counted::new(quadratic(1).unwrap());
        for _ in 0..5 {
            f.evaluate(&[1.0]).unwrap();
        }
        assert_eq!(f.eval_count(), 5);
    }

    #[test]
    fn dimension_checked() {
        assert!(quadratic(2).unwrap().evaluate(&[1.0]).is_err());
    }
}
