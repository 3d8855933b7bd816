use std::ops::Deref;

use crate::ZooError;

/// Flat vector of trainable parameters. Entries are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ZooError> {
        if values.is_empty() {
            return Err(ZooError::InvalidDimension);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ZooError::NonFiniteParams { index });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Result<Self, ZooError> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Random probe direction. Every entry satisfies `0.5 <= |e| <= 1`, so the
/// element-wise inverse exists and never exceeds 2 in magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation(Vec<f64>);

impl Perturbation {
    pub fn new(values: Vec<f64>) -> Result<Self, ZooError> {
        if values.is_empty() {
            return Err(ZooError::InvalidDimension);
        }
        if let Some(&value) = values.iter().find(|v| !(0.5..=1.0).contains(&v.abs())) {
            return Err(ZooError::InvalidPerturbation { value });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Estimated gradient together with its root-mean-square magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    values: Vec<f64>,
    rms_magnitude: f64,
}

impl GradientEstimate {
    pub fn new(values: Vec<f64>) -> Result<Self, ZooError> {
        if values.is_empty() {
            return Err(ZooError::InvalidDimension);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ZooError::NonFiniteParams { index });
        }
        let sum_sq: f64 = values.iter().map(|v| v * v).sum();
        let rms_magnitude = (sum_sq / values.len() as f64).sqrt();
        Ok(Self { values, rms_magnitude })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rms_magnitude(&self) -> f64 {
        self.rms_magnitude
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_vector_rejects_nan_and_empty() {
        assert!(matches!(
            ParamVector::new(vec![1.0, f64::NAN]),
            Err(ZooError::NonFiniteParams { index: 1 })
        ));
        assert!(matches!(ParamVector::new(vec![]), Err(ZooError::InvalidDimension)));
    }

    #[test]
    fn perturbation_bounds() {
        assert!(Perturbation::new(vec![0.5, -1.0, 0.75]).is_ok());
        assert!(Perturbation::new(vec![0.49]).is_err());
        assert!(Perturbation::new(vec![-1.01]).is_err());
    }

    #[test]
    fn rms_is_norm_over_sqrt_dim() {
        let g = GradientEstimate::new(vec![3.0, 4.0]).unwrap();
        assert!((g.rms_magnitude() - 5.0 / 2f64.sqrt()).abs() < 1e-15);
    }
}
