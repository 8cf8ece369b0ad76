use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularization weights, superpixel settings and stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuaSvParams {
    /// Weight of the endmember-to-reference penalty.
    pub lambda_m: f64,
    /// Weight of the multiscale abundance penalty.
    pub lambda_a: f64,
    /// Weight of the scaling-field smoothness penalty.
    pub lambda_psi: f64,
    /// Relative coarse-scale weight, `ρ S² / N²`.
    pub rho0: f64,
    /// Superpixel side length, `√(N/S)`.
    pub target_size: f64,
    /// SLIC compactness.
    pub compactness: f64,
    pub eps_stop: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for MuaSvParams {
    fn default() -> Self {
        Self {
            lambda_m: 0.5,
            lambda_a: 1.0,
            lambda_psi: 0.5,
            rho0: 0.1,
            target_size: 3.0,
            compactness: 0.001,
            eps_stop: 2e-3,
            max_iters: 200,
            seed: 0,
        }
    }
}

impl MuaSvParams {
    /// Settings for the square-patch scene at 30 dB.
    pub fn dc2() -> Self {
        Self {
            lambda_m: 0.5,
            lambda_a: 50.0,
            lambda_psi: 50.0,
            rho0: 0.005,
            target_size: 9.0,
            compactness: 0.01,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("lambda_m", self.lambda_m),
            ("lambda_a", self.lambda_a),
            ("lambda_psi", self.lambda_psi),
            ("rho0", self.rho0),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite and nonnegative")));
            }
        }
        if !(self.target_size >= 1.0) || !self.target_size.is_finite() {
            return Err(Error::InvalidInput("target_size must be at least 1".into()));
        }
        if !(self.compactness > 0.0) || !self.compactness.is_finite() {
            return Err(Error::InvalidInput("compactness must be positive".into()));
        }
        if !(self.eps_stop > 0.0) {
            return Err(Error::InvalidInput("eps_stop must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_defaults_and_unknown_keys() {
        let p: MuaSvParams = serde_json::from_str(r#"{"lambda_a": 2.0}"#).unwrap();
        assert_eq!(p.lambda_a, 2.0);
        assert_eq!(p.lambda_m, 0.5);
        assert!(serde_json::from_str::<MuaSvParams>(r#"{"lamda_a": 2.0}"#).is_err());
    }

    #[test]
    fn validation() {
        assert!(MuaSvParams::default().validate().is_ok());
        let bad = MuaSvParams { eps_stop: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MuaSvParams { lambda_psi: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
