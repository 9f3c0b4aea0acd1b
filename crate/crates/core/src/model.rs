use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the coupled cell-density / chemoattractant system
///
/// ```text
/// du = (r_u Δ u^[γ] − χ div(u ∇v) + μ u) dt + σ_u u dW₁
/// dv = (r_v Δ v + β u − α v) dt + σ_v v dW₂
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub r_u: f64,
    pub r_v: f64,
    pub chi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub gamma: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            r_u: 0.1,
            r_v: 1.0,
            chi: 0.2,
            alpha: 1.0,
            beta: 1.0,
            sigma_u: 0.5,
            sigma_v: 0.5,
            gamma: 2.0,
        }
    }
}

impl ModelParams {
    /// All violated sign constraints, empty when the parameters are usable.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                errs.push(msg.to_string());
            }
        };
        let fields = [
            self.r_u,
            self.r_v,
            self.chi,
            self.alpha,
            self.beta,
            self.sigma_u,
            self.sigma_v,
            self.gamma,
        ];
        check(fields.iter().all(|v| v.is_finite()), "parameters must be finite");
        check(self.r_u > 0.0, "r_u must be positive");
        check(self.r_v > 0.0, "r_v must be positive");
        check(self.chi >= 0.0, "chi must be nonnegative");
        check(self.alpha >= 0.0, "alpha must be nonnegative");
        check(self.beta >= 0.0, "beta must be nonnegative");
        check(self.sigma_u >= 0.0, "sigma_u must be nonnegative");
        check(self.sigma_v >= 0.0, "sigma_v must be nonnegative");
        check(self.gamma > 1.0, "gamma must exceed 1");
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(errs.join("; ")))
        }
    }

    /// Whether `gamma > 3`, the range in which the operator is known to map a
    /// bounded set into itself.
    pub fn in_self_mapping_regime(&self) -> bool {
        self.gamma > 3.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ModelParams::default().validate().unwrap();
    }

    #[test]
    fn reports_every_violation() {
        let p = ModelParams {
            gamma: 0.5,
            r_u: 0.0,
            alpha: -1.0,
            ..Default::default()
        };
        let errs = p.violations();
        assert_eq!(errs.len(), 3);
        assert!(errs.iter().any(|e| e == "gamma must exceed 1"));
    }
}
