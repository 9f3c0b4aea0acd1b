//! Lebesgue, gradient and Bessel-potential norms on the grid.
//!
//! Fractional norms use the Neumann cosine expansion: the Bessel multiplier
//! `(1 + λ_k)^(s/2)` is applied to the coefficients and the result measured
//! in `L^p` by midpoint quadrature. This is the norm of the restriction
//! evaluated in the domain's own eigenbasis, not the infimum over extensions
//! to the plane.

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Field};
use crate::spectral::SpectralBasis;
use crate::stencil::gradient_magnitude;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormRequest {
    Lp { p: f64 },
    /// `H^s_2`, via Parseval.
    Hs2 { s: f64 },
    BesselLp { s: f64, p: f64 },
    GradLp { p: f64 },
}

impl NormRequest {
    /// Parses `lp:P`, `hs:S`, `bessel:S:P` or `grad:P`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let parts: Vec<&str> = text.split(':').collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"));
        let req = match parts.as_slice() {
            ["lp", p] => NormRequest::Lp { p: num(p)? },
            ["hs", s] => NormRequest::Hs2 { s: num(s)? },
            ["bessel", s, p] => NormRequest::BesselLp { s: num(s)?, p: num(p)? },
            ["grad", p] => NormRequest::GradLp { p: num(p)? },
            _ => {
                return Err(format!(
                    "unknown norm request '{text}' (expected lp:P, hs:S, bessel:S:P or grad:P)"
                ))
            }
        };
        Ok(req)
    }

    pub fn evaluate(&self, f: &Field, basis: &SpectralBasis) -> Result<f64> {
        match *self {
            NormRequest::Lp { p } => lp_norm(f, p),
            NormRequest::Hs2 { s } => sobolev2_norm(f, s, basis),
            NormRequest::BesselLp { s, p } => bessel_lp_norm(f, s, p, basis),
            NormRequest::GradLp { p } => grad_lp_norm(f, p),
        }
    }
}

impl std::fmt::Display for NormRequest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormRequest::Lp { p } => write!(f, "lp:{p}"),
            NormRequest::Hs2 { s } => write!(f, "hs:{s}"),
            NormRequest::BesselLp { s, p } => write!(f, "bessel:{s}:{p}"),
            NormRequest::GradLp { p } => write!(f, "grad:{p}"),
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("integrability exponent must be >= 1, got {p}")))
    }
}

/// `(Σ |f|^p hx hy)^(1/p)`.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    check_p(p)?;
    let terms: Vec<f64> = if p == 2.0 {
        f.values().iter().map(|v| v * v).collect()
    } else if p == 1.0 {
        f.values().iter().map(|v| v.abs()).collect()
    } else {
        f.values().iter().map(|v| v.abs().powf(p)).collect()
    };
    let integral = pairwise_sum(&terms) * f.grid().cell_area();
    Ok(if p == 1.0 { integral } else { integral.powf(1.0 / p) })
}

/// `|f|_{L^p}^p`, avoiding the root when only the power is wanted.
pub fn lp_norm_pow(f: &Field, p: f64) -> Result<f64> {
    check_p(p)?;
    let terms: Vec<f64> = f.values().iter().map(|v| v.abs().powf(p)).collect();
    Ok(pairwise_sum(&terms) * f.grid().cell_area())
}

pub fn max_abs(f: &Field) -> f64 {
    f.max_abs()
}

/// `(Σ_k (1 + λ_k)^s c_k²)^(1/2)` over the cosine coefficients.
pub fn sobolev2_norm(f: &Field, s: f64, basis: &SpectralBasis) -> Result<f64> {
    let c = basis.to_spectral(f)?;
    let terms: Vec<f64> = c
        .iter()
        .map(|(k, ck)| (1.0 + basis.lambda(k)).powf(s) * ck * ck)
        .collect();
    Ok(pairwise_sum(&terms).sqrt())
}

/// `|((1 + λ_k)^(s/2) c_k)^∨|_{L^p}`.
pub fn bessel_lp_norm(f: &Field, s: f64, p: f64, basis: &SpectralBasis) -> Result<f64> {
    check_p(p)?;
    if s == 0.0 {
        return lp_norm(f, p);
    }
    let g = bessel_potential(f, s, basis)?;
    lp_norm(&g, p)
}

/// Field with the Bessel multiplier `(1 + λ_k)^(s/2)` applied.
pub fn bessel_potential(f: &Field, s: f64, basis: &SpectralBasis) -> Result<Field> {
    basis.apply_multiplier(f, |k| (1.0 + basis.lambda(k)).powf(s / 2.0))
}

/// `L^p` norm of the pointwise gradient magnitude.
pub fn grad_lp_norm(f: &Field, p: f64) -> Result<f64> {
    check_p(p)?;
    lp_norm(&gradient_magnitude(f), p)
}

/// `H^1_p` norm assembled as `(|f|_{L^p}^p + |∇f|_{L^p}^p)^(1/p)`.
pub fn h1p_norm(f: &Field, p: f64) -> Result<f64> {
    let a = lp_norm(f, p)?;
    let b = grad_lp_norm(f, p)?;
    Ok((a.powf(p) + b.powf(p)).powf(1.0 / p))
}

/// Ratio `|w|_{H^θ_{2γ}}^γ / ||w|^γ|_{H^1_2}` probed by the Runst–Sickel type
/// inequality `C |w|_{H^θ_{2γ}}^γ <= ||w|^γ|_{H^1_2}` for `0 < θ < 1/γ`.
pub fn runst_ratio(w: &Field, gamma: f64, theta: f64, basis: &SpectralBasis) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
    }
    if !(theta > 0.0 && theta < 1.0 / gamma) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in (0, 1/gamma) = (0, {}), got {theta}",
            1.0 / gamma
        )));
    }
    let wg = w.map(|x| x.abs().powf(gamma));
    let denom = h1p_norm(&wg, 2.0)?;
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter(
            "runst ratio undefined for w = 0 (zero denominator)".into(),
        ));
    }
    let numer = bessel_lp_norm(w, theta, 2.0 * gamma, basis)?.powf(gamma);
    Ok(numer / denom)
}
