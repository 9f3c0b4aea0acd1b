//! Chemoattractant equation `dv = (r_v Δv + β η − α v) dt + σ_v v dW₂`.
//!
//! One step treats diffusion implicitly and everything else explicitly:
//!
//! ```text
//! (I − dt r_v Δ_h) v' = v + dt (β η − α v) + σ_v v ⊙ ΔW₂
//! ```
//!
//! `Δ_h` is the 5-point Neumann stencil of [`crate::stencil::laplacian`].
//! Its eigenvectors are the sampled cosine modes, so the solve is a division
//! by `1 + dt r_v λ_h(k)` in the cosine basis. `(I − dt r_v Δ_h)` is an
//! M-matrix, which keeps the solve positivity preserving.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::ModelParams;
use crate::noise::WienerSampler;
use crate::spectral::SpectralBasis;

/// One step of the v-equation in Itô form.
pub fn step_v(
    v: &Field,
    eta: &Field,
    p: &ModelParams,
    dw2: &Field,
    dt: f64,
    basis: &SpectralBasis,
) -> Result<Field> {
    step_v_with_rate(v, eta, p, dw2, dt, basis, None)
}

/// [`step_v`] with an additional explicit growth term `rate ⊙ v`, used to
/// fold the Stratonovich correction into the drift.
pub fn step_v_with_rate(
    v: &Field,
    eta: &Field,
    p: &ModelParams,
    dw2: &Field,
    dt: f64,
    basis: &SpectralBasis,
    rate: Option<&Field>,
) -> Result<Field> {
    let rhs = explicit_part(v, eta, p, dw2, dt, rate)?;
    implicit_diffusion(&rhs, p.r_v, dt, basis)
}

/// `v + dt (β η − α v + rate v) + σ_v v ⊙ dW₂`.
pub fn explicit_part(
    v: &Field,
    eta: &Field,
    p: &ModelParams,
    dw2: &Field,
    dt: f64,
    rate: Option<&Field>,
) -> Result<Field> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    v.check_same_grid(eta)?;
    v.check_same_grid(dw2)?;
    if let Some(r) = rate {
        v.check_same_grid(r)?;
    }
    let mut out = v.values().to_vec();
    for (idx, o) in out.iter_mut().enumerate() {
        let vi = v.values()[idx];
        let extra = rate.map_or(0.0, |r| r.values()[idx] * vi);
        *o = vi + dt * (p.beta * eta.values()[idx] - p.alpha * vi + extra)
            + p.sigma_v * vi * dw2.values()[idx];
    }
    let field = Field::from_raw(v.grid(), out);
    if let Some((cell, value)) = field.first_non_finite() {
        return Err(Error::NonFiniteField { cell, value });
    }
    Ok(field)
}

/// Solves `(I − dt r Δ_h) x = rhs` diagonally in the cosine basis.
pub fn implicit_diffusion(rhs: &Field, r: f64, dt: f64, basis: &SpectralBasis) -> Result<Field> {
    let mut c = basis.to_spectral(rhs)?;
    for (ck, lam) in c.coeffs_mut().iter_mut().zip(basis.stencil_lambdas()) {
        *ck /= 1.0 + dt * r * lam;
    }
    basis.from_spectral(&c)
}

/// Integrates the v-equation along a prescribed `eta` path. Returns
/// `nsteps + 1` fields and draws exactly `nsteps` increments from `w2`.
#[allow(clippy::too_many_arguments)]
pub fn solve_v_path(
    v0: &Field,
    eta_path: &[Field],
    w2: &mut WienerSampler,
    p: &ModelParams,
    dt: f64,
    nsteps: usize,
    basis: &SpectralBasis,
    rate: Option<&Field>,
) -> Result<Vec<Field>> {
    if eta_path.len() < nsteps {
        return Err(Error::ScheduleMismatch(format!(
            "eta path has {} entries, {} steps requested",
            eta_path.len(),
            nsteps
        )));
    }
    if let Some((cell, value)) = v0.first_non_finite() {
        return Err(Error::NonFiniteField { cell, value });
    }
    let mut path = Vec::with_capacity(nsteps + 1);
    path.push(v0.clone());
    for (n, eta) in eta_path.iter().take(nsteps).enumerate() {
        let dw = w2.sample_increment(dt)?;
        let next = step_v_with_rate(&path[n], eta, p, &dw, dt, basis, rate)
            .map_err(|e| e.at_step(n))?;
        path.push(next);
    }
    Ok(path)
}
