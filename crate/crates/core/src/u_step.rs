//! Cell-density equation
//! `du = (r_u Δ u^[γ] − χ div(η ∇v) + μ u) dt + σ_u u dW₁`.
//!
//! Fully explicit: the porous-medium term is the 5-point stencil applied to
//! `w = u^[γ]`, the chemotactic term a face-flux divergence with first-order
//! upwinding of `η`. Both are in conservative form with zero flux through
//! the boundary, so without noise or `μ` the discrete mass is preserved to
//! rounding. Cells driven negative by the noise are clipped to zero and
//! counted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::ModelParams;
use crate::noise::WienerSampler;
use crate::stencil::laplacian;

/// Safety factor applied to the explicit stability bounds.
pub const CFL_SAFETY: f64 = 0.4;

/// `x |x|^(γ−1)`.
#[inline]
pub fn signed_power(x: f64, gamma: f64) -> f64 {
    x.abs().powf(gamma).copysign(x)
}

/// `div(η ∇v)` from face fluxes `F = η_up (v_R − v_L)/h`, where `η_up` is
/// taken from the cell the flux leaves. Boundary faces carry no flux.
pub fn chemo_flux_div(eta: &Field, v: &Field) -> Result<Field> {
    eta.check_same_grid(v)?;
    let grid = v.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ihx, ihy) = (1.0 / grid.hx(), 1.0 / grid.hy());
    let (e, vv) = (eta.values(), v.values());
    let mut out = vec![0.0; grid.len()];
    let mut face = |left: usize, right: usize, ih: f64| {
        let g = (vv[right] - vv[left]) * ih;
        let donor = if g > 0.0 { e[left] } else { e[right] };
        let f = donor * g * ih;
        out[left] += f;
        out[right] -= f;
    };
    for j in 0..ny {
        for i in 0..nx - 1 {
            let a = grid.index(i, j);
            face(a, a + 1, ihx);
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let a = grid.index(i, j);
            face(a, a + nx, ihy);
        }
    }
    Ok(Field::from_raw(grid, out))
}

/// Largest per-cell sum over the four faces of `|∂v/∂n| / h_face`: the rate
/// at which upwinded transport can empty a cell, per unit `χ η`.
fn max_outflow_rate(v: &Field) -> f64 {
    let grid = v.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ihx2, ihy2) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let vv = v.values();
    let mut worst = 0.0f64;
    for j in 0..ny {
        for i in 0..nx {
            let c = vv[grid.index(i, j)];
            let mut s = 0.0;
            if i > 0 {
                s += (vv[grid.index(i - 1, j)] - c).abs() * ihx2;
            }
            if i + 1 < nx {
                s += (vv[grid.index(i + 1, j)] - c).abs() * ihx2;
            }
            if j > 0 {
                s += (vv[grid.index(i, j - 1)] - c).abs() * ihy2;
            }
            if j + 1 < ny {
                s += (vv[grid.index(i, j + 1)] - c).abs() * ihy2;
            }
            worst = worst.max(s);
        }
    }
    worst
}

/// Explicit stability limits `(diffusive, transport)` without safety factor.
/// On a square grid these are `h² / (4 r_u γ max u^(γ−1))` and
/// `h / (χ G)` with `G` the largest per-cell sum of face gradients.
pub fn stability_limits(u: &Field, v: &Field, p: &ModelParams) -> (f64, f64) {
    let grid = u.grid();
    let umax = u.max().max(0.0);
    let diff_rate = 2.0
        * p.r_u
        * p.gamma
        * umax.powf(p.gamma - 1.0)
        * (1.0 / (grid.hx() * grid.hx()) + 1.0 / (grid.hy() * grid.hy()));
    let transport_rate = p.chi * max_outflow_rate(v);
    let limit = |rate: f64| if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
    (limit(diff_rate), limit(transport_rate))
}

/// `CFL_SAFETY · min(diffusive, transport)` limit, capped at `dt_max`.
pub fn cfl_dt(u: &Field, v: &Field, p: &ModelParams, dt_max: f64) -> f64 {
    let (d, t) = stability_limits(u, v, p);
    (CFL_SAFETY * d.min(t)).min(dt_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub dt_used: f64,
    pub clip_count: usize,
    pub mass_before: f64,
    pub mass_after: f64,
    pub max_u: f64,
}

/// Deterministic right-hand side `r_u Δ_h u^[γ] − χ div(η ∇v) + μ u`.
pub fn u_drift(u: &Field, v: &Field, eta: &Field, p: &ModelParams, mu: &Field) -> Result<Field> {
    u.check_same_grid(v)?;
    u.check_same_grid(eta)?;
    u.check_same_grid(mu)?;
    let w = u.map(|x| signed_power(x, p.gamma));
    let lap = laplacian(&w);
    let div = chemo_flux_div(eta, v)?;
    let values = (0..u.grid().len())
        .map(|k| p.r_u * lap.values()[k] - p.chi * div.values()[k] + mu.values()[k] * u.values()[k])
        .collect();
    Ok(Field::from_raw(u.grid(), values))
}

/// Clips negative cells to zero, returning how many were clipped.
pub fn clip_negative(f: &mut Field) -> usize {
    let mut n = 0;
    for x in f.values_mut() {
        if *x < 0.0 {
            *x = 0.0;
            n += 1;
        }
    }
    n
}

/// One Euler-Maruyama step of the u-equation.
#[allow(clippy::too_many_arguments)]
pub fn step_u(
    u: &Field,
    v: &Field,
    eta: &Field,
    p: &ModelParams,
    mu: &Field,
    dw1: &Field,
    dt: f64,
) -> Result<(Field, StepDiagnostics)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    u.check_same_grid(dw1)?;
    let (d, t) = stability_limits(u, v, p);
    let limit = d.min(t);
    if dt > limit {
        return Err(Error::CflViolation { step: 0, dt, limit });
    }
    let drift = u_drift(u, v, eta, p, mu)?;
    let values: Vec<f64> = (0..u.grid().len())
        .map(|k| {
            let ui = u.values()[k];
            ui + dt * drift.values()[k] + p.sigma_u * ui * dw1.values()[k]
        })
        .collect();
    let mut next = Field::from_raw(u.grid(), values);
    if let Some((cell, value)) = next.first_non_finite() {
        return Err(Error::NonFiniteField { cell, value });
    }
    let clip_count = clip_negative(&mut next);
    let diag = StepDiagnostics {
        dt_used: dt,
        clip_count,
        mass_before: u.integral(),
        mass_after: next.integral(),
        max_u: next.max(),
    };
    Ok((next, diag))
}

/// Clipping totals over a trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipStats {
    pub steps: usize,
    pub cells: usize,
    pub clipped: usize,
}

impl ClipStats {
    pub fn record(&mut self, diag: &StepDiagnostics, cells: usize) {
        self.steps += 1;
        self.cells = cells;
        self.clipped += diag.clip_count;
    }

    /// Clipped cells per cell-step.
    pub fn fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.clipped as f64 / (self.steps * self.cells) as f64
        }
    }

    pub fn merge(&mut self, other: &ClipStats) {
        self.clipped += other.clipped;
        self.steps += other.steps;
        self.cells = self.cells.max(other.cells);
    }
}

/// Integrates the u-equation along prescribed `v` and `eta` paths. Step `n`
/// uses `v_path[n + 1]` (the chemoattractant already advanced) and
/// `eta_path[n]`.
#[allow(clippy::too_many_arguments)]
pub fn solve_u_path(
    u0: &Field,
    v_path: &[Field],
    eta_path: &[Field],
    w1: &mut WienerSampler,
    p: &ModelParams,
    mu: &Field,
    dt: f64,
    nsteps: usize,
) -> Result<(Vec<Field>, ClipStats)> {
    if v_path.len() < nsteps + 1 || eta_path.len() < nsteps {
        return Err(Error::ScheduleMismatch(format!(
            "{} steps need {} v fields and {} eta fields, got {} and {}",
            nsteps,
            nsteps + 1,
            nsteps,
            v_path.len(),
            eta_path.len()
        )));
    }
    let mut stats = ClipStats::default();
    let mut path = Vec::with_capacity(nsteps + 1);
    path.push(u0.clone());
    for n in 0..nsteps {
        let dw = w1.sample_increment(dt)?;
        let (next, diag) = step_u(&path[n], &v_path[n + 1], &eta_path[n], p, mu, &dw, dt)
            .map_err(|e| e.at_step(n))?;
        stats.record(&diag, u0.grid().len());
        path.push(next);
    }
    Ok((path, stats))
}
