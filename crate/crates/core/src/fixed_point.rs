//! Solution operator `T: η ↦ u` of the decoupled system and its Picard
//! iteration, together with a directly coupled integrator for comparison.
//!
//! For a prescribed cell-density path `η`, `T` first integrates
//! `dv = (r_v Δv + β η − α v) dt + σ_v v dW₂`, then
//! `du = (r_u Δu^[γ] − χ div(η ∇v) + μ u) dt + σ_u u dW₁`, and returns `u`.
//! Every application replays the same noise realization, so the iteration
//! is pathwise. Distances between paths are measured in
//! `sup_t |·|_{H^{-1}_2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::ModelParams;
use crate::noise::{NoiseSpec, WienerSampler};
use crate::norms::sobolev2_norm;
use crate::schedule::Schedule;
use crate::spectral::SpectralBasis;
use crate::u_step::{solve_u_path, step_u, ClipStats};
use crate::v_step::{solve_v_path, step_v_with_rate};

/// How the multiplicative noise of the model is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseInterpretation {
    /// Itô model, integrated as is (`μ = 0`).
    #[default]
    Ito,
    /// Stratonovich model, integrated in Itô form with the correction drift
    /// `μ(x) = σ²/2 Σ q_k² ψ_k(x)²` added to both equations.
    Stratonovich,
}

/// Seeds and specs sufficient to regenerate every increment of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub w1: NoiseSpec,
    pub w2: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathTrajectory {
    pub times: Vec<f64>,
    pub u: Vec<Field>,
    pub v: Vec<Field>,
    pub noise: NoiseRecord,
    pub clip: ClipStats,
    /// Extremes over every integration step, not just the stored instants.
    pub min_u: f64,
    pub min_v: f64,
    pub max_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub iterations: usize,
    /// `distances[n] = sup_t |η_{n+1}(t) − η_n(t)|_{H^{-1}_2}`.
    pub distances: Vec<f64>,
    pub converged: bool,
    /// Whether the distances decreased strictly at every iteration.
    pub monotone: bool,
}

/// Everything one noise path needs: basis, coefficients, both Wiener
/// samplers and the time grid.
#[derive(Debug, Clone)]
pub struct PathProblem<'a> {
    basis: &'a SpectralBasis,
    params: ModelParams,
    w1: WienerSampler,
    w2: WienerSampler,
    schedule: Schedule,
    mu_u: Field,
    mu_v: Option<Field>,
}

impl<'a> PathProblem<'a> {
    pub fn new(
        basis: &'a SpectralBasis,
        params: ModelParams,
        w1: WienerSampler,
        w2: WienerSampler,
        schedule: Schedule,
        interpretation: NoiseInterpretation,
    ) -> Result<Self> {
        params.validate()?;
        if w1.grid() != basis.grid() || w2.grid() != basis.grid() {
            return Err(Error::InvalidParameter(
                "noise samplers must live on the basis grid".into(),
            ));
        }
        let (mu_u, mu_v) = match interpretation {
            NoiseInterpretation::Ito => (Field::zeros(basis.grid()), None),
            NoiseInterpretation::Stratonovich => (
                w1.correction_mu(params.sigma_u),
                Some(w2.correction_mu(params.sigma_v)),
            ),
        };
        Ok(PathProblem {
            basis,
            params,
            w1: w1.fresh(),
            w2: w2.fresh(),
            schedule,
            mu_u,
            mu_v,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn basis(&self) -> &SpectralBasis {
        self.basis
    }

    pub fn noise_record(&self) -> NoiseRecord {
        NoiseRecord {
            w1: *self.w1.spec(),
            w2: *self.w2.spec(),
        }
    }

    pub fn mu_u(&self) -> &Field {
        &self.mu_u
    }

    pub fn mu_v(&self) -> Option<&Field> {
        self.mu_v.as_ref()
    }

    /// Fresh copies of both samplers, positioned at the start of their streams.
    pub fn samplers(&self) -> (WienerSampler, WienerSampler) {
        (self.w1.fresh(), self.w2.fresh())
    }

    fn check_initial(&self, u0: &Field, v0: &Field) -> Result<()> {
        for (name, f) in [("u0", u0), ("v0", v0)] {
            if f.grid() != self.basis.grid() {
                return Err(Error::SizeMismatch {
                    expected: self.basis.grid().len(),
                    actual: f.grid().len(),
                });
            }
            if let Some((cell, value)) = f.first_non_finite() {
                return Err(Error::NonFiniteField { cell, value });
            }
            if f.min() < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative (minimum {})",
                    f.min()
                )));
            }
        }
        Ok(())
    }

    /// `T η`: integrates v driven by `eta_path`, then u with transport
    /// `χ div(η ∇v)`. Returns every step.
    pub fn apply_t(&self, eta_path: &[Field], u0: &Field, v0: &Field) -> Result<PathTrajectory> {
        let nsteps = self.schedule.nsteps();
        if eta_path.len() != nsteps + 1 && eta_path.len() != nsteps {
            return Err(Error::ScheduleMismatch(format!(
                "eta path has {} entries for {} steps",
                eta_path.len(),
                nsteps
            )));
        }
        self.check_initial(u0, v0)?;
        let (mut w1, mut w2) = self.samplers();
        let dt = self.schedule.dt();
        let v = solve_v_path(
            v0,
            eta_path,
            &mut w2,
            &self.params,
            dt,
            nsteps,
            self.basis,
            self.mu_v.as_ref(),
        )?;
        let (u, clip) = solve_u_path(u0, &v, eta_path, &mut w1, &self.params, &self.mu_u, dt, nsteps)?;
        let (min_v, max_v) = extremes(&v);
        Ok(PathTrajectory {
            times: self.schedule.times(),
            min_u: extremes(&u).0,
            min_v,
            max_v,
            u,
            v,
            noise: self.noise_record(),
            clip,
        })
    }

    /// Picard iteration `η_{n+1} = T η_n` from `η_0(t) ≡ u0`, on one fixed
    /// noise realization. Stops once the distance drops below `tol`.
    pub fn picard_iterate(
        &self,
        u0: &Field,
        v0: &Field,
        tol: f64,
        max_iter: usize,
    ) -> Result<(PathTrajectory, FixedPointReport)> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
        }
        if max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        self.check_initial(u0, v0)?;
        let mut eta = vec![u0.clone(); self.schedule.nsteps() + 1];
        let mut distances = Vec::new();
        let mut converged = false;
        let mut last = None;
        for _ in 0..max_iter {
            let traj = self.apply_t(&eta, u0, v0)?;
            let d = xnorm_distance(&traj.u, &eta, self.basis)?;
            distances.push(d);
            eta = traj.u.clone();
            last = Some(traj);
            if d < tol {
                converged = true;
                break;
            }
        }
        let monotone = distances.windows(2).all(|w| w[1] < w[0]);
        let report = FixedPointReport {
            iterations: distances.len(),
            distances,
            converged,
            monotone,
        };
        Ok((last.expect("max_iter >= 1"), report))
    }

    /// Advances `(u, v)` jointly: `v` with `η = uⁿ`, then `u` with the new `v`
    /// and `η = uⁿ`. Stores the schedule's snapshot instants.
    pub fn direct_solve(&self, u0: &Field, v0: &Field) -> Result<PathTrajectory> {
        self.check_initial(u0, v0)?;
        let (mut w1, mut w2) = self.samplers();
        let dt = self.schedule.dt();
        let cells = u0.grid().len();
        let mut u = u0.clone();
        let mut v = v0.clone();
        let mut times = vec![0.0];
        let mut us = vec![u.clone()];
        let mut vs = vec![v.clone()];
        let mut clip = ClipStats::default();
        let (mut min_u, mut min_v, mut max_v) = (u.min(), v.min(), v.max());
        for n in 0..self.schedule.nsteps() {
            let dw2 = w2.sample_increment(dt)?;
            let v_next =
                step_v_with_rate(&v, &u, &self.params, &dw2, dt, self.basis, self.mu_v.as_ref())
                    .map_err(|e| e.at_step(n))?;
            let dw1 = w1.sample_increment(dt)?;
            let (u_next, diag) = step_u(&u, &v_next, &u, &self.params, &self.mu_u, &dw1, dt)
                .map_err(|e| e.at_step(n))?;
            clip.record(&diag, cells);
            u = u_next;
            v = v_next;
            min_u = min_u.min(u.min());
            min_v = min_v.min(v.min());
            max_v = max_v.max(v.max());
            if self.schedule.is_snapshot(n + 1) {
                times.push(self.schedule.time(n + 1));
                us.push(u.clone());
                vs.push(v.clone());
            }
        }
        Ok(PathTrajectory {
            times,
            u: us,
            v: vs,
            noise: self.noise_record(),
            clip,
            min_u,
            min_v,
            max_v,
        })
    }
}

fn extremes(path: &[Field]) -> (f64, f64) {
    path.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f.min()), hi.max(f.max())))
}

/// `max_t |a(t) − b(t)|_{H^{-1}_2}` over aligned sequences.
pub fn xnorm_distance(a: &[Field], b: &[Field], basis: &SpectralBasis) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ScheduleMismatch(format!(
            "paths have {} and {} entries",
            a.len(),
            b.len()
        )));
    }
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let diff = x.zip_map(y, |p, q| p - q)?;
        worst = worst.max(sobolev2_norm(&diff, -1.0, basis)?);
    }
    Ok(worst)
}

/// Keeps only the entries of a full-resolution trajectory that the schedule
/// marks as snapshots.
pub fn subsample(traj: &PathTrajectory, schedule: &Schedule) -> PathTrajectory {
    let keep = schedule.snapshot_steps();
    let pick = |xs: &[Field]| keep.iter().map(|&n| xs[n].clone()).collect::<Vec<_>>();
    PathTrajectory {
        times: keep.iter().map(|&n| traj.times[n]).collect(),
        u: pick(&traj.u),
        v: pick(&traj.v),
        ..traj.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::noise::build_sampler;
    use std::f64::consts::PI;

    fn setup(basis: &SpectralBasis, params: ModelParams, nsteps: usize) -> PathProblem<'_> {
        let w1 = build_sampler(NoiseSpec::new(2.5, 3, 42), basis).unwrap();
        let w2 = build_sampler(NoiseSpec::new(2.5, 3, 42).with_stream(1), basis).unwrap();
        let schedule = Schedule::new(2e-4, nsteps).unwrap();
        PathProblem::new(basis, params, w1, w2, schedule, NoiseInterpretation::Ito).unwrap()
    }

    fn initial(g: Grid) -> (Field, Field) {
        (
            Field::from_fn(g, |x, y| 1.0 + 0.5 * (PI * x).cos() * (PI * y).cos()),
            Field::from_fn(g, |x, _| 1.0 + 0.5 * (PI * x).cos()),
        )
    }

    #[test]
    fn distance_properties() {
        let g = Grid::square(16).unwrap();
        let basis = SpectralBasis::new(g);
        let a: Vec<_> = (0..4).map(|k| Field::from_fn(g, |x, y| (k as f64 + x) * y)).collect();
        assert_eq!(xnorm_distance(&a, &a, &basis).unwrap(), 0.0);
        let mut b = a.clone();
        b[2] = b[2].map(|v| v - 0.3);
        assert!((xnorm_distance(&a, &b, &basis).unwrap() - 0.3).abs() < 1e-12);
        assert!(xnorm_distance(&a, &b[..3], &basis).is_err());
    }

    #[test]
    fn decoupled_case_converges_in_two_iterations() {
        let g = Grid::square(16).unwrap();
        let basis = SpectralBasis::new(g);
        let params = ModelParams {
            chi: 0.0,
            ..ModelParams::default()
        };
        let problem = setup(&basis, params, 30);
        let (u0, v0) = initial(g);
        let (traj, report) = problem.picard_iterate(&u0, &v0, 1e-10, 10).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 2);
        assert!(report.distances[0] > 0.0);
        assert_eq!(report.distances[1], 0.0);
        let direct = subsample(&traj, problem.schedule());
        assert_eq!(direct.u, problem.direct_solve(&u0, &v0).unwrap().u);
    }

    #[test]
    fn deterministic_decoupled_u_ignores_eta() {
        let g = Grid::square(16).unwrap();
        let basis = SpectralBasis::new(g);
        let params = ModelParams {
            chi: 0.0,
            sigma_u: 0.0,
            sigma_v: 0.0,
            ..ModelParams::default()
        };
        let problem = setup(&basis, params, 20);
        let (u0, v0) = initial(g);
        let a = problem.apply_t(&vec![u0.clone(); 21], &u0, &v0).unwrap();
        let b = problem.apply_t(&vec![Field::constant(g, 3.0); 21], &u0, &v0).unwrap();
        assert_eq!(a.u, b.u);
        assert_ne!(a.v, b.v);
    }

    #[test]
    fn zero_eta_gives_damped_diffusion_of_v() {
        let g = Grid::square(16).unwrap();
        let basis = SpectralBasis::new(g);
        let params = ModelParams {
            sigma_v: 0.0,
            ..ModelParams::default()
        };
        let problem = setup(&basis, params, 10);
        let (u0, v0) = initial(g);
        let traj = problem.apply_t(&vec![Field::zeros(g); 11], &u0, &v0).unwrap();
        let zero = Field::zeros(g);
        let mut v = v0.clone();
        for _ in 0..10 {
            v = crate::v_step::step_v(&v, &zero, &params, &zero, 2e-4, &basis).unwrap();
        }
        assert_eq!(traj.v[10], v);
    }

    #[test]
    fn truncated_iteration_reports_non_convergence() {
        let g = Grid::square(16).unwrap();
        let basis = SpectralBasis::new(g);
        let params = ModelParams {
            chi: 5.0,
            ..ModelParams::default()
        };
        let problem = setup(&basis, params, 20);
        let (u0, v0) = initial(g);
        let (_, report) = problem.picard_iterate(&u0, &v0, 1e-12, 1).unwrap();
        assert!(!report.converged);
        assert_eq!(report.distances.len(), 1);
        assert!(report.distances[0] > 0.0);
        assert!(problem.picard_iterate(&u0, &v0, 0.0, 3).is_err());
        assert!(problem.picard_iterate(&u0, &v0, 1e-6, 0).is_err());
        let neg = u0.map(|x| x - 2.0);
        assert!(problem.picard_iterate(&neg, &v0, 1e-6, 3).is_err());
    }
}
