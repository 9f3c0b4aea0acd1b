//! Path ensembles and the moment functionals
//!
//! ```text
//! Q1  = sup_t |u|_{L^{γ+1}}^{γ+1} + (γ/2)(γ+1)γ ∫ |u^γ ∇u|²_{L²} dt
//! Q1' = sup_t |u|_{L^{γ+1}}^{γ+1} + (γ+1)γ² ∫ |u^{γ−1} ∇u|²_{L²} dt
//! Q2  = sup_t |u|²_{H^{-1}_2} + ∫ |u|_{L^{γ+1}}^{γ+1} dt
//! Q3  = (∫ |v|_{H^1_4}^{γ+1} dt)^{4/(γ+1)}
//! Q3' = ∫ |v|_{H^1_4}^4 dt
//! Q4  = sup_t |v|_{L^4}^4
//! ```
//!
//! Suprema are maxima over the stored snapshots (a lower bound on the true
//! supremum); time integrals use the trapezoid rule on the same instants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{
    subsample, FixedPointReport, NoiseInterpretation, PathProblem, PathTrajectory,
};
use crate::grid::{pairwise_sum, Field, Grid};
use crate::initial::InitialCondition;
use crate::model::ModelParams;
use crate::noise::{build_sampler, NoiseSpec};
use crate::norms::{h1p_norm, lp_norm, lp_norm_pow, sobolev2_norm};
use crate::schedule::Schedule;
use crate::spectral::{SpectralBasis, TransformBackend};
use crate::stencil::gradient;
use crate::u_step::{cfl_dt, ClipStats};

/// Extra factor by which the CFL policy undercuts the initial-state limit,
/// leaving room for growth of `max u` along the path.
pub const CFL_HEADROOM: f64 = 2.0;

/// Fraction of failed paths above which an ensemble is rejected.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DtPolicy {
    Fixed(f64),
    /// Uniform step from the stability limit of the initial state, divided
    /// by [`CFL_HEADROOM`] and capped at `dt_max`.
    Cfl { dt_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Direct,
    Picard,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(Method::Direct),
            "picard" => Ok(Method::Picard),
            _ => Err(format!("unknown method '{s}' (expected direct or picard)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub paths: usize,
    pub t_final: f64,
    pub dt: DtPolicy,
    /// Requested number of output instants besides `t = 0`.
    pub snapshots: usize,
    pub nx: usize,
    pub ny: usize,
    pub params: ModelParams,
    /// Shapes of `W₁` and `W₂`; seeds and streams are assigned per path.
    pub noise_u: NoiseSpec,
    pub noise_v: NoiseSpec,
    pub base_seed: u64,
    pub method: Method,
    pub interpretation: NoiseInterpretation,
    pub u0: InitialCondition,
    pub v0: InitialCondition,
    /// Absolute Picard tolerance; `None` means `1e-6 (1 + |u0|_{H^{-1}_2})`.
    pub picard_tol: Option<f64>,
    pub picard_max_iter: usize,
    pub backend: TransformBackend,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            paths: 1,
            t_final: 0.05,
            dt: DtPolicy::Cfl { dt_max: 1e-3 },
            snapshots: 100,
            nx: 32,
            ny: 32,
            params: ModelParams::default(),
            noise_u: NoiseSpec::new(2.5, 4, 0),
            noise_v: NoiseSpec::new(2.5, 4, 0),
            base_seed: 0,
            method: Method::Direct,
            interpretation: NoiseInterpretation::Ito,
            u0: InitialCondition::Cosine {
                m1: 1,
                m2: 1,
                amplitude: 0.5,
                offset: 1.0,
            },
            v0: InitialCondition::Cosine {
                m1: 1,
                m2: 0,
                amplitude: 0.5,
                offset: 1.0,
            },
            picard_tol: None,
            picard_max_iter: 20,
            backend: TransformBackend::Fast,
        }
    }
}

/// Grid, basis, initial data and time grid shared by all paths of a run.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub grid: Grid,
    pub basis: SpectralBasis,
    pub u0: Field,
    pub v0: Field,
    pub schedule: Schedule,
}

/// Outcome of one path.
#[derive(Debug, Clone)]
pub struct PathRun {
    /// Snapshot instants only.
    pub trajectory: PathTrajectory,
    pub report: Option<FixedPointReport>,
}

impl EnsembleConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut errs = self.params.violations();
        if self.paths < 1 {
            errs.push("paths must be at least 1".into());
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            errs.push(format!("t_final must be positive, got {}", self.t_final));
        }
        match self.dt {
            DtPolicy::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => {
                errs.push(format!("dt must be positive, got {dt}"))
            }
            DtPolicy::Cfl { dt_max } if !(dt_max > 0.0 && dt_max.is_finite()) => {
                errs.push(format!("dt_max must be positive, got {dt_max}"))
            }
            _ => {}
        }
        if self.snapshots < 1 {
            errs.push("snapshots must be at least 1".into());
        }
        if self.nx < 4 || self.ny < 4 {
            errs.push(format!("grid {}x{} too coarse (need at least 4x4)", self.nx, self.ny));
        }
        for (name, spec) in [("u", &self.noise_u), ("v", &self.noise_v)] {
            if !(spec.delta > 0.0 && spec.delta.is_finite()) {
                errs.push(format!("delta_{name} must be positive, got {}", spec.delta));
            }
            if spec.kmax >= self.nx.min(self.ny) {
                errs.push(format!(
                    "kmax_{name} = {} must be below the grid size {}",
                    spec.kmax,
                    self.nx.min(self.ny)
                ));
            }
        }
        if let Some(tol) = self.picard_tol {
            if !(tol > 0.0) {
                errs.push(format!("picard_tol must be positive, got {tol}"));
            }
        }
        if self.picard_max_iter < 1 {
            errs.push("picard_max_iter must be at least 1".into());
        }
        for (name, ic) in [("u0", &self.u0), ("v0", &self.v0)] {
            if let Some(msg) = ic.static_violation() {
                errs.push(format!("{name}: {msg}"));
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny)
    }

    /// Builds initial data and resolves the time step.
    pub fn setup(&self) -> Result<RunSetup> {
        self.validate()?;
        let grid = self.grid()?;
        let basis = SpectralBasis::with_backend(grid, self.backend);
        let u0 = self.u0.build(grid, self.params.gamma, self.params.r_u)?;
        let v0 = self.v0.build(grid, self.params.gamma, self.params.r_u)?;
        let dt = match self.dt {
            DtPolicy::Fixed(dt) => dt,
            DtPolicy::Cfl { dt_max } => cfl_dt(&u0, &v0, &self.params, dt_max * CFL_HEADROOM) / CFL_HEADROOM,
        };
        let schedule = Schedule::covering(self.t_final, dt)?.with_snapshots(self.snapshots);
        Ok(RunSetup {
            grid,
            basis,
            u0,
            v0,
            schedule,
        })
    }

    /// Noise specs of path `i`: one seed, streams `2i` and `2i + 1`.
    pub fn path_noise(&self, i: usize) -> (NoiseSpec, NoiseSpec) {
        let stream = 2 * i as u64;
        (
            NoiseSpec {
                seed: self.base_seed,
                stream,
                ..self.noise_u
            },
            NoiseSpec {
                seed: self.base_seed,
                stream: stream + 1,
                ..self.noise_v
            },
        )
    }

    pub fn problem<'a>(&self, setup: &'a RunSetup, i: usize) -> Result<PathProblem<'a>> {
        let (s1, s2) = self.path_noise(i);
        let w1 = build_sampler(s1, &setup.basis)?;
        let w2 = build_sampler(s2, &setup.basis)?;
        PathProblem::new(&setup.basis, self.params, w1, w2, setup.schedule, self.interpretation)
    }

    pub fn picard_tolerance(&self, setup: &RunSetup) -> Result<f64> {
        match self.picard_tol {
            Some(t) => Ok(t),
            None => Ok(1e-6 * (1.0 + sobolev2_norm(&setup.u0, -1.0, &setup.basis)?)),
        }
    }

    /// Runs path `i` with the configured method.
    pub fn run_path(&self, setup: &RunSetup, i: usize) -> Result<PathRun> {
        let problem = self.problem(setup, i)?;
        match self.method {
            Method::Direct => Ok(PathRun {
                trajectory: problem.direct_solve(&setup.u0, &setup.v0)?,
                report: None,
            }),
            Method::Picard => {
                let tol = self.picard_tolerance(setup)?;
                let (traj, report) =
                    problem.picard_iterate(&setup.u0, &setup.v0, tol, self.picard_max_iter)?;
                Ok(PathRun {
                    trajectory: subsample(&traj, &setup.schedule),
                    report: Some(report),
                })
            }
        }
    }

    /// Same run with the grid spacing halved. A fixed step is halved too; the
    /// CFL policy recomputes it.
    pub fn refined(&self) -> Self {
        EnsembleConfig {
            nx: self.nx * 2,
            ny: self.ny * 2,
            dt: match self.dt {
                DtPolicy::Fixed(dt) => DtPolicy::Fixed(dt / 2.0),
                cfl => cfl,
            },
            ..self.clone()
        }
    }
}

/// Per-path values of the moment functionals and positivity diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathFunctionals {
    pub q1: f64,
    pub q1_alt: f64,
    pub q2: f64,
    pub q3: f64,
    pub q3_alt: f64,
    pub q4: f64,
    pub v0_l4: f64,
    pub final_u_l2: f64,
    pub final_mass: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub clip: ClipStats,
}

/// `∫ f dt` by the trapezoid rule on the given instants.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    let terms: Vec<f64> = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .collect();
    pairwise_sum(&terms)
}

/// `|u^a ∇u|²_{L²}` with the shared central-difference gradient.
fn weighted_dirichlet(u: &Field, a: f64) -> f64 {
    let (gx, gy) = gradient(u);
    let terms: Vec<f64> = u
        .values()
        .iter()
        .zip(gx.values().iter().zip(gy.values()))
        .map(|(&ui, (&dx, &dy))| ui.abs().powf(2.0 * a) * (dx * dx + dy * dy))
        .collect();
    pairwise_sum(&terms) * u.grid().cell_area()
}

pub fn path_functionals(
    traj: &PathTrajectory,
    p: &ModelParams,
    basis: &SpectralBasis,
) -> Result<PathFunctionals> {
    let g = p.gamma;
    let t = &traj.times;
    let mut lg1 = Vec::with_capacity(t.len());
    let mut energy = Vec::with_capacity(t.len());
    let mut energy_alt = Vec::with_capacity(t.len());
    let mut hm1 = 0.0f64;
    for u in &traj.u {
        lg1.push(lp_norm_pow(u, g + 1.0)?);
        energy.push(weighted_dirichlet(u, g));
        energy_alt.push(weighted_dirichlet(u, g - 1.0));
        hm1 = hm1.max(sobolev2_norm(u, -1.0, basis)?.powi(2));
    }
    let sup_lg1 = lg1.iter().cloned().fold(0.0, f64::max);
    let mut h14 = Vec::with_capacity(t.len());
    let mut l4 = 0.0f64;
    for v in &traj.v {
        h14.push(h1p_norm(v, 4.0)?);
        l4 = l4.max(lp_norm_pow(v, 4.0)?);
    }
    let h14_g1: Vec<f64> = h14.iter().map(|x| x.powf(g + 1.0)).collect();
    let h14_4: Vec<f64> = h14.iter().map(|x| x.powi(4)).collect();
    let last = traj.u.last().expect("trajectory holds the initial state");
    Ok(PathFunctionals {
        q1: sup_lg1 + 0.5 * g * (g + 1.0) * g * trapezoid(t, &energy),
        q1_alt: sup_lg1 + (g + 1.0) * g * g * trapezoid(t, &energy_alt),
        q2: hm1 + trapezoid(t, &lg1),
        q3: trapezoid(t, &h14_g1).powf(4.0 / (g + 1.0)),
        q3_alt: trapezoid(t, &h14_4),
        q4: l4,
        v0_l4: lp_norm(&traj.v[0], 4.0)?,
        final_u_l2: lp_norm(last, 2.0)?,
        final_mass: last.integral(),
        min_u: traj.min_u,
        min_v: traj.min_v,
        max_v: traj.max_v,
        clip: traj.clip,
    })
}

/// Sample mean with standard error `s / √M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        if n == 1 {
            return Estimate { mean, se: 0.0 };
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Estimate {
            mean,
            se: (var / n as f64).sqrt(),
        }
    }

    /// `|a − b| / sqrt(se_a² + se_b²)`.
    pub fn joint_z(&self, other: &Estimate) -> f64 {
        let se = (self.se.powi(2) + other.se.powi(2)).sqrt();
        let d = (self.mean - other.mean).abs();
        if se > 0.0 {
            d / se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub q1: Estimate,
    pub q1_alt: Estimate,
    pub q2: Estimate,
    pub q3: Estimate,
    pub q3_alt: Estimate,
    pub q4: Estimate,
    /// `E |v0|_{L⁴}`, the first-power data term bounding Q3 and Q4.
    pub v0_l4: Estimate,
    pub final_u_l2: Estimate,
    pub min_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub clip_fraction: f64,
    pub paths_used: usize,
    pub failures: usize,
    /// Accepted paths in index order.
    pub records: Vec<(usize, PathFunctionals)>,
}

impl MomentEstimates {
    pub fn from_records(records: Vec<(usize, PathFunctionals)>, failures: usize) -> Self {
        let col = |f: fn(&PathFunctionals) -> f64| {
            Estimate::from_samples(&records.iter().map(|(_, r)| f(r)).collect::<Vec<_>>())
        };
        let mut clip = ClipStats::default();
        for (_, r) in &records {
            clip.merge(&r.clip);
        }
        let fold = |f: fn(&PathFunctionals) -> f64, init: f64, op: fn(f64, f64) -> f64| {
            records.iter().map(|(_, r)| f(r)).fold(init, op)
        };
        MomentEstimates {
            q1: col(|r| r.q1),
            q1_alt: col(|r| r.q1_alt),
            q2: col(|r| r.q2),
            q3: col(|r| r.q3),
            q3_alt: col(|r| r.q3_alt),
            q4: col(|r| r.q4),
            v0_l4: col(|r| r.v0_l4),
            final_u_l2: col(|r| r.final_u_l2),
            min_u: fold(|r| r.min_u, f64::INFINITY, f64::min),
            min_v: fold(|r| r.min_v, f64::INFINITY, f64::min),
            max_v: fold(|r| r.max_v, f64::NEG_INFINITY, f64::max),
            clip_fraction: clip.fraction(),
            paths_used: records.len(),
            failures,
            records,
        }
    }

    /// The moment estimates by name, in reporting order.
    pub fn named(&self) -> [(&'static str, Estimate); 8] {
        [
            ("Q1", self.q1),
            ("Q1_alt", self.q1_alt),
            ("Q2", self.q2),
            ("Q3", self.q3),
            ("Q3_alt", self.q3_alt),
            ("Q4", self.q4),
            ("E_v0_L4", self.v0_l4),
            ("u_T_L2", self.final_u_l2),
        ]
    }

    /// The moment functionals proper (Q1 through Q4 and their variants).
    pub fn moments(&self) -> [(&'static str, Estimate); 6] {
        let n = self.named();
        [n[0], n[1], n[2], n[3], n[4], n[5]]
    }
}

/// Worker count from `KSPM_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("KSPM_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every path and reduces the functionals. Worker count comes from
/// `KSPM_THREADS` (all cores when unset).
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<MomentEstimates> {
    run_ensemble_with_threads(cfg, thread_cap())
}

/// [`run_ensemble`] on an explicit number of workers. Results do not depend
/// on the worker count.
pub fn run_ensemble_with_threads(cfg: &EnsembleConfig, threads: Option<usize>) -> Result<MomentEstimates> {
    let setup = cfg.setup()?;
    let one = |i: usize| -> Result<PathFunctionals> {
        let run = cfg.run_path(&setup, i)?;
        path_functionals(&run.trajectory, &cfg.params, &setup.basis)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<PathFunctionals>> =
        pool.install(|| (0..cfg.paths).into_par_iter().map(one).collect());
    collect_outcomes(outcomes)
}

fn collect_outcomes(outcomes: Vec<Result<PathFunctionals>>) -> Result<MomentEstimates> {
    let total = outcomes.len();
    let mut records = Vec::with_capacity(total);
    let mut failed = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => records.push((i, r)),
            Err(e) if e.is_numerical() => failed.push((i, e)),
            Err(e) => return Err(e),
        }
    }
    if failed.len() as f64 > MAX_FAILURE_FRACTION * total as f64 || records.is_empty() {
        let (i, e) = &failed[0];
        return Err(Error::EnsembleFailed {
            failed: failed.len(),
            total,
            first: format!("path {i}: {e}"),
        });
    }
    Ok(MomentEstimates::from_records(records, failed.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub estimates: MomentEstimates,
    /// `|Q_ℓ − Q_{ℓ−1}| / |Q_{ℓ−1}|` for each moment, absent on the first level.
    pub rel_change: Option<Vec<(String, f64)>>,
}

/// Runs `cfg` and `levels − 1` successive refinements with the same seeds.
pub fn refinement_study(cfg: &EnsembleConfig, levels: usize) -> Result<Vec<RefinementLevel>> {
    if levels < 2 {
        return Err(Error::InvalidParameter(format!(
            "a refinement study needs at least 2 levels, got {levels}"
        )));
    }
    let mut out: Vec<RefinementLevel> = Vec::with_capacity(levels);
    let mut level_cfg = cfg.clone();
    for _ in 0..levels {
        let dt = level_cfg.setup()?.schedule.dt();
        let estimates = run_ensemble(&level_cfg)?;
        let rel_change = out.last().map(|prev| {
            prev.estimates
                .moments()
                .iter()
                .zip(estimates.moments())
                .map(|((name, a), (_, b))| (name.to_string(), relative_change(a.mean, b.mean)))
                .collect()
        });
        out.push(RefinementLevel {
            nx: level_cfg.nx,
            ny: level_cfg.ny,
            dt,
            estimates,
            rel_change,
        });
        level_cfg = level_cfg.refined();
    }
    Ok(out)
}

fn relative_change(old: f64, new: f64) -> f64 {
    if old == new {
        0.0
    } else {
        (new - old).abs() / old.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_point::NoiseRecord;

    fn constant_path(grid: Grid, c: f64, v: f64, t_final: f64, n: usize) -> PathTrajectory {
        PathTrajectory {
            times: (0..=n).map(|k| t_final * k as f64 / n as f64).collect(),
            u: vec![Field::constant(grid, c); n + 1],
            v: vec![Field::constant(grid, v); n + 1],
            noise: NoiseRecord {
                w1: NoiseSpec::new(2.5, 2, 0),
                w2: NoiseSpec::new(2.5, 2, 0),
            },
            clip: ClipStats::default(),
            min_u: c,
            min_v: v,
            max_v: v,
        }
    }

    #[test]
    fn functionals_of_constant_paths() {
        let g = Grid::square(16).unwrap();
        let basis = SpectralBasis::new(g);
        let p = ModelParams::default();
        let zero = path_functionals(&constant_path(g, 0.0, 0.0, 0.5, 10), &p, &basis).unwrap();
        for q in [zero.q1, zero.q1_alt, zero.q2, zero.q3, zero.q3_alt, zero.q4] {
            assert_eq!(q, 0.0);
        }
        let (c, t) = (1.7, 0.5);
        let f = path_functionals(&constant_path(g, c, 0.3, t, 10), &p, &basis).unwrap();
        assert!((f.q1 - c.powi(3)).abs() < 1e-12);
        assert!((f.q2 - (c * c + t * c.powi(3))).abs() < 1e-12);
        // |v|_{H^1_4} = |v|_{L^4} = 0.3 for a constant
        assert!((f.q4 - 0.3f64.powi(4)).abs() < 1e-14);
        assert!((f.q3_alt - t * 0.3f64.powi(4)).abs() < 1e-14);
        assert!((f.q3 - (t * 0.3f64.powi(3)).powf(4.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let t = [0.0, 0.1, 0.25, 0.7];
        let v: Vec<f64> = t.iter().map(|s| 2.0 * s + 1.0).collect();
        assert!((trapezoid(&t, &v) - (0.49 + 0.7)).abs() < 1e-14);
    }

    #[test]
    fn estimate_statistics() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(Estimate::from_samples(&[3.0]).se, 0.0);
        assert_eq!(e.joint_z(&e), 0.0);
    }

    fn tiny() -> EnsembleConfig {
        EnsembleConfig {
            paths: 3,
            t_final: 0.005,
            nx: 16,
            ny: 16,
            snapshots: 10,
            noise_u: NoiseSpec::new(2.5, 3, 0),
            noise_v: NoiseSpec::new(2.5, 3, 0),
            base_seed: 17,
            ..EnsembleConfig::default()
        }
    }

    #[test]
    fn single_deterministic_path_has_zero_se() {
        let mut cfg = tiny();
        cfg.paths = 1;
        cfg.params.sigma_u = 0.0;
        cfg.params.sigma_v = 0.0;
        let est = run_ensemble_with_threads(&cfg, Some(1)).unwrap();
        let setup = cfg.setup().unwrap();
        let run = cfg.run_path(&setup, 0).unwrap();
        let f = path_functionals(&run.trajectory, &cfg.params, &setup.basis).unwrap();
        assert_eq!(est.q1.mean, f.q1);
        assert_eq!(est.q4.mean, f.q4);
        assert!(est.named().iter().all(|(_, e)| e.se == 0.0));
    }

    #[test]
    fn seeded_runs_repeat_and_ignore_thread_count() {
        let cfg = tiny();
        let a = run_ensemble_with_threads(&cfg, Some(1)).unwrap();
        let b = run_ensemble_with_threads(&cfg, Some(3)).unwrap();
        assert_eq!(a, b);
        let mut shifted = cfg.clone();
        shifted.base_seed += 1;
        assert_ne!(run_ensemble_with_threads(&shifted, Some(1)).unwrap().q1, a.q1);
    }

    #[test]
    fn paths_use_distinct_streams() {
        let cfg = tiny();
        let (a1, a2) = cfg.path_noise(0);
        let (b1, _) = cfg.path_noise(1);
        assert_ne!(a1.stream, a2.stream);
        assert_ne!(a2.stream, b1.stream);
        assert_eq!(a1.seed, b1.seed);
    }

    #[test]
    fn failures_are_counted() {
        let ok = || Ok(path_functionals(&constant_path(Grid::square(8).unwrap(), 1.0, 1.0, 1.0, 2), &ModelParams::default(), &SpectralBasis::new(Grid::square(8).unwrap())).unwrap());
        let bad = || Err(Error::CflViolation { step: 3, dt: 1.0, limit: 0.5 });
        let mut outcomes: Vec<Result<PathFunctionals>> = (0..40).map(|_| ok()).collect();
        outcomes[5] = bad();
        let est = collect_outcomes(outcomes).unwrap();
        assert_eq!((est.paths_used, est.failures), (39, 1));
        let mut outcomes: Vec<Result<PathFunctionals>> = (0..40).map(|_| ok()).collect();
        for k in 0..3 {
            outcomes[k] = bad();
        }
        assert!(matches!(collect_outcomes(outcomes), Err(Error::EnsembleFailed { failed: 3, .. })));
    }

    #[test]
    fn refinement_needs_two_levels() {
        assert!(refinement_study(&tiny(), 1).is_err());
        let cfg = tiny().refined();
        assert_eq!((cfg.nx, cfg.ny), (32, 32));
    }

    #[test]
    fn config_violations_are_collected() {
        let mut cfg = tiny();
        cfg.paths = 0;
        cfg.params.gamma = 0.5;
        cfg.u0 = InitialCondition::Constant(-1.0);
        let errs = cfg.violations();
        assert!(errs.len() >= 3, "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("gamma must exceed 1")));
    }
}
