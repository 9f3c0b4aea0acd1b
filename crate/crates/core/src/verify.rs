//! Quick self-check of the numerics, run by `kspm verify`. Every check is
//! small enough that the whole suite finishes in seconds.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fixed_point::{NoiseInterpretation, PathProblem};
use crate::grid::{Field, Grid};
use crate::io::snapshot::{decode_snapshot, encode_snapshot};
use crate::model::ModelParams;
use crate::montecarlo::{run_ensemble_with_threads, EnsembleConfig};
use crate::noise::{build_sampler, NoiseSpec};
use crate::norms::{lp_norm, sobolev2_norm};
use crate::schedule::Schedule;
use crate::spectral::{SpectralBasis, TransformBackend};
use crate::stencil::laplacian;
use crate::u_step::step_u;
use crate::v_step::step_v;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, bound: f64) -> Check {
    Check {
        name,
        passed: value.is_finite() && value <= bound,
        detail: format!("{value:.3e} (bound {bound:.1e})"),
    }
}

fn failed(name: &'static str, err: impl std::fmt::Display) -> Check {
    Check {
        name,
        passed: false,
        detail: err.to_string(),
    }
}

fn random_field(grid: Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| rng.random::<f64>() - 0.5).collect();
    Field::new(grid, values).expect("finite by construction")
}

fn transforms() -> Vec<Check> {
    let g = Grid::new(24, 20).unwrap();
    let f = random_field(g, 1);
    let fast = SpectralBasis::with_backend(g, TransformBackend::Fast);
    let direct = SpectralBasis::with_backend(g, TransformBackend::Direct);
    let (cf, cd) = (fast.to_spectral(&f).unwrap(), direct.to_spectral(&f).unwrap());
    let backend_gap = cf
        .coeffs()
        .iter()
        .zip(cd.coeffs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let back = fast.from_spectral(&cf).unwrap();
    let round = back.zip_map(&f, |a, b| a - b).unwrap().max_abs();
    let energy: f64 = cf.coeffs().iter().map(|c| c * c).sum();
    let parseval = (energy - lp_norm(&f, 2.0).unwrap().powi(2)).abs();
    vec![
        check("fast and direct transforms agree", backend_gap, 1e-12),
        check("transform round trip", round, 1e-12),
        check("Parseval identity", parseval, 1e-12),
    ]
}

fn stencils() -> Vec<Check> {
    let g = Grid::square(32).unwrap();
    let basis = SpectralBasis::new(g);
    let f = random_field(g, 2);
    let lap_mass = laplacian(&f).integral().abs();
    let mode = basis.mode_field((3, 2));
    let lam = basis.stencil_lambda((3, 2));
    let eig = laplacian(&mode)
        .zip_map(&mode, |a, b| a + lam * b)
        .unwrap()
        .max_abs()
        / lam;
    let h0 = (sobolev2_norm(&f, 0.0, &basis).unwrap() - lp_norm(&f, 2.0).unwrap()).abs();
    vec![
        check("discrete Laplacian conserves mass", lap_mass, 1e-10),
        check("cosine modes are stencil eigenvectors", eig, 1e-12),
        check("H^0 norm equals L2 norm", h0, 1e-12),
    ]
}

fn mass_and_positivity() -> Vec<Check> {
    let g = Grid::square(32).unwrap();
    let basis = SpectralBasis::new(g);
    let p = ModelParams {
        sigma_u: 0.0,
        chi: 1.0,
        gamma: 2.0,
        ..ModelParams::default()
    };
    let zero = Field::zeros(g);
    let mut u = Field::from_fn(g, |x, y| 1.0 + 0.8 * (PI * x).cos() * (PI * y).cos());
    let v = Field::from_fn(g, |x, y| 1.0 + 0.5 * (2.0 * PI * x).cos() * (PI * y).cos());
    let m0 = u.integral();
    for _ in 0..100 {
        match step_u(&u, &v, &u, &p, &zero, &zero, 1e-4) {
            Ok((next, _)) => u = next,
            Err(e) => return vec![failed("deterministic u-step conserves mass", e)],
        }
    }
    let drift = ((u.integral() - m0) / m0).abs();

    let mut w = build_sampler(NoiseSpec::new(2.5, 4, 9), &basis).unwrap();
    let noisy = ModelParams::default();
    let mut u = Field::from_fn(g, |x, _| 0.5 + 0.5 * (PI * x).cos());
    let mut v = Field::from_fn(g, |_, y| 0.5 + 0.5 * (PI * y).cos());
    let mut min_v = f64::INFINITY;
    let mut max_v = 0.0f64;
    for _ in 0..100 {
        let dw2 = w.sample_increment(1e-4).unwrap();
        v = step_v(&v, &u, &noisy, &dw2, 1e-4, &basis).unwrap();
        let dw1 = w.sample_increment(1e-4).unwrap();
        u = match step_u(&u, &v, &u, &noisy, &zero, &dw1, 1e-4) {
            Ok((next, _)) => next,
            Err(e) => return vec![failed("stochastic path stays nonnegative", e)],
        };
        min_v = min_v.min(v.min());
        max_v = max_v.max(v.max());
    }
    vec![
        check("deterministic u-step conserves mass", drift, 1e-10),
        check("u stays nonnegative", -u.min(), 0.0),
        check("v stays nonnegative", -min_v / max_v, 1e-10),
    ]
}

fn v_decay() -> Check {
    let g = Grid::square(32).unwrap();
    let basis = SpectralBasis::new(g);
    let p = ModelParams {
        sigma_v: 0.0,
        ..ModelParams::default()
    };
    let zero = Field::zeros(g);
    let mut v = basis.mode_field((1, 0));
    let (dt, n) = (1e-4, 200);
    for _ in 0..n {
        v = step_v(&v, &zero, &p, &zero, dt, &basis).unwrap();
    }
    let decay = (-(p.r_v * PI * PI + p.alpha) * dt * n as f64).exp();
    let exact = basis.mode_field((1, 0)).map(|x| x * decay);
    let err = v.zip_map(&exact, |a, b| a - b).unwrap().max_abs() / exact.max_abs();
    check("single v-mode decays at the continuum rate", err, 2e-3)
}

fn picard_decoupled() -> Check {
    let name = "decoupled Picard iteration stops after two sweeps";
    let g = Grid::square(16).unwrap();
    let basis = SpectralBasis::new(g);
    let p = ModelParams {
        chi: 0.0,
        ..ModelParams::default()
    };
    let w1 = build_sampler(NoiseSpec::new(2.5, 3, 4), &basis).unwrap();
    let w2 = build_sampler(NoiseSpec::new(2.5, 3, 4).with_stream(1), &basis).unwrap();
    let problem = PathProblem::new(
        &basis,
        p,
        w1,
        w2,
        Schedule::new(1e-4, 20).unwrap(),
        NoiseInterpretation::Ito,
    )
    .unwrap();
    let u0 = Field::from_fn(g, |x, y| 1.0 + 0.5 * (PI * x).cos() * (PI * y).cos());
    let v0 = Field::constant(g, 1.0);
    match problem.picard_iterate(&u0, &v0, 1e-12, 5) {
        Ok((_, r)) => Check {
            name,
            passed: r.converged && r.iterations == 2,
            detail: format!("{} iterations, distances {:?}", r.iterations, r.distances),
        },
        Err(e) => failed(name, e),
    }
}

fn snapshot_round_trip() -> Check {
    let f = random_field(Grid::new(9, 5).unwrap(), 3);
    let back = decode_snapshot(&encode_snapshot(&f));
    Check {
        name: "snapshot encoding is bitwise invertible",
        passed: back.as_ref().is_ok_and(|b| {
            b.values().iter().zip(f.values()).all(|(x, y)| x.to_bits() == y.to_bits())
        }),
        detail: String::new(),
    }
}

fn determinism() -> Check {
    let name = "ensemble is independent of the worker count";
    let cfg = EnsembleConfig {
        paths: 4,
        t_final: 0.002,
        nx: 16,
        ny: 16,
        snapshots: 5,
        noise_u: NoiseSpec::new(2.5, 3, 0),
        noise_v: NoiseSpec::new(2.5, 3, 0),
        base_seed: 5,
        ..EnsembleConfig::default()
    };
    match (run_ensemble_with_threads(&cfg, Some(1)), run_ensemble_with_threads(&cfg, Some(2))) {
        (Ok(a), Ok(b)) => Check {
            name,
            passed: a == b,
            detail: format!("Q1 {:e} vs {:e}", a.q1.mean, b.q1.mean),
        },
        (Err(e), _) | (_, Err(e)) => failed(name, e),
    }
}

/// Runs every check.
pub fn run_suite() -> Vec<Check> {
    let mut checks = transforms();
    checks.extend(stencils());
    checks.extend(mass_and_positivity());
    checks.push(v_decay());
    checks.push(picard_decoupled());
    checks.push(snapshot_round_trip());
    checks.push(determinism());
    checks
}
