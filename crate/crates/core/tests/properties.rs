use std::f64::consts::PI;

use kspm_core::fixed_point::{subsample, xnorm_distance, NoiseInterpretation, PathProblem};
use kspm_core::io::snapshot::{decode_snapshot, encode_snapshot};
use kspm_core::noise::{build_sampler, NoiseSpec};
use kspm_core::norms::{lp_norm, runst_ratio, sobolev2_norm};
use kspm_core::stencil::laplacian;
use kspm_core::u_step::{chemo_flux_div, signed_power, solve_u_path, step_u};
use kspm_core::v_step::{solve_v_path, step_v};
use kspm_core::{Field, Grid, ModelParams, Schedule, SpectralBasis, TransformBackend};
use proptest::prelude::*;

fn field_strategy(grid: Grid) -> impl Strategy<Value = Field> {
    prop::collection::vec(-1.0f64..1.0, grid.len()).prop_map(move |v| Field::new(grid, v).unwrap())
}

fn positive_field(grid: Grid) -> impl Strategy<Value = Field> {
    prop::collection::vec(0.2f64..1.5, grid.len()).prop_map(move |v| Field::new(grid, v).unwrap())
}

fn g12() -> Grid {
    Grid::new(12, 10).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn xnorm_triangle_inequality(
        a in prop::collection::vec(field_strategy(Grid::square(8).unwrap()), 3),
        b in prop::collection::vec(field_strategy(Grid::square(8).unwrap()), 3),
        c in prop::collection::vec(field_strategy(Grid::square(8).unwrap()), 3),
    ) {
        let basis = SpectralBasis::new(Grid::square(8).unwrap());
        let ab = xnorm_distance(&a, &b, &basis).unwrap();
        let bc = xnorm_distance(&b, &c, &basis).unwrap();
        let ac = xnorm_distance(&a, &c, &basis).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_and_backend_agreement(f in field_strategy(g12())) {
        let fast = SpectralBasis::with_backend(g12(), TransformBackend::Fast);
        let direct = SpectralBasis::with_backend(g12(), TransformBackend::Direct);
        let a = fast.to_spectral(&f).unwrap();
        let b = direct.to_spectral(&f).unwrap();
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let energy: f64 = a.coeffs().iter().map(|c| c * c).sum();
        let l2 = lp_norm(&f, 2.0).unwrap();
        prop_assert!((energy - l2 * l2).abs() < 1e-12 * (1.0 + energy));
    }

    #[test]
    fn laplacian_is_symmetric(f in field_strategy(g12()), g in field_strategy(g12())) {
        let a = laplacian(&f).dot(&g);
        let b = f.dot(&laplacian(&g));
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        prop_assert!(laplacian(&f).integral().abs() < 1e-9);
    }

    #[test]
    fn signed_power_is_odd(x in -50.0f64..50.0, gamma in 1.01f64..5.0) {
        prop_assert_eq!(signed_power(-x, gamma), -signed_power(x, gamma));
        prop_assert!(signed_power(x, gamma) * x >= 0.0);
    }

    #[test]
    fn transport_conserves_mass(eta in positive_field(g12()), v in field_strategy(g12())) {
        let div = chemo_flux_div(&eta, &v).unwrap();
        prop_assert!(div.integral().abs() < 1e-10 * (1.0 + div.max_abs()));
    }

    #[test]
    fn v_step_is_linear(
        v1 in field_strategy(g12()), v2 in field_strategy(g12()),
        e1 in field_strategy(g12()), e2 in field_strategy(g12()),
        a in -2.0f64..2.0, b in -2.0f64..2.0,
    ) {
        let basis = SpectralBasis::new(g12());
        let p = ModelParams::default();
        let dw = Field::from_fn(g12(), |x, y| 0.01 * (x - y));
        let comb = |x: &Field, y: &Field| x.zip_map(y, |s, t| a * s + b * t).unwrap();
        let lhs = step_v(&comb(&v1, &v2), &comb(&e1, &e2), &p, &dw, 1e-3, &basis).unwrap();
        let r1 = step_v(&v1, &e1, &p, &dw, 1e-3, &basis).unwrap();
        let r2 = step_v(&v2, &e2, &p, &dw, 1e-3, &basis).unwrap();
        let rhs = comb(&r1, &r2);
        prop_assert!(lhs.zip_map(&rhs, |x, y| x - y).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trip(nx in 4usize..20, ny in 4usize..20, seed in any::<u64>()) {
        let g = Grid::new(nx, ny).unwrap();
        let f = Field::from_fn(g, |x, y| ((seed % 1000) as f64 + x * 1e-3).sin() * y.exp());
        let back = decode_snapshot(&encode_snapshot(&f)).unwrap();
        prop_assert_eq!(back.grid(), g);
        for (a, b) in back.values().iter().zip(f.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn runst_ratio_is_scale_invariant(w in positive_field(Grid::square(16).unwrap()), k in -3i32..3) {
        let basis = SpectralBasis::new(Grid::square(16).unwrap());
        let lam = 2f64.powi(k) * 1.37;
        let a = runst_ratio(&w, 2.0, 0.4, &basis).unwrap();
        let b = runst_ratio(&w.map(|x| lam * x), 2.0, 0.4, &basis).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn sobolev_norm_grows_with_s(f in field_strategy(g12()), s in -2.0f64..2.0, ds in 0.01f64..1.0) {
        let basis = SpectralBasis::new(g12());
        prop_assert!(sobolev2_norm(&f, s, &basis).unwrap() <= sobolev2_norm(&f, s + ds, &basis).unwrap() * (1.0 + 1e-14));
    }
}

#[test]
fn xnorm_of_constant_shift() {
    let g = Grid::square(8).unwrap();
    let basis = SpectralBasis::new(g);
    let a: Vec<Field> = (0..3).map(|k| Field::from_fn(g, |x, y| x * y + k as f64)).collect();
    let mut b = a.clone();
    b[1] = b[1].map(|x| x - 0.25);
    assert!((xnorm_distance(&a, &b, &basis).unwrap() - 0.25).abs() < 1e-14);
}

fn default_problem(basis: &SpectralBasis, schedule: Schedule, params: ModelParams) -> PathProblem<'_> {
    let w1 = build_sampler(NoiseSpec::new(2.5, 4, 21), basis).unwrap();
    let w2 = build_sampler(NoiseSpec::new(2.5, 4, 21).with_stream(1), basis).unwrap();
    PathProblem::new(basis, params, w1, w2, schedule, NoiseInterpretation::Ito).unwrap()
}

fn initial(g: Grid) -> (Field, Field) {
    (
        Field::from_fn(g, |x, y| 1.0 + 0.5 * (PI * x).cos() * (PI * y).cos()),
        Field::from_fn(g, |x, _| 1.0 + 0.5 * (PI * x).cos()),
    )
}

#[test]
fn apply_t_matches_hand_assembled_pipeline() {
    let g = Grid::square(16).unwrap();
    let basis = SpectralBasis::new(g);
    let p = ModelParams::default();
    let schedule = Schedule::new(1e-4, 40).unwrap();
    let problem = default_problem(&basis, schedule, p);
    let (u0, v0) = initial(g);
    let eta: Vec<Field> = (0..=40).map(|n| u0.map(|x| x * (1.0 + 1e-3 * n as f64))).collect();
    let traj = problem.apply_t(&eta, &u0, &v0).unwrap();

    let mut w1 = build_sampler(NoiseSpec::new(2.5, 4, 21), &basis).unwrap();
    let mut w2 = build_sampler(NoiseSpec::new(2.5, 4, 21).with_stream(1), &basis).unwrap();
    let v = solve_v_path(&v0, &eta, &mut w2, &p, 1e-4, 40, &basis, None).unwrap();
    let (u, _) = solve_u_path(&u0, &v, &eta, &mut w1, &p, &Field::zeros(g), 1e-4, 40).unwrap();
    let bits = |fs: &[Field]| -> Vec<u64> { fs.iter().flat_map(|f| f.values().iter().map(|x| x.to_bits())).collect() };
    assert_eq!(bits(&traj.u), bits(&u));
    assert_eq!(bits(&traj.v), bits(&v));
}

#[test]
fn picard_fixed_point_residual_and_noise_replay() {
    let g = Grid::square(16).unwrap();
    let basis = SpectralBasis::new(g);
    let schedule = Schedule::new(1e-4, 100).unwrap();
    let problem = default_problem(&basis, schedule, ModelParams::default());
    let (u0, v0) = initial(g);
    let tol = 1e-8;
    let (traj, report) = problem.picard_iterate(&u0, &v0, tol, 20).unwrap();
    assert!(report.converged, "{report:?}");
    assert!(report.monotone, "{report:?}");
    let again = problem.apply_t(&traj.u, &u0, &v0).unwrap();
    assert!(xnorm_distance(&traj.u, &again.u, &basis).unwrap() < tol);

    // the recorded specs regenerate the same path
    let mut w1 = build_sampler(traj.noise.w1, &basis).unwrap();
    let mut w2 = build_sampler(traj.noise.w2, &basis).unwrap();
    let (_, report2) = problem.picard_iterate(&u0, &v0, tol, 20).unwrap();
    assert_eq!(report, report2);
    let eta = &traj.u;
    let p = ModelParams::default();
    let v = solve_v_path(&v0, eta, &mut w2, &p, 1e-4, 100, &basis, None).unwrap();
    let (u, _) = solve_u_path(&u0, &v, eta, &mut w1, &p, &Field::zeros(g), 1e-4, 100).unwrap();
    assert_eq!(u, again.u);
}

#[test]
fn direct_solve_converges_at_first_order_in_dt() {
    let g = Grid::square(16).unwrap();
    let basis = SpectralBasis::new(g);
    let p = ModelParams {
        sigma_u: 0.0,
        sigma_v: 0.0,
        chi: 1.0,
        ..ModelParams::default()
    };
    let (u0, v0) = initial(g);
    let run = |dt: f64, n: usize| {
        let s = Schedule::new(dt, n).unwrap().with_snapshots(10);
        let traj = default_problem(&basis, s, p).direct_solve(&u0, &v0).unwrap();
        traj.u
    };
    let a = run(4e-4, 100);
    let b = run(2e-4, 200);
    let c = run(1e-4, 400);
    let d1 = xnorm_distance(&a, &b, &basis).unwrap();
    let d2 = xnorm_distance(&b, &c, &basis).unwrap();
    let ratio = d1 / d2;
    assert!((1.6..2.5).contains(&ratio), "{d1} {d2} {ratio}");
}

#[test]
fn mass_is_conserved_without_cell_noise() {
    let g = Grid::square(16).unwrap();
    let zero = Field::zeros(g);
    for gamma in [1.5, 2.0, 3.5] {
        for chi in [0.0, 0.5, 3.0] {
            let p = ModelParams {
                gamma,
                chi,
                sigma_u: 0.0,
                ..ModelParams::default()
            };
            let (mut u, v) = initial(g);
            let m0 = u.integral();
            for _ in 0..200 {
                u = step_u(&u, &v, &u, &p, &zero, &zero, 1e-4).unwrap().0;
            }
            assert!(((u.integral() - m0) / m0).abs() < 1e-12, "gamma {gamma} chi {chi}");
        }
    }
}

#[test]
fn subsample_keeps_schedule_instants() {
    let g = Grid::square(8).unwrap();
    let basis = SpectralBasis::new(g);
    let schedule = Schedule::new(1e-4, 10).unwrap().with_snapshots(3);
    let problem = default_problem(&basis, schedule, ModelParams::default());
    let (u0, v0) = initial(g);
    let full = problem.apply_t(&vec![u0.clone(); 11], &u0, &v0).unwrap();
    let sub = subsample(&full, &schedule);
    assert_eq!(sub.times.len(), schedule.snapshot_steps().len());
    assert!(sub.times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(sub.u.last(), full.u.last());
}
