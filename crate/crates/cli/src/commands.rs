use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kspm_core::fixed_point::{subsample, xnorm_distance};
use kspm_core::io::snapshot::{snapshot_byte_len, write_snapshot};
use kspm_core::io::{parse_config, Manifest, RunConfig, SnapshotEntry};
use kspm_core::montecarlo::path_functionals;
use kspm_core::norms::{lp_norm, NormRequest};
use kspm_core::verify::run_suite;
use kspm_core::{
    run_ensemble, Barenblatt, Error, Field, InitialCondition, Method, NoiseInterpretation, Result,
    SpectralBasis,
};

use crate::{NormArgs, RunArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

const DEFAULT_OUT: &str = "kspm-out";

pub fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn kv(rows: &mut Vec<Vec<String>>, key: &str, value: impl ToString) {
    rows.push(vec![key.to_string(), value.to_string()]);
}

/// Reads the config, applies command-line overrides and creates the
/// output directory.
fn load(args: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        Error::Config(vec![format!("cannot read {}: {e}", args.config.display())])
    })?;
    let mut cfg = parse_config(&text)?;
    let e = &mut cfg.ensemble;
    if let Some(seed) = args.seed {
        e.base_seed = seed;
        e.noise_u.seed = seed;
        e.noise_v.seed = seed;
    }
    if let Some(m) = args.paths {
        e.paths = m;
    }
    if let Some(n) = args.resolution {
        e.nx = n;
        e.ny = n;
    }
    if let Some(m) = args.method {
        e.method = m;
    }
    e.validate()?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&out)?;
    cfg.out = Some(out.clone());
    Ok((cfg, out))
}

fn finish(mut manifest: Manifest, out: &Path, start: Instant) -> Result<u8> {
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(EXIT_OK)
}

pub fn simulate(args: &RunArgs) -> Result<u8> {
    let start = Instant::now();
    let (cfg, out) = load(args)?;
    let e = &cfg.ensemble;
    let setup = e.setup()?;
    let run = e.run_path(&setup, 0)?;
    let traj = &run.trajectory;
    let mut manifest = Manifest::new("simulate", &cfg);
    manifest.dt = setup.schedule.dt();
    manifest.nsteps = setup.schedule.nsteps();

    let bytes = snapshot_byte_len(setup.grid);
    for (k, &t) in traj.times.iter().enumerate() {
        for (name, f) in [("u", &traj.u[k]), ("v", &traj.v[k])] {
            let file = format!("{name}_{k:04}.bin");
            write_snapshot(f, &out.join(&file))?;
            manifest.snapshots.push(SnapshotEntry {
                file,
                field: name.into(),
                time: t,
                bytes,
            });
        }
    }

    let f = path_functionals(traj, &e.params, &setup.basis)?;
    let t_end = *traj.times.last().expect("initial instant");
    let m0 = setup.u0.integral();
    let mut rows = Vec::new();
    kv(&mut rows, "t_final", t_end);
    kv(&mut rows, "dt", setup.schedule.dt());
    kv(&mut rows, "nsteps", setup.schedule.nsteps());
    kv(&mut rows, "mass_initial", m0);
    kv(&mut rows, "mass_final", f.final_mass);
    kv(&mut rows, "relative_mass_drift", ((f.final_mass - m0) / m0).abs());
    kv(&mut rows, "min_u", f.min_u);
    kv(&mut rows, "min_v", f.min_v);
    kv(&mut rows, "max_v", f.max_v);
    kv(&mut rows, "clip_fraction", f.clip.fraction());
    for (name, q) in [
        ("Q1", f.q1),
        ("Q1_alt", f.q1_alt),
        ("Q2", f.q2),
        ("Q3", f.q3),
        ("Q3_alt", f.q3_alt),
        ("Q4", f.q4),
        ("v0_L4", f.v0_l4),
    ] {
        kv(&mut rows, name, q);
    }
    // The closed form only solves the problem without transport and noise.
    if let InitialCondition::Barenblatt { mass, t0 } = e.u0 {
        let p = &e.params;
        if p.chi == 0.0 && p.sigma_u == 0.0 && e.interpretation == NoiseInterpretation::Ito {
            let exact = Barenblatt::new(mass, t0, p.gamma, p.r_u)?.field(setup.grid, t_end);
            let diff = traj.u.last().unwrap().zip_map(&exact, |a, b| a - b)?;
            kv(&mut rows, "barenblatt_l1_error", lp_norm(&diff, 1.0)?);
        }
    }
    if let Some(report) = &run.report {
        kv(&mut rows, "picard_iterations", report.iterations);
        kv(&mut rows, "picard_converged", report.converged);
        write_iterations(&out.join("iterations.csv"), &report.distances)?;
        manifest.outputs.push("iterations.csv".into());
    }
    write_csv(&out.join("summary.csv"), &["quantity", "value"], &rows)?;
    manifest.outputs.push("summary.csv".into());
    finish(manifest, &out, start)
}

fn write_iterations(path: &Path, distances: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = distances
        .iter()
        .enumerate()
        .map(|(n, d)| vec![(n + 1).to_string(), d.to_string()])
        .collect();
    write_csv(path, &["iteration", "distance"], &rows)
}

pub fn ensemble(args: &RunArgs) -> Result<u8> {
    let start = Instant::now();
    let (cfg, out) = load(args)?;
    let e = &cfg.ensemble;
    let setup = e.setup()?;
    let est = run_ensemble(e)?;
    let mut manifest = Manifest::new("ensemble", &cfg);
    manifest.dt = setup.schedule.dt();
    manifest.nsteps = setup.schedule.nsteps();
    manifest.failures = est.failures;

    let rows: Vec<Vec<String>> = est
        .named()
        .iter()
        .map(|(name, q)| vec![name.to_string(), q.mean.to_string(), q.se.to_string()])
        .collect();
    write_csv(&out.join("moments.csv"), &["quantity", "mean", "se"], &rows)?;

    let rows: Vec<Vec<String>> = est
        .records
        .iter()
        .map(|(i, r)| {
            [r.q1, r.q1_alt, r.q2, r.q3, r.q3_alt, r.q4, r.v0_l4, r.final_u_l2, r.min_u, r.min_v]
                .iter()
                .map(f64::to_string)
                .fold(vec![i.to_string()], |mut acc, s| {
                    acc.push(s);
                    acc
                })
        })
        .collect();
    write_csv(
        &out.join("paths.csv"),
        &["path", "Q1", "Q1_alt", "Q2", "Q3", "Q3_alt", "Q4", "v0_L4", "u_T_L2", "min_u", "min_v"],
        &rows,
    )?;

    let mut rows = Vec::new();
    kv(&mut rows, "paths", e.paths);
    kv(&mut rows, "paths_used", est.paths_used);
    kv(&mut rows, "failures", est.failures);
    kv(&mut rows, "dt", setup.schedule.dt());
    kv(&mut rows, "nsteps", setup.schedule.nsteps());
    kv(&mut rows, "min_u", est.min_u);
    kv(&mut rows, "min_v", est.min_v);
    kv(&mut rows, "max_v", est.max_v);
    kv(&mut rows, "clip_fraction", est.clip_fraction);
    write_csv(&out.join("summary.csv"), &["quantity", "value"], &rows)?;
    manifest.outputs = vec!["moments.csv".into(), "paths.csv".into(), "summary.csv".into()];
    finish(manifest, &out, start)
}

pub fn fixed_point(args: &RunArgs) -> Result<u8> {
    let start = Instant::now();
    let (mut cfg, out) = load(args)?;
    cfg.ensemble.method = Method::Picard;
    let e = &cfg.ensemble;
    let setup = e.setup()?;
    let problem = e.problem(&setup, 0)?;
    let tol = e.picard_tolerance(&setup)?;
    let (traj, report) = problem.picard_iterate(&setup.u0, &setup.v0, tol, e.picard_max_iter)?;
    let direct = problem.direct_solve(&setup.u0, &setup.v0)?;
    let gap = xnorm_distance(&subsample(&traj, &setup.schedule).u, &direct.u, &setup.basis)?;

    let mut manifest = Manifest::new("fixed-point", &cfg);
    manifest.dt = setup.schedule.dt();
    manifest.nsteps = setup.schedule.nsteps();
    write_iterations(&out.join("iterations.csv"), &report.distances)?;
    let mut rows = Vec::new();
    kv(&mut rows, "iterations", report.iterations);
    kv(&mut rows, "converged", report.converged);
    kv(&mut rows, "monotone", report.monotone);
    kv(&mut rows, "tolerance", tol);
    kv(&mut rows, "final_distance", report.distances.last().copied().unwrap_or(0.0));
    kv(&mut rows, "direct_gap", gap);
    write_csv(&out.join("summary.csv"), &["quantity", "value"], &rows)?;
    manifest.outputs = vec!["iterations.csv".into(), "summary.csv".into()];
    if !report.converged {
        eprintln!(
            "warning: Picard iteration did not reach {tol:e} in {} iterations",
            report.iterations
        );
    }
    finish(manifest, &out, start)
}

pub fn verify() -> Result<u8> {
    let checks = run_suite();
    let mut all = true;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        all &= c.passed;
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    println!("{passed}/{} checks passed", checks.len());
    Ok(if all { EXIT_OK } else { EXIT_VERIFY })
}

pub fn norms(args: &NormArgs) -> Result<u8> {
    let requests = args
        .norms
        .iter()
        .map(|s| NormRequest::parse(s))
        .collect::<Result<Vec<_>, String>>()
        .map_err(|e| Error::Config(vec![e]))?;
    let expected = match &args.config {
        Some(path) => {
            let cfg = parse_config(&fs::read_to_string(path)?)?;
            Some((cfg.ensemble.nx, cfg.ensemble.ny))
        }
        None => None,
    };
    let mut rows = Vec::new();
    for path in &args.snapshots {
        let f: Field = kspm_core::io::read_snapshot(path)?;
        let g = f.grid();
        if let Some((nx, ny)) = expected {
            if (nx, ny) != (g.nx(), g.ny()) {
                return Err(Error::Snapshot {
                    path: path.clone(),
                    reason: format!("grid {}x{} differs from the configured {nx}x{ny}", g.nx(), g.ny()),
                });
            }
        }
        let basis = SpectralBasis::new(g);
        for r in &requests {
            let value = r.evaluate(&f, &basis)?;
            rows.push(vec![path.display().to_string(), r.to_string(), value.to_string()]);
        }
    }
    println!("file,norm,value");
    for r in &rows {
        println!("{}", r.join(","));
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_csv(&out.join("norms.csv"), &["file", "norm", "value"], &rows)?;
    }
    Ok(EXIT_OK)
}
