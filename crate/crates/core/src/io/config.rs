//! Flat `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Unknown and repeated keys
//! are errors, and every problem in a file is reported at once.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::NoiseInterpretation;
use crate::initial::InitialCondition;
use crate::model::ModelParams;
use crate::montecarlo::{DtPolicy, EnsembleConfig, Method};
use crate::noise::NoiseSpec;
use crate::spectral::TransformBackend;

/// Every accepted key, whether it is required, and its default.
pub const CONFIG_KEYS: &[(&str, bool, &str)] = &[
    ("nx", true, ""),
    ("ny", false, "nx"),
    ("r_u", true, ""),
    ("r_v", true, ""),
    ("chi", true, ""),
    ("alpha", true, ""),
    ("beta", true, ""),
    ("sigma_u", true, ""),
    ("sigma_v", true, ""),
    ("gamma", true, ""),
    ("delta_u", false, "2.5"),
    ("delta_v", false, "2.5"),
    ("kmax_u", false, "4"),
    ("kmax_v", false, "4"),
    ("seed", false, "0"),
    ("t_final", true, ""),
    ("dt", false, "cfl"),
    ("dt_max", false, "1e-3"),
    ("paths", false, "1"),
    ("method", false, "direct"),
    ("interpretation", false, "ito"),
    ("u0", true, ""),
    ("v0", true, ""),
    ("snapshots", false, "100"),
    ("picard_tol", false, "1e-6 (1 + |u0|_{H^-1})"),
    ("picard_max_iter", false, "20"),
    ("backend", false, "fast"),
    ("out", false, "none"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub ensemble: EnsembleConfig,
    pub out: Option<PathBuf>,
}

struct Reader {
    entries: BTreeMap<String, String>,
    errors: Vec<String>,
}

impl Reader {
    fn raw(&mut self, key: &str) -> Option<String> {
        let value = self.entries.get(key).cloned();
        if value.is_none() && CONFIG_KEYS.iter().any(|(k, req, _)| *k == key && *req) {
            self.errors.push(format!("missing required key '{key}'"));
        }
        value
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T) -> T {
        match self.raw(key) {
            None => default,
            Some(v) => v.parse().unwrap_or_else(|_| {
                self.errors.push(format!("{key}: cannot parse '{v}'"));
                default
            }),
        }
    }

    fn with<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> T {
        match self.raw(key) {
            None => default,
            Some(v) => parse(&v).unwrap_or_else(|e| {
                self.errors.push(format!("{key}: {e}"));
                default
            }),
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries = BTreeMap::new();
    let mut errors = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected 'key = value', got '{line}'", lineno + 1));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !CONFIG_KEYS.iter().any(|(k, _, _)| *k == key) {
            errors.push(format!("line {}: unknown key '{key}'", lineno + 1));
        } else if entries.insert(key.to_string(), value.to_string()).is_some() {
            errors.push(format!("line {}: key '{key}' given twice", lineno + 1));
        }
    }
    let mut r = Reader { entries, errors };

    let nx = r.get("nx", 32usize);
    let ny = r.get("ny", nx);
    let params = ModelParams {
        r_u: r.get("r_u", 1.0),
        r_v: r.get("r_v", 1.0),
        chi: r.get("chi", 0.0),
        alpha: r.get("alpha", 1.0),
        beta: r.get("beta", 1.0),
        sigma_u: r.get("sigma_u", 0.0),
        sigma_v: r.get("sigma_v", 0.0),
        gamma: r.get("gamma", 2.0),
    };
    let seed = r.get("seed", 0u64);
    let noise_u = NoiseSpec::new(r.get("delta_u", 2.5), r.get("kmax_u", 4usize), seed);
    let noise_v = NoiseSpec::new(r.get("delta_v", 2.5), r.get("kmax_v", 4usize), seed);
    let t_final = r.get("t_final", 1.0);
    let dt_max = r.get("dt_max", 1e-3);
    let dt = r.with("dt", DtPolicy::Cfl { dt_max }, |s| {
        if s == "cfl" {
            Ok(DtPolicy::Cfl { dt_max })
        } else {
            s.parse()
                .map(DtPolicy::Fixed)
                .map_err(|_| format!("expected a number or 'cfl', got '{s}'"))
        }
    });
    let method = r.with("method", Method::Direct, |s| s.parse());
    let interpretation = r.with("interpretation", NoiseInterpretation::Ito, |s| match s {
        "ito" => Ok(NoiseInterpretation::Ito),
        "stratonovich" => Ok(NoiseInterpretation::Stratonovich),
        _ => Err(format!("expected ito or stratonovich, got '{s}'")),
    });
    let u0 = r.with("u0", InitialCondition::Constant(0.0), InitialCondition::parse);
    let v0 = r.with("v0", InitialCondition::Constant(0.0), InitialCondition::parse);
    let picard_tol = r.with("picard_tol", None, |s| {
        s.parse().map(Some).map_err(|_| format!("cannot parse '{s}'"))
    });
    let backend = r.with("backend", TransformBackend::Fast, |s| match s {
        "fast" => Ok(TransformBackend::Fast),
        "direct" => Ok(TransformBackend::Direct),
        _ => Err(format!("expected fast or direct, got '{s}'")),
    });
    let ensemble = EnsembleConfig {
        paths: r.get("paths", 1usize),
        t_final,
        dt,
        snapshots: r.get("snapshots", 100usize),
        nx,
        ny,
        params,
        noise_u,
        noise_v,
        base_seed: seed,
        method,
        interpretation,
        u0,
        v0,
        picard_tol,
        picard_max_iter: r.get("picard_max_iter", 20usize),
        backend,
    };
    let out = r.raw("out").map(PathBuf::from);

    let mut errors = r.errors;
    // Value checks only make sense once every key parsed.
    if errors.is_empty() {
        errors.extend(ensemble.violations());
    }
    if errors.is_empty() {
        Ok(RunConfig { ensemble, out })
    } else {
        Err(Error::Config(errors))
    }
}

impl RunConfig {
    /// The configuration as `key = value` lines that parse back to `self`.
    pub fn to_text(&self) -> String {
        let e = &self.ensemble;
        let p = &e.params;
        let mut lines = vec![
            format!("nx = {}", e.nx),
            format!("ny = {}", e.ny),
            format!("r_u = {:?}", p.r_u),
            format!("r_v = {:?}", p.r_v),
            format!("chi = {:?}", p.chi),
            format!("alpha = {:?}", p.alpha),
            format!("beta = {:?}", p.beta),
            format!("sigma_u = {:?}", p.sigma_u),
            format!("sigma_v = {:?}", p.sigma_v),
            format!("gamma = {:?}", p.gamma),
            format!("delta_u = {:?}", e.noise_u.delta),
            format!("delta_v = {:?}", e.noise_v.delta),
            format!("kmax_u = {}", e.noise_u.kmax),
            format!("kmax_v = {}", e.noise_v.kmax),
            format!("seed = {}", e.base_seed),
            format!("t_final = {:?}", e.t_final),
        ];
        match e.dt {
            DtPolicy::Fixed(dt) => lines.push(format!("dt = {dt:?}")),
            DtPolicy::Cfl { dt_max } => {
                lines.push("dt = cfl".into());
                lines.push(format!("dt_max = {dt_max:?}"));
            }
        }
        lines.push(format!("paths = {}", e.paths));
        lines.push(format!(
            "method = {}",
            match e.method {
                Method::Direct => "direct",
                Method::Picard => "picard",
            }
        ));
        lines.push(format!(
            "interpretation = {}",
            match e.interpretation {
                NoiseInterpretation::Ito => "ito",
                NoiseInterpretation::Stratonovich => "stratonovich",
            }
        ));
        lines.push(format!("u0 = {}", e.u0));
        lines.push(format!("v0 = {}", e.v0));
        lines.push(format!("snapshots = {}", e.snapshots));
        if let Some(tol) = e.picard_tol {
            lines.push(format!("picard_tol = {tol:?}"));
        }
        lines.push(format!("picard_max_iter = {}", e.picard_max_iter));
        lines.push(format!(
            "backend = {}",
            match e.backend {
                TransformBackend::Fast => "fast",
                TransformBackend::Direct => "direct",
            }
        ));
        if let Some(out) = &self.out {
            lines.push(format!("out = {}", out.display()));
        }
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# smallest accepted file
nx = 32
r_u = 0.1
r_v = 1
chi = 0.2
alpha = 1
beta = 1
sigma_u = 0.5
sigma_v = 0.5
gamma = 2
t_final = 0.05
u0 = cosine 1 1 0.5 1.0
v0 = constant 1   # trailing comment
";

    fn errors(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        let e = &cfg.ensemble;
        assert_eq!((e.nx, e.ny), (32, 32));
        assert_eq!(e.snapshots, 100);
        assert_eq!(e.picard_max_iter, 20);
        assert_eq!(e.picard_tol, None);
        assert_eq!(e.dt, DtPolicy::Cfl { dt_max: 1e-3 });
        assert_eq!(e.params, ModelParams::default());
        assert_eq!(e.v0, InitialCondition::Constant(1.0));
        assert_eq!(cfg.out, None);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.ensemble.dt = DtPolicy::Fixed(1e-4);
        cfg.ensemble.picard_tol = Some(1e-8);
        cfg.ensemble.method = Method::Picard;
        cfg.out = Some(PathBuf::from("runs/a"));
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn gamma_below_one_is_rejected() {
        let e = errors(&MINIMAL.replace("gamma = 2", "gamma = 0.5"));
        assert!(e.iter().any(|m| m.contains("gamma must exceed 1")), "{e:?}");
    }

    #[test]
    fn negative_initial_data_is_rejected() {
        let e = errors(&MINIMAL.replace("v0 = constant 1", "u0b = 1\nv0 = constant -1"));
        assert!(e.iter().any(|m| m.contains("unknown key 'u0b'")), "{e:?}");
        let e = errors(&MINIMAL.replace("v0 = constant 1", "v0 = constant -1"));
        assert!(e.iter().any(|m| m.contains("nonnegative")), "{e:?}");
    }

    #[test]
    fn all_errors_are_reported() {
        let text = MINIMAL
            .replace("nx = 32\n", "")
            .replace("chi = 0.2", "chi = lots")
            .replace("t_final = 0.05", "t_final = 0.05\nt_final = 0.1\nbogus = 1\njunk line");
        let e = errors(&text);
        assert!(e.iter().any(|m| m.contains("missing required key 'nx'")));
        assert!(e.iter().any(|m| m.contains("chi")));
        assert!(e.iter().any(|m| m.contains("given twice")));
        assert!(e.iter().any(|m| m.contains("unknown key 'bogus'")));
        assert!(e.iter().any(|m| m.contains("expected 'key = value'")));
    }

    #[test]
    fn sign_violations() {
        let e = errors(&MINIMAL.replace("r_u = 0.1", "r_u = -0.1").replace("sigma_v = 0.5", "sigma_v = -1"));
        assert!(e.len() >= 2, "{e:?}");
    }
}
