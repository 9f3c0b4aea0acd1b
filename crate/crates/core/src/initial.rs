//! Initial-condition selectors and the Barenblatt profile of the porous
//! medium equation.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::io::snapshot::read_snapshot;

/// Self-similar source solution of `u_t = r Δ(u^m)` in two dimensions,
/// centered in the unit square:
///
/// ```text
/// U(x, τ) = τ^(-a) (C − k |x − c|² τ^(-a))_+^(1/(m−1)),   τ = r (t0 + t)
/// a = 1/m,   k = (m − 1) / (4 m²)
/// ```
///
/// `C` is fixed by the conserved mass `M = (π/k) (m−1)/m C^(m/(m−1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barenblatt {
    pub mass: f64,
    pub t0: f64,
    pub m: f64,
    pub r: f64,
    pub center: (f64, f64),
}

impl Barenblatt {
    pub fn new(mass: f64, t0: f64, m: f64, r: f64) -> Result<Self> {
        if !(mass > 0.0 && t0 > 0.0 && m > 1.0 && r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "barenblatt needs mass > 0, t0 > 0, exponent > 1 and r > 0 \
                 (got mass {mass}, t0 {t0}, exponent {m}, r {r})"
            )));
        }
        Ok(Barenblatt {
            mass,
            t0,
            m,
            r,
            center: (0.5, 0.5),
        })
    }

    fn alpha(&self) -> f64 {
        // d / (d (m − 1) + 2) with d = 2
        1.0 / self.m
    }

    fn k(&self) -> f64 {
        // alpha (m − 1) / (2 m d)
        self.alpha() * (self.m - 1.0) / (4.0 * self.m)
    }

    fn c_const(&self) -> f64 {
        let m = self.m;
        (self.mass * self.k() * m / (PI * (m - 1.0))).powf((m - 1.0) / m)
    }

    fn tau(&self, t: f64) -> f64 {
        self.r * (self.t0 + t)
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        let tau = self.tau(t);
        let a = self.alpha();
        let r2 = (x - self.center.0).powi(2) + (y - self.center.1).powi(2);
        let inner = self.c_const() - self.k() * r2 * tau.powf(-a);
        if inner <= 0.0 {
            0.0
        } else {
            tau.powf(-a) * inner.powf(1.0 / (self.m - 1.0))
        }
    }

    /// Radius of the support at time `t`.
    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c_const() / self.k() * self.tau(t).powf(self.alpha())).sqrt()
    }

    pub fn field(&self, grid: Grid, t: f64) -> Field {
        Field::from_fn(grid, |x, y| self.value(x, y, t))
    }
}

/// How `u0` or `v0` is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    Constant(f64),
    /// `offset + amplitude cos(π m1 x) cos(π m2 y)`.
    Cosine {
        m1: usize,
        m2: usize,
        amplitude: f64,
        offset: f64,
    },
    /// Barenblatt profile for the configured `γ` and `r_u`.
    Barenblatt { mass: f64, t0: f64 },
    File(PathBuf),
}

impl InitialCondition {
    /// Parses `constant C`, `cosine M1 M2 AMPLITUDE [OFFSET]`,
    /// `barenblatt MASS T0` or `file PATH`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut parts = text.split_whitespace();
        let kind = parts.next().ok_or_else(|| "empty initial condition".to_string())?;
        let rest: Vec<&str> = parts.collect();
        let num = |s: &str| -> Result<f64, String> {
            s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
        };
        let int = |s: &str| -> Result<usize, String> {
            s.parse::<usize>().map_err(|_| format!("'{s}' is not a mode index"))
        };
        match (kind, rest.as_slice()) {
            ("constant", [c]) => Ok(InitialCondition::Constant(num(c)?)),
            ("cosine", [m1, m2, a]) => Ok(InitialCondition::Cosine {
                m1: int(m1)?,
                m2: int(m2)?,
                amplitude: num(a)?,
                offset: 0.0,
            }),
            ("cosine", [m1, m2, a, o]) => Ok(InitialCondition::Cosine {
                m1: int(m1)?,
                m2: int(m2)?,
                amplitude: num(a)?,
                offset: num(o)?,
            }),
            ("barenblatt", [mass, t0]) => Ok(InitialCondition::Barenblatt {
                mass: num(mass)?,
                t0: num(t0)?,
            }),
            ("file", [path]) => Ok(InitialCondition::File(PathBuf::from(path))),
            _ => Err(format!(
                "cannot parse initial condition '{text}' (expected constant C | \
                 cosine M1 M2 AMPLITUDE [OFFSET] | barenblatt MASS T0 | file PATH)"
            )),
        }
    }

    /// Nonnegativity violations that can be decided without building the
    /// field.
    pub fn static_violation(&self) -> Option<String> {
        match *self {
            InitialCondition::Constant(c) if c < 0.0 => {
                Some(format!("constant {c} is negative; initial data must be nonnegative"))
            }
            InitialCondition::Cosine {
                m1,
                m2,
                amplitude,
                offset,
            } => {
                let min = if m1 == 0 && m2 == 0 {
                    offset + amplitude
                } else {
                    offset - amplitude.abs()
                };
                (min < 0.0).then(|| {
                    format!(
                        "cosine profile reaches {min}; initial data must be nonnegative \
                         (offset must be at least |amplitude|)"
                    )
                })
            }
            InitialCondition::Barenblatt { mass, t0 } if !(mass > 0.0 && t0 > 0.0) => {
                Some("barenblatt needs positive mass and t0".into())
            }
            _ => None,
        }
    }

    /// Builds the field; `gamma` and `r_u` only matter for the Barenblatt
    /// profile.
    pub fn build(&self, grid: Grid, gamma: f64, r_u: f64) -> Result<Field> {
        let field = match self {
            InitialCondition::Constant(c) => Field::constant(grid, *c),
            InitialCondition::Cosine {
                m1,
                m2,
                amplitude,
                offset,
            } => Field::from_fn(grid, |x, y| {
                offset + amplitude * (PI * *m1 as f64 * x).cos() * (PI * *m2 as f64 * y).cos()
            }),
            InitialCondition::Barenblatt { mass, t0 } => {
                Barenblatt::new(*mass, *t0, gamma, r_u)?.field(grid, 0.0)
            }
            InitialCondition::File(path) => {
                let f = read_snapshot(path)?;
                if f.grid() != grid {
                    return Err(Error::Snapshot {
                        path: path.clone(),
                        reason: format!(
                            "grid {}x{} does not match the configured {}x{}",
                            f.grid().nx(),
                            f.grid().ny(),
                            grid.nx(),
                            grid.ny()
                        ),
                    });
                }
                f
            }
        };
        if field.min() < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "initial data must be nonnegative (minimum {})",
                field.min()
            )));
        }
        Ok(field)
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Constant(c) => write!(f, "constant {c}"),
            InitialCondition::Cosine {
                m1,
                m2,
                amplitude,
                offset,
            } => write!(f, "cosine {m1} {m2} {amplitude} {offset}"),
            InitialCondition::Barenblatt { mass, t0 } => write!(f, "barenblatt {mass} {t0}"),
            InitialCondition::File(p) => write!(f, "file {}", p.display()),
        }
    }
}
