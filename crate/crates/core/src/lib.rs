//! Numerics for a stochastic chemotaxis system with porous-medium cell
//! diffusion on the unit square with no-flux boundaries:
//!
//! ```text
//! du = (r_u Δ u^[γ] − χ div(u ∇v)) dt + σ_u u dW₁
//! dv = (r_v Δ v + β u − α v) dt + σ_v v dW₂
//! ```
//!
//! The building blocks are a cell-centered grid with a cosine spectral
//! basis, Q-Wiener noise, split time steppers for each equation, the
//! decoupled solution operator with its Picard iteration, Sobolev-type
//! norms, and a Monte Carlo harness for the moment functionals.

pub mod error;
pub mod fixed_point;
pub mod grid;
pub mod initial;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod noise;
pub mod norms;
pub mod schedule;
pub mod spectral;
pub mod stencil;
pub mod u_step;
pub mod v_step;
pub mod verify;

pub use error::{Error, Result};
pub use fixed_point::{FixedPointReport, NoiseInterpretation, PathProblem, PathTrajectory};
pub use grid::{Field, Grid};
pub use initial::{Barenblatt, InitialCondition};
pub use model::ModelParams;
pub use montecarlo::{run_ensemble, DtPolicy, EnsembleConfig, Method, MomentEstimates};
pub use noise::{build_sampler, NoiseSpec, WienerSampler};
pub use schedule::Schedule;
pub use spectral::{SpectralBasis, TransformBackend};
