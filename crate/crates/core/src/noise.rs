//! Truncated spectral Q-Wiener processes.
//!
//! An increment over `dt` is `dW(x) = sum_k q_k psi_k(x) xi_k sqrt(dt)` with
//! `psi_k` the orthonormal Neumann cosine modes, `xi_k` independent standard
//! normals and Bessel-potential weights `q_k = (1 + lambda_k)^(-delta/2)`.
//! Modes with `m1, m2 <= kmax` are retained.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::spectral::{mode_scale, BasisKind, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Regularity exponent of the covariance.
    pub delta: f64,
    /// Highest retained mode index per axis.
    pub kmax: usize,
    pub seed: u64,
    /// ChaCha stream; distinct processes sharing a seed use distinct streams.
    pub stream: u64,
    pub basis_kind: BasisKind,
}

impl NoiseSpec {
    pub fn new(delta: f64, kmax: usize, seed: u64) -> Self {
        NoiseSpec {
            delta,
            kmax,
            seed,
            stream: 0,
            basis_kind: BasisKind::Neumann,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseWarning {
    /// `delta <= 1`: below the regularity the existence theory asks for.
    DeltaAtMostOne,
    /// `delta <= 2`: in 2D the embedding `H^delta -> H^1` is then not
    /// Hilbert-Schmidt and the `H1` sum diverges as `kmax` grows.
    H1SumDivergent,
}

/// Function space whose norm the Hilbert-Schmidt sums are taken in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceTag {
    L2,
    H1,
    Linf,
    Lp(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsReport {
    /// `partial_sums[K] = sum_{max(m1,m2) <= K} q_k^2 |psi_k|^2`, `K = 0..=kmax`.
    pub partial_sums: Vec<f64>,
    pub converged: bool,
}

impl HsReport {
    pub fn total(&self) -> f64 {
        *self.partial_sums.last().expect("at least the constant mode")
    }
}

#[derive(Debug, Clone)]
pub struct WienerSampler {
    spec: NoiseSpec,
    grid: Grid,
    modes: Vec<(usize, usize)>,
    weights: Vec<f64>,
    // cos_x[m * nx + i] = a_m cos(pi m x_i), likewise for y.
    cos_x: Vec<f64>,
    cos_y: Vec<f64>,
    warnings: Vec<NoiseWarning>,
    rng: ChaCha8Rng,
}

/// Weight `q_k = (1 + lambda_k)^(-delta/2)` of a mode.
pub fn mode_weight(delta: f64, mode: (usize, usize)) -> f64 {
    (1.0 + BasisKind::Neumann.eigenvalue(mode)).powf(-delta / 2.0)
}

pub fn build_sampler(spec: NoiseSpec, basis: &SpectralBasis) -> Result<WienerSampler> {
    WienerSampler::new(spec, basis)
}

impl WienerSampler {
    pub fn new(spec: NoiseSpec, basis: &SpectralBasis) -> Result<Self> {
        if spec.basis_kind != BasisKind::Neumann {
            return Err(Error::InvalidParameter(
                "only the Neumann cosine basis can be sampled".into(),
            ));
        }
        if !spec.delta.is_finite() || spec.delta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise delta must be positive, got {}",
                spec.delta
            )));
        }
        let grid = basis.grid();
        let (mx, my) = basis.mode_counts();
        if spec.kmax >= mx || spec.kmax >= my {
            return Err(Error::InvalidParameter(format!(
                "kmax = {} exceeds the {}x{} modes resolved by the grid",
                spec.kmax, mx, my
            )));
        }
        let mut warnings = Vec::new();
        if spec.delta <= 1.0 {
            warnings.push(NoiseWarning::DeltaAtMostOne);
        }
        if spec.delta <= 2.0 {
            warnings.push(NoiseWarning::H1SumDivergent);
        }

        let modes: Vec<_> = (0..=spec.kmax)
            .flat_map(|m2| (0..=spec.kmax).map(move |m1| (m1, m2)))
            .collect();
        let weights = modes.iter().map(|&k| mode_weight(spec.delta, k)).collect();
        let table = |n: usize, coord: &dyn Fn(usize) -> f64| -> Vec<f64> {
            let mut t = Vec::with_capacity((spec.kmax + 1) * n);
            for m in 0..=spec.kmax {
                for i in 0..n {
                    t.push(mode_scale(m) * (PI * m as f64 * coord(i)).cos());
                }
            }
            t
        };
        let cos_x = table(grid.nx(), &|i| grid.x(i));
        let cos_y = table(grid.ny(), &|j| grid.y(j));

        Ok(WienerSampler {
            spec,
            grid,
            modes,
            weights,
            cos_x,
            cos_y,
            warnings,
            rng: Self::fresh_rng(&spec),
        })
    }

    fn fresh_rng(spec: &NoiseSpec) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(spec.stream);
        rng
    }

    /// Rewinds the generator to the start of its stream.
    pub fn reset(&mut self) {
        self.rng = Self::fresh_rng(&self.spec);
    }

    /// Copy of this sampler positioned at the start of its stream.
    pub fn fresh(&self) -> Self {
        let mut s = self.clone();
        s.reset();
        s
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn modes(&self) -> &[(usize, usize)] {
        &self.modes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn warnings(&self) -> &[NoiseWarning] {
        &self.warnings
    }

    /// Draws one increment over a step of length `dt`.
    pub fn sample_increment(&mut self, dt: f64) -> Result<Field> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let sqrt_dt = dt.sqrt();
        let coeffs: Vec<f64> = self
            .weights
            .iter()
            .map(|q| {
                let xi: f64 = StandardNormal.sample(&mut self.rng);
                q * xi * sqrt_dt
            })
            .collect();
        Ok(self.synthesize(&coeffs))
    }

    /// `sum_k coeffs[k] psi_k` over the retained modes, evaluated separably.
    fn synthesize(&self, coeffs: &[f64]) -> Field {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let kn = self.spec.kmax + 1;
        // rows[m2 * nx + i] = sum_m1 c(m1, m2) a_m1 cos(pi m1 x_i)
        let mut rows = vec![0.0; kn * nx];
        for m2 in 0..kn {
            let row = &mut rows[m2 * nx..(m2 + 1) * nx];
            for m1 in 0..kn {
                let c = coeffs[m2 * kn + m1];
                let cx = &self.cos_x[m1 * nx..(m1 + 1) * nx];
                for (r, t) in row.iter_mut().zip(cx) {
                    *r += c * t;
                }
            }
        }
        let mut out = vec![0.0; nx * ny];
        for j in 0..ny {
            let dst = &mut out[j * nx..(j + 1) * nx];
            for m2 in 0..kn {
                let cy = self.cos_y[m2 * ny + j];
                for (d, r) in dst.iter_mut().zip(&rows[m2 * nx..(m2 + 1) * nx]) {
                    *d += cy * r;
                }
            }
        }
        Field::from_raw(self.grid, out)
    }

    /// `sum_k q_k^2 psi_k(x)^2`, the pointwise variance rate of the process.
    pub fn variance_density(&self) -> Field {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut out = vec![0.0; nx * ny];
        for (&(m1, m2), &q) in self.modes.iter().zip(&self.weights) {
            let q2 = q * q;
            for j in 0..ny {
                let cy = self.cos_y[m2 * ny + j];
                let cx = &self.cos_x[m1 * nx..(m1 + 1) * nx];
                for (o, c) in out[j * nx..(j + 1) * nx].iter_mut().zip(cx) {
                    let psi = c * cy;
                    *o += q2 * psi * psi;
                }
            }
        }
        Field::from_raw(self.grid, out)
    }

    /// Stratonovich-to-Ito drift rate `mu(x) = sigma^2/2 sum_k q_k^2 psi_k(x)^2`.
    pub fn correction_mu(&self, sigma: f64) -> Field {
        let factor = 0.5 * sigma * sigma;
        self.variance_density().map(|v| factor * v)
    }

    pub fn hs_diagnostic(&self, tag: SpaceTag) -> HsReport {
        hs_diagnostic(self.spec.delta, self.spec.kmax, tag)
    }
}

/// `int_0^1 |cos(pi m x)|^p dx` for `m >= 1`; independent of `m`.
fn cos_power_mean(p: f64) -> f64 {
    (ln_gamma((p + 1.0) / 2.0) - 0.5 * PI.ln() - ln_gamma(p / 2.0 + 1.0)).exp()
}

/// Squared continuum norm of the orthonormal mode `k` in `tag`.
pub fn mode_norm_squared(mode: (usize, usize), tag: SpaceTag) -> f64 {
    let (m1, m2) = mode;
    let a2 = (mode_scale(m1) * mode_scale(m2)).powi(2);
    match tag {
        SpaceTag::L2 => 1.0,
        SpaceTag::H1 => 1.0 + BasisKind::Neumann.eigenvalue(mode),
        SpaceTag::Linf => a2,
        SpaceTag::Lp(p) => {
            let axis = |m: usize| if m == 0 { 1.0 } else { cos_power_mean(p) };
            a2 * (axis(m1) * axis(m2)).powf(2.0 / p)
        }
    }
}

/// Partial Hilbert-Schmidt sums `S_K` for `K = 0..=kmax` and a tail flag:
/// converged when `S_kmax - S_(kmax/2) < 0.01 S_kmax`.
pub fn hs_diagnostic(delta: f64, kmax: usize, tag: SpaceTag) -> HsReport {
    let mut partial_sums = Vec::with_capacity(kmax + 1);
    let mut total = 0.0;
    for k in 0..=kmax {
        // shell max(m1, m2) == k
        for m in 0..=k {
            let shell: &[(usize, usize)] = if m == k { &[(k, k)] } else { &[(m, k), (k, m)] };
            for &mode in shell {
                let q = mode_weight(delta, mode);
                total += q * q * mode_norm_squared(mode, tag);
            }
        }
        partial_sums.push(total);
    }
    let converged = kmax == 0 || {
        let s = partial_sums[kmax];
        s - partial_sums[kmax / 2] < 0.01 * s
    };
    HsReport {
        partial_sums,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampler(delta: f64, kmax: usize, n: usize) -> WienerSampler {
        let basis = SpectralBasis::new(Grid::square(n).unwrap());
        build_sampler(NoiseSpec::new(delta, kmax, 7), &basis).unwrap()
    }

    #[test]
    fn constant_mode_only() {
        let mut s = sampler(2.5, 0, 8);
        assert_eq!(s.modes(), &[(0, 0)]);
        assert_eq!(s.weights(), &[1.0]);
        let dw = s.sample_increment(0.01).unwrap();
        assert!(dw.values().iter().all(|&v| v == dw.values()[0]));
        let mu = s.correction_mu(2.0);
        assert!(mu.values().iter().all(|&v| (v - 2.0).abs() < 1e-15));
    }

    #[test]
    fn weight_formula() {
        let s = sampler(2.5, 3, 8);
        let idx = s.modes().iter().position(|&m| m == (1, 0)).unwrap();
        let expected = (1.0 + PI * PI).powf(-1.25);
        assert!((s.weights()[idx] - expected).abs() < 1e-15);
        let mut pairs: Vec<_> = s
            .modes()
            .iter()
            .map(|&m| BasisKind::Neumann.eigenvalue(m))
            .zip(s.weights().iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            if w[1].0 > w[0].0 {
                assert!(w[1].1 < w[0].1);
            }
        }
    }

    #[test]
    fn spec_validation() {
        let basis = SpectralBasis::new(Grid::square(8).unwrap());
        assert!(build_sampler(NoiseSpec::new(2.5, 8, 1), &basis).is_err());
        assert!(build_sampler(NoiseSpec::new(2.5, 7, 1), &basis).is_ok());
        assert!(build_sampler(NoiseSpec::new(0.0, 2, 1), &basis).is_err());
        let s = build_sampler(NoiseSpec::new(1.0, 2, 1), &basis).unwrap();
        assert!(s.warnings().contains(&NoiseWarning::DeltaAtMostOne));
        let mut periodic = NoiseSpec::new(2.5, 2, 1);
        periodic.basis_kind = BasisKind::Periodic;
        assert!(build_sampler(periodic, &basis).is_err());
        let mut s = sampler(2.5, 2, 8);
        assert!(s.sample_increment(0.0).is_err());
        assert!(s.sample_increment(-1.0).is_err());
    }

    #[test]
    fn correction_matches_brute_force() {
        let s = sampler(2.5, 5, 16);
        let basis = SpectralBasis::new(s.grid());
        let sigma = 0.7;
        let mu = s.correction_mu(sigma);
        let g = s.grid();
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let mut acc = 0.0;
                for m1 in 0..=5 {
                    for m2 in 0..=5 {
                        let q = (1.0 + PI * PI * (m1 * m1 + m2 * m2) as f64).powf(-1.25);
                        let psi = basis.mode_value((m1, m2), g.x(i), g.y(j));
                        acc += q * q * psi * psi;
                    }
                }
                assert!((mu.at(i, j) - 0.5 * sigma * sigma * acc).abs() < 1e-12);
            }
        }
        assert!(s.correction_mu(0.0).max_abs() == 0.0);
        let unit = s.correction_mu(1.0);
        for sigma in [0.3, 1.7, 2.0, 0.123] {
            let scaled = unit.map(|v| sigma * sigma * v);
            assert_eq!(scaled, s.correction_mu(sigma));
        }
    }

    #[test]
    fn reset_reproduces_sequence() {
        let mut a = sampler(2.5, 4, 16);
        let first: Vec<_> = (0..5).map(|_| a.sample_increment(0.01).unwrap()).collect();
        a.reset();
        let again: Vec<_> = (0..5).map(|_| a.sample_increment(0.01).unwrap()).collect();
        assert_eq!(first, again);
    }

    #[test]
    fn hs_sums() {
        let r = hs_diagnostic(2.5, 0, SpaceTag::L2);
        assert_eq!(r.partial_sums, vec![1.0]);
        assert!(r.converged);

        // Direct double sum as the oracle.
        let direct: f64 = (0..=32usize)
            .flat_map(|a| (0..=32usize).map(move |b| (a, b)))
            .map(|(a, b)| (1.0 + PI * PI * (a * a + b * b) as f64).powi(-3))
            .sum();
        let r = hs_diagnostic(3.0, 32, SpaceTag::L2);
        assert!((r.total() - direct).abs() < 1e-12);
        assert!(r.converged);

        let r = hs_diagnostic(1.5, 64, SpaceTag::H1);
        assert!(!r.converged);
        // roughly linear growth in K
        assert!(r.partial_sums[64] > 1.5 * r.partial_sums[32]);

        // L^2 via the L^p formula.
        let a = hs_diagnostic(2.5, 6, SpaceTag::Lp(2.0));
        let b = hs_diagnostic(2.5, 6, SpaceTag::L2);
        assert!((a.total() - b.total()).abs() < 1e-12);
        assert!((mode_norm_squared((1, 1), SpaceTag::Linf) - 4.0).abs() < 1e-14);
    }
}
