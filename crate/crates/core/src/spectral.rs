//! Neumann cosine eigenbasis of the unit square and the discrete cosine
//! transforms that move fields in and out of it.
//!
//! The orthonormal modes are
//! `psi_(m1,m2)(x, y) = a_m1 a_m2 cos(pi m1 x) cos(pi m2 y)` with `a_0 = 1`
//! and `a_m = sqrt(2)` otherwise. Sampled at cell centers they are exactly
//! orthonormal in the discrete inner product `sum f g hx hy`, so the forward
//! transform is a scaled DCT-II and the inverse a scaled DCT-III.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Which eigen-system eigenvalues are reported for.
///
/// Only [`BasisKind::Neumann`] carries transforms. The periodic sine/cosine
/// system on `[0, 2 pi]^2` is exposed for its eigenvalues alone; other
/// domains (e.g. Bessel modes of the disk) would slot in here as further
/// variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    #[default]
    Neumann,
    Periodic,
}

impl BasisKind {
    /// Magnitude of the Laplacian eigenvalue of mode `(m1, m2)`.
    pub fn eigenvalue(self, (m1, m2): (usize, usize)) -> f64 {
        let m2sum = (m1 * m1 + m2 * m2) as f64;
        match self {
            BasisKind::Neumann => PI * PI * m2sum,
            BasisKind::Periodic => 4.0 * PI * PI * m2sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformBackend {
    /// Even-reflection DCT on top of an `n`-point complex FFT.
    #[default]
    Fast,
    /// Dense `O(n^2)` cosine sums per axis.
    Direct,
}

/// Normalization constant `a_m` of the 1D cosine mode `m`.
#[inline]
pub fn mode_scale(m: usize) -> f64 {
    if m == 0 {
        1.0
    } else {
        SQRT_2
    }
}

/// Orthonormal 1D cosine transform of length `n`.
#[derive(Clone)]
struct AxisTransform {
    n: usize,
    kind: AxisKind,
}

#[derive(Clone)]
enum AxisKind {
    Fast {
        fft: Arc<dyn Fft<f64>>,
        ifft: Arc<dyn Fft<f64>>,
        // e^{-i pi k / (2n)}
        twiddle: Vec<Complex<f64>>,
    },
    Direct {
        // table[m * n + i] = a_m cos(pi m (i + 1/2) / n)
        table: Vec<f64>,
    },
}

impl AxisTransform {
    fn new(n: usize, backend: TransformBackend) -> Self {
        let kind = match backend {
            TransformBackend::Fast => {
                let mut planner = FftPlanner::new();
                let twiddle = (0..n)
                    .map(|k| Complex::from_polar(1.0, -PI * k as f64 / (2.0 * n as f64)))
                    .collect();
                AxisKind::Fast {
                    fft: planner.plan_fft_forward(n),
                    ifft: planner.plan_fft_inverse(n),
                    twiddle,
                }
            }
            TransformBackend::Direct => {
                let mut table = Vec::with_capacity(n * n);
                for m in 0..n {
                    for i in 0..n {
                        let arg = PI * m as f64 * (i as f64 + 0.5) / n as f64;
                        table.push(mode_scale(m) * arg.cos());
                    }
                }
                AxisKind::Direct { table }
            }
        };
        AxisTransform { n, kind }
    }

    /// Samples to orthonormal coefficients, in place.
    fn forward(&self, data: &mut [f64], buf: &mut Vec<Complex<f64>>, tmp: &mut Vec<f64>) {
        let n = self.n;
        match &self.kind {
            AxisKind::Fast { fft, twiddle, .. } => {
                buf.clear();
                buf.resize(n, Complex::new(0.0, 0.0));
                for k in 0..n.div_ceil(2) {
                    buf[k].re = data[2 * k];
                }
                for k in 0..n / 2 {
                    buf[n - 1 - k].re = data[2 * k + 1];
                }
                fft.process(buf);
                let inv_n = 1.0 / n as f64;
                for (m, out) in data.iter_mut().enumerate() {
                    let x = (twiddle[m] * buf[m]).re;
                    *out = mode_scale(m) * inv_n * x;
                }
            }
            AxisKind::Direct { table } => {
                tmp.clear();
                tmp.extend_from_slice(data);
                let inv_n = 1.0 / n as f64;
                for (m, out) in data.iter_mut().enumerate() {
                    let row = &table[m * n..(m + 1) * n];
                    *out = inv_n * row.iter().zip(tmp.iter()).map(|(c, f)| c * f).sum::<f64>();
                }
            }
        }
    }

    /// Orthonormal coefficients back to samples, in place.
    fn inverse(&self, data: &mut [f64], buf: &mut Vec<Complex<f64>>, tmp: &mut Vec<f64>) {
        let n = self.n;
        match &self.kind {
            AxisKind::Fast { ifft, twiddle, .. } => {
                // Unnormalized DCT-II values X[m] = c_m n / a_m.
                let x = |m: usize| -> f64 {
                    if m >= n {
                        0.0
                    } else {
                        data[m] * n as f64 / mode_scale(m)
                    }
                };
                buf.clear();
                buf.extend((0..n).map(|k| {
                    let z = Complex::new(x(k), if k == 0 { 0.0 } else { -x(n - k) });
                    twiddle[k].conj() * z
                }));
                ifft.process(buf);
                let inv_n = 1.0 / n as f64;
                for k in 0..n.div_ceil(2) {
                    data[2 * k] = buf[k].re * inv_n;
                }
                for k in 0..n / 2 {
                    data[2 * k + 1] = buf[n - 1 - k].re * inv_n;
                }
            }
            AxisKind::Direct { table } => {
                tmp.clear();
                tmp.extend_from_slice(data);
                data.iter_mut().for_each(|v| *v = 0.0);
                for (m, &c) in tmp.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let row = &table[m * n..(m + 1) * n];
                    for (out, t) in data.iter_mut().zip(row) {
                        *out += c * t;
                    }
                }
            }
        }
    }
}

/// Coefficients of a field in the Neumann cosine basis, stored like a
/// [`Field`]: coefficient of mode `(m1, m2)` at `m2 * nx + m1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<f64>,
}

impl Spectrum {
    pub fn zeros(grid: Grid) -> Self {
        Spectrum {
            grid,
            coeffs: vec![0.0; grid.len()],
        }
    }

    pub fn new(grid: Grid, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        Ok(Spectrum { grid, coeffs })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn get(&self, (m1, m2): (usize, usize)) -> f64 {
        self.coeffs[m2 * self.grid.nx() + m1]
    }

    #[inline]
    pub fn set(&mut self, (m1, m2): (usize, usize), value: f64) {
        let nx = self.grid.nx();
        self.coeffs[m2 * nx + m1] = value;
    }

    /// Iterates `((m1, m2), coefficient)`.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        let nx = self.grid.nx();
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(idx, &c)| ((idx % nx, idx / nx), c))
    }

    /// Multiplies coefficient `k` by `multiplier(k)`.
    pub fn scale_by(&mut self, multiplier: impl Fn((usize, usize)) -> f64) {
        let nx = self.grid.nx();
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            *c *= multiplier((idx % nx, idx / nx));
        }
    }
}

/// Neumann-Laplacian eigenbasis on a grid together with its transforms.
#[derive(Clone)]
pub struct SpectralBasis {
    grid: Grid,
    backend: TransformBackend,
    tx: AxisTransform,
    ty: AxisTransform,
    stencil_lambdas: Vec<f64>,
}

impl std::fmt::Debug for SpectralBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralBasis")
            .field("grid", &self.grid)
            .field("backend", &self.backend)
            .finish()
    }
}

impl SpectralBasis {
    pub fn new(grid: Grid) -> Self {
        Self::with_backend(grid, TransformBackend::Fast)
    }

    pub fn with_backend(grid: Grid, backend: TransformBackend) -> Self {
        let mut basis = SpectralBasis {
            grid,
            backend,
            tx: AxisTransform::new(grid.nx(), backend),
            ty: AxisTransform::new(grid.ny(), backend),
            stencil_lambdas: Vec::new(),
        };
        basis.stencil_lambdas = (0..grid.ny())
            .flat_map(|m2| (0..grid.nx()).map(move |m1| (m1, m2)))
            .map(|k| basis.stencil_lambda(k))
            .collect();
        basis
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn backend(&self) -> TransformBackend {
        self.backend
    }

    /// Number of resolved modes per axis, `(nx, ny)`.
    pub fn mode_counts(&self) -> (usize, usize) {
        (self.grid.nx(), self.grid.ny())
    }

    /// Continuum eigenvalue magnitude `pi^2 (m1^2 + m2^2)`.
    pub fn lambda(&self, mode: (usize, usize)) -> f64 {
        BasisKind::Neumann.eigenvalue(mode)
    }

    /// Eigenvalue magnitude of mode `(m1, m2)` for the 5-point Neumann
    /// stencil, for which the sampled cosines are exact eigenvectors:
    /// `(4/hx^2) sin^2(pi m1 hx / 2) + (4/hy^2) sin^2(pi m2 hy / 2)`.
    pub fn stencil_lambda(&self, (m1, m2): (usize, usize)) -> f64 {
        let (hx, hy) = (self.grid.hx(), self.grid.hy());
        let sx = (PI * m1 as f64 * hx / 2.0).sin();
        let sy = (PI * m2 as f64 * hy / 2.0).sin();
        4.0 * sx * sx / (hx * hx) + 4.0 * sy * sy / (hy * hy)
    }

    /// [`Self::stencil_lambda`] for every mode, in [`Spectrum`] layout.
    pub fn stencil_lambdas(&self) -> &[f64] {
        &self.stencil_lambdas
    }

    /// L² normalization `a_m1 a_m2` of mode `(m1, m2)`.
    pub fn norm_factor(&self, (m1, m2): (usize, usize)) -> f64 {
        mode_scale(m1) * mode_scale(m2)
    }

    /// Value of the normalized mode at `(x, y)`.
    pub fn mode_value(&self, (m1, m2): (usize, usize), x: f64, y: f64) -> f64 {
        self.norm_factor((m1, m2)) * (PI * m1 as f64 * x).cos() * (PI * m2 as f64 * y).cos()
    }

    /// The normalized mode sampled on the grid.
    pub fn mode_field(&self, mode: (usize, usize)) -> Field {
        Field::from_fn(self.grid, |x, y| self.mode_value(mode, x, y))
    }

    pub fn to_spectral(&self, f: &Field) -> Result<Spectrum> {
        if f.grid() != self.grid {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                actual: f.grid().len(),
            });
        }
        let mut data = f.values().to_vec();
        self.transform(&mut data, true);
        Ok(Spectrum {
            grid: self.grid,
            coeffs: data,
        })
    }

    pub fn from_spectral(&self, c: &Spectrum) -> Result<Field> {
        if c.grid() != self.grid {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                actual: c.grid().len(),
            });
        }
        let mut data = c.coeffs.clone();
        self.transform(&mut data, false);
        Ok(Field::from_raw(self.grid, data))
    }

    fn transform(&self, data: &mut [f64], forward: bool) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut buf = Vec::with_capacity(nx.max(ny));
        let mut tmp = Vec::with_capacity(nx.max(ny));
        for row in data.chunks_exact_mut(nx) {
            if forward {
                self.tx.forward(row, &mut buf, &mut tmp);
            } else {
                self.tx.inverse(row, &mut buf, &mut tmp);
            }
        }
        let mut col = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = data[j * nx + i];
            }
            if forward {
                self.ty.forward(&mut col, &mut buf, &mut tmp);
            } else {
                self.ty.inverse(&mut col, &mut buf, &mut tmp);
            }
            for j in 0..ny {
                data[j * nx + i] = col[j];
            }
        }
    }

    /// Applies `multiplier(k)` to every cosine coefficient and returns the
    /// resulting field.
    pub fn apply_multiplier(
        &self,
        f: &Field,
        multiplier: impl Fn((usize, usize)) -> f64,
    ) -> Result<Field> {
        let mut c = self.to_spectral(f)?;
        c.scale_by(multiplier);
        self.from_spectral(&c)
    }
}
