//! Finite-difference operators with homogeneous Neumann boundaries.
//!
//! Boundary conditions are imposed through ghost cells mirrored across the
//! boundary face (`f[-1] = f[0]`, `f[n] = f[n-1]`), which makes every face
//! flux through the boundary vanish.

use crate::grid::Field;

/// 5-point Laplacian. Written in face-flux form so the grid sum of the
/// result telescopes to zero.
pub fn laplacian(f: &Field) -> Field {
    let grid = f.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ihx2, ihy2) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let v = f.values();
    let mut out = vec![0.0; grid.len()];
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx {
            let c = v[row + i];
            let west = if i > 0 { v[row + i - 1] } else { c };
            let east = if i + 1 < nx { v[row + i + 1] } else { c };
            let south = if j > 0 { v[row + i - nx] } else { c };
            let north = if j + 1 < ny { v[row + i + nx] } else { c };
            out[row + i] = ((east - c) - (c - west)) * ihx2 + ((north - c) - (c - south)) * ihy2;
        }
    }
    Field::from_raw(grid, out)
}

/// Central-difference gradient using the mirrored ghost cells.
pub fn gradient(f: &Field) -> (Field, Field) {
    let grid = f.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (sx, sy) = (0.5 / grid.hx(), 0.5 / grid.hy());
    let v = f.values();
    let mut gx = vec![0.0; grid.len()];
    let mut gy = vec![0.0; grid.len()];
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx {
            let c = v[row + i];
            let west = if i > 0 { v[row + i - 1] } else { c };
            let east = if i + 1 < nx { v[row + i + 1] } else { c };
            let south = if j > 0 { v[row + i - nx] } else { c };
            let north = if j + 1 < ny { v[row + i + nx] } else { c };
            gx[row + i] = (east - west) * sx;
            gy[row + i] = (north - south) * sy;
        }
    }
    (Field::from_raw(grid, gx), Field::from_raw(grid, gy))
}

/// Pointwise Euclidean magnitude of [`gradient`].
pub fn gradient_magnitude(f: &Field) -> Field {
    let (gx, gy) = gradient(f);
    let values = gx
        .values()
        .iter()
        .zip(gy.values())
        .map(|(a, b)| a.hypot(*b))
        .collect();
    Field::from_raw(f.grid(), values)
}
