//! Discrete differential, averaging, and nonlinear operators on the MAC
//! grid, plus the inner products and norms built from them.
//!
//! Short-stencil differences map between placements in the usual staggered
//! way: the centered difference `D^c` takes cell values to edges, `D^{ew}` /
//! `D^{ns}` take edge values back to cells (or to nodes in the tangential
//! direction). The long stencil `Dt` (spacing `2h`) acts within a placement
//! and is used only by the advection term; at walls it reduces to the
//! one-sided homogeneous-Dirichlet formulas in the normal direction and uses
//! the free-slip mirror ghost in the tangential direction.
//!
//! Inner products are `h^2`-weighted sums: all `N^2` cells for the cell
//! placement, and the interior edge lines for the edge placements (boundary
//! lines carry identically-zero normal velocity, so they drop out). These
//! index conventions are what make the summation-by-parts identities hold to
//! roundoff, which the test suite enforces.

use crate::fastsolve;
use crate::grid::KahanSum;
use crate::grid::{CellField, MacVector, XEdgeField, YEdgeField};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OpsError {
    #[error("mean-zero field required: cell average is {mean:.3e} (tolerance 1e-12)")]
    NonZeroMean { mean: f64 },
}

/// Discrete gradient of a cell field: `(D^c_x f, D^c_y f)` on the edge
/// placements. Boundary edges are zero under the homogeneous Neumann
/// convention (the mirror ghost cancels the difference there).
pub fn grad_cell(f: &CellField) -> MacVector {
    let grid = f.grid();
    let n = grid.n() as isize;
    let h = grid.h();
    let mut out = MacVector::zeros(grid);
    for j in 0..n {
        for i in 0..=n {
            out.x.set(i, j, (f.at(i, j) - f.at(i - 1, j)) / h);
        }
    }
    for j in 0..=n {
        for i in 0..n {
            out.y.set(i, j, (f.at(i, j) - f.at(i, j - 1)) / h);
        }
    }
    out.enforce_velocity_bc();
    out
}

/// Discrete divergence `D^{ew}_x v^x + D^{ns}_y v^y` at cell centers.
pub fn div_mac(v: &MacVector) -> CellField {
    let grid = v.grid();
    let n = grid.n() as isize;
    let h = grid.h();
    let mut out = CellField::zeros(grid);
    for j in 0..n {
        for i in 0..n {
            let d = (v.x.at(i + 1, j) - v.x.at(i, j)) / h + (v.y.at(i, j + 1) - v.y.at(i, j)) / h;
            out.set(i, j, d);
        }
    }
    out.fill_neumann_ghosts();
    out
}

/// Five-point Laplacian of a cell field (Neumann ghosts).
pub fn laplacian_cell(f: &CellField) -> CellField {
    let grid = f.grid();
    let n = grid.n() as isize;
    let h2 = grid.h() * grid.h();
    let mut out = CellField::zeros(grid);
    for j in 0..n {
        for i in 0..n {
            let v = (f.at(i + 1, j) + f.at(i - 1, j) + f.at(i, j + 1) + f.at(i, j - 1)
                - 4.0 * f.at(i, j))
                / h2;
            out.set(i, j, v);
        }
    }
    out.fill_neumann_ghosts();
    out
}

/// Five-point Laplacian of a velocity field, component by component, with
/// no-penetration normal and free-slip tangential ghosts. Normal boundary
/// lines of the result are zero (the operator is never needed there).
pub fn laplacian_mac(v: &MacVector) -> MacVector {
    let grid = v.grid();
    let n = grid.n() as isize;
    let h2 = grid.h() * grid.h();
    let mut out = MacVector::zeros(grid);
    for j in 0..n {
        for i in 1..n {
            let l = (v.x.at(i + 1, j) + v.x.at(i - 1, j) + v.x.at(i, j + 1) + v.x.at(i, j - 1)
                - 4.0 * v.x.at(i, j))
                / h2;
            out.x.set(i, j, l);
        }
    }
    for j in 1..n {
        for i in 0..n {
            let l = (v.y.at(i + 1, j) + v.y.at(i - 1, j) + v.y.at(i, j + 1) + v.y.at(i, j - 1)
                - 4.0 * v.y.at(i, j))
                / h2;
            out.y.set(i, j, l);
        }
    }
    out.enforce_velocity_bc();
    out
}

// Long-stencil differences. Normal direction: homogeneous-Dirichlet
// reductions at the walls. Tangential direction: mirror ghosts.

#[inline]
fn dt_x_on_x(vx: &XEdgeField, i: isize, j: isize, n: isize, h: f64) -> f64 {
    if i == 0 {
        vx.at(1, j) / h
    } else if i == n {
        -vx.at(n - 1, j) / h
    } else {
        (vx.at(i + 1, j) - vx.at(i - 1, j)) / (2.0 * h)
    }
}

#[inline]
fn dt_y_on_x(vx: &XEdgeField, i: isize, j: isize, h: f64) -> f64 {
    (vx.at(i, j + 1) - vx.at(i, j - 1)) / (2.0 * h)
}

#[inline]
fn dt_x_on_y(vy: &YEdgeField, i: isize, j: isize, h: f64) -> f64 {
    (vy.at(i + 1, j) - vy.at(i - 1, j)) / (2.0 * h)
}

#[inline]
fn dt_y_on_y(vy: &YEdgeField, i: isize, j: isize, n: isize, h: f64) -> f64 {
    if j == 0 {
        vy.at(i, 1) / h
    } else if j == n {
        -vy.at(i, n - 1) / h
    } else {
        (vy.at(i, j + 1) - vy.at(i, j - 1)) / (2.0 * h)
    }
}

// Averaging operators.

/// `A_xy u^y` evaluated at the east-west point `(i, j+1/2)`: the mean of the
/// four surrounding north-south values.
#[inline]
fn axy_y_at_x(uy: &YEdgeField, i: isize, j: isize) -> f64 {
    0.25 * (uy.at(i - 1, j) + uy.at(i - 1, j + 1) + uy.at(i, j) + uy.at(i, j + 1))
}

/// `A_xy u^x` evaluated at the north-south point `(i+1/2, j)`.
#[inline]
fn axy_x_at_y(ux: &XEdgeField, i: isize, j: isize) -> f64 {
    0.25 * (ux.at(i, j - 1) + ux.at(i, j) + ux.at(i + 1, j - 1) + ux.at(i + 1, j))
}

#[inline]
fn ax_cell_at_x(f: &CellField, i: isize, j: isize) -> f64 {
    0.5 * (f.at(i - 1, j) + f.at(i, j))
}

#[inline]
fn ay_cell_at_y(f: &CellField, i: isize, j: isize) -> f64 {
    0.5 * (f.at(i, j - 1) + f.at(i, j))
}

/// Advection `u . grad_h v` with long-stencil derivatives:
/// x-component `u^x Dt_x v^x + (A_xy u^y) Dt_y v^x`, y-component
/// `(A_xy u^x) Dt_x v^y + u^y Dt_y v^y`. Both arguments must carry
/// velocity ghost values.
pub fn advect_velocity(u: &MacVector, v: &MacVector) -> MacVector {
    let grid = u.grid();
    assert_eq!(grid, v.grid());
    let n = grid.n() as isize;
    let h = grid.h();
    let mut out = MacVector::zeros(grid);
    for j in 0..n {
        for i in 0..=n {
            let a = u.x.at(i, j) * dt_x_on_x(&v.x, i, j, n, h)
                + axy_y_at_x(&u.y, i, j) * dt_y_on_x(&v.x, i, j, h);
            out.x.set(i, j, a);
        }
    }
    for j in 0..=n {
        for i in 0..n {
            let a = axy_x_at_y(&u.x, i, j) * dt_x_on_y(&v.y, i, j, h)
                + u.y.at(i, j) * dt_y_on_y(&v.y, i, j, n, h);
            out.y.set(i, j, a);
        }
    }
    out.enforce_velocity_bc();
    out
}

/// Surface-tension term `mu grad_h phi`: `(D^c_x phi . A_x mu,
/// D^c_y phi . A_y mu)`. Zero on boundary edges.
pub fn mu_grad_phi(mu: &CellField, phi: &CellField) -> MacVector {
    let grid = mu.grid();
    assert_eq!(grid, phi.grid());
    let n = grid.n() as isize;
    let h = grid.h();
    let mut out = MacVector::zeros(grid);
    for j in 0..n {
        for i in 0..=n {
            let g = (phi.at(i, j) - phi.at(i - 1, j)) / h;
            out.x.set(i, j, g * ax_cell_at_x(mu, i, j));
        }
    }
    for j in 0..=n {
        for i in 0..n {
            let g = (phi.at(i, j) - phi.at(i, j - 1)) / h;
            out.y.set(i, j, g * ay_cell_at_y(mu, i, j));
        }
    }
    out.enforce_velocity_bc();
    out
}

/// Conservative phase advection `grad_h . (phi u)`:
/// `D^{ew}_x (u^x A_x phi) + D^{ns}_y (u^y A_y phi)` at cell centers.
pub fn div_phi_u(phi: &CellField, u: &MacVector) -> CellField {
    let grid = phi.grid();
    assert_eq!(grid, u.grid());
    let n = grid.n() as isize;
    let h = grid.h();
    let mut out = CellField::zeros(grid);
    for j in 0..n {
        for i in 0..n {
            let fe = u.x.at(i + 1, j) * ax_cell_at_x(phi, i + 1, j);
            let fw = u.x.at(i, j) * ax_cell_at_x(phi, i, j);
            let fn_ = u.y.at(i, j + 1) * ay_cell_at_y(phi, i, j + 1);
            let fs = u.y.at(i, j) * ay_cell_at_y(phi, i, j);
            out.set(i, j, (fe - fw) / h + (fn_ - fs) / h);
        }
    }
    out.fill_neumann_ghosts();
    out
}

// Inner products.

pub fn inner_cell(f: &CellField, g: &CellField) -> f64 {
    let grid = f.grid();
    assert_eq!(grid, g.grid());
    let n = grid.n() as isize;
    let mut sum = KahanSum::default();
    for j in 0..n {
        for i in 0..n {
            sum.add(f.at(i, j) * g.at(i, j));
        }
    }
    sum.value() * grid.h() * grid.h()
}

pub fn inner_ew(f: &XEdgeField, g: &XEdgeField) -> f64 {
    let grid = f.grid();
    assert_eq!(grid, g.grid());
    let n = grid.n() as isize;
    let mut sum = KahanSum::default();
    for j in 0..n {
        for i in 1..n {
            sum.add(f.at(i, j) * g.at(i, j));
        }
    }
    sum.value() * grid.h() * grid.h()
}

pub fn inner_ns(f: &YEdgeField, g: &YEdgeField) -> f64 {
    let grid = f.grid();
    assert_eq!(grid, g.grid());
    let n = grid.n() as isize;
    let mut sum = KahanSum::default();
    for j in 1..n {
        for i in 0..n {
            sum.add(f.at(i, j) * g.at(i, j));
        }
    }
    sum.value() * grid.h() * grid.h()
}

/// `<u, v>_1 = <u^x, v^x>_ew + <u^y, v^y>_ns`.
pub fn inner_mac(u: &MacVector, v: &MacVector) -> f64 {
    inner_ew(&u.x, &v.x) + inner_ns(&u.y, &v.y)
}

// Norms.

pub fn norm2_cell(f: &CellField) -> f64 {
    inner_cell(f, f).sqrt()
}

pub fn norm2_mac(v: &MacVector) -> f64 {
    inner_mac(v, v).sqrt()
}

/// `h^2`-weighted discrete `l^p` norm over all stored points, `p >= 1`.
pub fn norm_p_cell(f: &CellField, p: f64) -> f64 {
    assert!(p >= 1.0);
    let n = f.grid().n() as isize;
    let mut sum = KahanSum::default();
    for j in 0..n {
        for i in 0..n {
            sum.add(f.at(i, j).abs().powf(p));
        }
    }
    (sum.value() * f.grid().h() * f.grid().h()).powf(1.0 / p)
}

pub fn norm_inf_cell(f: &CellField) -> f64 {
    f.max_abs()
}

pub fn norm_inf_mac(v: &MacVector) -> f64 {
    v.max_abs()
}

/// `||grad_h f||_2^2` for a cell field, i.e. `<grad f, grad f>_1` without
/// the intermediate allocation.
pub fn grad_norm_sq_cell(f: &CellField) -> f64 {
    let grid = f.grid();
    let n = grid.n() as isize;
    let h = grid.h();
    let mut sum = KahanSum::default();
    for j in 0..n {
        for i in 1..n {
            let d = (f.at(i, j) - f.at(i - 1, j)) / h;
            sum.add(d * d);
        }
    }
    for j in 1..n {
        for i in 0..n {
            let d = (f.at(i, j) - f.at(i, j - 1)) / h;
            sum.add(d * d);
        }
    }
    sum.value() * h * h
}

/// `||grad_h v||_2^2` for a velocity field. Each component contributes its
/// normal derivative on cells and its tangential derivative on interior
/// nodes; these are exactly the index sets for which
/// `-<v, lap_h v>_1 = ||grad_h v||_2^2` holds to roundoff.
pub fn grad_norm_sq_mac(v: &MacVector) -> f64 {
    let grid = v.grid();
    let n = grid.n() as isize;
    let h = grid.h();
    let mut sum = KahanSum::default();
    // d(v^x)/dx on all cells, d(v^x)/dy on interior nodes.
    for j in 0..n {
        for i in 0..n {
            let d = (v.x.at(i + 1, j) - v.x.at(i, j)) / h;
            sum.add(d * d);
        }
    }
    for j in 1..n {
        for i in 0..=n {
            let d = (v.x.at(i, j) - v.x.at(i, j - 1)) / h;
            sum.add(d * d);
        }
    }
    // d(v^y)/dy on all cells, d(v^y)/dx on interior nodes.
    for j in 0..n {
        for i in 0..n {
            let d = (v.y.at(i, j + 1) - v.y.at(i, j)) / h;
            sum.add(d * d);
        }
    }
    for j in 0..=n {
        for i in 1..n {
            let d = (v.y.at(i, j) - v.y.at(i - 1, j)) / h;
            sum.add(d * d);
        }
    }
    sum.value() * h * h
}

/// `||f||_{-1,h} = sqrt(<f, (-lap_h)^{-1} f>_c)` on the mean-zero space.
/// The inverse Laplacian is the Neumann fast solve.
pub fn norm_h1m(f: &CellField) -> Result<f64, OpsError> {
    let mean = f.average();
    if mean.abs() > 1e-12 {
        return Err(OpsError::NonZeroMean { mean });
    }
    let mut neg = f.clone();
    neg.scale(-1.0);
    let psi = fastsolve::solve_poisson_neumann(&neg)
        .expect("mean-zero rhs is always compatible with the Neumann solve");
    Ok(inner_cell(f, &psi).max(0.0).sqrt())
}
