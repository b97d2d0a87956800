//! Naive single-loop oracles for every stencil operation, written straight
//! from the difference-operator definitions with their own inline ghost
//! handling. They share no stencil code with the library: all lookups go
//! through the mirror/zero closures below and read only stored interior
//! values.

#![allow(dead_code)]

use chns_core::grid::{CellField, GridSpec, MacVector};

/// Cell value with homogeneous-Neumann mirroring done here, reading only
/// interior entries.
pub fn cell(f: &CellField, i: isize, j: isize) -> f64 {
    let n = f.grid().n() as isize;
    let ii = i.clamp(0, n - 1);
    let jj = j.clamp(0, n - 1);
    f.at(ii, jj)
}

/// x-velocity value: stored for `0 <= i <= N` (no-penetration boundary
/// lines included), free-slip mirror in `j`.
pub fn vx(v: &MacVector, i: isize, j: isize) -> f64 {
    let n = v.grid().n() as isize;
    assert!((0..=n).contains(&i));
    let jj = j.clamp(0, n - 1);
    v.x.at(i, jj)
}

/// y-velocity value: stored for `0 <= j <= N`, free-slip mirror in `i`.
pub fn vy(v: &MacVector, i: isize, j: isize) -> f64 {
    let n = v.grid().n() as isize;
    assert!((0..=n).contains(&j));
    let ii = i.clamp(0, n - 1);
    v.y.at(ii, j)
}

pub fn oracle_grad(f: &CellField) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = f.grid().n() as isize;
    let h = f.grid().h();
    let mut gx = vec![vec![0.0; (n + 1) as usize]; n as usize];
    let mut gy = vec![vec![0.0; n as usize]; (n + 1) as usize];
    for j in 0..n {
        for i in 0..=n {
            gx[j as usize][i as usize] = if i == 0 || i == n {
                0.0
            } else {
                (cell(f, i, j) - cell(f, i - 1, j)) / h
            };
        }
    }
    for j in 0..=n {
        for i in 0..n {
            gy[j as usize][i as usize] = if j == 0 || j == n {
                0.0
            } else {
                (cell(f, i, j) - cell(f, i, j - 1)) / h
            };
        }
    }
    (gx, gy)
}

pub fn oracle_div(v: &MacVector) -> Vec<Vec<f64>> {
    let n = v.grid().n() as isize;
    let h = v.grid().h();
    let mut out = vec![vec![0.0; n as usize]; n as usize];
    for j in 0..n {
        for i in 0..n {
            out[j as usize][i as usize] =
                (vx(v, i + 1, j) - vx(v, i, j)) / h + (vy(v, i, j + 1) - vy(v, i, j)) / h;
        }
    }
    out
}

pub fn oracle_laplacian_cell(f: &CellField) -> Vec<Vec<f64>> {
    let n = f.grid().n() as isize;
    let h2 = f.grid().h() * f.grid().h();
    let mut out = vec![vec![0.0; n as usize]; n as usize];
    for j in 0..n {
        for i in 0..n {
            out[j as usize][i as usize] =
                (cell(f, i + 1, j) + cell(f, i - 1, j) + cell(f, i, j + 1) + cell(f, i, j - 1)
                    - 4.0 * cell(f, i, j))
                    / h2;
        }
    }
    out
}

/// Componentwise Laplacian of a velocity (interior lines only): the normal
/// neighbors are stored (Dirichlet lines included), tangential neighbors
/// mirror.
pub fn oracle_laplacian_mac(v: &MacVector) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = v.grid().n() as isize;
    let h2 = v.grid().h() * v.grid().h();
    let mut lx = vec![vec![0.0; (n + 1) as usize]; n as usize];
    let mut ly = vec![vec![0.0; n as usize]; (n + 1) as usize];
    for j in 0..n {
        for i in 1..n {
            lx[j as usize][i as usize] =
                (vx(v, i + 1, j) + vx(v, i - 1, j) + vx(v, i, j + 1) + vx(v, i, j - 1)
                    - 4.0 * vx(v, i, j))
                    / h2;
        }
    }
    for j in 1..n {
        for i in 0..n {
            ly[j as usize][i as usize] =
                (vy(v, i + 1, j) + vy(v, i - 1, j) + vy(v, i, j + 1) + vy(v, i, j - 1)
                    - 4.0 * vy(v, i, j))
                    / h2;
        }
    }
    (lx, ly)
}

fn dtilde_x_on_vx(v: &MacVector, i: isize, j: isize) -> f64 {
    let n = v.grid().n() as isize;
    let h = v.grid().h();
    if i == 0 {
        vx(v, 1, j) / h
    } else if i == n {
        -vx(v, n - 1, j) / h
    } else {
        (vx(v, i + 1, j) - vx(v, i - 1, j)) / (2.0 * h)
    }
}

fn dtilde_y_on_vx(v: &MacVector, i: isize, j: isize) -> f64 {
    let h = v.grid().h();
    (vx(v, i, j + 1) - vx(v, i, j - 1)) / (2.0 * h)
}

fn dtilde_x_on_vy(v: &MacVector, i: isize, j: isize) -> f64 {
    let h = v.grid().h();
    (vy(v, i + 1, j) - vy(v, i - 1, j)) / (2.0 * h)
}

fn dtilde_y_on_vy(v: &MacVector, i: isize, j: isize) -> f64 {
    let n = v.grid().n() as isize;
    let h = v.grid().h();
    if j == 0 {
        vy(v, i, 1) / h
    } else if j == n {
        -vy(v, i, n - 1) / h
    } else {
        (vy(v, i, j + 1) - vy(v, i, j - 1)) / (2.0 * h)
    }
}

pub fn oracle_advect(u: &MacVector, v: &MacVector) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = u.grid().n() as isize;
    let mut ax = vec![vec![0.0; (n + 1) as usize]; n as usize];
    let mut ay = vec![vec![0.0; n as usize]; (n + 1) as usize];
    for j in 0..n {
        for i in 0..=n {
            let axy_uy =
                0.25 * (vy(u, i - 1, j) + vy(u, i - 1, j + 1) + vy(u, i, j) + vy(u, i, j + 1));
            ax[j as usize][i as usize] =
                vx(u, i, j) * dtilde_x_on_vx(v, i, j) + axy_uy * dtilde_y_on_vx(v, i, j);
        }
    }
    for j in 0..=n {
        for i in 0..n {
            let axy_ux =
                0.25 * (vx(u, i, j - 1) + vx(u, i, j) + vx(u, i + 1, j - 1) + vx(u, i + 1, j));
            ay[j as usize][i as usize] =
                axy_ux * dtilde_x_on_vy(v, i, j) + vy(u, i, j) * dtilde_y_on_vy(v, i, j);
        }
    }
    (ax, ay)
}

pub fn oracle_mu_grad_phi(mu: &CellField, phi: &CellField) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = mu.grid().n() as isize;
    let h = mu.grid().h();
    let mut sx = vec![vec![0.0; (n + 1) as usize]; n as usize];
    let mut sy = vec![vec![0.0; n as usize]; (n + 1) as usize];
    for j in 0..n {
        for i in 0..=n {
            let dphi = (cell(phi, i, j) - cell(phi, i - 1, j)) / h;
            let amu = 0.5 * (cell(mu, i - 1, j) + cell(mu, i, j));
            sx[j as usize][i as usize] = dphi * amu;
        }
    }
    for j in 0..=n {
        for i in 0..n {
            let dphi = (cell(phi, i, j) - cell(phi, i, j - 1)) / h;
            let amu = 0.5 * (cell(mu, i, j - 1) + cell(mu, i, j));
            sy[j as usize][i as usize] = dphi * amu;
        }
    }
    (sx, sy)
}

pub fn oracle_div_phi_u(phi: &CellField, u: &MacVector) -> Vec<Vec<f64>> {
    let n = phi.grid().n() as isize;
    let h = phi.grid().h();
    let flux_x = |i: isize, j: isize| vx(u, i, j) * 0.5 * (cell(phi, i - 1, j) + cell(phi, i, j));
    let flux_y = |i: isize, j: isize| vy(u, i, j) * 0.5 * (cell(phi, i, j - 1) + cell(phi, i, j));
    let mut out = vec![vec![0.0; n as usize]; n as usize];
    for j in 0..n {
        for i in 0..n {
            out[j as usize][i as usize] =
                (flux_x(i + 1, j) - flux_x(i, j)) / h + (flux_y(i, j + 1) - flux_y(i, j)) / h;
        }
    }
    out
}

/// Plain summed inner products, no compensation, for cross-checking.
pub fn oracle_inner_cell(f: &CellField, g: &CellField) -> f64 {
    let n = f.grid().n() as isize;
    let h2 = f.grid().h() * f.grid().h();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            s += f.at(i, j) * g.at(i, j);
        }
    }
    s * h2
}

pub fn max_abs_2d(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Smooth pseudo-random cell field: a short seeded cosine series, so tests
/// get reproducible data with interior structure and exact Neumann modes.
pub fn smooth_cell_field(grid: GridSpec, seed: u64) -> CellField {
    let coeffs: Vec<(f64, f64, f64)> = (0..4)
        .map(|k| {
            let s = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(k * 1442695040888963407);
            let a = ((s >> 11) % 1000) as f64 / 1000.0 - 0.5;
            let kx = 1 + (s % 3) as i32;
            let ky = 1 + ((s >> 7) % 4) as i32;
            (a, kx as f64, ky as f64)
        })
        .collect();
    CellField::from_fn(grid, move |x, y| {
        coeffs
            .iter()
            .map(|(a, kx, ky)| {
                a * (kx * std::f64::consts::PI * x).cos() * (ky * std::f64::consts::PI * y).cos()
            })
            .sum()
    })
}
