//! Direct solvers for the three constant-coefficient systems the scheme
//! needs, by diagonalization in discrete trigonometric bases.
//!
//! The cell-centered cosine basis `cos(k pi (2i+1) / (2N))` is the exact
//! eigenbasis of the five-point Neumann Laplacian under the mirror ghost
//! convention, with 1D eigenvalues `-(4/h^2) sin^2(k pi h / 2)`. The
//! edge-centered sine basis `sin(k pi i / N)` plays the same role for the
//! Dirichlet (no-penetration) direction of a velocity component, with the
//! same eigenvalue formula. Each solve is therefore a forward transform, a
//! diagonal division, and an inverse transform, at `O(N^2 log N)` cost.
//!
//! The transforms are built on a complex FFT of length `2N` with the usual
//! symmetric embeddings; plans are cached per size and shared (they are
//! immutable after construction).

use crate::grid::{CellField, GridSpec, MacVector};
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("{name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("Neumann Poisson right-hand side must be mean-free: cell average is {mean:.3e} (tolerance 1e-10)")]
    IncompatibleRhs { mean: f64 },
}

type PlanCache = Mutex<HashMap<usize, Arc<dyn Fft<f64>>>>;

fn plan(len: usize) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("plan cache poisoned");
    map.entry(len)
        .or_insert_with(|| FftPlanner::new().plan_fft_forward(len))
        .clone()
}

/// One-dimensional cosine/sine transforms of logical size `n`, sharing a
/// single length-`2n` FFT plan and scratch space. Confined to one caller at
/// a time; distinct workspaces may run concurrently.
struct Trig1d {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    aux: Vec<f64>,
}

impl Trig1d {
    fn new(n: usize) -> Self {
        let fft = plan(2 * n);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self {
            n,
            fft,
            buf: vec![Complex::default(); 2 * n],
            scratch,
            aux: vec![0.0; n],
        }
    }

    /// DCT-II: `out[k] = sum_i x[i] cos(pi k (2i+1) / (2n))`.
    fn dct2(&mut self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        for (i, &v) in x.iter().enumerate() {
            self.buf[i] = Complex::new(v, 0.0);
            self.buf[2 * n - 1 - i] = Complex::new(v, 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for (k, o) in out.iter_mut().enumerate().take(n) {
            let theta = std::f64::consts::PI * k as f64 / (2.0 * n as f64);
            let y = self.buf[k];
            *o = 0.5 * (theta.cos() * y.re + theta.sin() * y.im);
        }
    }

    /// DCT-III: `out[i] = sum_k a[k] cos(pi k (2i+1) / (2n))`.
    fn dct3(&mut self, a: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(a.len(), n);
        for (k, &v) in a.iter().enumerate() {
            let theta = std::f64::consts::PI * k as f64 / (2.0 * n as f64);
            self.buf[k] = Complex::new(v * theta.cos(), -v * theta.sin());
        }
        for k in n..2 * n {
            self.buf[k] = Complex::default();
        }
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = self.buf[i].re;
        }
    }

    /// Inverse of [`Self::dct2`]: scales the zero mode by `1/n` and the rest
    /// by `2/n` before the DCT-III.
    fn idct2(&mut self, a: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (k, (s, &v)) in self.aux.iter_mut().zip(a).enumerate() {
            *s = if k == 0 {
                v / n as f64
            } else {
                2.0 * v / n as f64
            };
        }
        let scaled = std::mem::take(&mut self.aux);
        self.dct3(&scaled, out);
        self.aux = scaled;
    }

    /// DST-I on `n - 1` interior values: `out[k-1] = sum_i x[i-1] sin(pi k i / n)`.
    fn dst1(&mut self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let m = n - 1;
        debug_assert_eq!(x.len(), m);
        self.buf[0] = Complex::default();
        self.buf[n] = Complex::default();
        for i in 1..=m {
            self.buf[i] = Complex::new(x[i - 1], 0.0);
            self.buf[2 * n - i] = Complex::new(-x[i - 1], 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for k in 1..=m {
            out[k - 1] = -0.5 * self.buf[k].im;
        }
    }

    /// Inverse of [`Self::dst1`]; the DST-I is its own inverse up to `2/n`.
    fn idst1(&mut self, a: &[f64], out: &mut [f64]) {
        let n = self.n;
        self.dst1(a, out);
        for o in out.iter_mut() {
            *o *= 2.0 / n as f64;
        }
    }
}

/// 1D eigenvalues of `-lap_h`: `sigma_k = (4/h^2) sin^2(k pi h / 2)` with
/// `h = 1/n`, valid for both the cosine (`k = 0..n-1`) and sine
/// (`k = 1..n-1`) families.
fn laplacian_eigenvalues(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * nf)).sin();
            4.0 * nf * nf * s * s
        })
        .collect()
}

/// Row/column 2D cosine transform machinery on an `n x n` matrix stored
/// row-major (`j` slow).
struct Spectral2d {
    n: usize,
    trig: Trig1d,
    line_in: Vec<f64>,
    line_out: Vec<f64>,
}

impl Spectral2d {
    fn new(n: usize) -> Self {
        Self {
            n,
            trig: Trig1d::new(n),
            line_in: vec![0.0; n],
            line_out: vec![0.0; n],
        }
    }

    fn rows(&mut self, data: &mut [f64], forward: bool) {
        let n = self.n;
        for j in 0..n {
            self.line_in.copy_from_slice(&data[j * n..(j + 1) * n]);
            if forward {
                self.trig.dct2(&self.line_in, &mut self.line_out);
            } else {
                self.trig.idct2(&self.line_in, &mut self.line_out);
            }
            data[j * n..(j + 1) * n].copy_from_slice(&self.line_out);
        }
    }

    fn cols(&mut self, data: &mut [f64], forward: bool) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                self.line_in[j] = data[j * n + i];
            }
            if forward {
                self.trig.dct2(&self.line_in, &mut self.line_out);
            } else {
                self.trig.idct2(&self.line_in, &mut self.line_out);
            }
            for j in 0..n {
                data[j * n + i] = self.line_out[j];
            }
        }
    }
}

/// Operator `L_phi X = (3/(2 tau)) X + eps^2 lap_h^2 X` with Neumann ghosts
/// at both Laplacian applications.
#[derive(Debug, Clone, Copy)]
pub struct PhaseOperatorSpec {
    tau: f64,
    epsilon: f64,
    grid: GridSpec,
}

impl PhaseOperatorSpec {
    pub fn new(tau: f64, epsilon: f64, grid: GridSpec) -> Result<Self, SolveError> {
        if tau <= 0.0 || tau.is_nan() {
            return Err(SolveError::NonPositiveParameter {
                name: "tau",
                value: tau,
            });
        }
        if epsilon <= 0.0 || epsilon.is_nan() {
            return Err(SolveError::NonPositiveParameter {
                name: "epsilon",
                value: epsilon,
            });
        }
        Ok(Self { tau, epsilon, grid })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }
}

/// Operator `L_u V = (3/(2 tau)) V - nu lap_h V` with no-penetration normal
/// and free-slip tangential ghosts.
#[derive(Debug, Clone, Copy)]
pub struct VelocityOperatorSpec {
    tau: f64,
    nu: f64,
    grid: GridSpec,
}

impl VelocityOperatorSpec {
    pub fn new(tau: f64, nu: f64, grid: GridSpec) -> Result<Self, SolveError> {
        if tau <= 0.0 || tau.is_nan() {
            return Err(SolveError::NonPositiveParameter {
                name: "tau",
                value: tau,
            });
        }
        if nu <= 0.0 || nu.is_nan() {
            return Err(SolveError::NonPositiveParameter {
                name: "nu",
                value: nu,
            });
        }
        Ok(Self { tau, nu, grid })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }
}

/// Solve `L_phi X = rhs`. The biharmonic part is handled as a single
/// diagonal division by `3/(2 tau) + eps^2 sigma^2`; the zero mode stays
/// invertible through the `3/(2 tau)` shift, so no mean constraint applies.
pub fn solve_phase(spec: &PhaseOperatorSpec, rhs: &CellField) -> CellField {
    let grid = spec.grid;
    assert_eq!(grid, rhs.grid());
    let n = grid.n();
    let sigma = laplacian_eigenvalues(n);
    let mut data = rhs.interior_values();
    let mut sp = Spectral2d::new(n);
    sp.rows(&mut data, true);
    sp.cols(&mut data, true);
    let shift = 1.5 / spec.tau;
    let e2 = spec.epsilon * spec.epsilon;
    for ky in 0..n {
        for kx in 0..n {
            let s = sigma[kx] + sigma[ky];
            data[ky * n + kx] /= shift + e2 * s * s;
        }
    }
    sp.cols(&mut data, false);
    sp.rows(&mut data, false);
    CellField::from_interior_values(grid, &data)
}

/// Solve `lap_h psi = rhs` with Neumann ghosts and a mean-zero solution.
/// Also serves as `(-lap_h)^{-1}` for the negative-index norm.
pub fn solve_poisson_neumann(rhs: &CellField) -> Result<CellField, SolveError> {
    let mean = rhs.average();
    if mean.abs() > 1e-10 {
        return Err(SolveError::IncompatibleRhs { mean });
    }
    let grid = rhs.grid();
    let n = grid.n();
    let sigma = laplacian_eigenvalues(n);
    let mut data = rhs.interior_values();
    let mut sp = Spectral2d::new(n);
    sp.rows(&mut data, true);
    sp.cols(&mut data, true);
    for ky in 0..n {
        for kx in 0..n {
            let s = sigma[kx] + sigma[ky];
            let c = &mut data[ky * n + kx];
            if kx == 0 && ky == 0 {
                *c = 0.0;
            } else {
                *c /= -s;
            }
        }
    }
    sp.cols(&mut data, false);
    sp.rows(&mut data, false);
    Ok(CellField::from_interior_values(grid, &data))
}

/// Solve `L_u V = rhs` componentwise: sine modes in the no-penetration
/// direction, cosine modes in the free-slip direction. The returned field
/// satisfies the discrete velocity boundary conditions exactly.
pub fn solve_velocity(spec: &VelocityOperatorSpec, rhs: &MacVector) -> MacVector {
    let grid = spec.grid;
    assert_eq!(grid, rhs.grid());
    let n = grid.n();
    let m = n - 1;
    let sigma = laplacian_eigenvalues(n);
    let shift = 1.5 / spec.tau;
    let mut out = MacVector::zeros(grid);
    let mut trig = Trig1d::new(n);

    // x-component: DST-I over interior lines i = 1..n-1, DCT-II in y.
    {
        let mut coef = vec![0.0; m * n]; // [j or ky][kx]
        let mut line_in = vec![0.0; m];
        let mut line_out = vec![0.0; m];
        for j in 0..n {
            for (i, v) in line_in.iter_mut().enumerate() {
                *v = rhs.x.at((i + 1) as isize, j as isize);
            }
            trig.dst1(&line_in, &mut line_out);
            coef[j * m..(j + 1) * m].copy_from_slice(&line_out);
        }
        let mut col_in = vec![0.0; n];
        let mut col_hat = vec![0.0; n];
        let mut col_out = vec![0.0; n];
        for kx in 0..m {
            for (j, v) in col_in.iter_mut().enumerate() {
                *v = coef[j * m + kx];
            }
            trig.dct2(&col_in, &mut col_hat);
            for (ky, c) in col_hat.iter_mut().enumerate() {
                *c /= shift + spec.nu * (sigma[kx + 1] + sigma[ky]);
            }
            trig.idct2(&col_hat, &mut col_out);
            for (j, &v) in col_out.iter().enumerate() {
                coef[j * m + kx] = v;
            }
        }
        for j in 0..n {
            line_in.copy_from_slice(&coef[j * m..(j + 1) * m]);
            trig.idst1(&line_in, &mut line_out);
            for (i, &v) in line_out.iter().enumerate() {
                out.x.set((i + 1) as isize, j as isize, v);
            }
        }
    }

    // y-component, mirrored.
    {
        let mut coef = vec![0.0; n * m]; // [j-1 or ky][i or kx], j interior
        let mut line_in = vec![0.0; m];
        let mut line_out = vec![0.0; m];
        for i in 0..n {
            for (j, v) in line_in.iter_mut().enumerate() {
                *v = rhs.y.at(i as isize, (j + 1) as isize);
            }
            trig.dst1(&line_in, &mut line_out);
            for (j, v) in line_out.iter().enumerate() {
                coef[j * n + i] = *v;
            }
        }
        let mut row_in = vec![0.0; n];
        let mut row_hat = vec![0.0; n];
        let mut row_out = vec![0.0; n];
        for ky in 0..m {
            row_in.copy_from_slice(&coef[ky * n..(ky + 1) * n]);
            trig.dct2(&row_in, &mut row_hat);
            for (kx, c) in row_hat.iter_mut().enumerate() {
                *c /= shift + spec.nu * (sigma[kx] + sigma[ky + 1]);
            }
            trig.idct2(&row_hat, &mut row_out);
            coef[ky * n..(ky + 1) * n].copy_from_slice(&row_out);
        }
        for i in 0..n {
            for (j, v) in line_in.iter_mut().enumerate() {
                *v = coef[j * n + i];
            }
            trig.idst1(&line_in, &mut line_out);
            for (j, &v) in line_out.iter().enumerate() {
                out.y.set(i as isize, (j + 1) as isize, v);
            }
        }
    }

    out.enforce_velocity_bc();
    out
}

/// Stencil-route application of `L_phi`, for residual checks.
pub fn apply_phase_operator(spec: &PhaseOperatorSpec, x: &CellField) -> CellField {
    let lap2 = crate::ops::laplacian_cell(&crate::ops::laplacian_cell(x));
    let mut out = CellField::lin2(1.5 / spec.tau, x, spec.epsilon * spec.epsilon, &lap2);
    out.fill_neumann_ghosts();
    out
}

/// Stencil-route application of `L_u`, for residual checks.
pub fn apply_velocity_operator(spec: &VelocityOperatorSpec, v: &MacVector) -> MacVector {
    let lap = crate::ops::laplacian_mac(v);
    MacVector::lin2(1.5 / spec.tau, v, -spec.nu, &lap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dct2(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| x[i] * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n as f64)).cos())
                    .sum()
            })
            .collect()
    }

    fn naive_dst1(x: &[f64]) -> Vec<f64> {
        let m = x.len();
        let n = m + 1;
        (1..=m)
            .map(|k| {
                (1..=m)
                    .map(|i| x[i - 1] * (PI * (k * i) as f64 / n as f64).sin())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn dct2_matches_naive_sum() {
        for n in [2, 3, 8, 13] {
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7 - 1.0).sin() + 0.3).collect();
            let mut t = Trig1d::new(n);
            let mut out = vec![0.0; n];
            t.dct2(&x, &mut out);
            let expect = naive_dct2(&x);
            for (a, b) in out.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dst1_matches_naive_sum() {
        for n in [2, 5, 16] {
            let m = n - 1;
            let x: Vec<f64> = (0..m).map(|i| (i as f64).cos() * 0.9).collect();
            let mut t = Trig1d::new(n);
            let mut out = vec![0.0; m];
            t.dst1(&x, &mut out);
            let expect = naive_dst1(&x);
            for (a, b) in out.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn transforms_round_trip() {
        for n in [4, 9, 32] {
            let x: Vec<f64> = (0..n).map(|i| ((i * i) as f64 * 0.13).sin()).collect();
            let mut t = Trig1d::new(n);
            let mut c = vec![0.0; n];
            let mut back = vec![0.0; n];
            t.dct2(&x, &mut c);
            t.idct2(&c, &mut back);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-13);
            }
            let m = n - 1;
            let xs: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5).cos()).collect();
            let mut cs = vec![0.0; m];
            let mut backs = vec![0.0; m];
            t.dst1(&xs, &mut cs);
            t.idst1(&cs, &mut backs);
            for (a, b) in xs.iter().zip(&backs) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn phase_solver_trivial_cases() {
        let grid = GridSpec::new(16);
        let spec = PhaseOperatorSpec::new(0.01, 0.1, grid).unwrap();
        let zero = CellField::zeros(grid);
        assert_eq!(solve_phase(&spec, &zero).max_abs(), 0.0);

        // Constant rhs: the biharmonic annihilates constants, so
        // X = (2 tau / 3) c.
        let c = 3.7;
        let rhs = CellField::from_fn(grid, |_, _| c);
        let x = solve_phase(&spec, &rhs);
        let expect = 2.0 * spec.tau() / 3.0 * c;
        for j in 0..16 {
            for i in 0..16 {
                assert!((x.at(i, j) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn phase_spec_rejects_nonpositive_parameters() {
        let grid = GridSpec::new(8);
        assert!(PhaseOperatorSpec::new(0.0, 0.1, grid).is_err());
        assert!(PhaseOperatorSpec::new(0.1, -1.0, grid).is_err());
        assert!(VelocityOperatorSpec::new(-0.1, 1.0, grid).is_err());
        assert!(VelocityOperatorSpec::new(0.1, 0.0, grid).is_err());
    }

    #[test]
    fn poisson_rejects_incompatible_rhs() {
        let grid = GridSpec::new(8);
        let rhs = CellField::from_fn(grid, |_, _| 0.5);
        match solve_poisson_neumann(&rhs) {
            Err(SolveError::IncompatibleRhs { mean }) => assert!((mean - 0.5).abs() < 1e-12),
            other => panic!("expected incompatible rhs, got {other:?}"),
        }
    }

    #[test]
    fn poisson_single_mode_eigenvalue() {
        let n = 12;
        let grid = GridSpec::new(n);
        let k = 4.0;
        let rhs = CellField::from_fn(grid, |x, _| (k * PI * x).cos());
        let psi = solve_poisson_neumann(&rhs).unwrap();
        let h = grid.h();
        let sigma = 4.0 / (h * h) * (k * PI * h / 2.0).sin().powi(2);
        for j in 0..n as isize {
            for i in 0..n as isize {
                assert!((psi.at(i, j) + rhs.at(i, j) / sigma).abs() < 1e-12);
            }
        }
        assert!(psi.average().abs() < 1e-13);
    }

    #[test]
    fn velocity_single_mode_eigenvalue() {
        let n = 16;
        let grid = GridSpec::new(n);
        let spec = VelocityOperatorSpec::new(0.05, 0.7, grid).unwrap();
        let (kx, ky) = (3.0, 2.0);
        let mut rhs = MacVector::zeros(grid);
        rhs.x = crate::grid::XEdgeField::from_fn(grid, |x, y| {
            (kx * PI * x).sin() * (ky * PI * y).cos()
        });
        rhs.fill_velocity_ghosts().unwrap();
        let v = solve_velocity(&spec, &rhs);
        let h = grid.h();
        let s = |k: f64| 4.0 / (h * h) * (k * PI * h / 2.0).sin().powi(2);
        let factor = 1.0 / (1.5 / spec.tau() + spec.nu() * (s(kx) + s(ky)));
        for j in 0..n as isize {
            for i in 0..=n as isize {
                assert!((v.x.at(i, j) - factor * rhs.x.at(i, j)).abs() < 1e-13);
            }
        }
        assert_eq!(v.y.max_abs(), 0.0);
    }
}
