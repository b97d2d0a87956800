//! Staggered-grid field containers and ghost-cell conventions.
//!
//! The domain is the unit square, split into `N x N` cells of width
//! `h = 1/N`. Scalars (phase, chemical potential, pressure) live at cell
//! centers `((i+1/2)h, (j+1/2)h)`; the x-velocity lives at east-west edge
//! midpoints `(ih, (j+1/2)h)`; the y-velocity at north-south edge midpoints
//! `((i+1/2)h, jh)`.
//!
//! Every field stores one ghost layer per side in a padded array. Ghosts are
//! a pure function of the interior values and the field's boundary
//! condition: cell fields mirror across each wall (homogeneous Neumann),
//! velocity components are zero on walls they are normal to (no-penetration)
//! and mirror in the tangential direction (free-slip). Corner ghosts are
//! never read by any stencil in this crate; the accessors reject them in
//! debug builds.

use thiserror::Error;

/// Largest |normal boundary value| tolerated by [`MacVector::fill_velocity_ghosts`].
/// Anything above this signals an upstream solver bug rather than roundoff.
pub const NO_PENETRATION_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("{placement} normal boundary values must vanish (max |value| = {max_abs:.3e}, tolerance {NO_PENETRATION_TOL:.0e})")]
    NormalBoundaryViolation {
        placement: &'static str,
        max_abs: f64,
    },
}

/// Uniform `N x N` MAC mesh on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
}

impl GridSpec {
    /// A mesh with `n` cells per direction. Requires `n >= 2`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "grid needs at least 2 cells per direction");
        Self { n }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh size `h = 1/N`.
    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }
}

#[inline]
fn is_ghost(idx: isize, n: usize) -> bool {
    idx == -1 || idx == n as isize
}

/// Compensated (Kahan) summation. The grid reductions promise accuracy near
/// machine epsilon independent of N, which naive accumulation cannot give.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Scalar field at cell centers; entry `(i, j)` holds the value at
/// `((i+1/2)h, (j+1/2)h)` for `0 <= i, j < N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: GridSpec,
    /// `(N+2) x (N+2)` padded storage, row-major with `j` slow.
    data: Vec<f64>,
}

impl CellField {
    pub fn zeros(grid: GridSpec) -> Self {
        let s = grid.n() + 2;
        Self {
            grid,
            data: vec![0.0; s * s],
        }
    }

    /// Sample `f(x, y)` at every cell center and fill ghosts.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let h = grid.h();
        let mut out = Self::zeros(grid);
        for j in 0..n {
            for i in 0..n {
                let x = (i as f64 + 0.5) * h;
                let y = (j as f64 + 0.5) * h;
                out.set(i as isize, j as isize, f(x, y));
            }
        }
        out.fill_neumann_ghosts();
        out
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    fn idx(&self, i: isize, j: isize) -> usize {
        let n = self.grid.n();
        debug_assert!(i >= -1 && i <= n as isize && j >= -1 && j <= n as isize);
        // Corner ghosts are outside every stencil's reach; touching one is a bug.
        debug_assert!(
            !(is_ghost(i, n) && is_ghost(j, n)),
            "corner ghost ({i}, {j}) accessed"
        );
        (j + 1) as usize * (n + 2) + (i + 1) as usize
    }

    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Mirror the adjacent interior value into every side ghost:
    /// `f(-1, j) = f(0, j)` and so on. Idempotent.
    pub fn fill_neumann_ghosts(&mut self) {
        let n = self.grid.n() as isize;
        for j in 0..n {
            let left = self.at(0, j);
            let right = self.at(n - 1, j);
            self.set(-1, j, left);
            self.set(n, j, right);
        }
        for i in 0..n {
            let bottom = self.at(i, 0);
            let top = self.at(i, n - 1);
            self.set(i, -1, bottom);
            self.set(i, n, top);
        }
    }

    /// Discrete average `<f, 1>_c = h^2 * sum` over all cells.
    pub fn average(&self) -> f64 {
        let n = self.grid.n() as isize;
        let h = self.grid.h();
        let mut sum = KahanSum::default();
        for j in 0..n {
            for i in 0..n {
                sum.add(self.at(i, j));
            }
        }
        sum.value() * h * h
    }

    /// Apply `g` to every interior value, then refill ghosts.
    pub fn map_interior(&mut self, g: impl Fn(f64) -> f64) {
        let n = self.grid.n() as isize;
        for j in 0..n {
            for i in 0..n {
                self.set(i, j, g(self.at(i, j)));
            }
        }
        self.fill_neumann_ghosts();
    }

    /// `a*f + b*g` as a fresh field. Linear combinations commute with the
    /// mirror fill, so the whole padded storage is combined directly.
    pub fn lin2(a: f64, f: &Self, b: f64, g: &Self) -> Self {
        assert_eq!(f.grid, g.grid);
        let mut out = Self::zeros(f.grid);
        for (o, (x, y)) in out.data.iter_mut().zip(f.data.iter().zip(&g.data)) {
            *o = a * x + b * y;
        }
        out
    }

    pub fn add_scaled(&mut self, a: f64, g: &Self) {
        assert_eq!(self.grid, g.grid);
        for (x, y) in self.data.iter_mut().zip(&g.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in self.data.iter_mut() {
            *x *= a;
        }
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.grid.n() as isize;
        let mut m: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                m = m.max(self.at(i, j).abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        let n = self.grid.n() as isize;
        for j in 0..n {
            for i in 0..n {
                if !self.at(i, j).is_finite() {
                    return false;
                }
            }
        }
        true
    }

    /// Interior values in row-major order (`j` outer), as serialized.
    pub fn interior_values(&self) -> Vec<f64> {
        let n = self.grid.n() as isize;
        let mut out = Vec::with_capacity((n * n) as usize);
        for j in 0..n {
            for i in 0..n {
                out.push(self.at(i, j));
            }
        }
        out
    }

    pub fn from_interior_values(grid: GridSpec, values: &[f64]) -> Self {
        let n = grid.n();
        assert_eq!(values.len(), n * n);
        let mut out = Self::zeros(grid);
        for j in 0..n {
            for i in 0..n {
                out.set(i as isize, j as isize, values[j * n + i]);
            }
        }
        out.fill_neumann_ghosts();
        out
    }

    /// Raw padded storage, for bitwise comparisons in tests.
    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

/// x-velocity placement: `(N+1) x N` values, entry `(i, j)` at
/// `(ih, (j+1/2)h)` for `0 <= i <= N`, `0 <= j < N`. Tangential (y) ghosts
/// only; the normal direction stores its boundary lines directly.
#[derive(Debug, Clone, PartialEq)]
pub struct XEdgeField {
    grid: GridSpec,
    /// `(N+1) x (N+2)` padded storage, `j` slow.
    data: Vec<f64>,
}

impl XEdgeField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.n();
        Self {
            grid,
            data: vec![0.0; (n + 1) * (n + 2)],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let h = grid.h();
        let mut out = Self::zeros(grid);
        for j in 0..n {
            for i in 0..=n {
                let x = i as f64 * h;
                let y = (j as f64 + 0.5) * h;
                out.set(i as isize, j as isize, f(x, y));
            }
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    fn idx(&self, i: isize, j: isize) -> usize {
        let n = self.grid.n();
        debug_assert!(i >= 0 && i <= n as isize, "x index {i} out of range");
        debug_assert!(j >= -1 && j <= n as isize, "y index {j} out of range");
        (j + 1) as usize * (n + 1) + i as usize
    }

    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    fn max_abs_normal_boundary(&self) -> f64 {
        let n = self.grid.n() as isize;
        let mut m: f64 = 0.0;
        for j in 0..n {
            m = m.max(self.at(0, j).abs()).max(self.at(n, j).abs());
        }
        m
    }

    /// Zero the normal boundary lines and mirror tangential ghosts,
    /// without validating the caller's boundary values.
    pub(crate) fn enforce_velocity_bc(&mut self) {
        let n = self.grid.n() as isize;
        for j in 0..n {
            self.set(0, j, 0.0);
            self.set(n, j, 0.0);
        }
        for i in 0..=n {
            let bottom = self.at(i, 0);
            let top = self.at(i, n - 1);
            self.set(i, -1, bottom);
            self.set(i, n, top);
        }
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.grid.n() as isize;
        let mut m: f64 = 0.0;
        for j in 0..n {
            for i in 0..=n {
                m = m.max(self.at(i, j).abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        let n = self.grid.n() as isize;
        for j in 0..n {
            for i in 0..=n {
                if !self.at(i, j).is_finite() {
                    return false;
                }
            }
        }
        true
    }

    pub fn lin2(a: f64, f: &Self, b: f64, g: &Self) -> Self {
        assert_eq!(f.grid, g.grid);
        let mut out = Self::zeros(f.grid);
        for (o, (x, y)) in out.data.iter_mut().zip(f.data.iter().zip(&g.data)) {
            *o = a * x + b * y;
        }
        out
    }

    pub fn add_scaled(&mut self, a: f64, g: &Self) {
        assert_eq!(self.grid, g.grid);
        for (x, y) in self.data.iter_mut().zip(&g.data) {
            *x += a * y;
        }
    }

    pub fn interior_values(&self) -> Vec<f64> {
        let n = self.grid.n() as isize;
        let mut out = Vec::with_capacity(((n + 1) * n) as usize);
        for j in 0..n {
            for i in 0..=n {
                out.push(self.at(i, j));
            }
        }
        out
    }

    pub fn from_interior_values(grid: GridSpec, values: &[f64]) -> Self {
        let n = grid.n();
        assert_eq!(values.len(), (n + 1) * n);
        let mut out = Self::zeros(grid);
        for j in 0..n {
            for i in 0..=n {
                out.set(i as isize, j as isize, values[j * (n + 1) + i]);
            }
        }
        out
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

/// y-velocity placement: `N x (N+1)` values, entry `(i, j)` at
/// `((i+1/2)h, jh)` for `0 <= i < N`, `0 <= j <= N`. Tangential (x) ghosts
/// only.
#[derive(Debug, Clone, PartialEq)]
pub struct YEdgeField {
    grid: GridSpec,
    /// `(N+2) x (N+1)` padded storage, `j` slow.
    data: Vec<f64>,
}

impl YEdgeField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.n();
        Self {
            grid,
            data: vec![0.0; (n + 2) * (n + 1)],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let h = grid.h();
        let mut out = Self::zeros(grid);
        for j in 0..=n {
            for i in 0..n {
                let x = (i as f64 + 0.5) * h;
                let y = j as f64 * h;
                out.set(i as isize, j as isize, f(x, y));
            }
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    fn idx(&self, i: isize, j: isize) -> usize {
        let n = self.grid.n();
        debug_assert!(i >= -1 && i <= n as isize, "x index {i} out of range");
        debug_assert!(j >= 0 && j <= n as isize, "y index {j} out of range");
        j as usize * (n + 2) + (i + 1) as usize
    }

    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    fn max_abs_normal_boundary(&self) -> f64 {
        let n = self.grid.n() as isize;
        let mut m: f64 = 0.0;
        for i in 0..n {
            m = m.max(self.at(i, 0).abs()).max(self.at(i, n).abs());
        }
        m
    }

    pub(crate) fn enforce_velocity_bc(&mut self) {
        let n = self.grid.n() as isize;
        for i in 0..n {
            self.set(i, 0, 0.0);
            self.set(i, n, 0.0);
        }
        for j in 0..=n {
            let left = self.at(0, j);
            let right = self.at(n - 1, j);
            self.set(-1, j, left);
            self.set(n, j, right);
        }
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.grid.n() as isize;
        let mut m: f64 = 0.0;
        for j in 0..=n {
            for i in 0..n {
                m = m.max(self.at(i, j).abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        let n = self.grid.n() as isize;
        for j in 0..=n {
            for i in 0..n {
                if !self.at(i, j).is_finite() {
                    return false;
                }
            }
        }
        true
    }

    pub fn lin2(a: f64, f: &Self, b: f64, g: &Self) -> Self {
        assert_eq!(f.grid, g.grid);
        let mut out = Self::zeros(f.grid);
        for (o, (x, y)) in out.data.iter_mut().zip(f.data.iter().zip(&g.data)) {
            *o = a * x + b * y;
        }
        out
    }

    pub fn add_scaled(&mut self, a: f64, g: &Self) {
        assert_eq!(self.grid, g.grid);
        for (x, y) in self.data.iter_mut().zip(&g.data) {
            *x += a * y;
        }
    }

    pub fn interior_values(&self) -> Vec<f64> {
        let n = self.grid.n() as isize;
        let mut out = Vec::with_capacity((n * (n + 1)) as usize);
        for j in 0..=n {
            for i in 0..n {
                out.push(self.at(i, j));
            }
        }
        out
    }

    pub fn from_interior_values(grid: GridSpec, values: &[f64]) -> Self {
        let n = grid.n();
        assert_eq!(values.len(), n * (n + 1));
        let mut out = Self::zeros(grid);
        for j in 0..=n {
            for i in 0..n {
                out.set(i as isize, j as isize, values[j * n + i]);
            }
        }
        out
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

/// Staggered velocity pair `(u^x, u^y)` sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MacVector {
    pub x: XEdgeField,
    pub y: YEdgeField,
}

impl MacVector {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            x: XEdgeField::zeros(grid),
            y: YEdgeField::zeros(grid),
        }
    }

    pub fn new(x: XEdgeField, y: YEdgeField) -> Self {
        assert_eq!(x.grid, y.grid, "components must share one grid");
        Self { x, y }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.x.grid
    }

    /// Enforce the discrete velocity boundary conditions: normal components
    /// zero on their walls, tangential ghosts mirrored. Errors if the
    /// caller-supplied normal boundary values exceed [`NO_PENETRATION_TOL`];
    /// values below it are snapped to exact zero. Idempotent.
    pub fn fill_velocity_ghosts(&mut self) -> Result<(), GridError> {
        let mx = self.x.max_abs_normal_boundary();
        if mx > NO_PENETRATION_TOL {
            return Err(GridError::NormalBoundaryViolation {
                placement: "x-edge",
                max_abs: mx,
            });
        }
        let my = self.y.max_abs_normal_boundary();
        if my > NO_PENETRATION_TOL {
            return Err(GridError::NormalBoundaryViolation {
                placement: "y-edge",
                max_abs: my,
            });
        }
        self.x.enforce_velocity_bc();
        self.y.enforce_velocity_bc();
        Ok(())
    }

    pub(crate) fn enforce_velocity_bc(&mut self) {
        self.x.enforce_velocity_bc();
        self.y.enforce_velocity_bc();
    }

    pub fn lin2(a: f64, f: &Self, b: f64, g: &Self) -> Self {
        Self {
            x: XEdgeField::lin2(a, &f.x, b, &g.x),
            y: YEdgeField::lin2(a, &f.y, b, &g.y),
        }
    }

    pub fn add_scaled(&mut self, a: f64, g: &Self) {
        self.x.add_scaled(a, &g.x);
        self.y.add_scaled(a, &g.y);
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}
