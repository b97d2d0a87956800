//! The BDF2 SAV-ZEC time stepper.
//!
//! One step advances `(phi, u, p, r, q)` as follows. Star profiles
//! (`phi* = 2 phi^n - phi^{n-1}`, likewise `u*`) carry every nonlinear term
//! explicitly. The coupled update for `(phi^{n+1}, u_hat^{n+1}, r^{n+1},
//! q^{n+1})` is linear, and because `r^{n+1}` and `q^{n+1}` are scalars it
//! splits by superposition:
//!
//! - `phi^{n+1} = phi_0 + r^{n+1} phi_r + q^{n+1} phi_q`, each part solving
//!   `L_phi x = g` with `L_phi = 3/(2 tau) + eps^2 lap_h^2`;
//! - `u_hat^{n+1} = u_hat_0 + q^{n+1} u_hat_q`, each part solving
//!   `L_u v = f` with `L_u = 3/(2 tau) - nu lap_h`;
//! - substituting these expansions into the two scalar equations (the SAV
//!   relation for `r` and the zero-energy-contribution relation for `q`)
//!   leaves a 2x2 linear system, solved directly.
//!
//! A pressure-correction projection then restores discrete
//! divergence-freedom: `lap_h dp = (3/(2 tau)) div_h u_hat` with Neumann
//! boundary and zero mean, `u^{n+1} = u_hat - (2 tau / 3) grad_h dp`,
//! `p^{n+1} = p^n + dp`.
//!
//! Every step is checked against the modified-energy decay law; an increase
//! beyond roundoff tolerance is reported as an error rather than silently
//! accepted.

use crate::diagnostics;
use crate::fastsolve::{self, PhaseOperatorSpec, SolveError, VelocityOperatorSpec};
use crate::grid::{CellField, GridError, GridSpec, MacVector};
use crate::macf::{self, MacfError};
use crate::ops;
use std::io::{Read, Write};
use thiserror::Error;

/// Per-step relative tolerance on the modified-energy decay check.
pub const ENERGY_DECAY_TOL: f64 = 1e-10;

/// Largest discrete divergence accepted for an initial velocity.
pub const INIT_DIV_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("scalar closure is singular: |det| = {det:.3e} < 1e-12 * ||A|| = {scale:.3e} at tau = {tau}")]
    SingularClosure { det: f64, scale: f64, tau: f64 },
    #[error("modified energy increased at step {step}: {before} -> {after} (tolerance {ENERGY_DECAY_TOL:.0e} relative)")]
    EnergyIncrease { step: u64, before: f64, after: f64 },
    #[error("initial velocity is not discretely divergence-free: max |div u| = {max_div:.3e}")]
    NonSolenoidalInit { max_div: f64 },
    #[error("{what} contains a non-finite value")]
    NonFinite { what: &'static str },
}

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("n_cells must be at least 2, got {0}")]
    GridTooSmall(usize),
}

/// Physical and numerical parameters, read-only after construction.
#[derive(Debug, Clone, Copy)]
pub struct Params {
    epsilon: f64,
    nu: f64,
    lambda: f64,
    tau: f64,
    n_cells: usize,
    t_end: f64,
}

impl Params {
    pub fn new(
        epsilon: f64,
        nu: f64,
        lambda: f64,
        tau: f64,
        n_cells: usize,
        t_end: f64,
    ) -> Result<Self, ParamsError> {
        for (name, value) in [
            ("epsilon", epsilon),
            ("nu", nu),
            ("lambda", lambda),
            ("tau", tau),
            ("t_end", t_end),
        ] {
            if value <= 0.0 || value.is_nan() {
                return Err(ParamsError::NonPositive { name, value });
            }
        }
        if n_cells < 2 {
            return Err(ParamsError::GridTooSmall(n_cells));
        }
        Ok(Self {
            epsilon,
            nu,
            lambda,
            tau,
            n_cells,
            t_end,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.n_cells)
    }

    /// Same parameters with a different time step.
    pub fn with_tau(&self, tau: f64) -> Result<Self, ParamsError> {
        Self::new(
            self.epsilon,
            self.nu,
            self.lambda,
            tau,
            self.n_cells,
            self.t_end,
        )
    }

    /// Same parameters on a different grid.
    pub fn with_n_cells(&self, n_cells: usize) -> Result<Self, ParamsError> {
        Self::new(
            self.epsilon,
            self.nu,
            self.lambda,
            self.tau,
            n_cells,
            self.t_end,
        )
    }
}

/// Two time levels of the discrete solution plus the auxiliary scalars.
#[derive(Debug, Clone)]
pub struct SimState {
    pub(crate) phi_n: CellField,
    pub(crate) phi_nm1: CellField,
    pub(crate) u_n: MacVector,
    pub(crate) u_nm1: MacVector,
    pub(crate) p_n: CellField,
    pub(crate) r_n: f64,
    pub(crate) r_nm1: f64,
    pub(crate) q_n: f64,
    pub(crate) q_nm1: f64,
    pub(crate) step: u64,
    pub(crate) time: f64,
}

impl SimState {
    pub fn grid(&self) -> GridSpec {
        self.phi_n.grid()
    }

    pub fn phi(&self) -> &CellField {
        &self.phi_n
    }

    pub fn phi_prev(&self) -> &CellField {
        &self.phi_nm1
    }

    pub fn velocity(&self) -> &MacVector {
        &self.u_n
    }

    pub fn velocity_prev(&self) -> &MacVector {
        &self.u_nm1
    }

    pub fn pressure(&self) -> &CellField {
        &self.p_n
    }

    pub fn r(&self) -> f64 {
        self.r_n
    }

    pub fn r_prev(&self) -> f64 {
        self.r_nm1
    }

    pub fn q(&self) -> f64 {
        self.q_n
    }

    pub fn q_prev(&self) -> f64 {
        self.q_nm1
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// Shifted double-well energy `E_{1,h}(phi) = <phi^4/4 - phi^2/2 + 5/4, 1>_c`.
/// Bounded below by the domain area, so the SAV square root is always safe.
pub fn compute_e1h(phi: &CellField) -> f64 {
    let n = phi.grid().n() as isize;
    let h2 = phi.grid().h() * phi.grid().h();
    let mut sum = crate::grid::KahanSum::default();
    for j in 0..n {
        for i in 0..n {
            let v = phi.at(i, j);
            let v2 = v * v;
            sum.add(0.25 * v2 * v2 - 0.5 * v2 + 1.25);
        }
    }
    sum.value() * h2
}

/// Build the level-0 state: `r = sqrt(E_{1,h}(phi))`, `q = 1`, `p = 0`, and
/// the fictitious level -1 copied from level 0.
pub fn init_state(phi0: CellField, mut u0: MacVector) -> Result<SimState, SchemeError> {
    if !phi0.is_finite() {
        return Err(SchemeError::NonFinite { what: "phi0" });
    }
    if !u0.is_finite() {
        return Err(SchemeError::NonFinite { what: "u0" });
    }
    u0.fill_velocity_ghosts()?;
    let max_div = ops::div_mac(&u0).max_abs();
    if max_div > INIT_DIV_TOL {
        return Err(SchemeError::NonSolenoidalInit { max_div });
    }
    let mut phi0 = phi0;
    phi0.fill_neumann_ghosts();
    let r0 = compute_e1h(&phi0).sqrt();
    let grid = phi0.grid();
    Ok(SimState {
        phi_nm1: phi0.clone(),
        phi_n: phi0,
        u_nm1: u0.clone(),
        u_n: u0,
        p_n: CellField::zeros(grid),
        r_n: r0,
        r_nm1: r0,
        q_n: 1.0,
        q_nm1: 1.0,
        step: 0,
        time: 0.0,
    })
}

/// Star (extrapolated) profiles and derived quantities for one step.
#[derive(Debug, Clone)]
pub struct StepWork {
    pub phi_star: CellField,
    pub u_star: MacVector,
    /// `mu_tilde* = (phi*)^3 - phi* - eps^2 lap_h phi*`.
    pub mu_tilde_star: CellField,
    /// `((phi*)^3 - phi*) / sqrt(E_{1,h}(phi*))`.
    pub b_star: CellField,
    pub e1h_star: f64,
}

/// Time-discretization coefficients. The difference quotient is
/// `(lead f^{n+1} - hist1 f^n + hist2 f^{n-1}) / tau` and the star profile
/// is `star1 f^n + star2 f^{n-1}`.
#[derive(Debug, Clone, Copy)]
struct BdfCoeffs {
    lead: f64,
    hist1: f64,
    hist2: f64,
    star1: f64,
    star2: f64,
}

const BDF2: BdfCoeffs = BdfCoeffs {
    lead: 1.5,
    hist1: 2.0,
    hist2: 0.5,
    star1: 2.0,
    star2: -1.0,
};

const BDF1: BdfCoeffs = BdfCoeffs {
    lead: 1.0,
    hist1: 1.0,
    hist2: 0.0,
    star1: 1.0,
    star2: 0.0,
};

fn assemble_star_with(
    state: &SimState,
    params: &Params,
    coeffs: BdfCoeffs,
) -> Result<StepWork, SchemeError> {
    let phi_star = CellField::lin2(coeffs.star1, &state.phi_n, coeffs.star2, &state.phi_nm1);
    let u_star = MacVector::lin2(coeffs.star1, &state.u_n, coeffs.star2, &state.u_nm1);
    if !phi_star.is_finite() {
        return Err(SchemeError::NonFinite { what: "phi*" });
    }
    if !u_star.is_finite() {
        return Err(SchemeError::NonFinite { what: "u*" });
    }
    let e1h_star = compute_e1h(&phi_star);
    debug_assert!(e1h_star >= 1.0);
    let mut cubic = phi_star.clone();
    cubic.map_interior(|v| v * v * v - v);
    let lap = ops::laplacian_cell(&phi_star);
    let eps2 = params.epsilon * params.epsilon;
    let mu_tilde_star = CellField::lin2(1.0, &cubic, -eps2, &lap);
    let mut b_star = cubic;
    b_star.scale(1.0 / e1h_star.sqrt());
    Ok(StepWork {
        phi_star,
        u_star,
        mu_tilde_star,
        b_star,
        e1h_star,
    })
}

/// Star profiles for the BDF2 step: `phi* = 2 phi^n - phi^{n-1}` etc.
pub fn assemble_star(state: &SimState, params: &Params) -> Result<StepWork, SchemeError> {
    assemble_star_with(state, params, BDF2)
}

/// Output of the coupled solve, before projection.
#[derive(Debug, Clone)]
pub struct CoupledSolution {
    pub phi: CellField,
    pub u_hat: MacVector,
    pub r: f64,
    pub q: f64,
    /// `mu_tilde^{n+1} = r^{n+1} b* - eps^2 lap_h phi^{n+1}`.
    pub mu_tilde: CellField,
}

fn solve_coupled_with(
    state: &SimState,
    work: &StepWork,
    params: &Params,
    coeffs: BdfCoeffs,
) -> Result<CoupledSolution, SchemeError> {
    let grid = state.grid();
    let tau = params.tau;
    let eps2 = params.epsilon * params.epsilon;
    let lambda = params.lambda;
    // The fast solvers are parameterized by the BDF2 shift 3/(2 tau');
    // an adjusted tau' reproduces the general lead / tau.
    let tau_eff = 1.5 * tau / coeffs.lead;
    let phase = PhaseOperatorSpec::new(tau_eff, params.epsilon, grid)?;
    let velocity = VelocityOperatorSpec::new(tau_eff, params.nu, grid)?;

    // Phase superposition parts.
    let w = ops::div_phi_u(&work.phi_star, &work.u_star);
    let g0 = CellField::lin2(
        coeffs.hist1 / tau,
        &state.phi_n,
        -coeffs.hist2 / tau,
        &state.phi_nm1,
    );
    let lap_b = ops::laplacian_cell(&work.b_star);
    let mut neg_w = w.clone();
    neg_w.scale(-1.0);
    let phi_0 = fastsolve::solve_phase(&phase, &g0);
    let phi_r = fastsolve::solve_phase(&phase, &lap_b);
    let phi_q = fastsolve::solve_phase(&phase, &neg_w);

    // Chemical-potential parts: mu_tilde = m0 + r m_r + q m_q.
    let mut m0 = ops::laplacian_cell(&phi_0);
    m0.scale(-eps2);
    let m_r = CellField::lin2(1.0, &work.b_star, -eps2, &ops::laplacian_cell(&phi_r));
    let mut m_q = ops::laplacian_cell(&phi_q);
    m_q.scale(-eps2);

    // Velocity superposition parts.
    let grad_p = ops::grad_cell(&state.p_n);
    let mut f0 = MacVector::lin2(
        coeffs.hist1 / tau,
        &state.u_n,
        -coeffs.hist2 / tau,
        &state.u_nm1,
    );
    f0.add_scaled(-1.0, &grad_p);
    let s = ops::mu_grad_phi(&work.mu_tilde_star, &work.phi_star);
    let a = ops::advect_velocity(&work.u_star, &work.u_star);
    let f_q = MacVector::lin2(lambda, &s, -1.0, &a);
    let u_hat_0 = fastsolve::solve_velocity(&velocity, &f0);
    let u_hat_q = fastsolve::solve_velocity(&velocity, &f_q);

    // 2x2 closure. The r-row comes from the SAV relation with the tau
    // cleared on both sides; the q-row keeps an explicit tau factor on the
    // inner products, applied symbolically here so small tau cannot
    // cancel catastrophically.
    let lead = coeffs.lead;
    let b = &work.b_star;
    let a11 = lead - 0.5 * lead * ops::inner_cell(b, &phi_r);
    let a12 = -0.5 * lead * ops::inner_cell(b, &phi_q);
    let phi_hist = CellField::lin2(
        lead,
        &phi_0,
        1.0,
        &CellField::lin2(-coeffs.hist1, &state.phi_n, coeffs.hist2, &state.phi_nm1),
    );
    let c1 =
        coeffs.hist1 * state.r_n - coeffs.hist2 * state.r_nm1 + 0.5 * ops::inner_cell(b, &phi_hist);

    let a21 = -tau * ops::inner_cell(&w, &m_r);
    let a22 = lead
        - tau
            * (ops::inner_cell(&w, &m_q) - ops::inner_mac(&s, &u_hat_q)
                + ops::inner_mac(&a, &u_hat_q) / lambda);
    let c2 = coeffs.hist1 * state.q_n - coeffs.hist2 * state.q_nm1
        + tau
            * (ops::inner_cell(&w, &m0) - ops::inner_mac(&s, &u_hat_0)
                + ops::inner_mac(&a, &u_hat_0) / lambda);

    let det = a11 * a22 - a12 * a21;
    let scale = (a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22).sqrt();
    if det.abs() < 1e-12 * scale {
        return Err(SchemeError::SingularClosure {
            det,
            scale: 1e-12 * scale,
            tau,
        });
    }
    let r = (c1 * a22 - c2 * a12) / det;
    let q = (c2 * a11 - c1 * a21) / det;

    let mut phi = phi_0;
    phi.add_scaled(r, &phi_r);
    phi.add_scaled(q, &phi_q);
    let mut u_hat = u_hat_0;
    u_hat.add_scaled(q, &u_hat_q);
    let mut mu_tilde = b.clone();
    mu_tilde.scale(r);
    mu_tilde.add_scaled(-eps2, &ops::laplacian_cell(&phi));

    Ok(CoupledSolution {
        phi,
        u_hat,
        r,
        q,
        mu_tilde,
    })
}

/// Superposition solve of the coupled `(phi, u_hat, r, q)` system for the
/// BDF2 step.
pub fn solve_coupled(
    state: &SimState,
    work: &StepWork,
    params: &Params,
) -> Result<CoupledSolution, SchemeError> {
    solve_coupled_with(state, work, params, BDF2)
}

fn project_with(
    u_hat: &MacVector,
    p_n: &CellField,
    tau: f64,
    lead: f64,
) -> Result<(MacVector, CellField), SchemeError> {
    let mut rhs = ops::div_mac(u_hat);
    rhs.scale(lead / tau);
    let dp = fastsolve::solve_poisson_neumann(&rhs)?;
    let grad_dp = ops::grad_cell(&dp);
    let mut u = u_hat.clone();
    u.add_scaled(-tau / lead, &grad_dp);
    // The pressure gradient vanishes on boundary edges, so no-penetration
    // survives the correction exactly.
    u.enforce_velocity_bc();
    let mut p = p_n.clone();
    p.add_scaled(1.0, &dp);
    p.fill_neumann_ghosts();
    Ok((u, p))
}

/// Pressure-correction projection: solve
/// `lap_h dp = (3/(2 tau)) div_h u_hat` (Neumann, zero mean), then
/// `u^{n+1} = u_hat - (2 tau / 3) grad_h dp` and `p^{n+1} = p^n + dp`.
pub fn project(
    u_hat: &MacVector,
    p_n: &CellField,
    tau: f64,
) -> Result<(MacVector, CellField), SchemeError> {
    project_with(u_hat, p_n, tau, BDF2.lead)
}

fn step_with(
    state: &SimState,
    params: &Params,
    coeffs: BdfCoeffs,
    check_energy: bool,
) -> Result<SimState, SchemeError> {
    let work = assemble_star_with(state, params, coeffs)?;
    let sol = solve_coupled_with(state, &work, params, coeffs)?;
    let (u_new, p_new) = project_with(&sol.u_hat, &state.p_n, params.tau, coeffs.lead)?;

    let next = SimState {
        phi_nm1: state.phi_n.clone(),
        phi_n: sol.phi,
        u_nm1: state.u_n.clone(),
        u_n: u_new,
        p_n: p_new,
        r_nm1: state.r_n,
        r_n: sol.r,
        q_nm1: state.q_n,
        q_n: sol.q,
        step: state.step + 1,
        time: state.time + params.tau,
    };

    if check_energy {
        let before = diagnostics::modified_energy(state, params);
        let after = diagnostics::modified_energy(&next, params);
        if after > before + ENERGY_DECAY_TOL * (1.0 + before.abs()) {
            return Err(SchemeError::EnergyIncrease {
                step: next.step,
                before,
                after,
            });
        }
    }
    Ok(next)
}

/// Advance one BDF2 step. The returned state conserves the phase average,
/// is discretely divergence-free, and does not increase the modified
/// energy; a violation of the energy law is reported as an error.
pub fn step(state: &SimState, params: &Params) -> Result<SimState, SchemeError> {
    step_with(state, params, BDF2, true)
}

/// One first-order (backward Euler) SAV-ZEC step, offered as an alternative
/// startup for the first step instead of copying level 0 into level -1.
/// The BDF2 energy law does not apply across this step, so no decay check
/// is made here.
pub fn step_first_order(state: &SimState, params: &Params) -> Result<SimState, SchemeError> {
    step_with(state, params, BDF1, false)
}

// Checkpoint format: a little-endian header (u64 N, u64 step, f64 time,
// f64 r^n, f64 r^{n-1}, f64 q^n, f64 q^{n-1}) followed by MACF blocks for
// phi^n, phi^{n-1}, u^n_x, u^n_y, p^n, u^{n-1}_x, u^{n-1}_y.

pub fn write_checkpoint(w: &mut impl Write, state: &SimState) -> Result<(), MacfError> {
    let n = state.grid().n() as u64;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&state.step.to_le_bytes())?;
    for v in [state.time, state.r_n, state.r_nm1, state.q_n, state.q_nm1] {
        w.write_all(&v.to_le_bytes())?;
    }
    macf::write_cell(w, &state.phi_n)?;
    macf::write_cell(w, &state.phi_nm1)?;
    macf::write_x_edge(w, &state.u_n.x)?;
    macf::write_y_edge(w, &state.u_n.y)?;
    macf::write_cell(w, &state.p_n)?;
    macf::write_x_edge(w, &state.u_nm1.x)?;
    macf::write_y_edge(w, &state.u_nm1.y)?;
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<SimState, MacfError> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8);
    if n < 2 || n > macf::MAX_GRID as u64 {
        return Err(MacfError::BadGridSize(n));
    }
    let n = n as usize;
    r.read_exact(&mut b8)?;
    let step = u64::from_le_bytes(b8);
    let mut scalars = [0.0f64; 5];
    for v in scalars.iter_mut() {
        r.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    let phi_n = macf::read_cell(r)?;
    let phi_nm1 = macf::read_cell(r)?;
    let unx = macf::read_x_edge(r)?;
    let uny = macf::read_y_edge(r)?;
    let p_n = macf::read_cell(r)?;
    let umx = macf::read_x_edge(r)?;
    let umy = macf::read_y_edge(r)?;
    for got in [
        phi_n.grid().n(),
        phi_nm1.grid().n(),
        unx.grid().n(),
        uny.grid().n(),
        p_n.grid().n(),
        umx.grid().n(),
        umy.grid().n(),
    ] {
        if got != n {
            return Err(MacfError::GridMismatch { got, expected: n });
        }
    }
    let mut u_n = MacVector::new(unx, uny);
    let mut u_nm1 = MacVector::new(umx, umy);
    u_n.enforce_velocity_bc();
    u_nm1.enforce_velocity_bc();
    Ok(SimState {
        phi_n,
        phi_nm1,
        u_n,
        u_nm1,
        p_n,
        r_n: scalars[1],
        r_nm1: scalars[2],
        q_n: scalars[3],
        q_nm1: scalars[4],
        step,
        time: scalars[0],
    })
}
