//! The invariant battery behind `mac-sav-zec check`: summation-by-parts
//! identities, solver residual contracts, projection orthogonality,
//! fixed-point exactness, and a self-test that proves the harness can see
//! an injected error.

use chns_core::diagnostics::{self, random_cell_field, random_velocity};
use chns_core::fastsolve::{
    apply_phase_operator, apply_velocity_operator, solve_phase, solve_poisson_neumann,
    solve_velocity, PhaseOperatorSpec, VelocityOperatorSpec,
};
use chns_core::grid::{CellField, GridSpec, MacVector};
use chns_core::ops;
use chns_core::scheme::{self, Params};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SOLVER_TOL: f64 = 1e-10;
pub const ORTHO_TOL: f64 = 1e-12;
pub const FIXED_POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CheckItem {
    pub name: String,
    pub defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckItem {
    fn new(name: String, defect: f64, tolerance: f64) -> Self {
        let pass = defect <= tolerance;
        Self {
            name,
            defect,
            tolerance,
            pass,
        }
    }
}

fn phase_residual(n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let grid = GridSpec::new(n);
    let spec = PhaseOperatorSpec::new(0.01, 0.1, grid).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let rhs = random_cell_field(grid, rng);
        let x = solve_phase(&spec, &rhs);
        let back = apply_phase_operator(&spec, &x);
        let mut res = 0.0f64;
        for j in 0..n as isize {
            for i in 0..n as isize {
                res = res.max((back.at(i, j) - rhs.at(i, j)).abs());
            }
        }
        worst = worst.max(res / (1.0 + rhs.max_abs()));
    }
    worst
}

fn velocity_residual(n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let grid = GridSpec::new(n);
    let spec = VelocityOperatorSpec::new(0.02, 1.0, grid).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let rhs = random_velocity(grid, rng);
        let v = solve_velocity(&spec, &rhs);
        let back = apply_velocity_operator(&spec, &v);
        let mut res = 0.0f64;
        for j in 0..n as isize {
            for i in 1..n as isize {
                res = res.max((back.x.at(i, j) - rhs.x.at(i, j)).abs());
            }
        }
        for j in 1..n as isize {
            for i in 0..n as isize {
                res = res.max((back.y.at(i, j) - rhs.y.at(i, j)).abs());
            }
        }
        worst = worst.max(res / (1.0 + rhs.max_abs()));
    }
    worst
}

fn poisson_residual(n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let grid = GridSpec::new(n);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let mut rhs = random_cell_field(grid, rng);
        let mean = rhs.average();
        rhs.map_interior(|v| v - mean);
        let psi = solve_poisson_neumann(&rhs).unwrap();
        let back = ops::laplacian_cell(&psi);
        let mut res = 0.0f64;
        for j in 0..n as isize {
            for i in 0..n as isize {
                res = res.max((back.at(i, j) - rhs.at(i, j)).abs());
            }
        }
        worst = worst.max(res / (1.0 + rhs.max_abs()));
    }
    worst
}

fn projection_orthogonality_defect(n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let grid = GridSpec::new(n);
    let tau = 0.01;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let u_hat = random_velocity(grid, rng);
        let (u, _) = scheme::project(&u_hat, &CellField::zeros(grid), tau).unwrap();
        let diff = MacVector::lin2(1.0, &u_hat, -1.0, &u);
        let hat_sq = ops::inner_mac(&u_hat, &u_hat);
        let l2 =
            (hat_sq - ops::inner_mac(&u, &u) - ops::inner_mac(&diff, &diff)).abs() / (1.0 + hat_sq);
        let ghat = ops::grad_norm_sq_mac(&u_hat);
        let h1 =
            (ghat - ops::grad_norm_sq_mac(&u) - ops::grad_norm_sq_mac(&diff)).abs() / (1.0 + ghat);
        worst = worst.max(l2).max(h1);
    }
    worst
}

fn fixed_point_defect(n: usize) -> f64 {
    let params = Params::new(0.1, 1.0, 1.0, 0.05, n, 1.0).unwrap();
    let grid = GridSpec::new(n);
    let mut worst = 0.0f64;
    for c in [-1.0, 0.0, 1.0] {
        let state =
            scheme::init_state(CellField::from_fn(grid, |_, _| c), MacVector::zeros(grid)).unwrap();
        let next = scheme::step(&state, &params).unwrap();
        let mut d = 0.0f64;
        for j in 0..n as isize {
            for i in 0..n as isize {
                d = d.max((next.phi().at(i, j) - c).abs());
            }
        }
        d = d
            .max(next.velocity().max_abs())
            .max((next.r() - state.r()).abs())
            .max((next.q() - 1.0).abs());
        worst = worst.max(d);
    }
    worst
}

/// Self-test: flip a sign inside the Laplacian-pairing identity and verify
/// the defect is large. A harness that cannot see this error would also
/// miss real ones.
fn injected_error_is_detected(rng: &mut ChaCha8Rng) -> bool {
    let grid = GridSpec::new(8);
    let f = random_cell_field(grid, rng);
    let wrong = ops::inner_cell(&f, &ops::laplacian_cell(&f)); // missing the minus sign
    let rhs = ops::grad_norm_sq_cell(&f);
    let defect = (wrong - rhs).abs() / rhs.abs();
    defect > diagnostics::SBP_TOL
}

/// Run the whole battery and return the table plus the overall verdict.
pub fn run_check(grid_sizes: &[usize], seed: u64) -> (Vec<CheckItem>, bool) {
    let mut items = Vec::new();
    for &n in grid_sizes {
        let grid = GridSpec::new(n);
        let report = diagnostics::check_sbp(grid, 20, seed);
        items.push(CheckItem::new(
            format!("N={n} sbp grad-orthogonality"),
            report.defect_grad_orthogonality,
            diagnostics::SBP_TOL,
        ));
        items.push(CheckItem::new(
            format!("N={n} sbp laplacian pairing (velocity)"),
            report.defect_laplacian_pairing_mac,
            diagnostics::SBP_TOL,
        ));
        items.push(CheckItem::new(
            format!("N={n} sbp laplacian pairing (cell)"),
            report.defect_laplacian_pairing_cell,
            diagnostics::SBP_TOL,
        ));
        items.push(CheckItem::new(
            format!("N={n} sbp divergence duality"),
            report.defect_divergence_duality,
            diagnostics::SBP_TOL,
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64));
        items.push(CheckItem::new(
            format!("N={n} phase solver residual"),
            phase_residual(n, &mut rng),
            SOLVER_TOL,
        ));
        items.push(CheckItem::new(
            format!("N={n} velocity solver residual"),
            velocity_residual(n, &mut rng),
            SOLVER_TOL,
        ));
        items.push(CheckItem::new(
            format!("N={n} poisson solver residual"),
            poisson_residual(n, &mut rng),
            SOLVER_TOL,
        ));
        items.push(CheckItem::new(
            format!("N={n} projection orthogonality"),
            projection_orthogonality_defect(n, &mut rng),
            ORTHO_TOL,
        ));
        items.push(CheckItem::new(
            format!("N={n} fixed points phi = -1, 0, 1"),
            fixed_point_defect(n),
            FIXED_POINT_TOL,
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let detected = injected_error_is_detected(&mut rng);
    items.push(CheckItem {
        name: "harness self-test (injected sign error detected)".into(),
        defect: if detected { 0.0 } else { 1.0 },
        tolerance: 0.5,
        pass: detected,
    });

    let all_pass = items.iter().all(|i| i.pass);
    (items, all_pass)
}

/// Render the battery as an aligned pass/fail table.
pub fn format_table(items: &[CheckItem]) -> String {
    let width = items.iter().map(|i| i.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for item in items {
        out.push_str(&format!(
            "{:<width$}  {}  defect {:.3e} (tol {:.0e})\n",
            item.name,
            if item.pass { "PASS" } else { "FAIL" },
            item.defect,
            item.tolerance,
        ));
    }
    out
}
