//! Energy functionals, conservation monitors, and the summation-by-parts
//! identity checker.

use crate::grid::{CellField, GridSpec, MacVector};
use crate::ops;
use crate::scheme::{Params, SimState};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Relative defect above which a summation-by-parts identity counts as
/// violated.
pub const SBP_TOL: f64 = 1e-12;

/// Modified (telescoping) energy evaluated on the two stored time levels:
///
/// ```text
/// E~ = eps^2/4 (||grad phi^n||^2 + ||grad (2 phi^n - phi^{n-1})||^2)
///    + 1/2 (|r^n|^2 + |2 r^n - r^{n-1}|^2)
///    + 1/4 (|q^n|^2 + |2 q^n - q^{n-1}|^2)
///    + 1/(2 lambda) ||u^n||^2 + tau^2/(3 lambda) ||grad p^n||^2
/// ```
pub fn modified_energy(state: &SimState, params: &Params) -> f64 {
    let eps2 = params.epsilon() * params.epsilon();
    let lambda = params.lambda();
    let tau = params.tau();
    let phi_look = CellField::lin2(2.0, state.phi(), -1.0, state.phi_prev());
    let grad_part = ops::grad_norm_sq_cell(state.phi()) + ops::grad_norm_sq_cell(&phi_look);
    let r = state.r();
    let r_look = 2.0 * r - state.r_prev();
    let q = state.q();
    let q_look = 2.0 * q - state.q_prev();
    eps2 / 4.0 * grad_part
        + 0.5 * (r * r + r_look * r_look)
        + 0.25 * (q * q + q_look * q_look)
        + ops::inner_mac(state.velocity(), state.velocity()) / (2.0 * lambda)
        + tau * tau / (3.0 * lambda) * ops::grad_norm_sq_cell(state.pressure())
}

/// The physical free energy
/// `<(phi^2-1)^2/4 + 1, 1>_c + eps^2/2 ||grad phi||^2 + 1/(2 lambda) ||u||^2`.
pub fn original_energy(phi: &CellField, u: &MacVector, params: &Params) -> f64 {
    let n = phi.grid().n() as isize;
    let h2 = phi.grid().h() * phi.grid().h();
    let mut bulk = crate::grid::KahanSum::default();
    for j in 0..n {
        for i in 0..n {
            let v = phi.at(i, j);
            let w = v * v - 1.0;
            bulk.add(0.25 * w * w + 1.0);
        }
    }
    bulk.value() * h2
        + 0.5 * params.epsilon() * params.epsilon() * ops::grad_norm_sq_cell(phi)
        + ops::inner_mac(u, u) / (2.0 * params.lambda())
}

/// One row of the diagnostics table.
#[derive(Debug, Clone, Copy)]
pub struct DiagRecord {
    pub step: u64,
    pub time: f64,
    pub energy_modified: f64,
    pub energy_original: f64,
    pub mass: f64,
    pub max_div: f64,
    pub r: f64,
    pub q_minus_one: f64,
    pub grad_phi_l2: f64,
}

impl DiagRecord {
    pub const CSV_HEADER: &'static str =
        "step,time,energy_modified,energy_original,mass,max_div,r,q_minus_one,grad_phi_l2";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            self.time,
            self.energy_modified,
            self.energy_original,
            self.mass,
            self.max_div,
            self.r,
            self.q_minus_one,
            self.grad_phi_l2
        )
    }

    pub fn is_finite(&self) -> bool {
        [
            self.time,
            self.energy_modified,
            self.energy_original,
            self.mass,
            self.max_div,
            self.r,
            self.q_minus_one,
            self.grad_phi_l2,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub fn record(state: &SimState, params: &Params) -> DiagRecord {
    DiagRecord {
        step: state.step_index(),
        time: state.time(),
        energy_modified: modified_energy(state, params),
        energy_original: original_energy(state.phi(), state.velocity(), params),
        mass: state.phi().average(),
        max_div: ops::div_mac(state.velocity()).max_abs(),
        r: state.r(),
        q_minus_one: state.q() - 1.0,
        grad_phi_l2: ops::grad_norm_sq_cell(state.phi()).sqrt(),
    }
}

/// Outcome of the summation-by-parts identity battery. All defects are
/// relative: each identity's residual is normalized by the magnitude of the
/// terms entering it, so rescaling the fields leaves the defect unchanged.
#[derive(Debug, Clone, Copy)]
pub struct SbpReport {
    pub grid_n: usize,
    pub trials: u32,
    /// `<u, grad f>_1 = 0` for solenoidal `u`.
    pub defect_grad_orthogonality: f64,
    /// `-<v, lap v>_1 = ||grad v||^2` on velocity fields.
    pub defect_laplacian_pairing_mac: f64,
    /// `<f, lap f>_c = -||grad f||^2` on cell fields.
    pub defect_laplacian_pairing_cell: f64,
    /// `-<g, div(f u)>_c = <u, f grad g>_1`.
    pub defect_divergence_duality: f64,
}

impl SbpReport {
    pub fn max_defect(&self) -> f64 {
        self.defect_grad_orthogonality
            .max(self.defect_laplacian_pairing_mac)
            .max(self.defect_laplacian_pairing_cell)
            .max(self.defect_divergence_duality)
    }

    pub fn pass(&self) -> bool {
        self.max_defect() <= SBP_TOL
    }
}

/// Random cell field with values in [-1, 1], ghost-filled.
pub fn random_cell_field(grid: GridSpec, rng: &mut impl Rng) -> CellField {
    let n = grid.n() as isize;
    let mut f = CellField::zeros(grid);
    for j in 0..n {
        for i in 0..n {
            f.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    f.fill_neumann_ghosts();
    f
}

/// Random velocity field: interior values in [-1, 1], boundary conditions
/// enforced. Not divergence-free.
pub fn random_velocity(grid: GridSpec, rng: &mut impl Rng) -> MacVector {
    let n = grid.n() as isize;
    let mut v = MacVector::zeros(grid);
    for j in 0..n {
        for i in 1..n {
            v.x.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    for j in 1..n {
        for i in 0..n {
            v.y.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    v.enforce_velocity_bc();
    v
}

/// Exactly solenoidal velocity with no-penetration boundary values, built
/// as the discrete curl of a random stream function on grid nodes (zero on
/// boundary nodes): `u^x = D_y psi`, `u^y = -D_x psi`.
///
/// The stream values are dyadic rationals (integers scaled by 2^-20), so
/// the node differences and the multiplication by `N` are exact; the mixed
/// second differences in `div_h u` then cancel bitwise, and the divergence
/// is zero as stored, not merely to roundoff.
pub fn random_solenoidal_velocity(grid: GridSpec, rng: &mut impl Rng) -> MacVector {
    let n = grid.n();
    let nf = n as f64;
    let quantum = (-20f64).exp2();
    // psi on (n+1) x (n+1) nodes, zero on the boundary ring.
    let mut psi = vec![0.0; (n + 1) * (n + 1)];
    for j in 1..n {
        for i in 1..n {
            psi[j * (n + 1) + i] = rng.gen_range(-(1 << 20)..=(1 << 20)) as f64 * quantum;
        }
    }
    let at = |i: usize, j: usize| psi[j * (n + 1) + i];
    let mut v = MacVector::zeros(grid);
    for j in 0..n {
        for i in 0..=n {
            v.x.set(i as isize, j as isize, (at(i, j + 1) - at(i, j)) * nf);
        }
    }
    for j in 0..=n {
        for i in 0..n {
            v.y.set(i as isize, j as isize, -(at(i + 1, j) - at(i, j)) * nf);
        }
    }
    v.enforce_velocity_bc();
    v
}

fn rel_defect(lhs: f64, rhs: f64, scale: f64) -> f64 {
    let d = (lhs - rhs).abs();
    if scale == 0.0 {
        d
    } else {
        d / scale
    }
}

/// Evaluate the three summation-by-parts identities on `trials` seeded
/// random field sets and report the worst relative defect of each.
pub fn check_sbp(grid: GridSpec, trials: u32, seed: u64) -> SbpReport {
    assert!(trials >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SbpReport {
        grid_n: grid.n(),
        trials,
        defect_grad_orthogonality: 0.0,
        defect_laplacian_pairing_mac: 0.0,
        defect_laplacian_pairing_cell: 0.0,
        defect_divergence_duality: 0.0,
    };
    for _ in 0..trials {
        let f = random_cell_field(grid, &mut rng);
        let g = random_cell_field(grid, &mut rng);
        let u = random_solenoidal_velocity(grid, &mut rng);
        let v = random_velocity(grid, &mut rng);

        let grad_f = ops::grad_cell(&f);
        let ip = ops::inner_mac(&u, &grad_f);
        let scale = ops::norm2_mac(&u) * ops::norm2_mac(&grad_f);
        report.defect_grad_orthogonality = report
            .defect_grad_orthogonality
            .max(rel_defect(ip, 0.0, scale));

        let lhs = -ops::inner_mac(&v, &ops::laplacian_mac(&v));
        let rhs = ops::grad_norm_sq_mac(&v);
        report.defect_laplacian_pairing_mac =
            report
                .defect_laplacian_pairing_mac
                .max(rel_defect(lhs, rhs, rhs.abs()));

        let lhs = ops::inner_cell(&f, &ops::laplacian_cell(&f));
        let rhs = -ops::grad_norm_sq_cell(&f);
        report.defect_laplacian_pairing_cell = report
            .defect_laplacian_pairing_cell
            .max(rel_defect(lhs, rhs, rhs.abs()));

        let lhs = -ops::inner_cell(&g, &ops::div_phi_u(&f, &u));
        let rhs = ops::inner_mac(&u, &ops::mu_grad_phi(&f, &g));
        let scale = ops::norm2_mac(&u) * ops::norm_inf_cell(&f) * ops::grad_norm_sq_cell(&g).sqrt()
            + rhs.abs();
        report.defect_divergence_duality = report
            .defect_divergence_duality
            .max(rel_defect(lhs, rhs, scale));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme;

    fn params() -> Params {
        Params::new(0.1, 1.0, 1.0, 0.01, 8, 1.0).unwrap()
    }

    #[test]
    fn modified_energy_constant_states() {
        let g = GridSpec::new(8);
        let p = params();
        // phi = 0 both levels, u = 0, p = 0, r = sqrt(1.25), q = 1.
        let state = scheme::init_state(CellField::zeros(g), MacVector::zeros(g)).unwrap();
        assert!((modified_energy(&state, &p) - 1.75).abs() < 1e-13);
        // phi = 1: r = 1 so E~ = 1 + 0.5.
        let state1 =
            scheme::init_state(CellField::from_fn(g, |_, _| 1.0), MacVector::zeros(g)).unwrap();
        assert!((modified_energy(&state1, &p) - 1.5).abs() < 1e-13);
    }

    #[test]
    fn original_energy_constant_states() {
        let g = GridSpec::new(8);
        let p = params();
        let one = CellField::from_fn(g, |_, _| 1.0);
        let zero = CellField::zeros(g);
        let u = MacVector::zeros(g);
        assert!((original_energy(&one, &u, &p) - 1.0).abs() < 1e-13);
        assert!((original_energy(&zero, &u, &p) - 1.25).abs() < 1e-13);
    }

    #[test]
    fn sbp_identities_hold_on_small_grid() {
        let report = check_sbp(GridSpec::new(8), 5, 7);
        assert!(report.pass(), "defects: {report:?}");
    }

    #[test]
    fn sbp_zero_fields_have_zero_defect() {
        // The relative-defect guard returns the absolute defect when the
        // normalization scale vanishes; zero fields must come out exactly 0.
        assert_eq!(rel_defect(0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn solenoidal_generator_is_exactly_divergence_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [4, 9, 16] {
            let u = random_solenoidal_velocity(GridSpec::new(n), &mut rng);
            assert_eq!(ops::div_mac(&u).max_abs(), 0.0);
        }
    }

    #[test]
    fn sbp_defects_are_scale_invariant() {
        let g = GridSpec::new(8);
        let seed = 11;
        let r1 = check_sbp(g, 3, seed);
        // Rebuild the same fields scaled by 1e3 by hand: the defect is
        // relative, so the report from a different seed has the same order;
        // here it suffices that defects stay at roundoff for unit fields
        // and for large fields.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = random_cell_field(g, &mut rng);
        f.scale(1e3);
        let lhs = ops::inner_cell(&f, &ops::laplacian_cell(&f));
        let rhs = -ops::grad_norm_sq_cell(&f);
        assert!(rel_defect(lhs, rhs, rhs.abs()) <= SBP_TOL);
        assert!(r1.pass());
    }

    #[test]
    fn csv_row_matches_header_arity() {
        let rec = DiagRecord {
            step: 3,
            time: 0.1,
            energy_modified: 1.0,
            energy_original: 1.0,
            mass: 0.0,
            max_div: 0.0,
            r: 1.0,
            q_minus_one: 0.0,
            grad_phi_l2: 0.0,
        };
        assert_eq!(
            rec.csv_row().split(',').count(),
            DiagRecord::CSV_HEADER.split(',').count()
        );
        assert!(rec.is_finite());
    }
}
