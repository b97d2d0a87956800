//! The simulation driver: initial data, the step loop, diagnostics CSV,
//! snapshots, and invariant-violation records.

use crate::config::{InitCase, RunConfig, Startup};
use chns_core::diagnostics::{self, DiagRecord};
use chns_core::grid::{CellField, GridSpec, MacVector};
use chns_core::macf::MacfError;
use chns_core::ops;
use chns_core::scheme::{self, Params, ParamsError, SchemeError, SimState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use thiserror::Error;

pub const MASS_DRIFT_TOL: f64 = 1e-12;
pub const MAX_DIV_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("snapshot error: {0}")]
    Macf(#[from] MacfError),
    #[error("snapshot grid ({snapshot}) does not match configured n_cells ({configured})")]
    SnapshotGridMismatch { snapshot: usize, configured: usize },
    #[error("invariant violated during constituent run: {kind} = {value:.3e} at step {step} (tolerance {tolerance:.0e})")]
    InvariantViolation {
        step: u64,
        kind: &'static str,
        value: f64,
        tolerance: f64,
    },
    #[error("refinement study needs at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("refinement study needs an analytically sampled initial case (default_smooth or equilibrium)")]
    NonAnalyticInit,
}

/// One machine-readable violation record (a `violations.jsonl` line).
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub step: u64,
    pub kind: String,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub steps_run: u64,
    pub violations: Vec<Violation>,
    pub final_state: SimState,
}

impl RunOutcome {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The default smooth experiment initial phase profile.
pub fn default_smooth_phi(grid: GridSpec) -> CellField {
    CellField::from_fn(grid, |x, y| {
        let pi = std::f64::consts::PI;
        0.1 * (pi * x).cos() * (pi * y).cos() + 0.05 * (2.0 * pi * x).cos() * (3.0 * pi * y).cos()
    })
}

/// Build the initial state for a configuration.
pub fn build_initial_state(config: &RunConfig) -> Result<SimState, RunError> {
    let grid = config.params.grid();
    let state = match &config.init_case {
        InitCase::DefaultSmooth => {
            scheme::init_state(default_smooth_phi(grid), MacVector::zeros(grid))?
        }
        InitCase::Equilibrium => {
            scheme::init_state(CellField::from_fn(grid, |_, _| 1.0), MacVector::zeros(grid))?
        }
        InitCase::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut phi = diagnostics::random_cell_field(grid, &mut rng);
            phi.scale(0.5);
            let mut u = diagnostics::random_solenoidal_velocity(grid, &mut rng);
            u.x.add_scaled(-0.9, &u.x.clone());
            u.y.add_scaled(-0.9, &u.y.clone());
            scheme::init_state(phi, u)?
        }
        InitCase::FromSnapshot(path) => {
            let mut file = File::open(path)?;
            let state = scheme::read_checkpoint(&mut file)?;
            if state.grid().n() != config.params.n_cells() {
                return Err(RunError::SnapshotGridMismatch {
                    snapshot: state.grid().n(),
                    configured: config.params.n_cells(),
                });
            }
            state
        }
    };
    Ok(state)
}

/// Number of whole steps of size `tau` that fit into `t_end`.
pub fn step_count(params: &Params) -> u64 {
    (params.t_end() / params.tau() + 1e-9).floor() as u64
}

fn advance(state: &SimState, params: &Params, startup: Startup) -> Result<SimState, SchemeError> {
    if state.step_index() == 0 && startup == Startup::FirstOrderStep {
        scheme::step_first_order(state, params)
    } else {
        scheme::step(state, params)
    }
}

struct ViolationLog {
    path: std::path::PathBuf,
    writer: Option<BufWriter<File>>,
    records: Vec<Violation>,
}

impl ViolationLog {
    fn new(dir: &Path) -> Self {
        Self {
            path: dir.join("violations.jsonl"),
            writer: None,
            records: Vec::new(),
        }
    }

    fn record(&mut self, v: Violation) -> Result<(), std::io::Error> {
        if self.writer.is_none() {
            self.writer = Some(BufWriter::new(File::create(&self.path)?));
        }
        let w = self.writer.as_mut().expect("writer just created");
        serde_json::to_writer(&mut *w, &v).map_err(std::io::Error::other)?;
        writeln!(w)?;
        self.records.push(v);
        Ok(())
    }

    fn finish(mut self) -> Result<Vec<Violation>, std::io::Error> {
        if let Some(w) = self.writer.as_mut() {
            w.flush()?;
        }
        Ok(self.records)
    }
}

/// Run a configured simulation, writing `diag.csv`, optional
/// `snap_<step>.macf` checkpoints, and `violations.jsonl` on the first
/// violation. A clean run writes no violation records.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    std::fs::create_dir_all(&config.output_dir)?;
    let params = &config.params;
    let mut state = build_initial_state(config)?;

    let mut diag = BufWriter::new(File::create(config.output_dir.join("diag.csv"))?);
    writeln!(diag, "{}", DiagRecord::CSV_HEADER)?;
    let rec0 = diagnostics::record(&state, params);
    writeln!(diag, "{}", rec0.csv_row())?;
    let mass0 = rec0.mass;

    let mut log = ViolationLog::new(&config.output_dir);
    let steps = step_count(params);
    let mut steps_run = 0;

    for k in 1..=steps {
        match advance(&state, params, config.startup) {
            Ok(next) => state = next,
            Err(SchemeError::EnergyIncrease {
                step,
                before,
                after,
            }) => {
                log.record(Violation {
                    step,
                    kind: "energy_increase".into(),
                    value: after - before,
                    tolerance: scheme::ENERGY_DECAY_TOL * (1.0 + before.abs()),
                })?;
                break;
            }
            Err(e) => return Err(e.into()),
        }
        steps_run = k;

        let rec = diagnostics::record(&state, params);
        if !rec.is_finite() {
            log.record(Violation {
                step: k,
                kind: "non_finite".into(),
                value: f64::NAN,
                tolerance: 0.0,
            })?;
            break;
        }
        let drift = (rec.mass - mass0).abs();
        if drift > MASS_DRIFT_TOL {
            log.record(Violation {
                step: k,
                kind: "mass_drift".into(),
                value: drift,
                tolerance: MASS_DRIFT_TOL,
            })?;
        }
        if rec.max_div > MAX_DIV_TOL {
            log.record(Violation {
                step: k,
                kind: "divergence".into(),
                value: rec.max_div,
                tolerance: MAX_DIV_TOL,
            })?;
        }

        if k % config.diag_every == 0 || k == steps {
            writeln!(diag, "{}", rec.csv_row())?;
        }
        if config.snapshot_every > 0 && k % config.snapshot_every == 0 {
            let path = config.output_dir.join(format!("snap_{k}.macf"));
            let mut f = BufWriter::new(File::create(path)?);
            scheme::write_checkpoint(&mut f, &state)?;
            f.flush()?;
        }
    }

    diag.flush()?;
    let violations = log.finish()?;
    Ok(RunOutcome {
        steps_run,
        violations,
        final_state: state,
    })
}

/// Step a state to a fixed step count with strict invariant checking and no
/// file output; used by the refinement studies. Calls `on_sample` at the
/// listed step indices (which must be increasing) and at no other times.
pub fn simulate_sampled(
    mut state: SimState,
    params: &Params,
    steps: u64,
    startup: Startup,
    sample_steps: &[u64],
    mut on_sample: impl FnMut(&SimState),
) -> Result<SimState, RunError> {
    let mass0 = state.phi().average();
    let mut samples = sample_steps.iter().copied().peekable();
    if samples.peek() == Some(&0) {
        on_sample(&state);
        samples.next();
    }
    for k in 1..=steps {
        state = advance(&state, params, startup)?;
        let div = ops::div_mac(state.velocity()).max_abs();
        if div > MAX_DIV_TOL {
            return Err(RunError::InvariantViolation {
                step: k,
                kind: "divergence",
                value: div,
                tolerance: MAX_DIV_TOL,
            });
        }
        if samples.peek() == Some(&k) {
            on_sample(&state);
            samples.next();
        }
    }
    let drift = (state.phi().average() - mass0).abs();
    if drift > MASS_DRIFT_TOL {
        return Err(RunError::InvariantViolation {
            step: steps,
            kind: "mass_drift",
            value: drift,
            tolerance: MASS_DRIFT_TOL,
        });
    }
    if !state.phi().is_finite() || !state.velocity().is_finite() {
        return Err(RunError::InvariantViolation {
            step: steps,
            kind: "non_finite",
            value: f64::NAN,
            tolerance: 0.0,
        });
    }
    Ok(state)
}
