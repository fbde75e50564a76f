//! Time-domain solver for the variable-coefficient damped wave equation with
//! dynamic boundary conditions.
//!
//! Space is discretized by [`SemiDiscrete`]; time by the implicit midpoint
//! rule, which is second order and turns the exact semi-discrete energy
//! identity into `E^{n+1} - E^n = -dt Q(U^{n+1/2})`. Every step is a
//! tridiagonal solve with a factorization computed once per run.

use serde::{Deserialize, Serialize};

use crate::banded::{BandError, BandLu, BandMatrix};
use crate::energy::{self, EnergyBreakdown};
use crate::model::{
    attractor_main, attractor_related, AttractorVariant, CoefficientSet, Grid, InitialData, ModelError,
};
use crate::semidiscrete::{BoundaryModel, Layout, SemiDiscrete};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FdError {
    #[error("time step {dt} exceeds the CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("non-finite value at t = {t}")]
    InstabilityDetected { t: f64 },
    #[error("grid with {0} cells is too coarse (need at least 3)")]
    GridTooCoarse(usize),
    #[error("state does not match the grid ({0})")]
    ShapeMismatch(String),
    #[error("horizon must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Band(#[from] BandError),
}

/// Boundary unknowns for each [`BoundaryModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryState {
    Wentzell { eta1: f64, eta2: f64, zeta1: f64 },
    Related { eta: f64, zeta: f64 },
    Pinned,
}

impl BoundaryState {
    pub fn model(&self) -> BoundaryModel {
        match self {
            Self::Wentzell { .. } => BoundaryModel::Wentzell,
            Self::Related { .. } => BoundaryModel::Related,
            Self::Pinned => BoundaryModel::Pinned,
        }
    }

    /// `(eta1, eta2, zeta1)`, `(eta, 0, zeta)` or zeros.
    pub fn triple(&self) -> [f64; 3] {
        match *self {
            Self::Wentzell { eta1, eta2, zeta1 } => [eta1, eta2, zeta1],
            Self::Related { eta, zeta } => [eta, 0.0, zeta],
            Self::Pinned => [0.0; 3],
        }
    }

    /// Velocities imposed at `(x = 0, x = 1)`.
    fn wall_velocities(&self) -> (f64, f64) {
        match *self {
            Self::Wentzell { eta1, zeta1, .. } => (zeta1, eta1),
            Self::Related { eta, zeta } => (zeta, eta),
            Self::Pinned => (0.0, 0.0),
        }
    }
}

/// Nodal displacement and velocity plus boundary unknowns at time `t`.
///
/// Wall entries of `v` coincide with the boundary velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub boundary: BoundaryState,
}

impl WaveState {
    pub fn initial(init: &InitialData, model: BoundaryModel) -> Self {
        let boundary = match model {
            BoundaryModel::Wentzell => BoundaryState::Wentzell {
                eta1: init.eta1_0,
                eta2: init.eta2_0,
                zeta1: init.zeta1_0,
            },
            BoundaryModel::Related => BoundaryState::Related {
                eta: init.eta_0,
                zeta: init.zeta_0,
            },
            BoundaryModel::Pinned => BoundaryState::Pinned,
        };
        let mut v = init.u1.clone();
        let n = v.len() - 1;
        let (left, right) = boundary.wall_velocities();
        v[0] = left;
        v[n] = right;
        Self {
            t: 0.0,
            u: init.u0.clone(),
            v,
            boundary,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.u.len() - 1
    }

    pub fn model(&self) -> BoundaryModel {
        self.boundary.model()
    }

    /// `u(t, 1) - eta2(t)` for the main system.
    pub fn u_star(&self) -> Option<f64> {
        match self.boundary {
            BoundaryState::Wentzell { eta2, .. } => Some(self.u[self.n_cells()] - eta2),
            _ => None,
        }
    }

    pub fn slopes(&self) -> Vec<f64> {
        let n = self.n_cells() as f64;
        self.u.windows(2).map(|w| (w[1] - w[0]) * n).collect()
    }

    /// Nodal `u_x`: centered average of adjacent slopes inside, one-sided at the walls.
    pub fn nodal_slope(&self) -> Vec<f64> {
        let g = self.slopes();
        let n = g.len();
        let mut out = Vec::with_capacity(n + 1);
        out.push(if n >= 2 { 1.5 * g[0] - 0.5 * g[1] } else { g[0] });
        out.extend(g.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        out.push(if n >= 2 { 1.5 * g[n - 1] - 0.5 * g[n - 2] } else { g[n - 1] });
        out
    }

    fn to_vector(&self, layout: &Layout) -> Vec<f64> {
        let mut x = vec![0.0; layout.dim()];
        for (cell, g) in self.slopes().into_iter().enumerate() {
            x[layout.slope(cell)] = g;
        }
        for node in 0..=self.n_cells() {
            if let Some(pos) = layout.velocity(node) {
                x[pos] = self.v[node];
            }
        }
        if let (Some(pos), BoundaryState::Wentzell { eta2, .. }) = (layout.eta2(), self.boundary) {
            x[pos] = eta2;
        }
        x
    }

    fn from_vector(x: &[f64], layout: &Layout, t: f64, u_right: f64) -> Self {
        let n = layout.n_cells;
        let dx = 1.0 / n as f64;
        let mut u = vec![0.0; n + 1];
        u[n] = u_right;
        for cell in (0..n).rev() {
            u[cell] = u[cell + 1] - x[layout.slope(cell)] * dx;
        }
        let v: Vec<f64> = (0..=n)
            .map(|node| layout.velocity(node).map_or(0.0, |p| x[p]))
            .collect();
        let boundary = match layout.model {
            BoundaryModel::Wentzell => BoundaryState::Wentzell {
                eta1: v[n],
                eta2: x[layout.eta2().unwrap()],
                zeta1: v[0],
            },
            BoundaryModel::Related => BoundaryState::Related { eta: v[n], zeta: v[0] },
            BoundaryModel::Pinned => BoundaryState::Pinned,
        };
        Self { t, u, v, boundary }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Second-order one-sided `u_x` trace at a wall.
pub fn boundary_derivative(u: &[f64], side: Side) -> Result<f64, FdError> {
    let n = u.len().saturating_sub(1);
    if n < 3 {
        return Err(FdError::GridTooCoarse(n));
    }
    let inv = n as f64 / 2.0;
    Ok(match side {
        Side::Right => (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) * inv,
        Side::Left => (-3.0 * u[0] + 4.0 * u[1] - u[2]) * inv,
    })
}

fn check_cfl(coeffs: &CoefficientSet, grid: &Grid) -> Result<(), FdError> {
    let limit = grid.dx() / coeffs.a_hi().sqrt();
    if grid.dt() > limit * (1.0 + 1e-12) {
        return Err(FdError::CflViolation { dt: grid.dt(), limit });
    }
    Ok(())
}

/// Factored implicit-midpoint step for one coefficient set and time step.
#[derive(Debug, Clone)]
pub struct FdStepper {
    sd: SemiDiscrete,
    explicit: BandMatrix<f64>,
    implicit: BandLu<f64>,
    dt: f64,
}

impl FdStepper {
    pub fn new(coeffs: &CoefficientSet, grid: &Grid, model: BoundaryModel) -> Result<Self, FdError> {
        if coeffs.n_cells() != grid.n_cells() {
            return Err(FdError::ShapeMismatch(format!(
                "coefficients on {} cells, grid has {}",
                coeffs.n_cells(),
                grid.n_cells()
            )));
        }
        if grid.n_cells() < 3 {
            return Err(FdError::GridTooCoarse(grid.n_cells()));
        }
        if model == BoundaryModel::Related && coeffs.related().is_none() {
            return Err(ModelError::MissingRelatedGains.into());
        }
        check_cfl(coeffs, grid)?;
        let sd = SemiDiscrete::assemble(coeffs, model);
        let h = 0.5 * grid.dt();
        let explicit = sd.matrix().scaled_shift(h, 1.0);
        let implicit = sd.matrix().scaled_shift(-h, 1.0).lu()?;
        Ok(Self {
            sd,
            explicit,
            implicit,
            dt: grid.dt(),
        })
    }

    pub fn operator(&self) -> &SemiDiscrete {
        &self.sd
    }

    /// Advances `(x, u(t,1))` by one step; `u_star` pins `u(t,1) = eta2 + u_star` in the main system.
    fn advance(&self, x: &mut Vec<f64>, u_right: &mut f64, u_star: Option<f64>) -> Result<(), FdError> {
        let layout = self.sd.layout();
        let right_vel = layout.velocity(layout.n_cells);
        let old_right = right_vel.map_or(0.0, |p| x[p]);
        let mut next = self.explicit.mul_vec(x);
        self.implicit.solve_in_place(&mut next)?;
        *x = next;
        *u_right = match (u_star, layout.eta2()) {
            (Some(c), Some(p)) => x[p] + c,
            _ => *u_right + 0.5 * self.dt * (old_right + right_vel.map_or(0.0, |p| x[p])),
        };
        Ok(())
    }

    pub fn step(&self, state: &WaveState) -> Result<WaveState, FdError> {
        let layout = self.sd.layout();
        if state.model() != layout.model || state.n_cells() != layout.n_cells || state.v.len() != state.u.len() {
            return Err(FdError::ShapeMismatch("state layout differs from stepper".into()));
        }
        let mut x = state.to_vector(&layout);
        let mut u_right = state.u[layout.n_cells];
        self.advance(&mut x, &mut u_right, state.u_star())?;
        let t = state.t + self.dt;
        let next = WaveState::from_vector(&x, &layout, t, u_right);
        if next.u.iter().chain(&next.v).any(|v| !v.is_finite()) {
            return Err(FdError::InstabilityDetected { t });
        }
        Ok(next)
    }
}

/// One implicit-midpoint step of the coupled system.
pub fn fd_step(state: &WaveState, coeffs: &CoefficientSet, grid: &Grid) -> Result<WaveState, FdError> {
    FdStepper::new(coeffs, grid, state.model())?.step(state)
}

/// Nodal `(u, u_t, u_x)` at a record time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub t: f64,
    pub u: Option<Vec<f64>>,
    pub ut: Vec<f64>,
    pub ux: Vec<f64>,
}

/// Recorded time series of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub model: BoundaryModel,
    pub grid: Grid,
    pub times: Vec<f64>,
    pub energy: Vec<EnergyBreakdown>,
    /// `(eta1, eta2, zeta1)` for the main system, `(eta, 0, zeta)` for the related one.
    pub boundary: Vec<[f64; 3]>,
    /// `max |u - reference|` with the attractor as reference.
    pub sup_dev: Vec<f64>,
    pub dissipation: Vec<f64>,
    /// Value the displacement converges to (main: `u0(1) - eta2(0)`; related: corrected formula).
    pub attractor: f64,
    /// `max |u(t,1) - eta2(t) - u_*|` over records (main system only).
    pub constraint_drift: f64,
    pub fields: Vec<FieldRecord>,
    pub snapshots: Vec<WaveState>,
    /// State at the horizon, whatever the record stride.
    pub final_state: WaveState,
}

impl Trajectory {
    pub fn total_energy(&self) -> Vec<f64> {
        self.energy.iter().map(|e| e.e_total).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// What to store besides the scalar series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordOptions {
    pub fields: bool,
    /// Keep a full state every `k`-th record.
    pub snapshot_every: Option<usize>,
}

/// Runs to `horizon`, shrinking `dt` slightly if needed so the horizon is hit exactly.
pub fn simulate(
    init: &InitialData,
    coeffs: &CoefficientSet,
    grid: &Grid,
    model: BoundaryModel,
    horizon: f64,
    record_stride: usize,
) -> Result<Trajectory, FdError> {
    simulate_with(init, coeffs, grid, model, horizon, record_stride, RecordOptions::default())
}

pub fn simulate_with(
    init: &InitialData,
    coeffs: &CoefficientSet,
    grid: &Grid,
    model: BoundaryModel,
    horizon: f64,
    record_stride: usize,
    options: RecordOptions,
) -> Result<Trajectory, FdError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(FdError::InvalidHorizon(horizon));
    }
    if init.n_cells() != grid.n_cells() || init.u1.len() != init.u0.len() {
        return Err(FdError::ShapeMismatch("initial data length differs from grid".into()));
    }
    let n_steps = ((horizon / grid.dt()) - 1e-9).ceil().max(1.0) as usize;
    let grid = Grid::with_dt(grid.n_cells(), horizon / n_steps as f64, coeffs.a_hi())?;
    let stepper = FdStepper::new(coeffs, &grid, model)?;
    let layout = stepper.sd.layout();
    let stride = record_stride.max(1);

    let initial = WaveState::initial(init, model);
    let u_star = initial.u_star();
    let attractor = match model {
        BoundaryModel::Wentzell => attractor_main(init),
        BoundaryModel::Related => attractor_related(init, coeffs, AttractorVariant::Corrected)?,
        BoundaryModel::Pinned => 0.0,
    };

    let mut traj = Trajectory {
        model,
        grid,
        times: Vec::new(),
        energy: Vec::new(),
        boundary: Vec::new(),
        sup_dev: Vec::new(),
        dissipation: Vec::new(),
        attractor,
        constraint_drift: 0.0,
        fields: Vec::new(),
        snapshots: Vec::new(),
        final_state: initial.clone(),
    };

    let mut x = initial.to_vector(&layout);
    let mut u_right = initial.u[grid.n_cells()];
    let record = |traj: &mut Trajectory, state: WaveState| -> Result<(), FdError> {
        if state.u.iter().chain(&state.v).any(|v| !v.is_finite()) {
            return Err(FdError::InstabilityDetected { t: state.t });
        }
        let e = energy::energy(&state, coeffs, 2.0).expect("p = 2 is admissible");
        if let (Some(c), BoundaryState::Wentzell { eta2, .. }) = (u_star, state.boundary) {
            let drift = (state.u[grid.n_cells()] - eta2 - c).abs();
            traj.constraint_drift = traj.constraint_drift.max(drift);
        }
        traj.times.push(state.t);
        traj.dissipation.push(e.dissipation.unwrap_or(0.0));
        traj.energy.push(e);
        traj.boundary.push(state.boundary.triple());
        traj.sup_dev.push(energy::sup_deviation(&state.u, attractor));
        if options.fields {
            traj.fields.push(FieldRecord {
                t: state.t,
                u: Some(state.u.clone()),
                ut: state.v.clone(),
                ux: state.nodal_slope(),
            });
        }
        if let Some(k) = options.snapshot_every {
            if (traj.times.len() - 1).is_multiple_of(k.max(1)) {
                traj.snapshots.push(state);
            }
        }
        Ok(())
    };

    record(&mut traj, WaveState::from_vector(&x, &layout, 0.0, u_right))?;
    for step in 1..=n_steps {
        stepper.advance(&mut x, &mut u_right, u_star)?;
        if step % stride == 0 {
            let t = step as f64 * grid.dt();
            record(&mut traj, WaveState::from_vector(&x, &layout, t, u_right))?;
        }
    }
    let last = WaveState::from_vector(&x, &layout, n_steps as f64 * grid.dt(), u_right);
    if last.u.iter().chain(&last.v).any(|v| !v.is_finite()) {
        return Err(FdError::InstabilityDetected { t: horizon });
    }
    traj.final_state = last;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        sample_function, validate_coefficients, CoefficientDescription, FunctionSpec, InitialDescription,
        RelatedGains,
    };
    use std::f64::consts::PI;

    fn c1(n: usize) -> CoefficientSet {
        validate_coefficients(
            &CoefficientDescription::new(FunctionSpec::constant(1.0), FunctionSpec::indicator(0.3, 0.5, 5.0)),
            n,
        )
        .unwrap()
    }

    fn undamped(n: usize) -> CoefficientSet {
        let mut d = CoefficientDescription::new(FunctionSpec::constant(1.0), FunctionSpec::constant(0.0));
        d.require_interior_damping = false;
        validate_coefficients(&d, n).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let c = c1(20);
        let grid = Grid::new(20, 0.9, 1.0).unwrap();
        let init = InitialData::new(vec![0.0; 21], vec![0.0; 21]).unwrap();
        let s = WaveState::initial(&init, BoundaryModel::Wentzell);
        let next = fd_step(&s, &c, &grid).unwrap();
        assert!(next.u.iter().chain(&next.v).all(|&v| v == 0.0));
        assert_eq!(next.boundary.triple(), [0.0; 3]);
    }

    #[test]
    fn constant_state_is_steady() {
        let c = c1(20);
        let grid = Grid::new(20, 0.9, 1.0).unwrap();
        let init = InitialData::new(vec![1.75; 21], vec![0.0; 21]).unwrap();
        let mut s = WaveState::initial(&init, BoundaryModel::Wentzell);
        assert_eq!(s.u_star(), Some(1.75));
        for _ in 0..50 {
            s = fd_step(&s, &c, &grid).unwrap();
        }
        assert!(s.u.iter().all(|&v| (v - 1.75).abs() < 1e-15));
        assert!(s.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pinned_eigenmode_half_period() {
        let n = 100;
        let grid = Grid::new(n, 1.0, 1.0).unwrap();
        let u0 = sample_function(&"sine-mode 1".parse().unwrap(), n).unwrap();
        let init = InitialData::new(u0, vec![0.0; n + 1]).unwrap();
        let traj = simulate_with(
            &init,
            &undamped(n),
            &grid,
            BoundaryModel::Pinned,
            0.5,
            50,
            RecordOptions {
                fields: true,
                snapshot_every: None,
            },
        )
        .unwrap();
        let last = traj.fields.last().unwrap();
        assert!((last.t - 0.5).abs() < 1e-12);
        let err = last.u.as_ref().unwrap().iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "max |u(0.5)| = {err}");
    }

    #[test]
    fn boundary_derivative_stencils() {
        let lin: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        assert!((boundary_derivative(&lin, Side::Left).unwrap() - 1.0).abs() < 1e-13);
        assert!((boundary_derivative(&lin, Side::Right).unwrap() - 1.0).abs() < 1e-13);
        let quad: Vec<f64> = lin.iter().map(|x| x * x).collect();
        assert!((boundary_derivative(&quad, Side::Right).unwrap() - 2.0).abs() < 1e-12);
        let s = sample_function(&"sine-mode 1".parse().unwrap(), 100).unwrap();
        assert!((boundary_derivative(&s, Side::Left).unwrap() - PI).abs() < 2e-3);
        assert!((boundary_derivative(&s, Side::Right).unwrap() + PI).abs() < 2e-3);
        assert_eq!(boundary_derivative(&[0.0, 1.0, 2.0], Side::Left), Err(FdError::GridTooCoarse(2)));
    }

    #[test]
    fn cfl_violation_rejected() {
        let c = validate_coefficients(
            &CoefficientDescription::new(
                FunctionSpec::Linear { at0: 1.0, at1: 1.5 },
                FunctionSpec::indicator(0.3, 0.5, 5.0),
            ),
            20,
        )
        .unwrap();
        let grid = Grid::with_dt(20, 0.05, 1.0).unwrap();
        let init = InitialData::new(vec![0.0; 21], vec![0.0; 21]).unwrap();
        let s = WaveState::initial(&init, BoundaryModel::Wentzell);
        assert!(matches!(fd_step(&s, &c, &grid), Err(FdError::CflViolation { .. })));
    }

    #[test]
    fn zero_data_has_zero_energy() {
        let n = 40;
        let init = InitialData::new(vec![0.0; n + 1], vec![0.0; n + 1]).unwrap();
        let traj = simulate(&init, &c1(n), &Grid::new(n, 0.9, 1.0).unwrap(), BoundaryModel::Wentzell, 2.0, 5).unwrap();
        assert!(traj.energy.iter().all(|e| e.e_total == 0.0));
    }

    fn bump_run(n: usize, shift: f64) -> Trajectory {
        let init = InitialDescription::at_rest(FunctionSpec::gaussian_bump()).sample(n).unwrap();
        let init = InitialData {
            u0: init.u0.iter().map(|v| v + shift).collect(),
            ..init
        };
        simulate(&init, &c1(n), &Grid::new(n, 0.9, 1.0).unwrap(), BoundaryModel::Wentzell, 5.0, 1).unwrap()
    }

    #[test]
    fn energy_is_monotone_and_constraint_exact() {
        let traj = bump_run(80, 0.0);
        let e = traj.total_energy();
        for w in e.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * e[0]);
        }
        assert!(traj.constraint_drift <= 1e-12);
    }

    #[test]
    fn shift_covariance() {
        let a = bump_run(40, 0.0);
        let b = bump_run(40, 2.5);
        for (ba, bb) in a.boundary.iter().zip(&b.boundary) {
            for k in 0..3 {
                assert!((ba[k] - bb[k]).abs() < 1e-12);
            }
        }
        assert!((b.attractor - a.attractor - 2.5).abs() < 1e-14);
        for (ea, eb) in a.energy.iter().zip(&b.energy) {
            assert!((ea.e_total - eb.e_total).abs() <= 1e-12 * (1.0 + ea.e_total));
        }
    }

    #[test]
    fn related_constant_data_is_steady() {
        let n = 30;
        let mut d = CoefficientDescription::new(FunctionSpec::constant(1.0), FunctionSpec::indicator(0.3, 0.5, 5.0));
        d.related = Some(RelatedGains { q0: 1.0, q1: 1.0 });
        let c = validate_coefficients(&d, n).unwrap();
        let init = InitialData::new(vec![0.6; n + 1], vec![0.0; n + 1]).unwrap();
        let traj = simulate_with(
            &init,
            &c,
            &Grid::new(n, 0.9, 1.0).unwrap(),
            BoundaryModel::Related,
            3.0,
            10,
            RecordOptions {
                fields: true,
                snapshot_every: Some(2),
            },
        )
        .unwrap();
        assert!((traj.attractor - 0.6).abs() < 1e-14);
        for f in &traj.fields {
            assert!(f.u.as_ref().unwrap().iter().all(|&v| (v - 0.6).abs() < 1e-14));
        }
        assert!(!traj.snapshots.is_empty());
    }

    #[test]
    fn related_requires_gains() {
        let init = InitialData::new(vec![0.0; 11], vec![0.0; 11]).unwrap();
        let r = simulate(&init, &c1(10), &Grid::new(10, 0.9, 1.0).unwrap(), BoundaryModel::Related, 1.0, 1);
        assert!(matches!(r, Err(FdError::Model(ModelError::MissingRelatedGains))));
    }

    #[test]
    fn horizon_is_hit_exactly() {
        let n = 30;
        let init = InitialData::new(vec![0.0; n + 1], vec![0.0; n + 1]).unwrap();
        let traj = simulate(&init, &c1(n), &Grid::new(n, 0.9, 1.0).unwrap(), BoundaryModel::Wentzell, 1.0, 1).unwrap();
        assert!((traj.final_time() - 1.0).abs() < 1e-12);
        let dt = traj.times[1] - traj.times[0];
        for w in traj.times.windows(2) {
            assert!((w[1] - w[0] - dt).abs() < 1e-12);
        }
    }
}
