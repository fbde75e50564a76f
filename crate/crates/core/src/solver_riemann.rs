//! Characteristic solver for the constant-speed case `a = 1`.
//!
//! In Riemann invariants `rho = u_t + u_x` (speed -1) and `xi = u_t - u_x`
//! (speed +1) the damped wave equation reads
//! `(d_t - d_x) rho = (d_t + d_x) xi = -(q/2)(rho + xi)`. With `dt = dx`
//! transport is an index shift; the source is integrated by the trapezoid
//! rule along each characteristic, which couples `rho` and `xi` only through
//! their sum at the arrival node and so has a closed-form solution.
//!
//! The boundary triple `y = (eta2, eta1, zeta1)` solves `y' = A y + B v` with
//! `v = ((rho - xi)(t, 1), (rho - xi)(t, 0))`, advanced by the
//! variation-of-constants formula with trapezoidal Duhamel quadrature.

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyError};
use crate::expm::expm;
use crate::model::{BoundaryGains, CoefficientSet, Grid, ModelError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RiemannError {
    #[error("characteristic transport needs dt = dx, got dt = {dt}, dx = {dx}")]
    NonUnitCfl { dt: f64, dx: f64 },
    #[error("characteristic solver requires a = 1 everywhere")]
    RequiresConstantSpeed,
    #[error("array lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite value at t = {t}")]
    InstabilityDetected { t: f64 },
    #[error("horizon must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Strength of the interior source `-c q (rho + xi)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiemannSource {
    /// `c = 1/2`, the factor obtained from `u_tt - u_xx = -q u_t`.
    #[default]
    Derived,
    /// `c = 2`, kept only to show that it does not reproduce the wave equation.
    Printed,
}

impl RiemannSource {
    fn factor(self) -> f64 {
        match self {
            Self::Derived => 0.5,
            Self::Printed => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiemannState {
    pub t: f64,
    pub rho: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta1: f64,
    pub eta2: f64,
    pub zeta1: f64,
}

impl RiemannState {
    /// State with boundary velocities read off the wall traces.
    pub fn from_fields(v: &[f64], w: &[f64], eta2: f64) -> Result<Self, RiemannError> {
        let (rho, xi) = to_riemann(v, w)?;
        let n = rho.len() - 1;
        Ok(Self {
            t: 0.0,
            eta1: 0.5 * (rho[n] + xi[n]),
            zeta1: 0.5 * (rho[0] + xi[0]),
            rho,
            xi,
            eta2,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.rho.len() - 1
    }

    /// `(eta2, eta1, zeta1)`.
    pub fn boundary(&self) -> Vector3<f64> {
        Vector3::new(self.eta2, self.eta1, self.zeta1)
    }

    /// `max |(rho + xi)/2 - boundary velocity|` over both walls.
    pub fn compatibility_defect(&self) -> f64 {
        let n = self.n_cells();
        let right = (0.5 * (self.rho[n] + self.xi[n]) - self.eta1).abs();
        let left = (0.5 * (self.rho[0] + self.xi[0]) - self.zeta1).abs();
        right.max(left)
    }
}

/// `(v + w, v - w)`.
pub fn to_riemann(v: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>), RiemannError> {
    if v.len() != w.len() {
        return Err(RiemannError::LengthMismatch(v.len(), w.len()));
    }
    if v.len() < 2 {
        return Err(ModelError::InvalidGrid("need at least one cell".into()).into());
    }
    let rho = v.iter().zip(w).map(|(a, b)| a + b).collect();
    let xi = v.iter().zip(w).map(|(a, b)| a - b).collect();
    Ok((rho, xi))
}

/// `(u_t, u_x) = ((rho + xi)/2, (rho - xi)/2)`.
pub fn from_riemann(rho: &[f64], xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>), RiemannError> {
    if rho.len() != xi.len() {
        return Err(RiemannError::LengthMismatch(rho.len(), xi.len()));
    }
    let v = rho.iter().zip(xi).map(|(a, b)| 0.5 * (a + b)).collect();
    let w = rho.iter().zip(xi).map(|(a, b)| 0.5 * (a - b)).collect();
    Ok((v, w))
}

/// Linear boundary dynamics `y' = A y + B v` in the ordering `(eta2, eta1, zeta1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFlowMatrices {
    pub a: Matrix3<f64>,
    pub b: Matrix3x2<f64>,
    pub exp_a_dt: Matrix3<f64>,
    pub dt: f64,
}

impl BoundaryFlowMatrices {
    pub fn new(gains: &BoundaryGains, dt: f64) -> Self {
        #[rustfmt::skip]
        let a = Matrix3::new(
            0.0, 1.0, 0.0,
            -gains.alpha1, -gains.alpha2, 0.0,
            0.0, 0.0, -gains.gamma1,
        );
        #[rustfmt::skip]
        let b = Matrix3x2::new(
            0.0, 0.0,
            -0.5 * gains.beta1, 0.0,
            0.0, 0.5 * gains.mu1,
        );
        Self {
            a,
            b,
            exp_a_dt: expm(&(a * dt)),
            dt,
        }
    }
}

/// `y(t + dt) = e^{A dt} y + dt/2 (e^{A dt} B v(t) + B v(t + dt))`.
pub fn boundary_flow(
    y: Vector3<f64>,
    traces_start: Vector2<f64>,
    traces_end: Vector2<f64>,
    m: &BoundaryFlowMatrices,
) -> Vector3<f64> {
    m.exp_a_dt * (y + m.b * traces_start * (0.5 * m.dt)) + m.b * traces_end * (0.5 * m.dt)
}

/// What closes the characteristic system at the walls.
#[derive(Debug, Clone, Copy, PartialEq)]
enum WallData {
    /// Boundary triple evolved by the ODE flow.
    Coupled,
    /// Prescribed `(rho + xi)(t, 0) = h1`, `(rho + xi)(t, 1) = h2`.
    Forced { h1: f64, h2: f64 },
}

/// Precomputed single-step data for one coefficient set.
#[derive(Debug, Clone)]
pub struct RiemannStepper {
    k: Vec<f64>,
    flow: BoundaryFlowMatrices,
    gains: BoundaryGains,
}

impl RiemannStepper {
    pub fn new(coeffs: &CoefficientSet, grid: &Grid, source: RiemannSource) -> Result<Self, RiemannError> {
        if !coeffs.is_constant_speed(1.0) {
            return Err(RiemannError::RequiresConstantSpeed);
        }
        let (dt, dx) = (grid.dt(), grid.dx());
        if (dt - dx).abs() > 1e-12 * dx {
            return Err(RiemannError::NonUnitCfl { dt, dx });
        }
        if coeffs.n_cells() != grid.n_cells() {
            return Err(ModelError::LengthMismatch {
                expected: grid.n_nodes(),
                got: coeffs.n_cells() + 1,
            }
            .into());
        }
        // trapezoid weight dt/2 times the source factor
        let k = coeffs
            .q_samples()
            .iter()
            .map(|q| 0.5 * dt * source.factor() * q)
            .collect();
        Ok(Self {
            k,
            flow: BoundaryFlowMatrices::new(coeffs.gains(), dt),
            gains: *coeffs.gains(),
        })
    }

    pub fn flow(&self) -> &BoundaryFlowMatrices {
        &self.flow
    }

    fn advance(&self, s: &RiemannState, wall: WallData) -> RiemannState {
        let n = s.n_cells();
        let k = &self.k;
        let dt = self.flow.dt;
        // explicit half of the trapezoid at the departure nodes
        let rt: Vec<f64> = (0..=n).map(|j| s.rho[j] - k[j] * (s.rho[j] + s.xi[j])).collect();
        let xt: Vec<f64> = (0..=n).map(|j| s.xi[j] - k[j] * (s.rho[j] + s.xi[j])).collect();

        let mut rho = vec![0.0; n + 1];
        let mut xi = vec![0.0; n + 1];
        for i in 1..n {
            let (p, x) = (rt[i + 1], xt[i - 1]);
            let sum = (p + x) / (1.0 + 2.0 * k[i]);
            rho[i] = p - k[i] * sum;
            xi[i] = x - k[i] * sum;
        }

        let (sum_right, sum_left, y) = match wall {
            WallData::Coupled => {
                let y = s.boundary();
                let v_start = Vector2::new(s.rho[n] - s.xi[n], s.rho[0] - s.xi[0]);
                let r = self.flow.exp_a_dt * (y + self.flow.b * v_start * (0.5 * dt));
                // end traces: (rho - xi)(1) = 2(1 + 2k_N) eta1 - 2 xt_{N-1}, (rho - xi)(0) = 2 rt_1 - 2(1 + 2k_0) zeta1
                let h = 0.5 * dt;
                let eta1 = (r[1] + h * self.gains.beta1 * xt[n - 1])
                    / (1.0 + h * self.gains.beta1 * (1.0 + 2.0 * k[n]));
                let zeta1 =
                    (r[2] + h * self.gains.mu1 * rt[1]) / (1.0 + h * self.gains.mu1 * (1.0 + 2.0 * k[0]));
                (2.0 * eta1, 2.0 * zeta1, Vector3::new(r[0], eta1, zeta1))
            }
            WallData::Forced { h1, h2 } => (h2, h1, Vector3::new(s.eta2, 0.5 * h2, 0.5 * h1)),
        };
        xi[n] = xt[n - 1] - k[n] * sum_right;
        rho[n] = sum_right - xi[n];
        rho[0] = rt[1] - k[0] * sum_left;
        xi[0] = sum_left - rho[0];

        RiemannState {
            t: s.t + dt,
            rho,
            xi,
            eta2: y[0],
            eta1: y[1],
            zeta1: y[2],
        }
    }

    pub fn step(&self, state: &RiemannState) -> Result<RiemannState, RiemannError> {
        self.check_state(state)?;
        let next = self.advance(state, WallData::Coupled);
        check_finite(&next)?;
        Ok(next)
    }

    fn check_state(&self, state: &RiemannState) -> Result<(), RiemannError> {
        if state.rho.len() != state.xi.len() {
            return Err(RiemannError::LengthMismatch(state.rho.len(), state.xi.len()));
        }
        if state.rho.len() != self.k.len() {
            return Err(RiemannError::LengthMismatch(state.rho.len(), self.k.len()));
        }
        Ok(())
    }
}

fn check_finite(s: &RiemannState) -> Result<(), RiemannError> {
    let ok = s.rho.iter().chain(&s.xi).all(|v| v.is_finite())
        && [s.eta1, s.eta2, s.zeta1].iter().all(|v| v.is_finite());
    if ok {
        Ok(())
    } else {
        Err(RiemannError::InstabilityDetected { t: s.t })
    }
}

/// One step of the boundary-coupled characteristic scheme.
pub fn riemann_step(state: &RiemannState, coeffs: &CoefficientSet, grid: &Grid) -> Result<RiemannState, RiemannError> {
    RiemannStepper::new(coeffs, grid, RiemannSource::Derived)?.step(state)
}

/// Quadratic energy `1/4 int (rho^2 + xi^2) + boundary terms`, comparable to the finite-difference `E_2`.
pub fn riemann_energy(state: &RiemannState, coeffs: &CoefficientSet) -> Result<f64, RiemannError> {
    let dx = 1.0 / state.n_cells() as f64;
    let interior = 0.25 * energy::characteristic_energy(&state.rho, &state.xi, dx, 2.0)?;
    let [c1, c2, c3] = coeffs.boundary_weights();
    Ok(interior + 0.5 * (c1 * state.eta1.powi(2) + c2 * state.eta2.powi(2) + c3 * state.zeta1.powi(2)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiemannTrajectory {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `(eta1, eta2, zeta1)`.
    pub boundary: Vec<[f64; 3]>,
    pub max_compatibility_defect: f64,
    pub states: Vec<RiemannState>,
}

fn step_count(horizon: f64, dt: f64) -> Result<usize, RiemannError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(RiemannError::InvalidHorizon(horizon));
    }
    Ok((horizon / dt).round().max(1.0) as usize)
}

/// Boundary-coupled run; `keep_states` stores the full state at every record.
pub fn simulate_riemann(
    init: &RiemannState,
    coeffs: &CoefficientSet,
    grid: &Grid,
    horizon: f64,
    record_stride: usize,
    source: RiemannSource,
    keep_states: bool,
) -> Result<RiemannTrajectory, RiemannError> {
    let stepper = RiemannStepper::new(coeffs, grid, source)?;
    stepper.check_state(init)?;
    let n_steps = step_count(horizon, grid.dt())?;
    let stride = record_stride.max(1);
    let mut traj = RiemannTrajectory {
        times: Vec::new(),
        energy: Vec::new(),
        boundary: Vec::new(),
        max_compatibility_defect: 0.0,
        states: Vec::new(),
    };
    let record = |traj: &mut RiemannTrajectory, s: &RiemannState| -> Result<(), RiemannError> {
        traj.times.push(s.t);
        traj.energy.push(riemann_energy(s, coeffs)?);
        traj.boundary.push([s.eta1, s.eta2, s.zeta1]);
        if keep_states {
            traj.states.push(s.clone());
        }
        Ok(())
    };
    let mut state = init.clone();
    record(&mut traj, &state)?;
    for step in 1..=n_steps {
        state = stepper.advance(&state, WallData::Coupled);
        state.t = step as f64 * grid.dt();
        traj.max_compatibility_defect = traj.max_compatibility_defect.max(state.compatibility_defect());
        if step % stride == 0 {
            check_finite(&state)?;
            record(&mut traj, &state)?;
        }
    }
    check_finite(&state)?;
    Ok(traj)
}

/// `E_p`-type series of the forced characteristic system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForcedRun {
    pub p: f64,
    pub times: Vec<f64>,
    /// `int (|rho|^p + |xi|^p) dx`.
    pub e_hat: Vec<f64>,
}

/// Runs with `(rho + xi)(t, 0) = h1(t)` and `(rho + xi)(t, 1) = h2(t)`, sampled at the step times.
#[allow(clippy::too_many_arguments)]
pub fn simulate_forced(
    rho0: &[f64],
    xi0: &[f64],
    coeffs: &CoefficientSet,
    grid: &Grid,
    h1: &dyn Fn(f64) -> f64,
    h2: &dyn Fn(f64) -> f64,
    p: f64,
    horizon: f64,
    record_stride: usize,
) -> Result<ForcedRun, RiemannError> {
    let stepper = RiemannStepper::new(coeffs, grid, RiemannSource::Derived)?;
    let n = rho0.len().saturating_sub(1);
    let mut state = RiemannState {
        t: 0.0,
        rho: rho0.to_vec(),
        xi: xi0.to_vec(),
        eta1: 0.5 * h2(0.0),
        eta2: 0.0,
        zeta1: 0.5 * h1(0.0),
    };
    stepper.check_state(&state)?;
    let n_steps = step_count(horizon, grid.dt())?;
    let stride = record_stride.max(1);
    let dx = 1.0 / n as f64;
    let mut run = ForcedRun {
        p,
        times: vec![0.0],
        e_hat: vec![energy::characteristic_energy(rho0, xi0, dx, p)?],
    };
    for step in 1..=n_steps {
        let t = step as f64 * grid.dt();
        state = stepper.advance(&state, WallData::Forced { h1: h1(t), h2: h2(t) });
        state.t = t;
        if step % stride == 0 {
            check_finite(&state)?;
            run.times.push(t);
            run.e_hat.push(energy::characteristic_energy(&state.rho, &state.xi, dx, p)?);
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_coefficients, CoefficientDescription, FunctionSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coeffs(q: FunctionSpec, n: usize) -> CoefficientSet {
        let mut d = CoefficientDescription::new(FunctionSpec::constant(1.0), q);
        d.require_interior_damping = false;
        validate_coefficients(&d, n).unwrap()
    }

    fn c1(n: usize) -> CoefficientSet {
        coeffs(FunctionSpec::indicator(0.3, 0.5, 5.0), n)
    }

    #[test]
    fn riemann_variables() {
        let (r, x) = to_riemann(&[1.0; 4], &[0.0; 4]).unwrap();
        assert_eq!((r, x), (vec![1.0; 4], vec![1.0; 4]));
        let (r, x) = to_riemann(&[0.0; 4], &[1.0; 4]).unwrap();
        assert_eq!((r, x), (vec![1.0; 4], vec![-1.0; 4]));
        let (v, w) = from_riemann(&[2.0; 3], &[0.0; 3]).unwrap();
        assert_eq!((v, w), (vec![1.0; 3], vec![1.0; 3]));
        let (_, w) = from_riemann(&[0.3, -2.0], &[0.3, -2.0]).unwrap();
        assert_eq!(w, vec![0.0; 2]);
        assert_eq!(to_riemann(&[1.0; 3], &[1.0; 2]), Err(RiemannError::LengthMismatch(3, 2)));
        assert_eq!(from_riemann(&[1.0; 3], &[1.0; 2]), Err(RiemannError::LengthMismatch(3, 2)));
    }

    #[test]
    fn round_trip_is_exact_for_dyadic_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // dyadic rationals make the halving and sums exact
        let v: Vec<f64> = (0..50).map(|_| rng.random_range(-1024..1024) as f64 / 64.0).collect();
        let w: Vec<f64> = (0..50).map(|_| rng.random_range(-1024..1024) as f64 / 64.0).collect();
        let (r, x) = to_riemann(&v, &w).unwrap();
        let (v2, w2) = from_riemann(&r, &x).unwrap();
        assert_eq!((v, w), (v2, w2));
    }

    #[test]
    fn round_trip_random_within_ulps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (r, x) = to_riemann(&v, &w).unwrap();
        let (v2, w2) = from_riemann(&r, &x).unwrap();
        for i in 0..200 {
            assert!((v[i] - v2[i]).abs() <= 4.0 * f64::EPSILON);
            assert!((w[i] - w2[i]).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn boundary_flow_scalar_block() {
        let m = BoundaryFlowMatrices::new(&BoundaryGains::unit(), 0.01);
        let y = boundary_flow(Vector3::new(0.0, 0.0, 1.0), Vector2::zeros(), Vector2::zeros(), &m);
        assert!((y[2] - (-0.01f64).exp()).abs() < 1e-15);
        assert_eq!((y[0], y[1]), (0.0, 0.0));
    }

    #[test]
    fn boundary_flow_oscillator_block_matches_series() {
        let dt = 0.05;
        let m = BoundaryFlowMatrices::new(&BoundaryGains::unit(), dt);
        let y = boundary_flow(Vector3::new(1.0, 0.0, 0.0), Vector2::zeros(), Vector2::zeros(), &m);
        // series of exp(dt [[0,1],[-1,-1]]) applied to (1, 0)
        let a = nalgebra::Matrix2::<f64>::new(0.0, 1.0, -1.0, -1.0) * dt;
        let mut term = nalgebra::Matrix2::<f64>::identity();
        let mut sum = term;
        for k in 1..40 {
            term = term * a / k as f64;
            sum += term;
        }
        assert!((y[0] - sum[(0, 0)]).abs() < 1e-12);
        assert!((y[1] - sum[(1, 0)]).abs() < 1e-12);
        assert_eq!(y[2], 0.0);
    }

    #[test]
    fn boundary_flow_zero_step_is_identity() {
        let m = BoundaryFlowMatrices::new(&BoundaryGains::unit(), 0.0);
        let y0 = Vector3::new(0.3, -1.2, 2.0);
        let y = boundary_flow(y0, Vector2::new(5.0, 1.0), Vector2::new(-3.0, 2.0), &m);
        assert_eq!(y, y0);
    }

    #[test]
    fn matrices_follow_gains() {
        let g = BoundaryGains {
            alpha1: 2.0,
            alpha2: 3.0,
            beta1: 4.0,
            gamma1: 5.0,
            mu1: 6.0,
        };
        let m = BoundaryFlowMatrices::new(&g, 0.1);
        assert_eq!(m.a[(1, 0)], -2.0);
        assert_eq!(m.a[(1, 1)], -3.0);
        assert_eq!(m.a[(0, 1)], 1.0);
        assert_eq!(m.a[(2, 2)], -5.0);
        assert_eq!(m.b[(1, 0)], -2.0);
        assert_eq!(m.b[(2, 1)], 3.0);
    }

    #[test]
    fn pulse_moves_one_cell() {
        let n = 20;
        let c = coeffs(FunctionSpec::constant(0.0), n);
        let grid = Grid::unit_cfl(n).unwrap();
        let mut xi = vec![0.0; n + 1];
        xi[7] = 1.0;
        let mut rho = vec![0.0; n + 1];
        rho[12] = -0.5;
        let s = RiemannState {
            t: 0.0,
            rho,
            xi,
            eta1: 0.0,
            eta2: 0.0,
            zeta1: 0.0,
        };
        let next = riemann_step(&s, &c, &grid).unwrap();
        let mut xi_expected = vec![0.0; n + 1];
        xi_expected[8] = 1.0;
        let mut rho_expected = vec![0.0; n + 1];
        rho_expected[11] = -0.5;
        assert_eq!(next.xi, xi_expected);
        assert_eq!(next.rho, rho_expected);
    }

    #[test]
    fn interior_is_permuted_without_damping() {
        let n = 50;
        let c = coeffs(FunctionSpec::constant(0.0), n);
        let grid = Grid::unit_cfl(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rho: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut xi: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // compatible walls with zero boundary state
        rho[n] = -xi[n];
        xi[0] = -rho[0];
        let s = RiemannState {
            t: 0.0,
            rho: rho.clone(),
            xi: xi.clone(),
            eta1: 0.0,
            eta2: 0.0,
            zeta1: 0.0,
        };
        let next = riemann_step(&s, &c, &grid).unwrap();
        assert_eq!(next.rho[1..n], rho[2..=n]);
        assert_eq!(next.xi[1..n], xi[0..n - 1]);
    }

    #[test]
    fn zero_state_stays_zero() {
        let n = 10;
        let s = RiemannState::from_fields(&[0.0; 11], &[0.0; 11], 0.0).unwrap();
        let next = riemann_step(&s, &c1(n), &Grid::unit_cfl(n).unwrap()).unwrap();
        assert_eq!(next, RiemannState { t: 0.1, ..s });
    }

    #[test]
    fn preconditions() {
        let n = 10;
        let s = RiemannState::from_fields(&[0.0; 11], &[0.0; 11], 0.0).unwrap();
        let g = Grid::new(n, 0.5, 1.0).unwrap();
        assert!(matches!(riemann_step(&s, &c1(n), &g), Err(RiemannError::NonUnitCfl { .. })));
        let variable = validate_coefficients(
            &CoefficientDescription::new(
                FunctionSpec::Linear { at0: 1.0, at1: 1.5 },
                FunctionSpec::indicator(0.3, 0.5, 5.0),
            ),
            n,
        )
        .unwrap();
        assert_eq!(
            riemann_step(&s, &variable, &Grid::unit_cfl(n).unwrap()),
            Err(RiemannError::RequiresConstantSpeed)
        );
    }

    fn bump_state(n: usize) -> RiemannState {
        let w: Vec<f64> = (0..=n)
            .map(|i| {
                // exact derivative of the bump
                let x = i as f64 / n as f64;
                -(x - 0.5) / 0.01 * (-(x - 0.5).powi(2) / 0.02).exp()
            })
            .collect();
        RiemannState::from_fields(&vec![0.0; n + 1], &w, 0.0).unwrap()
    }

    #[test]
    fn walls_stay_compatible_and_flow_is_consistent() {
        let n = 100;
        let c = c1(n);
        let grid = Grid::unit_cfl(n).unwrap();
        let stepper = RiemannStepper::new(&c, &grid, RiemannSource::Derived).unwrap();
        let mut s = bump_state(n);
        for _ in 0..300 {
            let next = stepper.step(&s).unwrap();
            assert!(next.compatibility_defect() <= 1e-12);
            // the implicit wall closure must agree with the explicit flow formula
            let v0 = Vector2::new(s.rho[n] - s.xi[n], s.rho[0] - s.xi[0]);
            let v1 = Vector2::new(next.rho[n] - next.xi[n], next.rho[0] - next.xi[0]);
            let y = boundary_flow(s.boundary(), v0, v1, stepper.flow());
            assert!((y - next.boundary()).abs().max() < 1e-13);
            s = next;
        }
    }

    #[test]
    fn quadratic_energy_does_not_grow() {
        let n = 200;
        let traj = simulate_riemann(
            &bump_state(n),
            &c1(n),
            &Grid::unit_cfl(n).unwrap(),
            20.0,
            1,
            RiemannSource::Derived,
            false,
        )
        .unwrap();
        let e0 = traj.energy[0];
        for w in traj.energy.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * e0, "{} -> {}", w[0], w[1]);
        }
        assert!(traj.energy.last().unwrap() < &(0.1 * e0));
        assert!(traj.max_compatibility_defect <= 1e-12);
    }

    #[test]
    fn forced_zero_data_stays_zero() {
        let n = 50;
        let zero = vec![0.0; n + 1];
        let run = simulate_forced(
            &zero,
            &zero,
            &c1(n),
            &Grid::unit_cfl(n).unwrap(),
            &|_| 0.0,
            &|_| 0.0,
            3.0,
            5.0,
            5,
        )
        .unwrap();
        assert!(run.e_hat.iter().all(|&e| e == 0.0));
        assert_eq!(run.times.len(), 51);
    }

    #[test]
    fn forcing_enters_through_the_walls() {
        let n = 50;
        let zero = vec![0.0; n + 1];
        let run = simulate_forced(
            &zero,
            &zero,
            &c1(n),
            &Grid::unit_cfl(n).unwrap(),
            &|t| (-t).exp(),
            &|_| 0.0,
            2.0,
            0.5,
            1,
        )
        .unwrap();
        assert!(run.e_hat.last().unwrap() > &0.1);
    }
}
