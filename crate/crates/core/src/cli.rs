//! Command-line runner: JSON experiment configs in, CSV series and JSON summaries out.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::energy::{self, EnergyError};
use crate::model::{
    attractor_related, validate_coefficients, AttractorVariant, CoefficientDescription, CoefficientSet,
    FunctionSpec, Grid, InitialData, InitialDescription, ModelError,
};
use crate::oracles::{self, DalembertReference, OracleError};
use crate::semidiscrete::{BoundaryModel, HYPERVISCOSITY};
use crate::solver_fd::{simulate_with, FdError, RecordOptions, WaveState};
use crate::solver_riemann::{
    simulate_forced, simulate_riemann, to_riemann, RiemannError, RiemannSource, RiemannState,
};
use crate::spectral::{self, SpectralError};
use crate::verify::{self, CriterionOutcome, Suite, VerifyError, VerifyOptions, Verifier};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INSTABILITY: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid config: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fd(#[from] FdError),
    #[error(transparent)]
    Riemann(#[from] RiemannError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{} criteria failed: {}", .0.len(), .0.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(", "))]
    VerifyFailed(Vec<usize>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Model(_) | Self::Json(_) => EXIT_CONFIG,
            Self::Fd(FdError::InstabilityDetected { .. }) | Self::Riemann(RiemannError::InstabilityDetected { .. }) => {
                EXIT_INSTABILITY
            }
            Self::Fd(FdError::Model(_) | FdError::CflViolation { .. } | FdError::GridTooCoarse(_)) => EXIT_CONFIG,
            Self::Riemann(
                RiemannError::Model(_) | RiemannError::NonUnitCfl { .. } | RiemannError::RequiresConstantSpeed,
            ) => EXIT_CONFIG,
            Self::Spectral(SpectralError::GridTooCoarse(_) | SpectralError::TooLarge(_)) => EXIT_CONFIG,
            Self::VerifyFailed(_) => EXIT_VERIFY,
            _ => EXIT_FAILURE,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Main,
    Related,
    Riemann,
    Iss,
    Spectral,
    Conservation,
    VerifySuite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n_cells")]
    pub n_cells: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_n_cells() -> usize {
    200
}
fn default_cfl() -> f64 {
    verify::DEFAULT_CFL
}
fn default_horizon() -> f64 {
    60.0
}
fn default_stride() -> usize {
    1
}
fn default_p() -> f64 {
    2.0
}
fn default_fit_window() -> (f64, f64) {
    verify::FIT_WINDOW
}
fn default_lambda_range() -> (f64, f64) {
    (-800.0, 800.0)
}
fn default_lambda_count() -> usize {
    1601
}
fn default_samples() -> usize {
    1000
}
fn default_epsilon() -> f64 {
    1.0
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_cells: default_n_cells(),
            cfl: default_cfl(),
            horizon: default_horizon(),
            record_stride: default_stride(),
        }
    }
}

fn default_coefficients() -> CoefficientDescription {
    CoefficientDescription::new(FunctionSpec::constant(1.0), FunctionSpec::indicator(0.3, 0.5, 5.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPreset {
    /// `u0` a gaussian bump at the midpoint, `u1 = 0`.
    GaussianBump,
    /// Seeded sum of low modes with `u0(0) = u0(1) = 0` and `u1 = 0` at both walls.
    RandomSmooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Preset { preset: InitialPreset },
    Profiles(InitialDescription),
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self::Preset {
            preset: InitialPreset::GaussianBump,
        }
    }
}

impl InitialConfig {
    pub fn sample(&self, n_cells: usize, seed: u64) -> Result<InitialData, ModelError> {
        match self {
            Self::Preset {
                preset: InitialPreset::GaussianBump,
            } => verify::bump_at_rest(n_cells),
            Self::Preset {
                preset: InitialPreset::RandomSmooth,
            } => Ok(random_smooth(n_cells, seed)),
            Self::Profiles(desc) => desc.sample(n_cells),
        }
    }
}

/// `u0 = sum b_k (1 - cos 2 pi k x) / (2 pi k)`, `u1 = sum a_k sin(k pi x)`, `k = 1..4`.
pub fn random_smooth(n_cells: usize, seed: u64) -> InitialData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (1..=4).map(|k| rng.random_range(-1.0..1.0) / k as f64).collect();
    let b: Vec<f64> = (1..=4).map(|k| rng.random_range(-1.0..1.0) / k as f64).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    let (mut u0, mut u1) = (Vec::with_capacity(n_cells + 1), Vec::with_capacity(n_cells + 1));
    for i in 0..=n_cells {
        let x = i as f64 / n_cells as f64;
        let mut displacement = 0.0;
        let mut velocity = 0.0;
        for k in 0..4 {
            let m = (k + 1) as f64;
            displacement += b[k] * (1.0 - (two_pi * m * x).cos()) / (two_pi * m);
            velocity += a[k] * (0.5 * two_pi * m * x).sin();
        }
        u0.push(displacement);
        u1.push(velocity);
    }
    InitialData::new(u0, u1).expect("equal lengths, at least one cell")
}

/// Boundary input of the characteristic system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Signal {
    Zero,
    /// `amplitude * exp(-rate t)`.
    Exponential { amplitude: f64, rate: f64 },
    /// `amplitude * sin(omega t)`.
    Sine { amplitude: f64, omega: f64 },
}

impl Signal {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Exponential { amplitude, rate } => amplitude * (-rate * t).exp(),
            Self::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub h1: Signal,
    pub h2: Signal,
    /// Weight in `eps^{1-p} e^{eps t}`; must lie in (0, 2).
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        Self {
            h1: Signal::Exponential {
                amplitude: 1.0,
                rate: 1.0,
            },
            h2: Signal::Zero,
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub json_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_coefficients")]
    pub coefficients: CoefficientDescription,
    #[serde(default)]
    pub initial_data: InitialConfig,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_fit_window")]
    pub fit_window: (f64, f64),
    #[serde(default = "default_lambda_range")]
    pub lambda_range: (f64, f64),
    #[serde(default = "default_lambda_count")]
    pub lambda_count: usize,
    #[serde(default = "default_samples")]
    pub dissipativity_samples: usize,
    #[serde(default)]
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub riemann_source: RiemannSource,
    #[serde(default = "default_suite")]
    pub suite: Suite,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_suite() -> Suite {
    Suite::Fast
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_json(&fs::read_to_string(path).map_err(io_error(path))?)
    }

    /// Checks scenario-independent ranges and the coefficient assumptions.
    pub fn validate(&self) -> Result<(), CliError> {
        let g = &self.grid;
        let bad = |msg: String| Err(CliError::Config(msg));
        if g.n_cells < 3 {
            return bad(format!("grid.n_cells = {} (need at least 3)", g.n_cells));
        }
        if !(g.cfl > 0.0 && g.cfl.is_finite()) {
            return bad(format!("grid.cfl = {} must be positive", g.cfl));
        }
        if !(g.horizon > 0.0 && g.horizon.is_finite()) {
            return bad(format!("grid.horizon = {} must be positive", g.horizon));
        }
        if g.record_stride == 0 {
            return bad("grid.record_stride must be at least 1".into());
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return bad(format!("p = {} must be at least 1", self.p));
        }
        let (t0, t1) = self.fit_window;
        if !(t0 >= 0.0 && t1 > t0) {
            return bad(format!("fit_window ({t0}, {t1}) must satisfy 0 <= t0 < t1"));
        }
        let (lo, hi) = self.lambda_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) || self.lambda_count == 0 {
            return bad(format!("lambda_range ({lo}, {hi}) with {} samples", self.lambda_count));
        }
        if !(self.forcing.epsilon > 0.0 && self.forcing.epsilon < 2.0) {
            return bad(format!("forcing.epsilon = {} must lie in (0, 2)", self.forcing.epsilon));
        }
        if self.scenario == Scenario::Related && self.coefficients.related.is_none() {
            return Err(ModelError::MissingRelatedGains.into());
        }
        if self.scenario == Scenario::Iss && self.p <= 1.0 {
            return bad("the iss scenario needs p > 1".into());
        }
        validate_coefficients(&self.coefficients, g.n_cells)?;
        Ok(())
    }

    /// Fit window clipped to the horizon, with a warning when clipping was needed.
    pub fn effective_fit_window(&self, warnings: &mut Vec<String>) -> (f64, f64) {
        let (t0, t1) = self.fit_window;
        let h = self.grid.horizon;
        if t1 <= h {
            return (t0, t1);
        }
        warnings.push(format!("fit window ends at {t1} beyond the horizon {h}; clipped"));
        (t0.min(0.5 * h), h)
    }

    fn coefficient_set(&self) -> Result<CoefficientSet, CliError> {
        Ok(validate_coefficients(&self.coefficients, self.grid.n_cells)?)
    }
}

/// Column names plus rows of a CSV series.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    /// Header row, then one line per row with 17 significant digits.
    pub fn write<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of one scenario run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: Table,
    pub summary: Value,
    /// False when a verify-suite run had failures.
    pub success: bool,
}

fn fit_json(fit: &energy::DecayFit) -> Value {
    json!({ "nu": fit.nu, "M": fit.m(), "r2": fit.r2, "window": [fit.window.0, fit.window.1] })
}

fn fit_or_note(times: &[f64], values: &[f64], window: (f64, f64), warnings: &mut Vec<String>) -> Value {
    match energy::fit_decay(times, values, window) {
        Ok(fit) => fit_json(&fit),
        Err(e) => {
            warnings.push(format!("decay fit skipped: {e}"));
            Value::Null
        }
    }
}

fn fd_grid(config: &ExperimentConfig, coeffs: &CoefficientSet) -> Result<Grid, CliError> {
    Ok(Grid::new(config.grid.n_cells, config.grid.cfl, coeffs.a_hi())?)
}

fn run_wave(config: &ExperimentConfig, model: BoundaryModel, warnings: &mut Vec<String>) -> Result<RunOutput, CliError> {
    let coeffs = config.coefficient_set()?;
    let n = config.grid.n_cells;
    let init = config.initial_data.sample(n, config.seed)?;
    if model == BoundaryModel::Wentzell && !init.is_compatible(1e-12) {
        warnings.push("wall velocities of u1 replaced by the boundary velocities".into());
    }
    let grid = fd_grid(config, &coeffs)?;
    let options = RecordOptions {
        fields: false,
        snapshot_every: (config.p != 2.0).then_some(1),
    };
    let traj = simulate_with(&init, &coeffs, &grid, model, config.grid.horizon, config.grid.record_stride, options)?;
    let mut table = Table::new(vec![
        "t", "E_total", "E_i", "E_b", "eta1", "eta2", "zeta1", "sup_dev", "dissipation",
    ]);
    for k in 0..traj.times.len() {
        let e = &traj.energy[k];
        let b = traj.boundary[k];
        table.rows.push(vec![
            traj.times[k],
            e.e_total,
            e.e_interior,
            e.e_boundary,
            b[0],
            b[1],
            b[2],
            traj.sup_dev[k],
            traj.dissipation[k],
        ]);
    }
    let e = traj.total_energy();
    let window = config.effective_fit_window(warnings);
    let mut summary = Map::new();
    summary.insert("fit".into(), fit_or_note(&traj.times, &e, window, warnings));
    summary.insert("komornik_ratio".into(), json!(energy::komornik_ratio(&traj.times, &e).ok()));
    summary.insert("E0".into(), json!(e[0]));
    summary.insert("E_final".into(), json!(energy::energy(&traj.final_state, &coeffs, 2.0)?.e_total));
    summary.insert("t_final".into(), json!(traj.final_state.t));
    summary.insert("sup_dev_initial".into(), json!(traj.sup_dev[0]));
    summary.insert("sup_dev_final".into(), json!(traj.sup_dev[traj.sup_dev.len() - 1]));
    summary.insert("dt".into(), json!(traj.grid.dt()));
    match model {
        BoundaryModel::Wentzell => {
            summary.insert("u_star".into(), json!(traj.attractor));
            summary.insert("constraint_drift".into(), json!(traj.constraint_drift));
            let k = energy::sup_energy_constant(&coeffs);
            let ratio = traj
                .sup_dev
                .iter()
                .zip(&traj.energy)
                .map(|(s, en)| s * s / (k * en.e_total))
                .fold(0.0, f64::max);
            summary.insert("sup_bound_constant".into(), json!(k));
            summary.insert("max_sup_dev_sq_over_bound".into(), json!(ratio));
        }
        BoundaryModel::Related => {
            let corrected = attractor_related(&init, &coeffs, AttractorVariant::Corrected)?;
            let printed = attractor_related(&init, &coeffs, AttractorVariant::AsPrinted).ok();
            let u = &traj.final_state.u;
            summary.insert("u_star_corrected".into(), json!(corrected));
            summary.insert("u_star_as_printed".into(), json!(printed));
            summary.insert("final_miss_corrected".into(), json!(energy::sup_deviation(u, corrected)));
            summary.insert(
                "final_miss_as_printed".into(),
                json!(printed.map(|v| energy::sup_deviation(u, v))),
            );
        }
        BoundaryModel::Pinned => {}
    }
    if config.p != 2.0 {
        let mut ep = Vec::with_capacity(traj.snapshots.len());
        for s in &traj.snapshots {
            ep.push(energy::energy(s, &coeffs, config.p)?.e_total);
        }
        summary.insert("fit_p".into(), fit_or_note(&traj.times, &ep, window, warnings));
    }
    Ok(RunOutput {
        table,
        summary: Value::Object(summary),
        success: true,
    })
}

fn run_riemann(config: &ExperimentConfig, warnings: &mut Vec<String>) -> Result<RunOutput, CliError> {
    let coeffs = config.coefficient_set()?;
    let n = config.grid.n_cells;
    if config.grid.cfl != 1.0 {
        warnings.push(format!("cfl {} ignored; characteristic transport runs at dt = dx", config.grid.cfl));
    }
    let grid = Grid::unit_cfl(n)?;
    let init = config.initial_data.sample(n, config.seed)?;
    let w = WaveState::initial(&init, BoundaryModel::Wentzell);
    let start = RiemannState::from_fields(&w.v, &w.nodal_slope(), init.eta2_0)?;
    let traj = simulate_riemann(
        &start,
        &coeffs,
        &grid,
        config.grid.horizon,
        config.grid.record_stride,
        config.riemann_source,
        false,
    )?;
    let mut table = Table::new(vec!["t", "E_total", "eta1", "eta2", "zeta1"]);
    for (k, &t) in traj.times.iter().enumerate() {
        let b = traj.boundary[k];
        table.rows.push(vec![t, traj.energy[k], b[0], b[1], b[2]]);
    }
    let window = config.effective_fit_window(warnings);
    let summary = json!({
        "fit": fit_or_note(&traj.times, &traj.energy, window, warnings),
        "komornik_ratio": energy::komornik_ratio(&traj.times, &traj.energy).ok(),
        "max_compatibility_defect": traj.max_compatibility_defect,
        "E0": traj.energy[0],
        "E_final": traj.energy[traj.energy.len() - 1],
    });
    Ok(RunOutput {
        table,
        summary,
        success: true,
    })
}

/// Cumulative `int_0^t |(h1, h2)|^p ds` at the given times (composite Simpson per interval).
fn input_integral(times: &[f64], forcing: &ForcingConfig, p: f64) -> Vec<f64> {
    let f = |s: f64| forcing.h1.eval(s).hypot(forcing.h2.eval(s)).powf(p);
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &t in times {
        let panels = 32;
        let h = (t - prev) / panels as f64;
        if h > 0.0 {
            let mut s = f(prev) + f(t);
            for j in 1..panels {
                s += f(prev + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc += s * h / 3.0;
        }
        out.push(acc);
        prev = t;
    }
    out
}

fn run_iss(config: &ExperimentConfig, warnings: &mut Vec<String>) -> Result<RunOutput, CliError> {
    let coeffs = config.coefficient_set()?;
    let n = config.grid.n_cells;
    let grid = Grid::unit_cfl(n)?;
    let init = config.initial_data.sample(n, config.seed)?;
    let w = WaveState::initial(&init, BoundaryModel::Pinned);
    let (rho, xi) = to_riemann(&init.u1, &w.nodal_slope())?;
    let p = config.p;
    let (horizon, stride) = (config.grid.horizon, config.grid.record_stride);
    let zero = |_: f64| 0.0;
    let free = simulate_forced(&rho, &xi, &coeffs, &grid, &zero, &zero, p, horizon, stride)?;
    let h1 = |t: f64| config.forcing.h1.eval(t);
    let h2 = |t: f64| config.forcing.h2.eval(t);
    let forced = simulate_forced(&rho, &xi, &coeffs, &grid, &h1, &h2, p, horizon, stride)?;
    let window = config.effective_fit_window(warnings);
    let fit = energy::fit_decay(&free.times, &free.e_hat, window)?;
    let eps = config.forcing.epsilon;
    let inputs = input_integral(&forced.times, &config.forcing, p);
    let e0 = forced.e_hat[0];
    let mut table = Table::new(vec!["t", "E_hat_free", "E_hat_forced", "envelope"]);
    let mut c_fit: f64 = 0.0;
    for k in 0..forced.times.len() {
        let t = forced.times[k];
        let envelope = (-fit.nu * t).exp() * e0 + eps.powf(1.0 - p) * (eps * t).exp() * inputs[k];
        if envelope > 0.0 {
            c_fit = c_fit.max(forced.e_hat[k] / envelope);
        }
        table.rows.push(vec![t, free.e_hat[k], forced.e_hat[k], envelope]);
    }
    let summary = json!({
        "p": p,
        "alpha": fit.nu,
        "fit": fit_json(&fit),
        "epsilon": eps,
        "c_fit": c_fit,
        "E_hat0": e0,
        "input_integral": inputs.last().copied().unwrap_or(0.0),
    });
    Ok(RunOutput {
        table,
        summary,
        success: true,
    })
}

fn run_spectral(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let coeffs = config.coefficient_set()?;
    let gen = spectral::assemble_generator(&coeffs, config.grid.n_cells)?;
    let report = spectral::spectrum(&gen)?;
    let (lo, hi) = config.lambda_range;
    let sweep = spectral::resolvent_sweep(&gen, &spectral::lambda_grid(lo, hi, config.lambda_count))?;
    let diss = spectral::dissipativity_residual(&gen, config.dissipativity_samples, config.seed);
    let mut table = Table::new(vec!["lambda", "resolvent_norm"]);
    table.rows = sweep.samples.iter().map(|&(l, r)| vec![l, r]).collect();
    let eigenvalues: Vec<[f64; 2]> = report.eigenvalues.iter().map(|z| [z.re, z.im]).collect();
    let summary = json!({
        "abscissa": report.abscissa,
        "axis_hits": report.axis_hits,
        "h1": report.h1_holds(),
        "h2": report.h1_holds() && sweep.sup.is_finite(),
        "resolvent_sup": sweep.sup,
        "resolvent_argmax": sweep.argmax,
        "dissipativity": diss,
        "eigenvalues": eigenvalues,
    });
    Ok(RunOutput {
        table,
        summary,
        success: true,
    })
}

fn run_conservation(config: &ExperimentConfig, warnings: &mut Vec<String>) -> Result<RunOutput, CliError> {
    let coeffs = config.coefficient_set()?;
    let n = config.grid.n_cells;
    if coeffs.q_hi() > 0.0 {
        warnings.push("interior damping is active; energy is not expected to be conserved".into());
    }
    let init = config.initial_data.sample(n, config.seed)?;
    let grid = fd_grid(config, &coeffs)?;
    let options = RecordOptions {
        fields: true,
        snapshot_every: None,
    };
    let traj = simulate_with(
        &init,
        &coeffs,
        &grid,
        BoundaryModel::Pinned,
        config.grid.horizon,
        config.grid.record_stride,
        options,
    )?;
    let reference = if coeffs.is_constant_speed(1.0) && coeffs.q_hi() == 0.0 {
        let fine = config.initial_data.sample(16 * n, config.seed)?;
        Some(DalembertReference::new(&fine.u0, &fine.u1)?)
    } else {
        None
    };
    let e = traj.total_energy();
    let mut table = Table::new(vec!["t", "E_total", "u_error"]);
    let mut max_error: f64 = 0.0;
    for (k, rec) in traj.fields.iter().enumerate() {
        let err = match (&reference, &rec.u) {
            (Some(r), Some(u)) => u
                .iter()
                .enumerate()
                .map(|(i, v)| (v - r.eval(rec.t, i as f64 / n as f64)).abs())
                .fold(0.0, f64::max),
            _ => f64::NAN,
        };
        max_error = max_error.max(err);
        table.rows.push(vec![traj.times[k], e[k], err]);
    }
    let summary = json!({
        "conservation_drift": oracles::conservation_check(&traj)?,
        "dalembert_max_error": reference.as_ref().map(|_| max_error),
        "E0": e[0],
        "dt": traj.grid.dt(),
    });
    Ok(RunOutput {
        table,
        summary,
        success: true,
    })
}

fn outcomes_table(outcomes: &[CriterionOutcome]) -> Table {
    let mut table = Table::new(vec!["criterion", "passed", "seconds"]);
    for o in outcomes {
        table.rows.push(vec![o.id as f64, f64::from(u8::from(o.passed)), o.seconds]);
    }
    table
}

fn run_verify_suite(config: &ExperimentConfig) -> RunOutput {
    let mut options = VerifyOptions::new(config.suite);
    options.seed = config.seed;
    options.riemann_source = config.riemann_source;
    let outcomes = Verifier::new(options).run_all();
    for o in &outcomes {
        eprintln!("{o}");
    }
    let success = outcomes.iter().all(|o| o.passed);
    RunOutput {
        table: outcomes_table(&outcomes),
        summary: json!({ "suite": config.suite, "all_passed": success, "criteria": outcomes }),
        success,
    }
}

/// Runs a validated config without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let mut warnings = Vec::new();
    let mut out = match config.scenario {
        Scenario::Main => run_wave(config, BoundaryModel::Wentzell, &mut warnings)?,
        Scenario::Related => run_wave(config, BoundaryModel::Related, &mut warnings)?,
        Scenario::Riemann => run_riemann(config, &mut warnings)?,
        Scenario::Iss => run_iss(config, &mut warnings)?,
        Scenario::Spectral => run_spectral(config)?,
        Scenario::Conservation => run_conservation(config, &mut warnings)?,
        Scenario::VerifySuite => run_verify_suite(config),
    };
    if let Value::Object(map) = &mut out.summary {
        map.insert("scenario".into(), serde_json::to_value(config.scenario)?);
        map.insert("hyperviscosity".into(), json!(HYPERVISCOSITY));
        map.insert("warnings".into(), json!(warnings));
        map.insert("config".into(), serde_json::to_value(config)?);
    }
    Ok(out)
}

/// Writes the CSV and JSON artifacts named in the config.
pub fn write_artifacts(config: &ExperimentConfig, out: &RunOutput) -> Result<(), CliError> {
    if let Some(path) = &config.output.csv_path {
        let file = fs::File::create(path).map_err(io_error(path))?;
        out.table.write(io::BufWriter::new(file))?;
    }
    if let Some(path) = &config.output.json_path {
        let text = serde_json::to_string_pretty(&out.summary)?;
        fs::write(path, text + "\n").map_err(io_error(path))?;
    }
    Ok(())
}

pub fn run(config: &ExperimentConfig) -> Result<Value, CliError> {
    let out = execute(config)?;
    write_artifacts(config, &out)?;
    if !out.success {
        return Err(CliError::VerifyFailed(failed_ids(&out.summary)));
    }
    Ok(out.summary)
}

fn failed_ids(summary: &Value) -> Vec<usize> {
    summary["criteria"]
        .as_array()
        .map(|list| {
            list.iter()
                .filter(|c| c["passed"] == json!(false))
                .filter_map(|c| c["id"].as_u64().map(|id| id as usize))
                .collect()
        })
        .unwrap_or_default()
}

/// Sets the value at a dotted path such as `grid.n_cells` or `coefficients.gains.mu1`.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("malformed parameter path `{path}`")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("`{path}`: `{key}` is not inside an object")))?;
        node = map.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let map = node
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("`{path}` does not name an object field")))?;
    map.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// JSON literal when it parses as one, string otherwise.
pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}-{tag}.{ext}"),
        None => format!("{stem}-{tag}"),
    };
    path.with_file_name(name)
}

/// One config per value (applied on top of the defaults), with output paths tagged by the value; runs concurrently.
pub fn sweep(base: &str, param: &str, values: &[String]) -> Result<Value, CliError> {
    let raw = serde_json::to_value(ExperimentConfig::from_json(base)?)?;
    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let mut doc = raw.clone();
        set_path(&mut doc, param, parse_value(v))?;
        let mut config = ExperimentConfig::from_json(&doc.to_string())?;
        let tag = format!("{}={}", param.rsplit('.').next().unwrap_or(param), v);
        config.output.csv_path = config.output.csv_path.as_deref().map(|p| suffixed(p, &tag));
        config.output.json_path = config.output.json_path.as_deref().map(|p| suffixed(p, &tag));
        configs.push(config);
    }
    let results: Vec<Result<Value, CliError>> = configs.par_iter().map(run).collect();
    let mut runs = Vec::with_capacity(results.len());
    for (v, r) in values.iter().zip(results) {
        runs.push(json!({ "value": parse_value(v), "summary": r? }));
    }
    Ok(json!({ "param": param, "runs": runs }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Fast,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Derived,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruthArg {
    Corrected,
    AsPrinted,
}

#[derive(Debug, Parser)]
#[command(name = "wentzell", version, about = "Damped wave equation with dynamic boundary feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario described by a JSON config.
    Run { config: PathBuf },
    /// Run the acceptance checks; exit 4 lists failures.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        /// Restrict to these criteria (repeatable).
        #[arg(long = "criterion")]
        criteria: Vec<usize>,
        /// Write the outcomes as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Source factor of the characteristic solver.
        #[arg(long, value_enum, default_value = "derived")]
        riemann_source: SourceArg,
        /// Attractor formula treated as the truth.
        #[arg(long, value_enum, default_value = "corrected")]
        attractor_truth: TruthArg,
    },
    /// Run a config once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// Dotted path into the config, e.g. `grid.n_cells`.
        #[arg(long)]
        param: String,
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<String>,
    },
}

fn verify_command(
    suite: SuiteArg,
    criteria: &[usize],
    json_path: Option<&Path>,
    source: SourceArg,
    truth: TruthArg,
) -> Result<Value, CliError> {
    let mut options = VerifyOptions::new(match suite {
        SuiteArg::Fast => Suite::Fast,
        SuiteArg::Full => Suite::Full,
    });
    options.riemann_source = match source {
        SourceArg::Derived => RiemannSource::Derived,
        SourceArg::Printed => RiemannSource::Printed,
    };
    options.attractor_truth = match truth {
        TruthArg::Corrected => AttractorVariant::Corrected,
        TruthArg::AsPrinted => AttractorVariant::AsPrinted,
    };
    let ids: Vec<usize> = if criteria.is_empty() {
        (1..=verify::CRITERIA).collect()
    } else {
        criteria.to_vec()
    };
    if let Some(bad) = ids.iter().find(|id| verify::criterion_name(**id).is_none()) {
        return Err(CliError::Config(format!("no criterion {bad}")));
    }
    let verifier = Verifier::new(options);
    let mut outcomes = Vec::with_capacity(ids.len());
    for id in ids {
        let o = verifier.run_reported(id);
        println!("{o}");
        outcomes.push(o);
    }
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    let report = json!({ "options": options, "all_passed": failed.is_empty(), "criteria": outcomes });
    if let Some(path) = json_path {
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n").map_err(io_error(path))?;
    }
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(CliError::VerifyFailed(failed))
    }
}

/// Dispatches a parsed command; the summary goes to stdout.
pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let config = ExperimentConfig::load(&config)?;
            let summary = run(&config)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Verify {
            suite,
            criteria,
            json,
            riemann_source,
            attractor_truth,
        } => {
            verify_command(suite, &criteria, json.as_deref(), riemann_source, attractor_truth)?;
        }
        Command::Sweep { config, param, values } => {
            let base = fs::read_to_string(&config).map_err(io_error(&config))?;
            println!("{}", serde_json::to_string_pretty(&sweep(&base, &param, &values)?)?);
        }
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::from_json(text)
    }

    #[test]
    fn defaults_fill_a_minimal_config() {
        let c = config(r#"{"scenario": "main"}"#).unwrap();
        assert_eq!(c.grid, GridConfig::default());
        assert_eq!(c.p, 2.0);
        assert_eq!(c.fit_window, (10.0, 60.0));
        assert_eq!(c.initial_data, InitialConfig::default());
        assert_eq!(c.coefficients, default_coefficients());
    }

    #[test]
    fn negative_gain_names_the_assumption() {
        let err = config(
            r#"{"scenario": "main", "coefficients": {"a": {"kind": "constant", "value": 1.0},
                "q": {"kind": "indicator", "left": 0.3, "right": 0.5, "level": 5.0},
                "gains": {"alpha1": 1, "alpha2": 1, "beta1": -1, "gamma1": 1, "mu1": 1}}}"#,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        assert!(err.to_string().contains("A3"), "{err}");
    }

    #[test]
    fn malformed_configs_are_rejected() {
        for text in [
            r#"{"scenario": "nope"}"#,
            r#"{"scenario": "main", "grid": {"n_cells": 2}}"#,
            r#"{"scenario": "main", "grid": {"horizon": -1}}"#,
            r#"{"scenario": "main", "grid": {"record_stride": 0}}"#,
            r#"{"scenario": "main", "fit_window": [5, 1]}"#,
            r#"{"scenario": "main", "unknown_key": 1}"#,
            r#"{"scenario": "iss", "forcing": {"h1": {"kind": "zero"}, "h2": {"kind": "zero"}, "epsilon": 2.5}}"#,
            r#"{"scenario": "related"}"#,
        ] {
            let err = config(text).unwrap_err();
            assert_eq!(err.exit_code(), EXIT_CONFIG, "{text}: {err}");
        }
    }

    #[test]
    fn fit_window_beyond_horizon_warns() {
        let c = config(r#"{"scenario": "main", "grid": {"horizon": 20}}"#).unwrap();
        let mut warnings = Vec::new();
        assert_eq!(c.effective_fit_window(&mut warnings), (10.0, 20.0));
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(CliError::Fd(FdError::InstabilityDetected { t: 1.0 }).exit_code(), EXIT_INSTABILITY);
        assert_eq!(
            CliError::Riemann(RiemannError::InstabilityDetected { t: 1.0 }).exit_code(),
            EXIT_INSTABILITY
        );
        assert_eq!(CliError::VerifyFailed(vec![6]).exit_code(), EXIT_VERIFY);
        assert_eq!(CliError::Fd(FdError::CflViolation { dt: 1.0, limit: 0.5 }).exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::VerifyFailed(vec![5, 6]).to_string(), "2 criteria failed: 5, 6");
    }

    #[test]
    fn csv_uses_seventeen_significant_digits() {
        let mut t = Table::new(vec!["t", "x"]);
        t.rows.push(vec![0.1, -1.0 / 3.0]);
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,x\n1.0000000000000001e-1,-3.3333333333333331e-1\n");
        let back: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, -1.0 / 3.0);
    }

    #[test]
    fn set_path_creates_and_overwrites() {
        let mut v = json!({"grid": {"n_cells": 10}});
        set_path(&mut v, "grid.n_cells", json!(20)).unwrap();
        set_path(&mut v, "coefficients.gains.mu1", json!(2.0)).unwrap();
        assert_eq!(v, json!({"grid": {"n_cells": 20}, "coefficients": {"gains": {"mu1": 2.0}}}));
        assert!(set_path(&mut v, "grid.n_cells.x", json!(1)).is_err());
        assert!(set_path(&mut v, "grid..x", json!(1)).is_err());
        assert_eq!(parse_value("0.5"), json!(0.5));
        assert_eq!(parse_value("fast"), json!("fast"));
    }

    #[test]
    fn random_smooth_is_seeded_and_compatible() {
        let a = random_smooth(64, 3);
        assert_eq!(a, random_smooth(64, 3));
        assert_ne!(a, random_smooth(64, 4));
        assert!(a.u0[0].abs() < 1e-15 && a.u0[64].abs() < 1e-15);
        assert!(a.is_compatible(1e-12));
    }

    #[test]
    fn input_integral_of_decaying_exponential() {
        let forcing = ForcingConfig::default();
        let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        let got = input_integral(&times, &forcing, 2.0);
        for (t, g) in times.iter().zip(&got) {
            assert!((g - 0.5 * (1.0 - (-2.0 * t).exp())).abs() < 1e-9);
        }
    }

    #[test]
    fn main_scenario_summary_and_columns() {
        let c = config(r#"{"scenario": "main", "grid": {"n_cells": 50, "horizon": 30, "record_stride": 5}}"#).unwrap();
        let out = execute(&c).unwrap();
        assert_eq!(
            out.table.header,
            ["t", "E_total", "E_i", "E_b", "eta1", "eta2", "zeta1", "sup_dev", "dissipation"]
        );
        assert!(out.summary["fit"]["nu"].as_f64().unwrap() > 0.0);
        assert_eq!(out.summary["config"]["grid"]["cfl"], json!(0.9));
        assert!((out.summary["t_final"].as_f64().unwrap() - 30.0).abs() < 1e-9);
        let last = out.table.rows.last().unwrap()[0];
        assert!(last <= 30.0 && last > 30.0 - 5.0 * 0.9 / 50.0);
    }

    #[test]
    fn spectral_scenario_flags() {
        let c = config(r#"{"scenario": "spectral", "grid": {"n_cells": 40}, "lambda_count": 41}"#).unwrap();
        let out = execute(&c).unwrap();
        assert!(out.summary["abscissa"].as_f64().unwrap() < 0.0);
        assert_eq!(out.summary["h1"], json!(true));
        assert_eq!(out.summary["h2"], json!(true));
        // the grid plus the refined peaks
        assert!(out.table.rows.len() >= 41);
    }

    #[test]
    fn riemann_requires_unit_speed() {
        let c = config(
            r#"{"scenario": "riemann", "coefficients": {"a": {"kind": "linear", "at0": 1, "at1": 1.5},
                "q": {"kind": "indicator", "left": 0.3, "right": 0.5, "level": 5.0}}}"#,
        )
        .unwrap();
        assert_eq!(execute(&c).unwrap_err().exit_code(), EXIT_CONFIG);
    }
}
