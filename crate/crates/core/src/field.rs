//! Split-step integration of the intracavity field coupled to the mirror chain.
//!
//! The right-hand side is cut into three pieces, each solved exactly:
//!
//! * `L`: `dF/dtau = (-1 + i(Delta + Zbar) + i d^2/dx^2) F + E`, diagonal in
//!   Fourier space. `Zbar` is the mean mirror displacement.
//! * `P`: `dF/dtau = i (Z - Zbar) F`, a pointwise phase rotation.
//! * `M`: the mirror chain driven by the radiation pressure of the current
//!   field.
//!
//! One step of length `h` is the symmetric composition
//! `L(h/2) P(h/2) M(h) P(h/2) L(h/2)` with the pump evaluated at mid-step,
//! which is second order in `h`. Putting the pump and the mean displacement
//! into `L` keeps homogeneous stationary states exactly stationary and keeps
//! the scheme invariant under `Delta -> Delta + d`, `Z -> Z - d`.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::grid::{Grid1D, Spectral};
use crate::lattice::{radiation_accels, ChainFlow, LatticeState, QuadratureWeights};
use crate::model::{hss_field, hss_intensities, NormalizedParams};
use crate::pump::{base_profile, PumpSchedule, SuperGaussian};
use crate::snapshot::Snapshot;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_NOISE: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Complex amplitude of the intracavity field on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub f: Vec<Complex64>,
}

impl FieldState {
    pub fn intensity(&self) -> Vec<f64> {
        self.f.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// `exp(dt (-1 + i Delta - i k^2))` for every wavenumber of the grid.
pub fn linear_factor(grid: &Grid1D, detuning: f64, dt: f64) -> Vec<Complex64> {
    grid.k
        .iter()
        .map(|k| (Complex64::new(-1.0, detuning - k * k) * dt).exp())
        .collect()
}

/// Exact flow of `dF/dtau = (-1 + i Delta + i d^2/dx^2) F` over `dt`.
pub fn linear_halfstep(field: &FieldState, grid: &Grid1D, detuning: f64, dt: f64) -> FieldState {
    let mut spec = Spectral::new(grid.len());
    let mut f = field.f.clone();
    spec.apply_multiplier(&mut f, &linear_factor(grid, detuning, dt));
    FieldState { f }
}

/// Exact flow of `dF/dtau = (-1 + i Delta + i d^2/dx^2) F + E` over `dt`
/// with `E` frozen.
pub fn driven_linear_step(field: &FieldState, pump: &[Complex64], grid: &Grid1D, detuning: f64, dt: f64) -> FieldState {
    let mut spec = Spectral::new(grid.len());
    let mut f = field.f.clone();
    let mut e = pump.to_vec();
    spec.forward(&mut f);
    spec.forward(&mut e);
    for ((f, e), k) in f.iter_mut().zip(&e).zip(&grid.k) {
        let lambda = Complex64::new(-1.0, detuning - k * k);
        let g = (lambda * dt).exp();
        *f = g * *f + (g - 1.0) / lambda * e;
    }
    spec.inverse(&mut f);
    FieldState { f }
}

/// Coefficients `(a, b)` of the exact flow `F -> a F + b E` of
/// `dF/dtau = iZF + E` over `dt`.
#[inline]
pub fn nonlinear_coefficients(z: f64, dt: f64) -> (Complex64, Complex64) {
    if z.abs() < 1e-8 {
        return (Complex64::new(1.0, 0.0), Complex64::new(dt, 0.0));
    }
    let theta = z * dt;
    let (s, c) = theta.sin_cos();
    let half = (0.5 * theta).sin();
    // (e^{i theta} - 1) / (i Z), written without cancellation
    let b = Complex64::new(s / z, 2.0 * half * half / z);
    (Complex64::new(c, s), b)
}

/// Exact flow of `dF/dtau = iZF + E` with `Z` and `E` frozen.
pub fn nonlinear_step(field: &FieldState, z: &[f64], pump: &[Complex64], dt: f64) -> FieldState {
    let f = field
        .f
        .iter()
        .zip(z)
        .zip(pump)
        .map(|((&f, &z), &e)| {
            let (a, b) = nonlinear_coefficients(z, dt);
            a * f + b * e
        })
        .collect();
    FieldState { f }
}

/// Lowest homogeneous branch under the local pump value plus uniform complex
/// noise of the given amplitude.
pub fn initial_field(detuning: f64, base: &SuperGaussian, x: &[f64], seed: u64, noise: f64) -> Result<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    x.iter()
        .map(|&xi| {
            let e = base.at(xi);
            let lowest = hss_intensities(detuning, e * e)[0];
            let f = hss_field(lowest, detuning, e)?.field;
            let re: f64 = rng.random_range(-1.0..=1.0);
            let im: f64 = rng.random_range(-1.0..=1.0);
            Ok(f + noise * Complex64::new(re, im))
        })
        .collect()
}

pub(crate) fn check_field(f: &[Complex64], tau: f64) -> Result<()> {
    match f.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
        Some(index) => Err(Error::Diverged { tau, index, what: "field" }),
        None => Ok(()),
    }
}

/// The `L` substep: Fourier-space propagation with the pump, whose spectrum
/// is cached and recomputed only when the set of active beams changes.
#[derive(Debug, Clone)]
pub(crate) struct FieldPropagator {
    spectral: Spectral,
    half: f64,
    lambda: Vec<Complex64>,
    decay: Vec<Complex64>,
    base: Vec<f64>,
    active: Vec<bool>,
    pump_hat: Vec<Complex64>,
    pump_valid: bool,
}

impl FieldPropagator {
    pub(crate) fn new(grid: &Grid1D, detuning: f64, dt: f64, schedule: &PumpSchedule) -> Self {
        let half = 0.5 * dt;
        let lambda: Vec<Complex64> = grid.k.iter().map(|k| Complex64::new(-1.0, detuning - k * k)).collect();
        let n = grid.len();
        FieldPropagator {
            spectral: Spectral::new(n),
            half,
            decay: lambda.iter().map(|l| (l * half).exp()).collect(),
            lambda,
            base: base_profile(&schedule.base, &grid.x),
            active: vec![],
            pump_hat: vec![Complex64::new(0.0, 0.0); n],
            pump_valid: false,
        }
    }

    pub(crate) fn spectral(&mut self) -> &mut Spectral {
        &mut self.spectral
    }

    pub(crate) fn schedule_changed(&mut self, old: &PumpSchedule, new: &PumpSchedule, x: &[f64]) {
        if old.base != new.base {
            self.base = base_profile(&new.base, x);
        }
        self.pump_valid = false;
    }

    /// Makes the cached pump spectrum match the beams active at `tau`.
    pub(crate) fn prepare(&mut self, schedule: &PumpSchedule, x: &[f64], tau: f64) {
        let active: Vec<bool> = schedule.beams.iter().map(|b| b.is_active(tau)).collect();
        if self.pump_valid && active == self.active {
            return;
        }
        schedule.fill(x, &self.base, tau, &mut self.pump_hat);
        self.spectral.forward(&mut self.pump_hat);
        self.active = active;
        self.pump_valid = true;
    }

    /// Advances `field` by half a step of `L` with mean displacement `zbar`.
    pub(crate) fn half_step(&mut self, field: &mut [Complex64], zbar: f64) {
        self.spectral.forward(field);
        let shift = Complex64::from_polar(1.0, zbar * self.half);
        let iz = Complex64::new(0.0, zbar);
        for (((f, e), l), d) in field.iter_mut().zip(&self.pump_hat).zip(&self.lambda).zip(&self.decay) {
            let g = d * shift;
            *f = g * *f + (g - 1.0) / (l + iz) * e;
        }
        self.spectral.inverse(field);
    }
}

/// Common surface of the lattice and continuum solvers.
pub trait Evolver {
    fn step(&mut self) -> Result<()>;
    fn tau(&self) -> f64;
    fn dt(&self) -> f64;
    fn grid(&self) -> &Grid1D;
    fn field(&self) -> &[Complex64];
    /// Mirror displacement on the field grid.
    fn z_grid(&self) -> Vec<f64>;
    fn snapshot(&self) -> Snapshot;
    fn schedule(&self) -> &PumpSchedule;
    fn set_schedule(&mut self, schedule: PumpSchedule) -> Result<()>;

    fn intensity(&self) -> Vec<f64> {
        self.field().iter().map(|c| c.norm_sqr()).collect()
    }

    fn advance(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }
}

/// The field coupled to the chain of `N` micromirrors.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: NormalizedParams,
    grid: Grid1D,
    schedule: PumpSchedule,
    dt: f64,
    tau0: f64,
    steps: u64,
    field: Vec<Complex64>,
    lattice: LatticeState,
    weights: QuadratureWeights,
    flow: ChainFlow,
    propagator: FieldPropagator,
    intensity: Vec<f64>,
    drive: Vec<f64>,
}

impl Simulation {
    /// Starts from `z = v = 0` and the lowest homogeneous branch plus noise.
    pub fn new(params: NormalizedParams, schedule: PumpSchedule, dt: f64, seed: u64, noise: f64) -> Result<Self> {
        let grid = Grid1D::for_lattice(&params)?;
        let field = initial_field(params.detuning, &schedule.base, &grid.x, seed, noise)?;
        let lattice = LatticeState::at_rest(params.mirrors);
        Self::from_state(params, schedule, dt, 0.0, field, lattice)
    }

    pub fn from_state(
        params: NormalizedParams,
        schedule: PumpSchedule,
        dt: f64,
        tau: f64,
        field: Vec<Complex64>,
        lattice: LatticeState,
    ) -> Result<Self> {
        params.validate()?;
        schedule.validate()?;
        if !(dt > 0.0) {
            return domain(format!("time step must be positive, got {dt}"));
        }
        if dt > params.max_dt() * (1.0 + 1e-12) {
            return domain(format!("time step {dt} exceeds the limit 0.1/Omega = {}", params.max_dt()));
        }
        let grid = Grid1D::for_lattice(&params)?;
        if field.len() != grid.len() || lattice.len() != params.mirrors || lattice.v.len() != params.mirrors {
            return Err(Error::Contract("initial state does not match the grid".into()));
        }
        check_field(&field, tau)?;
        lattice.check_finite(tau)?;
        let weights = QuadratureWeights::new(params.points_per_mirror)?;
        let flow = ChainFlow::new(params.mirrors, params.omega, params.gamma, params.coupling_strength(), dt);
        let propagator = FieldPropagator::new(&grid, params.detuning, dt, &schedule);
        Ok(Simulation {
            intensity: vec![0.0; grid.len()],
            drive: vec![0.0; params.mirrors],
            params,
            grid,
            schedule,
            dt,
            tau0: tau,
            steps: 0,
            field,
            lattice,
            weights,
            flow,
            propagator,
        })
    }

    pub fn params(&self) -> &NormalizedParams {
        &self.params
    }

    pub fn lattice(&self) -> &LatticeState {
        &self.lattice
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn mean_displacement(&self) -> f64 {
        self.lattice.z.iter().sum::<f64>() / self.lattice.len() as f64
    }

    fn half_phase(&mut self, zbar: f64) {
        let m = self.params.points_per_mirror;
        let h = 0.5 * self.dt;
        for (j, &z) in self.lattice.z.iter().enumerate() {
            let rot = Complex64::from_polar(1.0, (z - zbar) * h);
            self.field[j * m..(j + 1) * m].iter_mut().for_each(|f| *f *= rot);
        }
    }
}

impl Evolver for Simulation {
    fn step(&mut self) -> Result<()> {
        let mid = self.tau() + 0.5 * self.dt;
        self.propagator.prepare(&self.schedule, &self.grid.x, mid);

        let zbar = self.mean_displacement();
        self.propagator.half_step(&mut self.field, zbar);
        self.half_phase(zbar);

        for (i, f) in self.intensity.iter_mut().zip(&self.field) {
            *i = f.norm_sqr();
        }
        radiation_accels(&self.intensity, &self.weights, self.params.omega, &mut self.drive);
        self.flow.advance(&mut self.lattice, &self.drive);

        let zbar = self.mean_displacement();
        self.half_phase(zbar);
        self.propagator.half_step(&mut self.field, zbar);

        self.steps += 1;
        let tau = self.tau();
        check_field(&self.field, tau)?;
        self.lattice.check_finite(tau)
    }

    fn tau(&self) -> f64 {
        self.tau0 + self.steps as f64 * self.dt
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn field(&self) -> &[Complex64] {
        &self.field
    }

    fn z_grid(&self) -> Vec<f64> {
        let m = self.params.points_per_mirror;
        self.lattice.z.iter().flat_map(|&z| std::iter::repeat_n(z, m)).collect()
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            tau: self.tau(),
            mirrors: self.params.mirrors,
            points_per_mirror: self.params.points_per_mirror,
            x: self.grid.x.clone(),
            field: self.field.clone(),
            z_grid: self.z_grid(),
            z: self.lattice.z.clone(),
            v: self.lattice.v.clone(),
        }
    }

    fn schedule(&self) -> &PumpSchedule {
        &self.schedule
    }

    fn set_schedule(&mut self, schedule: PumpSchedule) -> Result<()> {
        schedule.validate()?;
        self.propagator.schedule_changed(&self.schedule, &schedule, &self.grid.x);
        self.schedule = schedule;
        Ok(())
    }
}

/// Number of consecutive quiet checks that mark a run as steady.
pub const STEADY_CHECKS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub tau_end: f64,
    pub snapshot_interval: f64,
    /// Threshold on the sup-norm change of `(|F|^2, Z)` per unit time.
    pub steady_tol: f64,
    pub stop_on_steady: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tau_end: 100.0, snapshot_interval: 1.0, steady_tol: 1e-8, stop_on_steady: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steady: bool,
    pub final_tau: f64,
    pub snapshots: usize,
    /// Last measured rate of change, sup-norm per unit time.
    pub last_rate: f64,
}

/// Steps `ev` to `tau_end`, handing a snapshot to `sink` at the start and
/// every `snapshot_interval`. The steadiness check runs at each snapshot.
pub fn simulate<E: Evolver + ?Sized>(
    ev: &mut E,
    opts: &RunOptions,
    mut sink: impl FnMut(&Snapshot) -> Result<()>,
) -> Result<RunSummary> {
    if !(opts.tau_end > ev.tau()) {
        return domain(format!("end time {} must lie after the current time {}", opts.tau_end, ev.tau()));
    }
    if !(opts.snapshot_interval > 0.0) {
        return domain("snapshot interval must be positive");
    }
    let dt = ev.dt();
    let total = ((opts.tau_end - ev.tau()) / dt).round() as u64;
    let every = ((opts.snapshot_interval / dt).round() as u64).max(1);
    let interval = every as f64 * dt;

    let mut snap = ev.snapshot();
    sink(&snap)?;
    let mut emitted = 1;
    let mut prev = (snap.intensity(), snap.z_grid.clone());
    let mut quiet = 0usize;
    let mut last_rate = f64::INFINITY;
    let mut done = 0u64;
    while done < total {
        let batch = every.min(total - done);
        ev.advance(batch)?;
        done += batch;
        snap = ev.snapshot();
        sink(&snap)?;
        emitted += 1;
        let cur = (snap.intensity(), snap.z_grid.clone());
        let change = sup_diff(&cur.0, &prev.0).max(sup_diff(&cur.1, &prev.1));
        last_rate = change / (batch as f64 * dt).max(interval * 1e-12);
        if batch == every && last_rate < opts.steady_tol {
            quiet += 1;
        } else if batch == every {
            quiet = 0;
        }
        prev = cur;
        if opts.stop_on_steady && quiet >= STEADY_CHECKS {
            break;
        }
    }
    Ok(RunSummary { steady: quiet >= STEADY_CHECKS, final_tau: ev.tau(), snapshots: emitted, last_rate })
}

/// [`simulate`] collecting every snapshot.
pub fn simulate_collect<E: Evolver + ?Sized>(ev: &mut E, opts: &RunOptions) -> Result<(Vec<Snapshot>, RunSummary)> {
    let mut snaps = Vec::new();
    let summary = simulate(ev, opts, |s| {
        snaps.push(s.clone());
        Ok(())
    })?;
    Ok((snaps, summary))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
