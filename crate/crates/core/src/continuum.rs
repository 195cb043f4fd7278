//! Continuum limit of the mirror array: the displacement becomes a field
//! `Z(x)` obeying
//!
//! ```text
//! Z'' + gamma Z' + Omega^2 Z - rho^2 Omega^2 d^2Z/dx^2 = Omega^2 |F|^2
//! ```
//!
//! The mechanical part is advanced mode by mode in Fourier space, each mode
//! an exactly integrated damped oscillator of squared frequency
//! `Omega^2 (1 + rho^2 k^2)`. The field is split exactly as in the lattice
//! solver, with `Z` sampled pointwise instead of per mirror.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::field::{check_field, initial_field, simulate, Evolver, FieldPropagator, RunOptions};
use crate::grid::{resample_periodic, Grid1D, Spectral};
use crate::lattice::OscillatorFlow;
use crate::model::NormalizedParams;
use crate::pump::PumpSchedule;
use crate::snapshot::Snapshot;

/// Largest `dt * omega_max` accepted, where `omega_max` is the stiffest
/// mechanical mode on the grid. Beyond it the frozen-drive splitting
/// resonates with the fast mechanical modes.
pub const STIFFNESS_CFL: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumState {
    pub f: Vec<Complex64>,
    pub z: Vec<f64>,
    /// `dZ/dtau`.
    pub w: Vec<f64>,
    pub tau: f64,
}

/// Largest step allowed on an `n`-point grid.
pub fn continuum_max_dt(params: &NormalizedParams, n: usize) -> f64 {
    let k_max = std::f64::consts::PI * n as f64 / (2.0 * params.half_width);
    let omega_max = params.omega * (1.0 + (params.rigidity * k_max).powi(2)).sqrt();
    params.max_dt().min(STIFFNESS_CFL / omega_max)
}

#[derive(Debug, Clone)]
pub struct Continuum {
    params: NormalizedParams,
    grid: Grid1D,
    schedule: PumpSchedule,
    dt: f64,
    tau0: f64,
    steps: u64,
    field: Vec<Complex64>,
    /// Spectra of `Z` and `dZ/dtau`.
    zk: Vec<Complex64>,
    wk: Vec<Complex64>,
    z: Vec<f64>,
    flows: Vec<OscillatorFlow>,
    propagator: FieldPropagator,
    buf: Vec<Complex64>,
}

impl Continuum {
    /// Same initial condition as the lattice solver, on an `n`-point grid.
    /// `params.mirrors` and `params.points_per_mirror` are ignored.
    pub fn new(params: NormalizedParams, n: usize, schedule: PumpSchedule, dt: f64, seed: u64, noise: f64) -> Result<Self> {
        let grid = Grid1D::new(n, params.half_width)?;
        let f = initial_field(params.detuning, &schedule.base, &grid.x, seed, noise)?;
        let state = ContinuumState { f, z: vec![0.0; n], w: vec![0.0; n], tau: 0.0 };
        Self::from_state(params, schedule, dt, state)
    }

    pub fn from_state(params: NormalizedParams, schedule: PumpSchedule, dt: f64, state: ContinuumState) -> Result<Self> {
        params.validate()?;
        schedule.validate()?;
        let n = state.f.len();
        if state.z.len() != n || state.w.len() != n {
            return Err(Error::Contract("continuum state arrays differ in length".into()));
        }
        let grid = Grid1D::new(n, params.half_width)?;
        if !(dt > 0.0) {
            return domain(format!("time step must be positive, got {dt}"));
        }
        let limit = continuum_max_dt(&params, n);
        if dt > limit * (1.0 + 1e-12) {
            return domain(format!("time step {dt} exceeds the continuum limit {limit:.3e} for {n} points"));
        }
        check_field(&state.f, state.tau)?;
        if let Some(index) = state.z.iter().chain(&state.w).position(|v| !v.is_finite()) {
            return Err(Error::Diverged { tau: state.tau, index: index % n, what: "mirror field" });
        }
        let om2 = params.omega * params.omega;
        let rho2 = params.rigidity * params.rigidity;
        let flows = grid
            .k
            .iter()
            .map(|k| OscillatorFlow::new(om2 * (1.0 + rho2 * k * k), params.gamma, dt))
            .collect();
        let mut spectral = Spectral::new(n);
        let mut zk: Vec<Complex64> = state.z.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut wk: Vec<Complex64> = state.w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectral.forward(&mut zk);
        spectral.forward(&mut wk);
        Ok(Continuum {
            propagator: FieldPropagator::new(&grid, params.detuning, dt, &schedule),
            buf: vec![Complex64::new(0.0, 0.0); n],
            z: state.z,
            field: state.f,
            tau0: state.tau,
            steps: 0,
            params,
            grid,
            schedule,
            dt,
            zk,
            wk,
            flows,
        })
    }

    pub fn state(&self) -> ContinuumState {
        ContinuumState { f: self.field.clone(), z: self.z.clone(), w: self.velocity(), tau: self.tau() }
    }

    fn velocity(&self) -> Vec<f64> {
        let mut spec = Spectral::new(self.wk.len());
        let mut w = self.wk.clone();
        spec.inverse(&mut w);
        w.iter().map(|c| c.re).collect()
    }

    fn mean_displacement(&self) -> f64 {
        self.zk[0].re / self.zk.len() as f64
    }

    fn half_phase(&mut self, zbar: f64) {
        let h = 0.5 * self.dt;
        for (f, &z) in self.field.iter_mut().zip(&self.z) {
            *f *= Complex64::from_polar(1.0, (z - zbar) * h);
        }
    }

    fn mechanics(&mut self) {
        let om2 = self.params.omega * self.params.omega;
        for (b, f) in self.buf.iter_mut().zip(&self.field) {
            *b = Complex64::new(om2 * f.norm_sqr(), 0.0);
        }
        self.propagator.spectral().forward(&mut self.buf);
        for (((z, w), d), flow) in self.zk.iter_mut().zip(self.wk.iter_mut()).zip(&self.buf).zip(&self.flows) {
            let (zr, wr) = flow.advance(z.re, w.re, d.re);
            let (zi, wi) = flow.advance(z.im, w.im, d.im);
            *z = Complex64::new(zr, zi);
            *w = Complex64::new(wr, wi);
        }
        self.buf.copy_from_slice(&self.zk);
        self.propagator.spectral().inverse(&mut self.buf);
        for (z, b) in self.z.iter_mut().zip(&self.buf) {
            *z = b.re;
        }
    }
}

impl Evolver for Continuum {
    fn step(&mut self) -> Result<()> {
        let mid = self.tau() + 0.5 * self.dt;
        self.propagator.prepare(&self.schedule, &self.grid.x, mid);
        let zbar = self.mean_displacement();
        self.propagator.half_step(&mut self.field, zbar);
        self.half_phase(zbar);
        self.mechanics();
        let zbar = self.mean_displacement();
        self.half_phase(zbar);
        self.propagator.half_step(&mut self.field, zbar);
        self.steps += 1;
        let tau = self.tau();
        check_field(&self.field, tau)?;
        match self.z.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::Diverged { tau, index, what: "mirror field" }),
            None => Ok(()),
        }
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
        self.z.clone()
    }

    fn snapshot(&self) -> Snapshot {
        let n = self.grid.len();
        Snapshot {
            tau: self.tau(),
            mirrors: n,
            points_per_mirror: 1,
            x: self.grid.x.clone(),
            field: self.field.clone(),
            z_grid: self.z.clone(),
            z: self.z.clone(),
            v: self.velocity(),
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

/// One line of the lattice-versus-continuum comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub mirrors: usize,
    pub mirror_size: f64,
    /// `sqrt(dx * sum(dI^2 + dZ^2))` between the two final states on the lattice grid.
    pub distance: f64,
    /// The same distance with the continuum `Z` averaged over each mirror first.
    pub mirror_averaged_distance: f64,
    pub steady: bool,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSetup {
    pub dt: f64,
    pub seed: u64,
    pub noise: f64,
    pub run: RunOptions,
    /// Points of the continuum reference grid. Must be a multiple of every
    /// lattice grid size used in the comparison.
    pub reference_points: usize,
}

/// Final state of a run, or `None` if it diverged.
pub fn final_state<E: Evolver>(ev: &mut E, opts: &RunOptions) -> Result<Option<(Snapshot, bool)>> {
    match simulate(ev, opts, |_| Ok(())) {
        Ok(summary) => Ok(Some((ev.snapshot(), summary.steady))),
        Err(Error::Diverged { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs the continuum reference once and every lattice size in `mirrors`
/// with the same window, pump and seed, then measures the distance between
/// the final states. Diverged members are flagged and the table continues.
pub fn discrete_vs_continuum(
    params: &NormalizedParams,
    schedule: &PumpSchedule,
    mirrors: &[usize],
    setup: &ConvergenceSetup,
) -> Result<Vec<ConvergenceRow>> {
    let n_ref = setup.reference_points;
    let ref_dt = setup.dt.min(continuum_max_dt(params, n_ref));
    let mut cont = Continuum::new(params.clone(), n_ref, schedule.clone(), ref_dt, setup.seed, setup.noise)?;
    let Some((reference, _)) = final_state(&mut cont, &setup.run)? else {
        return Err(Error::Diverged { tau: cont.tau(), index: 0, what: "continuum reference" });
    };
    let ref_intensity = reference.intensity();

    let mut rows = Vec::with_capacity(mirrors.len());
    for &n_mirrors in mirrors {
        let p = NormalizedParams { mirrors: n_mirrors, ..params.clone() };
        let n = p.n_points();
        let mut sim = crate::field::Simulation::new(p.clone(), schedule.clone(), setup.dt, setup.seed, setup.noise)?;
        let row = match final_state(&mut sim, &setup.run)? {
            None => ConvergenceRow {
                mirrors: n_mirrors,
                mirror_size: p.mirror_size(),
                distance: f64::NAN,
                mirror_averaged_distance: f64::NAN,
                steady: false,
                diverged: true,
            },
            Some((snap, steady)) => {
                let i_ref = resample_periodic(&ref_intensity, n);
                let z_ref = resample_periodic(&reference.z_grid, n);
                let z_avg = mirror_average(&z_ref, p.points_per_mirror);
                let dx = 2.0 * p.half_width / n as f64;
                let intensity = snap.intensity();
                let dist = |zr: &[f64]| {
                    let s: f64 = intensity
                        .iter()
                        .zip(&i_ref)
                        .zip(snap.z_grid.iter().zip(zr))
                        .map(|((a, b), (c, d))| (a - b).powi(2) + (c - d).powi(2))
                        .sum();
                    (dx * s).sqrt()
                };
                ConvergenceRow {
                    mirrors: n_mirrors,
                    mirror_size: p.mirror_size(),
                    distance: dist(&z_ref),
                    mirror_averaged_distance: dist(&z_avg),
                    steady,
                    diverged: false,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Replaces each block of `m` samples by its mean.
pub fn mirror_average(values: &[f64], m: usize) -> Vec<f64> {
    values
        .chunks(m)
        .flat_map(|c| {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            std::iter::repeat_n(mean, c.len())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Simulation;
    use crate::lattice::LatticeState;
    use crate::pump::SuperGaussian;

    fn params() -> NormalizedParams {
        NormalizedParams {
            gamma: 0.1,
            omega: 10.0,
            detuning: -2.2,
            rigidity: 1.13,
            mirrors: 8,
            points_per_mirror: 4,
            half_width: 16.0,
        }
    }

    #[test]
    fn uniform_data_matches_the_lattice() {
        let p = params();
        let sched = PumpSchedule::new(SuperGaussian::flat(1.5));
        let f0 = Complex64::new(0.2, 0.1);
        let n = p.n_points();
        let mut lat = Simulation::from_state(p.clone(), sched.clone(), 1e-3, 0.0, vec![f0; n], LatticeState::at_rest(8)).unwrap();
        let state = ContinuumState { f: vec![f0; n], z: vec![0.0; n], w: vec![0.0; n], tau: 0.0 };
        let mut cont = Continuum::from_state(p, sched, 1e-3, state).unwrap();
        for _ in 0..20 {
            lat.advance(500).unwrap();
            cont.advance(500).unwrap();
            for (a, b) in lat.field().iter().zip(cont.field()) {
                assert!((a - b).norm() < 1e-9);
            }
            for (a, b) in lat.z_grid().iter().zip(cont.z_grid()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn free_mode_oscillates_at_the_continuum_frequency() {
        let p = NormalizedParams { gamma: 1e-12, ..params() };
        let sched = PumpSchedule::new(SuperGaussian::flat(0.0));
        let n = 64;
        let grid = Grid1D::new(n, p.half_width).unwrap();
        let k = 5.0 * grid.dk();
        let z: Vec<f64> = grid.x.iter().map(|&x| 1e-6 * (k * x).cos()).collect();
        let state = ContinuumState { f: vec![Complex64::new(0.0, 0.0); n], z: z.clone(), w: vec![0.0; n], tau: 0.0 };
        let mut cont = Continuum::from_state(p.clone(), sched, 1e-3, state).unwrap();
        cont.advance(1000).unwrap();
        let w = p.omega * (1.0 + (p.rigidity * k).powi(2)).sqrt();
        for (a, b) in cont.z_grid().iter().zip(&z) {
            assert!((a - b * (w * 1.0).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn step_limit_follows_the_stiffest_mode() {
        let p = params();
        let sched = PumpSchedule::new(SuperGaussian::flat(1.0));
        let limit = continuum_max_dt(&p, 880);
        assert!(limit < p.max_dt());
        assert!(Continuum::new(p.clone(), 880, sched.clone(), limit, 1, 0.0).is_ok());
        assert!(matches!(Continuum::new(p, 880, sched, 1.5 * limit, 1, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn snapshot_layout_for_the_continuum() {
        let p = params();
        let cont = Continuum::new(p, 32, PumpSchedule::new(SuperGaussian::flat(1.0)), 1e-3, 1, 1e-3).unwrap();
        let s = cont.snapshot();
        assert_eq!((s.mirrors, s.points_per_mirror, s.len()), (32, 1, 32));
        assert_eq!(s.z, s.z_grid);
    }

    #[test]
    fn block_average() {
        assert_eq!(mirror_average(&[1.0, 3.0, 5.0, 7.0], 2), vec![2.0, 2.0, 6.0, 6.0]);
    }
}
