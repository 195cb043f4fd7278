//! Direct iteration of the cavity round-trip map.
//!
//! One pass takes the field `A` at the flexible mirror, reflects it off the
//! displaced surface (phase `2 k_L Q`), propagates it to the coupling mirror
//! and back (paraxial propagator applied twice), loses a fraction `T` of the
//! power through the coupling mirror and adds the transmitted injection:
//!
//! ```text
//! A' = sqrt(R) e^{i delta} U^2 [ e^{2 i kQ} A ] + sqrt(T) A_inj
//! ```
//!
//! Nothing here is expanded in `T`. The map works in its own (unnormalized)
//! units: a phase `delta` per trip, a diffraction strength `L / 2 k_L`, the
//! mirror phase `k_L Q` in radians and a field unit of the caller's choosing.
//! Conversion to the dimensionless mean-field variables happens only in
//! [`MatchedSetup`], when results are compared.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::grid::{Grid1D, Spectral};
use crate::lattice::{coupling_accel, radiation_accels, step_lattice, LatticeState, QuadratureWeights};
use crate::model::{hss_intensities, NormalizedParams};
use crate::pump::SuperGaussian;

/// Parameters of one round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripParams {
    pub reflectivity: f64,
    pub transmissivity: f64,
    /// Round-trip detuning phase `2 (omega_L - omega_c) L / c`.
    pub delta: f64,
    /// `L / 2 k_L` in squared units of the grid coordinate.
    pub diffraction: f64,
    /// Half width of the periodic window.
    pub half_width: f64,
    /// Mirror phase `k_L Q` on the grid, in radians.
    pub kq: Vec<f64>,
    /// Injected amplitude on the grid.
    pub injection: Vec<Complex64>,
}

impl RoundtripParams {
    /// A lossless coupling mirror (`R = 1 - T`) with a flat mirror.
    pub fn lossless(transmissivity: f64, delta: f64, diffraction: f64, half_width: f64, injection: Vec<Complex64>) -> Self {
        RoundtripParams {
            reflectivity: 1.0 - transmissivity,
            transmissivity,
            delta,
            diffraction,
            half_width,
            kq: vec![0.0; injection.len()],
            injection,
        }
    }

    pub fn len(&self) -> usize {
        self.injection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.injection.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let (r, t) = (self.reflectivity, self.transmissivity);
        if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&r) {
            return domain("reflectivity and transmissivity must lie in [0, 1]");
        }
        if (r + t - 1.0).abs() > 1e-12 {
            return domain(format!("coupling mirror must be lossless, R + T = {}", r + t));
        }
        if !(self.diffraction >= 0.0 && self.diffraction.is_finite()) {
            return domain("diffraction strength must be finite and non-negative");
        }
        if !self.delta.is_finite() {
            return domain("detuning phase must be finite");
        }
        if self.kq.len() != self.injection.len() {
            return Err(Error::Contract("mirror phase and injection profiles differ in length".into()));
        }
        if self.injection.len() < 2 {
            return domain("round-trip grid needs at least 2 points");
        }
        Ok(())
    }
}

/// Cached propagator for repeated round trips on a fixed grid.
#[derive(Debug, Clone)]
pub struct RoundtripMap {
    params: RoundtripParams,
    spectral: Spectral,
    /// `sqrt(R) e^{i delta} U^2` per Fourier mode.
    factor: Vec<Complex64>,
}

impl RoundtripMap {
    pub fn new(params: RoundtripParams) -> Result<Self> {
        params.validate()?;
        let grid = Grid1D::new(params.len(), params.half_width)?;
        let loss = params.reflectivity.sqrt();
        let factor = grid
            .k
            .iter()
            .map(|k| loss * Complex64::from_polar(1.0, params.delta - 2.0 * params.diffraction * k * k))
            .collect();
        Ok(RoundtripMap { spectral: Spectral::new(params.len()), params, factor })
    }

    pub fn params(&self) -> &RoundtripParams {
        &self.params
    }

    pub fn set_kq(&mut self, kq: &[f64]) -> Result<()> {
        if kq.len() != self.params.len() {
            return Err(Error::Contract("mirror phase has the wrong length".into()));
        }
        self.params.kq.copy_from_slice(kq);
        Ok(())
    }

    /// One round trip applied in place.
    pub fn apply(&mut self, a: &mut [Complex64]) -> Result<()> {
        if a.len() != self.params.len() {
            return Err(Error::Contract("field and round-trip grid differ in length".into()));
        }
        for (ai, &kq) in a.iter_mut().zip(&self.params.kq) {
            *ai *= Complex64::from_polar(1.0, 2.0 * kq);
        }
        self.spectral.apply_multiplier(a, &self.factor);
        let st = self.params.transmissivity.sqrt();
        for (ai, inj) in a.iter_mut().zip(&self.params.injection) {
            *ai += st * inj;
        }
        Ok(())
    }
}

/// One round trip of `a`.
pub fn roundtrip(a: &[Complex64], params: &RoundtripParams) -> Result<Vec<Complex64>> {
    let mut map = RoundtripMap::new(params.clone())?;
    let mut out = a.to_vec();
    map.apply(&mut out)?;
    Ok(out)
}

/// How the mirror phase `k_L Q` is updated between round trips.
#[derive(Debug, Clone)]
pub enum MirrorResponse {
    /// Keep the profile given in the parameters.
    Frozen,
    /// The mirror follows the light instantly: `k_L Q = gain |A|^2`.
    QuasiStatic { gain: f64 },
    /// A micromirror chain advanced once per trip (see [`LatticeResponse`]).
    Lattice(LatticeResponse),
}

/// Micromirror chain driven by the intracavity intensity, advanced by one
/// exact oscillator step per round trip with the neighbour forces taken
/// from the start of the trip.
#[derive(Debug, Clone)]
pub struct LatticeResponse {
    pub params: NormalizedParams,
    pub state: LatticeState,
    /// Chain time per round trip.
    pub dtau: f64,
    /// Converts `|A|^2` into the dimensionless intensity driving the chain.
    pub intensity_scale: f64,
    /// Converts a chain displacement into the mirror phase `k_L Q`.
    pub kq_per_z: f64,
}

impl LatticeResponse {
    fn update(&mut self, a: &[Complex64], kq: &mut [f64]) -> Result<()> {
        let p = &self.params;
        let weights = QuadratureWeights::new(p.points_per_mirror)?;
        let intensity: Vec<f64> = a.iter().map(|c| c.norm_sqr() * self.intensity_scale).collect();
        let mut drive = vec![0.0; p.mirrors];
        radiation_accels(&intensity, &weights, p.omega, &mut drive);
        let a_size = p.mirror_size();
        for (j, d) in drive.iter_mut().enumerate() {
            *d += coupling_accel(&self.state.z, j, p.rigidity, p.omega, a_size);
        }
        self.state = step_lattice(&self.state, &drive, self.dtau, p.gamma, p.omega)?;
        for (j, chunk) in kq.chunks_mut(p.points_per_mirror).enumerate() {
            chunk.fill(self.kq_per_z * self.state.z[j]);
        }
        Ok(())
    }
}

/// Stopping rules for fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOptions {
    pub max_trips: usize,
    /// Converged once the per-trip change of `A` (and of `k_L Q`) falls
    /// below `tol` times the field scale.
    pub tol: f64,
    /// Iteration is abandoned once any `|A|` exceeds this bound.
    pub divergence_bound: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions { max_trips: 2_000_000, tol: 1e-13, divergence_bound: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationOutcome {
    Converged { trips: usize },
    Diverged { trips: usize },
    Exhausted { trips: usize },
}

impl IterationOutcome {
    pub fn trips(&self) -> usize {
        match *self {
            IterationOutcome::Converged { trips }
            | IterationOutcome::Diverged { trips }
            | IterationOutcome::Exhausted { trips } => trips,
        }
    }

    pub fn converged(&self) -> bool {
        matches!(self, IterationOutcome::Converged { .. })
    }
}

/// Plain forward iteration of the map from `a0` until it stops changing.
pub fn iterate_to_fixed_point(
    a0: &[Complex64],
    params: &RoundtripParams,
    response: &mut MirrorResponse,
    opts: &IterationOptions,
) -> Result<(Vec<Complex64>, IterationOutcome)> {
    let mut map = RoundtripMap::new(params.clone())?;
    let mut a = a0.to_vec();
    let mut prev = a.clone();
    let mut kq = params.kq.clone();
    let mut prev_kq = kq.clone();
    for trip in 1..=opts.max_trips {
        match response {
            MirrorResponse::Frozen => {}
            MirrorResponse::QuasiStatic { gain } => {
                for (q, c) in kq.iter_mut().zip(&a) {
                    *q = *gain * c.norm_sqr();
                }
                map.set_kq(&kq)?;
            }
            MirrorResponse::Lattice(lat) => {
                lat.update(&a, &mut kq)?;
                map.set_kq(&kq)?;
            }
        }
        map.apply(&mut a)?;
        let mut scale = 0.0f64;
        let mut change = 0.0f64;
        for (x, y) in a.iter().zip(&prev) {
            let m = x.norm();
            if !(m <= opts.divergence_bound) {
                return Ok((a, IterationOutcome::Diverged { trips: trip }));
            }
            scale = scale.max(m);
            change = change.max((x - y).norm());
        }
        let q_change = kq.iter().zip(&prev_kq).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let q_scale = kq.iter().map(|q| q.abs()).fold(0.0, f64::max);
        if change <= opts.tol * scale.max(1e-300) && q_change <= opts.tol * q_scale.max(1e-300) {
            return Ok((a, IterationOutcome::Converged { trips: trip }));
        }
        prev.copy_from_slice(&a);
        prev_kq.copy_from_slice(&kq);
    }
    Ok((a, IterationOutcome::Exhausted { trips: opts.max_trips }))
}

/// A stationary mean-field problem whose solution is known independently.
#[derive(Debug, Clone, PartialEq)]
pub enum MeanFieldCase {
    /// Flat pump with the mirror following the intensity (`Z = |F|^2`):
    /// the lowest homogeneous steady state.
    Homogeneous { detuning: f64, pump_sq: f64 },
    /// Flat mirror and a shaped pump: the linear diffractive steady state
    /// `F(k) = E(k) / (1 - i detuning + i k^2)`.
    Diffractive { detuning: f64, pump: SuperGaussian },
}

/// Correspondence between the map's units and the mean-field variables at a
/// given transmissivity: `tau = trips * T / 2`, `x = x_map / l`,
/// `F = A / field_unit`, `Z = 4 k_L Q / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSetup {
    pub transmissivity: f64,
    pub points: usize,
    /// Half width of the window in diffraction lengths.
    pub half_width: f64,
    /// Diffraction length in map units.
    pub length_unit: f64,
    /// Field amplitude corresponding to `|F| = 1`.
    pub field_unit: f64,
}

impl MatchedSetup {
    pub fn new(transmissivity: f64, points: usize, half_width: f64) -> Self {
        MatchedSetup { transmissivity, points, half_width, length_unit: 1.0, field_unit: 1.0 }
    }

    /// Map parameters reproducing the normalized detuning and pump.
    pub fn params(&self, detuning: f64, pump: &[f64]) -> RoundtripParams {
        let t = self.transmissivity;
        let l = self.length_unit;
        // U^2 = exp(-i (L / k_L) k^2) and L / k_L = T l^2 / 2.
        let diffraction = t * l * l / 4.0;
        let injection = pump
            .iter()
            .map(|&e| Complex64::new(0.5 * t.sqrt() * e * self.field_unit, 0.0))
            .collect();
        RoundtripParams::lossless(t, 0.5 * t * detuning, diffraction, self.half_width * l, injection)
    }

    /// Quasi-static mirror gain such that `Z = |F|^2`.
    pub fn quasi_static_gain(&self) -> f64 {
        0.25 * self.transmissivity / (self.field_unit * self.field_unit)
    }

    /// Round trips per unit of mean-field time.
    pub fn trips_per_tau(&self) -> f64 {
        2.0 / self.transmissivity
    }

    pub fn to_normalized_intensity(&self, a: &[Complex64]) -> Vec<f64> {
        a.iter().map(|c| (c / self.field_unit).norm_sqr()).collect()
    }
}

/// Mean-field steady intensity of `case` on the cell-centred grid.
pub fn meanfield_steady_intensity(case: &MeanFieldCase, grid: &Grid1D) -> Result<Vec<f64>> {
    match case {
        MeanFieldCase::Homogeneous { detuning, pump_sq } => {
            let roots = hss_intensities(*detuning, *pump_sq);
            Ok(vec![roots[0]; grid.len()])
        }
        MeanFieldCase::Diffractive { detuning, pump } => {
            let mut spec = Spectral::new(grid.len());
            let mut f: Vec<Complex64> = grid.x.iter().map(|&x| Complex64::new(pump.at(x), 0.0)).collect();
            let factor: Vec<Complex64> = grid
                .k
                .iter()
                .map(|k| Complex64::new(1.0, k * k - detuning).inv())
                .collect();
            spec.apply_multiplier(&mut f, &factor);
            Ok(f.iter().map(|c| c.norm_sqr()).collect())
        }
    }
}

/// One row of the map-versus-mean-field comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub transmissivity: f64,
    /// `max |I_map - I_mf| / max I_mf`; NaN for flagged rows.
    pub discrepancy: f64,
    pub trips: usize,
    /// Why the row could not be evaluated, if it could not.
    pub flag: Option<String>,
}

/// Iterates the matched map to its fixed point for each transmissivity and
/// measures the relative intensity discrepancy against the mean-field
/// steady state of `case`.
pub fn meanfield_residual(
    transmissivities: &[f64],
    case: &MeanFieldCase,
    points: usize,
    half_width: f64,
    opts: &IterationOptions,
) -> Result<Vec<ResidualRow>> {
    let grid = Grid1D::new(points, half_width)?;
    let reference = meanfield_steady_intensity(case, &grid)?;
    let ref_max = reference.iter().copied().fold(0.0, f64::max);
    let mut rows = Vec::with_capacity(transmissivities.len());
    for &t in transmissivities {
        if !(t > 0.0 && t < 1.0) {
            return domain(format!("transmissivity must lie in (0, 1), got {t}"));
        }
        let setup = MatchedSetup::new(t, points, half_width);
        let (detuning, pump, mut response) = match case {
            MeanFieldCase::Homogeneous { detuning, pump_sq } => (
                *detuning,
                vec![pump_sq.sqrt(); points],
                MirrorResponse::QuasiStatic { gain: setup.quasi_static_gain() },
            ),
            MeanFieldCase::Diffractive { detuning, pump } => {
                (*detuning, grid.x.iter().map(|&x| pump.at(x)).collect(), MirrorResponse::Frozen)
            }
        };
        let params = setup.params(detuning, &pump);
        let start = vec![Complex64::new(0.0, 0.0); points];
        let (a, outcome) = iterate_to_fixed_point(&start, &params, &mut response, opts)?;
        let row = match outcome {
            IterationOutcome::Converged { trips } => {
                let got = setup.to_normalized_intensity(&a);
                let d = got
                    .iter()
                    .zip(&reference)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                ResidualRow { transmissivity: t, discrepancy: d / ref_max, trips, flag: None }
            }
            IterationOutcome::Diverged { trips } => ResidualRow {
                transmissivity: t,
                discrepancy: f64::NAN,
                trips,
                flag: Some("diverged".into()),
            },
            IterationOutcome::Exhausted { trips } => ResidualRow {
                transmissivity: t,
                discrepancy: f64::NAN,
                trips,
                flag: Some("did not converge".into()),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Least-squares slope of `log discrepancy` against `log T` over the
/// unflagged rows; `None` with fewer than two usable rows.
pub fn convergence_order(rows: &[ResidualRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.flag.is_none() && r.discrepancy > 0.0)
        .map(|r| (r.transmissivity.ln(), r.discrepancy.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
