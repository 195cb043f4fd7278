//! Model parameters, physical/dimensionless conversion, homogeneous steady
//! states and their transverse linear stability.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Dimensional description of the cavity and the micromirror array (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub cavity_length: f64,
    /// Transmissivity of the fixed coupling mirror.
    pub transmissivity: f64,
    pub laser_wavenumber: f64,
    pub cavity_wavenumber: f64,
    pub mirror_mass: f64,
    pub mech_damping: f64,
    pub mech_frequency: f64,
    /// Spring constant of the nearest-neighbour coupling (N/m).
    pub coupling_constant: f64,
    /// Centre-to-centre spacing of the micromirrors.
    pub pitch: f64,
    /// Gap between neighbouring micromirrors. The model takes it as zero.
    pub gap: f64,
    /// Field amplitude unit (V). Only needed for irradiance conversions.
    pub voltage_constant: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cavity_length > 0.0) {
            return domain("cavity length must be positive");
        }
        if !(self.transmissivity > 0.0 && self.transmissivity < 1.0) {
            return domain("transmissivity must lie in (0, 1)");
        }
        for (name, v) in [
            ("laser wavenumber", self.laser_wavenumber),
            ("cavity wavenumber", self.cavity_wavenumber),
            ("mirror mass", self.mirror_mass),
            ("mechanical damping", self.mech_damping),
            ("mechanical frequency", self.mech_frequency),
            ("coupling constant", self.coupling_constant),
            ("pitch", self.pitch),
        ] {
            if !(v > 0.0) {
                return domain(format!("{name} must be positive"));
            }
        }
        if !(self.gap >= 0.0) {
            return domain("gap must be non-negative");
        }
        Ok(())
    }
}

/// The dimensionless constants of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizedParams {
    /// Mechanical damping in units of the cavity decay rate.
    pub gamma: f64,
    /// Mechanical frequency in units of the cavity decay rate.
    pub omega: f64,
    pub detuning: f64,
    pub rigidity: f64,
    pub mirrors: usize,
    pub points_per_mirror: usize,
    /// Half width of the transverse window in units of `l_c`.
    pub half_width: f64,
}

impl NormalizedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return domain(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.omega > 0.0) {
            return domain(format!("omega must be positive, got {}", self.omega));
        }
        if !self.detuning.is_finite() {
            return domain("detuning must be finite");
        }
        if !(self.rigidity >= 0.0) {
            return domain("rigidity must be non-negative");
        }
        if self.mirrors < 1 {
            return domain("need at least one mirror");
        }
        if self.points_per_mirror < 2 {
            return domain("need at least two field points per mirror");
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return domain("half width must be positive");
        }
        Ok(())
    }

    /// Micromirror size in units of `l_c`.
    pub fn mirror_size(&self) -> f64 {
        2.0 * self.half_width / self.mirrors as f64
    }

    pub fn n_points(&self) -> usize {
        self.mirrors * self.points_per_mirror
    }

    /// Largest step the field solver accepts.
    pub fn max_dt(&self) -> f64 {
        0.1 / self.omega
    }

    /// Strength of the nearest-neighbour term, `rho^2 Omega^2 / a^2`.
    pub fn coupling_strength(&self) -> f64 {
        let a = self.mirror_size();
        self.rigidity * self.rigidity * self.omega * self.omega / (a * a)
    }
}

/// Characteristic scales of a physical cavity.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedScales {
    /// Cavity decay rate `cT/4L` (1/s).
    pub gamma_c: f64,
    /// Round-trip time `2L/c` (s).
    pub t_c: f64,
    /// Diffraction length, `l_c^2 = 2L/(k_L T)` (m).
    pub l_c: f64,
    /// Transverse sound speed `a * Omega_perp` (m/s).
    pub sound_speed: f64,
    /// Surface mass density `m/a^2` (kg/m^2).
    pub mass_density: f64,
    /// `sqrt(kappa_perp / m)` (rad/s).
    pub omega_perp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub params: NormalizedParams,
    pub scales: DerivedScales,
    /// Multiplies the displacement `q` (m) to give `z`: `4 k_L / T`.
    pub displacement_scale: f64,
    /// Multiplies the field amplitude `A` to give `F`.
    pub field_scale: f64,
}

/// Converts a physical description into the dimensionless model.
///
/// The window holds `mirrors` micromirrors of pitch `a`, so its half width
/// is `mirrors * a / (2 l_c)`. `Omega` is measured in units of the cavity
/// decay rate, which is the scaling the normalized mirror equation needs.
pub fn normalize(
    phys: &PhysicalParams,
    laser_angular_frequency: f64,
    mirrors: usize,
    points_per_mirror: usize,
) -> Result<Normalization> {
    phys.validate()?;
    let c = SPEED_OF_LIGHT;
    let l = phys.cavity_length;
    let t = phys.transmissivity;
    let gamma_c = c * t / (4.0 * l);
    let t_c = 2.0 * l / c;
    let l_c = (2.0 * l / (phys.laser_wavenumber * t)).sqrt();
    let omega_perp = (phys.coupling_constant / phys.mirror_mass).sqrt();
    let sound_speed = phys.pitch * omega_perp;
    let mass_density = phys.mirror_mass / (phys.pitch * phys.pitch);
    let omega_c = c * phys.cavity_wavenumber;

    let params = NormalizedParams {
        gamma: phys.mech_damping / gamma_c,
        omega: phys.mech_frequency / gamma_c,
        detuning: (laser_angular_frequency - omega_c) / gamma_c,
        rigidity: sound_speed / (phys.mech_frequency * l_c),
        mirrors,
        points_per_mirror,
        half_width: mirrors as f64 * phys.pitch / (2.0 * l_c),
    };
    params.validate()?;

    let field_scale = (2.0 / phys.mech_frequency)
        * (2.0 * HBAR * phys.cavity_wavenumber * phys.laser_wavenumber * phys.pitch
            / (t_c * phys.mirror_mass * t))
            .sqrt();

    Ok(Normalization {
        params,
        scales: DerivedScales {
            gamma_c,
            t_c,
            l_c,
            sound_speed,
            mass_density,
            omega_perp,
        },
        displacement_scale: 4.0 * phys.laser_wavenumber / t,
        field_scale,
    })
}

/// Photons per unit area reaching the mirror during one round trip.
pub fn photon_flux(amplitude: Complex64) -> f64 {
    amplitude.norm_sqr()
}

/// Radiation pressure (N/m^2) exerted by a field of amplitude `A`:
/// `hbar k_c |A|^2 / t_c`.
pub fn radiation_pressure(amplitude: Complex64, cavity_wavenumber: f64, round_trip_time: f64) -> f64 {
    HBAR * cavity_wavenumber / round_trip_time * photon_flux(amplitude)
}

/// `I (1 + (Delta + I)^2) - E0^2`.
pub fn hss_residual(intensity: f64, detuning: f64, pump_sq: f64) -> f64 {
    let s = detuning + intensity;
    intensity * (1.0 + s * s) - pump_sq
}

/// All non-negative intensities of homogeneous stationary states, ascending.
///
/// The cubic is bracketed on `[0, max(20, 4 E0^2)]` split at its turning
/// points, so each piece is monotone and holds at most one root. A turning
/// point that touches zero is reported once, as a degenerate root.
pub fn hss_intensities(detuning: f64, pump_sq: f64) -> Vec<f64> {
    assert!(pump_sq >= 0.0, "pump intensity must be non-negative");
    let f = |i: f64| hss_residual(i, detuning, pump_sq);
    let upper = f64::max(20.0, 4.0 * pump_sq);

    // f'(I) = 3I^2 + 4 Delta I + 1 + Delta^2
    let mut knots = vec![0.0];
    let disc = detuning * detuning - 3.0;
    if disc > 0.0 {
        let r = disc.sqrt();
        for c in [(-2.0 * detuning - r) / 3.0, (-2.0 * detuning + r) / 3.0] {
            if c > 0.0 && c < upper {
                knots.push(c);
            }
        }
    }
    knots.push(upper);

    let tol = 1e-12 * f64::max(1.0, pump_sq);
    let mut roots: Vec<f64> = Vec::with_capacity(3);
    let push = |r: f64, roots: &mut Vec<f64>| {
        if roots.last().map_or(true, |&last| (r - last).abs() > 1e-12 * r.max(1.0)) {
            roots.push(r);
        }
    };
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 || (fa.abs() <= tol && a > 0.0) {
            push(a, &mut roots);
            continue;
        }
        if fb.abs() <= tol && b < upper {
            // picked up as the left end of the next piece
            continue;
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        push(bisect(&f, a, b, fa), &mut roots);
    }
    roots
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return if f(a).abs() <= f(b).abs() { a } else { b };
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
}

/// A transversely uniform stationary state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousState {
    pub intensity: f64,
    pub field: Complex64,
    pub displacement: f64,
    pub pump: f64,
    pub detuning: f64,
}

/// Field and displacement of the stationary state with intensity `I`,
/// `F = E0 / (1 - i(Delta + I))`, `Z = I`.
pub fn hss_field(intensity: f64, detuning: f64, pump: f64) -> Result<HomogeneousState> {
    if !(pump >= 0.0) || !(intensity >= 0.0) {
        return domain("intensity and pump must be non-negative");
    }
    let residual = hss_residual(intensity, detuning, pump * pump);
    if residual.abs() > 1e-8 * f64::max(1.0, pump * pump) {
        return Err(Error::Contract(format!(
            "I={intensity} is not a stationary intensity for Delta={detuning}, E0={pump} (residual {residual:e})"
        )));
    }
    let field = Complex64::new(pump, 0.0) / Complex64::new(1.0, -(detuning + intensity));
    Ok(HomogeneousState {
        intensity,
        field,
        displacement: intensity,
        pump,
        detuning,
    })
}

impl HomogeneousState {
    /// Growth exponents of a perturbation with transverse wavenumber `k`.
    pub fn growth_exponents(&self, k: f64, params: &NormalizedParams) -> [Complex64; 4] {
        linear_stability(self, k, params)
    }

    pub fn is_stable_at(&self, k: f64, params: &NormalizedParams) -> bool {
        linear_stability(self, k, params)[0].re <= 0.0
    }
}

/// Eigenvalues of the linearisation around `hss` for wavenumber `k`,
/// ordered by decreasing real part.
///
/// The perturbation is written as `dF = u + i w` and the mechanical
/// response `(zeta, d zeta/d tau)`, giving a real 4x4 system with
/// continuum stiffness `Omega^2 (1 + rho^2 k^2)`.
pub fn linear_stability(hss: &HomogeneousState, k: f64, params: &NormalizedParams) -> [Complex64; 4] {
    let theta = hss.detuning + hss.displacement - k * k;
    let (fr, fi) = (hss.field.re, hss.field.im);
    let om2 = params.omega * params.omega;
    let stiffness = om2 * (1.0 + params.rigidity * params.rigidity * k * k);
    #[rustfmt::skip]
    let jac = Matrix4::new(
        -1.0,           -theta,         -fi,        0.0,
        theta,          -1.0,           fr,         0.0,
        0.0,            0.0,            0.0,        1.0,
        2.0 * om2 * fr, 2.0 * om2 * fi, -stiffness, -params.gamma,
    );
    let ev = jac.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2], ev[3]];
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    out
}
