//! Injected field: a super-Gaussian holding beam plus timed Gaussian
//! address beams used to write and erase localized structures.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::Grid1D;

/// `E0 exp(-(x/sigma)^p / 2)`. An infinite width gives a flat pump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperGaussian {
    pub amplitude: f64,
    #[serde(default = "infinite")]
    pub width: f64,
    #[serde(default = "default_exponent")]
    pub exponent: u32,
}

fn infinite() -> f64 {
    f64::INFINITY
}

fn default_exponent() -> u32 {
    20
}

impl SuperGaussian {
    pub fn flat(amplitude: f64) -> Self {
        SuperGaussian { amplitude, width: f64::INFINITY, exponent: 20 }
    }

    pub fn at(&self, x: f64) -> f64 {
        if self.width.is_infinite() {
            return self.amplitude;
        }
        let r = x / self.width;
        self.amplitude * (-0.5 * r.powi(self.exponent as i32)).exp()
    }
}

/// A Gaussian injection `A e^{i phi} exp(-(x - x0)^2 / 2 sigma^2)`, switched on
/// for `tau` in `[start, stop)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddressBeam {
    #[serde(default)]
    pub id: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
    pub center: f64,
    pub width: f64,
    pub start: f64,
    pub stop: f64,
}

impl AddressBeam {
    pub fn complex_amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    pub fn is_active(&self, tau: f64) -> bool {
        tau >= self.start && tau < self.stop
    }

    pub fn at(&self, x: f64) -> Complex64 {
        let d = (x - self.center) / self.width;
        self.complex_amplitude() * (-0.5 * d * d).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpSchedule {
    pub base: SuperGaussian,
    #[serde(default)]
    pub beams: Vec<AddressBeam>,
}

impl PumpSchedule {
    pub fn new(base: SuperGaussian) -> Self {
        PumpSchedule { base, beams: Vec::new() }
    }

    pub fn with_beam(mut self, beam: AddressBeam) -> Self {
        self.beams.push(beam);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.base;
        if !(b.amplitude >= 0.0 && b.amplitude.is_finite()) {
            return domain("pump amplitude must be finite and non-negative");
        }
        if !(b.width > 0.0) {
            return domain("pump width must be positive");
        }
        if b.exponent < 2 || b.exponent % 2 != 0 {
            return domain(format!("pump exponent must be even and at least 2, got {}", b.exponent));
        }
        for beam in &self.beams {
            if !(beam.width > 0.0 && beam.width.is_finite()) {
                return domain(format!("beam {} width must be positive", beam.id));
            }
            if !(beam.start < beam.stop) {
                return domain(format!("beam {} must switch on before it switches off", beam.id));
            }
            if !(beam.amplitude.is_finite() && beam.phase.is_finite() && beam.center.is_finite()) {
                return domain(format!("beam {} has non-finite parameters", beam.id));
            }
        }
        Ok(())
    }

    /// Pump value at `x` and time `tau`.
    pub fn at(&self, x: f64, tau: f64) -> Complex64 {
        let mut e = Complex64::new(self.base.at(x), 0.0);
        for beam in self.beams.iter().filter(|b| b.is_active(tau)) {
            e += beam.at(x);
        }
        e
    }

    pub fn any_active(&self, tau: f64) -> bool {
        self.beams.iter().any(|b| b.is_active(tau))
    }

    /// Fills `out` with the pump at `tau`, reusing the precomputed base
    /// profile `base` (see [`base_profile`]).
    pub fn fill(&self, x: &[f64], base: &[f64], tau: f64, out: &mut [Complex64]) {
        for (o, &b) in out.iter_mut().zip(base) {
            *o = Complex64::new(b, 0.0);
        }
        for beam in self.beams.iter().filter(|b| b.is_active(tau)) {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o += beam.at(xi);
            }
        }
    }
}

pub fn base_profile(base: &SuperGaussian, x: &[f64]) -> Vec<f64> {
    x.iter().map(|&xi| base.at(xi)).collect()
}

pub fn build_pump(sched: &PumpSchedule, grid: &Grid1D, tau: f64) -> Vec<Complex64> {
    grid.x.iter().map(|&x| sched.at(x, tau)).collect()
}
