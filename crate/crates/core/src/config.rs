//! Run configuration files and the built-in presets.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! [model]
//! gamma = 0.1
//! omega = 10.0
//! detuning = -2.2
//! rigidity = 1.13
//! mirrors = 40
//! points_per_mirror = 11
//! half_width = 40.0
//!
//! [pump]
//! amplitude = 1.5     # E0
//! width = 40.0        # sigma_x; omit for a flat pump
//! exponent = 20
//!
//! [[beam]]            # any number of address beams
//! id = 1
//! amplitude = 1.0
//! phase = 0.0         # pi erases
//! center = 0.0
//! width = 1.5
//! start = 0.0
//! stop = 10.0
//!
//! [integrator]
//! dt = 1e-3
//! tau_end = 1500.0
//! seed = 20240601
//! snapshot_interval = 1.0
//! steady_tol = 1e-8
//! stop_on_steady = true
//! noise = 1e-3
//!
//! [output]
//! dir = "out"
//! mode = "lattice"    # or "continuum", "oracle"
//! ```
//!
//! Every section except `[model]` and `[pump]` is optional. Unknown keys
//! are rejected, and parse errors carry the line and column.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::continuum::{continuum_max_dt, Continuum};
use crate::field::{Evolver, RunOptions, Simulation, DEFAULT_DT, DEFAULT_NOISE, DEFAULT_SEED};
use crate::model::NormalizedParams;
use crate::pump::{AddressBeam, PumpSchedule, SuperGaussian};

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: [&str; 3] = ["fig2-soliton", "fig2-pattern", "fig3-write-erase"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Lattice,
    Continuum,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub tau_end: f64,
    pub seed: u64,
    pub snapshot_interval: f64,
    pub steady_tol: f64,
    pub stop_on_steady: bool,
    pub noise: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let run = RunOptions::default();
        IntegratorConfig {
            dt: DEFAULT_DT,
            tau_end: run.tau_end,
            seed: DEFAULT_SEED,
            snapshot_interval: run.snapshot_interval,
            steady_tol: run.steady_tol,
            stop_on_steady: run.stop_on_steady,
            noise: DEFAULT_NOISE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub mode: Mode,
    /// Grid size of continuum runs; defaults to the lattice grid size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuum_points: Option<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), mode: Mode::Lattice, continuum_points: None }
    }
}

/// Settings of `oracle` mode runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub transmissivities: Vec<f64>,
    pub points: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { transmissivities: vec![0.1, 0.03, 0.01], points: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: NormalizedParams,
    pub pump: SuperGaussian,
    #[serde(default, rename = "beam", skip_serializing_if = "Vec::is_empty")]
    pub beams: Vec<AddressBeam>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule().validate()?;
        let it = &self.integrator;
        if !(it.dt > 0.0 && it.dt <= self.model.max_dt()) {
            return domain(format!("dt must lie in (0, {}], got {}", self.model.max_dt(), it.dt));
        }
        if !(it.tau_end > 0.0 && it.tau_end.is_finite()) {
            return domain("tau_end must be positive and finite");
        }
        if !(it.snapshot_interval > 0.0) {
            return domain("snapshot_interval must be positive");
        }
        if !(it.steady_tol > 0.0) {
            return domain("steady_tol must be positive");
        }
        if !(it.noise >= 0.0 && it.noise.is_finite()) {
            return domain("noise must be finite and non-negative");
        }
        if let Some(n) = self.output.continuum_points {
            if n < 2 {
                return domain("continuum_points must be at least 2");
            }
        }
        let mut ids: Vec<u32> = self.beams.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return domain("beam ids must be unique");
        }
        if self.oracle.transmissivities.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return domain("oracle transmissivities must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn schedule(&self) -> PumpSchedule {
        PumpSchedule { base: self.pump.clone(), beams: self.beams.clone() }
    }

    pub fn run_options(&self) -> RunOptions {
        let it = &self.integrator;
        RunOptions {
            tau_end: it.tau_end,
            snapshot_interval: it.snapshot_interval,
            steady_tol: it.steady_tol,
            stop_on_steady: it.stop_on_steady,
        }
    }

    pub fn continuum_points(&self) -> usize {
        self.output.continuum_points.unwrap_or_else(|| self.model.n_points())
    }

    /// Solver selected by `output.mode`, started from the configured
    /// initial condition. Continuum runs cap the step at the bound of their
    /// grid. Oracle mode has no time evolution and is rejected.
    pub fn evolver(&self) -> Result<Box<dyn Evolver + Send>> {
        let it = &self.integrator;
        match self.output.mode {
            Mode::Lattice => Ok(Box::new(Simulation::new(self.model.clone(), self.schedule(), it.dt, it.seed, it.noise)?)),
            Mode::Continuum => {
                let n = self.continuum_points();
                let dt = it.dt.min(continuum_max_dt(&self.model, n));
                Ok(Box::new(Continuum::new(self.model.clone(), n, self.schedule(), dt, it.seed, it.noise)?))
            }
            Mode::Oracle => domain("oracle mode has no time evolution"),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let cfg = match name {
            "fig2-soliton" => fig2(2.25, 40).with_beams(vec![AddressBeam {
                id: 1,
                amplitude: 1.0,
                phase: 0.0,
                center: 0.0,
                width: 1.5,
                start: 0.0,
                stop: 10.0,
            }]),
            "fig2-pattern" => fig2(2.7, 80),
            "fig3-write-erase" => fig3(),
            _ => return Err(Error::Config(format!("unknown preset `{name}`; known: {}", PRESETS.join(", ")))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn with_beams(mut self, beams: Vec<AddressBeam>) -> Self {
        self.beams = beams;
        self
    }
}

fn fig2_model(mirrors: usize) -> NormalizedParams {
    NormalizedParams {
        gamma: 0.1,
        omega: 10.0,
        detuning: -2.2,
        rigidity: 1.13,
        mirrors,
        points_per_mirror: 11,
        half_width: 40.0,
    }
}

fn fig2(pump_sq: f64, mirrors: usize) -> RunConfig {
    RunConfig {
        model: fig2_model(mirrors),
        pump: SuperGaussian { amplitude: pump_sq.sqrt(), width: 40.0, exponent: 20 },
        beams: Vec::new(),
        integrator: IntegratorConfig { tau_end: 1500.0, stop_on_steady: true, ..IntegratorConfig::default() },
        output: OutputConfig::default(),
        oracle: OracleConfig::default(),
    }
}

/// Seven mirrors: write at +12, write at -12, then erase the first.
fn fig3() -> RunConfig {
    let write = |id, center, start: f64| AddressBeam {
        id,
        amplitude: 1.0,
        phase: 0.0,
        center,
        width: 3.0,
        start,
        stop: start + 20.0,
    };
    let erase = AddressBeam { phase: std::f64::consts::PI, ..write(3, 12.0, 300.0) };
    RunConfig {
        model: fig2_model(7),
        pump: SuperGaussian { amplitude: 1.5f64.sqrt(), width: 23.0, exponent: 20 },
        beams: vec![write(1, 12.0, 0.0), write(2, -12.0, 150.0), erase],
        integrator: IntegratorConfig { tau_end: 450.0, ..IntegratorConfig::default() },
        output: OutputConfig::default(),
        oracle: OracleConfig::default(),
    }
}
