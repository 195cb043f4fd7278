//! Simulation of an optical cavity whose moving end mirror is a chain of
//! weakly coupled micromirrors.
//!
//! Everything is written in the dimensionless variables of the model:
//! time in units of the cavity decay time, transverse position in units of
//! the diffraction length `l_c`, field `F` and mirror displacement `Z`
//! scaled so that the homogeneous stationary state obeys `Z = |F|^2`.
//!
//! The crate is organised as
//!
//! * [`model`]: parameters, unit conversion, homogeneous steady states and
//!   their transverse linear stability.
//! * [`lattice`]: the micromirror chain (quadrature rule, forces, exact
//!   oscillator flow).
//! * [`grid`], [`pump`], [`field`]: the split-step solver of the coupled
//!   field/lattice equations.
//! * [`continuum`]: the large-N limit with a continuous mechanical field,
//!   used as a reference for the lattice.
//! * [`roundtrip`]: direct iteration of the cavity round-trip map, an
//!   independent check of the mean-field field equation.
//! * [`analysis`]: pattern classification, bistability curves and
//!   write/erase bookkeeping.
//! * [`snapshot`] and [`config`]: file formats and run configuration.

pub mod analysis;
pub mod config;
pub mod continuum;
mod error;
pub mod field;
pub mod grid;
pub mod lattice;
pub mod model;
pub mod pump;
pub mod roundtrip;
pub mod snapshot;

pub use error::{Error, Result};
pub use field::{Evolver, Simulation};
pub use grid::Grid1D;
pub use model::NormalizedParams;
pub use pump::{AddressBeam, PumpSchedule, SuperGaussian};
pub use snapshot::Snapshot;

pub use num_complex::Complex64;
