//! The periodic transverse grid and its spectral transforms.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, Result};
use crate::model::NormalizedParams;

/// Cell-centred grid on `[-x_max, x_max)`. Cell `i` spans
/// `[-x_max + i dx, -x_max + (i+1) dx)`, so every mirror edge is a cell edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub half_width: f64,
    pub dx: f64,
    pub x: Vec<f64>,
    /// Wavenumbers in transform order: `0, 1, .., n/2 - 1, -n/2, .., -1` times `2 pi / (2 x_max)`.
    pub k: Vec<f64>,
}

impl Grid1D {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 2 {
            return domain(format!("grid needs at least 2 points, got {n}"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return domain("grid half width must be positive");
        }
        let length = 2.0 * half_width;
        let dx = length / n as f64;
        let x = (0..n).map(|i| -half_width + (i as f64 + 0.5) * dx).collect();
        let dk = 2.0 * PI / length;
        let k = (0..n)
            .map(|i| {
                let m = if i < n.div_ceil(2) { i as i64 } else { i as i64 - n as i64 };
                m as f64 * dk
            })
            .collect();
        Ok(Grid1D { half_width, dx, x, k })
    }

    /// The lattice grid: `N * M` points, `M` per mirror.
    pub fn for_lattice(params: &NormalizedParams) -> Result<Self> {
        Self::new(params.n_points(), params.half_width)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dk(&self) -> f64 {
        PI / self.half_width
    }
}

/// Forward/inverse transform pair for one grid size. The inverse is
/// normalised so that `inverse(forward(f)) == f`.
#[derive(Clone)]
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    scale: f64,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("len", &self.forward.len()).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Spectral {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
            scale: 1.0 / n as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.len() == 0
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        buf.iter_mut().for_each(|c| *c *= self.scale);
    }

    /// Applies the spectral multiplier `factor[k]` to `buf` in place.
    pub fn apply_multiplier(&mut self, buf: &mut [Complex64], factor: &[Complex64]) {
        self.forward(buf);
        buf.iter_mut().zip(factor).for_each(|(c, f)| *c *= f);
        self.inverse(buf);
    }
}

/// Second derivative computed spectrally on the periodic grid.
pub fn spectral_laplacian(f: &[Complex64], grid: &Grid1D) -> Vec<Complex64> {
    let mut spec = Spectral::new(grid.len());
    let mut buf = f.to_vec();
    let factor: Vec<Complex64> = grid.k.iter().map(|k| Complex64::new(-k * k, 0.0)).collect();
    spec.apply_multiplier(&mut buf, &factor);
    buf
}

/// Band-limited resampling of a periodic real signal onto `n_out` points of
/// the same window. Cell-centred grids of different sizes are offset by half
/// a cell, so the spectrum is phase-shifted accordingly.
pub fn resample_periodic(values: &[f64], n_out: usize) -> Vec<f64> {
    let n_in = values.len();
    if n_in == n_out {
        return values.to_vec();
    }
    let mut spec = Spectral::new(n_in);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spec.forward(&mut buf);
    // Sample positions measured from the left edge in units of the window.
    // Input sample i sits at (i + 1/2)/n_in, output j at (j + 1/2)/n_out.
    let keep = n_in.min(n_out);
    let half = keep / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); n_out];
    let shift = |m: i64| {
        let theta = 2.0 * PI * m as f64 * (0.5 / n_out as f64 - 0.5 / n_in as f64);
        Complex64::from_polar(1.0, theta)
    };
    for m in -(half as i64)..=(half as i64) {
        let src = m.rem_euclid(n_in as i64) as usize;
        let dst = m.rem_euclid(n_out as i64) as usize;
        let mut c = buf[src] * shift(m);
        if keep % 2 == 0 && m.unsigned_abs() as usize == half {
            // split the Nyquist bin evenly between +/- half
            c *= 0.5;
        }
        out[dst] += c;
    }
    let mut inv = Spectral::new(n_out);
    inv.inverse(&mut out);
    let scale = n_out as f64 / n_in as f64;
    out.iter().map(|c| c.re * scale).collect()
}
