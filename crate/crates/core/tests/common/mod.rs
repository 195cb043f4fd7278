//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use omps_core::{AddressBeam, Evolver, NormalizedParams, PumpSchedule, SuperGaussian};

pub fn fig2(mirrors: usize) -> NormalizedParams {
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

/// Holding pump at `E0 = 1.5` with a short write beam at the centre.
pub fn soliton_schedule() -> PumpSchedule {
    PumpSchedule::new(SuperGaussian { amplitude: 1.5, width: 40.0, exponent: 20 }).with_beam(AddressBeam {
        id: 1,
        amplitude: 1.0,
        phase: 0.0,
        center: 0.0,
        width: 1.5,
        start: 0.0,
        stop: 10.0,
    })
}

/// Least-squares slope of `ln ys` against `ln xs`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn chain_accel(z: &[f64], omega: f64, k: f64, out: &mut [f64]) {
    let n = z.len();
    for j in 0..n {
        let mut s = 0.0;
        if j > 0 {
            s += z[j - 1] - z[j];
        }
        if j + 1 < n {
            s += z[j + 1] - z[j];
        }
        out[j] = -omega * omega * z[j] + k * s;
    }
}

/// Classical RK4 for the undamped, undriven free-ended chain.
fn rk4_chain(z: &mut [f64], v: &mut [f64], omega: f64, k: f64, h: f64) {
    let n = z.len();
    let mut a = vec![0.0; n];
    let mut stage_z = vec![0.0; n];
    let (mut kz, mut kv) = (vec![[0.0; 4]; n], vec![[0.0; 4]; n]);
    for s in 0..4 {
        let c = [0.0, 0.5, 0.5, 1.0][s];
        for j in 0..n {
            let (dz, dv) = if s == 0 { (0.0, 0.0) } else { (kz[j][s - 1], kv[j][s - 1]) };
            stage_z[j] = z[j] + c * h * dz;
            kz[j][s] = v[j] + c * h * dv;
        }
        chain_accel(&stage_z, omega, k, &mut a);
        for j in 0..n {
            kv[j][s] = a[j];
        }
    }
    for j in 0..n {
        z[j] += h / 6.0 * (kz[j][0] + 2.0 * kz[j][1] + 2.0 * kz[j][2] + kz[j][3]);
        v[j] += h / 6.0 * (kv[j][0] + 2.0 * kv[j][1] + 2.0 * kv[j][2] + kv[j][3]);
    }
}

/// Angular frequency of mode `m` measured from the zero crossings of the
/// first mirror's displacement.
pub fn measured_frequency(params: &NormalizedParams, m: usize) -> f64 {
    let n = params.mirrors;
    let kappa = PI * m as f64 / n as f64;
    let eps = 1e-6;
    let mut z: Vec<f64> = (0..n).map(|j| eps * (kappa * (j as f64 + 0.5)).cos()).collect();
    let mut v = vec![0.0; n];
    let h = 2e-4;
    let mut crossings = Vec::new();
    let mut t = 0.0;
    while crossings.len() < 40 {
        let before = z[0];
        rk4_chain(&mut z, &mut v, params.omega, params.coupling_strength(), h);
        t += h;
        if before.signum() != z[0].signum() {
            crossings.push(t - h * z[0] / (z[0] - before));
        }
    }
    let span = crossings.last().unwrap() - crossings[0];
    PI * (crossings.len() - 1) as f64 / span
}

pub fn state_at_one(ev: &mut dyn Evolver) -> (Vec<f64>, Vec<f64>) {
    let steps = (1.0 / ev.dt()).round() as u64;
    ev.advance(steps).unwrap();
    assert!((ev.tau() - 1.0).abs() < 1e-12);
    (ev.intensity(), ev.z_grid())
}

pub fn sup_distance(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    a.0.iter()
        .zip(&b.0)
        .chain(a.1.iter().zip(&b.1))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Fitted order of the time stepper from runs to `tau = 1` against a
/// reference at a sixteenth of the finest step.
pub fn measured_order(make: impl Fn(f64) -> Box<dyn Evolver>, dts: &[f64]) -> f64 {
    let finest = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let reference = state_at_one(make(finest / 16.0).as_mut());
    let errors: Vec<f64> = dts.iter().map(|&dt| sup_distance(&state_at_one(make(dt).as_mut()), &reference)).collect();
    log_slope(dts, &errors)
}
