//! The micromirror chain: state, forces and time stepping.
//!
//! Mirror `j` covers grid points `j*M .. (j+1)*M` (mirror-major layout).
//! The chain has free ends: an edge mirror only feels its one neighbour.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    /// Dimensionless displacements.
    pub z: Vec<f64>,
    /// `dz/dtau`.
    pub v: Vec<f64>,
}

impl LatticeState {
    pub fn at_rest(mirrors: usize) -> Self {
        LatticeState {
            z: vec![0.0; mirrors],
            v: vec![0.0; mirrors],
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub(crate) fn check_finite(&self, tau: f64) -> Result<()> {
        if let Some(index) = self.z.iter().position(|x| !x.is_finite()) {
            return Err(Error::Diverged { tau, index, what: "mirror displacement" });
        }
        if let Some(index) = self.v.iter().position(|x| !x.is_finite()) {
            return Err(Error::Diverged { tau, index, what: "mirror velocity" });
        }
        Ok(())
    }

    /// Mechanical energy `sum (v^2 + Omega^2 z^2)/2` plus the elastic energy
    /// of the springs between neighbours.
    pub fn energy(&self, omega: f64, coupling_strength: f64) -> f64 {
        let local: f64 = self
            .z
            .iter()
            .zip(&self.v)
            .map(|(z, v)| 0.5 * (v * v + omega * omega * z * z))
            .sum();
        let springs: f64 = self.z.windows(2).map(|w| 0.5 * (w[1] - w[0]).powi(2)).sum();
        local + coupling_strength * springs
    }
}

/// Weights of the per-mirror intensity integral. Entry `l` multiplies the
/// intensity at stencil point `l` of the mirror, where `l = 0` is the last
/// point of the previous mirror and `l = M + 1` the first of the next.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights {
    d: Vec<f64>,
}

impl QuadratureWeights {
    /// `{1, 23, 24, ..., 24, 23, 1} / 24M`.
    pub fn new(points_per_mirror: usize) -> Result<Self> {
        let m = points_per_mirror;
        if m < 2 {
            return domain(format!("quadrature needs at least 2 points per mirror, got {m}"));
        }
        let norm = 24.0 * m as f64;
        let mut d = vec![1.0 / m as f64; m + 2];
        d[0] = 1.0 / norm;
        d[1] = 23.0 / norm;
        d[m] = 23.0 / norm;
        d[m + 1] = 1.0 / norm;
        Ok(QuadratureWeights { d })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.d
    }

    pub fn points_per_mirror(&self) -> usize {
        self.d.len() - 2
    }

    /// Weighted intensity of mirror `j`. Stencil points that fall outside
    /// the chain fold their weight onto the nearest point of mirror `j`.
    pub fn mirror_average(&self, intensity: &[f64], j: usize) -> f64 {
        let m = self.points_per_mirror();
        let mirrors = intensity.len() / m;
        let own = &intensity[j * m..(j + 1) * m];
        let d = &self.d;
        let mut acc: f64 = own.iter().zip(&d[1..=m]).map(|(i, w)| i * w).sum();
        acc += d[0] * if j > 0 { intensity[j * m - 1] } else { own[0] };
        acc += d[m + 1] * if j + 1 < mirrors { intensity[(j + 1) * m] } else { own[m - 1] };
        acc
    }
}

/// Acceleration of mirror `j` from the springs to its neighbours,
/// `rho^2 Omega^2 / a^2 * sum (z_l - z_j)`.
pub fn coupling_accel(z: &[f64], j: usize, rigidity: f64, omega: f64, mirror_size: f64) -> f64 {
    let strength = rigidity * rigidity * omega * omega / (mirror_size * mirror_size);
    strength * neighbour_sum(z, j)
}

fn neighbour_sum(z: &[f64], j: usize) -> f64 {
    let mut s = 0.0;
    if j > 0 {
        s += z[j - 1] - z[j];
    }
    if j + 1 < z.len() {
        s += z[j + 1] - z[j];
    }
    s
}

/// Acceleration of mirror `j` from radiation pressure,
/// `Omega^2 * sum_l d_l |F_{j,l}|^2`.
pub fn radiation_accel(field: &[Complex64], j: usize, weights: &QuadratureWeights, omega: f64) -> f64 {
    let intensity: Vec<f64> = field.iter().map(|f| f.norm_sqr()).collect();
    omega * omega * weights.mirror_average(&intensity, j)
}

/// Radiation accelerations of all mirrors from a precomputed intensity.
pub fn radiation_accels(intensity: &[f64], weights: &QuadratureWeights, omega: f64, out: &mut [f64]) {
    let om2 = omega * omega;
    for (j, o) in out.iter_mut().enumerate() {
        *o = om2 * weights.mirror_average(intensity, j);
    }
}

/// Exact flow over a step `h` of `x'' + gamma x' + w2 x = D` with constant
/// drive `D`, cached for repeated use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorFlow {
    w2: f64,
    half_gamma: f64,
    decay: f64,
    cos_like: f64,
    sin_like: f64,
}

impl OscillatorFlow {
    pub fn new(w2: f64, gamma: f64, h: f64) -> Self {
        let half_gamma = 0.5 * gamma;
        let disc = w2 - half_gamma * half_gamma;
        // cos_like = cos(wd h), sin_like = sin(wd h)/wd, continued through
        // critical damping (disc = 0) into the overdamped regime.
        let (cos_like, sin_like) = if disc.abs() * h * h < 1e-8 {
            let x = -disc * h * h;
            (1.0 + x / 2.0 + x * x / 24.0, h * (1.0 + x / 6.0 + x * x / 120.0))
        } else if disc > 0.0 {
            let wd = disc.sqrt();
            ((wd * h).cos(), (wd * h).sin() / wd)
        } else {
            let wd = (-disc).sqrt();
            ((wd * h).cosh(), (wd * h).sinh() / wd)
        };
        OscillatorFlow {
            w2,
            half_gamma,
            decay: (-half_gamma * h).exp(),
            cos_like,
            sin_like,
        }
    }

    #[inline]
    pub fn advance(&self, z: f64, v: f64, drive: f64) -> (f64, f64) {
        let rest = drive / self.w2;
        let y = z - rest;
        let z1 = self.decay * (y * self.cos_like + (v + self.half_gamma * y) * self.sin_like);
        let v1 = self.decay * (v * self.cos_like - (self.w2 * y + self.half_gamma * v) * self.sin_like);
        (z1 + rest, v1)
    }
}

/// Advances every mirror by the exact flow of `z'' + gamma z' + Omega^2 z = drive_j`
/// with the drive held constant over `dt`.
pub fn step_lattice(state: &LatticeState, drive: &[f64], dt: f64, gamma: f64, omega: f64) -> Result<LatticeState> {
    if !(dt > 0.0) {
        return domain(format!("time step must be positive, got {dt}"));
    }
    if drive.len() != state.len() || state.v.len() != state.z.len() {
        return Err(Error::Contract("drive and state lengths differ".into()));
    }
    let flow = OscillatorFlow::new(omega * omega, gamma, dt);
    let (z, v) = state
        .z
        .iter()
        .zip(&state.v)
        .zip(drive)
        .map(|((&z, &v), &d)| flow.advance(z, v, d))
        .unzip();
    Ok(LatticeState { z, v })
}

/// Normal modes of the free-ended chain. Mode `m` has shape
/// `cos(pi m (j + 1/2) / N)` and squared frequency
/// `Omega^2 + K * 2 (1 - cos(pi m / N))` with `K = rho^2 Omega^2 / a^2`.
#[derive(Debug, Clone)]
pub struct ChainModes {
    mirrors: usize,
    /// Row-major `basis[m * N + j]`, orthonormal rows.
    basis: Vec<f64>,
    w2: Vec<f64>,
}

impl ChainModes {
    pub fn new(mirrors: usize, omega: f64, coupling_strength: f64) -> Self {
        let n = mirrors;
        let nf = n as f64;
        let mut basis = vec![0.0; n * n];
        let mut w2 = vec![0.0; n];
        for m in 0..n {
            let norm = if m == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let kappa = std::f64::consts::PI * m as f64 / nf;
            for j in 0..n {
                basis[m * n + j] = norm * (kappa * (j as f64 + 0.5)).cos();
            }
            w2[m] = omega * omega + coupling_strength * 2.0 * (1.0 - kappa.cos());
        }
        ChainModes { mirrors: n, basis, w2 }
    }

    pub fn squared_frequencies(&self) -> &[f64] {
        &self.w2
    }

    fn project(&self, x: &[f64], out: &mut [f64]) {
        let n = self.mirrors;
        for (m, o) in out.iter_mut().enumerate() {
            *o = self.basis[m * n..(m + 1) * n].iter().zip(x).map(|(b, x)| b * x).sum();
        }
    }

    fn synthesize(&self, modal: &[f64], out: &mut [f64]) {
        let n = self.mirrors;
        out.iter_mut().for_each(|x| *x = 0.0);
        for (m, &a) in modal.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(&self.basis[m * n..(m + 1) * n]) {
                *o += a * b;
            }
        }
    }
}

/// Exact flow of the whole chain (springs included) under a drive that is
/// constant over the step.
#[derive(Debug, Clone)]
pub struct ChainFlow {
    modes: ChainModes,
    flows: Vec<OscillatorFlow>,
    scratch: [Vec<f64>; 3],
}

impl ChainFlow {
    pub fn new(mirrors: usize, omega: f64, gamma: f64, coupling_strength: f64, h: f64) -> Self {
        let modes = ChainModes::new(mirrors, omega, coupling_strength);
        let flows = modes.w2.iter().map(|&w2| OscillatorFlow::new(w2, gamma, h)).collect();
        ChainFlow {
            modes,
            flows,
            scratch: [vec![0.0; mirrors], vec![0.0; mirrors], vec![0.0; mirrors]],
        }
    }

    pub fn modes(&self) -> &ChainModes {
        &self.modes
    }

    pub fn advance(&mut self, state: &mut LatticeState, drive: &[f64]) {
        let [zm, vm, dm] = &mut self.scratch;
        self.modes.project(&state.z, zm);
        self.modes.project(&state.v, vm);
        self.modes.project(drive, dm);
        for (((z, v), d), flow) in zm.iter_mut().zip(vm.iter_mut()).zip(dm.iter()).zip(&self.flows) {
            let (z1, v1) = flow.advance(*z, *v, *d);
            *z = z1;
            *v = v1;
        }
        self.modes.synthesize(zm, &mut state.z);
        self.modes.synthesize(vm, &mut state.v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn two_point_rule() {
        let w = QuadratureWeights::new(2).unwrap();
        let expected = [1.0 / 48.0, 23.0 / 48.0, 23.0 / 48.0, 1.0 / 48.0];
        for (a, b) in w.as_slice().iter().zip(expected) {
            assert_relative_eq!(*a, b, max_relative = 1e-15);
        }
    }

    #[test]
    fn eleven_point_rule() {
        let w = QuadratureWeights::new(11).unwrap();
        assert_eq!(w.as_slice().len(), 13);
        for &x in &w.as_slice()[2..11] {
            assert_eq!(x, 24.0 / 264.0);
        }
        assert_eq!(w.as_slice()[1], 23.0 / 264.0);
        assert_eq!(w.as_slice()[0], 1.0 / 264.0);
    }

    #[test]
    fn single_point_rule_is_rejected() {
        assert!(matches!(QuadratureWeights::new(1), Err(Error::Domain(_))));
        assert!(matches!(QuadratureWeights::new(0), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn weights_sum_to_one_and_are_palindromic(m in 2usize..400) {
            let w = QuadratureWeights::new(m).unwrap();
            let d = w.as_slice();
            // compensated sum, so only the stored weights are being tested
            let (mut s, mut c) = (0.0f64, 0.0f64);
            for &x in d {
                let t = s + x;
                c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
                s = t;
            }
            prop_assert!((s + c - 1.0).abs() <= 1e-15);
            prop_assert!(d.iter().all(|&x| x > 0.0));
            prop_assert!(d.iter().eq(d.iter().rev()));
        }
    }

    #[test]
    fn homogeneous_displacement_feels_no_springs() {
        let z = vec![0.37; 9];
        for j in 0..9 {
            assert_eq!(coupling_accel(&z, j, 1.13, 10.0, 2.0), 0.0);
        }
    }

    #[test]
    fn single_displaced_mirror() {
        let z = [0.0, 1.0, 0.0];
        let (rho, om, a) = (1.13, 10.0, 4.0);
        let k = rho * rho * om * om / (a * a);
        assert_relative_eq!(coupling_accel(&z, 1, rho, om, a), -2.0 * k, max_relative = 1e-15);
        // free ends: one neighbour each
        assert_relative_eq!(coupling_accel(&z, 0, rho, om, a), k, max_relative = 1e-15);
        assert_relative_eq!(coupling_accel(&z, 2, rho, om, a), k, max_relative = 1e-15);
    }

    #[test]
    fn plane_wave_is_an_interior_eigenvector() {
        let (rho, om, a) = (1.13, 10.0, 2.0);
        let k = rho * rho * om * om / (a * a);
        for i in 1..=20 {
            let kappa = i as f64 * 0.15;
            let z: Vec<f64> = (0..40).map(|j| (kappa * j as f64).cos()).collect();
            for j in 1..39 {
                let expected = -2.0 * k * (1.0 - kappa.cos()) * z[j];
                assert!((coupling_accel(&z, j, rho, om, a) - expected).abs() < 1e-10 * k);
            }
        }
    }

    #[test]
    fn radiation_of_dark_and_uniform_fields() {
        let w = QuadratureWeights::new(5).unwrap();
        let dark = vec![Complex64::new(0.0, 0.0); 20];
        let uniform = vec![Complex64::new(0.3, -1.1); 20];
        let om = 10.0;
        for j in 0..4 {
            assert_eq!(radiation_accel(&dark, j, &w, om), 0.0);
            assert_relative_eq!(radiation_accel(&uniform, j, &w, om), om * om * uniform[0].norm_sqr(), max_relative = 1e-14);
        }
    }

    #[test]
    fn radiation_integral_converges_to_oversampled_reference() {
        // smooth "random" field: a few incommensurate Fourier components
        let field = |x: f64| {
            Complex64::new(1.0 + 0.4 * (0.7 * x + 0.3).sin(), 0.5 * (1.3 * x - 0.2).cos())
                + Complex64::new(0.2 * (2.1 * x).cos(), 0.1 * (0.45 * x + 1.0).sin())
        };
        let (mirrors, a) = (4, 2.5);
        let x0 = -0.5 * mirrors as f64 * a;
        let mut worst = Vec::new();
        for m in [5usize, 10, 20] {
            let w = QuadratureWeights::new(m).unwrap();
            let h = a / m as f64;
            let f: Vec<Complex64> = (0..mirrors * m).map(|i| field(x0 + (i as f64 + 0.5) * h)).collect();
            let mut err: f64 = 0.0;
            for j in 1..mirrors - 1 {
                let approx = a * radiation_accel(&f, j, &w, 1.0);
                let fine = 64 * m;
                let hf = a / fine as f64;
                let lo = x0 + j as f64 * a;
                let mut exact = 0.5 * (field(lo).norm_sqr() + field(lo + a).norm_sqr());
                for i in 1..fine {
                    exact += field(lo + i as f64 * hf).norm_sqr();
                }
                exact *= hf;
                err = err.max((approx - exact).abs());
            }
            worst.push(err * (m * m) as f64);
        }
        // error * M^2 stays bounded and does not grow
        assert!(worst[2] <= worst[0] * 1.01, "{worst:?}");
    }

    #[test]
    fn undamped_free_oscillation_is_exact() {
        let s = LatticeState { z: vec![1.0], v: vec![0.0] };
        for dt in [1e-3, 0.05, 0.7] {
            let out = step_lattice(&s, &[0.0], dt, 0.0, 10.0).unwrap();
            assert!((out.z[0] - (10.0 * dt).cos()).abs() < 1e-14);
            assert!((out.v[0] + 10.0 * (10.0 * dt).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_drive_relaxes_to_static_equilibrium() {
        let mut s = LatticeState::at_rest(3);
        let drive = [1.0, 2.0, -3.0];
        for _ in 0..12_000 {
            s = step_lattice(&s, &drive, 0.05, 0.1, 10.0).unwrap();
        }
        for (z, d) in s.z.iter().zip(drive) {
            assert!((z - d / 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn non_positive_step_is_rejected() {
        let s = LatticeState::at_rest(2);
        assert!(matches!(step_lattice(&s, &[0.0, 0.0], 0.0, 0.1, 10.0), Err(Error::Domain(_))));
        assert!(matches!(step_lattice(&s, &[0.0, 0.0], -1.0, 0.1, 10.0), Err(Error::Domain(_))));
    }

    /// Classical RK4 on the damped oscillator, tiny step.
    fn rk4_reference(z: f64, v: f64, tau: f64, gamma: f64, omega: f64) -> (f64, f64) {
        let f = |z: f64, v: f64| (v, -gamma * v - omega * omega * z);
        let n = 200_000;
        let h = tau / n as f64;
        let (mut z, mut v) = (z, v);
        for _ in 0..n {
            let k1 = f(z, v);
            let k2 = f(z + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
            let k3 = f(z + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
            let k4 = f(z + h * k3.0, v + h * k3.1);
            z += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (z, v)
    }

    #[test]
    fn damped_flow_matches_high_order_reference() {
        let (gamma, omega) = (0.1, 10.0);
        let mut s = LatticeState { z: vec![0.3], v: vec![-1.2] };
        for _ in 0..1000 {
            s = step_lattice(&s, &[0.0], 0.01, gamma, omega).unwrap();
        }
        let (z, v) = rk4_reference(0.3, -1.2, 10.0, gamma, omega);
        assert!((s.z[0] - z).abs() < 1e-8, "{} vs {z}", s.z[0]);
        assert!((s.v[0] - v).abs() < 1e-7);
        let e0 = 0.5 * (1.2f64.powi(2) + 100.0 * 0.09);
        let e1 = 0.5 * (s.v[0].powi(2) + 100.0 * s.z[0].powi(2));
        // energy decays as exp(-gamma tau) up to the oscillating part
        assert!((e1 / e0 / (-gamma * 10.0f64).exp() - 1.0).abs() < 0.01);
    }

    #[test]
    fn overdamped_and_critical_flows_match_reference() {
        for (gamma, omega) in [(20.0, 10.0), (50.0, 10.0), (20.0 + 1e-9, 10.0)] {
            let mut s = LatticeState { z: vec![0.3], v: vec![-1.2] };
            for _ in 0..100 {
                s = step_lattice(&s, &[0.0], 0.01, gamma, omega).unwrap();
            }
            let (z, v) = rk4_reference(0.3, -1.2, 1.0, gamma, omega);
            assert!((s.z[0] - z).abs() < 1e-9, "gamma={gamma}: {} vs {z}", s.z[0]);
            assert!((s.v[0] - v).abs() < 1e-8);
        }
    }

    #[test]
    fn chain_modes_are_orthonormal_eigenvectors() {
        let (n, om, k) = (9, 10.0, 31.9);
        let modes = ChainModes::new(n, om, k);
        for m in 0..n {
            let row = &modes.basis[m * n..(m + 1) * n];
            for p in 0..n {
                let other = &modes.basis[p * n..(p + 1) * n];
                let dot: f64 = row.iter().zip(other).map(|(a, b)| a * b).sum();
                assert!((dot - if m == p { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
            // K * L phi = -(w2 - Omega^2) phi
            for j in 0..n {
                let lhs = k * neighbour_sum(row, j);
                assert!((lhs + (modes.w2[m] - om * om) * row[j]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn chain_flow_conserves_energy_without_damping() {
        let (n, om) = (20, 10.0);
        let k = 1.13f64.powi(2) * om * om / 16.0;
        let h = 1e-3;
        let mut flow = ChainFlow::new(n, om, 0.0, k, h);
        let mut s = LatticeState {
            z: (0..n).map(|j| 1e-3 * ((j * 7919 % 13) as f64 / 13.0 - 0.5)).collect(),
            v: vec![0.0; n],
        };
        let e0 = s.energy(om, k);
        let drive = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for _ in 0..100_000 {
            flow.advance(&mut s, &drive);
            worst = worst.max((s.energy(om, k) / e0 - 1.0).abs());
        }
        assert!(worst < 1e-10, "relative energy drift {worst}");
    }

    #[test]
    fn chain_flow_without_springs_equals_step_lattice() {
        let n = 5;
        let mut flow = ChainFlow::new(n, 10.0, 0.1, 0.0, 0.01);
        let mut a = LatticeState { z: vec![0.1, -0.2, 0.3, 0.0, 0.5], v: vec![1.0, 0.0, -1.0, 2.0, 0.0] };
        let drive = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = step_lattice(&a, &drive, 0.01, 0.1, 10.0).unwrap();
        flow.advance(&mut a, &drive);
        for j in 0..n {
            assert!((a.z[j] - b.z[j]).abs() < 1e-14);
            assert!((a.v[j] - b.v[j]).abs() < 1e-13);
        }
    }
}
