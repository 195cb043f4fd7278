use omps_core::field::Simulation;
use omps_core::lattice::*;
use omps_core::{Evolver, PumpSchedule, SuperGaussian};
use proptest::prelude::*;
use std::f64::consts::PI;

mod common;
use common::{fig2, measured_frequency};

#[test]
fn measured_mode_frequencies_follow_the_lattice_dispersion() {
    for n in [20, 40, 80] {
        let p = fig2(n);
        let a = p.mirror_size();
        for m in [1, n / 4, n / 2, n - 1] {
            let kappa = PI * m as f64 / n as f64;
            let predicted = p.omega * (1.0 + 2.0 * p.rigidity.powi(2) * (1.0 - kappa.cos()) / (a * a)).sqrt();
            let got = measured_frequency(&p, m);
            assert!((got / predicted - 1.0).abs() < 1e-4, "N={n} m={m}: {got} vs {predicted}");
        }
    }
}

#[test]
fn chain_modes_agree_with_the_dispersion_relation() {
    let p = fig2(40);
    let modes = ChainModes::new(p.mirrors, p.omega, p.coupling_strength());
    let a = p.mirror_size();
    for (m, w2) in modes.squared_frequencies().iter().enumerate() {
        let kappa = PI * m as f64 / p.mirrors as f64;
        let expect = p.omega.powi(2) * (1.0 + 2.0 * p.rigidity.powi(2) * (1.0 - kappa.cos()) / (a * a));
        assert!((w2 / expect - 1.0).abs() < 1e-12);
    }
}

#[test]
fn lattice_dispersion_converges_quadratically_to_the_continuum() {
    // fixed physical wavenumber k = pi m0 / (2 x_max), so kappa = k a
    let m0 = 6;
    let mut pts = Vec::new();
    for n in [20, 40, 80, 160] {
        let p = fig2(n);
        let modes = ChainModes::new(n, p.omega, p.coupling_strength());
        let k = PI * m0 as f64 / (2.0 * p.half_width);
        let lattice = modes.squared_frequencies()[m0].sqrt();
        let continuum = p.omega * (1.0 + (p.rigidity * k).powi(2)).sqrt();
        pts.push((p.mirror_size().ln(), ((lattice - continuum) / continuum).abs().ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() < 0.3, "order {slope}");
}

#[test]
fn uniform_lattice_stays_uniform() {
    let p = fig2(20);
    let sched = PumpSchedule::new(SuperGaussian::flat(1.5));
    let base = Simulation::new(p.clone(), sched.clone(), 1e-3, 1, 0.0).unwrap();
    let field = base.field().to_vec();
    let lattice = LatticeState { z: vec![0.4; p.mirrors], v: vec![-0.3; p.mirrors] };
    let mut sim = Simulation::from_state(p, sched, 1e-3, 0.0, field, lattice).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        sim.advance(1000).unwrap();
        let z = &sim.lattice().z;
        let spread = z.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) - z.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        worst = worst.max(spread);
    }
    assert!(worst <= 1e-12, "mirrors drifted apart by {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn springs_cancel_on_uniform_displacement(z0 in -5.0f64..5.0, n in 1usize..50, rho in 0.0f64..3.0) {
        let z = vec![z0; n];
        for j in 0..n {
            prop_assert_eq!(coupling_accel(&z, j, rho, 10.0, 2.0), 0.0);
        }
    }

    #[test]
    fn springs_are_newtonian(z in prop::collection::vec(-1.0f64..1.0, 2..40)) {
        // internal forces sum to zero on a free chain
        let total: f64 = (0..z.len()).map(|j| coupling_accel(&z, j, 1.13, 10.0, 4.0)).sum();
        prop_assert!(total.abs() < 1e-12);
    }

    #[test]
    fn uniform_field_drives_every_mirror_equally(m in 2usize..20, n in 1usize..12, level in 0.0f64..4.0) {
        let w = QuadratureWeights::new(m).unwrap();
        let intensity = vec![level; n * m];
        let mut out = vec![0.0; n];
        radiation_accels(&intensity, &w, 10.0, &mut out);
        for o in out {
            prop_assert!((o - 100.0 * level).abs() <= 1e-12 * (1.0 + 100.0 * level));
        }
    }
}
