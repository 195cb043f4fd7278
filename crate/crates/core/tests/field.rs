use omps_core::continuum::Continuum;
use omps_core::field::*;
use omps_core::grid::Grid1D;
use omps_core::{Complex64, Simulation, SuperGaussian};
use proptest::prelude::*;

mod common;
use common::{fig2, measured_order, soliton_schedule};

#[test]
fn lattice_splitting_is_second_order() {
    let order = measured_order(
        |dt| Box::new(Simulation::new(fig2(40), soliton_schedule(), dt, 7, 1e-3).unwrap()),
        &[0.01, 0.005, 0.0025],
    );
    assert!((1.7..=2.3).contains(&order), "order {order}");
}

#[test]
fn continuum_splitting_is_second_order() {
    let order = measured_order(
        |dt| Box::new(Continuum::new(fig2(40), 440, soliton_schedule(), dt, 7, 1e-3).unwrap()),
        &[0.004, 0.002, 0.001],
    );
    assert!((1.7..=2.3).contains(&order), "order {order}");
}

#[test]
fn identical_seeds_give_identical_snapshot_bytes() {
    let run = |seed| {
        let mut sim = Simulation::new(fig2(20), soliton_schedule(), 1e-3, seed, 1e-3).unwrap();
        let opts = RunOptions { tau_end: 5.0, snapshot_interval: 1.0, ..RunOptions::default() };
        let mut bytes = Vec::new();
        simulate(&mut sim, &opts, |s| {
            bytes.extend(s.to_bytes()?);
            Ok(())
        })
        .unwrap();
        bytes
    };
    let a = run(11);
    assert_eq!(a, run(11));
    assert_ne!(a, run(12));
}

#[test]
fn noise_is_uniform_and_bounded_by_its_amplitude() {
    let base = SuperGaussian::flat(1.5);
    let x: Vec<f64> = (0..4000).map(|i| i as f64).collect();
    let clean = initial_field(-2.2, &base, &x, 3, 0.0).unwrap();
    let noisy = initial_field(-2.2, &base, &x, 3, 1e-3).unwrap();
    let d: Vec<Complex64> = noisy.iter().zip(&clean).map(|(a, b)| a - b).collect();
    assert!(d.iter().all(|c| c.re.abs() <= 1e-3 && c.im.abs() <= 1e-3));
    let mean_re = d.iter().map(|c| c.re).sum::<f64>() / d.len() as f64;
    let var_re = d.iter().map(|c| c.re * c.re).sum::<f64>() / d.len() as f64;
    assert!(mean_re.abs() < 5e-5);
    // uniform on [-a, a] has variance a^2 / 3
    assert!((var_re / (1e-6 / 3.0) - 1.0).abs() < 0.1);
}

fn random_field(values: &[(f64, f64)]) -> FieldState {
    FieldState { f: values.iter().map(|&(a, b)| Complex64::new(a, b)).collect() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn detuning_and_displacement_shifts_cancel(
        values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 32),
        zs in prop::collection::vec(-2.0f64..2.0, 32),
        shift in -3.0f64..3.0,
        dt in 1e-4f64..1e-2,
    ) {
        let grid = Grid1D::new(32, 10.0).unwrap();
        let f0 = random_field(&values);
        let dark = vec![Complex64::new(0.0, 0.0); 32];
        let compose = |detuning: f64, z: &[f64]| {
            let a = linear_halfstep(&f0, &grid, detuning, dt / 2.0);
            let b = nonlinear_step(&a, z, &dark, dt);
            linear_halfstep(&b, &grid, detuning, dt / 2.0)
        };
        let plain = compose(-2.2, &zs);
        let shifted_z: Vec<f64> = zs.iter().map(|z| z - shift).collect();
        let shifted = compose(-2.2 + shift, &shifted_z);
        for (a, b) in plain.f.iter().zip(&shifted.f) {
            prop_assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn driven_flow_is_a_semigroup(
        values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 24),
        pump in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 24),
        dt in 1e-3f64..0.5,
    ) {
        let grid = Grid1D::new(24, 6.0).unwrap();
        let f0 = random_field(&values);
        let e = random_field(&pump).f;
        let once = driven_linear_step(&f0, &e, &grid, -1.3, dt);
        let half = driven_linear_step(&f0, &e, &grid, -1.3, dt / 2.0);
        let twice = driven_linear_step(&half, &e, &grid, -1.3, dt / 2.0);
        for (a, b) in once.f.iter().zip(&twice.f) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn undriven_flows_agree(values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 20), dt in 1e-3f64..1.0) {
        let grid = Grid1D::new(20, 5.0).unwrap();
        let f0 = random_field(&values);
        let zero = vec![Complex64::new(0.0, 0.0); 20];
        let a = driven_linear_step(&f0, &zero, &grid, 0.7, dt);
        let b = linear_halfstep(&f0, &grid, 0.7, dt);
        for (x, y) in a.f.iter().zip(&b.f) {
            prop_assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn pure_phase_rotation_keeps_the_modulus(
        values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
        zs in prop::collection::vec(-5.0f64..5.0, 16),
        dt in 0.0f64..1.0,
    ) {
        let f0 = random_field(&values);
        let dark = vec![Complex64::new(0.0, 0.0); 16];
        let f1 = nonlinear_step(&f0, &zs, &dark, dt);
        for (a, b) in f0.f.iter().zip(&f1.f) {
            prop_assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
    }
}

#[test]
fn driven_flow_relaxes_to_the_linear_steady_state() {
    // uniform pump: F -> E / (1 - i Delta)
    let grid = Grid1D::new(16, 4.0).unwrap();
    let e = vec![Complex64::new(0.8, 0.1); 16];
    let f0 = FieldState { f: vec![Complex64::new(0.0, 0.0); 16] };
    let f = driven_linear_step(&f0, &e, &grid, -2.2, 40.0);
    let expect = e[0] / Complex64::new(1.0, 2.2);
    for c in f.f {
        assert!((c - expect).norm() < 1e-12);
    }
}

#[test]
fn nonlinear_step_against_a_fine_reference() {
    // dF/dtau = i Z F + E with Z = 1, E = 1, F(0) = 0, integrated by RK4
    let (mut f, h) = (Complex64::new(0.0, 0.0), 1e-4);
    let rhs = |f: Complex64| Complex64::i() * f + 1.0;
    for _ in 0..1000 {
        let k1 = rhs(f);
        let k2 = rhs(f + 0.5 * h * k1);
        let k3 = rhs(f + 0.5 * h * k2);
        let k4 = rhs(f + h * k3);
        f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let step = nonlinear_step(&FieldState { f: vec![Complex64::new(0.0, 0.0)] }, &[1.0], &[Complex64::new(1.0, 0.0)], 0.1);
    assert!((step.f[0] - f).norm() < 1e-12);
}
