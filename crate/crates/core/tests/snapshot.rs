use omps_core::snapshot::*;
use omps_core::{Complex64, Snapshot};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

fn snapshot_strategy() -> impl Strategy<Value = Snapshot> {
    (1usize..6, 1usize..5).prop_flat_map(|(n_mirrors, m)| {
        let n = n_mirrors * m;
        (
            finite(),
            prop::collection::vec(finite(), n),
            prop::collection::vec((finite(), finite()), n),
            prop::collection::vec(finite(), n),
            prop::collection::vec(finite(), n_mirrors),
            prop::collection::vec(finite(), n_mirrors),
        )
            .prop_map(move |(tau, x, f, z_grid, z, v)| Snapshot {
                tau,
                mirrors: n_mirrors,
                points_per_mirror: m,
                x,
                field: f.into_iter().map(|(a, b)| Complex64::new(a, b)).collect(),
                z_grid,
                z,
                v,
            })
    })
}

proptest! {
    #[test]
    fn binary_round_trip_is_bitwise(s in snapshot_strategy()) {
        let bytes = s.to_bytes().unwrap();
        let back = Snapshot::read_from(&bytes[..]).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn csv_round_trip_keeps_17_digits(
        rows in prop::collection::vec((-1e3f64..1e3, 0.0f64..1e2, -1e2f64..1e2, -1e2f64..1e2), 1..50),
    ) {
        let n = rows.len();
        let s = Snapshot {
            tau: 1.0,
            mirrors: n,
            points_per_mirror: 1,
            x: rows.iter().map(|r| r.0).collect(),
            field: rows.iter().map(|r| Complex64::new(r.1.sqrt(), 0.0) * Complex64::from_polar(1.0, r.3)).collect(),
            z_grid: rows.iter().map(|r| r.2).collect(),
            z: rows.iter().map(|r| r.2).collect(),
            v: vec![0.0; n],
        };
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        let t = read_csv(&out[..]).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-15 * b.abs();
        for (i, ((x, z), inten)) in s.x.iter().zip(&s.z_grid).zip(s.intensity()).enumerate() {
            prop_assert!(rel(t.x[i], *x) && rel(t.z[i], *z) && rel(t.intensity[i], inten));
        }
    }
}

#[test]
fn files_on_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = Snapshot {
        tau: 3.5,
        mirrors: 2,
        points_per_mirror: 2,
        x: vec![-1.5, -0.5, 0.5, 1.5],
        field: vec![Complex64::new(1.0, -1.0); 4],
        z_grid: vec![0.1, 0.1, 0.2, 0.2],
        z: vec![0.1, 0.2],
        v: vec![0.0, -0.5],
    };
    let path = dir.path().join("s.omps");
    s.write_to(std::fs::File::create(&path).unwrap()).unwrap();
    let back = Snapshot::read_from(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn version_mismatch_is_rejected() {
    let s = Snapshot {
        tau: 0.0,
        mirrors: 1,
        points_per_mirror: 2,
        x: vec![0.0, 1.0],
        field: vec![Complex64::new(0.0, 0.0); 2],
        z_grid: vec![0.0; 2],
        z: vec![0.0],
        v: vec![0.0],
    };
    let mut bytes = s.to_bytes().unwrap();
    bytes[4] = 2;
    assert!(Snapshot::read_from(&bytes[..]).unwrap_err().to_string().contains("version"));
}
