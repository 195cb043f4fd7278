//! `omps oracle-check`: the round-trip map against the mean-field model.

use std::io::Write;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, ValueEnum};
use omps_core::config::RunConfig;
use omps_core::roundtrip::{convergence_order, meanfield_residual, IterationOptions, MeanFieldCase};

use crate::output::{create, ensure_dir};
use crate::ConfigArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Case {
    /// Flat pump at the configured `E0`, mirror in quasi-static equilibrium.
    Homogeneous,
    /// Configured pump profile with diffraction, mirror held flat.
    Diffractive,
    Both,
}

#[derive(Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, value_enum, default_value_t = Case::Both)]
    pub case: Case,
}

/// Passing bounds: convergence order in `T` and the discrepancy at the
/// smallest `T`.
const MIN_ORDER: f64 = 0.7;
const MAX_DISCREPANCY: f64 = 0.05;

pub fn run_config(cfg: &RunConfig, which: Case) -> Result<ExitCode> {
    let m = &cfg.model;
    let mut cases = Vec::new();
    if matches!(which, Case::Homogeneous | Case::Both) {
        cases.push(("homogeneous", MeanFieldCase::Homogeneous { detuning: m.detuning, pump_sq: cfg.pump.amplitude.powi(2) }));
    }
    if matches!(which, Case::Diffractive | Case::Both) {
        cases.push(("diffractive", MeanFieldCase::Diffractive { detuning: m.detuning, pump: cfg.pump.clone() }));
    }
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let mut w = create(&dir.join("oracle.csv"))?;
    writeln!(w, "case,transmissivity,discrepancy,trips,flag")?;
    let opts = IterationOptions::default();
    let mut pass = true;
    for (name, case) in cases {
        let rows = meanfield_residual(&cfg.oracle.transmissivities, &case, cfg.oracle.points, m.half_width, &opts)?;
        for r in &rows {
            writeln!(w, "{name},{},{:.17e},{},{}", r.transmissivity, r.discrepancy, r.trips, r.flag.as_deref().unwrap_or(""))?;
            println!(
                "{name:12} T={:<8} discrepancy {:>9.4}%  trips {}{}",
                r.transmissivity,
                100.0 * r.discrepancy,
                r.trips,
                r.flag.as_ref().map(|f| format!("  [{f}]")).unwrap_or_default()
            );
        }
        let order = convergence_order(&rows);
        let smallest = rows.iter().min_by(|a, b| a.transmissivity.total_cmp(&b.transmissivity));
        let ok = order.is_some_and(|o| o >= MIN_ORDER) && smallest.is_some_and(|r| r.discrepancy <= MAX_DISCREPANCY);
        pass &= ok;
        match order {
            Some(o) => println!("{name:12} order in T: {o:.3} ({})", if ok { "pass" } else { "fail" }),
            None => println!("{name:12} order in T: not enough converged rows (fail)"),
        }
    }
    w.flush()?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

pub fn main(args: OracleArgs) -> Result<ExitCode> {
    run_config(&args.cfg.load()?, args.case)
}
