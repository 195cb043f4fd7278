//! `omps stability`: homogeneous states and their transverse stability.

use std::io::Write;
use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use omps_core::analysis::bistability_curve;
use omps_core::model::{hss_field, hss_intensities, linear_stability};

use crate::output::{create, ensure_dir};
use crate::ConfigArgs;

#[derive(Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Upper end of the `E0^2` range of the bistability curve.
    #[arg(long, default_value_t = 5.0)]
    pub max_pump_sq: f64,
    #[arg(long, default_value_t = 501)]
    pub samples: usize,
    /// Largest transverse wavenumber of the growth-rate scan.
    #[arg(long, default_value_t = 3.0)]
    pub k_max: f64,
    #[arg(long, default_value_t = 301)]
    pub k_samples: usize,
}

pub fn main(args: StabilityArgs) -> Result<ExitCode> {
    let cfg = args.cfg.load()?;
    let p = &cfg.model;
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;

    let mut w = create(&dir.join("bistability.csv"))?;
    writeln!(w, "pump_sq,intensity,stable")?;
    for row in bistability_curve(p, 0.0, args.max_pump_sq, args.samples)? {
        for (i, s) in row.intensities.iter().zip(&row.stable) {
            writeln!(w, "{:.17e},{i:.17e},{}", row.pump_sq, u8::from(*s))?;
        }
    }
    w.flush()?;

    let e0 = cfg.pump.amplitude;
    let roots = hss_intensities(p.detuning, e0 * e0);
    let mut w = create(&dir.join("growth.csv"))?;
    writeln!(w, "branch,intensity,k,max_re_lambda")?;
    println!("E0^2 = {:.4}, detuning {}: {} homogeneous state(s)", e0 * e0, p.detuning, roots.len());
    let steps = args.k_samples.max(2) - 1;
    for (b, &i) in roots.iter().enumerate() {
        let hss = hss_field(i, p.detuning, e0)?;
        let mut band: Option<(f64, f64)> = None;
        let mut worst = f64::NEG_INFINITY;
        for s in 0..=steps {
            let k = args.k_max * s as f64 / steps as f64;
            let re = linear_stability(&hss, k, p).iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
            writeln!(w, "{b},{i:.17e},{k:.17e},{re:.17e}")?;
            worst = worst.max(re);
            if re > 0.0 {
                band = Some(band.map_or((k, k), |(lo, _)| (lo, k)));
            }
        }
        let verdict = match band {
            None => "stable".to_string(),
            Some((lo, hi)) if lo == 0.0 => format!("unstable at k=0 (band up to k={hi:.3})"),
            Some((lo, hi)) => format!("Turing unstable for k in [{lo:.3}, {hi:.3}]"),
        };
        println!("  branch {b}: I = {i:.6}, max Re lambda = {worst:.4e}, {verdict}");
    }
    w.flush()?;
    println!("outputs in {}", dir.display());
    Ok(ExitCode::SUCCESS)
}
