//! `omps convergence`: lattice runs against the continuum reference.

use std::io::Write;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Args;
use omps_core::continuum::{discrete_vs_continuum, ConvergenceSetup};

use crate::output::{create, ensure_dir};
use crate::ConfigArgs;

#[derive(Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Lattice sizes to compare.
    #[arg(long, value_delimiter = ',', default_value = "20,40,80")]
    pub mirrors: Vec<usize>,
    /// Continuum grid; defaults to the least common multiple of the lattice grids.
    #[arg(long)]
    pub reference_points: Option<usize>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn main(args: ConvergenceArgs) -> Result<ExitCode> {
    let cfg = args.cfg.load()?;
    let m = cfg.model.points_per_mirror;
    let grids: Vec<usize> = args.mirrors.iter().map(|n| n * m).collect();
    if grids.is_empty() {
        bail!("--mirrors needs at least one size");
    }
    let lcm = grids.iter().fold(1, |acc, &g| acc / gcd(acc, g) * g);
    let reference_points = args.reference_points.unwrap_or(lcm);
    if let Some(g) = grids.iter().find(|&&g| reference_points % g != 0) {
        bail!("reference grid {reference_points} is not a multiple of the lattice grid {g}");
    }
    let it = &cfg.integrator;
    let setup = ConvergenceSetup { dt: it.dt, seed: it.seed, noise: it.noise, run: cfg.run_options(), reference_points };
    let rows = discrete_vs_continuum(&cfg.model, &cfg.schedule(), &args.mirrors, &setup)?;

    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let mut w = create(&dir.join("convergence.csv"))?;
    writeln!(w, "mirrors,mirror_size,distance,mirror_averaged_distance,steady,diverged")?;
    println!("continuum reference on {reference_points} points");
    for r in &rows {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{},{}",
            r.mirrors,
            r.mirror_size,
            r.distance,
            r.mirror_averaged_distance,
            u8::from(r.steady),
            u8::from(r.diverged)
        )?;
        println!(
            "N={:<5} a={:<8.4} distance {:<10.4e} mirror-averaged {:<10.4e}{}",
            r.mirrors,
            r.mirror_size,
            r.distance,
            r.mirror_averaged_distance,
            if r.diverged { " [diverged]" } else if !r.steady { " [not steady]" } else { "" }
        );
    }
    w.flush()?;
    let good: Vec<_> = rows.iter().filter(|r| !r.diverged).collect();
    let monotone = good.windows(2).all(|p| p[1].distance < p[0].distance);
    println!("distance decreases monotonically with N: {monotone}");
    if let [.., a, b] = good.as_slice() {
        let order = (a.mirror_averaged_distance / b.mirror_averaged_distance).ln() / (a.mirror_size / b.mirror_size).ln();
        println!("order of the last pair (mirror-averaged): {order:.3}");
    }
    Ok(if rows.iter().any(|r| r.diverged) { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
