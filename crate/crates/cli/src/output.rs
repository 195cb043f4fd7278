//! File writers shared by the subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use omps_core::config::RunConfig;
use omps_core::Snapshot;
use serde::Serialize;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    let mut w = create(&dir.join("config.toml"))?;
    w.write_all(cfg.to_toml_string()?.as_bytes())?;
    Ok(w.flush()?)
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let mut w = create(path)?;
    snap.write_to(&mut w)?;
    Ok(w.flush()?)
}

pub fn write_csv(path: &Path, snap: &Snapshot) -> Result<()> {
    let mut w = create(path)?;
    snap.write_csv(&mut w)?;
    Ok(w.flush()?)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(w.flush()?)
}

/// Gnuplot script drawing `|F|^2` and `Z` of a profile CSV.
pub fn write_gnuplot(dir: &Path, csv_name: &str, title: &str) -> Result<()> {
    let mut w = create(&dir.join("plot.gp"))?;
    write!(
        w,
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'x'\n\
         set title '{title}'\n\
         set terminal pngcairo size 900,500\n\
         set output 'profile.png'\n\
         plot '{csv_name}' using 1:2 with lines lw 2, '' using 1:3 with lines lw 2\n"
    )?;
    Ok(w.flush()?)
}
