//! `omps sweep`: a grid of runs over one or more parameters.
//!
//! Each finished point is appended to `manifest.txt` as `key<TAB>json`.
//! A rerun with the same output directory skips every key already in the
//! manifest, so an interrupted sweep resumes where it stopped; points that
//! failed with an error are not recorded and run again. Points run
//! in parallel on a rayon pool whose size is taken from `OMPS_THREADS`.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use omps_core::config::{Mode, RunConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::output::{create, ensure_dir};
use crate::run::{describe, execute};
use crate::ConfigArgs;

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Swept parameter, e.g. `--axis pump_sq=1.5,2,2.5`. Names: mirrors,
    /// pump_sq, detuning, rigidity. Repeat for a grid product.
    #[arg(long = "axis", value_name = "NAME=V1,V2,...")]
    pub axes: Vec<String>,
    /// Ignore an existing manifest and recompute every point.
    #[arg(long)]
    pub fresh: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Param {
    Mirrors,
    PumpSq,
    Detuning,
    Rigidity,
}

impl Param {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "mirrors" | "N" => Param::Mirrors,
            "pump_sq" | "E0sq" => Param::PumpSq,
            "detuning" | "delta" => Param::Detuning,
            "rigidity" | "rho" => Param::Rigidity,
            _ => bail!("unknown sweep parameter `{name}` (mirrors, pump_sq, detuning, rigidity)"),
        })
    }

    fn name(self) -> &'static str {
        match self {
            Param::Mirrors => "mirrors",
            Param::PumpSq => "pump_sq",
            Param::Detuning => "detuning",
            Param::Rigidity => "rigidity",
        }
    }

    fn apply(self, cfg: &mut RunConfig, v: f64) -> Result<()> {
        match self {
            Param::Mirrors => {
                if !(v >= 1.0 && v.fract() == 0.0) {
                    bail!("mirrors must be a positive integer, got {v}");
                }
                cfg.model.mirrors = v as usize;
            }
            Param::PumpSq => {
                if v < 0.0 {
                    bail!("pump_sq must be non-negative, got {v}");
                }
                cfg.pump.amplitude = v.sqrt();
            }
            Param::Detuning => cfg.model.detuning = v,
            Param::Rigidity => cfg.model.rigidity = v,
        }
        Ok(())
    }
}

fn parse_axis(spec: &str) -> Result<(Param, Vec<f64>)> {
    let (name, values) = spec.split_once('=').ok_or_else(|| anyhow!("axis `{spec}` is not NAME=V1,V2,..."))?;
    let param = Param::parse(name.trim())?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value `{v}` on axis {name}")))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("axis {name} has no values");
    }
    Ok((param, values))
}

/// Every combination of axis values, first axis slowest.
fn grid(axes: &[(Param, Vec<f64>)]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![vec![]], |acc, (_, values)| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

fn point_key(axes: &[(Param, Vec<f64>)], values: &[f64]) -> String {
    axes.iter().zip(values).map(|((p, _), v)| format!("{}={v}", p.name())).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PointResult {
    status: String,
    #[serde(default)]
    message: Option<String>,
    tau: f64,
    steady: bool,
    class: Option<String>,
    k_star: Option<f64>,
    contrast: Option<f64>,
    peaks: Option<usize>,
    written: Option<bool>,
}

fn run_point(base: &RunConfig, axes: &[(Param, Vec<f64>)], values: &[f64], dir: &Path) -> PointResult {
    let attempt = || -> Result<PointResult> {
        let mut cfg = base.clone();
        for ((p, _), &v) in axes.iter().zip(values) {
            p.apply(&mut cfg, v)?;
        }
        cfg.output.dir = dir.to_path_buf();
        cfg.validate()?;
        let o = execute(&cfg, dir, true)?;
        Ok(PointResult {
            status: o.status.to_owned(),
            message: o.message.clone(),
            tau: o.tau,
            steady: o.steady,
            class: o.pattern.as_ref().map(|p| p.class.to_string()),
            k_star: o.pattern.as_ref().and_then(|p| p.k_star),
            contrast: o.pattern.as_ref().map(|p| p.contrast),
            peaks: o.pattern.as_ref().map(|p| p.peaks.len()),
            written: o.persistence.as_ref().map(|r| r.written),
        })
    };
    attempt().unwrap_or_else(|e| PointResult {
        status: "error".into(),
        message: Some(format!("{e:#}")),
        tau: 0.0,
        steady: false,
        class: None,
        k_star: None,
        contrast: None,
        peaks: None,
        written: None,
    })
}

fn read_manifest(path: &Path) -> Result<BTreeMap<String, PointResult>> {
    let mut done = BTreeMap::new();
    let Ok(text) = fs::read_to_string(path) else { return Ok(done) };
    for (n, line) in text.lines().enumerate() {
        let Some((key, json)) = line.split_once('\t') else { continue };
        match serde_json::from_str(json) {
            Ok(r) => {
                done.insert(key.to_owned(), r);
            }
            // a line cut short by an interrupted write is recomputed
            Err(e) => log::warn!("{}:{}: ignoring unreadable entry: {e}", path.display(), n + 1),
        }
    }
    Ok(done)
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var("OMPS_THREADS") {
        let n: usize = s.trim().parse().with_context(|| format!("OMPS_THREADS must be a positive integer, got `{s}`"))?;
        b = b.num_threads(n.max(1));
    }
    Ok(b.build()?)
}

pub fn main(args: SweepArgs) -> Result<ExitCode> {
    let base = args.cfg.load()?;
    if base.output.mode == Mode::Oracle {
        bail!("oracle mode cannot be swept; use oracle-check");
    }
    let out = base.output.dir.clone();
    if args.axes.is_empty() {
        // a sweep without axes is a plain run
        let o = execute(&base, &out, false)?;
        println!("{}", describe(&o));
        return Ok(if o.diverged() { ExitCode::from(2) } else { ExitCode::SUCCESS });
    }
    let axes = args.axes.iter().map(|s| parse_axis(s)).collect::<Result<Vec<_>>>()?;
    let points = grid(&axes);
    ensure_dir(&out)?;
    let manifest_path = out.join("manifest.txt");
    if args.fresh {
        let _ = fs::remove_file(&manifest_path);
    }
    let done = read_manifest(&manifest_path)?;
    let pending: Vec<(usize, &Vec<f64>)> =
        points.iter().enumerate().filter(|(_, v)| !done.contains_key(&point_key(&axes, v))).collect();
    println!("{} point(s), {} already in the manifest", points.len(), points.len() - pending.len());

    let manifest = Mutex::new(OpenOptions::new().create(true).append(true).open(&manifest_path)?);
    let fresh: Vec<(String, PointResult)> = thread_pool()?.install(|| {
        pending
            .par_iter()
            .map(|&(i, values)| {
                let key = point_key(&axes, values);
                let dir = out.join("points").join(format!("{i:04}"));
                let r = run_point(&base, &axes, values, &dir);
                // errored points stay out of the manifest and are retried on resume
                if r.status != "error" {
                    let line = format!("{key}\t{}\n", serde_json::to_string(&r).expect("plain data serializes"));
                    let mut m = manifest.lock().unwrap_or_else(|e| e.into_inner());
                    if let Err(e) = m.write_all(line.as_bytes()).and_then(|()| m.flush()) {
                        log::error!("cannot append to the manifest: {e}");
                    }
                }
                println!("[{key}] {}", r.message.as_deref().filter(|_| r.status != "ok").unwrap_or(&r.status));
                (key, r)
            })
            .collect()
    });
    let mut all = done;
    all.extend(fresh);

    let mut w = create(&out.join("sweep.csv"))?;
    let names: Vec<&str> = axes.iter().map(|(p, _)| p.name()).collect();
    writeln!(w, "point,{},status,tau,steady,class,k_star,contrast,peaks,written,message", names.join(","))?;
    let mut failed = 0;
    for (i, values) in points.iter().enumerate() {
        let r = &all[&point_key(&axes, values)];
        if r.status != "ok" {
            failed += 1;
        }
        let vals: Vec<String> = values.iter().map(f64::to_string).collect();
        let message = r.message.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{},{},{},\"{message}\"",
            vals.join(","),
            r.status,
            r.tau,
            u8::from(r.steady),
            opt(&r.class),
            opt(&r.k_star),
            opt(&r.contrast),
            opt(&r.peaks),
            opt(&r.written.map(u8::from)),
        )?;
    }
    w.flush()?;
    println!("{} point(s) done, {failed} did not finish cleanly; table in {}", points.len(), out.join("sweep.csv").display());
    Ok(ExitCode::SUCCESS)
}
