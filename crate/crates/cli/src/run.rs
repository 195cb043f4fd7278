//! `omps run`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use omps_core::analysis::{classify, soliton_persistence, PatternReport, PersistenceReport, Thresholds};
use omps_core::config::{Mode, RunConfig};
use omps_core::field::{simulate, RunSummary};
use omps_core::{Error as CoreError, Snapshot};
use serde::Serialize;

use crate::output::{ensure_dir, write_config, write_csv, write_gnuplot, write_json, write_snapshot};
use crate::ConfigArgs;

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Write only the final snapshot instead of one per interval.
    #[arg(long)]
    pub final_only: bool,
}

/// How long a written structure must outlive its beam to count.
pub const MIN_SURVIVAL: f64 = 50.0;

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub tau: f64,
    pub steady: bool,
    pub snapshots: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub persistence: Option<PersistenceReport>,
}

impl RunOutcome {
    pub fn diverged(&self) -> bool {
        self.status == "diverged"
    }
}

/// Runs `cfg` and writes everything under `dir`. A diverged run keeps the
/// files written so far and reports `status = "diverged"`.
pub fn execute(cfg: &RunConfig, dir: &Path, final_only: bool) -> Result<RunOutcome> {
    ensure_dir(dir)?;
    write_config(dir, cfg)?;
    let snap_dir: PathBuf = dir.join("snapshots");
    if !final_only {
        ensure_dir(&snap_dir)?;
    }
    let mut ev = cfg.evolver()?;
    let keep_series = !cfg.beams.is_empty();
    let mut series: Vec<Snapshot> = Vec::new();
    let mut written = 0usize;
    let result = simulate(&mut *ev, &cfg.run_options(), |s| {
        if !final_only {
            s.write_to(std::fs::File::create(snap_dir.join(format!("snap_{written:06}.omps")))?)?;
        }
        written += 1;
        if keep_series {
            series.push(s.clone());
        }
        Ok(())
    });
    let summary: RunSummary = match result {
        Ok(s) => s,
        Err(e @ CoreError::Diverged { .. }) => {
            let outcome = RunOutcome {
                status: "diverged",
                message: Some(e.to_string()),
                tau: ev.tau(),
                steady: false,
                snapshots: written,
                pattern: None,
                persistence: None,
            };
            write_json(&dir.join("report.json"), &outcome)?;
            return Ok(outcome);
        }
        Err(e) => return Err(e.into()),
    };
    let last = ev.snapshot();
    write_snapshot(&dir.join("final.omps"), &last)?;
    write_csv(&dir.join("final.csv"), &last)?;
    write_gnuplot(dir, "final.csv", &format!("tau = {:.1}", last.tau))?;
    let th = Thresholds::default();
    let pattern = classify(&last, cfg.pump.width, summary.steady, &th);
    let persistence =
        keep_series.then(|| soliton_persistence(&series, &cfg.schedule(), cfg.pump.width, MIN_SURVIVAL, &th));
    let outcome = RunOutcome {
        status: "ok",
        message: None,
        tau: summary.final_tau,
        steady: summary.steady,
        snapshots: written,
        pattern: Some(pattern),
        persistence,
    };
    write_json(&dir.join("report.json"), &outcome)?;
    Ok(outcome)
}

pub fn describe(o: &RunOutcome) -> String {
    let Some(p) = &o.pattern else {
        return format!("{} at tau {:.3}: {}", o.status, o.tau, o.message.as_deref().unwrap_or(""));
    };
    let mut s = format!("tau {:.1}, steady {}, class {}", o.tau, o.steady, p.class);
    if let Some(k) = p.k_star {
        s += &format!(", k* {k:.4}");
    }
    s += &format!(", contrast {:.3}, {} peak(s)", p.contrast, p.peaks.len());
    if let Some(r) = &o.persistence {
        s += &format!(", written {} (survived {:.0})", r.written, r.survived_tau);
        if let Some(d) = r.disturbance_percent {
            s += &format!(", disturbance {d:.2}%");
        }
        let erased = r.erases.iter().filter(|e| e.erased).count();
        if !r.erases.is_empty() {
            s += &format!(", erased {erased}/{}", r.erases.len());
        }
    }
    s
}

pub fn main(args: RunArgs) -> Result<ExitCode> {
    let cfg = args.cfg.load()?;
    if cfg.output.mode == Mode::Oracle {
        return crate::oracle::run_config(&cfg, crate::oracle::Case::Both);
    }
    let dir = cfg.output.dir.clone();
    let outcome = execute(&cfg, &dir, args.final_only)?;
    println!("{}", describe(&outcome));
    println!("outputs in {}", dir.display());
    Ok(if outcome.diverged() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
