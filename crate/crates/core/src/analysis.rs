//! Post-processing of simulated states: pattern classification, bistability
//! curves and the bookkeeping of write/erase experiments.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::Evolver;
use crate::model::{hss_field, hss_intensities, NormalizedParams};
use crate::pump::{AddressBeam, PumpSchedule};
use crate::snapshot::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Relative variance below which the plateau counts as uniform.
    pub eps_var: f64,
    /// Minimum peak-to-background ratio of a localized structure.
    pub c_min: f64,
    /// Maxima below this ratio count as ripples, not structures.
    pub ripple: f64,
    /// Plateau half width as a fraction of the pump width.
    pub plateau_fraction: f64,
    pub max_peaks: usize,
    /// A dominant wavenumber only marks a periodic state when at least this
    /// many wavelengths fit inside the plateau.
    pub min_periods: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { eps_var: 1e-4, c_min: 2.0, ripple: 1.5, plateau_fraction: 0.8, max_peaks: 4, min_periods: 2.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternClass {
    Homogeneous,
    Periodic,
    Localized,
    Mixed,
    Unsteady,
}

impl fmt::Display for PatternClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PatternClass::Homogeneous => "homogeneous",
            PatternClass::Periodic => "periodic",
            PatternClass::Localized => "localized",
            PatternClass::Mixed => "mixed",
            PatternClass::Unsteady => "unsteady",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
    /// Full width at half height above the background.
    pub fwhm: f64,
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub class: PatternClass,
    /// Dominant wavenumber of the plateau spectrum.
    pub k_star: Option<f64>,
    /// Share of the non-constant plateau power near `k_star`.
    pub spectral_share: f64,
    /// Peaks with contrast above the ripple level, highest first.
    pub peaks: Vec<Peak>,
    pub background: f64,
    /// Highest peak over background (1 if there is no peak).
    pub contrast: f64,
}

/// Half width of the region used for classification.
pub fn plateau_half_width(pump_width: f64, window_half_width: f64, th: &Thresholds) -> f64 {
    (th.plateau_fraction * pump_width).min(window_half_width)
}

/// Classifies a snapshot; see [`classify_profile`].
pub fn classify(snapshot: &Snapshot, pump_width: f64, steady: bool, th: &Thresholds) -> PatternReport {
    let half = snapshot.x.last().map_or(0.0, |x| x.abs()).max(snapshot.x.first().map_or(0.0, |x| x.abs()));
    classify_profile(&snapshot.x, &snapshot.intensity(), plateau_half_width(pump_width, half + 1.0, th), steady, th)
}

/// Classifies the intensity restricted to `|x| < plateau`.
///
/// The checks run in order: homogeneous (small relative variance), unsteady,
/// periodic (one spectral line and its two neighbours hold more than half of
/// the non-constant power), localized (a few peaks above `c_min` and nothing
/// else above the ripple level), and mixed otherwise.
pub fn classify_profile(x: &[f64], intensity: &[f64], plateau: f64, steady: bool, th: &Thresholds) -> PatternReport {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() < plateau).collect();
    let vals: Vec<f64> = idx.iter().map(|&i| intensity[i]).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let count = vals.len();
    let mut report = PatternReport {
        class: PatternClass::Homogeneous,
        k_star: None,
        spectral_share: 0.0,
        peaks: vec![],
        background: 0.0,
        contrast: 1.0,
    };
    if count < 3 {
        return report;
    }
    let mean = vals.iter().sum::<f64>() / count as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    report.background = median(&vals);

    let (k_star, share) = dominant_wavenumber(&vals, xs[1] - xs[0]);
    report.spectral_share = share;
    report.peaks = find_peaks(&xs, &vals, report.background, th.ripple);
    report.contrast = report.peaks.first().map_or(1.0, |p| p.contrast);

    if mean == 0.0 || var / (mean * mean) < th.eps_var {
        return report;
    }
    let span = xs[count - 1] - xs[0];
    if share > 0.5 && k_star.is_some_and(|k| k * span >= 2.0 * PI * th.min_periods) {
        report.k_star = k_star;
    }
    report.class = if !steady {
        PatternClass::Unsteady
    } else if report.k_star.is_some() {
        PatternClass::Periodic
    } else {
        let strong = report.peaks.iter().filter(|p| p.contrast > th.c_min).count();
        if strong >= 1 && strong <= th.max_peaks && strong == report.peaks.len() {
            PatternClass::Localized
        } else {
            PatternClass::Mixed
        }
    };
    report
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Dominant nonzero wavenumber of the mean-subtracted signal and the share
/// of the non-constant power held by its bin and the two adjacent bins.
pub fn dominant_wavenumber(vals: &[f64], dx: f64) -> (Option<f64>, f64) {
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // one-sided power for bins 1..=n/2
    let power: Vec<f64> = (0..=n / 2)
        .map(|m| {
            if m == 0 {
                0.0
            } else if 2 * m == n {
                buf[m].norm_sqr()
            } else {
                2.0 * buf[m].norm_sqr()
            }
        })
        .collect();
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return (None, 0.0);
    }
    let (best, _) = power
        .iter()
        .enumerate()
        .skip(1)
        .fold((1, f64::MIN), |acc, (m, &p)| if p > acc.1 { (m, p) } else { acc });
    let near: f64 = power[best.saturating_sub(1).max(1)..=(best + 1).min(n / 2)].iter().sum();
    (Some(2.0 * PI * best as f64 / (n as f64 * dx)), near / total)
}

fn find_peaks(xs: &[f64], vals: &[f64], background: f64, ripple: f64) -> Vec<Peak> {
    let n = vals.len();
    let mut peaks = Vec::new();
    if background <= 0.0 {
        return peaks;
    }
    for i in 1..n - 1 {
        if !(vals[i] > vals[i - 1] && vals[i] >= vals[i + 1]) {
            continue;
        }
        let contrast = vals[i] / background;
        if contrast < ripple {
            continue;
        }
        let level = background + 0.5 * (vals[i] - background);
        let crossing = |dir: isize| -> f64 {
            let mut j = i as isize;
            while j + dir >= 0 && ((j + dir) as usize) < n {
                let next = (j + dir) as usize;
                if vals[next] <= level {
                    let (a, b) = (vals[j as usize], vals[next]);
                    let t = (a - level) / (a - b);
                    return xs[j as usize] + t * (xs[next] - xs[j as usize]);
                }
                j += dir;
            }
            xs[j as usize]
        };
        peaks.push(Peak { position: xs[i], height: vals[i], fwhm: crossing(1) - crossing(-1), contrast });
    }
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
    peaks
}

/// Largest intensity within `radius` of `center` over the background, and
/// that height. The background is the plateau median taken outside the
/// `excluded` `(center, radius)` regions, so that neighbouring structures do
/// not raise it; if nothing is left the whole plateau is used.
pub fn local_contrast(
    x: &[f64],
    intensity: &[f64],
    center: f64,
    radius: f64,
    plateau: f64,
    excluded: &[(f64, f64)],
) -> (f64, f64) {
    let in_plateau = |x: f64| x.abs() < plateau;
    let free = |x: f64| excluded.iter().all(|&(c, r)| (x - c).abs() > r);
    let mut background_vals: Vec<f64> =
        x.iter().zip(intensity).filter(|(x, _)| in_plateau(**x) && free(**x)).map(|(_, i)| *i).collect();
    if background_vals.is_empty() {
        background_vals = x.iter().zip(intensity).filter(|(x, _)| in_plateau(**x)).map(|(_, i)| *i).collect();
    }
    let background = median(&background_vals);
    let height = x
        .iter()
        .zip(intensity)
        .filter(|(x, _)| (*x - center).abs() <= radius)
        .map(|(_, i)| *i)
        .fold(0.0, f64::max);
    (height, if background > 0.0 { height / background } else { f64::INFINITY })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BistabilityRow {
    pub pump_sq: f64,
    pub intensities: Vec<f64>,
    /// Stability against homogeneous perturbations, one flag per branch.
    pub stable: Vec<bool>,
}

/// Homogeneous branches for `E0^2` sampled uniformly on `[lo, hi]`.
pub fn bistability_curve(params: &NormalizedParams, lo: f64, hi: f64, samples: usize) -> Result<Vec<BistabilityRow>> {
    if !(lo >= 0.0 && hi > lo && samples >= 2) {
        return crate::error::domain("need 0 <= lo < hi and at least two samples");
    }
    (0..samples)
        .map(|s| {
            let pump_sq = lo + (hi - lo) * s as f64 / (samples - 1) as f64;
            let intensities = hss_intensities(params.detuning, pump_sq);
            let stable = intensities
                .iter()
                .map(|&i| Ok(hss_field(i, params.detuning, pump_sq.sqrt())?.is_stable_at(0.0, params)))
                .collect::<Result<Vec<bool>>>()?;
            Ok(BistabilityRow { pump_sq, intensities, stable })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriteRecord {
    pub center: f64,
    pub beam_off: f64,
    /// Time after beam-off during which the local contrast stayed above `c_min`.
    pub survived_tau: f64,
    pub written: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EraseRecord {
    pub center: f64,
    pub beam_off: f64,
    pub final_contrast: f64,
    pub erased: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    /// True when every write produced a structure lasting at least the
    /// required time after its beam switched off.
    pub written: bool,
    pub survived_tau: f64,
    /// Largest relative change (percent) of the first structure's height
    /// once the second write begins.
    pub disturbance_percent: Option<f64>,
    pub writes: Vec<WriteRecord>,
    pub erases: Vec<EraseRecord>,
}

/// Neighbourhood of an address beam searched for the structure it writes.
fn beam_radius(beam: &AddressBeam) -> f64 {
    (2.0 * beam.width).max(2.0)
}

/// Beams within a quarter turn of the holding pump's phase write; the others erase.
pub fn is_erase_beam(beam: &AddressBeam) -> bool {
    let phase = beam.phase.rem_euclid(2.0 * PI);
    phase > 0.5 * PI && phase < 1.5 * PI
}

/// Scores a write/erase experiment from its snapshot series.
pub fn soliton_persistence(
    snapshots: &[Snapshot],
    schedule: &PumpSchedule,
    pump_width: f64,
    min_survival: f64,
    th: &Thresholds,
) -> PersistenceReport {
    let mut writes: Vec<&AddressBeam> = schedule.beams.iter().filter(|b| !is_erase_beam(b)).collect();
    let mut erases: Vec<&AddressBeam> = schedule.beams.iter().filter(|b| is_erase_beam(b)).collect();
    writes.sort_by(|a, b| a.start.total_cmp(&b.start));
    erases.sort_by(|a, b| a.start.total_cmp(&b.start));
    let half = snapshots
        .first()
        .and_then(|s| s.x.last().map(|x| x.abs() + 1.0))
        .unwrap_or(f64::INFINITY);
    let plateau = plateau_half_width(pump_width, half, th);
    let excluded: Vec<(f64, f64)> = schedule.beams.iter().map(|b| (b.center, beam_radius(b))).collect();
    let radius = beam_radius;
    let contrast_at =
        |s: &Snapshot, b: &AddressBeam| local_contrast(&s.x, &s.intensity(), b.center, radius(b), plateau, &excluded);
    let end_tau = snapshots.last().map_or(0.0, |s| s.tau);
    // a structure's life ends when an erase beam aimed at it switches on
    let erase_time = |b: &AddressBeam| {
        erases
            .iter()
            .filter(|e| e.start >= b.stop && (e.center - b.center).abs() <= radius(b))
            .map(|e| e.start)
            .fold(f64::INFINITY, f64::min)
    };

    let mut records = Vec::new();
    for w in &writes {
        let horizon = erase_time(w).min(end_tau);
        let mut alive_until = w.stop;
        for s in snapshots.iter().filter(|s| s.tau >= w.stop && s.tau <= horizon) {
            if contrast_at(s, w).1 > th.c_min {
                alive_until = s.tau;
            } else {
                break;
            }
        }
        let survived_tau = alive_until - w.stop;
        records.push(WriteRecord {
            center: w.center,
            beam_off: w.stop,
            survived_tau,
            written: survived_tau >= min_survival,
        });
    }

    let disturbance_percent = match (writes.first(), writes.get(1)) {
        (Some(first), Some(second)) => {
            let horizon = erase_time(first);
            let before = snapshots.iter().rev().find(|s| s.tau <= second.start);
            before.map(|b| {
                let h0 = contrast_at(b, first).0;
                snapshots
                    .iter()
                    .filter(|s| s.tau >= second.start && s.tau < horizon)
                    .map(|s| (contrast_at(s, first).0 - h0).abs() / h0 * 100.0)
                    .fold(0.0, f64::max)
            })
        }
        _ => None,
    };

    let erase_records = erases
        .iter()
        .filter_map(|e| {
            let last = snapshots.last()?;
            (last.tau > e.stop).then(|| {
                let c = contrast_at(last, e).1;
                EraseRecord { center: e.center, beam_off: e.stop, final_contrast: c, erased: c < th.ripple }
            })
        })
        .collect();

    PersistenceReport {
        written: !records.is_empty() && records.iter().all(|r| r.written),
        survived_tau: records.iter().map(|r| r.survived_tau).fold(f64::INFINITY, f64::min).min(if records.is_empty() { 0.0 } else { f64::INFINITY }),
        disturbance_percent,
        writes: records,
        erases: erase_records,
    }
}

/// For each phase, copies `sim`, fires an address beam of that phase at
/// `center` for `duration`, lets it settle for `settle` and reports the
/// remaining local contrast. Useful to find the erasing phase.
pub fn erase_phase_scan<E: Evolver + Clone>(
    sim: &E,
    beam: &AddressBeam,
    phases: &[f64],
    settle: f64,
    pump_width: f64,
    th: &Thresholds,
) -> Result<Vec<(f64, f64)>> {
    phases
        .iter()
        .map(|&phase| {
            let mut s = sim.clone();
            let tau = s.tau();
            let shot = AddressBeam { phase, start: tau, stop: tau + (beam.stop - beam.start), ..beam.clone() };
            let steps = ((shot.stop - tau + settle) / s.dt()).round() as u64;
            s.set_schedule(s.schedule().clone().with_beam(shot))?;
            s.advance(steps)?;
            let plateau = plateau_half_width(pump_width, s.grid().half_width, th);
            let excluded: Vec<(f64, f64)> = s.schedule().beams.iter().map(|b| (b.center, beam_radius(b))).collect();
            let (_, c) = local_contrast(&s.grid().x, &s.intensity(), beam.center, beam_radius(beam), plateau, &excluded);
            Ok((phase, c))
        })
        .collect()
}
