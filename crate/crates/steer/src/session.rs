//! One live simulation driven by operator commands.
//!
//! A [`Session`] never looks at the clock. The caller hands it a wall-time
//! budget per [`Session::tick`]; the budget is turned into a whole number of
//! solver steps at the session's `tau_per_second` rate, with the fractional
//! remainder carried to the next tick. Frames are emitted once enough budget
//! has accumulated for the frame-rate cap. Given the same commands and the
//! same budgets a session therefore produces the same frames.

use std::time::Instant;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use omps_core::config::RunConfig;
use omps_core::{AddressBeam, Error as CoreError, Evolver, Snapshot};

use crate::decimate::decimate;
use crate::error::{rejected, Result, SteerError};
use crate::protocol::{encode_f32, BeamOverlay, FrameMessage, ServerMessage, SessionCommand, SessionState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionOptions {
    /// Simulated time advanced per second of wall time.
    pub tau_per_second: f64,
    pub max_fps: f64,
    pub max_samples: usize,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions { tau_per_second: 20.0, max_fps: 30.0, max_samples: 512 }
    }
}

/// Result of one [`Session::tick`].
#[derive(Debug, Default)]
pub struct TickReport {
    pub steps: u64,
    pub frames: Vec<FrameMessage>,
    /// Terminal status if the simulation diverged during the tick.
    pub status: Option<ServerMessage>,
}

/// Steps between deadline checks inside a tick.
const STEP_CHUNK: u64 = 16;

pub struct Session {
    opts: SessionOptions,
    state: SessionState,
    started: bool,
    evolver: Option<Box<dyn Evolver + Send>>,
    steady_tol: f64,
    step_carry: f64,
    since_frame: f64,
    send_grid: bool,
    last_frame: Option<(f64, Vec<f64>, Vec<f64>)>,
}

impl Session {
    pub fn new(opts: SessionOptions) -> Self {
        Session {
            opts,
            state: SessionState::Unconfigured,
            started: false,
            evolver: None,
            steady_tol: 0.0,
            step_carry: 0.0,
            since_frame: 0.0,
            send_grid: true,
            last_frame: None,
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn options(&self) -> &SessionOptions {
        &self.opts
    }

    pub fn tau(&self) -> f64 {
        self.evolver.as_ref().map_or(0.0, |e| e.tau())
    }

    pub fn evolver(&self) -> Option<&(dyn Evolver + Send)> {
        self.evolver.as_deref()
    }

    /// Applies one command. Rejected commands leave the session untouched
    /// and come back as a single error message.
    pub fn apply(&mut self, cmd: SessionCommand) -> Vec<ServerMessage> {
        let name = cmd.name();
        match self.try_apply(cmd) {
            Ok(mut extra) => {
                extra.insert(0, ServerMessage::Ack { command: name.to_owned(), tau: self.tau() });
                extra
            }
            Err(e) => vec![ServerMessage::error(format!("{name}: {e}"))],
        }
    }

    fn try_apply(&mut self, cmd: SessionCommand) -> Result<Vec<ServerMessage>> {
        if self.state == SessionState::Closed {
            return rejected("session is closed");
        }
        match cmd {
            SessionCommand::Configure { config, preset, tau_per_second } => {
                let cfg = match (config, preset) {
                    (Some(c), None) => {
                        c.validate()?;
                        *c
                    }
                    (None, Some(name)) => RunConfig::preset(&name)?,
                    _ => return rejected("give exactly one of `config` or `preset`"),
                };
                if let Some(rate) = tau_per_second {
                    if !(rate > 0.0 && rate.is_finite()) {
                        return rejected("tau_per_second must be positive");
                    }
                    self.opts.tau_per_second = rate;
                }
                self.evolver = Some(cfg.evolver()?);
                self.steady_tol = cfg.integrator.steady_tol;
                self.state = SessionState::Paused;
                self.started = false;
                self.step_carry = 0.0;
                self.since_frame = 0.0;
                self.send_grid = true;
                self.last_frame = None;
                let frame = self.frame();
                Ok(vec![ServerMessage::Frame(frame)])
            }
            SessionCommand::Shutdown => {
                self.state = SessionState::Closed;
                Ok(vec![ServerMessage::Status { state: SessionState::Closed, tau: self.tau(), message: "shut down".into() }])
            }
            SessionCommand::SnapshotRequest => {
                let ev = self.configured()?;
                let bytes = ev.snapshot().to_bytes()?;
                Ok(vec![ServerMessage::Snapshot { tau: ev.tau(), data: STANDARD.encode(bytes) }])
            }
            other => {
                if self.state == SessionState::Diverged {
                    return rejected("the simulation diverged; configure a new one");
                }
                self.configured()?;
                self.apply_live(other)?;
                Ok(vec![])
            }
        }
    }

    fn configured(&self) -> Result<&(dyn Evolver + Send)> {
        match &self.evolver {
            Some(e) => Ok(e.as_ref()),
            None => rejected("no simulation configured"),
        }
    }

    fn apply_live(&mut self, cmd: SessionCommand) -> Result<()> {
        let ev = self.evolver.as_mut().expect("checked by caller");
        match cmd {
            SessionCommand::Start => {
                if self.started {
                    return rejected("already started");
                }
                self.started = true;
                self.state = SessionState::Running;
            }
            SessionCommand::Pause => {
                if self.state != SessionState::Running {
                    return rejected("not running");
                }
                self.state = SessionState::Paused;
            }
            SessionCommand::Resume => {
                if !self.started || self.state != SessionState::Paused {
                    return rejected("not paused");
                }
                self.state = SessionState::Running;
            }
            SessionCommand::SetPump { amplitude, width } => {
                let mut sched = ev.schedule().clone();
                sched.base.amplitude = amplitude;
                sched.base.width = width;
                ev.set_schedule(sched)?;
            }
            SessionCommand::AddBeam { id, center, amplitude, phase, width, duration } => {
                let mut sched = ev.schedule().clone();
                if sched.beams.iter().any(|b| b.id == id) {
                    return rejected(format!("beam id {id} is already in use"));
                }
                if !(duration > 0.0 && duration.is_finite()) {
                    return rejected("duration must be positive");
                }
                let tau = ev.tau();
                sched.beams.push(AddressBeam { id, amplitude, phase, center, width, start: tau, stop: tau + duration });
                ev.set_schedule(sched)?;
            }
            SessionCommand::RemoveBeam { id } => {
                let mut sched = ev.schedule().clone();
                let before = sched.beams.len();
                sched.beams.retain(|b| b.id != id);
                if sched.beams.len() == before {
                    return rejected(format!("no beam with id {id}"));
                }
                ev.set_schedule(sched)?;
            }
            _ => unreachable!("handled in try_apply"),
        }
        Ok(())
    }

    /// Spends `budget` seconds of wall time. Stops early, between steps, if
    /// `deadline` passes; the steps not taken are dropped.
    pub fn tick(&mut self, budget: f64, deadline: Option<Instant>) -> TickReport {
        let mut report = TickReport::default();
        if self.state != SessionState::Running || !(budget > 0.0) {
            return report;
        }
        let ev = self.evolver.as_mut().expect("running sessions are configured");
        let wanted = budget * self.opts.tau_per_second / ev.dt() + self.step_carry;
        let steps = wanted.floor() as u64;
        self.step_carry = wanted - steps as f64;
        while report.steps < steps {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                self.step_carry = 0.0;
                break;
            }
            let batch = STEP_CHUNK.min(steps - report.steps);
            match ev.advance(batch) {
                Ok(()) => report.steps += batch,
                Err(e) => {
                    let message = match e {
                        CoreError::Diverged { .. } => e.to_string(),
                        other => format!("solver error: {other}"),
                    };
                    self.state = SessionState::Diverged;
                    report.status = Some(ServerMessage::Status { state: SessionState::Diverged, tau: ev.tau(), message });
                    return report;
                }
            }
        }
        self.since_frame += budget;
        if self.since_frame * self.opts.max_fps >= 1.0 {
            self.since_frame = 0.0;
            report.frames.push(self.frame());
        }
        report
    }

    /// Decimated view of the current state. All arrays come from one
    /// snapshot, so a frame never mixes two times.
    pub fn frame(&mut self) -> FrameMessage {
        let ev = self.evolver.as_ref().expect("frames need a configured session");
        let snap: Snapshot = ev.snapshot();
        let intensity = snap.intensity();
        let d = decimate(&snap.x, &intensity, &snap.z_grid, self.opts.max_samples);
        let steady = match &self.last_frame {
            Some((tau, i0, z0)) if snap.tau > *tau => {
                let change = sup_diff(&intensity, i0).max(sup_diff(&snap.z_grid, z0));
                change / (snap.tau - tau) < self.steady_tol
            }
            _ => false,
        };
        let beams = ev
            .schedule()
            .beams
            .iter()
            .map(|b| BeamOverlay {
                id: b.id,
                center: b.center,
                width: b.width,
                amplitude: b.amplitude,
                phase: b.phase,
                start: b.start,
                stop: b.stop,
                active: b.is_active(snap.tau),
            })
            .collect();
        let x = self.send_grid.then(|| encode_f32(&d.x));
        self.send_grid = false;
        self.last_frame = Some((snap.tau, intensity, snap.z_grid.clone()));
        FrameMessage {
            tau: snap.tau,
            decimation: d.factor,
            samples: d.intensity.len(),
            x,
            intensity: encode_f32(&d.intensity),
            z: encode_f32(&d.z),
            beams,
            steady,
        }
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session").field("state", &self.state).field("tau", &self.tau()).finish_non_exhaustive()
    }
}

impl From<SteerError> for ServerMessage {
    fn from(e: SteerError) -> Self {
        ServerMessage::error(e.to_string())
    }
}
