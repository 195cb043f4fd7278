use omps_core::config::RunConfig;
use omps_core::{Evolver, Simulation, Snapshot};
use omps_steer::protocol::{decode_f32, FrameMessage, ServerMessage, SessionCommand, SessionState};
use omps_steer::{Session, SessionOptions};

/// Write/erase geometry without the scripted beams, at a pump inside the
/// homogeneous bistable window.
fn bare_fig3(pump_sq: f64) -> RunConfig {
    let mut cfg = RunConfig::preset("fig3-write-erase").unwrap();
    cfg.beams.clear();
    cfg.pump.amplitude = pump_sq.sqrt();
    cfg
}

fn configured(cfg: RunConfig, rate: f64) -> Session {
    let mut s = Session::new(SessionOptions::default());
    let out = s.apply(SessionCommand::Configure { config: Some(Box::new(cfg)), preset: None, tau_per_second: Some(rate) });
    assert!(matches!(out[0], ServerMessage::Ack { .. }), "{out:?}");
    s
}

fn running(cfg: RunConfig, rate: f64) -> Session {
    let mut s = configured(cfg, rate);
    assert!(matches!(s.apply(SessionCommand::Start)[0], ServerMessage::Ack { .. }));
    s
}

fn snapshot_bytes(s: &Session) -> Vec<u8> {
    s.evolver().unwrap().snapshot().to_bytes().unwrap()
}

fn is_error(msgs: &[ServerMessage]) -> bool {
    msgs.len() == 1 && matches!(msgs[0], ServerMessage::Error { .. })
}

/// Advances by whole simulated time `tau` in ticks of `budget` seconds.
fn run_for(s: &mut Session, tau: f64, budget: f64) -> Vec<FrameMessage> {
    let target = s.tau() + tau;
    let mut frames = Vec::new();
    while s.tau() < target - 1e-9 {
        frames.extend(s.tick(budget, None).frames);
    }
    frames
}

#[test]
fn zero_budget_changes_nothing() {
    let mut s = running(bare_fig3(2.25), 20.0);
    let before = snapshot_bytes(&s);
    let r = s.tick(0.0, None);
    assert_eq!(r.steps, 0);
    assert!(r.frames.is_empty());
    assert_eq!(snapshot_bytes(&s), before);
}

#[test]
fn steps_scale_with_the_budget() {
    let rate = 20.0;
    let dt = 1e-3;
    for budget in [0.0137, 0.05, 0.0021] {
        let exact = budget * rate / dt;
        let mut one = running(bare_fig3(2.25), rate);
        let mut ten = running(bare_fig3(2.25), rate);
        let small = one.tick(budget, None).steps;
        let large = ten.tick(10.0 * budget, None).steps;
        assert!((small as f64 - exact).abs() <= 1.0);
        assert!((large as f64 - 10.0 * exact).abs() <= 1.0, "{large} vs {}", 10.0 * exact);
        // ten small ticks add up to one large tick, the remainder is carried
        let total = small + (1..10).map(|_| one.tick(budget, None).steps).sum::<u64>();
        assert!((total as i64 - large as i64).abs() <= 1);
    }
}

#[test]
fn fixed_budgets_reproduce_the_frame_sequence() {
    let run = || {
        let mut s = running(bare_fig3(2.25), 20.0);
        s.apply(SessionCommand::AddBeam { id: 1, center: 12.0, amplitude: 1.0, phase: 0.0, width: 3.0, duration: 2.0 });
        (0..200).flat_map(|_| s.tick(1.0 / 60.0, None).frames).collect::<Vec<_>>()
    };
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
}

#[test]
fn frame_rate_never_exceeds_the_cap() {
    let mut s = running(bare_fig3(2.25), 5.0);
    let frames: Vec<FrameMessage> = (0..2000).flat_map(|_| s.tick(1e-3, None).frames).collect();
    // two seconds of budget
    assert!(frames.len() <= 60, "{} frames", frames.len());
    assert!(frames.len() >= 55);
    assert!(frames.windows(2).all(|w| w[1].tau > w[0].tau));
}

#[test]
fn pause_freezes_and_resume_continues_deterministically() {
    let budget = 1.0 / 30.0;
    let mut paused = running(bare_fig3(2.25), 30.0);
    let mut straight = running(bare_fig3(2.25), 30.0);
    for _ in 0..30 {
        paused.tick(budget, None);
        straight.tick(budget, None);
    }
    assert!(matches!(paused.apply(SessionCommand::Pause)[0], ServerMessage::Ack { .. }));
    let frozen = paused.tau();
    for _ in 0..50 {
        let r = paused.tick(budget, None);
        assert_eq!(r.steps, 0);
        assert!(r.frames.is_empty());
    }
    assert_eq!(paused.tau(), frozen);
    assert!(matches!(paused.apply(SessionCommand::Resume)[0], ServerMessage::Ack { .. }));
    for _ in 0..30 {
        paused.tick(budget, None);
        straight.tick(budget, None);
    }
    assert_eq!(snapshot_bytes(&paused), snapshot_bytes(&straight));
}

#[test]
fn commands_match_a_batch_run_with_the_same_schedule() {
    let cfg = bare_fig3(2.25);
    let mut s = running(cfg.clone(), 50.0);
    run_for(&mut s, 3.0, 0.01);
    let t1 = s.tau();
    s.apply(SessionCommand::AddBeam { id: 7, center: 12.0, amplitude: 1.0, phase: 0.3, width: 3.0, duration: 1.5 });
    run_for(&mut s, 2.0, 0.01);
    let t2 = s.tau();
    s.apply(SessionCommand::SetPump { amplitude: 1.4, width: 23.0 });
    run_for(&mut s, 1.0, 0.01);
    let steps = |t: f64| (t / cfg.integrator.dt).round() as u64;

    let it = &cfg.integrator;
    let mut sched = cfg.schedule();
    sched.beams.push(omps_core::AddressBeam {
        id: 7,
        amplitude: 1.0,
        phase: 0.3,
        center: 12.0,
        width: 3.0,
        start: t1,
        stop: t1 + 1.5,
    });
    let mut batch = Simulation::new(cfg.model.clone(), sched.clone(), it.dt, it.seed, it.noise).unwrap();
    batch.advance(steps(t2)).unwrap();
    sched.base.amplitude = 1.4;
    batch.set_schedule(sched).unwrap();
    batch.advance(steps(s.tau()) - steps(t2)).unwrap();
    assert_eq!(batch.snapshot().to_bytes().unwrap(), snapshot_bytes(&s));
}

fn decoded(frame: &FrameMessage) -> (Vec<f32>, Vec<f32>) {
    (decode_f32(&frame.intensity).unwrap(), decode_f32(&frame.z).unwrap())
}

/// Peak intensity near `center` over the intensity at the chain centre.
fn peak_ratio(x: &[f32], intensity: &[f32], center: f32) -> f32 {
    let near = x.iter().zip(intensity).filter(|(x, _)| (**x - center).abs() <= 6.0).map(|(_, i)| *i).fold(0.0, f32::max);
    let mid = x.iter().zip(intensity).filter(|(x, _)| x.abs() <= 3.0).map(|(_, i)| *i).fold(0.0, f32::max);
    near / mid
}

#[test]
fn written_peak_persists_and_an_opposite_phase_beam_erases_it() {
    let mut s = Session::new(SessionOptions::default());
    let cfg = Some(Box::new(bare_fig3(2.25)));
    let out = s.apply(SessionCommand::Configure { config: cfg, preset: None, tau_per_second: Some(100.0) });
    let ServerMessage::Frame(first) = &out[1] else { panic!("{out:?}") };
    let x = decode_f32(first.x.as_ref().expect("first frame carries positions")).unwrap();
    s.apply(SessionCommand::Start);
    s.apply(SessionCommand::AddBeam { id: 1, center: 12.0, amplitude: 1.0, phase: 0.0, width: 3.0, duration: 20.0 });
    let frames = run_for(&mut s, 80.0, 0.05);
    let last = frames.last().unwrap();
    assert!(last.x.is_none());
    assert!(!last.beams[0].active);
    let (i, z) = decoded(last);
    assert_eq!(i.len(), x.len());
    assert_eq!(z.len(), x.len());
    assert!(peak_ratio(&x, &i, 12.0) > 2.0, "no lasting peak");

    s.apply(SessionCommand::AddBeam { id: 2, center: 12.0, amplitude: 1.0, phase: std::f64::consts::PI, width: 3.0, duration: 20.0 });
    let frames = run_for(&mut s, 60.0, 0.05);
    let (i, _) = decoded(frames.last().unwrap());
    assert!(peak_ratio(&x, &i, 12.0) < 1.5, "peak survived the erase beam");
}

#[test]
fn large_grids_are_decimated_to_the_sample_cap() {
    let mut s = Session::new(SessionOptions::default());
    s.apply(SessionCommand::Configure { config: None, preset: Some("fig2-pattern".into()), tau_per_second: None });
    let f = s.frame();
    // 80 mirrors of 11 points
    assert_eq!(f.decimation, 2);
    assert_eq!(f.samples, 440);
    assert_eq!(decode_f32(&f.intensity).unwrap().len(), 440);
}

#[test]
fn bad_commands_are_rejected_and_the_session_goes_on() {
    let mut s = Session::new(SessionOptions::default());
    assert!(is_error(&s.apply(SessionCommand::Start)));
    assert!(is_error(&s.apply(SessionCommand::SnapshotRequest)));
    assert!(is_error(&s.apply(SessionCommand::Configure { config: None, preset: Some("fig9".into()), tau_per_second: None })));
    assert!(is_error(&s.apply(SessionCommand::Configure { config: None, preset: None, tau_per_second: None })));
    assert_eq!(s.state(), SessionState::Unconfigured);

    let mut s = running(bare_fig3(2.25), 20.0);
    let beam = SessionCommand::AddBeam { id: 3, center: 0.0, amplitude: 1.0, phase: 0.0, width: 2.0, duration: 5.0 };
    assert!(!is_error(&s.apply(beam.clone())));
    assert!(is_error(&s.apply(beam)));
    assert!(is_error(&s.apply(SessionCommand::RemoveBeam { id: 9 })));
    assert!(is_error(&s.apply(SessionCommand::Resume)));
    assert!(is_error(&s.apply(SessionCommand::Start)));
    assert!(is_error(&s.apply(SessionCommand::SetPump { amplitude: f64::NAN, width: 23.0 })));
    assert!(!is_error(&s.apply(SessionCommand::RemoveBeam { id: 3 })));
    assert_eq!(s.state(), SessionState::Running);
    assert!(s.tick(0.1, None).steps > 0);

    let snap = s.apply(SessionCommand::SnapshotRequest);
    let ServerMessage::Snapshot { data, tau } = &snap[1] else { panic!("{snap:?}") };
    use base64::Engine;
    let bytes = base64::engine::general_purpose::STANDARD.decode(data).unwrap();
    assert_eq!(Snapshot::read_from(&bytes[..]).unwrap().tau, *tau);

    s.apply(SessionCommand::Shutdown);
    assert_eq!(s.state(), SessionState::Closed);
    assert!(is_error(&s.apply(SessionCommand::Start)));
}

#[test]
fn divergence_ends_the_session_with_a_status() {
    let mut s = running(bare_fig3(2.25), 20.0);
    s.apply(SessionCommand::SetPump { amplitude: 1e200, width: 23.0 });
    let r = s.tick(0.5, None);
    assert!(matches!(r.status, Some(ServerMessage::Status { state: SessionState::Diverged, .. })), "{:?}", r.status);
    assert_eq!(s.state(), SessionState::Diverged);
    assert!(is_error(&s.apply(SessionCommand::Resume)));
    assert_eq!(s.tick(0.5, None).steps, 0);
    // a fresh configuration recovers
    assert!(!is_error(&s.apply(SessionCommand::Configure { config: None, preset: Some("fig3-write-erase".into()), tau_per_second: None })));
    assert_eq!(s.state(), SessionState::Paused);
}
