//! Acceptance checks, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line (run with `--nocapture` to see them).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use camalign_core::correction::{
    apply_roll_correction, brute_force_correction, correction_angle, wrap_angle_diff,
    CorrectionInput,
};
use camalign_core::metrics::{
    hausdorff_distance, paired_t_test, pairwise_hausdorff, t_two_tailed_p, Trajectory,
};
use camalign_core::operators::naive_command;
use camalign_core::session::{
    build_schedule, parse_trial_log, read_trial_log, replay_transcript, trial_log_to_string,
    williams_square, ClientMessage, ClockMode, ConditionGrid, EngineConfig, Server, ServerMessage,
    ServerOptions, SessionEvent, TrialCondition, WireClient,
};
use camalign_core::sim::{initial_relative_position, Outcome};
use camalign_core::{
    axis_angle_to_rotation, frame_from_rotation, rpy_to_rotation, run_scripted, Axes, AxisAngle,
    FrameTriad, OperatorPolicy, SimConfig, Trial, UnitVec3, Vec3,
};

const ROLLS: [f64; 8] = [0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0];
const PITCH_YAW: [(f64, f64); 4] = [(0.0, 0.0), (0.0, 45.0), (45.0, 0.0), (45.0, 45.0)];
const BUDGET: u64 = 5000;

fn report(n: u32, ok: bool, detail: String) {
    println!(
        "criterion {n}: {} {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} failed: {detail}");
}

fn random_frame(rng: &mut ChaCha8Rng) -> FrameTriad {
    let axis = loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break UnitVec3::normalize(v).unwrap();
        }
    };
    let aa = AxisAngle::new(axis, rng.gen_range(0.0..PI)).unwrap();
    frame_from_rotation(&axis_angle_to_rotation(&aa))
}

/// `base` turned by `angle` about its own X (`about_x`) or Y axis, with that
/// axis copied bit for bit.
fn frame_sharing_axis(base: &FrameTriad, about_x: bool, angle: f64) -> FrameTriad {
    let (x, y, z) = (base.x.get(), base.y.get(), base.z.get());
    let (c, s) = (angle.cos(), angle.sin());
    if about_x {
        let ya = y * c + z * s;
        FrameTriad {
            x: base.x,
            y: UnitVec3::normalize(ya).unwrap(),
            z: UnitVec3::normalize(x.cross(ya)).unwrap(),
        }
    } else {
        let za = z * c + x * s;
        FrameTriad {
            x: UnitVec3::normalize(base.y.get().cross(za)).unwrap(),
            y: base.y,
            z: UnitVec3::normalize(za).unwrap(),
        }
    }
}

fn paper_configs() -> Vec<(f64, f64, f64)> {
    PITCH_YAW
        .iter()
        .flat_map(|&(p, y)| ROLLS.iter().map(move |&r| (r, p, y)))
        .collect()
}

#[test]
fn criterion_01_closed_form_matches_grid_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tol = 2.0 * PI / 4096.0;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let input = CorrectionInput::new(random_frame(&mut rng), random_frame(&mut rng));
        let closed = correction_angle(&input).unwrap();
        let grid = brute_force_correction(&input, 4096).unwrap();
        worst = worst.max(wrap_angle_diff(closed, grid).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        worst <= tol && secs < 10.0,
        format!("10000 pairs, max |closed - grid| = {worst:.3e} rad (tol {tol:.3e}), {secs:.2} s (limit 10 s)"),
    );
}

#[test]
fn criterion_02_remarks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // shared X or shared Y axis: θ = 0
    let mut worst_shared = 0.0f64;
    for _ in 0..1000 {
        let t = random_frame(&mut rng);
        // away from the half turn, where the objective flattens out
        let alpha = rng.gen_range(-0.9 * PI..0.9 * PI);
        for about_x in [true, false] {
            let a = frame_sharing_axis(&t, about_x, alpha);
            let theta = correction_angle(&CorrectionInput::new(t, a)).unwrap();
            worst_shared = worst_shared.max(theta.abs());
        }
    }
    // antipodal X and Y: θ = π exactly
    let mut antipodal_exact = true;
    for _ in 0..1000 {
        let t = random_frame(&mut rng);
        let a = FrameTriad {
            x: UnitVec3::new(-t.x.get()).unwrap(),
            y: UnitVec3::new(-t.y.get()).unwrap(),
            z: t.z,
        };
        antipodal_exact &= correction_angle(&CorrectionInput::new(t, a)).unwrap() == PI;
    }
    // zero-θ constructions satisfy X_T·Y_A = Y_T·X_A
    let mut worst_necessary = 0.0f64;
    for _ in 0..1000 {
        let t = random_frame(&mut rng);
        let a = random_frame(&mut rng);
        let input = CorrectionInput::new(t, a);
        let Ok(theta) = correction_angle(&input) else {
            continue;
        };
        let c = apply_roll_correction(&a, theta);
        let (xt, yt, xc, yc) = (t.x.get(), t.y.get(), c.x.get(), c.y.get());
        let dots = (xt.dot(yc) - yt.dot(xc)).abs();
        let angles =
            (xt.dot(yc).clamp(-1.0, 1.0).acos() - yt.dot(xc).clamp(-1.0, 1.0).acos()).abs();
        worst_necessary = worst_necessary.max(dots).max(angles);
    }
    report(
        2,
        worst_shared <= 1e-12 && antipodal_exact && worst_necessary <= 1e-9,
        format!(
            "shared-axis max |θ| = {worst_shared:.1e} (tol 1e-12); antipodal θ == π: {antipodal_exact}; \
             zero-θ max mismatch = {worst_necessary:.1e} (tol 1e-9)"
        ),
    );
}

#[test]
fn criterion_03_trajectory_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let script: Vec<Axes> = (0..500)
        .map(|_| {
            Axes::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let trace = |cfg: SimConfig| {
        let mut t = Trial::new(cfg, Some(500)).unwrap();
        let mut out = vec![t.state().rel_pos];
        for &a in &script {
            if t.outcome().is_some() {
                break;
            }
            t.advance(a).unwrap();
            out.push(t.state().rel_pos);
        }
        out
    };
    let mut identical = 0;
    let mut steps = 0;
    for (r, p, y) in paper_configs() {
        let woc = trace(SimConfig::paper(r, p, y, false).unwrap());
        let wc = trace(SimConfig::paper(r, p, y, true).unwrap());
        let same = woc.len() == wc.len()
            && woc
                .iter()
                .zip(&wc)
                .all(|(a, b)| a.to_array().map(f64::to_bits) == b.to_array().map(f64::to_bits));
        identical += same as usize;
        steps = steps.max(woc.len() - 1);
    }
    report(
        3,
        identical == 32,
        format!("{identical}/32 conditions bit-identical under WC and WOC ({steps}-step script)"),
    );
}

#[test]
fn criterion_04_start_goal_distance() {
    let expected = (30f64 * 30.0 + 30.0 * 30.0 + 140.0 * 140.0).sqrt();
    let mut worst = 0.0f64;
    for (r, p, y) in paper_configs() {
        let cfg = SimConfig::paper(r, p, y, false).unwrap();
        let rot = rpy_to_rotation(&cfg.rpy);
        let p_i = initial_relative_position(&rot, &cfg.scene);
        worst = worst.max((p_i.distance(cfg.scene.p_q) - expected).abs());
        let trial = Trial::new(cfg, None).unwrap();
        let goal = trial.simulator().goal();
        worst = worst.max((trial.state().rel_pos.distance(goal) - expected).abs());
    }
    report(
        4,
        worst <= 1e-9,
        format!("max |‖p_i - p_q‖ - {expected:.6}| = {worst:.1e} over 32 conditions (tol 1e-9)"),
    );
}

#[test]
fn criterion_05_naive_convergence_map() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for roll in ROLLS {
        let cfg = SimConfig::paper(roll, 0.0, 0.0, false).unwrap();
        let (cx, cy) = cfg.intrinsics.center();
        let mut t = Trial::new(cfg.clone(), Some(BUDGET)).unwrap();
        let mut errors = Vec::new();
        let px_err = |t: &Trial| {
            let v = t.view();
            (v.sphere_center.0 - cx).hypot(v.sphere_center.1 - cy)
        };
        errors.push(px_err(&t));
        while t.outcome().is_none() {
            let a = naive_command(t.view(), 0.8, 1.0, &cfg.intrinsics);
            t.advance(a).unwrap();
            errors.push(px_err(&t));
        }
        let outcome = t.outcome().unwrap();
        let verdict = match roll as i64 {
            0 | 45 | 315 => outcome == Outcome::Success,
            90 | 270 => outcome == Outcome::Timeout && errors.last() >= errors.first(),
            _ => outcome == Outcome::Timeout && errors[50..].windows(2).all(|w| w[1] > w[0]),
        };
        ok &= verdict;
        lines.push(format!(
            "{roll}°:{}({} steps, err {:.1}->{:.1} px)",
            outcome.as_str(),
            t.state().tick,
            errors[0],
            errors.last().unwrap()
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        ok && secs < 30.0,
        format!("{}; {secs:.2} s (limit 30 s)", lines.join(", ")),
    );
}

#[test]
fn criterion_06_correction_flattens_difficulty() {
    let mut all_success = true;
    let mut worst = 0.0f64;
    let mut groups = Vec::new();
    for (p, y) in PITCH_YAW {
        let mut counts = Vec::new();
        for roll in ROLLS {
            let cfg = SimConfig::paper(roll, p, y, true).unwrap();
            for _rep in 0..2 {
                let run = run_scripted(&cfg, &OperatorPolicy::naive(), BUDGET).unwrap();
                all_success &= run.outcome() == Outcome::Success;
                counts.push(run.steps());
            }
        }
        let base = counts[0] as f64;
        let spread = counts
            .iter()
            .map(|&c| (c as f64 / base - 1.0).abs())
            .fold(0.0, f64::max);
        worst = worst.max(spread);
        groups.push(format!(
            "p{p}/y{y}: base {} range {}..{} ({:+.1}%)",
            counts[0],
            counts.iter().min().unwrap(),
            counts.iter().max().unwrap(),
            spread * 100.0
        ));
    }
    report(
        6,
        all_success && worst <= 0.10,
        format!(
            "64 WC cells all succeed: {all_success}; {} (tol ±10%)",
            groups.join("; ")
        ),
    );
}

#[test]
fn criterion_07_adaptive_operator() {
    let mut ok = true;
    let mut cells = Vec::new();
    for roll in ROLLS {
        let adaptive = run_scripted(
            &SimConfig::paper(roll, 0.0, 0.0, false).unwrap(),
            &OperatorPolicy::adaptive(),
            BUDGET,
        )
        .unwrap();
        let baseline = run_scripted(
            &SimConfig::paper(roll, 0.0, 0.0, true).unwrap(),
            &OperatorPolicy::naive(),
            BUDGET,
        )
        .unwrap();
        ok &= adaptive.outcome() == Outcome::Success && adaptive.steps() >= baseline.steps();
        cells.push(format!("{roll}°:{}/{}", adaptive.steps(), baseline.steps()));
    }
    report(
        7,
        ok,
        format!("adaptive WOC vs naive WC steps: {}", cells.join(" ")),
    );
}

#[test]
fn criterion_08_metrics_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let walk = |rng: &mut ChaCha8Rng| {
        Trajectory::from_points((0..50).map(|_| {
            Vec3::new(
                rng.gen_range(-100.0..100.0),
                rng.gen_range(-100.0..100.0),
                rng.gen_range(-100.0..100.0),
            )
        }))
        .unwrap()
    };
    let oracle = |a: &Trajectory, b: &Trajectory| {
        let dir = |a: &Trajectory, b: &Trajectory| {
            a.points()
                .map(|p| {
                    b.points()
                        .map(|q| p.distance(q))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        dir(a, b).max(dir(b, a))
    };
    let mut exact = 0;
    for _ in 0..100 {
        let (a, b) = (walk(&mut rng), walk(&mut rng));
        exact += (hausdorff_distance(&a, &b).unwrap() == oracle(&a, &b)) as usize;
    }
    let five: Vec<Trajectory> = (0..5).map(|_| walk(&mut rng)).collect();
    let pairs = pairwise_hausdorff(&five).unwrap().len();
    let single = |p: [f64; 3]| Trajectory::from_points([Vec3::from_array(p)]).unwrap();
    let x = walk(&mut rng);
    let zero = hausdorff_distance(&x, &x).unwrap();
    let five_mm = hausdorff_distance(&single([0.0, 0.0, 0.0]), &single([3.0, 4.0, 0.0])).unwrap();
    report(
        8,
        exact == 100 && pairs == 10 && zero == 0.0 && five_mm == 5.0,
        format!("{exact}/100 equal to O(n²) oracle; 5 trials -> {pairs} pairs; d_H(X,X) = {zero}; d_H = {five_mm} for the 3-4-5 case"),
    );
}

#[test]
fn criterion_09_statistics() {
    let p = t_two_tailed_p(-2.449, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut antisymmetric = true;
    let mut monotone = true;
    for _ in 0..500 {
        let n = rng.gen_range(2..20);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        if let (Ok(ab), Ok(ba)) = (paired_t_test(&a, &b), paired_t_test(&b, &a)) {
            antisymmetric &=
                ab.t_statistic == -ba.t_statistic && ab.p_two_tailed == ba.p_two_tailed;
        }
        let df = rng.gen_range(1..60);
        let t = rng.gen_range(0.0..20.0);
        let dt = rng.gen_range(1e-3..5.0);
        monotone &= t_two_tailed_p(t + dt, df).unwrap() <= t_two_tailed_p(t, df).unwrap();
    }
    report(
        9,
        (p - 0.032).abs() <= 0.001 && antisymmetric && monotone,
        format!("p(t=-2.449, df=11) = {p:.4} (want 0.032 ± 0.001); antisymmetry {antisymmetric}; monotone {monotone}"),
    );
}

#[test]
fn criterion_10_schedule_balance() {
    let grid = ConditionGrid::default();
    let sched = build_schedule(&grid, 8, 10).unwrap();
    let mut balanced = true;
    for s in 0..8 {
        let mine: Vec<_> = sched.entries.iter().filter(|e| e.subject == s).collect();
        let mut counts: BTreeMap<(i64, bool), u32> = BTreeMap::new();
        for e in &mine {
            *counts.entry((e.roll_deg as i64, e.correction)).or_default() += 1;
        }
        balanced &= mine.len() == 48 && counts.len() == 16 && counts.values().all(|&c| c == 3);
    }
    let mut carryover = true;
    for n in (2..=16).step_by(2) {
        let rows = williams_square(n);
        let mut pairs: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for r in &rows {
            for w in r.windows(2) {
                *pairs.entry((w[0], w[1])).or_default() += 1;
            }
        }
        carryover &= pairs.len() == n * (n - 1) && pairs.values().all(|&c| c == 1);
    }
    report(
        10,
        balanced && carryover,
        format!("8 subjects x 48 trials, every cell 3 times: {balanced}; even Williams squares 2..16 carryover-balanced: {carryover}"),
    );
}

#[test]
fn criterion_11_log_round_trip_and_served_determinism() {
    // every log the scripted operators generate over the paper grid
    let mut round_trips = 0;
    let mut total = 0;
    for (r, p, y) in paper_configs() {
        for correction in [false, true] {
            let cfg = SimConfig::paper(r, p, y, correction).unwrap();
            for policy in [OperatorPolicy::naive(), OperatorPolicy::adaptive()] {
                let log = run_scripted(&cfg, &policy, 600).unwrap().log;
                let text = trial_log_to_string(&log);
                let back = parse_trial_log(&text).unwrap();
                round_trips += (back == log && trial_log_to_string(&back) == text) as usize;
                total += 1;
            }
        }
    }

    // a lockstep TCP session driven by a naive-P client, recorded as a transcript
    let dir = tempfile::tempdir().unwrap();
    let mut engine = EngineConfig::new(SimConfig::default());
    engine.log_dir = Some(dir.path().to_path_buf());
    let options = ServerOptions {
        clock: ClockMode::Lockstep,
        ..ServerOptions::default()
    };
    let server = Server::bind("127.0.0.1:0", engine.clone(), options).unwrap();
    let addr = server.local_addr().unwrap();
    let stop = std::sync::Arc::new(std::sync::atomic::AtomicBool::new(false));
    let flag = stop.clone();
    let handle = std::thread::spawn(move || server.run(flag).unwrap());

    let cfg = SimConfig::paper(0.0, 0.0, 0.0, false).unwrap();
    let mut client = WireClient::connect(addr).unwrap();
    client.recv().unwrap();
    let start = ClientMessage::StartTrial {
        condition: Some(TrialCondition {
            roll_deg: 0.0,
            pitch_deg: 0.0,
            yaw_deg: 0.0,
            correction: false,
        }),
    };
    let mut transcript = vec![SessionEvent::Message {
        message: start.clone(),
    }];
    client.send(&start).unwrap();
    let mut seq = 0;
    let served_path = loop {
        match client.recv().unwrap() {
            ServerMessage::StateFrame { view, .. } => {
                seq += 1;
                let msg = ClientMessage::Input {
                    seq,
                    axes: naive_command(&view, 0.8, 1.0, &cfg.intrinsics),
                };
                transcript.push(SessionEvent::Message {
                    message: msg.clone(),
                });
                client.send(&msg).unwrap();
            }
            ServerMessage::TrialEnd { log_file, .. } => break log_file.unwrap(),
            other => panic!("unexpected {other:?}"),
        }
    };
    stop.store(true, std::sync::atomic::Ordering::SeqCst);
    handle.join().unwrap();

    let served = trial_log_to_string(&read_trial_log(&served_path).unwrap());
    let served_bytes = std::fs::read_to_string(&served_path).unwrap();
    let headless = trial_log_to_string(
        &run_scripted(&cfg, &OperatorPolicy::naive(), BUDGET)
            .unwrap()
            .log,
    );
    let mut replay_cfg = engine;
    replay_cfg.log_dir = None;
    replay_cfg.lockstep = true;
    let (_, replayed) = replay_transcript(replay_cfg, &transcript).unwrap();
    let replayed = trial_log_to_string(&replayed[0]);
    let outcome_ok = served.contains("\"outcome\":\"success\"");
    report(
        11,
        round_trips == total && served_bytes == headless && replayed == headless && outcome_ok,
        format!(
            "{round_trips}/{total} logs round-trip exactly; served log == headless: {}; transcript replay == headless: {}",
            served_bytes == headless,
            replayed == headless
        ),
    );
}
