//! Acceptance suite: one test per release gate, each printing a PASS line
//! with the checked tolerance. Everything here runs on a laptop in
//! minutes; no GPU, no external data.

use approx::assert_relative_eq;
use ndarray::{Array1, Array2, Array4};
use pianobench_core::dataset::{save_clip, ClipAnnotation};
use pianobench_core::diffusion::{
    build_schedule, ddpm_sample, default_schedule, q_sample, v_convert, x0_from_v, Conditioning,
    NoiseSchedule, OracleDenoiser, ScheduleKind, ZeroDenoiser,
};
use pianobench_core::eval::{evaluate_pairs, EvalConfig, EvalPair, MetricSelection};
use pianobench_core::hand::{
    euler_to_matrix, forward_kinematics, HandPose, HandShape, HandTemplate, Side,
    ARTICULATED_JOINTS,
};
use pianobench_core::metrics::{fit_gmm, frechet_distance, gmm_w2, GaussianStats, GmmModel};
use pianobench_core::midi::{
    diff_transcription, parse_smf, serialize_smf, to_note_events, EventKind, MidiFile, NoteEvent,
    TrackEvent,
};
use pianobench_core::motion::{HandMotion, MotionSequence};
use pianobench_core::pipeline::{
    classify_states, hampel_filter, savgol_smooth, segment_clips, FrameState, SavgolKernel,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use std::process::Command;

// ---------------------------------------------------------------------
// shared fixture helpers
// ---------------------------------------------------------------------

fn random_hand(rng: &mut StdRng, frames: usize, joints: usize) -> HandMotion<f64> {
    let mut hand = HandMotion::new_invisible(frames, joints);
    let phase: f64 = rng.random_range(0.0..6.28);
    for n in 0..frames {
        hand.visible[n] = true;
        for j in 0..joints {
            for k in 0..3 {
                hand.theta[[n, j, k]] = 0.4 * ((0.11 * n as f64) + phase + (j * 3 + k) as f64).sin()
                    + rng.random_range(-0.05..0.05);
            }
        }
        for k in 0..3 {
            hand.trans[[n, k]] = 0.01 * n as f64 * (k as f64 + 1.0)
                + 0.1 * ((0.07 * n as f64) + phase).sin()
                + rng.random_range(-0.002..0.002);
        }
    }
    hand
}

fn random_sequence(rng: &mut StdRng, frames: usize, joints: usize) -> MotionSequence<f64> {
    MotionSequence {
        fps: 30.0,
        left: random_hand(rng, frames, joints),
        right: random_hand(rng, frames, joints),
    }
}

// ---------------------------------------------------------------------
// 1. metric identity suite
// ---------------------------------------------------------------------

#[test]
fn acceptance_1_metric_identity_suite() {
    let template = HandTemplate::neutral();
    let config = EvalConfig {
        seed: 42,
        gmm_components: 2,
        latent_dim: 3,
        eval_window_s: 1.0,
        expected_fps: Some(30.0),
        metrics: MetricSelection::default(),
        jobs: Some(2),
    };
    for set in 0..20 {
        let mut rng = StdRng::seed_from_u64(1000 + set);
        let pairs: Vec<EvalPair<f64>> = (0..5)
            .map(|i| {
                let seq = random_sequence(&mut rng, 36, ARTICULATED_JOINTS);
                EvalPair {
                    clip_id: format!("clip_{i}"),
                    pred: seq.clone(),
                    gt: seq,
                }
            })
            .collect();
        let report = evaluate_pairs(pairs, &config, &template, None).unwrap();
        let values = [
            ("fid", report.fid.unwrap()),
            ("fgd left", report.left.fgd.unwrap()),
            ("fgd right", report.right.fgd.unwrap()),
            ("wgd left", report.left.wgd.unwrap()),
            ("wgd right", report.right.wgd.unwrap()),
            ("pd left", report.left.pd.unwrap()),
            ("pd right", report.right.pd.unwrap()),
            ("smooth left", report.left.smoothness.unwrap()),
            ("smooth right", report.right.smoothness.unwrap()),
        ];
        for (name, v) in values {
            assert!(
                v.abs() <= 1e-6,
                "set {set}: {name} = {v} exceeds 1e-6 on identical inputs"
            );
        }
    }
    println!("acceptance 1: PASS — self-evaluation of 20 random clip sets ≤ 1e-6 on all metrics");
}

// ---------------------------------------------------------------------
// 2. Fréchet analytic checks
// ---------------------------------------------------------------------

#[test]
fn acceptance_2_frechet_analytic_checks() {
    // N(μ1, I) vs N(μ2, I) = ‖μ1 − μ2‖².
    let mut rng = StdRng::seed_from_u64(2);
    for _ in 0..10 {
        let d = 6;
        let mu1 = Array1::from_iter((0..d).map(|_| rng.random_range(-3.0..3.0)));
        let mu2 = Array1::from_iter((0..d).map(|_| rng.random_range(-3.0..3.0)));
        let want: f64 = mu1
            .iter()
            .zip(mu2.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let a = GaussianStats::new(mu1, Array2::eye(d)).unwrap();
        let b = GaussianStats::new(mu2, Array2::eye(d)).unwrap();
        let got = frechet_distance(&a, &b).unwrap();
        assert!(
            (got - want).abs() <= 1e-8,
            "mean-shift case: {got} vs {want}"
        );
    }

    // N(0, 4·I_8) vs N(0, I_8) = 8.
    let a = GaussianStats::new(Array1::zeros(8), Array2::eye(8) * 4.0).unwrap();
    let b = GaussianStats::new(Array1::zeros(8), Array2::eye(8)).unwrap();
    let got: f64 = frechet_distance(&a, &b).unwrap();
    assert!((got - 8.0).abs() <= 1e-6, "scaled-identity case: {got}");

    // Runtime with 10k samples per side at d = 64.
    let d = 64;
    let n = 10_000;
    let mut xs = Array2::<f64>::zeros((n, d));
    let mut ys = Array2::<f64>::zeros((n, d));
    for v in xs.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    for v in ys.iter_mut() {
        *v = rng.random_range(-1.0..1.5);
    }
    let start = std::time::Instant::now();
    let sa = GaussianStats::from_samples(&xs.view(), 0.0).unwrap();
    let sb = GaussianStats::from_samples(&ys.view(), 0.0).unwrap();
    let value = frechet_distance(&sa, &sb).unwrap();
    let elapsed = start.elapsed();
    assert!(value.is_finite() && value >= 0.0);
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "frechet at d=64 with 10k samples took {elapsed:?}"
    );
    println!(
        "acceptance 2: PASS — analytic values to 1e-8/1e-6, 10k×64 runtime {:.0} ms < 1 s",
        elapsed.as_secs_f64() * 1e3
    );
}

// ---------------------------------------------------------------------
// 3. WGD reductions
// ---------------------------------------------------------------------

fn gaussian_w2_closed_form_1d(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    ((m1 - m2).powi(2) + (s1 - s2).powi(2)).sqrt()
}

#[test]
fn acceptance_3_wgd_reductions() {
    // K = 1 mixtures reproduce the closed-form Gaussian W2.
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..10 {
        let (m1, s1) = (rng.random_range(-2.0..2.0), rng.random_range(0.5..2.0));
        let (m2, s2) = (rng.random_range(-2.0..2.0), rng.random_range(0.5..2.0));
        let draw = |rng: &mut StdRng, m: f64, s: f64| -> Array2<f64> {
            let mut xs = Array2::<f64>::zeros((4000, 1));
            for v in xs.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = m + s * z;
            }
            xs
        };
        let xs = draw(&mut rng, m1, s1);
        let ys = draw(&mut rng, m2, s2);
        let fit_x = fit_gmm(&xs.view(), 1, 42).unwrap().model;
        let fit_y = fit_gmm(&ys.view(), 1, 42).unwrap().model;
        let got = gmm_w2(&fit_x, &fit_y).unwrap();
        // Closed form on the *fitted* moments, so sampling error cancels.
        let want = gaussian_w2_closed_form_1d(
            fit_x.components[0].mean[0],
            fit_x.components[0].cov[[0, 0]].sqrt(),
            fit_y.components[0].mean[0],
            fit_y.components[0].cov[[0, 0]].sqrt(),
        );
        assert!(
            (got - want).abs() <= 1e-5,
            "K=1 closed form: {got} vs {want}"
        );
    }

    // EM log-likelihood non-decreasing on 50 seeded runs.
    for seed in 0..50u64 {
        let mut rng = StdRng::seed_from_u64(300 + seed);
        let mut xs = Array2::<f64>::zeros((120, 2));
        for i in 0..60 {
            for k in 0..2 {
                let z: f64 = StandardNormal.sample(&mut rng);
                xs[[i, k]] = -4.0 + z;
            }
        }
        for i in 60..120 {
            for k in 0..2 {
                let z: f64 = StandardNormal.sample(&mut rng);
                xs[[i, k]] = 4.0 + z;
            }
        }
        let fit = fit_gmm(&xs.view(), 2, seed).unwrap();
        for pair in fit.log_likelihoods.windows(2) {
            assert!(
                pair[1] + 1e-9 >= pair[0],
                "seed {seed}: log-likelihood fell {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    // Symmetry and triangle inequality on random 1-D mixtures.
    let mixture = |rng: &mut StdRng| -> GmmModel<f64> {
        let w = rng.random_range(0.15..0.85);
        let comp = |rng: &mut StdRng| GaussianStats {
            mean: Array1::from(vec![rng.random_range(-5.0..5.0)]),
            cov: Array2::from_elem((1, 1), rng.random_range(0.2..3.0)),
        };
        GmmModel {
            weights: vec![w, 1.0 - w],
            components: vec![comp(rng), comp(rng)],
        }
    };
    let mut rng = StdRng::seed_from_u64(33);
    for trial in 0..100 {
        let a = mixture(&mut rng);
        let b = mixture(&mut rng);
        let c = mixture(&mut rng);
        let ab = gmm_w2(&a, &b).unwrap();
        let ba = gmm_w2(&b, &a).unwrap();
        assert!((ab - ba).abs() <= 1e-10, "trial {trial}: asymmetry {ab} vs {ba}");
        let bc = gmm_w2(&b, &c).unwrap();
        let ac = gmm_w2(&a, &c).unwrap();
        assert!(
            ac <= ab + bc + 1e-8,
            "trial {trial}: triangle violated {ac} > {ab} + {bc}"
        );
    }
    println!("acceptance 3: PASS — K=1 closed form to 1e-5, EM monotone on 50 runs, symmetry 1e-10, triangle 1e-8 on 100 triples");
}

// ---------------------------------------------------------------------
// 4. pipeline filters
// ---------------------------------------------------------------------

#[test]
fn acceptance_4_pipeline_filters() {
    // Savitzky-Golay reproduces cubics and its kernel sums to 1.
    let series: Vec<f64> = (0..90)
        .map(|i| {
            let t = i as f64 * 0.07 - 2.5;
            1.4 - 0.8 * t + 0.31 * t * t - 0.05 * t * t * t
        })
        .collect();
    let smoothed = savgol_smooth(&series, 3, 11).unwrap();
    for (got, want) in smoothed.iter().zip(&series) {
        assert!(
            (got - want).abs() <= 1e-9,
            "cubic not reproduced: {got} vs {want}"
        );
    }
    let kernel = SavgolKernel::<f64>::new(3, 11).unwrap();
    let sum: f64 = kernel.central_weights().iter().sum();
    assert!((sum - 1.0).abs() <= 1e-12, "kernel sum {sum}");

    // Hampel flags exactly the injected spikes on 100 seeded fixtures.
    for seed in 0..100u64 {
        let mut rng = StdRng::seed_from_u64(4000 + seed);
        let n = 160;
        let mut series: Vec<f64> =
            (0..n).map(|i| (0.05 * i as f64).sin() * 2.0 + 0.01 * i as f64).collect();
        let spike_count = rng.random_range(1..4usize);
        let mut spikes: Vec<usize> = Vec::new();
        while spikes.len() < spike_count {
            let pos = rng.random_range(0..n);
            if spikes.iter().all(|&s: &usize| s.abs_diff(pos) > 25) {
                spikes.push(pos);
            }
        }
        for &s in &spikes {
            series[s] += if s % 2 == 0 { 1e4 } else { -1e4 };
        }
        let flags = hampel_filter(&series, 20, 3.0);
        let flagged: Vec<usize> = (0..n).filter(|&i| flags[i]).collect();
        spikes.sort();
        assert_eq!(flagged, spikes, "seed {seed}: flags disagree with injected spikes");
    }

    // Gap rules match a brute-force labeler on 1000 random masks, and the
    // output never contains a live run under 15 frames or a filled gap of
    // 30 frames or more.
    for seed in 0..1000u64 {
        let mut rng = StdRng::seed_from_u64(9000 + seed);
        let n = rng.random_range(1..160usize);
        let density = rng.random_range(0.2..0.95);
        let present: Vec<bool> = (0..n).map(|_| rng.random_bool(density)).collect();
        let got = classify_states(&present, 30, 15);
        let want = brute_force_states(&present, 30, 15);
        assert_eq!(got, want, "seed {seed}: states disagree for mask {present:?}");

        let mut i = 0;
        while i < n {
            if got[i] == FrameState::Invisible {
                i += 1;
                continue;
            }
            let start = i;
            let mut filled_run = 0usize;
            let mut max_filled = 0usize;
            while i < n && got[i] != FrameState::Invisible {
                if got[i] == FrameState::Filled {
                    filled_run += 1;
                    max_filled = max_filled.max(filled_run);
                } else {
                    filled_run = 0;
                }
                i += 1;
            }
            assert!(i - start >= 15, "seed {seed}: live run of {} frames", i - start);
            assert!(max_filled < 30, "seed {seed}: filled gap of {max_filled} frames");
        }
    }
    println!("acceptance 4: PASS — savgol cubic 1e-9 / kernel 1e-12, hampel exact on 100 fixtures, gap rules match reference on 1000 masks");
}

/// Independent per-frame reference for the gap rules: fill interior
/// missing runs shorter than 30, everything else invisible, then drop
/// visible-or-filled islands shorter than 15.
fn brute_force_states(present: &[bool], fill_max: usize, min_run: usize) -> Vec<FrameState> {
    let n = present.len();
    let mut filled = vec![false; n];
    for i in 0..n {
        if present[i] {
            continue;
        }
        // Scan to the run boundaries.
        let mut lo = i;
        while lo > 0 && !present[lo - 1] {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < n && !present[hi + 1] {
            hi += 1;
        }
        let interior = lo > 0 && hi + 1 < n;
        if interior && hi - lo + 1 < fill_max {
            filled[i] = true;
        }
    }
    let alive: Vec<bool> = (0..n).map(|i| present[i] || filled[i]).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if !alive[i] {
            out.push(FrameState::Invisible);
            continue;
        }
        let mut lo = i;
        while lo > 0 && alive[lo - 1] {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < n && alive[hi + 1] {
            hi += 1;
        }
        if hi - lo + 1 < min_run {
            out.push(FrameState::Invisible);
        } else if present[i] {
            out.push(FrameState::Visible);
        } else {
            out.push(FrameState::Filled);
        }
    }
    out
}

// ---------------------------------------------------------------------
// 5. segmentation
// ---------------------------------------------------------------------

#[test]
fn acceptance_5_segmentation() {
    let fully_visible = |secs: usize| -> MotionSequence<f64> {
        let frames = secs * 30;
        let mut hand = HandMotion::new_invisible(frames, 2);
        for v in hand.visible.iter_mut() {
            *v = true;
        }
        MotionSequence {
            fps: 30.0,
            left: hand.clone(),
            right: hand,
        }
    };
    for secs in 0..=200usize {
        let seq = fully_visible(secs);
        let got: Vec<usize> = segment_clips(&seq, 30.0, 24.0, 0.8)
            .iter()
            .map(|c| c.start_frame)
            .collect();
        // Brute force: every 24 s offset whose 30 s window fits.
        let mut want = Vec::new();
        let mut offset = 0usize;
        while offset * 30 + 900 <= secs * 30 {
            want.push(offset * 30);
            offset += 24;
        }
        assert_eq!(got, want, "duration {secs}s");
    }
    let offsets: Vec<f64> = segment_clips(&fully_visible(78), 30.0, 24.0, 0.8)
        .iter()
        .map(|c| c.offset_s)
        .collect();
    assert_eq!(offsets, vec![0.0, 24.0, 48.0]);
    println!("acceptance 5: PASS — segmentation matches brute force for 0–200 s; 78 s gives offsets {{0, 24, 48}}");
}

// ---------------------------------------------------------------------
// 6. diffusion
// ---------------------------------------------------------------------

#[test]
fn acceptance_6_diffusion() {
    // Terminal ᾱ of the default schedule against the frozen
    // high-precision product.
    let sched: NoiseSchedule<f64> = default_schedule();
    let terminal = sched.alpha_bar(1000).unwrap();
    let frozen = 4.0358297653756833e-5;
    assert!(
        ((terminal - frozen) / frozen).abs() < 1e-7,
        "terminal alpha-bar {terminal}"
    );

    // Monte Carlo moments of the forward process at 10k draws.
    let t = 350;
    let ab = sched.alpha_bar(t).unwrap();
    let x0 = Array4::from_elem((1, 2, 1, 3), -0.4f64);
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let draws = 10_000;
    let count = (draws * x0.len()) as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let noise = Array4::from_shape_fn((1, 2, 1, 3), |_| StandardNormal.sample(&mut rng));
        let xt = q_sample(&x0, t, &noise, &sched).unwrap();
        for &v in xt.iter() {
            sum += v;
            sum_sq += v * v;
        }
    }
    let mean = sum / count;
    let var = sum_sq / count - mean * mean;
    let want_mean = ab.sqrt() * -0.4;
    let want_var = 1.0 - ab;
    let mean_tol = 3.0 * want_var.sqrt() / count.sqrt();
    let var_tol = 3.0 * want_var * (2.0 / (count - 1.0)).sqrt();
    assert!((mean - want_mean).abs() < mean_tol, "mean {mean} vs {want_mean}");
    assert!((var - want_var).abs() < var_tol, "variance {var} vs {want_var}");

    // v round trip exact to 1e-12.
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for &t in &[1usize, 11, 500, 1000] {
        let x0 = Array4::from_shape_fn((2, 2, 3, 3), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let eps = Array4::from_shape_fn((2, 2, 3, 3), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let v = v_convert(&x0, &eps, t, &sched).unwrap();
        let xt = q_sample(&x0, t, &eps, &sched).unwrap();
        let back = x0_from_v(&v, &xt, t, &sched).unwrap();
        for (a, b) in back.iter().zip(x0.iter()) {
            assert!((a - b).abs() <= 1e-12, "v roundtrip at t={t}: {a} vs {b}");
        }
    }

    // Oracle-denoiser sampling recovers x0.
    let x0 = Array4::from_shape_fn((6, 2, 4, 3), |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        0.5 * z
    });
    let cond = Conditioning::zeros(6, 4);
    let out = ddpm_sample(
        &OracleDenoiser { x0: x0.clone() },
        &sched,
        &cond,
        1000,
        42,
        6,
        4,
    )
    .unwrap();
    let mut mse = 0.0;
    for (a, b) in out.iter().zip(x0.iter()) {
        mse += (a - b) * (a - b);
    }
    let rmse = (mse / out.len() as f64).sqrt();
    assert!(rmse <= 1e-3, "oracle sampling rmse {rmse}");

    // Strided sampling runs across the ablation step grid.
    for &steps in &[5usize, 10, 100, 300, 1000] {
        let out = ddpm_sample::<f64>(&ZeroDenoiser, &sched, &cond, steps, 9, 6, 4).unwrap();
        assert_eq!(out.dim(), (6, 2, 4, 3));
        assert!(out.iter().all(|v| v.is_finite()), "steps {steps}");
    }

    // Strided sub-schedule with steps = T is the full schedule.
    let small = build_schedule::<f64>(64, 1e-4, 0.02, ScheduleKind::Linear).unwrap();
    let cond_small = Conditioning::zeros(2, 4);
    let a = ddpm_sample::<f64>(&ZeroDenoiser, &small, &cond_small, 64, 3, 2, 2).unwrap();
    let b = ddpm_sample::<f64>(&ZeroDenoiser, &small, &cond_small, 64, 3, 2, 2).unwrap();
    assert_eq!(a, b);
    println!("acceptance 6: PASS — ᾱ_T to 1e-7 relative, q_sample moments within 3σ, v roundtrip 1e-12, oracle RMSE ≤ 1e-3, step grid {{5,10,100,300,1000}} runs");
}

// ---------------------------------------------------------------------
// 7. MIDI round trip and thresholds
// ---------------------------------------------------------------------

#[test]
fn acceptance_7_midi() {
    // parse→serialize→parse preserves note events on 50 generated files.
    for seed in 0..50u64 {
        let mut rng = StdRng::seed_from_u64(70_000 + seed);
        let division = *[96u16, 240, 480, 960].get(rng.random_range(0..4)).unwrap();
        let note_count = rng.random_range(1..40usize);
        let mut events: Vec<(u64, EventKind)> = Vec::new();
        let mut cursor = 0u64;
        for _ in 0..note_count {
            cursor += rng.random_range(1..400u64);
            let pitch = rng.random_range(21..109u8);
            let velocity = rng.random_range(1..128u8);
            let dur = rng.random_range(1..600u64);
            events.push((
                cursor,
                EventKind::NoteOn {
                    channel: 0,
                    pitch,
                    velocity,
                },
            ));
            events.push((
                cursor + dur,
                EventKind::NoteOff {
                    channel: 0,
                    pitch,
                    velocity: 0,
                },
            ));
        }
        if rng.random_bool(0.5) {
            events.push((0, EventKind::set_tempo(rng.random_range(200_000..900_000))));
        }
        events.sort_by_key(|e| e.0);
        let mut track = Vec::new();
        let mut prev = 0u64;
        for (tick, kind) in events {
            track.push(TrackEvent {
                delta: (tick - prev) as u32,
                kind,
            });
            prev = tick;
        }
        track.push(TrackEvent {
            delta: 10,
            kind: EventKind::end_of_track(),
        });
        let file = MidiFile {
            format: 0,
            division,
            tracks: vec![track],
        };

        let first = parse_smf(&serialize_smf(&file)).unwrap();
        let second = parse_smf(&serialize_smf(&first)).unwrap();
        assert_eq!(first, second, "seed {seed}: reparse changed the file");
        let notes_a = to_note_events::<f64>(&first).unwrap().notes;
        let notes_b = to_note_events::<f64>(&second).unwrap().notes;
        assert_eq!(notes_a, notes_b, "seed {seed}: note events changed");
        assert!(!notes_a.is_empty());
        // Sanity on the extraction invariants while the fixtures exist.
        for w in notes_a.windows(2) {
            assert!(w[0].onset <= w[1].onset);
        }
        for n in &notes_a {
            assert!(n.offset > n.onset);
        }
    }

    // Threshold boundaries: exactly 30 ms is clean, 30.001 ms violates.
    let reference = vec![NoteEvent::<f64> {
        pitch: 60,
        velocity: 100,
        onset: 0.0,
        offset: 0.5,
        channel: 0,
    }];
    let mut candidate = reference.clone();
    candidate[0].onset = 0.030;
    let diff = diff_transcription(&candidate, &reference, 30.0, 0.10);
    assert_eq!(diff.timing_violations, 0, "exactly 30 ms must not violate");
    candidate[0].onset = 0.030001;
    let diff = diff_transcription(&candidate, &reference, 30.0, 0.10);
    assert_eq!(diff.timing_violations, 1, "30.001 ms must violate");
    // Dynamic threshold boundary: 10% is clean, 12% violates.
    candidate[0].onset = 0.0;
    candidate[0].velocity = 110;
    let diff = diff_transcription(&candidate, &reference, 30.0, 0.10);
    assert_eq!(diff.dynamic_violations, 0, "exactly 10% must not violate");
    candidate[0].velocity = 112;
    let diff = diff_transcription(&candidate, &reference, 30.0, 0.10);
    assert_eq!(diff.dynamic_violations, 1, "12% must violate");
    println!("acceptance 7: PASS — round trip preserves notes on 50 generated files; 30 ms / 10% boundaries exclusive");
}

// ---------------------------------------------------------------------
// 8. hand model
// ---------------------------------------------------------------------

#[test]
fn acceptance_8_hand_model() {
    let template = HandTemplate::<f64>::neutral();
    let shape = HandShape::default();
    let mut rng = StdRng::seed_from_u64(8);

    let random_pose = |rng: &mut StdRng, side: Side| -> HandPose<f64> {
        let mut theta = Array2::zeros((ARTICULATED_JOINTS, 3));
        for v in theta.iter_mut() {
            *v = rng.random_range(-1.3..1.3);
        }
        HandPose {
            theta,
            trans: [
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            ],
            side,
        }
    };

    // Bone lengths preserved to 1e-9 over 1000 random poses (both sides).
    for i in 0..1000 {
        let side = if i % 2 == 0 { Side::Right } else { Side::Left };
        let pose = random_pose(&mut rng, side);
        let joints = forward_kinematics(&pose, &shape, &template).unwrap();
        for j in 1..template.joints() {
            let p = template.parent[j];
            let mut d2 = 0.0;
            for k in 0..3 {
                let d = joints.positions[[j, k]] - joints.positions[[p, k]];
                d2 += d * d;
            }
            let off = template.offsets[j];
            let want = (off[0] * off[0] + off[1] * off[1] + off[2] * off[2]).sqrt();
            assert!(
                (d2.sqrt() - want).abs() <= 1e-9,
                "pose {i}: bone {j} length {} vs {want}",
                d2.sqrt()
            );
        }
    }

    // FK matches the independent recursive oracle to 1e-12.
    for _ in 0..100 {
        let pose = random_pose(&mut rng, Side::Right);
        let fast = forward_kinematics(&pose, &shape, &template).unwrap();
        let slow = recursive_fk_oracle(&pose, &shape, &template);
        for j in 0..template.output_joints() {
            for k in 0..3 {
                assert_relative_eq!(
                    fast.positions[[j, k]],
                    slow[[j, k]],
                    epsilon = 1e-12,
                    max_relative = 1e-12
                );
            }
        }
    }

    // Translation equivariance is exact: FK(t) is bitwise FK(0) + t.
    for _ in 0..50 {
        let mut pose = random_pose(&mut rng, Side::Right);
        let t = pose.trans;
        pose.trans = [0.0; 3];
        let base = forward_kinematics(&pose, &shape, &template).unwrap();
        pose.trans = t;
        let moved = forward_kinematics(&pose, &shape, &template).unwrap();
        for j in 0..template.output_joints() {
            for k in 0..3 {
                assert_eq!(moved.positions[[j, k]], base.positions[[j, k]] + t[k]);
            }
        }
    }
    println!("acceptance 8: PASS — bone lengths 1e-9 over 1000 poses, FK vs recursive oracle 1e-12, translation equivariance exact");
}

/// Per-joint matrix-chain FK, rebuilt from the root for every joint.
fn recursive_fk_oracle(
    pose: &HandPose<f64>,
    shape: &HandShape<f64>,
    template: &HandTemplate<f64>,
) -> Array2<f64> {
    let offsets = template.shaped_offsets(shape);
    let joints = template.joints();
    let rot = |j: usize| euler_to_matrix([pose.theta[[j, 0]], pose.theta[[j, 1]], pose.theta[[j, 2]]]);
    let mat_mul = |a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]| {
        let mut out = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    };
    let mat_vec = |a: &[[f64; 3]; 3], v: &[f64; 3]| {
        let mut out = [0.0f64; 3];
        for i in 0..3 {
            for k in 0..3 {
                out[i] += a[i][k] * v[k];
            }
        }
        out
    };
    let chain = |j: usize| {
        let mut path = vec![j];
        let mut cur = j;
        while cur != 0 {
            cur = template.parent[cur];
            path.push(cur);
        }
        path.reverse();
        path
    };
    let world_rot = |j: usize| {
        let mut r = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for &a in &chain(j) {
            r = mat_mul(&r, &rot(a));
        }
        r
    };
    let mut out = Array2::<f64>::zeros((template.output_joints(), 3));
    for j in 0..joints {
        let mut pos = pose.trans;
        for &a in chain(j).iter().skip(1) {
            let step = mat_vec(&world_rot(template.parent[a]), &offsets[a]);
            for k in 0..3 {
                pos[k] += step[k];
            }
        }
        for k in 0..3 {
            out[[j, k]] = pos[k];
        }
    }
    for (i, (&tp, off)) in template
        .tip_parent
        .iter()
        .zip(&template.tip_offsets)
        .enumerate()
    {
        let step = mat_vec(&world_rot(tp), off);
        for k in 0..3 {
            out[[joints + i, k]] = out[[tp, k]] + step[k];
        }
    }
    out
}

// ---------------------------------------------------------------------
// 9. end-to-end determinism through the CLI
// ---------------------------------------------------------------------

#[test]
fn acceptance_9_end_to_end_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let pred_dir = dir.path().join("pred");
    let gt_dir = dir.path().join("gt");
    std::fs::create_dir_all(&pred_dir).unwrap();
    std::fs::create_dir_all(&gt_dir).unwrap();

    let mut rng = StdRng::seed_from_u64(99);
    for (i, video) in ["vidA", "vidB", "vidC"].iter().enumerate() {
        let seq = random_sequence(&mut rng, 60, ARTICULATED_JOINTS);
        let clip = ClipAnnotation::from_motion(
            format!("{video}_0"),
            video.to_string(),
            format!("subject{i}"),
            [0.0; 10],
            &seq,
        );
        save_clip(&clip, &gt_dir.join(format!("{video}_0.json"))).unwrap();
        save_clip(&clip, &pred_dir.join(format!("{video}_0.json"))).unwrap();
    }

    let run = |report: &std::path::Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_pianobench"))
            .args([
                "eval",
                "--pred",
                pred_dir.to_str().unwrap(),
                "--gt",
                gt_dir.to_str().unwrap(),
                "--gmm-components",
                "2",
                "--latent-dim",
                "2",
                "--jobs",
                "2",
                "--report",
                report.to_str().unwrap(),
            ])
            .status()
            .expect("binary runs");
        assert!(status.success(), "eval exited with {status}");
    };
    let report_a = dir.path().join("a.json");
    let report_b = dir.path().join("b.json");
    run(&report_a);
    run(&report_b);

    let bytes_a = std::fs::read(&report_a).unwrap();
    let bytes_b = std::fs::read(&report_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "two invocations differ");

    let report: serde_json::Value = serde_json::from_slice(&bytes_a).unwrap();
    assert!(report["fid"].as_f64().unwrap().abs() <= 1e-6);
    for hand in ["left", "right"] {
        for metric in ["fgd", "wgd", "pd", "smoothness"] {
            let v = report[hand][metric].as_f64().unwrap();
            assert!(v.abs() <= 1e-6, "{hand}.{metric} = {v}");
        }
    }
    println!("acceptance 9: PASS — CLI eval byte-identical across runs; pred==gt report is all zeros");
}
