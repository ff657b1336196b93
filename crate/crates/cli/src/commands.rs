//! Subcommand implementations. Every command is a pure function of its
//! inputs and flags; outputs are written atomically at the end.

use crate::error::CliError;
use ndarray::{Array2, Array3};
use pianobench_core::dataset::{
    build_manifest, clip_id, load_clip, load_track, save_clip, save_track, subject_stats,
    ClipAnnotation, SplitSpec,
};
use pianobench_core::diffusion::{
    build_schedule, ddpm_sample, load_tensor, Conditioning, Denoiser, OracleDenoiser,
    ScheduleKind, ZeroDenoiser,
};
use pianobench_core::eval::{
    evaluate_directories, report_to_csv, report_to_json, EvalConfig, MetricSelection,
};
use pianobench_core::hand::{forward_kinematics, HandShape, HandTemplate, Side};
use pianobench_core::metrics::Embedder;
use pianobench_core::midi::{diff_transcription, histograms, parse_smf, to_note_events};
use pianobench_core::pipeline::{clean_track, segment_clips, CleanParams, GapLabel};
use serde::Serialize;
use std::path::{Path, PathBuf};

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}

pub fn midi_stats(
    input: &Path,
    bin_width: u8,
    json: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    if bin_width == 0 || 128 % u32::from(bin_width) != 0 {
        return Err(CliError::Schema(format!(
            "velocity bin width {bin_width} must divide 128"
        )));
    }
    let bytes = std::fs::read(input)?;
    let file = parse_smf(&bytes)?;
    let extraction = to_note_events::<f64>(&file)?;
    for warning in &extraction.warnings {
        eprintln!("warning: {warning:?}");
    }
    let hist = histograms(&extraction.notes, bin_width);
    write_or_print(json, &to_pretty_json(&hist))?;
    if let Some(csv_path) = csv {
        let mut text = String::from("kind,index,count\n");
        for (i, c) in hist.pitch_counts.iter().enumerate() {
            text.push_str(&format!("pitch,{i},{c}\n"));
        }
        for (i, c) in hist.velocity_bins.iter().enumerate() {
            text.push_str(&format!("velocity_bin,{i},{c}\n"));
        }
        std::fs::write(csv_path, text)?;
    }
    Ok(())
}

pub fn midi_diff(
    candidate: &Path,
    reference: &Path,
    timing_tol_ms: f64,
    dynamic_tol: f64,
    report: Option<&Path>,
) -> Result<(), CliError> {
    let load = |path: &Path| -> Result<Vec<pianobench_core::NoteEvent64>, CliError> {
        let bytes = std::fs::read(path)?;
        let file = parse_smf(&bytes)?;
        Ok(to_note_events::<f64>(&file)?.notes)
    };
    let cand_notes = load(candidate)?;
    let ref_notes = load(reference)?;
    let diff = diff_transcription(&cand_notes, &ref_notes, timing_tol_ms, dynamic_tol);
    write_or_print(report, &to_pretty_json(&diff))
}

#[derive(Serialize)]
struct GapSidecar {
    fps: f64,
    left: Vec<GapLabel>,
    right: Vec<GapLabel>,
}

pub fn clean(
    input: &Path,
    out: &Path,
    gaps: Option<&Path>,
    fps: f64,
) -> Result<(), CliError> {
    let annotation: ClipAnnotation<f64> = load_track(input)?;
    let raw = annotation.to_raw_track()?;
    let params = CleanParams {
        target_fps: fps,
        ..CleanParams::default()
    };
    let (cleaned, labels) = clean_track(&raw, &params)?;
    let out_annotation = ClipAnnotation::from_motion(
        annotation.clip_id.clone(),
        annotation.video_id.clone(),
        annotation.subject.clone(),
        annotation.rho,
        &cleaned,
    );
    save_track(&out_annotation, out)?;

    let sidecar = GapSidecar {
        fps: raw.fps,
        left: labels[0].clone(),
        right: labels[1].clone(),
    };
    let gaps_path: PathBuf = match gaps {
        Some(p) => p.to_path_buf(),
        None => {
            let mut os = out.as_os_str().to_owned();
            os.push(".gaps.json");
            PathBuf::from(os)
        }
    };
    std::fs::write(&gaps_path, to_pretty_json(&sidecar))?;
    Ok(())
}

pub fn segment(
    input: &Path,
    out_dir: &Path,
    clip_len: f64,
    stride: f64,
    min_visibility: f64,
) -> Result<(), CliError> {
    if clip_len <= 0.0 || stride <= 0.0 || stride > clip_len {
        return Err(CliError::Numeric(format!(
            "need 0 < stride ≤ clip length, got stride {stride}, length {clip_len}"
        )));
    }
    let annotation: ClipAnnotation<f64> = load_track(input)?;
    let motion = annotation.to_motion()?;
    let windows = segment_clips(&motion, clip_len, stride, min_visibility);
    std::fs::create_dir_all(out_dir)?;
    let mut ids = Vec::with_capacity(windows.len());
    for window in &windows {
        let clip_motion = motion.window(window.start_frame, window.frames);
        let id = clip_id(&annotation.video_id, window.offset_s.round() as usize);
        let clip = ClipAnnotation::from_motion(
            id.clone(),
            annotation.video_id.clone(),
            annotation.subject.clone(),
            annotation.rho,
            &clip_motion,
        );
        save_clip(&clip, &out_dir.join(format!("{id}.json")))?;
        ids.push(id);
    }
    println!("wrote {} clips: {}", ids.len(), ids.join(", "));
    Ok(())
}

fn load_split_spec(path: Option<&Path>) -> Result<SplitSpec, CliError> {
    match path {
        None => Ok(SplitSpec::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Schema(format!("{}: {e}", p.display())))
        }
    }
}

pub fn manifest(root: &Path, split_spec: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let spec = load_split_spec(split_spec)?;
    let manifest = build_manifest::<f64>(root, &spec)?;
    manifest.write_split_json(out)?;
    Ok(())
}

pub fn stats(
    root: &Path,
    split_spec: Option<&Path>,
    json: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let spec = load_split_spec(split_spec)?;
    let manifest = build_manifest::<f64>(root, &spec)?;
    let stats = subject_stats(&manifest)?;
    write_or_print(json, &to_pretty_json(&stats))?;
    if let Some(csv_path) = csv {
        let mut text = String::from("subject,videos,clips,seconds,frames\n");
        for row in stats.subjects.iter().chain(std::iter::once(&stats.total)) {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                row.subject, row.videos, row.clips, row.seconds, row.frames
            ));
        }
        std::fs::write(csv_path, text)?;
    }
    Ok(())
}

fn load_template(path: Option<&Path>) -> Result<HandTemplate<f64>, CliError> {
    let template = match path {
        None => HandTemplate::neutral(),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let t: HandTemplate<f64> = serde_json::from_str(&text)
                .map_err(|e| CliError::Schema(format!("{}: {e}", p.display())))?;
            t
        }
    };
    template.validate()?;
    Ok(template)
}

pub struct EvalArgs {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub metrics: String,
    pub gmm_components: usize,
    pub latent_dim: usize,
    pub seed: u64,
    pub fps: f64,
    pub window_s: f64,
    pub jobs: Option<usize>,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub embedder: Option<PathBuf>,
    pub template: Option<PathBuf>,
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let selection = MetricSelection::parse(&args.metrics)?;
    let config = EvalConfig {
        seed: args.seed,
        gmm_components: args.gmm_components,
        latent_dim: args.latent_dim,
        eval_window_s: args.window_s,
        expected_fps: Some(args.fps),
        metrics: selection,
        jobs: args.jobs,
    };
    let template = load_template(args.template.as_deref())?;
    let embedder = match &args.embedder {
        None => None,
        Some(p) => Some(Embedder::<f64>::load(p)?),
    };
    let report = evaluate_directories(
        &args.pred,
        &args.gt,
        &config,
        &template,
        embedder.as_ref(),
    )?;
    write_or_print(args.report.as_deref(), &report_to_json(&report))?;
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, report_to_csv(&report))?;
    }
    Ok(())
}

pub struct SampleArgs {
    pub frames: Option<usize>,
    pub joints: usize,
    pub steps: usize,
    pub seed: u64,
    pub denoiser: String,
    pub oracle_clip: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub positions: Option<PathBuf>,
    pub fps: f64,
    pub video_id: String,
    pub subject: String,
    pub out: PathBuf,
}

pub fn sample(args: SampleArgs) -> Result<(), CliError> {
    let oracle_motion = match &args.oracle_clip {
        Some(p) => Some(load_clip::<f64>(p)?.to_motion()?),
        None => None,
    };
    let frames = match (args.frames, &oracle_motion) {
        (Some(n), _) => n,
        (None, Some(m)) => m.frames(),
        (None, None) => {
            return Err(CliError::Numeric(
                "--frames is required unless --oracle-clip provides a length".into(),
            ))
        }
    };
    let joints = oracle_motion
        .as_ref()
        .map(|m| m.joints())
        .unwrap_or(args.joints);

    let cond = load_conditioning(args.features.as_deref(), args.positions.as_deref(), frames)?;

    let denoiser: Box<dyn Denoiser<f64>> = match args.denoiser.as_str() {
        "zero" => Box::new(ZeroDenoiser),
        "oracle" => {
            let motion = oracle_motion.as_ref().ok_or_else(|| {
                CliError::Numeric("--denoiser oracle requires --oracle-clip".into())
            })?;
            if motion.frames() < frames {
                return Err(CliError::Numeric(format!(
                    "oracle clip has {} frames, need {frames}",
                    motion.frames()
                )));
            }
            let mut x0 = ndarray::Array4::<f64>::zeros((frames, 2, joints, 3));
            for n in 0..frames {
                for (h, hand) in [&motion.left, &motion.right].into_iter().enumerate() {
                    for j in 0..joints {
                        for k in 0..3 {
                            x0[[n, h, j, k]] = hand.theta[[n, j, k]];
                        }
                    }
                }
            }
            Box::new(OracleDenoiser { x0 })
        }
        other => {
            return Err(CliError::Numeric(format!(
                "unknown denoiser `{other}` (expected `zero` or `oracle`)"
            )))
        }
    };

    let schedule = build_schedule::<f64>(1000, 1e-4, 0.02, ScheduleKind::Linear)?;
    let sampled = ddpm_sample(
        denoiser.as_ref(),
        &schedule,
        &cond,
        args.steps,
        args.seed,
        frames,
        joints,
    )?;

    // Write the sampled gestures in the annotation schema, with the
    // guidance positions as root translations.
    let mut left = pianobench_core::motion::HandMotion::new_invisible(frames, joints);
    let mut right = pianobench_core::motion::HandMotion::new_invisible(frames, joints);
    for n in 0..frames {
        for (h, hand) in [&mut left, &mut right].into_iter().enumerate() {
            hand.visible[n] = true;
            for j in 0..joints {
                for k in 0..3 {
                    hand.theta[[n, j, k]] = sampled[[n, h, j, k]];
                }
            }
            for k in 0..3 {
                hand.trans[[n, k]] = cond.positions[[n, h, k]];
            }
        }
    }
    let motion = pianobench_core::motion::MotionSequence {
        fps: args.fps,
        left,
        right,
    };
    let clip = ClipAnnotation::from_motion(
        clip_id(&args.video_id, 0),
        args.video_id.clone(),
        args.subject.clone(),
        [0.0; 10],
        &motion,
    );
    save_track(&clip, &args.out)?;
    Ok(())
}

fn load_conditioning(
    features: Option<&Path>,
    positions: Option<&Path>,
    frames: usize,
) -> Result<Conditioning<f64>, CliError> {
    let gesture_features = match features {
        None => Array2::zeros((frames, 8)),
        Some(p) => {
            let (shape, data) = load_tensor::<f64>(p)?;
            if shape.len() != 2 || shape[0] != frames {
                return Err(CliError::Schema(format!(
                    "{}: feature tensor must be {frames}×C, got {shape:?}",
                    p.display()
                )));
            }
            Array2::from_shape_vec((shape[0], shape[1]), data)
                .map_err(|e| CliError::Schema(e.to_string()))?
        }
    };
    let positions = match positions {
        None => Array3::zeros((frames, 2, 3)),
        Some(p) => {
            let (shape, data) = load_tensor::<f64>(p)?;
            if shape != [frames, 2, 3] {
                return Err(CliError::Schema(format!(
                    "{}: position tensor must be {frames}×2×3, got {shape:?}",
                    p.display()
                )));
            }
            Array3::from_shape_vec((frames, 2, 3), data)
                .map_err(|e| CliError::Schema(e.to_string()))?
        }
    };
    Ok(Conditioning {
        gesture_features,
        positions,
    })
}

#[derive(Serialize)]
struct JointSetJson {
    clip_id: String,
    frame: usize,
    hand: String,
    positions: Vec<[f64; 3]>,
}

pub fn fk(
    clip_path: &Path,
    frame: usize,
    hand: &str,
    template_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let side = match hand {
        "left" => Side::Left,
        "right" => Side::Right,
        other => {
            return Err(CliError::Numeric(format!(
                "unknown hand `{other}` (expected `left` or `right`)"
            )))
        }
    };
    let clip = load_track::<f64>(clip_path)?;
    let motion = clip.to_motion()?;
    if frame >= motion.frames() {
        return Err(CliError::Numeric(format!(
            "frame {frame} out of range (clip has {} frames)",
            motion.frames()
        )));
    }
    let hand_motion = motion.hand(side);
    if !hand_motion.visible[frame] {
        return Err(CliError::Numeric(format!(
            "{hand} hand is invisible at frame {frame}"
        )));
    }
    let template = load_template(template_path)?;
    let pose = hand_motion.pose_at_for(frame, side);
    let mut shape = HandShape::default();
    shape.rho = clip.rho;
    let joints = forward_kinematics(&pose, &shape, &template)?;
    let positions: Vec<[f64; 3]> = joints
        .positions
        .rows()
        .into_iter()
        .map(|r| [r[0], r[1], r[2]])
        .collect();
    let payload = JointSetJson {
        clip_id: clip.clip_id.clone(),
        frame,
        hand: hand.to_string(),
        positions,
    };
    write_or_print(out, &to_pretty_json(&payload))
}
