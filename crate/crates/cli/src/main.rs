//! Command-line front end wiring the toolkit into reproducible batch
//! workflows. One subcommand per pipeline stage, composable via files; no
//! hidden state between stages.
//!
//! Exit codes: 0 ok, 1 i/o failure, 2 input pairing error, 3 schema
//! error, 4 numeric failure.

mod commands;
mod error;

use clap::{Parser, Subcommand};
use commands::*;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pianobench",
    about = "Piano hand-motion dataset engineering and benchmark evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pitch and velocity histograms for a Standard MIDI File.
    MidiStats {
        /// Input .mid file.
        #[arg(long)]
        input: PathBuf,
        /// Velocity bin width (must divide 128).
        #[arg(long, default_value_t = 8)]
        bin_width: u8,
        /// Write the histogram JSON here (stdout when omitted).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also write a CSV rendering.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare a candidate transcription against a reference performance.
    MidiDiff {
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Timing tolerance in milliseconds (exclusive).
        #[arg(long, default_value_t = 30.0)]
        timing_tol_ms: f64,
        /// Dynamic tolerance as a velocity-ratio fraction (exclusive).
        #[arg(long, default_value_t = 0.10)]
        dynamic_tol: f64,
        /// Write the diff report JSON here (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Clean a raw annotation track: outlier removal, gap filling,
    /// smoothing, resampling to the target rate.
    Clean {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Gap-label sidecar JSON path (defaults to `<out>.gaps.json`).
        #[arg(long)]
        gaps: Option<PathBuf>,
        /// Target frame rate after resampling.
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
    },
    /// Segment a cleaned track into benchmark clips.
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        clip_len: f64,
        #[arg(long, default_value_t = 24.0)]
        stride: f64,
        #[arg(long, default_value_t = 0.8)]
        min_visibility: f64,
    },
    /// Build a manifest assigning every clip's source video to a split.
    Manifest {
        #[arg(long)]
        root: PathBuf,
        /// Split spec JSON: {"train": [video ids], "val": [...], "test": [...]}.
        #[arg(long)]
        split_spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-subject dataset statistics.
    Stats {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        split_spec: Option<PathBuf>,
        /// Write the stats JSON here (stdout when omitted).
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate prediction clips against ground truth.
    Eval {
        /// Directory of prediction clip files.
        #[arg(long)]
        pred: PathBuf,
        /// Directory of ground-truth clip files.
        #[arg(long)]
        gt: PathBuf,
        /// Comma-separated metric list.
        #[arg(long, default_value = "fid,fgd,wgd,pd,smooth")]
        metrics: String,
        #[arg(long, default_value_t = 8)]
        gmm_components: usize,
        #[arg(long, default_value_t = 32)]
        latent_dim: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Expected clip frame rate (recorded in the report).
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        /// Evaluation window in seconds (cut to the shortest clip).
        #[arg(long, default_value_t = 8.0)]
        window_s: f64,
        /// Worker threads for per-clip feature extraction.
        #[arg(long)]
        jobs: Option<usize>,
        /// Report JSON path (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the flat CSV rendering.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Load a stored linear embedder instead of fitting PCA on the
        /// ground truth.
        #[arg(long)]
        embedder: Option<PathBuf>,
        /// Hand template JSON (built-in neutral template when omitted).
        #[arg(long)]
        template: Option<PathBuf>,
    },
    /// Run the diffusion sampler demo with a reference denoiser.
    Sample {
        /// Frames to generate (use whole seconds of --fps for clips that
        /// the eval command can load).
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value_t = 16)]
        joints: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Reference denoiser: `zero` or `oracle`.
        #[arg(long, default_value = "zero")]
        denoiser: String,
        /// Clip whose motion the oracle denoiser returns.
        #[arg(long)]
        oracle_clip: Option<PathBuf>,
        /// Gesture-feature tensor file (N×C), zeros when omitted.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Position-guidance tensor file (N×2×3), zeros when omitted.
        #[arg(long)]
        positions: Option<PathBuf>,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long, default_value = "sample")]
        video_id: String,
        #[arg(long, default_value = "synthetic")]
        subject: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward kinematics for one frame of a clip.
    Fk {
        #[arg(long)]
        clip: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        /// Which hand: `left` or `right`.
        #[arg(long, default_value = "right")]
        hand: String,
        #[arg(long)]
        template: Option<PathBuf>,
        /// Joint-set JSON path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MidiStats {
            input,
            bin_width,
            json,
            csv,
        } => midi_stats(&input, bin_width, json.as_deref(), csv.as_deref()),
        Command::MidiDiff {
            candidate,
            reference,
            timing_tol_ms,
            dynamic_tol,
            report,
        } => midi_diff(
            &candidate,
            &reference,
            timing_tol_ms,
            dynamic_tol,
            report.as_deref(),
        ),
        Command::Clean {
            input,
            out,
            gaps,
            fps,
        } => clean(&input, &out, gaps.as_deref(), fps),
        Command::Segment {
            input,
            out_dir,
            clip_len,
            stride,
            min_visibility,
        } => segment(&input, &out_dir, clip_len, stride, min_visibility),
        Command::Manifest {
            root,
            split_spec,
            out,
        } => manifest(&root, split_spec.as_deref(), &out),
        Command::Stats {
            root,
            split_spec,
            json,
            csv,
        } => stats(&root, split_spec.as_deref(), json.as_deref(), csv.as_deref()),
        Command::Eval {
            pred,
            gt,
            metrics,
            gmm_components,
            latent_dim,
            seed,
            fps,
            window_s,
            jobs,
            report,
            csv,
            embedder,
            template,
        } => eval(EvalArgs {
            pred,
            gt,
            metrics,
            gmm_components,
            latent_dim,
            seed,
            fps,
            window_s,
            jobs,
            report,
            csv,
            embedder,
            template,
        }),
        Command::Sample {
            frames,
            joints,
            steps,
            seed,
            denoiser,
            oracle_clip,
            features,
            positions,
            fps,
            video_id,
            subject,
            out,
        } => sample(SampleArgs {
            frames,
            joints,
            steps,
            seed,
            denoiser,
            oracle_clip,
            features,
            positions,
            fps,
            video_id,
            subject,
            out,
        }),
        Command::Fk {
            clip,
            frame,
            hand,
            template,
            out,
        } => fk(&clip, frame, &hand, template.as_deref(), out.as_deref()),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
