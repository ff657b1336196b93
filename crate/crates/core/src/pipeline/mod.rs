//! Cleaning pipeline for raw per-frame hand annotations: outlier removal,
//! gap classification and filling, polynomial smoothing, frame-rate
//! normalization, and benchmark clip segmentation.
//!
//! The stage order is fixed: hampel → classify/fill → savgol → resample →
//! segment.

mod filters;
mod gaps;

pub use filters::{
    hampel_filter, hampel_filter_masked, savgol_smooth, SavgolKernel, MAD_FLOOR, MAD_SCALE,
};
pub use gaps::{classify_and_fill, classify_states, labels_from_states, FrameState};

use crate::motion::{HandMotion, MotionSequence};
use crate::real::{real, Real};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("bad savgol window: order {order}, window {window} (window must be odd and greater than order)")]
    BadWindow { order: usize, window: usize },
}

/// One observed frame of one hand before cleaning.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePose<S> {
    pub theta: Array2<S>,
    pub trans: [S; 3],
}

/// Raw per-frame observations; `None` marks frames where detection failed.
#[derive(Debug, Clone)]
pub struct RawTrack<S> {
    pub fps: f64,
    pub joints: usize,
    pub left: Vec<Option<FramePose<S>>>,
    pub right: Vec<Option<FramePose<S>>>,
}

impl<S> RawTrack<S> {
    pub fn frames(&self) -> usize {
        self.left.len()
    }
}

/// A cleaned track is an ordinary motion sequence (30 FPS after the
/// resampling stage) whose invisible spans carry no fabricated data.
pub type CleanTrack<S> = MotionSequence<S>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapKind {
    Fill,
    Invisible,
}

/// A labeled run of frames produced by gap classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapLabel {
    pub start: usize,
    pub len: usize,
    pub kind: GapKind,
}

/// Frame-level outlier masks, one entry per raw frame per hand.
#[derive(Debug, Clone)]
pub struct OutlierMasks {
    pub left: Vec<bool>,
    pub right: Vec<bool>,
}

/// Pipeline parameters. Defaults pin the published cleaning recipe:
/// Hampel window 20 at 3σ, fill gaps shorter than 30 frames, drop
/// observation islands shorter than 15 frames, Savitzky-Golay order 3
/// window 11, resample to 30 FPS.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CleanParams {
    pub hampel_window: usize,
    pub hampel_nsigma: f64,
    pub fill_max: usize,
    pub min_visible_run: usize,
    pub savgol_order: usize,
    pub savgol_window: usize,
    pub target_fps: f64,
}

impl Default for CleanParams {
    fn default() -> Self {
        CleanParams {
            hampel_window: 20,
            hampel_nsigma: 3.0,
            fill_max: 30,
            min_visible_run: 15,
            savgol_order: 3,
            savgol_window: 11,
            target_fps: 30.0,
        }
    }
}

/// Fraction of a hand's angle channels that must be flagged before the
/// whole frame counts as an outlier (any flagged translation channel also
/// suffices — translation errors dominate the blur/fast-motion failures).
const ANGLE_OUTLIER_FRACTION: f64 = 0.25;

/// Runs the Hampel filter over every scalar channel of both hands and
/// aggregates per-channel flags into frame-level outlier masks.
pub fn frame_outlier_masks<S: Real>(
    track: &RawTrack<S>,
    window: usize,
    nsigma: f64,
) -> OutlierMasks {
    OutlierMasks {
        left: hand_outlier_mask(&track.left, track.joints, window, nsigma),
        right: hand_outlier_mask(&track.right, track.joints, window, nsigma),
    }
}

fn hand_outlier_mask<S: Real>(
    frames: &[Option<FramePose<S>>],
    joints: usize,
    window: usize,
    nsigma: f64,
) -> Vec<bool> {
    let n = frames.len();
    let present: Vec<bool> = frames.iter().map(|f| f.is_some()).collect();
    let mut trans_flags = vec![false; n];
    let mut angle_flag_counts = vec![0usize; n];

    let mut channel = vec![S::zero(); n];
    for k in 0..3 {
        for (i, f) in frames.iter().enumerate() {
            channel[i] = f.as_ref().map(|p| p.trans[k]).unwrap_or_else(S::zero);
        }
        let flags = hampel_filter_masked(&channel, &present, window, nsigma);
        for i in 0..n {
            trans_flags[i] |= flags[i];
        }
    }
    for j in 0..joints {
        for k in 0..3 {
            for (i, f) in frames.iter().enumerate() {
                channel[i] = f.as_ref().map(|p| p.theta[[j, k]]).unwrap_or_else(S::zero);
            }
            let flags = hampel_filter_masked(&channel, &present, window, nsigma);
            for i in 0..n {
                angle_flag_counts[i] += usize::from(flags[i]);
            }
        }
    }

    let angle_channels = (joints * 3) as f64;
    (0..n)
        .map(|i| {
            present[i]
                && (trans_flags[i]
                    || angle_flag_counts[i] as f64 > ANGLE_OUTLIER_FRACTION * angle_channels)
        })
        .collect()
}

/// Smooths every channel of both hands within visible spans.
///
/// Spans shorter than the window pass through unchanged.
pub fn smooth_sequence<S: Real>(
    seq: &mut MotionSequence<S>,
    order: usize,
    window: usize,
) -> Result<(), PipelineError> {
    let kernel = SavgolKernel::new(order, window)?;
    for hand in [&mut seq.left, &mut seq.right] {
        smooth_hand(hand, &kernel);
    }
    Ok(())
}

fn smooth_hand<S: Real>(hand: &mut HandMotion<S>, kernel: &SavgolKernel<S>) {
    let n = hand.frames();
    let joints = hand.joints();
    let spans = visible_spans(&hand.visible);
    let mut buf = Vec::with_capacity(n);

    let mut apply = |get: &dyn Fn(&HandMotion<S>, usize) -> S,
                     set: &mut dyn FnMut(&mut HandMotion<S>, usize, S),
                     hand: &mut HandMotion<S>| {
        for &(start, end) in &spans {
            buf.clear();
            for i in start..end {
                buf.push(get(hand, i));
            }
            let smoothed = filters::savgol_apply(&buf, kernel);
            for (i, v) in smoothed.into_iter().enumerate() {
                set(hand, start + i, v);
            }
        }
    };

    for k in 0..3 {
        apply(
            &move |h, i| h.trans[[i, k]],
            &mut move |h, i, v| h.trans[[i, k]] = v,
            hand,
        );
    }
    for j in 0..joints {
        for k in 0..3 {
            apply(
                &move |h, i| h.theta[[i, j, k]],
                &mut move |h, i, v| h.theta[[i, j, k]] = v,
                hand,
            );
        }
    }
}

fn visible_spans(visible: &[bool]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < visible.len() {
        if !visible[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < visible.len() && visible[i] {
            i += 1;
        }
        spans.push((start, i));
    }
    spans
}

/// Resamples a sequence to `target_fps` by linear interpolation.
///
/// A target frame is visible only when both bracketing source frames are
/// visible; endpoints are preserved exactly, and a same-rate resample is
/// the identity.
pub fn resample_fps<S: Real>(seq: &MotionSequence<S>, target_fps: f64) -> MotionSequence<S> {
    assert!(seq.fps > 0.0 && target_fps > 0.0, "frame rates must be positive");
    let n_src = seq.frames();
    let joints = seq.joints();
    if n_src == 0 {
        return MotionSequence {
            fps: target_fps,
            left: HandMotion::new_invisible(0, joints),
            right: HandMotion::new_invisible(0, joints),
        };
    }
    let duration = (n_src - 1) as f64 / seq.fps;
    let n_tgt = (duration * target_fps + 1e-9).floor() as usize + 1;

    let mut out = MotionSequence {
        fps: target_fps,
        left: HandMotion::new_invisible(n_tgt, joints),
        right: HandMotion::new_invisible(n_tgt, joints),
    };

    for m in 0..n_tgt {
        let x = m as f64 / target_fps * seq.fps;
        let i = (x.floor() as usize).min(n_src - 1);
        let frac = x - i as f64;
        let exact = frac.abs() < 1e-9 || i + 1 >= n_src;
        for (src, dst) in [(&seq.left, &mut out.left), (&seq.right, &mut out.right)] {
            if exact {
                if !src.visible[i] {
                    continue;
                }
                dst.visible[m] = true;
                for j in 0..joints {
                    for k in 0..3 {
                        dst.theta[[m, j, k]] = src.theta[[i, j, k]];
                    }
                }
                for k in 0..3 {
                    dst.trans[[m, k]] = src.trans[[i, k]];
                }
            } else {
                if !(src.visible[i] && src.visible[i + 1]) {
                    continue;
                }
                dst.visible[m] = true;
                let a = real::<S>(1.0 - frac);
                let b = real::<S>(frac);
                for j in 0..joints {
                    for k in 0..3 {
                        dst.theta[[m, j, k]] =
                            a * src.theta[[i, j, k]] + b * src.theta[[i + 1, j, k]];
                    }
                }
                for k in 0..3 {
                    dst.trans[[m, k]] = a * src.trans[[i, k]] + b * src.trans[[i + 1, k]];
                }
            }
        }
    }
    out
}

/// A segmentation window in frames, with its offset in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipWindow {
    pub start_frame: usize,
    pub frames: usize,
    pub offset_s: f64,
}

/// Enumerates clip windows of `clip_len_s` seconds every `stride_s`
/// seconds, keeping only windows that fit entirely in the track and whose
/// mean visibility across both hands is at least `min_visibility`.
pub fn segment_clips<S: Real>(
    seq: &MotionSequence<S>,
    clip_len_s: f64,
    stride_s: f64,
    min_visibility: f64,
) -> Vec<ClipWindow> {
    assert!(clip_len_s > 0.0, "clip length must be positive");
    assert!(
        stride_s > 0.0 && stride_s <= clip_len_s,
        "stride must be in (0, clip length]"
    );
    let len_frames = (clip_len_s * seq.fps).round() as usize;
    let stride_frames = (stride_s * seq.fps).round() as usize;
    if len_frames == 0 || stride_frames == 0 {
        return Vec::new();
    }

    let n = seq.frames();
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + len_frames <= n {
        let window_left = &seq.left.visible[start..start + len_frames];
        let window_right = &seq.right.visible[start..start + len_frames];
        let visible = window_left.iter().filter(|&&v| v).count()
            + window_right.iter().filter(|&&v| v).count();
        let mean = visible as f64 / (2 * len_frames) as f64;
        if mean >= min_visibility {
            out.push(ClipWindow {
                start_frame: start,
                frames: len_frames,
                offset_s: start as f64 / seq.fps,
            });
        }
        start += stride_frames;
    }
    out
}

/// Full cleaning pass: hampel → classify/fill → savgol → resample.
///
/// Returns the cleaned 30 FPS track and the per-hand gap labels (indices
/// refer to source-rate frames).
pub fn clean_track<S: Real>(
    track: &RawTrack<S>,
    params: &CleanParams,
) -> Result<(CleanTrack<S>, [Vec<GapLabel>; 2]), PipelineError> {
    let masks = frame_outlier_masks(track, params.hampel_window, params.hampel_nsigma);
    let (mut seq, labels) =
        classify_and_fill(track, &masks, params.fill_max, params.min_visible_run);
    smooth_sequence(&mut seq, params.savgol_order, params.savgol_window)?;
    let resampled = resample_fps(&seq, params.target_fps);
    Ok((resampled, labels))
}
