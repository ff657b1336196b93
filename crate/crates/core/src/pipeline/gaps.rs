//! Gap classification and bilateral interpolation of missing frames.

use super::{GapKind, GapLabel, OutlierMasks, RawTrack};
use crate::motion::{HandMotion, MotionSequence};
use crate::real::{real, Real};

/// Per-frame status after gap handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameState {
    /// Observed and kept.
    Visible,
    /// Interpolated interior gap.
    Filled,
    /// No trustworthy data; carries zeros.
    Invisible,
}

/// Classifies the missing runs of a presence mask and relabels short
/// observation islands.
///
/// Rules applied in order:
/// 1. interior missing runs (bounded by present frames on both sides)
///    shorter than `fill_max` frames become `Filled`; all other missing
///    runs, including boundary runs, become `Invisible`;
/// 2. maximal visible-or-filled runs shorter than `min_visible_run`
///    frames are relabeled `Invisible` wholesale.
pub fn classify_states(
    present: &[bool],
    fill_max: usize,
    min_visible_run: usize,
) -> Vec<FrameState> {
    let n = present.len();
    let mut states: Vec<FrameState> = present
        .iter()
        .map(|&p| if p { FrameState::Visible } else { FrameState::Invisible })
        .collect();

    // Pass 1: fill short interior gaps.
    let mut i = 0;
    while i < n {
        if present[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !present[i] {
            i += 1;
        }
        let len = i - start;
        let interior = start > 0 && i < n;
        if interior && len < fill_max {
            for s in &mut states[start..i] {
                *s = FrameState::Filled;
            }
        }
    }

    // Pass 2: drop short islands.
    let mut i = 0;
    while i < n {
        if states[i] == FrameState::Invisible {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && states[i] != FrameState::Invisible {
            i += 1;
        }
        if i - start < min_visible_run {
            for s in &mut states[start..i] {
                *s = FrameState::Invisible;
            }
        }
    }

    states
}

/// Derives gap labels from final frame states: one `fill` label per maximal
/// filled run, one `invisible` label per maximal invisible run.
pub fn labels_from_states(states: &[FrameState]) -> Vec<GapLabel> {
    let mut labels = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let state = states[i];
        let start = i;
        while i < states.len() && states[i] == state {
            i += 1;
        }
        let kind = match state {
            FrameState::Filled => Some(GapKind::Fill),
            FrameState::Invisible => Some(GapKind::Invisible),
            FrameState::Visible => None,
        };
        if let Some(kind) = kind {
            labels.push(GapLabel {
                start,
                len: i - start,
                kind,
            });
        }
    }
    labels
}

/// Marks outlier and undetected frames missing, fills short interior gaps
/// by linear interpolation between their boundary frames, and labels
/// everything else invisible.
///
/// Returns the intermediate motion (still at the source frame rate) and
/// per-hand gap labels.
pub fn classify_and_fill<S: Real>(
    track: &RawTrack<S>,
    masks: &OutlierMasks,
    fill_max: usize,
    min_visible_run: usize,
) -> (MotionSequence<S>, [Vec<GapLabel>; 2]) {
    let left = fill_hand(&track.left, &masks.left, track.joints, fill_max, min_visible_run);
    let right = fill_hand(
        &track.right,
        &masks.right,
        track.joints,
        fill_max,
        min_visible_run,
    );
    (
        MotionSequence {
            fps: track.fps,
            left: left.0,
            right: right.0,
        },
        [left.1, right.1],
    )
}

fn fill_hand<S: Real>(
    frames: &[Option<super::FramePose<S>>],
    outlier: &[bool],
    joints: usize,
    fill_max: usize,
    min_visible_run: usize,
) -> (HandMotion<S>, Vec<GapLabel>) {
    assert_eq!(frames.len(), outlier.len(), "mask must align with track");
    let n = frames.len();
    let present: Vec<bool> = frames
        .iter()
        .zip(outlier)
        .map(|(f, &out)| f.is_some() && !out)
        .collect();
    let states = classify_states(&present, fill_max, min_visible_run);
    let labels = labels_from_states(&states);

    let mut motion = HandMotion::new_invisible(n, joints);
    for (i, state) in states.iter().enumerate() {
        match state {
            FrameState::Visible => {
                let pose = frames[i].as_ref().expect("visible frame has data");
                write_frame(&mut motion, i, pose);
                motion.visible[i] = true;
            }
            FrameState::Filled => motion.visible[i] = true,
            FrameState::Invisible => {}
        }
    }

    // Interpolate filled runs between their present boundary frames.
    let mut i = 0;
    while i < n {
        if states[i] != FrameState::Filled {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && states[i] == FrameState::Filled {
            i += 1;
        }
        let before = frames[start - 1].as_ref().expect("fill bounded by data");
        let after = frames[i].as_ref().expect("fill bounded by data");
        let span = real::<S>((i - start + 1) as f64);
        for (step, frame) in (start..i).enumerate() {
            let alpha = real::<S>((step + 1) as f64) / span;
            let beta = S::one() - alpha;
            for j in 0..joints {
                for k in 0..3 {
                    motion.theta[[frame, j, k]] =
                        beta * before.theta[[j, k]] + alpha * after.theta[[j, k]];
                }
            }
            for k in 0..3 {
                motion.trans[[frame, k]] = beta * before.trans[k] + alpha * after.trans[k];
            }
        }
    }

    (motion, labels)
}

fn write_frame<S: Real>(motion: &mut HandMotion<S>, i: usize, pose: &super::FramePose<S>) {
    for j in 0..motion.joints() {
        for k in 0..3 {
            motion.theta[[i, j, k]] = pose.theta[[j, k]];
        }
    }
    for k in 0..3 {
        motion.trans[[i, k]] = pose.trans[k];
    }
}
