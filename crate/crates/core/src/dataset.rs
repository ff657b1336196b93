//! On-disk dataset layout: clip annotation JSON, manifest construction
//! with per-video split assignment, and subject statistics.
//!
//! Clip schema (normative keys):
//! `{"clip_id", "video_id", "subject", "fps", "rho": [10],
//!   "frames": [{"left": {"theta": [[x,y,z]×J], "trans": [3]} | null,
//!               "right": ...}]}`

use crate::hand::axis_angle_to_euler;
use crate::motion::{HandMotion, MotionSequence};
use crate::pipeline::{FramePose, RawTrack};
use crate::real::Real;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("bad frame count: {frames} frames is not whole seconds at {fps} FPS")]
    BadFrameCount { frames: usize, fps: f64 },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("conflicting split: {0}")]
    ConflictingSplit(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// One hand in one frame. Absent hands are `null` in the JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandFrame<S> {
    pub theta: Vec<[S; 3]>,
    pub trans: [S; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame<S> {
    pub left: Option<HandFrame<S>>,
    pub right: Option<HandFrame<S>>,
}

/// A clip annotation file. Visibility is implied by presence: a hand that
/// is `null` in a frame is invisible there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipAnnotation<S> {
    pub clip_id: String,
    pub video_id: String,
    pub subject: String,
    pub fps: f64,
    pub rho: [S; 10],
    pub frames: Vec<Frame<S>>,
}

impl<S: Real> ClipAnnotation<S> {
    /// Joint count, from the first present hand.
    pub fn joints(&self) -> Option<usize> {
        self.frames.iter().find_map(|f| {
            f.left
                .as_ref()
                .or(f.right.as_ref())
                .map(|h| h.theta.len())
        })
    }

    pub fn seconds(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    /// Structural checks shared by load and save.
    pub fn validate(&self, require_whole_seconds: bool) -> Result<(), DatasetError> {
        if self.fps <= 0.0 {
            return Err(DatasetError::SchemaViolation(format!(
                "clip {}: fps must be positive",
                self.clip_id
            )));
        }
        if self.frames.is_empty() {
            return Err(DatasetError::SchemaViolation(format!(
                "clip {}: no frames",
                self.clip_id
            )));
        }
        let joints = self.joints().ok_or_else(|| {
            DatasetError::SchemaViolation(format!(
                "clip {}: no hand observed in any frame",
                self.clip_id
            ))
        })?;
        if joints == 0 {
            return Err(DatasetError::SchemaViolation(format!(
                "clip {}: zero joints",
                self.clip_id
            )));
        }
        for (i, frame) in self.frames.iter().enumerate() {
            for (side, hand) in [("left", &frame.left), ("right", &frame.right)] {
                if let Some(h) = hand {
                    if h.theta.len() != joints {
                        return Err(DatasetError::SchemaViolation(format!(
                            "clip {}: frame {i} {side} hand has {} joints, expected {joints}",
                            self.clip_id,
                            h.theta.len()
                        )));
                    }
                }
            }
        }
        if require_whole_seconds {
            let fps_whole = self.fps.round();
            if (self.fps - fps_whole).abs() > 1e-9 || fps_whole <= 0.0 {
                return Err(DatasetError::SchemaViolation(format!(
                    "clip {}: clip files require an integral FPS, got {}",
                    self.clip_id, self.fps
                )));
            }
            if self.frames.len() % fps_whole as usize != 0 {
                return Err(DatasetError::BadFrameCount {
                    frames: self.frames.len(),
                    fps: self.fps,
                });
            }
        }
        Ok(())
    }

    /// Converts per-joint rotations from axis-angle (external annotation
    /// convention) to the intrinsic X-Y-Z Euler angles used on disk.
    pub fn convert_axis_angle_to_euler(&mut self) {
        for frame in &mut self.frames {
            for hand in [&mut frame.left, &mut frame.right].into_iter().flatten() {
                for row in &mut hand.theta {
                    *row = axis_angle_to_euler(*row);
                }
            }
        }
    }

    /// View as a motion sequence; absent hands become invisible frames.
    pub fn to_motion(&self) -> Result<MotionSequence<S>, DatasetError> {
        self.validate(false)?;
        let joints = self.joints().expect("validated");
        let n = self.frames.len();
        let mut left = HandMotion::new_invisible(n, joints);
        let mut right = HandMotion::new_invisible(n, joints);
        for (i, frame) in self.frames.iter().enumerate() {
            for (hand, motion) in [(&frame.left, &mut left), (&frame.right, &mut right)] {
                if let Some(h) = hand {
                    motion.visible[i] = true;
                    for (j, row) in h.theta.iter().enumerate() {
                        for k in 0..3 {
                            motion.theta[[i, j, k]] = row[k];
                        }
                    }
                    for k in 0..3 {
                        motion.trans[[i, k]] = h.trans[k];
                    }
                }
            }
        }
        Ok(MotionSequence {
            fps: self.fps,
            left,
            right,
        })
    }

    /// View as a raw pipeline track (absent hands become missing frames).
    pub fn to_raw_track(&self) -> Result<RawTrack<S>, DatasetError> {
        self.validate(false)?;
        let joints = self.joints().expect("validated");
        let convert = |hand: &Option<HandFrame<S>>| -> Option<FramePose<S>> {
            hand.as_ref().map(|h| {
                let mut theta = Array2::zeros((joints, 3));
                for (j, row) in h.theta.iter().enumerate() {
                    for k in 0..3 {
                        theta[[j, k]] = row[k];
                    }
                }
                FramePose {
                    theta,
                    trans: h.trans,
                }
            })
        };
        Ok(RawTrack {
            fps: self.fps,
            joints,
            left: self.frames.iter().map(|f| convert(&f.left)).collect(),
            right: self.frames.iter().map(|f| convert(&f.right)).collect(),
        })
    }

    /// Builds an annotation from a motion sequence; invisible frames are
    /// written as `null`.
    pub fn from_motion(
        clip_id: String,
        video_id: String,
        subject: String,
        rho: [S; 10],
        motion: &MotionSequence<S>,
    ) -> Self {
        let joints = motion.joints();
        let hand_frame = |hand: &HandMotion<S>, i: usize| -> Option<HandFrame<S>> {
            if !hand.visible[i] {
                return None;
            }
            let mut theta = Vec::with_capacity(joints);
            for j in 0..joints {
                theta.push([
                    hand.theta[[i, j, 0]],
                    hand.theta[[i, j, 1]],
                    hand.theta[[i, j, 2]],
                ]);
            }
            Some(HandFrame {
                theta,
                trans: [hand.trans[[i, 0]], hand.trans[[i, 1]], hand.trans[[i, 2]]],
            })
        };
        let frames = (0..motion.frames())
            .map(|i| Frame {
                left: hand_frame(&motion.left, i),
                right: hand_frame(&motion.right, i),
            })
            .collect();
        ClipAnnotation {
            clip_id,
            video_id,
            subject,
            fps: motion.fps,
            rho,
            frames,
        }
    }
}

/// Canonical clip id: `{video_id}_{start_second}`.
pub fn clip_id(video_id: &str, start_second: usize) -> String {
    format!("{video_id}_{start_second}")
}

/// Loads and validates a benchmark clip (whole-second frame count).
pub fn load_clip<S: Real>(path: &Path) -> Result<ClipAnnotation<S>, DatasetError> {
    let clip = load_annotation(path)?;
    clip.validate(true)?;
    Ok(clip)
}

/// Loads an annotation without the whole-second requirement (raw tracks
/// fed to the cleaning pipeline).
pub fn load_track<S: Real>(path: &Path) -> Result<ClipAnnotation<S>, DatasetError> {
    let clip = load_annotation(path)?;
    clip.validate(false)?;
    Ok(clip)
}

fn load_annotation<S: Real>(path: &Path) -> Result<ClipAnnotation<S>, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| DatasetError::SchemaViolation(format!("{}: {e}", path.display())))
}

/// Writes a clip after validation; numeric fields keep full precision.
pub fn save_clip<S: Real>(clip: &ClipAnnotation<S>, path: &Path) -> Result<(), DatasetError> {
    clip.validate(true)?;
    write_annotation(clip, path)
}

/// Writes an annotation without the whole-second requirement.
pub fn save_track<S: Real>(clip: &ClipAnnotation<S>, path: &Path) -> Result<(), DatasetError> {
    clip.validate(false)?;
    write_annotation(clip, path)
}

fn write_annotation<S: Real>(clip: &ClipAnnotation<S>, path: &Path) -> Result<(), DatasetError> {
    let json = serde_json::to_string_pretty(clip)
        .map_err(|e| DatasetError::Io(format!("serializing {}: {e}", clip.clip_id)))?;
    std::fs::write(path, json).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Declares which source videos belong to which split. Videos not listed
/// anywhere fall into `default_split` (train unless overridden).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub val: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
    #[serde(default)]
    pub default_split: Option<Split>,
}

impl SplitSpec {
    fn lookup(&self, video_id: &str) -> Result<Split, DatasetError> {
        let mut found = None;
        for (split, list) in [
            (Split::Train, &self.train),
            (Split::Val, &self.val),
            (Split::Test, &self.test),
        ] {
            if list.iter().any(|v| v == video_id) {
                if found.is_some() {
                    return Err(DatasetError::ConflictingSplit(format!(
                        "video {video_id} is listed in more than one split"
                    )));
                }
                found = Some(split);
            }
        }
        Ok(found
            .or(self.default_split)
            .unwrap_or(Split::Train))
    }
}

/// One clip as recorded in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip_id: String,
    pub video_id: String,
    pub subject: String,
    pub seconds: f64,
    pub frames: usize,
    pub split: Split,
}

/// Dataset manifest: every clip with its split. All clips of one source
/// video always share one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub clips: Vec<ClipEntry>,
}

impl Manifest {
    /// The normative JSON form: split name → sorted clip ids.
    pub fn split_map(&self) -> BTreeMap<String, Vec<String>> {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for name in ["train", "val", "test"] {
            map.insert(name.to_string(), Vec::new());
        }
        for clip in &self.clips {
            let key = match clip.split {
                Split::Train => "train",
                Split::Val => "val",
                Split::Test => "test",
            };
            map.get_mut(key).expect("preseeded").push(clip.clip_id.clone());
        }
        for list in map.values_mut() {
            list.sort();
        }
        map
    }

    pub fn write_split_json(&self, path: &Path) -> Result<(), DatasetError> {
        let json = serde_json::to_string_pretty(&self.split_map())
            .map_err(|e| DatasetError::Io(e.to_string()))?;
        std::fs::write(path, json)
            .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))
    }
}

/// Scans a directory of clip files and assigns splits per source video.
///
/// The directory listing is processed in sorted order so the manifest is
/// deterministic.
pub fn build_manifest<S: Real>(
    root_dir: &Path,
    split_spec: &SplitSpec,
) -> Result<Manifest, DatasetError> {
    let mut paths: Vec<_> = std::fs::read_dir(root_dir)
        .map_err(|e| DatasetError::Io(format!("{}: {e}", root_dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(DatasetError::EmptyDataset(format!(
            "no clip files under {}",
            root_dir.display()
        )));
    }

    let mut clips = Vec::with_capacity(paths.len());
    for path in paths {
        let clip: ClipAnnotation<S> = load_clip(&path)?;
        let split = split_spec.lookup(&clip.video_id)?;
        clips.push(ClipEntry {
            clip_id: clip.clip_id.clone(),
            video_id: clip.video_id.clone(),
            subject: clip.subject.clone(),
            seconds: clip.seconds(),
            frames: clip.frames.len(),
            split,
        });
    }
    clips.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    Ok(Manifest { clips })
}

/// Per-subject aggregate row; the same shape is reused for the totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRow {
    pub subject: String,
    pub videos: usize,
    pub clips: usize,
    pub seconds: f64,
    pub frames: usize,
}

/// Subject distribution report: one row per subject plus column totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectStats {
    pub subjects: Vec<SubjectRow>,
    pub total: SubjectRow,
}

/// Aggregates a manifest into per-subject video/clip/duration/frame
/// counts. Totals equal the column sums.
pub fn subject_stats(manifest: &Manifest) -> Result<SubjectStats, DatasetError> {
    if manifest.clips.is_empty() {
        return Err(DatasetError::EmptyDataset("manifest has no clips".into()));
    }
    let mut by_subject: BTreeMap<&str, (std::collections::BTreeSet<&str>, usize, f64, usize)> =
        BTreeMap::new();
    for clip in &manifest.clips {
        let entry = by_subject.entry(&clip.subject).or_default();
        entry.0.insert(&clip.video_id);
        entry.1 += 1;
        entry.2 += clip.seconds;
        entry.3 += clip.frames;
    }
    let subjects: Vec<SubjectRow> = by_subject
        .into_iter()
        .map(|(subject, (videos, clips, seconds, frames))| SubjectRow {
            subject: subject.to_string(),
            videos: videos.len(),
            clips,
            seconds,
            frames,
        })
        .collect();
    let total = SubjectRow {
        subject: "total".to_string(),
        videos: {
            let mut all: std::collections::BTreeSet<&str> = Default::default();
            for c in &manifest.clips {
                all.insert(&c.video_id);
            }
            all.len()
        },
        clips: subjects.iter().map(|s| s.clips).sum(),
        seconds: subjects.iter().map(|s| s.seconds).sum(),
        frames: subjects.iter().map(|s| s.frames).sum(),
    };
    Ok(SubjectStats { subjects, total })
}
