//! In-memory motion records: per-hand time series of joint angles, root
//! translation, and visibility at a fixed frame rate.

use crate::hand::{HandPose, Side};
use crate::real::Real;
use ndarray::{s, Array1, Array2, Array3};

/// One hand's motion: `theta` is N×J×3 Euler angles, `trans` is N×3 root
/// positions, `visible[n]` marks frames that carry real data. Invisible
/// frames hold zeros and must never be interpreted as motion.
#[derive(Debug, Clone, PartialEq)]
pub struct HandMotion<S> {
    pub theta: Array3<S>,
    pub trans: Array2<S>,
    pub visible: Vec<bool>,
}

impl<S: Real> HandMotion<S> {
    /// An all-invisible motion with the given frame and joint counts.
    pub fn new_invisible(frames: usize, joints: usize) -> Self {
        HandMotion {
            theta: Array3::zeros((frames, joints, 3)),
            trans: Array2::zeros((frames, 3)),
            visible: vec![false; frames],
        }
    }

    pub fn frames(&self) -> usize {
        self.visible.len()
    }

    pub fn joints(&self) -> usize {
        self.theta.dim().1
    }

    /// The pose at frame `n` (right-handed by default; callers that track
    /// sides set it explicitly).
    pub fn pose_at(&self, n: usize) -> HandPose<S> {
        self.pose_at_for(n, Side::Right)
    }

    pub fn pose_at_for(&self, n: usize, side: Side) -> HandPose<S> {
        HandPose {
            theta: self.theta.slice(s![n, .., ..]).to_owned(),
            trans: [self.trans[[n, 0]], self.trans[[n, 1]], self.trans[[n, 2]]],
            side,
        }
    }

    /// Fraction of visible frames.
    pub fn visibility(&self) -> f64 {
        if self.visible.is_empty() {
            return 0.0;
        }
        self.visible.iter().filter(|&&v| v).count() as f64 / self.visible.len() as f64
    }

    /// Flattened θ of one frame as a J·3 vector.
    pub fn frame_theta_vector(&self, n: usize) -> Array1<S> {
        Array1::from_iter(self.theta.slice(s![n, .., ..]).iter().copied())
    }

    /// Copies frames `[start, start+len)` into a new motion.
    pub fn window(&self, start: usize, len: usize) -> HandMotion<S> {
        HandMotion {
            theta: self.theta.slice(s![start..start + len, .., ..]).to_owned(),
            trans: self.trans.slice(s![start..start + len, ..]).to_owned(),
            visible: self.visible[start..start + len].to_vec(),
        }
    }
}

/// Both hands of one recording at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence<S> {
    pub fps: f64,
    pub left: HandMotion<S>,
    pub right: HandMotion<S>,
}

impl<S: Real> MotionSequence<S> {
    pub fn frames(&self) -> usize {
        self.left.frames()
    }

    pub fn joints(&self) -> usize {
        self.left.joints()
    }

    /// Mean visibility across both hands.
    pub fn visibility(&self) -> f64 {
        (self.left.visibility() + self.right.visibility()) / 2.0
    }

    pub fn hand(&self, side: Side) -> &HandMotion<S> {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn window(&self, start: usize, len: usize) -> MotionSequence<S> {
        MotionSequence {
            fps: self.fps,
            left: self.left.window(start, len),
            right: self.right.window(start, len),
        }
    }
}
