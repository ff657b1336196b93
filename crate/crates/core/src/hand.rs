//! Parametric hand skeleton: per-joint Euler-angle poses over a bone tree,
//! forward kinematics to 21 world-space joints (16 articulated + 5
//! fingertips), and finite-difference joint accelerations.
//!
//! The articulated layout follows the common 16-joint convention: wrist
//! root, then three joints per finger in the order index, middle, pinky,
//! ring, thumb. Fingertips are non-articulated extensions of each distal
//! joint.

use crate::motion::HandMotion;
use crate::real::{real, Real};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Articulated joints per hand (1 root orientation + 15 articulations).
pub const ARTICULATED_JOINTS: usize = 16;
/// Non-articulated fingertip extensions.
pub const FINGERTIPS: usize = 5;
/// Joints in a [`JointSet`]: articulated joints plus fingertips.
pub const OUTPUT_JOINTS: usize = ARTICULATED_JOINTS + FINGERTIPS;

#[derive(Debug, Error)]
pub enum HandError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("motion too short: {0} frames, need at least 3")]
    TooShort(usize),
    #[error("bad template: {0}")]
    BadTemplate(String),
}

/// Which hand a pose belongs to. Templates are stored right-handed; left
/// hands use the X-mirrored template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Ten dimensionless shape coefficients; all-zero means template geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandShape<S> {
    pub rho: [S; 10],
}

impl<S: Real> Default for HandShape<S> {
    fn default() -> Self {
        HandShape {
            rho: [S::zero(); 10],
        }
    }
}

/// Per-joint Euler angles (intrinsic X-Y-Z, radians) plus a root position.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose<S> {
    /// J×3 matrix of per-joint angles.
    pub theta: Array2<S>,
    /// Root (wrist) position in meters.
    pub trans: [S; 3],
    pub side: Side,
}

/// Bone tree with per-joint offsets in the parent frame.
///
/// `parent[0] == 0` (the wrist is its own parent) and `parent[j] < j` for
/// every other joint, so a single forward pass evaluates the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandTemplate<S> {
    pub parent: Vec<usize>,
    pub offsets: Vec<[S; 3]>,
    pub tip_parent: Vec<usize>,
    pub tip_offsets: Vec<[S; 3]>,
    /// Optional linear map from shape coefficients to offset deltas,
    /// row-major over the flattened J×3 offsets.
    #[serde(default)]
    pub shape_basis: Option<Vec<[S; 10]>>,
}

/// World-frame joint positions: 16 articulated joints then 5 fingertips.
/// Row 0 always equals the pose translation.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSet<S> {
    pub positions: Array2<S>,
}

impl<S: Real> HandTemplate<S> {
    /// Validates the tree invariants; call after deserializing.
    pub fn validate(&self) -> Result<(), HandError> {
        let joints = self.parent.len();
        if joints == 0 || self.parent[0] != 0 {
            return Err(HandError::BadTemplate("root must be its own parent".into()));
        }
        if self.offsets.len() != joints {
            return Err(HandError::BadTemplate(format!(
                "{} offsets for {} joints",
                self.offsets.len(),
                joints
            )));
        }
        for (j, &p) in self.parent.iter().enumerate().skip(1) {
            if p >= j {
                return Err(HandError::BadTemplate(format!(
                    "parent of joint {j} is {p}; parents must precede children"
                )));
            }
            let norm = norm3(&self.offsets[j]);
            if !(norm > S::zero()) {
                return Err(HandError::BadTemplate(format!(
                    "joint {j} bone offset must have positive length"
                )));
            }
        }
        if self.tip_parent.len() != self.tip_offsets.len() {
            return Err(HandError::BadTemplate("tip arrays disagree in length".into()));
        }
        for (&tp, off) in self.tip_parent.iter().zip(&self.tip_offsets) {
            if tp >= joints {
                return Err(HandError::BadTemplate(format!("tip parent {tp} out of range")));
            }
            if !(norm3(off) > S::zero()) {
                return Err(HandError::BadTemplate(
                    "tip offset must have positive length".into(),
                ));
            }
        }
        if let Some(basis) = &self.shape_basis {
            if basis.len() != joints * 3 {
                return Err(HandError::BadTemplate(format!(
                    "shape basis has {} rows, expected {}",
                    basis.len(),
                    joints * 3
                )));
            }
        }
        Ok(())
    }

    pub fn joints(&self) -> usize {
        self.parent.len()
    }

    pub fn output_joints(&self) -> usize {
        self.joints() + self.tip_parent.len()
    }

    /// Bone offsets after applying the shape basis.
    pub fn shaped_offsets(&self, shape: &HandShape<S>) -> Vec<[S; 3]> {
        let mut out = self.offsets.clone();
        if let Some(basis) = &self.shape_basis {
            for (flat, row) in basis.iter().enumerate() {
                let mut delta = S::zero();
                for (k, &b) in row.iter().enumerate() {
                    delta += b * shape.rho[k];
                }
                out[flat / 3][flat % 3] += delta;
            }
        }
        out
    }

    /// Neutral adult right-hand table (meters).
    pub fn neutral() -> Self {
        let t = |v: [f64; 3]| [real::<S>(v[0]), real(v[1]), real(v[2])];
        HandTemplate {
            parent: vec![0, 0, 1, 2, 0, 4, 5, 0, 7, 8, 0, 10, 11, 0, 13, 14],
            offsets: vec![
                t([0.0, 0.0, 0.0]),
                // index
                t([0.088, 0.0, 0.024]),
                t([0.038, 0.0, 0.002]),
                t([0.024, 0.0, 0.001]),
                // middle
                t([0.092, 0.0, 0.0]),
                t([0.042, 0.0, 0.0]),
                t([0.028, 0.0, 0.0]),
                // pinky
                t([0.078, 0.0, -0.044]),
                t([0.030, 0.0, -0.004]),
                t([0.019, 0.0, -0.002]),
                // ring
                t([0.087, 0.0, -0.022]),
                t([0.038, 0.0, -0.002]),
                t([0.026, 0.0, -0.001]),
                // thumb
                t([0.026, -0.008, 0.040]),
                t([0.036, -0.004, 0.017]),
                t([0.030, 0.0, 0.011]),
            ],
            tip_parent: vec![3, 6, 9, 12, 15],
            tip_offsets: vec![
                t([0.021, 0.0, 0.001]),
                t([0.023, 0.0, 0.0]),
                t([0.018, 0.0, -0.001]),
                t([0.021, 0.0, -0.001]),
                t([0.026, 0.0, 0.007]),
            ],
            shape_basis: None,
        }
    }
}

fn norm3<S: Real>(v: &[S; 3]) -> S {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Rotation matrix for intrinsic X-Y-Z Euler angles: `Rx(a)·Ry(b)·Rz(c)`.
pub fn euler_to_matrix<S: Real>(angles: [S; 3]) -> [[S; 3]; 3] {
    let (sx, cx) = angles[0].sin_cos();
    let (sy, cy) = angles[1].sin_cos();
    let (sz, cz) = angles[2].sin_cos();
    [
        [cy * cz, -cy * sz, sy],
        [cx * sz + sx * sy * cz, cx * cz - sx * sy * sz, -sx * cy],
        [sx * sz - cx * sy * cz, sx * cz + cx * sy * sz, cx * cy],
    ]
}

/// Recovers intrinsic X-Y-Z Euler angles from a rotation matrix.
pub fn matrix_to_euler<S: Real>(r: &[[S; 3]; 3]) -> [S; 3] {
    let one = S::one();
    let sy = r[0][2].max(-one).min(one);
    if sy.abs() < real(1.0 - 1e-9) {
        [
            (-r[1][2]).atan2(r[2][2]),
            sy.asin(),
            (-r[0][1]).atan2(r[0][0]),
        ]
    } else {
        // Gimbal lock: z is unobservable, conventionally zero.
        [r[1][0].atan2(r[1][1]), sy.asin(), S::zero()]
    }
}

/// Rodrigues formula: axis-angle vector to rotation matrix.
pub fn axis_angle_to_matrix<S: Real>(v: [S; 3]) -> [[S; 3]; 3] {
    let angle = norm3(&v);
    if angle < real(1e-12) {
        return identity3();
    }
    let (x, y, z) = (v[0] / angle, v[1] / angle, v[2] / angle);
    let (s, c) = angle.sin_cos();
    let t = S::one() - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

/// Rotation matrix to axis-angle vector.
pub fn matrix_to_axis_angle<S: Real>(r: &[[S; 3]; 3]) -> [S; 3] {
    let one = S::one();
    let two = real::<S>(2.0);
    let trace = r[0][0] + r[1][1] + r[2][2];
    let cos = ((trace - one) / two).max(-one).min(one);
    let angle = cos.acos();
    if angle < real(1e-12) {
        return [S::zero(); 3];
    }
    if angle < real(std::f64::consts::PI - 1e-6) {
        let scale = angle / (two * angle.sin());
        [
            (r[2][1] - r[1][2]) * scale,
            (r[0][2] - r[2][0]) * scale,
            (r[1][0] - r[0][1]) * scale,
        ]
    } else {
        // Near π the skew part degenerates; recover the axis from the
        // diagonal of R = I + 2 K² (largest component is most stable).
        let half = real::<S>(0.5);
        let xx = ((r[0][0] + one) * half).max(S::zero()).sqrt();
        let yy = ((r[1][1] + one) * half).max(S::zero()).sqrt();
        let zz = ((r[2][2] + one) * half).max(S::zero()).sqrt();
        let mut axis = if xx >= yy && xx >= zz {
            let x = xx;
            [x, r[0][1] / (two * x), r[0][2] / (two * x)]
        } else if yy >= zz {
            let y = yy;
            [r[0][1] / (two * y), y, r[1][2] / (two * y)]
        } else {
            let z = zz;
            [r[0][2] / (two * z), r[1][2] / (two * z), z]
        };
        let n = norm3(&axis);
        for a in axis.iter_mut() {
            *a = *a / n * angle;
        }
        axis
    }
}

/// Axis-angle joint rotation to intrinsic X-Y-Z Euler angles (dataset
/// interop for externally annotated poses).
pub fn axis_angle_to_euler<S: Real>(v: [S; 3]) -> [S; 3] {
    matrix_to_euler(&axis_angle_to_matrix(v))
}

/// Intrinsic X-Y-Z Euler angles to an axis-angle vector.
pub fn euler_to_axis_angle<S: Real>(angles: [S; 3]) -> [S; 3] {
    matrix_to_axis_angle(&euler_to_matrix(angles))
}

fn identity3<S: Real>() -> [[S; 3]; 3] {
    let (o, z) = (S::one(), S::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

fn mat_mul<S: Real>(a: &[[S; 3]; 3], b: &[[S; 3]; 3]) -> [[S; 3]; 3] {
    let mut out = [[S::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = S::zero();
            for k in 0..3 {
                acc += a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

fn mat_vec<S: Real>(a: &[[S; 3]; 3], v: &[S; 3]) -> [S; 3] {
    let mut out = [S::zero(); 3];
    for i in 0..3 {
        out[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    }
    out
}

/// Mirrors a pose across the X axis: intrinsic X-Y-Z angles map to
/// `(θx, −θy, −θz)` and the translation X component flips sign.
pub fn mirror_pose<S: Real>(pose: &HandPose<S>) -> HandPose<S> {
    let mut theta = pose.theta.clone();
    for mut row in theta.rows_mut() {
        row[1] = -row[1];
        row[2] = -row[2];
    }
    HandPose {
        theta,
        trans: [-pose.trans[0], pose.trans[1], pose.trans[2]],
        side: match pose.side {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        },
    }
}

/// Computes world-space joint positions for a pose.
///
/// Rotations accumulate down the parent tree; bone offsets are adjusted by
/// the shape basis when one is present. Left-hand poses evaluate against
/// the X-mirrored template: mirror the pose, run the right-hand chain, and
/// mirror the resulting positions back.
pub fn forward_kinematics<S: Real>(
    pose: &HandPose<S>,
    shape: &HandShape<S>,
    template: &HandTemplate<S>,
) -> Result<JointSet<S>, HandError> {
    let joints = template.joints();
    if pose.theta.nrows() != joints || pose.theta.ncols() != 3 {
        return Err(HandError::DimensionMismatch(format!(
            "pose is {}×{}, template has {} joints",
            pose.theta.nrows(),
            pose.theta.ncols(),
            joints
        )));
    }

    if pose.side == Side::Left {
        let mirrored = mirror_pose(pose);
        let mut joints = forward_kinematics(&mirrored, shape, template)?;
        for mut row in joints.positions.rows_mut() {
            row[0] = -row[0];
        }
        return Ok(joints);
    }

    let offsets = template.shaped_offsets(shape);
    let mut positions = Array2::<S>::zeros((template.output_joints(), 3));
    let mut world_rot: Vec<[[S; 3]; 3]> = Vec::with_capacity(joints);

    // Accumulate joints relative to the wrist and add the translation once
    // at the end, so shifting `trans` shifts every joint exactly.
    for j in 0..joints {
        let angles = [pose.theta[[j, 0]], pose.theta[[j, 1]], pose.theta[[j, 2]]];
        let local = euler_to_matrix(angles);
        if j == 0 {
            world_rot.push(local);
        } else {
            let p = template.parent[j];
            let rotated = mat_vec(&world_rot[p], &offsets[j]);
            for k in 0..3 {
                positions[[j, k]] = positions[[p, k]] + rotated[k];
            }
            world_rot.push(mat_mul(&world_rot[p], &local));
        }
    }

    for (i, (&tp, off)) in template
        .tip_parent
        .iter()
        .zip(&template.tip_offsets)
        .enumerate()
    {
        let rotated = mat_vec(&world_rot[tp], off);
        for k in 0..3 {
            positions[[joints + i, k]] = positions[[tp, k]] + rotated[k];
        }
    }

    for mut row in positions.rows_mut() {
        for k in 0..3 {
            row[k] += pose.trans[k];
        }
    }

    Ok(JointSet { positions })
}

/// Per-frame joint accelerations of one hand's motion.
///
/// `accel[[n, j, ..]]` holds the central difference
/// `(x[n+1] − 2x[n] + x[n−1])·fps²` of joint `j`'s FK position; `valid[n]`
/// is true only when frames `n−1`, `n`, `n+1` are all visible.
#[derive(Debug, Clone)]
pub struct AccelSeries<S> {
    pub accel: Array3<S>,
    pub valid: Vec<bool>,
}

impl<S: Real> AccelSeries<S> {
    /// Mean acceleration magnitude per joint over valid frames (zero when
    /// no frame is valid).
    pub fn mean_magnitudes(&self) -> Vec<S> {
        let (frames, joints, _) = self.accel.dim();
        let count = self.valid.iter().filter(|&&v| v).count();
        let mut out = vec![S::zero(); joints];
        if count == 0 {
            return out;
        }
        let denom = real::<S>(count as f64);
        for n in 0..frames {
            if !self.valid[n] {
                continue;
            }
            for (j, slot) in out.iter_mut().enumerate() {
                let a = [
                    self.accel[[n, j, 0]],
                    self.accel[[n, j, 1]],
                    self.accel[[n, j, 2]],
                ];
                *slot += norm3(&a);
            }
        }
        for slot in out.iter_mut() {
            *slot /= denom;
        }
        out
    }
}

/// Central-difference accelerations of FK joint positions over a motion.
///
/// Errors with `TooShort` when the sequence has fewer than 3 frames.
/// Frames adjacent to invisible spans are excluded via the validity mask.
pub fn joint_accelerations<S: Real>(
    motion: &HandMotion<S>,
    side: Side,
    shape: &HandShape<S>,
    template: &HandTemplate<S>,
    fps: f64,
) -> Result<AccelSeries<S>, HandError> {
    let frames = motion.frames();
    if frames < 3 {
        return Err(HandError::TooShort(frames));
    }
    let out_joints = template.output_joints();

    let mut positions = Array3::<S>::zeros((frames, out_joints, 3));
    for n in 0..frames {
        if !motion.visible[n] {
            continue;
        }
        let pose = motion.pose_at_for(n, side);
        let joints = forward_kinematics(&pose, shape, template)?;
        for j in 0..out_joints {
            for k in 0..3 {
                positions[[n, j, k]] = joints.positions[[j, k]];
            }
        }
    }

    let fps2 = real::<S>(fps * fps);
    let two = real::<S>(2.0);
    let mut accel = Array3::<S>::zeros((frames, out_joints, 3));
    let mut valid = vec![false; frames];
    for n in 1..frames - 1 {
        if !(motion.visible[n - 1] && motion.visible[n] && motion.visible[n + 1]) {
            continue;
        }
        valid[n] = true;
        for j in 0..out_joints {
            for k in 0..3 {
                accel[[n, j, k]] = (positions[[n + 1, j, k]] - two * positions[[n, j, k]]
                    + positions[[n - 1, j, k]])
                    * fps2;
            }
        }
    }

    Ok(AccelSeries { accel, valid })
}
