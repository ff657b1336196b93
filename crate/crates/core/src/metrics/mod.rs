//! Benchmark metrics: Fréchet inception distance over embedded double-hand
//! features (FID), per-hand Fréchet gesture distance (FGD), Wasserstein
//! gesture distance between mixture fits (WGD), position distance (PD),
//! and relative joint-acceleration smoothness.

mod embed;
mod gmm;
mod ot;
mod stats;

pub use embed::Embedder;
pub use gmm::{fit_gmm, gmm_log_likelihood, GmmFit, GmmModel, COVARIANCE_FLOOR};
pub use ot::{gmm_w2, transport};
pub use stats::{
    frechet_between_sample_sets, frechet_distance, GaussianStats, PSD_EIGEN_FLOOR,
};

use crate::hand::{joint_accelerations, HandError, HandShape, HandTemplate, Side};
use crate::motion::{HandMotion, MotionSequence};
use crate::real::{real, real_of, Real};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ridge applied wherever a covariance may be rank-deficient.
pub const COVARIANCE_REG: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("covariance is not positive semi-definite")]
    NotPsd,
    #[error("too few samples: got {got}, need at least {needed}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("sequence too short: {0} usable frames")]
    TooShort(usize),
    #[error(transparent)]
    Hand(#[from] HandError),
    #[error("i/o: {0}")]
    Io(String),
}

/// FID over embedded features: both sets are projected through the
/// embedder, summarized as Gaussians (with the standard ridge), and
/// compared with the Fréchet distance.
pub fn compute_fid<S: Real>(
    pred_features: &ArrayView2<S>,
    gt_features: &ArrayView2<S>,
    embedder: &Embedder<S>,
) -> Result<S, MetricError> {
    let pred_z = embedder.embed_all(pred_features)?;
    let gt_z = embedder.embed_all(gt_features)?;
    let reg = real::<S>(COVARIANCE_REG);
    let a = GaussianStats::from_samples(&pred_z.view(), reg)?;
    let b = GaussianStats::from_samples(&gt_z.view(), reg)?;
    frechet_distance(&a, &b)
}

/// FGD: Fréchet distance between Gaussian summaries of raw flattened
/// per-hand gesture sequences (one row per clip).
pub fn fgd<S: Real>(
    pred_sequences: &ArrayView2<S>,
    gt_sequences: &ArrayView2<S>,
) -> Result<S, MetricError> {
    if pred_sequences.ncols() != gt_sequences.ncols() {
        return Err(MetricError::LengthMismatch(format!(
            "flattened sequences have lengths {} and {}",
            pred_sequences.ncols(),
            gt_sequences.ncols()
        )));
    }
    frechet_between_sample_sets(pred_sequences, gt_sequences, real(COVARIANCE_REG))
}

/// WGD: fit a K-component mixture to each gesture sample set (same seed on
/// both sides) and return their 2-Wasserstein distance.
pub fn wgd<S: Real>(
    pred_gestures: &ArrayView2<S>,
    gt_gestures: &ArrayView2<S>,
    k: usize,
    seed: u64,
) -> Result<S, MetricError> {
    let pred_fit = fit_gmm(pred_gestures, k, seed)?;
    let gt_fit = fit_gmm(gt_gestures, k, seed)?;
    gmm_w2(&pred_fit.model, &gt_fit.model)
}

/// PD: mean over frames of the squared Euclidean distance between root
/// positions (each input is N×3).
pub fn position_distance<S: Real>(
    pred_positions: &ArrayView2<S>,
    gt_positions: &ArrayView2<S>,
) -> Result<S, MetricError> {
    if pred_positions.nrows() != gt_positions.nrows() {
        return Err(MetricError::LengthMismatch(format!(
            "position sequences have {} and {} frames",
            pred_positions.nrows(),
            gt_positions.nrows()
        )));
    }
    if pred_positions.nrows() == 0 {
        return Err(MetricError::TooFewSamples { got: 0, needed: 1 });
    }
    let mut acc = S::zero();
    for (p, g) in pred_positions.rows().into_iter().zip(gt_positions.rows()) {
        for (a, b) in p.iter().zip(g.iter()) {
            if !a.is_finite() || !b.is_finite() {
                return Err(MetricError::NonFinite("position sequence".into()));
            }
            let d = *a - *b;
            acc += d * d;
        }
    }
    Ok(acc / real_of::<S>(pred_positions.nrows()))
}

/// Mean acceleration magnitude per joint, pooled over the valid frames of
/// every clip. Errors with `TooShort` when no frame is valid.
pub fn pooled_mean_accel<S: Real>(
    clips: &[&HandMotion<S>],
    side: Side,
    shape: &HandShape<S>,
    template: &HandTemplate<S>,
    fps: f64,
) -> Result<Vec<S>, MetricError> {
    let joints = template.output_joints();
    let mut sums = vec![S::zero(); joints];
    let mut count = 0usize;
    for clip in clips {
        let series = joint_accelerations(clip, side, shape, template, fps)?;
        for (n, &ok) in series.valid.iter().enumerate() {
            if !ok {
                continue;
            }
            count += 1;
            for (j, slot) in sums.iter_mut().enumerate() {
                let a = [
                    series.accel[[n, j, 0]],
                    series.accel[[n, j, 1]],
                    series.accel[[n, j, 2]],
                ];
                *slot += (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            }
        }
    }
    if count == 0 {
        return Err(MetricError::TooShort(0));
    }
    let denom = real_of::<S>(count);
    for s in sums.iter_mut() {
        *s /= denom;
    }
    Ok(sums)
}

/// Smoothness of one hand: `Σ_i |τ̂_i − τ_i|` over that hand's joints,
/// where τ is the mean acceleration magnitude of joint i.
pub fn smoothness_hand<S: Real>(
    pred: &HandMotion<S>,
    gt: &HandMotion<S>,
    side: Side,
    shape: &HandShape<S>,
    template: &HandTemplate<S>,
    fps: f64,
) -> Result<S, MetricError> {
    if pred.frames() != gt.frames() {
        return Err(MetricError::LengthMismatch(format!(
            "sequences have {} and {} frames",
            pred.frames(),
            gt.frames()
        )));
    }
    let tau_pred = pooled_mean_accel(&[pred], side, shape, template, fps)?;
    let tau_gt = pooled_mean_accel(&[gt], side, shape, template, fps)?;
    Ok(tau_pred
        .iter()
        .zip(&tau_gt)
        .fold(S::zero(), |acc, (&a, &b)| acc + (a - b).abs()))
}

/// Smoothness over both hands of aligned sequences.
pub fn smoothness<S: Real>(
    pred: &MotionSequence<S>,
    gt: &MotionSequence<S>,
    shape: &HandShape<S>,
    template: &HandTemplate<S>,
    fps: f64,
) -> Result<S, MetricError> {
    let left = smoothness_hand(&pred.left, &gt.left, Side::Left, shape, template, fps)?;
    let right = smoothness_hand(&pred.right, &gt.right, Side::Right, shape, template, fps)?;
    Ok(left + right)
}

/// Per-hand metric values; absent entries were not requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandMetrics<S> {
    pub fgd: Option<S>,
    pub wgd: Option<S>,
    pub pd: Option<S>,
    pub smoothness: Option<S>,
}

impl<S> Default for HandMetrics<S> {
    fn default() -> Self {
        HandMetrics {
            fgd: None,
            wgd: None,
            pd: None,
            smoothness: None,
        }
    }
}

/// Reproducibility metadata recorded with every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub gmm_components: usize,
    pub latent_dim: usize,
    pub fps: f64,
    pub eval_window_s: f64,
    pub clip_count: usize,
    pub metrics: Vec<String>,
}

/// The benchmark output record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<S> {
    pub fid: Option<S>,
    pub left: HandMetrics<S>,
    pub right: HandMetrics<S>,
    pub meta: ReportMeta,
}

impl<S: Real> MetricReport<S> {
    /// Checks that every present value is finite and non-negative.
    pub fn validate(&self) -> Result<(), MetricError> {
        let check = |name: &str, v: &Option<S>| -> Result<(), MetricError> {
            if let Some(x) = v {
                if !x.is_finite() {
                    return Err(MetricError::NonFinite(name.to_string()));
                }
                if *x < S::zero() {
                    return Err(MetricError::NonFinite(format!("{name} is negative")));
                }
            }
            Ok(())
        };
        check("fid", &self.fid)?;
        for (side, hand) in [("left", &self.left), ("right", &self.right)] {
            check(&format!("{side}.fgd"), &hand.fgd)?;
            check(&format!("{side}.wgd"), &hand.wgd)?;
            check(&format!("{side}.pd"), &hand.pd)?;
            check(&format!("{side}.smoothness"), &hand.smoothness)?;
        }
        Ok(())
    }
}
