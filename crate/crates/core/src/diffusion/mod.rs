//! Denoising-diffusion mathematics for the position-guided gesture
//! generator: β/ᾱ schedules, the forward noising process, v-prediction
//! conversions, ancestral sampling with a pluggable conditional denoiser,
//! and the stage-one position losses.

mod tensor_file;

pub use tensor_file::{load_tensor, save_tensor};

use crate::real::{real, real_of, Real};
use ndarray::{Array2, Array3, Array4, ArrayView2};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("bad schedule range: {0}")]
    BadRange(String),
    #[error("step {t} outside schedule of {max} steps")]
    StepOutOfRange { t: usize, max: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

/// β schedule shapes. Only the linear ramp is published for this
/// generator; the enum leaves room for drop-in alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Linear,
}

/// Variance schedule: β_t and the cumulative products ᾱ_t = Π(1 − β_s).
///
/// Steps are 1-based (`t ∈ [1, T]`); internally index 0 holds t = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule<S> {
    betas: Vec<S>,
    alpha_bars: Vec<S>,
}

impl<S: Real> NoiseSchedule<S> {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> Result<S, DiffusionError> {
        self.check_step(t)?;
        Ok(self.betas[t - 1])
    }

    pub fn alpha_bar(&self, t: usize) -> Result<S, DiffusionError> {
        self.check_step(t)?;
        Ok(self.alpha_bars[t - 1])
    }

    fn check_step(&self, t: usize) -> Result<(), DiffusionError> {
        if t == 0 || t > self.steps() {
            return Err(DiffusionError::StepOutOfRange {
                t,
                max: self.steps(),
            });
        }
        Ok(())
    }

    /// Builds a schedule directly from β values (test hook for synthetic
    /// schedules such as ᾱ = 1).
    pub fn from_betas(betas: Vec<S>) -> Result<Self, DiffusionError> {
        if betas.is_empty() {
            return Err(DiffusionError::BadRange("empty schedule".into()));
        }
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut prod = S::one();
        for &b in &betas {
            if !(b >= S::zero() && b < S::one()) {
                return Err(DiffusionError::BadRange(format!("beta {b} outside [0, 1)")));
            }
            prod = prod * (S::one() - b);
            alpha_bars.push(prod);
        }
        Ok(NoiseSchedule { betas, alpha_bars })
    }
}

/// Builds the variance schedule: β linearly interpolated from `beta_start`
/// to `beta_end` over `t_steps` steps, ᾱ by cumulative product.
pub fn build_schedule<S: Real>(
    t_steps: usize,
    beta_start: f64,
    beta_end: f64,
    kind: ScheduleKind,
) -> Result<NoiseSchedule<S>, DiffusionError> {
    if t_steps == 0 {
        return Err(DiffusionError::BadRange("need at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(DiffusionError::BadRange(format!(
            "need 0 < beta_start ≤ beta_end < 1, got {beta_start}..{beta_end}"
        )));
    }
    let betas: Vec<S> = match kind {
        ScheduleKind::Linear => (0..t_steps)
            .map(|i| {
                let frac = if t_steps == 1 {
                    0.0
                } else {
                    i as f64 / (t_steps - 1) as f64
                };
                real(beta_start + (beta_end - beta_start) * frac)
            })
            .collect(),
    };
    NoiseSchedule::from_betas(betas)
}

/// Default published configuration: T = 1000 with the standard linear
/// 1e-4 → 0.02 ramp.
pub fn default_schedule<S: Real>() -> NoiseSchedule<S> {
    build_schedule(1000, 1e-4, 0.02, ScheduleKind::Linear).expect("default schedule is valid")
}

/// A gesture sample: frames × hands(2) × joints × 3 Euler angles.
pub type GestureTensor<S> = Array4<S>;

/// Conditioning inputs passed through to the denoiser untouched: gesture
/// features `f_g` (N×C) and per-hand guidance positions `P` (N×2×3). This
/// module only checks frame alignment; interpretation belongs to the
/// networks that produce and consume them.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning<S> {
    pub gesture_features: Array2<S>,
    pub positions: Array3<S>,
}

impl<S: Real> Conditioning<S> {
    /// All-zero conditioning for a clip of `frames` frames.
    pub fn zeros(frames: usize, feature_dim: usize) -> Self {
        Conditioning {
            gesture_features: Array2::zeros((frames, feature_dim)),
            positions: Array3::zeros((frames, 2, 3)),
        }
    }

    pub fn frames(&self) -> usize {
        self.gesture_features.nrows()
    }
}

/// Output parameterization a denoiser declares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    X0,
    Epsilon,
    V,
}

/// A conditional denoiser: maps (noisy sample, step, conditioning) to a
/// prediction in its declared parameterization. Output shape must equal
/// the input sample shape.
pub trait Denoiser<S> {
    fn parameterization(&self) -> Parameterization;
    fn predict(&self, sample: &GestureTensor<S>, t: usize, cond: &Conditioning<S>)
        -> GestureTensor<S>;
}

/// Reference denoiser that always returns a stored clean sample.
pub struct OracleDenoiser<S> {
    pub x0: GestureTensor<S>,
}

impl<S: Real> Denoiser<S> for OracleDenoiser<S> {
    fn parameterization(&self) -> Parameterization {
        Parameterization::X0
    }

    fn predict(&self, _: &GestureTensor<S>, _: usize, _: &Conditioning<S>) -> GestureTensor<S> {
        self.x0.clone()
    }
}

/// Reference denoiser that predicts an all-zero clean sample.
pub struct ZeroDenoiser;

impl<S: Real> Denoiser<S> for ZeroDenoiser {
    fn parameterization(&self) -> Parameterization {
        Parameterization::X0
    }

    fn predict(&self, sample: &GestureTensor<S>, _: usize, _: &Conditioning<S>) -> GestureTensor<S> {
        GestureTensor::zeros(sample.raw_dim())
    }
}

/// Forward process: draws Θ_t ~ q(Θ_t | Θ_0) as `√ᾱ_t·x0 + √(1−ᾱ_t)·noise`.
pub fn q_sample<S: Real>(
    x0: &GestureTensor<S>,
    t: usize,
    noise: &GestureTensor<S>,
    sched: &NoiseSchedule<S>,
) -> Result<GestureTensor<S>, DiffusionError> {
    if x0.raw_dim() != noise.raw_dim() {
        return Err(DiffusionError::ShapeMismatch(format!(
            "sample {:?} vs noise {:?}",
            x0.shape(),
            noise.shape()
        )));
    }
    let ab = sched.alpha_bar(t)?;
    let signal = ab.sqrt();
    let sigma = (S::one() - ab).sqrt();
    Ok(x0 * signal + noise * sigma)
}

/// Velocity target: `v = √ᾱ_t·ε − √(1−ᾱ_t)·x0`.
pub fn v_convert<S: Real>(
    x0: &GestureTensor<S>,
    noise: &GestureTensor<S>,
    t: usize,
    sched: &NoiseSchedule<S>,
) -> Result<GestureTensor<S>, DiffusionError> {
    if x0.raw_dim() != noise.raw_dim() {
        return Err(DiffusionError::ShapeMismatch(format!(
            "sample {:?} vs noise {:?}",
            x0.shape(),
            noise.shape()
        )));
    }
    let ab = sched.alpha_bar(t)?;
    Ok(noise * ab.sqrt() - x0 * (S::one() - ab).sqrt())
}

/// Inverts v-prediction: `x0 = √ᾱ_t·x_t − √(1−ᾱ_t)·v`.
pub fn x0_from_v<S: Real>(
    v: &GestureTensor<S>,
    x_t: &GestureTensor<S>,
    t: usize,
    sched: &NoiseSchedule<S>,
) -> Result<GestureTensor<S>, DiffusionError> {
    if v.raw_dim() != x_t.raw_dim() {
        return Err(DiffusionError::ShapeMismatch(format!(
            "v {:?} vs sample {:?}",
            v.shape(),
            x_t.shape()
        )));
    }
    let ab = sched.alpha_bar(t)?;
    Ok(x_t * ab.sqrt() - v * (S::one() - ab).sqrt())
}

/// Recovers x0 from a noise prediction: `x0 = (x_t − √(1−ᾱ_t)·ε)/√ᾱ_t`.
pub fn x0_from_epsilon<S: Real>(
    eps: &GestureTensor<S>,
    x_t: &GestureTensor<S>,
    t: usize,
    sched: &NoiseSchedule<S>,
) -> Result<GestureTensor<S>, DiffusionError> {
    if eps.raw_dim() != x_t.raw_dim() {
        return Err(DiffusionError::ShapeMismatch(format!(
            "epsilon {:?} vs sample {:?}",
            eps.shape(),
            x_t.shape()
        )));
    }
    let ab = sched.alpha_bar(t)?;
    Ok((x_t - &(eps * (S::one() - ab).sqrt())) / ab.sqrt())
}

/// Normalizes any declared parameterization to an x0 prediction.
pub fn prediction_to_x0<S: Real>(
    prediction: &GestureTensor<S>,
    param: Parameterization,
    x_t: &GestureTensor<S>,
    t: usize,
    sched: &NoiseSchedule<S>,
) -> Result<GestureTensor<S>, DiffusionError> {
    match param {
        Parameterization::X0 => {
            if prediction.raw_dim() != x_t.raw_dim() {
                return Err(DiffusionError::ShapeMismatch(format!(
                    "prediction {:?} vs sample {:?}",
                    prediction.shape(),
                    x_t.shape()
                )));
            }
            Ok(prediction.clone())
        }
        Parameterization::Epsilon => x0_from_epsilon(prediction, x_t, t, sched),
        Parameterization::V => x0_from_v(prediction, x_t, t, sched),
    }
}

/// Ancestral DDPM sampling from seeded Gaussian noise.
///
/// When `steps < T` a uniformly strided sub-schedule
/// `τ_k = ⌊(k+1)·T/steps⌋` is used and the transition variances are
/// re-derived from the ᾱ gaps; `steps = T` reproduces the full schedule
/// exactly. Denoiser outputs are converted to x0 form internally, and the
/// reverse step uses the posterior variance
/// `β̃ = (1 − ᾱ_prev)/(1 − ᾱ_t)·β_eff`.
pub fn ddpm_sample<S: Real>(
    denoiser: &dyn Denoiser<S>,
    sched: &NoiseSchedule<S>,
    cond: &Conditioning<S>,
    steps: usize,
    seed: u64,
    frames: usize,
    joints: usize,
) -> Result<GestureTensor<S>, DiffusionError> {
    let t_max = sched.steps();
    if steps == 0 || steps > t_max {
        return Err(DiffusionError::StepOutOfRange {
            t: steps,
            max: t_max,
        });
    }
    if cond.frames() != frames || cond.positions.dim() != (frames, 2, 3) {
        return Err(DiffusionError::ShapeMismatch(format!(
            "conditioning covers {} frames (positions {:?}), sample has {frames}",
            cond.frames(),
            cond.positions.shape()
        )));
    }

    let timesteps: Vec<usize> = (0..steps).map(|k| ((k + 1) * t_max) / steps).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let shape = (frames, 2, joints, 3);
    let mut x = random_normal::<S>(shape, &mut rng);

    for k in (0..steps).rev() {
        let t = timesteps[k];
        let ab_t = sched.alpha_bar(t)?;
        let ab_prev = if k > 0 {
            sched.alpha_bar(timesteps[k - 1])?
        } else {
            S::one()
        };
        let prediction = denoiser.predict(&x, t, cond);
        let x0 = prediction_to_x0(&prediction, denoiser.parameterization(), &x, t, sched)?;
        if x0.raw_dim() != x.raw_dim() {
            return Err(DiffusionError::ShapeMismatch(format!(
                "denoiser returned {:?} for sample {:?}",
                x0.shape(),
                x.shape()
            )));
        }

        let alpha_eff = ab_t / ab_prev;
        let beta_eff = S::one() - alpha_eff;
        let one_minus_ab_t = S::one() - ab_t;
        let coef_x0 = ab_prev.sqrt() * beta_eff / one_minus_ab_t;
        let coef_xt = alpha_eff.sqrt() * (S::one() - ab_prev) / one_minus_ab_t;
        let mut mean = &x0 * coef_x0 + &x * coef_xt;
        if k > 0 {
            let var = (S::one() - ab_prev) / one_minus_ab_t * beta_eff;
            let sigma = var.max(S::zero()).sqrt();
            let z = random_normal::<S>(shape, &mut rng);
            mean = mean + z * sigma;
        }
        x = mean;
    }
    Ok(x)
}

fn random_normal<S: Real>(
    shape: (usize, usize, usize, usize),
    rng: &mut ChaCha12Rng,
) -> GestureTensor<S> {
    let len = shape.0 * shape.1 * shape.2 * shape.3;
    let data: Vec<S> = (0..len)
        .map(|_| real::<S>(StandardNormal.sample(rng)))
        .collect();
    Array4::from_shape_vec(shape, data).expect("shape matches data length")
}

/// Position loss `L_p`: mean absolute error over all coordinates.
pub fn loss_position<S: Real>(
    pred: &ArrayView2<S>,
    truth: &ArrayView2<S>,
) -> Result<S, DiffusionError> {
    if pred.dim() != truth.dim() {
        return Err(DiffusionError::LengthMismatch(format!(
            "position arrays are {:?} and {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let count = pred.len();
    if count == 0 {
        return Err(DiffusionError::LengthMismatch("empty positions".into()));
    }
    let mut acc = S::zero();
    for (a, b) in pred.iter().zip(truth.iter()) {
        acc += (*a - *b).abs();
    }
    Ok(acc / real_of::<S>(count))
}

/// Velocity loss `L_v`: mean L2 norm of the frame-difference residuals
/// `(P̂_n − P̂_{n−1}) − (P_n − P_{n−1})` over frames n ≥ 2.
pub fn loss_velocity<S: Real>(
    pred: &ArrayView2<S>,
    truth: &ArrayView2<S>,
) -> Result<S, DiffusionError> {
    if pred.dim() != truth.dim() {
        return Err(DiffusionError::LengthMismatch(format!(
            "position arrays are {:?} and {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let n = pred.nrows();
    if n < 2 {
        return Err(DiffusionError::LengthMismatch(format!(
            "velocity loss needs at least 2 frames, got {n}"
        )));
    }
    let d = pred.ncols();
    let mut acc = S::zero();
    for i in 1..n {
        let mut norm2 = S::zero();
        for k in 0..d {
            let dp = pred[[i, k]] - pred[[i - 1, k]];
            let dt = truth[[i, k]] - truth[[i - 1, k]];
            let r = dp - dt;
            norm2 += r * r;
        }
        acc += norm2.sqrt();
    }
    Ok(acc / real_of::<S>(n - 1))
}
