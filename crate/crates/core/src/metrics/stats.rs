//! Gaussian summaries and the Fréchet distance between them.

use super::MetricError;
use crate::linalg::{psd_sqrt, symmetric_eigen, symmetrize};
use crate::real::{real, real_of, Real};
use ndarray::{Array1, Array2, ArrayView2};

/// Eigenvalues above this (negative) floor are treated as roundoff and
/// clamped to zero; anything below it means the matrix is not PSD.
pub const PSD_EIGEN_FLOOR: f64 = -1e-8;

/// Mean vector and covariance matrix of a feature distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats<S> {
    pub mean: Array1<S>,
    pub cov: Array2<S>,
}

impl<S: Real> GaussianStats<S> {
    pub fn new(mean: Array1<S>, cov: Array2<S>) -> Result<Self, MetricError> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(MetricError::DimensionMismatch(format!(
                "mean has {} entries but covariance is {}×{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        Ok(GaussianStats {
            cov: symmetrize(&cov.view()),
            mean,
        })
    }

    /// Sample mean and covariance (ddof = 1) with `reg·I` added to the
    /// diagonal. Requires at least two samples.
    pub fn from_samples(samples: &ArrayView2<S>, reg: S) -> Result<Self, MetricError> {
        let n = samples.nrows();
        let d = samples.ncols();
        if n < 2 {
            return Err(MetricError::TooFewSamples {
                got: n,
                needed: 2,
            });
        }
        let mut mean = Array1::<S>::zeros(d);
        for row in samples.rows() {
            mean = mean + row;
        }
        mean = mean / real_of::<S>(n);

        let mut centered = samples.to_owned();
        for mut row in centered.rows_mut() {
            row -= &mean;
        }
        let mut cov = centered.t().dot(&centered) / real_of::<S>(n - 1);
        for i in 0..d {
            cov[[i, i]] += reg;
        }
        Ok(GaussianStats {
            cov: symmetrize(&cov.view()),
            mean,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Squared 2-Wasserstein distance between Gaussians, a.k.a. the Fréchet
/// distance used by the motion-fidelity metrics:
/// `‖μa − μb‖² + Tr(Ca + Cb − 2·(Cb^{1/2}·Ca·Cb^{1/2})^{1/2})`.
///
/// PSD square roots go through symmetric eigendecomposition; eigenvalues
/// in `[−1e-8, 0)` are clamped to zero and anything lower raises `NotPsd`.
pub fn frechet_distance<S: Real>(
    a: &GaussianStats<S>,
    b: &GaussianStats<S>,
) -> Result<S, MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::DimensionMismatch(format!(
            "distributions have dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.mean == b.mean && a.cov == b.cov {
        return Ok(S::zero());
    }

    let floor = real::<S>(PSD_EIGEN_FLOOR);
    check_psd(&a.cov, floor)?;
    let sqrt_b = psd_sqrt(&b.cov.view(), floor).ok_or(MetricError::NotPsd)?;

    let inner = sqrt_b.dot(&a.cov).dot(&sqrt_b);
    let (vals, _) = symmetric_eigen(&symmetrize(&inner.view()).view());
    // The inner matrix is a product of PSD factors; negatives are roundoff.
    let mut sqrt_trace = S::zero();
    for &v in vals.iter() {
        sqrt_trace += v.max(S::zero()).sqrt();
    }

    let mut dmu2 = S::zero();
    for (x, y) in a.mean.iter().zip(b.mean.iter()) {
        let d = *x - *y;
        dmu2 += d * d;
    }
    let trace_a = trace(&a.cov);
    let trace_b = trace(&b.cov);
    Ok((dmu2 + trace_a + trace_b - real::<S>(2.0) * sqrt_trace).max(S::zero()))
}

fn check_psd<S: Real>(cov: &Array2<S>, floor: S) -> Result<(), MetricError> {
    let (vals, _) = symmetric_eigen(&cov.view());
    if vals.iter().any(|&v| v < floor) {
        return Err(MetricError::NotPsd);
    }
    Ok(())
}

fn trace<S: Real>(m: &Array2<S>) -> S {
    let mut acc = S::zero();
    for i in 0..m.nrows() {
        acc += m[[i, i]];
    }
    acc
}

/// Fréchet distance between two sample sets with `reg·I` regularization,
/// computed in the joint row span of the centered samples.
///
/// For n samples in D dimensions the covariances have rank < n, so the
/// D×D eigenproblems collapse onto an r ≤ n_x + n_y dimensional subspace;
/// the complement contributes `reg` per dimension to every trace term.
/// The result equals the direct formula on the full D×D matrices.
pub fn frechet_between_sample_sets<S: Real>(
    x: &ArrayView2<S>,
    y: &ArrayView2<S>,
    reg: S,
) -> Result<S, MetricError> {
    if x.ncols() != y.ncols() {
        return Err(MetricError::DimensionMismatch(format!(
            "sample sets have widths {} and {}",
            x.ncols(),
            y.ncols()
        )));
    }
    for (name, set) in [("first", x), ("second", y)] {
        if set.nrows() < 2 {
            return Err(MetricError::TooFewSamples {
                got: set.nrows(),
                needed: 2,
            });
        }
        if set.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite(format!("{name} sample set")));
        }
    }
    if x == y {
        return Ok(S::zero());
    }

    let d = x.ncols();
    let (mean_x, ax) = centered_scaled(x);
    let (mean_y, ay) = centered_scaled(y);

    let mut dmu2 = S::zero();
    for k in 0..d {
        let v = mean_x[k] - mean_y[k];
        dmu2 += v * v;
    }

    // Trace of each (un-regularized) covariance directly from the rows.
    let tr_x = ax.iter().fold(S::zero(), |acc, &v| acc + v * v);
    let tr_y = ay.iter().fold(S::zero(), |acc, &v| acc + v * v);

    // Joint orthonormal basis of both row spans.
    let mut stacked = Array2::<S>::zeros((ax.nrows() + ay.nrows(), d));
    for (i, row) in ax.rows().into_iter().enumerate() {
        stacked.row_mut(i).assign(&row);
    }
    for (i, row) in ay.rows().into_iter().enumerate() {
        stacked.row_mut(ax.nrows() + i).assign(&row);
    }
    let q = crate::linalg::orthonormal_row_basis(&stacked.view());
    let r = q.nrows();

    let bures = if r == 0 {
        // Both sets are degenerate points; covariances are reg·I exactly.
        real_of::<S>(d) * reg
    } else {
        let px = ax.dot(&q.t()); // n_x × r
        let py = ay.dot(&q.t());
        let mut ca = px.t().dot(&px);
        let mut cb = py.t().dot(&py);
        for i in 0..r {
            ca[[i, i]] += reg;
            cb[[i, i]] += reg;
        }
        let floor = real::<S>(PSD_EIGEN_FLOOR);
        let sqrt_cb = psd_sqrt(&cb.view(), floor).ok_or(MetricError::NotPsd)?;
        let inner = sqrt_cb.dot(&ca).dot(&sqrt_cb);
        let (vals, _) = symmetric_eigen(&symmetrize(&inner.view()).view());
        let mut acc = S::zero();
        for &v in vals.iter() {
            acc += v.max(S::zero()).sqrt();
        }
        acc + real_of::<S>(d - r) * reg
    };

    let total = dmu2 + tr_x + tr_y + real::<S>(2.0) * real_of::<S>(d) * reg
        - real::<S>(2.0) * bures;
    Ok(total.max(S::zero()))
}

/// Mean of the rows plus the centered rows scaled by `1/√(n−1)`, so that
/// `AᵀA` is the ddof-1 sample covariance.
fn centered_scaled<S: Real>(set: &ArrayView2<S>) -> (Array1<S>, Array2<S>) {
    let n = set.nrows();
    let d = set.ncols();
    let mut mean = Array1::<S>::zeros(d);
    for row in set.rows() {
        mean = mean + row;
    }
    mean = mean / real_of::<S>(n);
    let scale = S::one() / real_of::<S>(n - 1).sqrt();
    let mut a = Array2::<S>::zeros((n, d));
    for (i, row) in set.rows().into_iter().enumerate() {
        for k in 0..d {
            a[[i, k]] = (row[k] - mean[k]) * scale;
        }
    }
    (mean, a)
}
