//! Outlier detection and smoothing filters for scalar time series.

use super::PipelineError;
use crate::linalg::cholesky_solve;
use crate::real::{real, real_of, Real};
use ndarray::Array2;

/// MAD floor so a zero-spread window can still flag a deviant sample.
pub const MAD_FLOOR: f64 = 1e-9;
/// Consistency factor between MAD and the standard deviation of a normal.
pub const MAD_SCALE: f64 = 1.4826;

/// Sliding-window median/MAD outlier detector.
///
/// `window` is the total span: each sample is compared against the median
/// of the samples within `window/2` indices on either side (truncated at
/// the series boundaries). A sample is flagged when
/// `|x − median| > nsigma · 1.4826 · MAD`, with the MAD floored at 1e-9.
pub fn hampel_filter<S: Real>(series: &[S], window: usize, nsigma: f64) -> Vec<bool> {
    let present = vec![true; series.len()];
    hampel_filter_masked(series, &present, window, nsigma)
}

/// [`hampel_filter`] over a series with missing samples: absent samples are
/// excluded from every window and never flagged themselves.
pub fn hampel_filter_masked<S: Real>(
    series: &[S],
    present: &[bool],
    window: usize,
    nsigma: f64,
) -> Vec<bool> {
    assert_eq!(series.len(), present.len());
    assert!(window >= 3, "hampel window must be at least 3");
    let n = series.len();
    let half = window / 2;
    let threshold_scale = real::<S>(nsigma * MAD_SCALE);
    let floor = real::<S>(MAD_FLOOR);

    let mut flags = vec![false; n];
    let mut buf: Vec<S> = Vec::with_capacity(window + 1);
    for i in 0..n {
        if !present[i] {
            continue;
        }
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        buf.clear();
        for k in lo..hi {
            if present[k] {
                buf.push(series[k]);
            }
        }
        let med = median_in_place(&mut buf);
        let deviation = (series[i] - med).abs();
        for v in buf.iter_mut() {
            *v = (*v - med).abs();
        }
        let mad = median_in_place(&mut buf).max(floor);
        if deviation > threshold_scale * mad {
            flags[i] = true;
        }
    }
    flags
}

fn median_in_place<S: Real>(buf: &mut [S]) -> S {
    debug_assert!(!buf.is_empty());
    buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        (buf[n / 2 - 1] + buf[n / 2]) * real(0.5)
    }
}

/// Least-squares polynomial smoothing kernels for one window.
///
/// `weights_at(s)` gives the convolution weights that evaluate the fitted
/// polynomial at offset `s` from the window center; `s = 0` is the
/// classic central kernel.
pub struct SavgolKernel<S> {
    half: usize,
    central: Vec<S>,
    edge: Vec<Vec<S>>, // weights for offsets -half..=half
}

impl<S: Real> SavgolKernel<S> {
    pub fn new(order: usize, window: usize) -> Result<Self, PipelineError> {
        if window % 2 == 0 || order >= window {
            return Err(PipelineError::BadWindow { order, window });
        }
        let half = window / 2;
        let terms = order + 1;

        // Normal equations Gram matrix: G[a][b] = Σ_j j^(a+b).
        let mut gram = Array2::<S>::zeros((terms, terms));
        for a in 0..terms {
            for b in 0..terms {
                let mut acc = S::zero();
                for j in -(half as i64)..=(half as i64) {
                    acc += int_pow(real_of::<S>(0) + real(j as f64), a + b);
                }
                gram[[a, b]] = acc;
            }
        }

        let weights_for = |s: i64| -> Vec<S> {
            // Solve G c = e(s), then w_j = Σ_a c_a j^a.
            let mut rhs = vec![S::zero(); terms];
            for (a, slot) in rhs.iter_mut().enumerate() {
                *slot = int_pow(real(s as f64), a);
            }
            let c = cholesky_solve(&gram.view(), &rhs)
                .expect("savgol normal equations are positive definite");
            (-(half as i64)..=(half as i64))
                .map(|j| {
                    let mut w = S::zero();
                    for (a, &ca) in c.iter().enumerate() {
                        w += ca * int_pow(real(j as f64), a);
                    }
                    w
                })
                .collect()
        };

        let central = weights_for(0);
        let edge = (-(half as i64)..=(half as i64)).map(weights_for).collect();
        Ok(SavgolKernel { half, central, edge })
    }

    pub fn central_weights(&self) -> &[S] {
        &self.central
    }

    /// Weights evaluating the window polynomial at offset `s ∈ [-half, half]`.
    pub fn weights_at(&self, s: i64) -> &[S] {
        &self.edge[(s + self.half as i64) as usize]
    }

    pub fn half(&self) -> usize {
        self.half
    }
}

fn int_pow<S: Real>(base: S, exp: usize) -> S {
    let mut acc = S::one();
    for _ in 0..exp {
        acc = acc * base;
    }
    acc
}

/// Smooths a series by local least-squares polynomial fitting.
///
/// Interior samples are the central-kernel convolution. Near the ends the
/// polynomial fitted to the first (or last) full window is evaluated at
/// the off-center offsets, so any polynomial of degree ≤ `order` passes
/// through unchanged everywhere. Series shorter than the window are
/// returned unchanged.
pub fn savgol_smooth<S: Real>(
    series: &[S],
    order: usize,
    window: usize,
) -> Result<Vec<S>, PipelineError> {
    let kernel = SavgolKernel::new(order, window)?;
    Ok(savgol_apply(series, &kernel))
}

pub(crate) fn savgol_apply<S: Real>(series: &[S], kernel: &SavgolKernel<S>) -> Vec<S> {
    let n = series.len();
    let half = kernel.half();
    let window = 2 * half + 1;
    if n < window {
        return series.to_vec();
    }
    let mut out = vec![S::zero(); n];
    for (i, slot) in out.iter_mut().enumerate() {
        let (window_start, offset) = if i < half {
            (0, i as i64 - half as i64)
        } else if i + half >= n {
            (n - window, i as i64 - (n - 1 - half) as i64)
        } else {
            (i - half, 0)
        };
        let weights = kernel.weights_at(offset);
        let mut acc = S::zero();
        for (j, &w) in weights.iter().enumerate() {
            acc += w * series[window_start + j];
        }
        *slot = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_series_has_no_outliers() {
        let series = vec![5.0f64; 100];
        let flags = hampel_filter(&series, 20, 3.0);
        assert!(flags.iter().all(|&f| !f));
    }

    #[test]
    fn ramp_with_spike_flags_exactly_the_spike() {
        // Brute-force oracle: recompute window median and MAD per index.
        let mut series: Vec<f64> = (0..100).map(|i| i as f64).collect();
        series[50] = 1000.0;
        let flags = hampel_filter(&series, 20, 3.0);

        for (i, &flag) in flags.iter().enumerate() {
            let lo = i.saturating_sub(10);
            let hi = (i + 11).min(series.len());
            let mut win: Vec<f64> = series[lo..hi].to_vec();
            win.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let med = if win.len() % 2 == 1 {
                win[win.len() / 2]
            } else {
                0.5 * (win[win.len() / 2 - 1] + win[win.len() / 2])
            };
            let mut dev: Vec<f64> = series[lo..hi].iter().map(|x| (x - med).abs()).collect();
            dev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mad = if dev.len() % 2 == 1 {
                dev[dev.len() / 2]
            } else {
                0.5 * (dev[dev.len() / 2 - 1] + dev[dev.len() / 2])
            }
            .max(1e-9);
            let expected = (series[i] - med).abs() > 3.0 * 1.4826 * mad;
            assert_eq!(flag, expected, "disagreement at index {i}");
        }
        let flagged: Vec<usize> = (0..100).filter(|&i| flags[i]).collect();
        assert_eq!(flagged, vec![50]);
    }

    #[test]
    fn zero_mad_window_still_flags_deviant() {
        let mut series = vec![1.0f64; 41];
        series[20] = 1.001;
        let flags = hampel_filter(&series, 20, 3.0);
        assert!(flags[20]);
        assert_eq!(flags.iter().filter(|&&f| f).count(), 1);
    }

    #[test]
    fn masked_hampel_skips_absent_samples() {
        let mut series: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let mut present = vec![true; 50];
        series[10] = 500.0;
        present[11] = false; // absent frames are invisible to the filter
        let flags = hampel_filter_masked(&series, &present, 20, 3.0);
        assert!(flags[10]);
        assert!(!flags[11]);
    }

    #[test]
    fn savgol_kernel_matches_classic_table() {
        // Central kernel for order 3, window 11 is
        // [-36, 9, 44, 69, 84, 89, 84, 69, 44, 9, -36] / 429.
        let kernel = SavgolKernel::<f64>::new(3, 11).unwrap();
        let expected = [-36.0, 9.0, 44.0, 69.0, 84.0, 89.0, 84.0, 69.0, 44.0, 9.0, -36.0];
        for (w, e) in kernel.central_weights().iter().zip(expected) {
            assert_relative_eq!(*w, e / 429.0, epsilon = 1e-12);
        }
        let sum: f64 = kernel.central_weights().iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn savgol_reproduces_cubic_everywhere() {
        let series: Vec<f64> = (0..60)
            .map(|i| {
                let t = i as f64 * 0.1;
                0.3 - 1.2 * t + 0.5 * t * t - 0.07 * t * t * t
            })
            .collect();
        let out = savgol_smooth(&series, 3, 11).unwrap();
        for (a, b) in out.iter().zip(&series) {
            assert_relative_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn savgol_constant_unchanged() {
        let series = vec![2.5f64; 30];
        let out = savgol_smooth(&series, 3, 11).unwrap();
        for v in out {
            assert_relative_eq!(v, 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn savgol_short_series_passes_through() {
        let series = vec![1.0, 5.0, -2.0, 3.0];
        let out = savgol_smooth(&series, 3, 11).unwrap();
        assert_eq!(out, series);
    }

    #[test]
    fn savgol_rejects_bad_windows() {
        assert!(savgol_smooth(&[0.0f64; 20], 3, 10).is_err());
        assert!(savgol_smooth(&[0.0f64; 20], 3, 3).is_err());
    }

    #[test]
    fn savgol_oracle_least_squares_fit() {
        // Independent oracle: fit the window polynomial with an explicit
        // 4×4 Cramer solve and evaluate at the center.
        let series: Vec<f64> = (0..40)
            .map(|i| ((i as f64) * 0.7).sin() + 0.1 * (i as f64))
            .collect();
        let out = savgol_smooth(&series, 3, 11).unwrap();

        let fit_center = |win: &[f64]| -> f64 {
            let m = 5i64;
            let mut a = [[0.0f64; 4]; 4];
            let mut b = [0.0f64; 4];
            for (idx, &y) in win.iter().enumerate() {
                let x = (idx as i64 - m) as f64;
                let xs = [1.0, x, x * x, x * x * x];
                for r in 0..4 {
                    for c in 0..4 {
                        a[r][c] += xs[r] * xs[c];
                    }
                    b[r] += xs[r] * y;
                }
            }
            // Gaussian elimination on the 4×4 system; coefficient 0 is the
            // value at the window center.
            let mut aug = [[0.0f64; 5]; 4];
            for r in 0..4 {
                aug[r][..4].copy_from_slice(&a[r]);
                aug[r][4] = b[r];
            }
            for col in 0..4 {
                let piv = (col..4)
                    .max_by(|&x, &y| aug[x][col].abs().partial_cmp(&aug[y][col].abs()).unwrap())
                    .unwrap();
                aug.swap(col, piv);
                let p = aug[col][col];
                for c in col..5 {
                    aug[col][c] /= p;
                }
                for r in 0..4 {
                    if r != col {
                        let f = aug[r][col];
                        for c in col..5 {
                            aug[r][c] -= f * aug[col][c];
                        }
                    }
                }
            }
            aug[0][4]
        };

        for i in 5..35 {
            let win = &series[i - 5..i + 6];
            assert_relative_eq!(out[i], fit_center(win), epsilon = 1e-9);
        }
    }

    #[test]
    fn repeated_smoothing_contracts_on_noisy_fixture() {
        let series: Vec<f64> = (0..120)
            .map(|i| {
                let t = i as f64;
                (t * 0.3).sin() + if i % 7 == 0 { 0.4 } else { -0.1 }
            })
            .collect();
        let once = savgol_smooth(&series, 3, 11).unwrap();
        let twice = savgol_smooth(&once, 3, 11).unwrap();
        let change = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        assert!(change(&once, &twice) < change(&series, &once));
    }
}
