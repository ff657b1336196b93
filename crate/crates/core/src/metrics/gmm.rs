//! Gaussian mixture fitting by expectation-maximization with seeded
//! k-means++ initialization.

use super::stats::GaussianStats;
use super::MetricError;
use crate::linalg::{cholesky, cholesky_logdet};
use crate::real::{real, real_of, Real};
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Ridge added to every covariance diagonal in the M-step, flooring its
/// eigenvalues at this value.
pub const COVARIANCE_FLOOR: f64 = 1e-6;
/// EM stops when the mean log-likelihood improves by less than this.
pub const LL_TOLERANCE: f64 = 1e-6;
/// Iteration cap for the EM loop.
pub const MAX_ITERATIONS: usize = 200;

/// A K-component Gaussian mixture. Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel<S> {
    pub weights: Vec<S>,
    pub components: Vec<GaussianStats<S>>,
}

impl<S: Real> GmmModel<S> {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }
}

/// Fit result: the model plus the mean log-likelihood after every
/// iteration (non-decreasing up to float noise).
#[derive(Debug, Clone)]
pub struct GmmFit<S> {
    pub model: GmmModel<S>,
    pub log_likelihoods: Vec<S>,
    pub converged: bool,
}

/// Fits a K-component full-covariance mixture with EM.
///
/// Means start from seeded k-means++ draws, weights start uniform, and
/// every component covariance starts at the global sample covariance. The
/// run is deterministic given `(samples, k, seed)`.
pub fn fit_gmm<S: Real>(
    samples: &ArrayView2<S>,
    k: usize,
    seed: u64,
) -> Result<GmmFit<S>, MetricError> {
    let n = samples.nrows();
    let d = samples.ncols();
    if k == 0 {
        return Err(MetricError::TooFewSamples { got: 0, needed: 1 });
    }
    if n < k {
        return Err(MetricError::TooFewSamples { got: n, needed: k });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut means = kmeans_pp_centers(samples, k, &mut rng);

    let global = GaussianStats::from_samples(samples, real(COVARIANCE_FLOOR))
        .or_else(|_| single_point_stats(samples))?;
    let mut covs: Vec<Array2<S>> = (0..k).map(|_| global.cov.clone()).collect();
    let mut weights = vec![S::one() / real_of::<S>(k); k];

    let mut log_resp = Array2::<S>::zeros((n, k));
    let mut lls: Vec<S> = Vec::new();
    let mut converged = false;
    let tol = real::<S>(LL_TOLERANCE);

    for _ in 0..MAX_ITERATIONS {
        // E-step.
        let mut chols = Vec::with_capacity(k);
        for cov in &covs {
            let l = cholesky(&cov.view())
                .ok_or_else(|| MetricError::NonFinite("gmm covariance collapsed".into()))?;
            chols.push(l);
        }
        let mut ll_sum = S::zero();
        for (i, row) in samples.rows().into_iter().enumerate() {
            for j in 0..k {
                log_resp[[i, j]] = weights[j].ln()
                    + log_gaussian(&row.to_owned(), &means[j], &chols[j]);
            }
            // log-sum-exp over components.
            let mut max = log_resp[[i, 0]];
            for j in 1..k {
                max = max.max(log_resp[[i, j]]);
            }
            let mut sum = S::zero();
            for j in 0..k {
                sum += (log_resp[[i, j]] - max).exp();
            }
            let lse = max + sum.ln();
            ll_sum += lse;
            for j in 0..k {
                log_resp[[i, j]] -= lse;
            }
        }
        let ll = ll_sum / real_of::<S>(n);
        let done = lls.last().is_some_and(|&prev| (ll - prev).abs() < tol);
        lls.push(ll);
        if done {
            converged = true;
            break;
        }

        // M-step.
        for j in 0..k {
            let mut nk = S::zero();
            let mut mean = Array1::<S>::zeros(d);
            for (i, row) in samples.rows().into_iter().enumerate() {
                let r = log_resp[[i, j]].exp();
                nk += r;
                for c in 0..d {
                    mean[c] += r * row[c];
                }
            }
            let nk_safe = nk.max(real(1e-32));
            for c in 0..d {
                mean[c] /= nk_safe;
            }
            let mut cov = Array2::<S>::zeros((d, d));
            for (i, row) in samples.rows().into_iter().enumerate() {
                let r = log_resp[[i, j]].exp();
                for a in 0..d {
                    let da = row[a] - mean[a];
                    for b in a..d {
                        cov[[a, b]] += r * da * (row[b] - mean[b]);
                    }
                }
            }
            for a in 0..d {
                for b in a..d {
                    let v = cov[[a, b]] / nk_safe;
                    cov[[a, b]] = v;
                    cov[[b, a]] = v;
                }
                cov[[a, a]] += real(COVARIANCE_FLOOR);
            }
            weights[j] = nk / real_of::<S>(n);
            means[j] = mean;
            covs[j] = cov;
        }
        // Guard against drift in the weight simplex.
        let total = weights.iter().fold(S::zero(), |a, &w| a + w);
        for w in weights.iter_mut() {
            *w /= total;
        }
    }

    let components = means
        .into_iter()
        .zip(covs)
        .map(|(mean, cov)| GaussianStats { mean, cov })
        .collect();
    Ok(GmmFit {
        model: GmmModel { weights, components },
        log_likelihoods: lls,
        converged,
    })
}

/// K = 1 shortcut used when all samples are identical: zero covariance
/// plus the floor.
fn single_point_stats<S: Real>(samples: &ArrayView2<S>) -> Result<GaussianStats<S>, MetricError> {
    let d = samples.ncols();
    let mut mean = Array1::<S>::zeros(d);
    for row in samples.rows() {
        mean = mean + row;
    }
    mean = mean / real_of::<S>(samples.nrows());
    let mut cov = Array2::<S>::zeros((d, d));
    for i in 0..d {
        cov[[i, i]] = real(COVARIANCE_FLOOR);
    }
    Ok(GaussianStats { mean, cov })
}

/// Seeded k-means++ center selection.
fn kmeans_pp_centers<S: Real>(
    samples: &ArrayView2<S>,
    k: usize,
    rng: &mut ChaCha12Rng,
) -> Vec<Array1<S>> {
    let n = samples.nrows();
    let mut centers: Vec<Array1<S>> = Vec::with_capacity(k);
    centers.push(samples.row(rng.random_range(0..n)).to_owned());

    let mut dist2 = vec![S::zero(); n];
    while centers.len() < k {
        let newest = centers.last().unwrap();
        let mut total = S::zero();
        for (i, row) in samples.rows().into_iter().enumerate() {
            let mut d2 = S::zero();
            for (x, c) in row.iter().zip(newest.iter()) {
                let d = *x - *c;
                d2 += d * d;
            }
            if centers.len() == 1 {
                dist2[i] = d2;
            } else {
                dist2[i] = dist2[i].min(d2);
            }
            total += dist2[i];
        }
        let idx = if total > S::zero() {
            // Sample proportionally to squared distance.
            let target = real::<S>(rng.random::<f64>()) * total;
            let mut acc = S::zero();
            let mut chosen = n - 1;
            for (i, &w) in dist2.iter().enumerate() {
                acc += w;
                if acc >= target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with existing centers.
            rng.random_range(0..n)
        };
        centers.push(samples.row(idx).to_owned());
    }
    centers
}

fn log_gaussian<S: Real>(x: &Array1<S>, mean: &Array1<S>, chol: &Array2<S>) -> S {
    let d = x.len();
    // Solve L z = (x − mean); the Mahalanobis term is ‖z‖².
    let mut z = vec![S::zero(); d];
    for i in 0..d {
        let mut acc = x[i] - mean[i];
        for j in 0..i {
            acc = acc - chol[[i, j]] * z[j];
        }
        z[i] = acc / chol[[i, i]];
    }
    let maha = z.iter().fold(S::zero(), |a, &v| a + v * v);
    let logdet = cholesky_logdet(chol);
    let log2pi = real::<S>((2.0 * std::f64::consts::PI).ln());
    -real::<S>(0.5) * (real_of::<S>(d) * log2pi + logdet + maha)
}

/// Mean log-likelihood of samples under a fitted mixture.
pub fn gmm_log_likelihood<S: Real>(
    model: &GmmModel<S>,
    samples: &ArrayView2<S>,
) -> Result<S, MetricError> {
    let k = model.k();
    let mut total = S::zero();
    let chols: Vec<Array2<S>> = model
        .components
        .iter()
        .map(|c| {
            cholesky(&c.cov.view())
                .ok_or_else(|| MetricError::NonFinite("gmm covariance not PD".into()))
        })
        .collect::<Result<_, _>>()?;
    for row in samples.rows() {
        let x = row.to_owned();
        let mut max = S::neg_infinity();
        let mut terms = vec![S::zero(); k];
        for j in 0..k {
            terms[j] = model.weights[j].ln()
                + log_gaussian(&x, &model.components[j].mean, &chols[j]);
            max = max.max(terms[j]);
        }
        let mut sum = S::zero();
        for t in terms {
            sum += (t - max).exp();
        }
        total += max + sum.ln();
    }
    Ok(total / real_of::<S>(samples.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn two_cluster_data(n_per: usize, seed: u64) -> Array2<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut xs = Array2::<f64>::zeros((2 * n_per, 1));
        for i in 0..n_per {
            let z: f64 = StandardNormal.sample(&mut rng);
            xs[[i, 0]] = -5.0 + z;
        }
        for i in n_per..2 * n_per {
            let z: f64 = StandardNormal.sample(&mut rng);
            xs[[i, 0]] = 5.0 + z;
        }
        xs
    }

    /// Plain Lloyd k-means (oracle for the component means).
    fn kmeans_oracle(xs: &Array2<f64>, k: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut centers: Vec<f64> = kmeans_pp_centers(&xs.view(), k, &mut rng)
            .into_iter()
            .map(|c| c[0])
            .collect();
        for _ in 0..100 {
            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for row in xs.rows() {
                let x = row[0];
                let mut best = 0;
                for j in 1..k {
                    if (x - centers[j]).abs() < (x - centers[best]).abs() {
                        best = j;
                    }
                }
                sums[best] += x;
                counts[best] += 1;
            }
            for j in 0..k {
                if counts[j] > 0 {
                    centers[j] = sums[j] / counts[j] as f64;
                }
            }
        }
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        centers
    }

    #[test]
    fn k1_recovers_sample_mean_and_covariance() {
        let mut rng = StdRng::seed_from_u64(2);
        let mut xs = Array2::<f64>::zeros((50, 2));
        for v in xs.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let fit = fit_gmm(&xs.view(), 1, 42).unwrap();
        let model = fit.model;
        assert_eq!(model.k(), 1);
        assert_relative_eq!(model.weights[0], 1.0, epsilon = 1e-12);

        // With one component, responsibilities are 1, so EM lands on the
        // population mean/covariance (+ floor) regardless of seed.
        let mean_x: f64 = xs.column(0).iter().sum::<f64>() / 50.0;
        assert_relative_eq!(model.components[0].mean[0], mean_x, epsilon = 1e-9);
        let mut var_x = 0.0;
        for row in xs.rows() {
            var_x += (row[0] - mean_x) * (row[0] - mean_x);
        }
        var_x /= 50.0; // population normalization inside EM
        assert_relative_eq!(
            model.components[0].cov[[0, 0]],
            var_x + COVARIANCE_FLOOR,
            epsilon = 1e-9
        );
    }

    #[test]
    fn two_clusters_recovered_near_plus_minus_five() {
        let xs = two_cluster_data(100, 11);
        let fit = fit_gmm(&xs.view(), 2, 42).unwrap();
        let mut means: Vec<f64> = fit.model.components.iter().map(|c| c.mean[0]).collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((means[0] + 5.0).abs() < 0.2, "low mean {}", means[0]);
        assert!((means[1] - 5.0).abs() < 0.2, "high mean {}", means[1]);

        // Cross-check against an independent k-means run.
        let centers = kmeans_oracle(&xs, 2, 42);
        assert!((means[0] - centers[0]).abs() < 0.15);
        assert!((means[1] - centers[1]).abs() < 0.15);
    }

    #[test]
    fn log_likelihood_is_non_decreasing() {
        let xs = two_cluster_data(60, 3);
        let fit = fit_gmm(&xs.view(), 2, 7).unwrap();
        for pair in fit.log_likelihoods.windows(2) {
            assert!(
                pair[1] + 1e-9 >= pair[0],
                "log-likelihood decreased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        assert!(fit.converged);
    }

    #[test]
    fn too_few_samples_is_rejected() {
        let xs = Array2::<f64>::zeros((3, 2));
        assert!(matches!(
            fit_gmm(&xs.view(), 4, 0),
            Err(MetricError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn fit_is_deterministic_for_fixed_seed() {
        let xs = two_cluster_data(40, 9);
        let a = fit_gmm(&xs.view(), 3, 123).unwrap();
        let b = fit_gmm(&xs.view(), 3, 123).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log_likelihoods, b.log_likelihoods);
    }

    #[test]
    fn identical_samples_fit_without_collapse() {
        let mut xs = Array2::<f64>::zeros((10, 2));
        for i in 0..10 {
            xs[[i, 0]] = 1.0;
            xs[[i, 1]] = -2.0;
        }
        let fit = fit_gmm(&xs.view(), 2, 1).unwrap();
        for c in &fit.model.components {
            assert_relative_eq!(c.mean[0], 1.0, epsilon = 1e-9);
            assert!(c.cov[[0, 0]] >= COVARIANCE_FLOOR * 0.99);
        }
    }
}
