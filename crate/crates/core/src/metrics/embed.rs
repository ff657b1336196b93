//! Deterministic PCA embedder: the linear optimum of the auto-encoder
//! family, used to project double-hand motion features for FID. The
//! embedder is pluggable — an externally trained linear map can be loaded
//! from the same file format.

use super::MetricError;
use crate::linalg::symmetric_eigen;
use crate::real::{real, real_of, Real};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Linear embedding: `z = B·(x − mean)` with orthonormal rows `B`.
///
/// The dims header is stored explicitly so files are self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedder<S> {
    pub latent_dim: usize,
    pub dim: usize,
    pub mean: Vec<S>,
    /// Row-major L×D basis with orthonormal rows.
    pub basis: Vec<Vec<S>>,
}

impl<S: Real> Embedder<S> {
    /// Fits a PCA basis on reference features (rows are samples).
    ///
    /// Deterministic given input order: eigenvectors are sorted by
    /// descending eigenvalue and each basis row is sign-fixed so its
    /// largest-magnitude entry is positive. When the feature dimension
    /// exceeds the sample count the eigenproblem is solved on the Gram
    /// matrix, which yields the same nonzero spectrum.
    pub fn fit(reference: &ArrayView2<S>, latent_dim: usize) -> Result<Self, MetricError> {
        let n = reference.nrows();
        let d = reference.ncols();
        if n <= latent_dim {
            return Err(MetricError::TooFewSamples {
                got: n,
                needed: latent_dim + 1,
            });
        }

        let mut mean = Array1::<S>::zeros(d);
        for row in reference.rows() {
            mean = mean + row;
        }
        mean = mean / real_of::<S>(n);
        let mut centered = Array2::<S>::zeros((n, d));
        for (i, row) in reference.rows().into_iter().enumerate() {
            for k in 0..d {
                centered[[i, k]] = row[k] - mean[k];
            }
        }
        let denom = real_of::<S>(n - 1);

        let mut basis_rows: Vec<Vec<S>> = Vec::with_capacity(latent_dim);
        if d <= n {
            let cov = centered.t().dot(&centered) / denom;
            let (_, vecs) = symmetric_eigen(&cov.view());
            for l in 0..latent_dim {
                basis_rows.push((0..d).map(|i| vecs[[i, l]]).collect());
            }
        } else {
            let gram = centered.dot(&centered.t()) / denom;
            let (vals, vecs) = symmetric_eigen(&gram.view());
            let floor = real::<S>(1e-12) * vals[0].max(S::zero()).max(real(1e-30));
            for l in 0..latent_dim {
                if vals[l] <= floor {
                    return Err(MetricError::TooFewSamples {
                        got: l,
                        needed: latent_dim,
                    });
                }
                let u = vecs.column(l);
                let mut v = vec![S::zero(); d];
                for (i, &ui) in u.iter().enumerate() {
                    for k in 0..d {
                        v[k] += centered[[i, k]] * ui;
                    }
                }
                let norm = v.iter().fold(S::zero(), |a, &x| a + x * x).sqrt();
                for x in v.iter_mut() {
                    *x /= norm;
                }
                basis_rows.push(v);
            }
        }

        // Sign convention: largest-magnitude entry of each row positive.
        for row in basis_rows.iter_mut() {
            let mut best = 0usize;
            for (i, v) in row.iter().enumerate() {
                if v.abs() > row[best].abs() {
                    best = i;
                }
            }
            if row[best] < S::zero() {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
        }

        Ok(Embedder {
            latent_dim,
            dim: d,
            mean: mean.to_vec(),
            basis: basis_rows,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn embed(&self, x: &ArrayView1<S>) -> Result<Array1<S>, MetricError> {
        if x.len() != self.input_dim() {
            return Err(MetricError::DimensionMismatch(format!(
                "feature has dim {}, embedder expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut z = Array1::<S>::zeros(self.latent_dim());
        for (l, row) in self.basis.iter().enumerate() {
            let mut acc = S::zero();
            for (k, &b) in row.iter().enumerate() {
                acc += b * (x[k] - self.mean[k]);
            }
            z[l] = acc;
        }
        Ok(z)
    }

    pub fn embed_all(&self, xs: &ArrayView2<S>) -> Result<Array2<S>, MetricError> {
        let mut out = Array2::<S>::zeros((xs.nrows(), self.latent_dim()));
        for (i, row) in xs.rows().into_iter().enumerate() {
            let z = self.embed(&row)?;
            out.row_mut(i).assign(&z);
        }
        Ok(out)
    }

    pub fn reconstruct(&self, z: &ArrayView1<S>) -> Array1<S> {
        let d = self.input_dim();
        let mut x = Array1::<S>::zeros(d);
        for k in 0..d {
            x[k] = self.mean[k];
        }
        for (l, row) in self.basis.iter().enumerate() {
            for (k, &b) in row.iter().enumerate() {
                x[k] += b * z[l];
            }
        }
        x
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string(self).expect("embedder serializes");
        std::fs::write(path, json)
    }

    pub fn load(path: &Path) -> Result<Self, MetricError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MetricError::Io(format!("{}: {e}", path.display())))?;
        let embedder: Embedder<S> = serde_json::from_str(&text)
            .map_err(|e| MetricError::Io(format!("{}: {e}", path.display())))?;
        if embedder.mean.len() != embedder.dim
            || embedder.basis.len() != embedder.latent_dim
            || embedder.basis.iter().any(|r| r.len() != embedder.dim)
        {
            return Err(MetricError::DimensionMismatch(
                "embedder dims header disagrees with its arrays".into(),
            ));
        }
        Ok(embedder)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn reconstruction_error(e: &Embedder<f64>, xs: &Array2<f64>) -> f64 {
        let mut err = 0.0;
        for row in xs.rows() {
            let z = e.embed(&row).unwrap();
            let back = e.reconstruct(&z.view());
            for (a, b) in row.iter().zip(back.iter()) {
                err += (a - b) * (a - b);
            }
        }
        err
    }

    #[test]
    fn line_data_embeds_losslessly_with_one_component() {
        let mut xs = Array2::<f64>::zeros((20, 2));
        for i in 0..20 {
            let t = i as f64 * 0.37 - 2.0;
            xs[[i, 0]] = 3.0 * t + 1.0;
            xs[[i, 1]] = -2.0 * t + 0.5;
        }
        let e = Embedder::fit(&xs.view(), 1).unwrap();
        assert!(reconstruction_error(&e, &xs) < 1e-18);
    }

    #[test]
    fn full_rank_embedding_reconstructs_exactly() {
        let mut rng = StdRng::seed_from_u64(4);
        let mut xs = Array2::<f64>::zeros((40, 6));
        for v in xs.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let e = Embedder::fit(&xs.view(), 6).unwrap();
        assert!(reconstruction_error(&e, &xs) < 1e-16);
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = StdRng::seed_from_u64(5);
        let mut xs = Array2::<f64>::zeros((30, 8));
        for v in xs.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let a = Embedder::fit(&xs.view(), 3).unwrap();
        let b = Embedder::fit(&xs.view(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn basis_rows_are_orthonormal() {
        let mut rng = StdRng::seed_from_u64(6);
        // Exercise the Gram route: more dims than samples.
        let mut xs = Array2::<f64>::zeros((12, 40));
        for v in xs.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let e = Embedder::fit(&xs.view(), 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = e.basis[i].iter().zip(&e.basis[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(dot, want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gram_and_covariance_routes_agree() {
        let mut rng = StdRng::seed_from_u64(14);
        let mut xs = Array2::<f64>::zeros((25, 10));
        for v in xs.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let cov_route = Embedder::fit(&xs.view(), 4).unwrap();
        // Padding with zero columns forces D > n while preserving the
        // meaningful directions.
        let mut padded = Array2::<f64>::zeros((25, 30));
        for i in 0..25 {
            for k in 0..10 {
                padded[[i, k]] = xs[[i, k]];
            }
        }
        let gram_route = Embedder::fit(&padded.view(), 4).unwrap();
        for l in 0..4 {
            for k in 0..10 {
                assert_relative_eq!(
                    gram_route.basis[l][k],
                    cov_route.basis[l][k],
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn too_few_samples_is_rejected() {
        let xs = Array2::<f64>::zeros((5, 8));
        assert!(matches!(
            Embedder::fit(&xs.view(), 5),
            Err(MetricError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn save_load_roundtrip_and_header_check() {
        let mut rng = StdRng::seed_from_u64(91);
        let mut xs = Array2::<f64>::zeros((20, 6));
        for v in xs.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let e = Embedder::fit(&xs.view(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embedder.json");
        e.save(&path).unwrap();
        let back: Embedder<f64> = Embedder::load(&path).unwrap();
        assert_eq!(back, e);

        // Corrupting the dims header is rejected.
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("\"latent_dim\":3", "\"latent_dim\":4");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            Embedder::<f64>::load(&path),
            Err(MetricError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn pca_beats_random_projections() {
        let mut rng = StdRng::seed_from_u64(77);
        let (n, d, l) = (60, 10, 3);
        // Anisotropic data so the choice of subspace matters.
        let mut xs = Array2::<f64>::zeros((n, d));
        for i in 0..n {
            for k in 0..d {
                let scale = 1.0 / (k as f64 + 1.0);
                xs[[i, k]] = rng.random_range(-1.0..1.0) * scale * 3.0;
            }
        }
        let e = Embedder::fit(&xs.view(), l).unwrap();
        let pca_err = reconstruction_error(&e, &xs);

        // Mean used by the random competitors too.
        for trial in 0..100 {
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for _ in 0..l {
                let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                for b in &basis {
                    let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= dot * bi;
                    }
                }
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for vi in v.iter_mut() {
                    *vi /= norm;
                }
                basis.push(v);
            }
            let competitor = Embedder {
                latent_dim: l,
                dim: d,
                mean: e.mean.clone(),
                basis,
            };
            let err = reconstruction_error(&competitor, &xs);
            assert!(
                pca_err <= err + 1e-9,
                "random projection beat PCA on trial {trial}: {err} < {pca_err}"
            );
        }
    }
}
