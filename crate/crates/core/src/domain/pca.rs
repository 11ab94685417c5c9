//! Principal-component reduction of POI sector counts.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::Tensor;

use super::DomainError;

/// Fitted PCA basis: column means, leading components (d × p, orthonormal
/// columns) and all eigenvalues in descending order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// Row-major d × p component matrix.
    pub components: Tensor,
    pub eigenvalues: Vec<f64>,
    pub explained_variance: Vec<f64>,
}

impl PcaBasis {
    pub fn reduced_dim(&self) -> usize {
        self.components.shape()[1]
    }

    /// Projects rows of `counts` (n × d) onto the fitted components.
    pub fn project(&self, counts: &Tensor) -> Result<Tensor, DomainError> {
        let d = self.mean.len();
        if counts.rank() != 2 || counts.shape()[1] != d {
            return Err(DomainError::Invalid {
                what: "pca input",
                detail: format!("expected {} columns, got shape {:?}", d, counts.shape()),
            });
        }
        let n = counts.shape()[0];
        let p = self.reduced_dim();
        let mut out = Tensor::zeros(vec![n, p]);
        for i in 0..n {
            for j in 0..p {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += (counts.at2(i, k) - self.mean[k]) * self.components.at2(k, j);
                }
                out.set2(i, j, acc);
            }
        }
        Ok(out)
    }
}

/// Symmetric eigendecomposition of the covariance matrix; keeps the smallest
/// number of leading components whose cumulative explained variance reaches
/// `target_variance`.
pub fn pca_reduce(counts: &Tensor, target_variance: f64) -> Result<(Tensor, PcaBasis), DomainError> {
    if counts.rank() != 2 {
        return Err(DomainError::Invalid {
            what: "pca input",
            detail: format!("expected 2-D, got shape {:?}", counts.shape()),
        });
    }
    let (n, d) = (counts.shape()[0], counts.shape()[1]);
    if n < 2 {
        return Err(DomainError::TooFewRows { rows: n });
    }
    if !(target_variance > 0.0 && target_variance <= 1.0) {
        return Err(DomainError::Invalid {
            what: "target_variance",
            detail: format!("{target_variance} outside (0, 1]"),
        });
    }

    let mean: Vec<f64> = (0..d)
        .map(|c| (0..n).map(|r| counts.at2(r, c)).sum::<f64>() / n as f64)
        .collect();
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut acc = 0.0;
            for r in 0..n {
                acc += (counts.at2(r, a) - mean[a]) * (counts.at2(r, b) - mean[b]);
            }
            let v = acc / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|i| {
            let val = eig.eigenvalues[i].max(0.0);
            let vec = (0..d).map(|r| eig.eigenvectors[(r, i)]).collect();
            (val, vec)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("eigenvalues are finite"));

    let total: f64 = pairs.iter().map(|p| p.0).sum();
    let explained: Vec<f64> = if total > 0.0 {
        pairs.iter().map(|p| p.0 / total).collect()
    } else {
        vec![0.0; d]
    };
    let mut p = 1;
    let mut cum = explained[0];
    while cum + 1e-15 < target_variance && p < d {
        cum += explained[p];
        p += 1;
    }

    let mut components = Tensor::zeros(vec![d, p]);
    for j in 0..p {
        for r in 0..d {
            components.set2(r, j, pairs[j].1[r]);
        }
    }
    let basis = PcaBasis {
        mean,
        components,
        eigenvalues: pairs.iter().map(|x| x.0).collect(),
        explained_variance: explained,
    };
    let reduced = basis.project(counts)?;
    Ok((reduced, basis))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed.wrapping_add(0x9E3779B97F4A7C15);
        move || {
            s = s.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn rank_one_data_needs_one_component() {
        // points exactly on a line through the origin
        let m = Tensor::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![-1.0, -2.0, -3.0],
            vec![0.5, 1.0, 1.5],
        ])
        .unwrap();
        let (reduced, basis) = pca_reduce(&m, 0.9999).unwrap();
        assert_eq!(basis.reduced_dim(), 1);
        assert_eq!(reduced.shape(), &[4, 1]);
        assert!(basis.explained_variance[0] > 1.0 - 1e-12);
    }

    #[test]
    fn full_rank_reconstruction_error_tiny() {
        let mut r = rng(3);
        let m = Tensor::matrix(20, 10, (0..200).map(|_| r() * 5.0).collect()).unwrap();
        let (reduced, basis) = pca_reduce(&m, 1.0).unwrap();
        let p = basis.reduced_dim();
        assert_eq!(p, 10);
        // reconstruct: x = mean + scores @ components^T
        for i in 0..20 {
            for k in 0..10 {
                let mut acc = basis.mean[k];
                for j in 0..p {
                    acc += reduced.at2(i, j) * basis.components.at2(k, j);
                }
                assert!((acc - m.at2(i, k)).abs() < 1e-9, "({i},{k})");
            }
        }
    }

    #[test]
    fn explained_variance_matches_dense_eigen_oracle() {
        let mut r = rng(11);
        let (n, d) = (50, 12);
        let m = Tensor::matrix(n, d, (0..n * d).map(|_| r() * 3.0 - 1.0).collect()).unwrap();
        let (_, basis) = pca_reduce(&m, 0.9).unwrap();

        // brute-force oracle: Jacobi eigenvalue iteration on the covariance
        let mean: Vec<f64> = (0..d)
            .map(|c| (0..n).map(|row| m.at2(row, c)).sum::<f64>() / n as f64)
            .collect();
        let mut a = vec![vec![0.0; d]; d];
        for p in 0..d {
            for q in 0..d {
                let mut acc = 0.0;
                for row in 0..n {
                    acc += (m.at2(row, p) - mean[p]) * (m.at2(row, q) - mean[q]);
                }
                a[p][q] = acc / (n - 1) as f64;
            }
        }
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..d {
                for q in (p + 1)..d {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    if a[p][q].abs() < 1e-18 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut oracle: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
        oracle.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let total: f64 = oracle.iter().sum();
        for (got, want) in basis.explained_variance.iter().zip(oracle.iter().map(|v| v / total)) {
            assert!((got - want).abs() < 1e-8, "got {got} want {want}");
        }
    }

    #[test]
    fn components_orthonormal_and_eigenvalues_sorted() {
        let mut r = rng(5);
        let m = Tensor::matrix(30, 6, (0..180).map(|_| r()).collect()).unwrap();
        let (_, basis) = pca_reduce(&m, 0.95).unwrap();
        let p = basis.reduced_dim();
        let d = 6;
        for i in 0..p {
            for j in 0..p {
                let dot: f64 = (0..d).map(|k| basis.components.at2(k, i) * basis.components.at2(k, j)).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
        for w in basis.eigenvalues.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        let s: f64 = basis.explained_variance.iter().sum();
        assert!(s <= 1.0 + 1e-9);
    }

    #[test]
    fn one_row_rejected() {
        let m = Tensor::matrix(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(pca_reduce(&m, 0.9), Err(DomainError::TooFewRows { rows: 1 })));
    }
}
