use nalgebra::{DMatrix, SymmetricEigen};

use crate::models::{Model, ModelKind, ModelSpec};
use crate::numerics::Tensor;
use crate::{Error, Result};

use super::rows_with;

/// Principal directions of the encoded W block of one attribute.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaBasis {
    pub attr: usize,
    /// Unit vectors in the block, by non-increasing variance.
    pub components: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    pub mean: Vec<f64>,
    pub requested: usize,
    /// Every eigenvalue of the sample covariance, descending.
    pub spectrum: Vec<f64>,
}

impl PcaBasis {
    /// Fewer non-degenerate directions than requested.
    pub fn rank_deficient(&self) -> bool {
        self.components.len() < self.requested
    }

    /// Block points `mean + s * c * sqrt(var) * component` for every
    /// component, `c` in {1, 2} and sign `s`, ordered component-major.
    pub fn samples(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(4 * self.components.len());
        for (comp, var) in self.components.iter().zip(&self.variances) {
            for c in [-2.0, -1.0, 1.0, 2.0] {
                let s = c * var.sqrt();
                out.push(self.mean.iter().zip(comp).map(|(m, v)| m + s * v).collect());
            }
        }
        out
    }

    /// [`PcaBasis::samples`] as full W vectors, zero outside the block.
    pub fn sample_points(&self, spec: &ModelSpec) -> Vec<Vec<f64>> {
        let d = spec.w_dim_per_attr;
        self.samples()
            .into_iter()
            .map(|b| {
                let mut w = vec![0.0; spec.w_dim()];
                w[self.attr * d..(self.attr + 1) * d].copy_from_slice(&b);
                w
            })
            .collect()
    }
}

/// Closed-form eigendecomposition of `[[a, b], [b, c]]`: eigenvalues
/// descending with unit eigenvectors.
pub fn eigen_sym2(a: f64, b: f64, c: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (mid + rad, mid - rad);
    if b == 0.0 {
        return if a >= c {
            ([a, c], [[1.0, 0.0], [0.0, 1.0]])
        } else {
            ([c, a], [[0.0, 1.0], [1.0, 0.0]])
        };
    }
    // (l - c, b) and (b, l - a) both solve the first eigenvector; take the longer
    let (u, v) = if (l1 - c).abs() >= (l1 - a).abs() { (l1 - c, b) } else { (b, l1 - a) };
    let n = u.hypot(v);
    let (u, v) = (u / n, v / n);
    ([l1, l2], [[u, v], [-v, u]])
}

/// Symmetric eigendecomposition of a row-major `d x d` matrix: eigenvalues
/// descending, eigenvectors as rows.
pub fn eigen_sym_general(d: usize, m: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, m));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (values, vectors)
}

fn covariance(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = points[0].len();
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        mean.iter_mut().zip(p).for_each(|(m, v)| *m += v / n);
    }
    let mut cov = vec![0.0; d * d];
    for p in points {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= n - 1.0);
    (mean, cov)
}

/// Principal components of `points` by eigendecomposition of the sample
/// covariance. Directions whose variance is negligible next to the largest
/// are dropped, so fewer than `n_components` may come back.
pub fn pca_of_points(attr: usize, points: &[Vec<f64>], n_components: usize) -> Result<PcaBasis> {
    let d = points.first().map_or(0, Vec::len);
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::Shape("PCA needs non-empty points of equal length".into()));
    }
    if n_components == 0 {
        return Err(Error::InvalidArgument("PCA needs at least one component".into()));
    }
    if points.len() < n_components + 1 {
        return Err(Error::Data(format!(
            "{} points cannot support {n_components} principal components",
            points.len()
        )));
    }
    let (mean, cov) = covariance(points);
    let (spectrum, vectors) = if d == 2 {
        let (l, v) = eigen_sym2(cov[0], cov[1], cov[3]);
        (l.to_vec(), v.iter().map(|r| r.to_vec()).collect())
    } else {
        eigen_sym_general(d, &cov)
    };
    let spectrum: Vec<f64> = spectrum.into_iter().map(|l| l.max(0.0)).collect();
    let tol = 1e-12 * spectrum[0].max(f64::MIN_POSITIVE);
    let keep = spectrum.iter().take(n_components).take_while(|&&l| l > tol).count();
    Ok(PcaBasis {
        attr,
        components: vectors.into_iter().take(keep).collect(),
        variances: spectrum[..keep].to_vec(),
        mean,
        requested: n_components,
        spectrum,
    })
}

/// Principal components of the encoded W block `attr` over the examples
/// with that attribute on.
pub fn w_pca(model: &Model, x: &Tensor, y: &Tensor, attr: usize, n_components: usize) -> Result<PcaBasis> {
    if model.kind() != ModelKind::Csvae {
        return Err(Error::KindMismatch(format!("W principal components need a csvae model, got {}", model.kind())));
    }
    let rows = rows_with(y, attr, 1);
    let w = model.encode_batch(&x.select_rows(&rows), Some(&y.select_rows(&rows)))?.w.expect("csvae has W");
    let d = model.spec().w_dim_per_attr;
    let points: Vec<Vec<f64>> = (0..w.rows()).map(|r| w.row(r)[attr * d..(attr + 1) * d].to_vec()).collect();
    if points.is_empty() {
        return Err(Error::Data(format!("no examples with attribute {attr} on")));
    }
    pca_of_points(attr, &points, n_components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    /// Cyclic Jacobi rotations; eigenvalues descending, eigenvectors as rows.
    fn jacobi(d: usize, m: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut a = m.to_vec();
        let mut v = vec![0.0; d * d];
        (0..d).for_each(|i| v[i * d + i] = 1.0);
        for _ in 0..100 {
            for p in 0..d {
                for q in p + 1..d {
                    if a[p * d + q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (2.0 * a[p * d + q]).atan2(a[q * d + q] - a[p * d + p]);
                    let (s, c) = theta.sin_cos();
                    for k in 0..d {
                        let (akp, akq) = (a[k * d + p], a[k * d + q]);
                        a[k * d + p] = c * akp - s * akq;
                        a[k * d + q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let (apk, aqk) = (a[p * d + k], a[q * d + k]);
                        a[p * d + k] = c * apk - s * aqk;
                        a[q * d + k] = s * apk + c * aqk;
                    }
                    for k in 0..d {
                        let (vkp, vkq) = (v[k * d + p], v[k * d + q]);
                        v[k * d + p] = c * vkp - s * vkq;
                        v[k * d + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| a[j * d + j].total_cmp(&a[i * d + i]));
        (
            order.iter().map(|&i| a[i * d + i]).collect(),
            order.iter().map(|&i| (0..d).map(|k| v[k * d + i]).collect()).collect(),
        )
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn cloud(n: usize, sigma: &[f64], seed: u64) -> Vec<Vec<f64>> {
        let mut rng = StreamRng::new(seed, 99, 0);
        (0..n).map(|_| sigma.iter().map(|s| s * rng.normal()).collect()).collect()
    }

    #[test]
    fn both_routes_match_jacobi_oracle() {
        for (d, sigma) in [(2, vec![3.0, 1.0]), (3, vec![2.0, 0.5, 1.2]), (4, vec![1.0, 4.0, 0.3, 2.0])] {
            let pts = cloud(1000, &sigma, d as u64);
            let (_, cov) = covariance(&pts);
            let (ev, evec) = jacobi(d, &cov);
            let b = pca_of_points(0, &pts, d).unwrap();
            for i in 0..d {
                assert!((b.variances[i] - ev[i]).abs() < 1e-8, "{d}: {} vs {}", b.variances[i], ev[i]);
                assert!((dot(&b.components[i], &evec[i]).abs() - 1.0).abs() < 1e-8);
            }
            let (gv, _) = eigen_sym_general(d, &cov);
            for i in 0..d {
                assert!((gv[i] - ev[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn closed_form_agrees_with_general_solver() {
        for (a, b, c) in [(2.0, 0.5, 1.0), (1.0, -3.0, 1.0), (0.0, 1e-9, 5.0), (4.0, 0.0, 7.0), (1.0, 1.0, 1.0)] {
            let (l, v) = eigen_sym2(a, b, c);
            let (gl, gv) = eigen_sym_general(2, &[a, b, b, c]);
            for i in 0..2 {
                assert!((l[i] - gl[i]).abs() < 1e-10);
                assert!((dot(&v[i], &gv[i]).abs() - 1.0).abs() < 1e-8 || (l[0] - l[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn anisotropic_cloud_aligns_with_axes() {
        let b = pca_of_points(0, &cloud(1000, &[3.0, 1.0], 5), 2).unwrap();
        let five_deg = 5f64.to_radians().cos();
        assert!(b.components[0][0].abs() > five_deg);
        assert!(b.components[1][1].abs() > five_deg);
        assert!(b.variances[0] >= b.variances[1]);
        assert!(dot(&b.components[0], &b.components[1]).abs() < 1e-8);
    }

    #[test]
    fn segment_gives_one_direction() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0 + 0.3 * i as f64, 2.0 - 0.4 * i as f64]).collect();
        let b = pca_of_points(1, &pts, 2).unwrap();
        assert!((b.components[0][0] * 0.6 - b.components[0][1] * 0.8).abs() > 0.999);
        assert!(b.spectrum[1].abs() < 1e-10);
        assert!(b.rank_deficient());
        assert_eq!(b.components.len(), 1);
        assert!(pca_of_points(0, &pts[..2], 2).is_err());
    }

    #[test]
    fn samples_sit_on_component_lines() {
        let b = pca_of_points(1, &cloud(200, &[2.0, 0.5], 1), 2).unwrap();
        let s = b.samples();
        assert_eq!(s.len(), 8);
        let off: Vec<f64> = s[3].iter().zip(&b.mean).map(|(p, m)| p - m).collect();
        assert!((dot(&off, &b.components[0]) - 2.0 * b.variances[0].sqrt()).abs() < 1e-12);
        let spec = ModelSpec::vector(ModelKind::Csvae, 3, 2);
        let full = b.sample_points(&spec);
        assert!(full.iter().all(|w| w[0] == 0.0 && w[1] == 0.0 && w.len() == 4));
    }
}
