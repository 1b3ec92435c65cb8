//! Two-component full-covariance GMM and bootstrap frame labeling.
//!
//! Component 0 models [`Class::Taan`], component 1 [`Class::NonTaan`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::Class;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const EIGEN_FLOOR: f64 = 1e-8;
/// Pseudo-count pulling label-based covariances toward the pooled one.
pub const SHRINKAGE_PSEUDO_COUNT: f64 = 4.0;
pub const MAX_BOOTSTRAP_ITERS: usize = 50;

/// Symmetric 3×3 eigendecomposition by cyclic Jacobi rotations.
/// Returns eigenvalues and eigenvectors as columns.
pub fn sym_eigen3(a: &Mat3) -> (Vec3, Mat3) {
    let mut m = *a;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..64 {
        let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
        let scale = m[0][0] * m[0][0] + m[1][1] * m[1][1] + m[2][2] * m[2][2];
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q] == 0.0 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / libm::sqrt(t * t + 1.0);
            let s = t * c;
            for k in 0..3 {
                let (mkp, mkq) = (m[k][p], m[k][q]);
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let (mpk, mqk) = (m[p][k], m[q][k]);
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
            for row in &mut v {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([m[0][0], m[1][1], m[2][2]], v)
}

/// Symmetrizes and clamps eigenvalues to [`EIGEN_FLOOR`]. The flag reports
/// whether any eigenvalue was raised.
pub fn floor_covariance(c: &Mat3) -> (Mat3, bool) {
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = 0.5 * (c[i][j] + c[j][i]);
        }
    }
    let (vals, vecs) = sym_eigen3(&s);
    if vals.iter().all(|&l| l >= EIGEN_FLOOR) {
        return (s, false);
    }
    let l: Vec<f64> = vals.iter().map(|&x| x.max(EIGEN_FLOOR)).collect();
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| vecs[i][k] * l[k] * vecs[j][k]).sum();
        }
    }
    for i in 0..3 {
        for j in 0..i {
            let m = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = m;
            out[j][i] = m;
        }
    }
    (out, true)
}

fn cholesky(c: &Mat3) -> Option<Mat3> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = c[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][i] = libm::sqrt(d);
            } else {
                l[i][j] = (c[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// One Gaussian component with cached Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec3,
    pub cov: Mat3,
}

impl Component {
    fn log_pdf_with(&self, chol: &Mat3, x: &Vec3) -> f64 {
        let d = [x[0] - self.mean[0], x[1] - self.mean[1], x[2] - self.mean[2]];
        let mut y = [0.0; 3];
        for i in 0..3 {
            y[i] = (d[i] - (0..i).map(|k| chol[i][k] * y[k]).sum::<f64>()) / chol[i][i];
        }
        let logdet: f64 = (0..3).map(|i| libm::log(chol[i][i])).sum();
        -0.5 * (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) - logdet - 1.5 * libm::log(2.0 * core::f64::consts::PI)
    }
}

/// Two-component mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm2 {
    components: [Component; 2],
    chol: [Mat3; 2],
}

impl Gmm2 {
    /// Covariances are eigenvalue-floored; weights must lie in (0, 1) and
    /// sum to 1.
    pub fn new(components: [Component; 2]) -> Result<Self> {
        let mut components = components;
        let wsum = components[0].weight + components[1].weight;
        if components.iter().any(|c| !(c.weight > 0.0 && c.weight < 1.0)) || (wsum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("mixture weights must lie in (0,1) and sum to 1"));
        }
        for c in &mut components {
            if c.mean.iter().chain(c.cov.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::invalid("mixture parameters must be finite"));
            }
            c.cov = floor_covariance(&c.cov).0;
        }
        let chol = [
            cholesky(&components[0].cov).ok_or_else(|| Error::Internal("floored covariance not positive definite".into()))?,
            cholesky(&components[1].cov).ok_or_else(|| Error::Internal("floored covariance not positive definite".into()))?,
        ];
        Ok(Gmm2 { components, chol })
    }

    pub fn components(&self) -> &[Component; 2] {
        &self.components
    }

    fn log_joint(&self, x: &Vec3) -> [f64; 2] {
        [0, 1].map(|k| libm::log(self.components[k].weight) + self.components[k].log_pdf_with(&self.chol[k], x))
    }

    /// Component responsibilities for one point.
    pub fn posterior(&self, x: &Vec3) -> [f64; 2] {
        let lj = self.log_joint(x);
        let m = lj[0].max(lj[1]);
        let e = [libm::exp(lj[0] - m), libm::exp(lj[1] - m)];
        let s = e[0] + e[1];
        [e[0] / s, e[1] / s]
    }

    /// Argmax class; ties go to component 0.
    pub fn classify(&self, x: &Vec3) -> Class {
        let lj = self.log_joint(x);
        if lj[0] >= lj[1] {
            Class::Taan
        } else {
            Class::NonTaan
        }
    }

    pub fn log_likelihood(&self, points: &[Vec3]) -> f64 {
        points
            .iter()
            .map(|x| {
                let lj = self.log_joint(x);
                let m = lj[0].max(lj[1]);
                m + libm::log(libm::exp(lj[0] - m) + libm::exp(lj[1] - m))
            })
            .sum()
    }
}

fn mean_cov(points: &[Vec3], weights: &[f64]) -> (f64, Vec3, Mat3) {
    let n: f64 = weights.iter().sum();
    let mut mu = [0.0; 3];
    for (x, &w) in points.iter().zip(weights) {
        for d in 0..3 {
            mu[d] += w * x[d];
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let mut c = [[0.0; 3]; 3];
    for (x, &w) in points.iter().zip(weights) {
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += w * (x[i] - mu[i]) * (x[j] - mu[j]);
            }
        }
    }
    c.iter_mut().flatten().for_each(|v| *v /= n);
    (n, mu, c)
}

/// Per-class sample statistics from (possibly sparse) labels. Each class
/// covariance is shrunk toward the pooled covariance of all points with
/// [`SHRINKAGE_PSEUDO_COUNT`] pseudo-observations, which keeps tiny seeds
/// full-rank.
pub fn gmm_from_labels(points: &[Vec3], labels: &[Option<Class>]) -> Result<Gmm2> {
    if points.len() != labels.len() {
        return Err(Error::invalid("one label slot per point required"));
    }
    let counts = [Class::Taan, Class::NonTaan].map(|c| labels.iter().filter(|&&l| l == Some(c)).count());
    if counts.contains(&0) {
        return Err(Error::invalid("both classes must be labeled"));
    }
    let (_, _, global) = mean_cov(points, &vec![1.0; points.len()]);
    let total = (counts[0] + counts[1]) as f64;
    let comps = [Class::Taan, Class::NonTaan].map(|c| {
        let w: Vec<f64> = labels.iter().map(|&l| if l == Some(c) { 1.0 } else { 0.0 }).collect();
        let (n, mean, cov) = mean_cov(points, &w);
        let k = SHRINKAGE_PSEUDO_COUNT;
        let mut shrunk = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                shrunk[i][j] = (n * cov[i][j] + k * global[i][j]) / (n + k);
            }
        }
        Component {
            weight: n / total,
            mean,
            cov: shrunk,
        }
    });
    let mut comps = comps;
    // keep weights strictly inside (0, 1)
    for c in &mut comps {
        c.weight = c.weight.clamp(1e-12, 1.0 - 1e-12);
    }
    let s = comps[0].weight + comps[1].weight;
    comps.iter_mut().for_each(|c| c.weight /= s);
    Gmm2::new(comps)
}

/// EM starting point.
#[derive(Debug, Clone, Copy)]
pub enum GmmInit<'a> {
    Model(&'a Gmm2),
    Labels(&'a [Option<Class>]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// A component lost its support or needed eigenvalue flooring.
    ConvergedDegenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub model: Gmm2,
    /// Log-likelihood of the initial model followed by one entry per iteration.
    pub ll_trace: Vec<f64>,
    pub status: FitStatus,
}

/// Standard EM. Stops when |Δll| < `tol` or after `max_iter` iterations.
/// A decrease of the log-likelihood beyond rounding is reported as an
/// internal error unless covariance flooring intervened.
pub fn gmm_fit_em(points: &[Vec3], init: GmmInit<'_>, max_iter: usize, tol: f64) -> Result<EmFit> {
    if points.len() < 4 {
        return Err(Error::invalid("EM needs at least 4 points"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("feature values must be finite"));
    }
    let mut model = match init {
        GmmInit::Model(m) => m.clone(),
        GmmInit::Labels(l) => gmm_from_labels(points, l)?,
    };
    let mut ll = model.log_likelihood(points);
    let mut trace = vec![ll];
    let mut degenerate = false;
    let mut status = FitStatus::MaxIterations;
    let n = points.len() as f64;
    for _ in 0..max_iter {
        let resp: Vec<[f64; 2]> = points.iter().map(|x| model.posterior(x)).collect();
        let mut comps = model.components.clone();
        let mut floored = false;
        for k in 0..2 {
            let w: Vec<f64> = resp.iter().map(|r| r[k]).collect();
            let nk: f64 = w.iter().sum();
            if nk < 1e-9 * n {
                degenerate = true;
                floored = true;
                continue;
            }
            let (_, mean, cov) = mean_cov(points, &w);
            let (cov, f) = floor_covariance(&cov);
            floored |= f;
            comps[k] = Component {
                weight: (nk / n).clamp(1e-12, 1.0 - 1e-12),
                mean,
                cov,
            };
        }
        let s = comps[0].weight + comps[1].weight;
        comps.iter_mut().for_each(|c| c.weight /= s);
        model = Gmm2::new(comps)?;
        degenerate |= floored;
        let next = model.log_likelihood(points);
        if !floored && next < ll - 1e-9 * ll.abs().max(1.0) {
            return Err(Error::Internal(alloc::format!("EM log-likelihood decreased from {ll} to {next}")));
        }
        trace.push(next);
        let delta = (next - ll).abs();
        ll = next;
        if delta < tol {
            status = FitStatus::Converged;
            break;
        }
    }
    if degenerate {
        status = FitStatus::ConvergedDegenerate;
    }
    Ok(EmFit {
        model,
        ll_trace: trace,
        status,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub labels: Vec<Class>,
    pub iterations: usize,
    pub converged: bool,
    pub model: Gmm2,
}

/// Self-training from a sparse seed: fit from current labels, relabel every
/// frame by posterior argmax, repeat until the labeling is unchanged or
/// [`MAX_BOOTSTRAP_ITERS`] iterations.
pub fn bootstrap_labels(points: &[Vec3], seed: &[(usize, Class)]) -> Result<BootstrapResult> {
    for c in [Class::Taan, Class::NonTaan] {
        if seed.iter().filter(|s| s.1 == c).count() < 2 {
            return Err(Error::invalid("seed needs at least 2 frames per class"));
        }
    }
    let mut current: Vec<Option<Class>> = vec![None; points.len()];
    for &(i, c) in seed {
        let slot = current
            .get_mut(i)
            .ok_or_else(|| Error::invalid(alloc::format!("seed frame {i} out of range")))?;
        if slot.is_some_and(|p| p != c) {
            return Err(Error::invalid(alloc::format!("seed frame {i} labeled twice")));
        }
        *slot = Some(c);
    }
    let mut model = gmm_from_labels(points, &current)?;
    for it in 1..=MAX_BOOTSTRAP_ITERS {
        if it > 1 {
            model = gmm_from_labels(points, &current)?;
        }
        let next: Vec<Option<Class>> = points.iter().map(|x| Some(model.classify(x))).collect();
        let both = next.contains(&Some(Class::Taan)) && next.contains(&Some(Class::NonTaan));
        if next == current || !both {
            let labels = if both { next } else { current.clone() };
            return Ok(BootstrapResult {
                labels: labels.into_iter().map(|l| l.unwrap_or(Class::NonTaan)).collect(),
                iterations: it,
                converged: both,
                model,
            });
        }
        current = next;
    }
    Ok(BootstrapResult {
        labels: current.into_iter().map(|l| l.unwrap_or(Class::NonTaan)).collect(),
        iterations: MAX_BOOTSTRAP_ITERS,
        converged: false,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = rng.gen();
        libm::sqrt(-2.0 * libm::log(u)) * libm::cos(2.0 * core::f64::consts::PI * v)
    }

    fn clusters(n: usize, sigma: f64, centres: [Vec3; 2], seed: u64) -> (Vec<Vec3>, Vec<Class>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let k = i % 2;
            let c = centres[k];
            pts.push([0, 1, 2].map(|d| c[d] + sigma * normal(&mut rng)));
            labels.push(Class::from_index(k));
        }
        (pts, labels)
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]];
        let (l, v) = sym_eigen3(&a);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| v[i][k] * l[k] * v[j][k]).sum();
                assert!((r - a[i][j]).abs() < 1e-12);
            }
        }
        let (f, changed) = floor_covariance(&[[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]);
        assert!(changed);
        assert!(cholesky(&f).is_some());
    }

    #[test]
    fn log_pdf_matches_closed_form() {
        let c = Component {
            weight: 0.5,
            mean: [1.0, -1.0, 0.0],
            cov: [[2.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 1.0]],
        };
        let chol = cholesky(&c.cov).unwrap();
        let x = [2.0, 0.0, 1.0];
        let q = 1.0 / 2.0 + 1.0 / 0.5 + 1.0;
        let expected = -0.5 * q - 0.5 * libm::log(1.0) - 1.5 * libm::log(2.0 * core::f64::consts::PI);
        assert!((c.log_pdf_with(&chol, &x) - expected).abs() < 1e-12);
    }

    #[test]
    fn em_recovers_separated_means() {
        let centres = [[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        let (pts, truth) = clusters(200, 0.1, centres, 3);
        let seed: Vec<Option<Class>> = truth.iter().enumerate().map(|(i, &c)| (i < 4).then_some(c)).collect();
        let fit = gmm_fit_em(&pts, GmmInit::Labels(&seed), 100, 1e-10).unwrap();
        for k in 0..2 {
            for d in 0..3 {
                assert!((fit.model.components()[k].mean[d] - centres[k][d]).abs() < 0.05);
            }
        }
        assert!(fit.ll_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    }

    #[test]
    fn zero_iterations_return_init() {
        let (pts, truth) = clusters(20, 0.5, [[0.0; 3], [2.0; 3]], 1);
        let init = gmm_from_labels(&pts, &truth.iter().map(|&c| Some(c)).collect::<Vec<_>>()).unwrap();
        let fit = gmm_fit_em(&pts, GmmInit::Model(&init), 0, 1e-6).unwrap();
        assert_eq!(fit.model, init);
        assert_eq!(fit.ll_trace.len(), 1);
        assert!(gmm_fit_em(&pts[..3], GmmInit::Model(&init), 5, 1e-6).is_err());
    }

    #[test]
    fn bootstrap_from_tiny_seed() {
        let (pts, truth) = clusters(200, 0.1, [[0.0; 3], [3.0, 0.0, 0.0]], 5);
        let seed: Vec<(usize, Class)> = (0..4).map(|i| (i, truth[i])).collect();
        let r = bootstrap_labels(&pts, &seed).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 3);
        assert_eq!(r.labels, truth);
        // fixpoint: one more round changes nothing
        let again: Vec<Class> = pts
            .iter()
            .map(|x| gmm_from_labels(&pts, &r.labels.iter().map(|&c| Some(c)).collect::<Vec<_>>()).unwrap().classify(x))
            .collect();
        assert_eq!(again, r.labels);
    }

    #[test]
    fn full_seed_converges_in_one() {
        let (pts, truth) = clusters(100, 0.1, [[0.0; 3], [3.0; 3]], 9);
        let seed: Vec<(usize, Class)> = truth.iter().copied().enumerate().collect();
        let r = bootstrap_labels(&pts, &seed).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.labels, truth);
    }

    #[test]
    fn seed_flip_swaps_labels() {
        let (pts, truth) = clusters(120, 0.4, [[0.0; 3], [2.0, 1.0, 0.0]], 11);
        let seed: Vec<(usize, Class)> = (0..6).map(|i| (i, truth[i])).collect();
        let flipped: Vec<(usize, Class)> = seed.iter().map(|&(i, c)| (i, c.other())).collect();
        let a = bootstrap_labels(&pts, &seed).unwrap();
        let b = bootstrap_labels(&pts, &flipped).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.labels.iter().map(|c| c.other()).collect::<Vec<_>>(), b.labels);
    }

    #[test]
    fn seed_validation() {
        let (pts, _) = clusters(10, 0.1, [[0.0; 3], [1.0; 3]], 1);
        assert!(bootstrap_labels(&pts, &[(0, Class::Taan), (1, Class::NonTaan), (2, Class::NonTaan)]).is_err());
        assert!(bootstrap_labels(&pts, &[(0, Class::Taan), (1, Class::Taan), (2, Class::NonTaan), (99, Class::NonTaan)]).is_err());
    }
}
