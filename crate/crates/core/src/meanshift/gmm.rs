//! Gaussian mixtures and weighted EM.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

/// Smallest admissible covariance eigenvalue.
pub const COV_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn floor_covariance(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| if v.is_finite() { v.max(COV_FLOOR) } else { COV_FLOOR });
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&vals) * v.transpose();
    (&out + out.transpose()) * 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    weight: f64,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianComponent {
    /// The covariance is symmetrised and its eigenvalues floored.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, weight: f64) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cov.nrows(),
            });
        }
        if !(weight > 0.0) {
            return Err(Error::InvalidArgument(format!("mixture proportion {weight} must be positive")));
        }
        let cov = floor_covariance(&cov);
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("covariance not positive definite".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let precision = chol.inverse();
        let log_norm = -0.5 * (d as f64 * LN_2PI + log_det);
        Ok(GaussianComponent {
            mean,
            cov,
            weight,
            precision,
            log_norm,
        })
    }

    pub fn isotropic(mean: &[f64], variance: f64, weight: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(DVector::from_column_slice(mean), DMatrix::identity(d, d) * variance, weight)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// log N(x; mean, cov), without the mixture proportion.
    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        self.log_pdf_slice(x.as_slice())
    }

    fn log_pdf_slice(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mu = self.mean.as_slice();
        // column-major storage; the precision is symmetric either way
        let p = self.precision.as_slice();
        let mut q = 0.0;
        for j in 0..n {
            let dj = x[j] - mu[j];
            let col = &p[j * n..(j + 1) * n];
            let mut acc = 0.0;
            for i in 0..n {
                acc += col[i] * (x[i] - mu[i]);
            }
            q += dj * acc;
        }
        self.log_norm - 0.5 * q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl GaussianMixture {
    /// Proportions are renormalised to sum to one.
    pub fn new(mut components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        for c in &mut components {
            c.weight /= total;
        }
        Ok(GaussianMixture { components })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn log_joint(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.components.len()];
        self.log_joint_into(x.as_slice(), &mut out);
        out
    }

    fn log_joint_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.weight.ln() + c.log_pdf_slice(x);
        }
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        if self.components.len() <= 16 {
            let mut buf = [0.0; 16];
            let lj = &mut buf[..self.components.len()];
            self.log_joint_into(x.as_slice(), lj);
            return log_sum_exp(lj);
        }
        log_sum_exp(&self.log_joint(x))
    }

    pub fn density(&self, x: &DVector<f64>) -> f64 {
        self.log_density(x).exp()
    }

    /// p(m | x) for every component.
    pub fn responsibilities(&self, x: &DVector<f64>) -> Vec<f64> {
        let lj = self.log_joint(x);
        let z = log_sum_exp(&lj);
        if !z.is_finite() {
            // far outside every component: fall back to the nearest in
            // Mahalanobis terms so iterations stay defined
            let best = lj
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            return (0..lj.len()).map(|i| f64::from(u8::from(i == best))).collect();
        }
        lj.iter().map(|l| (l - z).exp()).collect()
    }

    /// Gradient of the mixture density: sum_m p(m) p(x|m) P_m (mu_m - x).
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for c in &self.components {
            let p = (c.weight.ln() + c.log_pdf(x)).exp();
            g += (&c.precision * (&c.mean - x)) * p;
        }
        g
    }

    /// Weighted mean log-likelihood.
    pub fn mean_log_likelihood(&self, points: &[DVector<f64>], weights: &[f64]) -> f64 {
        let total: f64 = weights.iter().sum();
        points
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| w * self.log_density(x))
            .sum::<f64>()
            / total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmInit {
    /// Seeded k-means++ centres followed by a few Lloyd steps.
    KMeansPlusPlus,
    /// Points sorted along one axis and cut into equal-weight slices.
    Quantile { axis: usize },
    /// Warm start from a previous mixture.
    From(GaussianMixture),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub components: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub init: EmInit,
    /// Extra k-means++ restarts; the best final likelihood wins.
    pub restarts: usize,
}

impl EmOptions {
    pub fn new(components: usize, seed: u64) -> Self {
        EmOptions {
            components,
            seed,
            max_iter: 200,
            tol: 1e-8,
            init: EmInit::KMeansPlusPlus,
            restarts: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub mixture: GaussianMixture,
    /// Weighted mean log-likelihood after each iteration, the initial
    /// mixture first.
    pub log_likelihood: Vec<f64>,
    pub reinitialised: usize,
}

impl EmFit {
    pub fn iterations(&self) -> usize {
        self.log_likelihood.len() - 1
    }
}

fn weighted_moments(points: &[DVector<f64>], w: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>, f64)> {
    let d = points.first()?.len();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut mean = vec![0.0; d];
    for (x, wi) in points.iter().zip(w) {
        if *wi > 0.0 {
            for (m, v) in mean.iter_mut().zip(x.iter()) {
                *m += wi * v;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut cov = vec![0.0; d * d];
    let mut c = vec![0.0; d];
    for (x, wi) in points.iter().zip(w) {
        if *wi > 0.0 {
            for i in 0..d {
                c[i] = x[i] - mean[i];
            }
            for j in 0..d {
                for i in 0..d {
                    cov[j * d + i] += wi * c[i] * c[j];
                }
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= total);
    Some((DVector::from_vec(mean), DMatrix::from_vec(d, d, cov), total))
}

fn init_from_assignment(points: &[DVector<f64>], w: &[f64], assign: &[usize], k: usize) -> Result<GaussianMixture> {
    let (_, global_cov, _) = weighted_moments(points, w).expect("checked non-empty");
    let mut comps = Vec::with_capacity(k);
    for j in 0..k {
        let wj: Vec<f64> = w
            .iter()
            .zip(assign)
            .map(|(wi, a)| if *a == j { *wi } else { 0.0 })
            .collect();
        match weighted_moments(points, &wj) {
            Some((m, c, t)) if t > 0.0 => comps.push(GaussianComponent::new(m, c, t)?),
            _ => {
                let m = points[j % points.len()].clone();
                comps.push(GaussianComponent::new(m, global_cov.clone(), 1e-3)?)
            }
        }
    }
    GaussianMixture::new(comps)
}

fn kmeans_pp(points: &[DVector<f64>], w: &[f64], k: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let n = points.len();
    let pick = |rng: &mut rng::Rng, score: &[f64]| -> usize {
        let total: f64 = score.iter().sum();
        if !(total > 0.0) {
            return rng.random_range(0..n);
        }
        let mut t = rng.random::<f64>() * total;
        for (i, s) in score.iter().enumerate() {
            t -= s;
            if t <= 0.0 && *s > 0.0 {
                return i;
            }
        }
        score.iter().rposition(|s| *s > 0.0).unwrap_or(n - 1)
    };
    let mut centres = vec![points[pick(rng, w)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|x| (x - &centres[0]).norm_squared()).collect();
    while centres.len() < k {
        let score: Vec<f64> = d2.iter().zip(w).map(|(d, wi)| d * wi).collect();
        let c = points[pick(rng, &score)].clone();
        for (d, x) in d2.iter_mut().zip(points) {
            *d = d.min((x - &c).norm_squared());
        }
        centres.push(c);
    }
    let mut assign = vec![0; n];
    for _ in 0..10 {
        for (a, x) in assign.iter_mut().zip(points) {
            *a = (0..k)
                .min_by(|&i, &j| (x - &centres[i]).norm_squared().total_cmp(&(x - &centres[j]).norm_squared()))
                .expect("k >= 1");
        }
        for (j, c) in centres.iter_mut().enumerate() {
            let mut s = DVector::zeros(c.len());
            let mut t = 0.0;
            for ((x, a), wi) in points.iter().zip(&assign).zip(w) {
                if *a == j {
                    s += x * *wi;
                    t += wi;
                }
            }
            if t > 0.0 {
                *c = s / t;
            }
        }
    }
    assign
}

fn quantile_assign(points: &[DVector<f64>], w: &[f64], k: usize, axis: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    let total: f64 = w.iter().sum();
    let mut assign = vec![0; points.len()];
    let mut acc = 0.0;
    for i in order {
        // slice by the cumulative weight at the point's centre
        let mid = acc + w[i] / 2.0;
        assign[i] = ((mid / total * k as f64) as usize).min(k - 1);
        acc += w[i];
    }
    assign
}

/// Weighted EM. Point weights multiply the responsibilities; `None` means
/// unit weights.
pub fn gmm_fit_em(points: &[DVector<f64>], weights: Option<&[f64]>, opts: &EmOptions) -> Result<EmFit> {
    let k = opts.components;
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one component".into()));
    }
    if points.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} points cannot support {k} components",
            points.len()
        )));
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.len(),
        });
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() != points.len() => {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: w.len(),
            })
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; points.len()],
    };
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || !(w.iter().sum::<f64>() > 0.0) {
        return Err(Error::InvalidArgument("point weights must be non-negative with positive sum".into()));
    }
    let attempts = if matches!(opts.init, EmInit::KMeansPlusPlus) {
        opts.restarts + 1
    } else {
        1
    };
    let mut best: Option<EmFit> = None;
    for attempt in 0..attempts {
        let init = match &opts.init {
            EmInit::KMeansPlusPlus => {
                let mut r = rng::stream(opts.seed, &[attempt as u64]);
                init_from_assignment(points, &w, &kmeans_pp(points, &w, k, &mut r), k)?
            }
            EmInit::Quantile { axis } => {
                if *axis >= d {
                    return Err(Error::InvalidArgument(format!("quantile axis {axis} >= dimension {d}")));
                }
                init_from_assignment(points, &w, &quantile_assign(points, &w, k, *axis), k)?
            }
            EmInit::From(m) => {
                if m.components().len() != k || m.dim() != d {
                    return Err(Error::InvalidArgument("warm-start mixture does not match".into()));
                }
                m.clone()
            }
        };
        let fit = run_em(points, &w, init, opts)?;
        let better = best
            .as_ref()
            .map_or(true, |b| fit.log_likelihood.last() > b.log_likelihood.last());
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one attempt"))
}

fn run_em(points: &[DVector<f64>], w: &[f64], init: GaussianMixture, opts: &EmOptions) -> Result<EmFit> {
    let n = points.len();
    let k = opts.components;
    let total: f64 = w.iter().sum();
    let mut mix = init;
    let mut ll = vec![mix.mean_log_likelihood(points, w)];
    let mut reinitialised = 0;
    let mut resp = vec![0.0; n * k];
    for _ in 0..opts.max_iter {
        // E-step
        let mut point_ll = vec![0.0; n];
        let mut lj = vec![0.0; k];
        for (i, x) in points.iter().enumerate() {
            mix.log_joint_into(x.as_slice(), &mut lj);
            let z = log_sum_exp(&lj);
            point_ll[i] = z;
            for j in 0..k {
                resp[i * k + j] = if z.is_finite() { (lj[j] - z).exp() } else { 1.0 / k as f64 };
            }
        }
        // M-step
        let mut comps = Vec::with_capacity(k);
        for j in 0..k {
            let rj: Vec<f64> = (0..n).map(|i| w[i] * resp[i * k + j]).collect();
            let mass: f64 = rj.iter().sum();
            if mass > 1e-10 * total {
                let (m, c, t) = weighted_moments(points, &rj).expect("positive mass");
                comps.push(GaussianComponent::new(m, c, t / total)?);
            } else {
                // empty component: restart it on the worst-explained point
                let worst = (0..n)
                    .filter(|&i| w[i] > 0.0)
                    .min_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]))
                    .expect("positive total weight");
                let (_, global, _) = weighted_moments(points, w).expect("non-empty");
                comps.push(GaussianComponent::new(points[worst].clone(), global, 1.0 / k as f64)?);
                reinitialised += 1;
            }
        }
        mix = GaussianMixture::new(comps)?;
        let cur = mix.mean_log_likelihood(points, w);
        let prev = *ll.last().expect("non-empty");
        ll.push(cur);
        if (cur - prev).abs() < opts.tol {
            break;
        }
    }
    Ok(EmFit {
        mixture: mix,
        log_likelihood: ll,
        reinitialised,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn two_clusters(seed: u64) -> Vec<DVector<f64>> {
        let mut r = rng::from_seed(seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        (0..400)
            .map(|i| {
                let c = if i % 2 == 0 { 0.0 } else { 10.0 };
                v(&[c + n.sample(&mut r), c + n.sample(&mut r)])
            })
            .collect()
    }

    #[test]
    fn floor_applies_to_degenerate_covariance() {
        let c = GaussianComponent::new(v(&[0.0, 0.0]), DMatrix::zeros(2, 2), 1.0).unwrap();
        let eig = SymmetricEigen::new(c.covariance().clone());
        assert!(eig.eigenvalues.iter().all(|e| *e >= COV_FLOOR * 0.999));
    }

    #[test]
    fn single_component_is_closed_form() {
        let pts = two_clusters(1);
        let w: Vec<f64> = (0..pts.len()).map(|i| 1.0 + (i % 3) as f64).collect();
        let fit = gmm_fit_em(&pts, Some(&w), &EmOptions::new(1, 0)).unwrap();
        let (m, c, _) = weighted_moments(&pts, &w).unwrap();
        let comp = &fit.mixture.components()[0];
        assert!((comp.mean() - m).norm() < 1e-10);
        assert!((comp.covariance() - c).norm() < 1e-8);
    }

    #[test]
    fn separated_clusters_recovered() {
        let pts = two_clusters(2);
        let fit = gmm_fit_em(&pts, None, &EmOptions::new(2, 4)).unwrap();
        // oracle: nearest-centroid assignment to the true centres
        let mut sums = [v(&[0.0, 0.0]), v(&[0.0, 0.0])];
        let mut counts = [0.0; 2];
        for p in &pts {
            let j = usize::from(p.norm() > (p - v(&[10.0, 10.0])).norm());
            sums[j] += p;
            counts[j] += 1.0;
        }
        for j in 0..2 {
            let centroid = &sums[j] / counts[j];
            let nearest = fit
                .mixture
                .components()
                .iter()
                .map(|c| (c.mean() - &centroid).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 0.2, "{nearest}");
        }
    }

    #[test]
    fn log_likelihood_never_drops() {
        let mut r = rng::from_seed(5);
        let n = Normal::new(0.0, 1.0).unwrap();
        let pts: Vec<_> = (0..300)
            .map(|i| v(&[(i % 3) as f64 * 2.5 + n.sample(&mut r), n.sample(&mut r)]))
            .collect();
        let w: Vec<f64> = (0..300).map(|i| 0.5 + (i % 7) as f64 / 7.0).collect();
        for init in [EmInit::KMeansPlusPlus, EmInit::Quantile { axis: 0 }] {
            let mut o = EmOptions::new(3, 8);
            o.init = init;
            o.tol = 0.0;
            o.max_iter = 60;
            let fit = gmm_fit_em(&pts, Some(&w), &o).unwrap();
            for pair in fit.log_likelihood.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-8, "{pair:?}");
            }
        }
    }

    #[test]
    fn too_few_points() {
        let pts = vec![v(&[0.0])];
        assert!(gmm_fit_em(&pts, None, &EmOptions::new(2, 0)).is_err());
    }

    #[test]
    fn proportions_sum_to_one() {
        let pts = two_clusters(6);
        let fit = gmm_fit_em(&pts, None, &EmOptions::new(4, 1)).unwrap();
        let s: f64 = fit.mixture.components().iter().map(|c| c.weight()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}
