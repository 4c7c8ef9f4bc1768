//! Mean-shift fixed points on a Gaussian mixture, optionally multiplied by a
//! boundary weighting w(x).
//!
//! For every weighting used here the weight gradient has the form
//! `∇w = w · Λ (s(x) − x)` for an anchor `s(x)` and a precision `Λ`, so
//! setting `∇(w·p) = 0` gives the fixed point
//! `x = (Λ + Σ r_m P_m)⁻¹ (Λ s(x) + Σ r_m P_m μ_m)` with `r_m = p(m|x)` and
//! `P_m` the component precisions. Without a weight the Λ terms vanish.

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;

use super::gmm::GaussianMixture;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryWeight {
    /// Gaussian bump around a fixed anchor.
    Point { anchor: DVector<f64>, precision: DMatrix<f64> },
    /// Gaussian in the distance to a sphere (a circle in 2-D).
    Sphere {
        center: DVector<f64>,
        radius: f64,
        sigma: f64,
    },
    /// Gaussian in the distance to the hyperplane `x[axis] = offset`.
    Hyperplane { axis: usize, offset: f64, sigma: f64 },
}

impl BoundaryWeight {
    pub fn point(anchor: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let precision = covariance
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("weighting covariance must be positive definite".into()))?
            .inverse();
        Ok(BoundaryWeight::Point { anchor, precision })
    }

    pub fn sphere(center: DVector<f64>, radius: f64, sigma: f64) -> Result<Self> {
        if !(radius > 0.0 && sigma > 0.0) {
            return Err(Error::InvalidArgument("sphere radius and sigma must be positive".into()));
        }
        Ok(BoundaryWeight::Sphere { center, radius, sigma })
    }

    pub fn hyperplane(axis: usize, offset: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument("hyperplane sigma must be positive".into()));
        }
        Ok(BoundaryWeight::Hyperplane { axis, offset, sigma })
    }

    /// Signed distance to the boundary (negative inside a sphere or below a
    /// hyperplane). Undefined for point weights.
    pub fn signed_distance(&self, x: &DVector<f64>) -> Option<f64> {
        match self {
            BoundaryWeight::Point { .. } => None,
            BoundaryWeight::Sphere { center, radius, .. } => Some((x - center).norm() - radius),
            BoundaryWeight::Hyperplane { axis, offset, .. } => Some(x[*axis] - offset),
        }
    }

    /// w(x) in (0,1], equal to one on the boundary or at the anchor.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            BoundaryWeight::Point { anchor, precision } => {
                let d = x - anchor;
                (-0.5 * d.dot(&(precision * &d))).exp()
            }
            BoundaryWeight::Sphere { sigma, .. } | BoundaryWeight::Hyperplane { sigma, .. } => {
                let d = self.signed_distance(x).expect("curve weight");
                (-d * d / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    /// Nearest boundary point `s(x)`.
    pub fn anchor(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            BoundaryWeight::Point { anchor, .. } => anchor.clone(),
            BoundaryWeight::Sphere { center, radius, .. } => {
                let d = x - center;
                let n = d.norm();
                if n > 0.0 {
                    center + d * (radius / n)
                } else {
                    // every boundary point is equidistant; pick the first axis
                    let mut s = center.clone();
                    s[0] += radius;
                    s
                }
            }
            BoundaryWeight::Hyperplane { axis, offset, .. } => {
                let mut s = x.clone();
                s[*axis] = *offset;
                s
            }
        }
    }

    /// Λ, the curvature of −ln w along the boundary normal.
    pub fn precision(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let dim = x.len();
        match self {
            BoundaryWeight::Point { precision, .. } => precision.clone(),
            BoundaryWeight::Sphere { sigma, .. } => DMatrix::identity(dim, dim) / (sigma * sigma),
            BoundaryWeight::Hyperplane { axis, sigma, .. } => {
                let mut m = DMatrix::zeros(dim, dim);
                m[(*axis, *axis)] = 1.0 / (sigma * sigma);
                m
            }
        }
    }

    /// Parses `circle:cx,cy,r,sigma`, `line:axis,offset,sigma` or
    /// `point:x1,..,xD,var`. `none` yields `Ok(None)`.
    pub fn parse(spec: &str) -> Result<Option<Self>> {
        let bad = || Error::Config(format!("bad boundary weight {spec:?}"));
        if spec == "none" {
            return Ok(None);
        }
        let (kind, args) = spec.split_once(':').ok_or_else(bad)?;
        let v: Vec<f64> = args
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let w = match (kind, v.len()) {
            ("circle" | "sphere", n) if n >= 3 => {
                BoundaryWeight::sphere(DVector::from_column_slice(&v[..n - 2]), v[n - 2], v[n - 1])?
            }
            ("line" | "hyperplane", 3) if v[0] >= 0.0 && v[0].fract() == 0.0 => {
                BoundaryWeight::hyperplane(v[0] as usize, v[1], v[2])?
            }
            ("point", n) if n >= 2 && v[n - 1] > 0.0 => {
                let d = n - 1;
                BoundaryWeight::point(DVector::from_column_slice(&v[..d]), DMatrix::identity(d, d) * v[n - 1])?
            }
            _ => return Err(bad()),
        };
        Ok(Some(w))
    }
}

/// w(x)·p(x), or p(x) without a weight.
pub fn weighted_density(mix: &GaussianMixture, bw: Option<&BoundaryWeight>, x: &DVector<f64>) -> f64 {
    mix.density(x) * bw.map_or(1.0, |b| b.value(x))
}

/// Analytic gradient of w(x)·p(x).
pub fn weighted_density_gradient(mix: &GaussianMixture, bw: &BoundaryWeight, x: &DVector<f64>) -> DVector<f64> {
    let w = bw.value(x);
    let p = mix.density(x);
    (mix.gradient(x) + bw.precision(x) * (bw.anchor(x) - x) * p) * w
}

fn gradient(mix: &GaussianMixture, bw: Option<&BoundaryWeight>, x: &DVector<f64>) -> DVector<f64> {
    match bw {
        Some(b) => weighted_density_gradient(mix, b, x),
        None => mix.gradient(x),
    }
}

/// One fixed-point update.
pub fn fixed_point_step(mix: &GaussianMixture, bw: Option<&BoundaryWeight>, x: &DVector<f64>) -> Result<DVector<f64>> {
    let d = x.len();
    let r = mix.responsibilities(x);
    let mut a = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    for (c, rm) in mix.components().iter().zip(&r) {
        if *rm > 0.0 {
            a += c.precision() * *rm;
            b += c.precision() * c.mean() * *rm;
        }
    }
    if let Some(bw) = bw {
        let lam = bw.precision(x);
        b += &lam * bw.anchor(x);
        a += lam;
    }
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(&b)),
        None => a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Numerical("singular precision sum in fixed-point step".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    pub eps_x: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            max_iter: 500,
            eps_x: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub mode: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn iterate(
    mix: &GaussianMixture,
    bw: Option<&BoundaryWeight>,
    x0: &DVector<f64>,
    opts: FixedPointOptions,
) -> Result<FixedPoint> {
    if x0.len() != mix.dim() {
        return Err(Error::DimensionMismatch {
            expected: mix.dim(),
            found: x0.len(),
        });
    }
    let mut x = x0.clone();
    for it in 1..=opts.max_iter {
        let next = fixed_point_step(mix, bw, &x)?;
        let step = (&next - &x).norm();
        x = next;
        if step < opts.eps_x {
            return Ok(FixedPoint {
                mode: x,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(FixedPoint {
        mode: x,
        iterations: opts.max_iter,
        converged: false,
    })
}

/// Plain mean-shift on the mixture density.
pub fn meanshift_fixed_point(mix: &GaussianMixture, x0: &DVector<f64>, opts: FixedPointOptions) -> Result<FixedPoint> {
    iterate(mix, None, x0, opts)
}

/// Mean-shift on w(x)·p(x).
pub fn weighted_fixed_point(
    mix: &GaussianMixture,
    bw: &BoundaryWeight,
    x0: &DVector<f64>,
    opts: FixedPointOptions,
) -> Result<FixedPoint> {
    iterate(mix, Some(bw), x0, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub point: DVector<f64>,
    /// Number of starts that ended in this mode.
    pub basin: usize,
    pub gradient_norm: f64,
    /// w·p (or p) at the mode.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeSet {
    /// Highest density first.
    pub modes: Vec<Mode>,
    /// Starts that hit the iteration cap.
    pub unconverged: usize,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let d = self.modes.first().map_or(0, |m| m.point.len());
        let mut s: String = (0..d).map(|i| format!("x{i},")).collect();
        s.push_str("basin,gradient_norm,density\n");
        for m in &self.modes {
            for v in m.point.iter() {
                s.push_str(&format!("{v},"));
            }
            s.push_str(&format!("{},{},{}\n", m.basin, m.gradient_norm, m.density));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOptions {
    pub fixed_point: FixedPointOptions,
    /// Single-linkage merge distance for converged points.
    pub delta: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        ModeOptions {
            fixed_point: FixedPointOptions::default(),
            delta: 1e-3,
        }
    }
}

/// Runs the fixed point from every start and merges converged end points
/// that lie within `delta` of each other (single linkage).
pub fn find_all_modes(
    mix: &GaussianMixture,
    bw: Option<&BoundaryWeight>,
    starts: &[DVector<f64>],
    opts: ModeOptions,
) -> Result<ModeSet> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("no starting points".into()));
    }
    let mut ends = Vec::new();
    let mut unconverged = 0;
    for s in starts {
        let fp = iterate(mix, bw, s, opts.fixed_point)?;
        if fp.converged {
            ends.push(fp.mode);
        } else {
            unconverged += 1;
        }
    }
    let n = ends.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (&ends[i] - &ends[j]).norm() <= opts.delta {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut modes: Vec<Mode> = Vec::new();
    let mut slot_of_root = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        let density = weighted_density(mix, bw, &ends[i]);
        if slot_of_root[r] == usize::MAX {
            slot_of_root[r] = modes.len();
            modes.push(Mode {
                point: ends[i].clone(),
                basin: 1,
                gradient_norm: 0.0,
                density,
            });
        } else {
            let m = &mut modes[slot_of_root[r]];
            m.basin += 1;
            if density > m.density {
                m.point = ends[i].clone();
                m.density = density;
            }
        }
    }
    for m in &mut modes {
        m.gradient_norm = gradient(mix, bw, &m.point).norm();
    }
    modes.sort_by(|a, b| b.density.total_cmp(&a.density));
    Ok(ModeSet { modes, unconverged })
}

/// Component means followed by `extra` seeded draws from `points`.
pub fn default_starts(mix: &GaussianMixture, points: &[DVector<f64>], extra: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut starts: Vec<DVector<f64>> = mix.components().iter().map(|c| c.mean().clone()).collect();
    let mut r = rng::from_seed(seed);
    for _ in 0..extra {
        if let Some(p) = points.choose(&mut r) {
            starts.push(p.clone());
        }
    }
    starts
}

#[cfg(test)]
mod tests {
    use super::super::gmm::GaussianComponent;
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn iso(means: &[&[f64]], var: f64) -> GaussianMixture {
        GaussianMixture::new(
            means
                .iter()
                .map(|m| GaussianComponent::isotropic(m, var, 1.0).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            (0..x.len()).map(|i| {
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            }),
        )
    }

    #[test]
    fn single_component_one_step() {
        let m = iso(&[&[1.0, -2.0]], 0.7);
        let fp = meanshift_fixed_point(&m, &v(&[5.0, 5.0]), FixedPointOptions::default()).unwrap();
        assert!((fp.mode - v(&[1.0, -2.0])).norm() < 1e-12);
        assert!(fp.iterations <= 2);
    }

    #[test]
    fn symmetric_pair_keeps_origin() {
        let m = iso(&[&[-1.0, 0.0], &[1.0, 0.0]], 1.0);
        let fp = meanshift_fixed_point(&m, &v(&[0.0, 0.0]), FixedPointOptions::default()).unwrap();
        assert!(fp.mode.norm() < 1e-12);
    }

    #[test]
    fn unweighted_mode_is_stationary() {
        let m = iso(&[&[-3.0, 0.0], &[3.0, 0.5]], 1.0);
        let fp = meanshift_fixed_point(&m, &v(&[2.0, 2.0]), FixedPointOptions::default()).unwrap();
        assert!(fp.converged);
        let g = fd_gradient(|x| m.density(x), &fp.mode, 1e-5);
        assert!(g.norm() < 1e-6, "{}", g.norm());
    }

    #[test]
    fn equal_precision_average() {
        let m = iso(&[&[2.0, 0.0]], 1.0);
        let bw = BoundaryWeight::point(v(&[0.0, 4.0]), DMatrix::identity(2, 2)).unwrap();
        let fp = weighted_fixed_point(&m, &bw, &v(&[9.0, -3.0]), FixedPointOptions::default()).unwrap();
        assert!((&fp.mode - v(&[1.0, 2.0])).norm() < 1e-10);
        assert!(weighted_density_gradient(&m, &bw, &v(&[1.0, 2.0])).norm() < 1e-15);
        let g = fd_gradient(|x| weighted_density(&m, Some(&bw), x), &fp.mode, 1e-5);
        assert!(g.norm() < 1e-6);
    }

    #[test]
    fn flat_weight_recovers_unweighted_mode() {
        let m = iso(&[&[0.0, 0.0], &[2.5, 1.0]], 1.0);
        let bw = BoundaryWeight::point(v(&[5.0, 5.0]), DMatrix::identity(2, 2) * 1e6).unwrap();
        let x0 = v(&[2.0, 0.5]);
        let a = meanshift_fixed_point(&m, &x0, FixedPointOptions::default()).unwrap();
        let b = weighted_fixed_point(&m, &bw, &x0, FixedPointOptions::default()).unwrap();
        assert!((a.mode - b.mode).norm() < 1e-3);
    }

    #[test]
    fn mode_counts() {
        let one = iso(&[&[0.0, 0.0]], 1.0);
        let mut r = rng::from_seed(1);
        let starts: Vec<_> = (0..10)
            .map(|_| v(&[r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)]))
            .collect();
        assert_eq!(find_all_modes(&one, None, &starts, ModeOptions::default()).unwrap().len(), 1);
        let two = iso(&[&[0.0, 0.0], &[10.0, 0.0]], 1.0);
        let starts = vec![v(&[0.0, 0.0]), v(&[10.0, 0.0])];
        let ms = find_all_modes(&two, None, &starts, ModeOptions::default()).unwrap();
        assert_eq!(ms.len(), 2);
        assert!(ms.modes.iter().all(|m| m.gradient_norm < 1e-6));
    }

    #[test]
    fn curve_weights_have_matching_gradients() {
        let m = iso(&[&[0.1, 0.5], &[-0.2, -0.4]], 0.08);
        for bw in [
            BoundaryWeight::sphere(v(&[0.0, 0.0]), 0.4, 0.1).unwrap(),
            BoundaryWeight::hyperplane(1, 0.3, 0.2).unwrap(),
        ] {
            for x in [v(&[0.3, 0.2]), v(&[-0.1, -0.6]), v(&[0.05, 0.45])] {
                let a = weighted_density_gradient(&m, &bw, &x);
                let f = fd_gradient(|y| weighted_density(&m, Some(&bw), y), &x, 1e-6);
                assert!((&a - &f).norm() <= 1e-5 * f.norm().max(1e-3), "{a} vs {f}");
            }
        }
    }

    #[test]
    fn parse_specs() {
        assert!(matches!(BoundaryWeight::parse("circle:0,0,0.4,0.1").unwrap(), Some(BoundaryWeight::Sphere { .. })));
        assert!(matches!(BoundaryWeight::parse("line:0,20,6").unwrap(), Some(BoundaryWeight::Hyperplane { axis: 0, .. })));
        assert!(matches!(BoundaryWeight::parse("point:1,2,0.5").unwrap(), Some(BoundaryWeight::Point { .. })));
        assert_eq!(BoundaryWeight::parse("none").unwrap(), None);
        assert!(BoundaryWeight::parse("line:0.5,1,1").is_err());
        assert!(BoundaryWeight::parse("blob:1").is_err());
    }

    fn random_mixture(d: usize, m: usize, seed: u64) -> GaussianMixture {
        let mut r = rng::from_seed(seed);
        let comps = (0..m)
            .map(|_| {
                let mean = DVector::from_fn(d, |_, _| r.random_range(-2.0..2.0));
                let a = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
                let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.3;
                GaussianComponent::new(mean, cov, r.random_range(0.2..1.0)).unwrap()
            })
            .collect();
        GaussianMixture::new(comps).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn analytic_gradient_matches_finite_differences(d in 1usize..4, m in 1usize..5, seed in 0u64..10_000) {
            let mix = random_mixture(d, m, seed);
            let mut r = rng::from_seed(seed ^ 0xabc);
            let anchor = DVector::from_fn(d, |_, _| r.random_range(-2.0..2.0));
            let bw = BoundaryWeight::point(anchor, DMatrix::identity(d, d) * r.random_range(0.5..3.0)).unwrap();
            let x = DVector::from_fn(d, |_, _| r.random_range(-2.0..2.0));
            let a = weighted_density_gradient(&mix, &bw, &x);
            let f = fd_gradient(|y| weighted_density(&mix, Some(&bw), y), &x, 1e-5);
            let scale = f.norm().max(1e-4);
            prop_assert!((&a - &f).norm() / scale < 1e-5, "{} vs {}", a, f);
        }

        #[test]
        fn weighted_modes_are_stationary(d in 1usize..4, m in 1usize..5, seed in 0u64..10_000) {
            let mix = random_mixture(d, m, seed);
            let mut r = rng::from_seed(seed ^ 0x5eed);
            let anchor = DVector::from_fn(d, |_, _| r.random_range(-2.0..2.0));
            let bw = BoundaryWeight::point(anchor, DMatrix::identity(d, d)).unwrap();
            let x0 = DVector::from_fn(d, |_, _| r.random_range(-2.0..2.0));
            let fp = weighted_fixed_point(&mix, &bw, &x0, FixedPointOptions::default()).unwrap();
            prop_assume!(fp.converged);
            prop_assert!(weighted_density_gradient(&mix, &bw, &fp.mode).norm() < 1e-6);
        }

        #[test]
        fn flat_weight_limit(d in 1usize..4, m in 1usize..5, seed in 0u64..10_000) {
            let mix = random_mixture(d, m, seed);
            let bw = BoundaryWeight::point(DVector::from_element(d, 3.0), DMatrix::identity(d, d) * 1e6).unwrap();
            let x0 = mix.components()[0].mean().clone();
            let a = meanshift_fixed_point(&mix, &x0, FixedPointOptions::default()).unwrap();
            let b = weighted_fixed_point(&mix, &bw, &x0, FixedPointOptions::default()).unwrap();
            prop_assume!(a.converged && b.converged);
            prop_assert!((a.mode - b.mode).norm() < 1e-3);
        }

        #[test]
        fn isotropic_iterates_stay_in_hull(m in 1usize..5, seed in 0u64..10_000) {
            // every iterate is a non-negative combination of the means and
            // the anchor when all precisions are multiples of the identity
            let mut r = rng::from_seed(seed);
            let comps: Vec<_> = (0..m)
                .map(|_| {
                    let mean = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
                    GaussianComponent::isotropic(&mean, r.random_range(0.2..2.0), r.random_range(0.2..1.0)).unwrap()
                })
                .collect();
            let mix = GaussianMixture::new(comps).unwrap();
            let anchor = v(&[r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)]);
            let bw = BoundaryWeight::point(anchor.clone(), DMatrix::identity(2, 2) * r.random_range(0.2..2.0)).unwrap();
            let mut hull: Vec<DVector<f64>> = mix.components().iter().map(|c| c.mean().clone()).collect();
            hull.push(anchor);
            let mut x = v(&[r.random_range(-6.0..6.0), r.random_range(-6.0..6.0)]);
            for _ in 0..30 {
                x = fixed_point_step(&mix, Some(&bw), &x).unwrap();
                prop_assert!(in_hull(&hull, &x));
            }
        }
    }

    /// Convex-hull membership by Andrew's monotone chain plus half-plane
    /// tests, with a small tolerance for degenerate hulls.
    fn in_hull(pts: &[DVector<f64>], x: &DVector<f64>) -> bool {
        let mut p: Vec<(f64, f64)> = pts.iter().map(|v| (v[0], v[1])).collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        p.dedup();
        let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
                if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
            for &q in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                    hull.pop();
                }
                hull.push(q);
            }
            hull.pop();
        }
        let q = (x[0], x[1]);
        let tol = 1e-9;
        match hull.len() {
            0 => false,
            1 => (q.0 - hull[0].0).hypot(q.1 - hull[0].1) < 1e-7,
            2 => {
                let (a, b) = (hull[0], hull[1]);
                let len = (b.0 - a.0).hypot(b.1 - a.1);
                let t = ((q.0 - a.0) * (b.0 - a.0) + (q.1 - a.1) * (b.1 - a.1)) / (len * len);
                cross(a, b, q).abs() / len < 1e-7 && (-tol..=1.0 + tol).contains(&t)
            }
            n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], q) >= -tol),
        }
    }
}
