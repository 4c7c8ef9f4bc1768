use std::f64::consts::PI;
use std::fmt::Write as _;

use super::{Classifier, Prediction};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Density {
    Gaussian,
    /// Gaussian-kernel density estimate, Silverman bandwidth.
    Kernel,
}

const VAR_FLOOR: f64 = 1e-9;
/// Above this many points a kernel density is tabulated and interpolated.
const EXACT_KDE_LIMIT: usize = 256;
const KDE_GRID: usize = 1024;
const KDE_REACH: f64 = 8.0;

#[derive(Debug, Clone)]
enum FeatureDensity {
    Gaussian { mean: f64, var: f64 },
    Kernel(Kde),
}

#[derive(Debug, Clone)]
struct Kde {
    bandwidth: f64,
    /// Sorted sample points and their normalised weights (exact mode).
    points: Vec<(f64, f64)>,
    /// Tabulated density on `[lo, hi]` (grid mode, empty otherwise).
    table: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Kde {
    fn fit(values: &[(f64, f64)]) -> Kde {
        let total: f64 = values.iter().map(|v| v.1).sum();
        let mut points: Vec<(f64, f64)> = values.iter().map(|&(x, w)| (x, w / total)).collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let bandwidth = silverman(&points);
        let mut kde = Kde {
            bandwidth,
            points,
            table: Vec::new(),
            lo: 0.0,
            hi: 0.0,
        };
        if kde.points.len() > EXACT_KDE_LIMIT {
            let lo = kde.points[0].0 - KDE_REACH * bandwidth;
            let hi = kde.points[kde.points.len() - 1].0 + KDE_REACH * bandwidth;
            let table = (0..KDE_GRID)
                .map(|g| kde.exact(lo + (hi - lo) * g as f64 / (KDE_GRID - 1) as f64))
                .collect();
            kde.table = table;
            kde.lo = lo;
            kde.hi = hi;
        }
        kde
    }

    fn exact(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let start = self.points.partition_point(|p| p.0 < x - KDE_REACH * h);
        let norm = 1.0 / (h * (2.0 * PI).sqrt());
        self.points[start..]
            .iter()
            .take_while(|p| p.0 <= x + KDE_REACH * h)
            .map(|&(xi, w)| {
                let z = (x - xi) / h;
                w * norm * (-0.5 * z * z).exp()
            })
            .sum()
    }

    fn density(&self, x: f64) -> f64 {
        if self.table.is_empty() {
            return self.exact(x);
        }
        if x <= self.lo || x >= self.hi {
            return self.exact(x);
        }
        let t = (x - self.lo) / (self.hi - self.lo) * (KDE_GRID - 1) as f64;
        let g = (t.floor() as usize).min(KDE_GRID - 2);
        let frac = t - g as f64;
        self.table[g] * (1.0 - frac) + self.table[g + 1] * frac
    }
}

fn silverman(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mean: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let var: f64 = points.iter().map(|p| p.1 * (p.0 - mean).powi(2)).sum();
    let sd = var.sqrt();
    let iqr = weighted_quantile(points, 0.75) - weighted_quantile(points, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        // all values identical: a narrow bump keeps the density finite
        1e-3 * (1.0 + mean.abs())
    }
}

fn weighted_quantile(sorted: &[(f64, f64)], q: f64) -> f64 {
    let mut acc = 0.0;
    for &(x, w) in sorted {
        acc += w;
        if acc >= q {
            return x;
        }
    }
    sorted.last().map_or(0.0, |p| p.0)
}

impl FeatureDensity {
    fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            FeatureDensity::Gaussian { mean, var } => {
                -0.5 * ((x - mean).powi(2) / var + (2.0 * PI * var).ln())
            }
            FeatureDensity::Kernel(k) => k.density(x).max(f64::MIN_POSITIVE).ln(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NaiveBayes {
    density: Density,
    ln_priors: Vec<f64>,
    /// `features[class][feature]`
    features: Vec<Vec<FeatureDensity>>,
    dim: usize,
}

pub fn nb_train(d: &Dataset, density: Density) -> Result<NaiveBayes> {
    nb_train_weighted(d, &vec![1.0; d.len()], density)
}

/// Naive Bayes with per-instance weights (priors, moments and kernel masses
/// are all weighted).
pub fn nb_train_weighted(d: &Dataset, weights: &[f64], density: Density) -> Result<NaiveBayes> {
    if d.is_empty() {
        return Err(Error::InvalidDataset("empty training set".into()));
    }
    let k = d.num_classes();
    let dim = d.dim();
    let mut mass = vec![0.0; k];
    for (inst, &w) in d.instances().iter().zip(weights) {
        mass[inst.label] += w;
    }
    if let Some(c) = d.class_counts().iter().position(|&c| c == 0) {
        return Err(Error::ClassAbsent(c));
    }
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("weights sum to zero".into()));
    }
    let mut features = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<(&[f64], f64)> = d
            .instances()
            .iter()
            .zip(weights)
            .filter(|(i, _)| i.label == c)
            .map(|(i, &w)| (i.features.as_slice(), w))
            .collect();
        let wsum: f64 = members.iter().map(|m| m.1).sum();
        // a class present only with zero weight falls back to equal weights
        let members: Vec<(&[f64], f64)> = if wsum > 0.0 {
            members
        } else {
            members.into_iter().map(|(x, _)| (x, 1.0)).collect()
        };
        let wsum: f64 = members.iter().map(|m| m.1).sum();
        let per_feature = (0..dim)
            .map(|j| match density {
                Density::Gaussian => {
                    let mean = members.iter().map(|(x, w)| w * x[j]).sum::<f64>() / wsum;
                    let var = members.iter().map(|(x, w)| w * (x[j] - mean).powi(2)).sum::<f64>()
                        / wsum;
                    FeatureDensity::Gaussian {
                        mean,
                        var: var.max(VAR_FLOOR),
                    }
                }
                Density::Kernel => {
                    let vals: Vec<(f64, f64)> = members
                        .iter()
                        .filter(|m| m.1 > 0.0)
                        .map(|(x, w)| (x[j], *w))
                        .collect();
                    FeatureDensity::Kernel(Kde::fit(&vals))
                }
            })
            .collect();
        features.push(per_feature);
    }
    let ln_priors = mass
        .iter()
        .map(|m| if *m > 0.0 { (m / total).ln() } else { f64::NEG_INFINITY })
        .collect();
    Ok(NaiveBayes {
        density,
        ln_priors,
        features,
        dim,
    })
}

impl NaiveBayes {
    /// Normalised class posteriors.
    pub fn posteriors(&self, x: &[f64]) -> Vec<f64> {
        let joint: Vec<f64> = self
            .ln_priors
            .iter()
            .zip(&self.features)
            .map(|(lp, fs)| lp + fs.iter().zip(x).map(|(f, &v)| f.ln_pdf(v)).sum::<f64>())
            .collect();
        let top = joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return vec![1.0 / joint.len() as f64; joint.len()];
        }
        let exps: Vec<f64> = joint.iter().map(|j| (j - top).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }
}

impl Classifier for NaiveBayes {
    fn predict(&self, x: &[f64]) -> Prediction {
        let post = self.posteriors(x);
        let mut best = 0;
        for (c, &p) in post.iter().enumerate() {
            if p > post[best] {
                best = c;
            }
        }
        Prediction::new(best, post[best])
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn num_classes(&self) -> usize {
        self.ln_priors.len()
    }

    fn manifest(&self) -> String {
        let mut s = format!("model=naive_bayes\ndensity={}\ndim={}\n", self.density, self.dim);
        for (c, lp) in self.ln_priors.iter().enumerate() {
            let _ = writeln!(s, "class{c}.prior={}", lp.exp());
            for (j, f) in self.features[c].iter().enumerate() {
                match f {
                    FeatureDensity::Gaussian { mean, var } => {
                        let _ = writeln!(s, "class{c}.f{j}.mean={mean}\nclass{c}.f{j}.var={var}");
                    }
                    FeatureDensity::Kernel(k) => {
                        let _ = writeln!(
                            s,
                            "class{c}.f{j}.bandwidth={}\nclass{c}.f{j}.points={}",
                            k.bandwidth,
                            k.points.len()
                        );
                    }
                }
            }
        }
        s
    }
}
