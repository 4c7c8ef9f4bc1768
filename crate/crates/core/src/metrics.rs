//! Ranking metrics, binned histograms and evaluation reports.

use std::time::Duration;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::Classifier;

fn check_binary(scores: &[(f64, bool)]) -> Result<(usize, usize)> {
    let pos = scores.iter().filter(|s| s.1).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument("ranking metrics need both classes".into()));
    }
    if scores.iter().any(|s| s.0.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    Ok((pos, neg))
}

/// Descending-score sweep, yielding cumulative (tp, fp) at the end of every
/// tie group.
fn sweep(scores: &[(f64, bool)]) -> Vec<(usize, usize)> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((tp, fp));
    }
    out
}

/// Area under the ROC curve by the trapezoid rule; tied scores form a
/// single diagonal step. `true` marks the positive class.
pub fn auc_roc(scores: &[(f64, bool)]) -> Result<f64> {
    let (p, n) = check_binary(scores)?;
    let mut area = 0.0;
    let (mut tp0, mut fp0) = (0usize, 0usize);
    for (tp, fp) in sweep(scores) {
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        tp0 = tp;
        fp0 = fp;
    }
    Ok(area / (p as f64 * n as f64))
}

/// Area under the precision-recall curve as average precision: precision at
/// each threshold times the recall gained there.
pub fn auc_prc(scores: &[(f64, bool)]) -> Result<f64> {
    let (p, _) = check_binary(scores)?;
    let mut area = 0.0;
    let mut tp0 = 0usize;
    for (tp, fp) in sweep(scores) {
        if tp > tp0 {
            area += (tp - tp0) as f64 / p as f64 * tp as f64 / (tp + fp) as f64;
        }
        tp0 = tp;
    }
    Ok(area)
}

/// Mean AUC drop from clean to noisy training, one entry per dataset.
pub fn impact(auc_clean: &[f64], auc_noisy: &[f64]) -> Result<f64> {
    if auc_clean.len() != auc_noisy.len() {
        return Err(Error::DimensionMismatch {
            expected: auc_clean.len(),
            found: auc_noisy.len(),
        });
    }
    if auc_clean.is_empty() {
        return Err(Error::InvalidArgument("impact of zero datasets".into()));
    }
    let total: f64 = auc_clean.iter().zip(auc_noisy).map(|(c, n)| c - n).sum();
    Ok(total / auc_clean.len() as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Equal-width bins starting at `lo`. Values past the last edge land in the
/// last bin, values below `lo` in the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn empty(lo: f64, width: f64, bins: usize) -> Self {
        assert!(bins > 0 && width > 0.0);
        Histogram {
            edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
            masses: vec![0.0; bins],
        }
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn bin_of(&self, v: f64) -> usize {
        let lo = self.edges[0];
        let width = self.edges[1] - self.edges[0];
        // the small slack keeps values such as 0.3 out of the bin below it
        let k = ((v - lo) / width + 1e-9).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.bins() - 1)
        }
    }

    pub fn add(&mut self, v: f64, mass: f64) {
        let k = self.bin_of(v);
        self.masses[k] += mass;
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn normalized(&self) -> Histogram {
        let t = self.total();
        Histogram {
            edges: self.edges.clone(),
            masses: self
                .masses
                .iter()
                .map(|m| if t > 0.0 { m / t } else { 0.0 })
                .collect(),
        }
    }

    /// Mass in bins whose lower edge lies in [lo, hi).
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        self.masses
            .iter()
            .zip(&self.edges)
            .filter(|(_, e)| **e >= lo - 1e-9 && **e < hi - 1e-9)
            .map(|(m, _)| m)
            .sum()
    }

    /// Half the L1 distance between the normalised histograms.
    pub fn total_variation(&self, other: &Histogram) -> Result<f64> {
        if self.bins() != other.bins() {
            return Err(Error::DimensionMismatch {
                expected: self.bins(),
                found: other.bins(),
            });
        }
        let (a, b) = (self.normalized(), other.normalized());
        Ok(a.masses.iter().zip(&b.masses).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,mass\n");
        for (i, m) in self.masses.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], m));
        }
        s
    }
}

/// Counts of distances from `center`, `bins` bins of `width` from zero.
pub fn radial_histogram<'a>(
    points: impl IntoIterator<Item = &'a [f64]>,
    center: &[f64],
    width: f64,
    bins: usize,
) -> Histogram {
    let mut h = Histogram::empty(0.0, width, bins);
    for p in points {
        let r = p
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        h.add(r, 1.0);
    }
    h
}

/// Counts of one coordinate.
pub fn axis_histogram<'a>(
    points: impl IntoIterator<Item = &'a [f64]>,
    axis: usize,
    lo: f64,
    width: f64,
    bins: usize,
) -> Histogram {
    let mut h = Histogram::empty(lo, width, bins);
    for p in points {
        h.add(p[axis], 1.0);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub accuracy: f64,
    pub auc_roc: f64,
    pub auc_prc: f64,
    pub misclassifications: usize,
    pub runtime_secs: f64,
    pub peak_distinct: usize,
}

impl MetricReport {
    /// Scores a binary classifier on `test`; class 1 is the positive class.
    /// AUCs are NaN when `test` holds a single class.
    pub fn evaluate(clf: &dyn Classifier, test: &Dataset, runtime: Duration, peak_distinct: usize) -> Self {
        let mut wrong = 0;
        let mut scores = Vec::with_capacity(test.len());
        for i in test.instances() {
            let p = clf.predict(&i.features);
            if p.label != i.label {
                wrong += 1;
            }
            scores.push((p.positive_score(), i.label == 1));
        }
        MetricReport {
            accuracy: if test.is_empty() {
                0.0
            } else {
                1.0 - wrong as f64 / test.len() as f64
            },
            auc_roc: auc_roc(&scores).unwrap_or(f64::NAN),
            auc_prc: auc_prc(&scores).unwrap_or(f64::NAN),
            misclassifications: wrong,
            runtime_secs: runtime.as_secs_f64(),
            peak_distinct,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs_oracle(s: &[(f64, bool)]) -> f64 {
        let (mut conc, mut ties, mut p, mut n) = (0.0, 0.0, 0.0, 0.0);
        for a in s.iter().filter(|x| x.1) {
            p += 1.0;
            for b in s.iter().filter(|x| !x.1) {
                if a.0 > b.0 {
                    conc += 1.0;
                } else if a.0 == b.0 {
                    ties += 1.0;
                }
            }
        }
        n += s.iter().filter(|x| !x.1).count() as f64;
        (conc + 0.5 * ties) / (p * n)
    }

    /// Average precision by enumerating every distinct threshold directly.
    fn ap_oracle(s: &[(f64, bool)]) -> f64 {
        let p = s.iter().filter(|x| x.1).count() as f64;
        let mut ts: Vec<f64> = s.iter().map(|x| x.0).collect();
        ts.sort_by(|a, b| b.total_cmp(a));
        ts.dedup();
        let mut prev_recall = 0.0;
        let mut area = 0.0;
        for t in ts {
            let tp = s.iter().filter(|x| x.0 >= t && x.1).count() as f64;
            let k = s.iter().filter(|x| x.0 >= t).count() as f64;
            let recall = tp / p;
            area += (recall - prev_recall) * tp / k;
            prev_recall = recall;
        }
        area
    }

    const FOUR: [(f64, bool); 4] = [(0.9, true), (0.8, false), (0.7, true), (0.1, false)];

    #[test]
    fn roc_examples() {
        assert_eq!(auc_roc(&[(0.9, true), (0.8, true), (0.2, false)]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[(0.5, true), (0.5, false), (0.5, true)]).unwrap(), 0.5);
        assert!((auc_roc(&FOUR).unwrap() - pairs_oracle(&FOUR)).abs() < 1e-15);
        assert!((auc_roc(&FOUR).unwrap() - 0.75).abs() < 1e-15);
        assert!(auc_roc(&[(0.1, true)]).is_err());
    }

    #[test]
    fn prc_examples() {
        assert_eq!(auc_prc(&[(0.9, true), (0.8, true), (0.2, false)]).unwrap(), 1.0);
        assert!((auc_prc(&FOUR).unwrap() - ap_oracle(&FOUR)).abs() < 1e-15);
        assert!(auc_prc(&[(0.2, false), (0.3, false)]).is_err());
    }

    #[test]
    fn prc_of_random_ranking_is_prevalence() {
        use rand::Rng;
        let mut rng = crate::rng::from_seed(3);
        let s: Vec<(f64, bool)> = (0..200_000)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>() < 0.2))
            .collect();
        assert!((auc_prc(&s).unwrap() - 0.2).abs() < 0.01);
    }

    #[test]
    fn impact_examples() {
        assert_eq!(impact(&[0.9, 0.8], &[0.9, 0.8]).unwrap(), 0.0);
        assert!((impact(&[90.0, 80.0], &[88.0, 78.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(impact(&[1.0], &[]).is_err());
    }

    #[test]
    fn radial_bins() {
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let t = i as f64;
                vec![0.35 * t.cos(), 0.35 * t.sin()]
            })
            .collect();
        let h = radial_histogram(pts.iter().map(|p| p.as_slice()), &[0.0, 0.0], 0.1, 15).normalized();
        assert!((h.masses[3] - 1.0).abs() < 1e-12);
        assert_eq!(h.total_variation(&h).unwrap(), 0.0);
        let edge = Histogram::empty(0.0, 0.1, 15);
        assert_eq!(edge.bin_of(0.3), 3);
        assert_eq!(edge.bin_of(9.0), 14);
    }

    proptest! {
        #[test]
        fn roc_matches_pair_count(v in prop::collection::vec((0u8..20, any::<bool>()), 2..200)) {
            let s: Vec<(f64, bool)> = v.iter().map(|(a, b)| (*a as f64 / 20.0, *b)).collect();
            prop_assume!(s.iter().any(|x| x.1) && s.iter().any(|x| !x.1));
            prop_assert!((auc_roc(&s).unwrap() - pairs_oracle(&s)).abs() < 1e-12);
            prop_assert!((auc_prc(&s).unwrap() - ap_oracle(&s)).abs() < 1e-12);
        }

        #[test]
        fn histogram_permutation_invariant(mut v in prop::collection::vec(0.0f64..2.0, 1..100), seed in 0u64..100) {
            use rand::seq::SliceRandom;
            let pts: Vec<[f64; 1]> = v.iter().map(|x| [*x]).collect();
            let a = axis_histogram(pts.iter().map(|p| p.as_slice()), 0, 0.0, 0.25, 8);
            v.shuffle(&mut crate::rng::from_seed(seed));
            let pts: Vec<[f64; 1]> = v.iter().map(|x| [*x]).collect();
            let b = axis_histogram(pts.iter().map(|p| p.as_slice()), 0, 0.0, 0.25, 8);
            prop_assert_eq!(a, b);
        }
    }
}
