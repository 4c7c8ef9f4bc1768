use super::{Classifier, Prediction};
use crate::dataset::{Dataset, WeightTable};
use crate::error::{Error, Result};

/// One-feature threshold split. `feature == None` is a constant predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct Stump {
    feature: Option<usize>,
    threshold: f64,
    left: Prediction,
    right: Prediction,
    weighted_error: f64,
    dim: usize,
    num_classes: usize,
}

impl Stump {
    pub fn feature(&self) -> Option<usize> {
        self.feature
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Weighted training error as a fraction of the total weight.
    pub fn weighted_error(&self) -> f64 {
        self.weighted_error
    }
}

fn leaf(mass: &[f64], counts: &[usize]) -> Prediction {
    let total: f64 = mass.iter().sum();
    let mut best = 0;
    for c in 1..mass.len() {
        let better = if total > 0.0 {
            mass[c] > mass[best] || (mass[c] == mass[best] && counts[c] > counts[best])
        } else {
            counts[c] > counts[best]
        };
        if better {
            best = c;
        }
    }
    let conf = if total > 0.0 {
        mass[best] / total
    } else {
        let n: usize = counts.iter().sum();
        if n == 0 {
            0.0
        } else {
            counts[best] as f64 / n as f64
        }
    };
    Prediction::new(best, conf)
}

/// Stump minimising weighted error; `weights` is aligned with `d.instances()`.
pub(crate) fn fit(d: &Dataset, weights: &[f64]) -> Result<Stump> {
    if d.is_empty() {
        return Err(Error::InvalidDataset("empty training set".into()));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("weights sum to zero".into()));
    }
    let k = d.num_classes();
    let labels = d.labels();
    let mut mass = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (l, w) in labels.iter().zip(weights) {
        mass[*l] += w;
        counts[*l] += 1;
    }
    let constant = leaf(&mass, &counts);
    let constant_err = total - mass[constant.label];
    let mut best = Stump {
        feature: None,
        threshold: 0.0,
        left: constant,
        right: constant,
        weighted_error: constant_err / total,
        dim: d.dim(),
        num_classes: k,
    };
    let mut best_err = constant_err;

    let mut order: Vec<usize> = (0..d.len()).collect();
    let mut lm = vec![0.0; k];
    let mut lc = vec![0usize; k];
    for feature in 0..d.dim() {
        let x = |i: usize| d.instances()[i].features[feature];
        order.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
        lm.iter_mut().for_each(|v| *v = 0.0);
        lc.iter_mut().for_each(|v| *v = 0);
        for s in 0..order.len() - 1 {
            let i = order[s];
            lm[labels[i]] += weights[i];
            lc[labels[i]] += 1;
            let (lo, hi) = (x(i), x(order[s + 1]));
            if lo == hi {
                continue;
            }
            let rm: Vec<f64> = mass.iter().zip(&lm).map(|(a, b)| a - b).collect();
            let rc: Vec<usize> = counts.iter().zip(&lc).map(|(a, b)| a - b).collect();
            let l = leaf(&lm, &lc);
            let r = leaf(&rm, &rc);
            let err = (lm.iter().sum::<f64>() - lm[l.label]) + (rm.iter().sum::<f64>() - rm[r.label]);
            if err < best_err - 1e-12 * total {
                best_err = err;
                best = Stump {
                    feature: Some(feature),
                    threshold: lo + (hi - lo) / 2.0,
                    left: l,
                    right: r,
                    weighted_error: (err / total).max(0.0),
                    dim: d.dim(),
                    num_classes: k,
                };
            }
        }
    }
    Ok(best)
}

/// Weighted stump. Instances missing from `weights` get weight zero.
pub fn stump_train(d: &Dataset, weights: &WeightTable) -> Result<Stump> {
    let w: Vec<f64> = d
        .instances()
        .iter()
        .map(|i| weights.get(&i.id).copied().unwrap_or(0.0))
        .collect();
    fit(d, &w)
}

impl Classifier for Stump {
    fn predict(&self, x: &[f64]) -> Prediction {
        match self.feature {
            Some(f) if x[f] > self.threshold => self.right,
            _ => self.left,
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn manifest(&self) -> String {
        let feature = self.feature.map_or("none".to_string(), |f| f.to_string());
        format!(
            "model=stump\nfeature={feature}\nthreshold={}\nleft={} {}\nright={} {}\nweighted_error={}\n",
            self.threshold,
            self.left.label,
            self.left.confidence,
            self.right.label,
            self.right.confidence,
            self.weighted_error
        )
    }
}
