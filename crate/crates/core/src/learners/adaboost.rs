use std::fmt;
use std::str::FromStr;

use super::naive_bayes::{nb_train_weighted, Density, NaiveBayes};
use super::stump::{fit as stump_fit, Stump};
use super::{Classifier, Prediction};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Smallest weighted error used when a round is perfect, so that the
/// learner weight stays finite.
const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoostBase {
    Stump,
    NaiveBayes(Density),
}

impl fmt::Display for BoostBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoostBase::Stump => f.write_str("stump"),
            BoostBase::NaiveBayes(Density::Gaussian) => f.write_str("nb"),
            BoostBase::NaiveBayes(d) => write!(f, "nb-{d}"),
        }
    }
}

impl FromStr for BoostBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stump" | "stumps" => Ok(BoostBase::Stump),
            "nb" | "nb-gaussian" => Ok(BoostBase::NaiveBayes(Density::Gaussian)),
            "nb-kde" => Ok(BoostBase::NaiveBayes(Density::Kernel)),
            _ => Err(Error::Config(format!("unknown ada.base {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Member {
    Stump(Stump),
    Nb(NaiveBayes),
}

impl Member {
    fn predict(&self, x: &[f64]) -> Prediction {
        match self {
            Member::Stump(s) => s.predict(x),
            Member::Nb(n) => n.predict(x),
        }
    }

    fn manifest(&self) -> String {
        match self {
            Member::Stump(s) => s.manifest(),
            Member::Nb(n) => n.manifest(),
        }
    }
}

/// AdaBoost.M1 ensemble: weighted majority vote of the kept rounds.
#[derive(Debug, Clone)]
pub struct AdaBoost {
    members: Vec<(Member, f64)>,
    round_errors: Vec<f64>,
    degenerate: bool,
    dim: usize,
    num_classes: usize,
}

impl AdaBoost {
    pub fn rounds(&self) -> usize {
        self.members.len()
    }

    /// True when the first base learner could not beat 0.5 weighted error;
    /// the ensemble then consists of that learner alone.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Weighted training error of each kept round.
    pub fn round_errors(&self) -> &[f64] {
        &self.round_errors
    }

    /// Upper bound on the ensemble's training error, prod 2*sqrt(e(1-e)).
    pub fn training_error_bound(&self) -> f64 {
        self.round_errors
            .iter()
            .map(|e| 2.0 * (e * (1.0 - e)).sqrt())
            .product()
    }

    pub fn learner_weights(&self) -> Vec<f64> {
        self.members.iter().map(|(_, a)| *a).collect()
    }
}

fn train_member(d: &Dataset, base: BoostBase, w: &[f64]) -> Result<Member> {
    Ok(match base {
        BoostBase::Stump => Member::Stump(stump_fit(d, w)?),
        BoostBase::NaiveBayes(density) => Member::Nb(nb_train_weighted(d, w, density)?),
    })
}

pub fn adaboost_m1_train(d: &Dataset, base: BoostBase, rounds: usize) -> Result<AdaBoost> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("ada.rounds must be at least 1".into()));
    }
    if d.is_empty() {
        return Err(Error::InvalidDataset("empty training set".into()));
    }
    let n = d.len();
    let mut w = vec![1.0 / n as f64; n];
    let mut members = Vec::new();
    let mut round_errors = Vec::new();
    let mut degenerate = false;
    for t in 0..rounds {
        let m = train_member(d, base, &w)?;
        let correct: Vec<bool> = d
            .instances()
            .iter()
            .map(|i| m.predict(&i.features).label == i.label)
            .collect();
        let total: f64 = w.iter().sum();
        let eps = w
            .iter()
            .zip(&correct)
            .filter(|(_, c)| !**c)
            .map(|(w, _)| w)
            .sum::<f64>()
            / total;
        if eps >= 0.5 {
            if t == 0 {
                log::warn!("adaboost: first base learner has weighted error {eps:.4} >= 0.5");
                members.push((m, 1.0));
                round_errors.push(eps);
                degenerate = true;
            }
            break;
        }
        let capped = eps.max(MIN_ERROR);
        members.push((m, ((1.0 - capped) / capped).ln()));
        round_errors.push(eps);
        if eps == 0.0 {
            break;
        }
        let beta = eps / (1.0 - eps);
        for (wi, c) in w.iter_mut().zip(&correct) {
            if *c {
                *wi *= beta;
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= s);
    }
    Ok(AdaBoost {
        members,
        round_errors,
        degenerate,
        dim: d.dim(),
        num_classes: d.num_classes(),
    })
}

impl Classifier for AdaBoost {
    fn predict(&self, x: &[f64]) -> Prediction {
        let mut votes = vec![0.0; self.num_classes];
        for (m, a) in &self.members {
            votes[m.predict(x).label] += a;
        }
        let total: f64 = votes.iter().sum();
        let mut best = 0;
        for c in 1..votes.len() {
            if votes[c] > votes[best] {
                best = c;
            }
        }
        let conf = if total > 0.0 { votes[best] / total } else { 0.0 };
        Prediction::new(best, conf)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn manifest(&self) -> String {
        let mut s = format!(
            "model=adaboost_m1\nrounds={}\ndegenerate={}\n",
            self.members.len(),
            self.degenerate
        );
        for (i, (m, a)) in self.members.iter().enumerate() {
            s.push_str(&format!("[round{i}]\nalpha={a}\n"));
            s.push_str(&m.manifest());
        }
        s
    }
}
