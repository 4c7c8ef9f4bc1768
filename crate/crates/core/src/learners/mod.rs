//! Confidence-producing base classifiers.
//!
//! Every learner implements [`Classifier`]: a trained, immutable predictor
//! that returns a class label and a confidence in `[0,1]`. [`LearnerSpec`] is
//! the serialisable recipe the grid uses to build fresh learners each epoch.

mod adaboost;
mod margin;
mod naive_bayes;
mod stump;
mod tree;

use std::fmt;
use std::str::FromStr;

pub use adaboost::{adaboost_m1_train, AdaBoost, BoostBase};
pub use margin::{circle_fit_train, linear_threshold_train, CircleFit, LinearThreshold};
pub use naive_bayes::{nb_train, nb_train_weighted, Density, NaiveBayes};
pub use stump::{stump_train, Stump};
pub use tree::{tree_train, DecisionTree};

use crate::dataset::{Dataset, Instance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub confidence: f64,
}

impl Prediction {
    pub fn new(label: usize, confidence: f64) -> Self {
        debug_assert!(confidence.is_finite());
        Prediction {
            label,
            confidence: confidence.clamp(0.0, 1.0),
        }
    }

    /// Score for class 1 in a binary problem, used for ranking metrics.
    pub fn positive_score(&self) -> f64 {
        if self.label == 1 {
            self.confidence
        } else {
            1.0 - self.confidence
        }
    }
}

pub trait Classifier: fmt::Debug + Send + Sync {
    fn predict(&self, x: &[f64]) -> Prediction;

    fn dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    /// Plain-text `key=value` description of the fitted parameters.
    fn manifest(&self) -> String;

    fn predict_instance(&self, x: &Instance) -> Result<Prediction> {
        if x.features.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.features.len(),
            });
        }
        Ok(self.predict(&x.features))
    }
}

/// Fraction of `d` that `clf` labels incorrectly.
pub fn error_rate(clf: &dyn Classifier, d: &Dataset) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    let wrong = d
        .instances()
        .iter()
        .filter(|i| clf.predict(&i.features).label != i.label)
        .count();
    wrong as f64 / d.len() as f64
}

/// Learner recipe. `train` always builds a fresh model.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerSpec {
    NaiveBayes { density: Density },
    Tree { max_depth: usize, min_leaf: usize },
    Stump,
    AdaBoost { base: BoostBase, rounds: usize },
    CircleFit,
    LinearThreshold { coordinate: usize },
}

impl LearnerSpec {
    pub fn train(&self, d: &Dataset) -> Result<Box<dyn Classifier>> {
        Ok(match self {
            LearnerSpec::NaiveBayes { density } => Box::new(nb_train(d, *density)?),
            LearnerSpec::Tree {
                max_depth,
                min_leaf,
            } => Box::new(tree_train(d, *max_depth, *min_leaf)?),
            LearnerSpec::Stump => {
                let w = vec![1.0; d.len()];
                Box::new(stump::fit(d, &w)?)
            }
            LearnerSpec::AdaBoost { base, rounds } => {
                Box::new(adaboost_m1_train(d, *base, *rounds)?)
            }
            LearnerSpec::CircleFit => Box::new(circle_fit_train(d)?),
            LearnerSpec::LinearThreshold { coordinate } => {
                Box::new(linear_threshold_train(d, *coordinate)?)
            }
        })
    }

    pub fn manifest(&self) -> String {
        match self {
            LearnerSpec::NaiveBayes { density } => format!("learner=nb\nnb.density={density}\n"),
            LearnerSpec::Tree {
                max_depth,
                min_leaf,
            } => format!("learner=tree\ntree.max_depth={max_depth}\ntree.min_leaf={min_leaf}\n"),
            LearnerSpec::Stump => "learner=stump\n".into(),
            LearnerSpec::AdaBoost { base, rounds } => {
                format!("learner=adaboost\nada.base={base}\nada.rounds={rounds}\n")
            }
            LearnerSpec::CircleFit => "learner=circle\n".into(),
            LearnerSpec::LinearThreshold { coordinate } => {
                format!("learner=linear\nlinear.coordinate={coordinate}\n")
            }
        }
    }
}

impl FromStr for Density {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(Density::Gaussian),
            "kde" | "kernel" => Ok(Density::Kernel),
            _ => Err(Error::Config(format!("unknown nb.density {s:?}"))),
        }
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Density::Gaussian => "gaussian",
            Density::Kernel => "kde",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Instance;
    use proptest::prelude::*;

    fn ring_data() -> Dataset {
        let inst = (0..60)
            .map(|i| {
                let t = i as f64 * 0.37;
                let r = if i % 2 == 0 { 0.2 + 0.003 * i as f64 } else { 0.6 + 0.004 * i as f64 };
                Instance::new(i, vec![r * t.cos(), r * t.sin()], i % 2)
            })
            .collect();
        Dataset::new(inst, 2).unwrap()
    }

    fn all_specs() -> Vec<LearnerSpec> {
        vec![
            LearnerSpec::NaiveBayes { density: Density::Gaussian },
            LearnerSpec::NaiveBayes { density: Density::Kernel },
            LearnerSpec::Tree { max_depth: 6, min_leaf: 1 },
            LearnerSpec::Stump,
            LearnerSpec::AdaBoost { base: BoostBase::Stump, rounds: 10 },
            LearnerSpec::AdaBoost { base: BoostBase::NaiveBayes(Density::Gaussian), rounds: 5 },
            LearnerSpec::CircleFit,
            LearnerSpec::LinearThreshold { coordinate: 0 },
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn confidences_stay_in_unit_interval(seed in 0u64..1000) {
            use rand::Rng;
            let d = ring_data();
            let models: Vec<_> = all_specs().iter().map(|s| s.train(&d).unwrap()).collect();
            let mut rng = crate::rng::from_seed(seed);
            for _ in 0..10_000 / 16 {
                let x = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
                for m in &models {
                    let p = m.predict(&x);
                    prop_assert!((0.0..=1.0).contains(&p.confidence));
                    prop_assert!(p.label < 2);
                }
            }
        }
    }

    #[test]
    fn retraining_gives_identical_predictions() {
        let d = ring_data();
        for spec in all_specs() {
            let a = spec.train(&d).unwrap();
            let b = spec.train(&d).unwrap();
            assert_eq!(a.manifest(), b.manifest(), "{spec:?}");
            for i in d.instances() {
                assert_eq!(a.predict(&i.features), b.predict(&i.features));
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let d = ring_data();
        let m = LearnerSpec::Stump.train(&d).unwrap();
        let bad = Instance::new(0, vec![1.0], 0);
        assert!(matches!(
            m.predict_instance(&bad),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }
}
